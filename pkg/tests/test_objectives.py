import math
import textwrap

import numpy as np
import pytest

from clustergp.errors import ConfigError, EvaluationError
from clustergp.objectives import (
    KnownOptimum,
    external_command,
    load_replay,
    matmul_like,
    objective_by_name,
    replay,
    synthetic,
    synthetic_names,
    with_noise,
)
from clustergp.space import box


# frozen via an independent route: solve k*(V/S)^2 + A*(V/S) = P0*V0*Ta/T0
# for V with Brent root-finding, then plug into the cycle-time formula
PISTON_ORACLE = [
    ((45.0, 0.0125, 0.006, 3000.0, 100000.0, 293.0, 350.0), 0.4643970224717999),
    ((30.0, 0.005, 0.002, 1000.0, 90000.0, 290.0, 340.0), 0.4670028391605745),
    ((60.0, 0.020, 0.010, 5000.0, 110000.0, 296.0, 360.0), 0.43476797627910463),
    ((55.0, 0.007, 0.009, 1200.0, 104000.0, 291.5, 341.0), 0.8853364679304035),
]


def test_registry_contains_expected_names():
    names = synthetic_names()
    for expected in ("f0", "f1", "f2", "f3", "f4", "bukin_n6", "easom",
                     "michalewicz", "schaffer_n2", "holder_table",
                     "cross_in_tray", "piston"):
        assert expected in names


def test_unknown_name_raises():
    with pytest.raises(ConfigError):
        synthetic("not_a_function")


def test_f1_is_piecewise_linear_quadratic():
    f = synthetic("f1")
    assert f.evaluate(np.array([-0.5])) == 1.5
    assert f.evaluate(np.array([0.5])) == 0.25
    assert f.evaluate(np.array([0.0])) == 0.0
    assert f.direction == "minimize"


def test_f3_peak_and_shape():
    f = synthetic("f3")
    assert f.evaluate(np.array([0.25, 0.25])) == 1.0
    x = np.array([-0.5, 0.75])
    expected = 1.0 / (1.0 + 0.75 ** 2 + 0.5 ** 2)
    assert f.evaluate(x) == pytest.approx(expected, rel=1e-15)


def test_f4_halfplane_split():
    f4 = synthetic("f4")
    f3 = synthetic("f3")
    up = np.array([0.3, 0.4])
    assert f4.evaluate(up) == f3.evaluate(up)
    low = np.array([0.0, -0.5])
    assert f4.evaluate(low) == pytest.approx(0.25 / 1.25, rel=1e-15)


def test_f2_circle_valley():
    f = synthetic("f2")
    on = np.array([1.0, 0.0])
    assert f.evaluate(on) == 0.0
    outside = np.array([2.0, 0.0])
    assert f.evaluate(outside) == pytest.approx(1.0)
    inside = np.array([0.5, 0.0])
    assert f.evaluate(inside) == pytest.approx(0.5 ** 4)
    assert f.known_optimum.distance_to(outside) == pytest.approx(1.0)


@pytest.mark.parametrize("name", [n for n in synthetic_names()])
def test_known_optimum_value_is_attained(name):
    obj = synthetic(name)
    opt = obj.known_optimum
    if opt is None or not opt.points:
        pytest.skip("no point-valued optimum recorded")
    for p in opt.points:
        val = obj.evaluate(np.array(p))
        assert val == pytest.approx(opt.value, abs=opt.tolerance)


@pytest.mark.parametrize("name", [n for n in synthetic_names()])
def test_random_points_do_not_beat_known_optimum(name):
    obj = synthetic(name)
    opt = obj.known_optimum
    if opt is None:
        pytest.skip("no optimum recorded")
    rng = np.random.default_rng(7)
    lo = np.array([d.lower for d in obj.space.dims])
    hi = np.array([d.upper for d in obj.space.dims])
    slack = max(opt.tolerance, 1e-9)
    for _ in range(500):
        x = lo + rng.random(obj.space.d) * (hi - lo)
        v = obj.evaluate(x)
        if obj.direction == "minimize":
            assert v >= opt.value - slack
        else:
            assert v <= opt.value + slack


def test_piston_matches_root_finding_oracle():
    obj = synthetic("piston")
    for point, expected in PISTON_ORACLE:
        got = obj.evaluate(np.array(point))
        assert got == pytest.approx(expected, rel=1e-10)


def test_piston_direction_and_dimension():
    obj = synthetic("piston")
    assert obj.direction == "maximize"
    assert obj.space.d == 7
    assert obj.known_optimum is None


def test_matmul_like_peak_by_enumeration():
    obj = matmul_like()
    values = {b: obj.evaluate(np.array([float(b)])) for b in range(1, 1001)}
    best = max(values, key=values.get)
    assert best == 112
    assert values[112] == 2010.702
    assert obj.known_optimum.value == 2010.702
    assert obj.known_optimum.points == ((112.0,),)


def test_matmul_like_regime_boundaries_drop():
    obj = matmul_like()
    f = lambda b: obj.evaluate(np.array([float(b)]))
    assert f(159) > f(160)
    assert f(499) > f(500)


def test_matmul_like_ripple_rewards_multiples_of_eight():
    obj = matmul_like()
    f = lambda b: obj.evaluate(np.array([float(b)]))
    # within the plateau the ripple dominates the slow drift
    assert f(160) > f(162)
    assert f(168) > f(166)
    assert f(168) > f(170)


def test_matmul_like_peak_is_narrow():
    obj = matmul_like()
    hot = [b for b in range(1, 1001)
           if obj.evaluate(np.array([float(b)])) >= 2000.0]
    assert 3 <= len(hot) <= 30
    assert all(80 <= b <= 140 for b in hot)


def test_matmul_like_rounds_float_input():
    obj = matmul_like()
    assert obj.evaluate(np.array([112.4])) == obj.evaluate(np.array([112.0]))


def test_objective_by_name_routes_matmul():
    assert objective_by_name("matmul_like").name == "matmul_like"
    assert objective_by_name("f3").name == "f3"


def test_known_optimum_distance_prefers_nearest_point():
    opt = KnownOptimum(0.0, points=((0.0, 0.0), (10.0, 10.0)))
    assert opt.distance_to(np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert opt.distance_to(np.array([9.0, 10.0])) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# replay tables
# ---------------------------------------------------------------------------

def _write_replay(tmp_path, text):
    path = tmp_path / "table.csv"
    path.write_text(textwrap.dedent(text))
    return str(path)


def test_replay_roundtrip(tmp_path):
    space = box((0, 10), kind="integer")
    path = _write_replay(tmp_path, """\
        x0,y
        0,1.5
        3,2.5
        7,0.5
    """)
    table = load_replay(path, space)
    obj = replay(table)
    assert obj.evaluate(np.array([3.0])) == 2.5
    assert obj.direction == "maximize"
    assert obj.known_optimum.value == 2.5
    assert obj.known_optimum.points == ((3.0,),)


def test_replay_minimize_best(tmp_path):
    space = box((0, 10), kind="integer")
    path = _write_replay(tmp_path, """\
        x0,y
        0,1.5
        7,0.5
    """)
    obj = replay(load_replay(path, space), direction="minimize")
    assert obj.known_optimum.value == 0.5
    assert obj.known_optimum.points == ((7.0,),)


def test_replay_missing_point_raises(tmp_path):
    space = box((0, 10), kind="integer")
    path = _write_replay(tmp_path, """\
        x0,y
        0,1.5
    """)
    obj = replay(load_replay(path, space))
    with pytest.raises(EvaluationError):
        obj.evaluate(np.array([4.0]))


def test_replay_bad_header_raises(tmp_path):
    space = box((0, 10), kind="integer")
    path = _write_replay(tmp_path, """\
        a,b
        0,1.5
    """)
    with pytest.raises(ConfigError):
        load_replay(path, space)


def test_replay_off_lattice_point_raises(tmp_path):
    space = box((0, 10), kind="integer")
    path = _write_replay(tmp_path, """\
        x0,y
        0.5,1.5
    """)
    with pytest.raises(ConfigError):
        load_replay(path, space)


def test_replay_empty_table_raises(tmp_path):
    space = box((0, 10), kind="integer")
    path = _write_replay(tmp_path, """\
        x0,y
    """)
    with pytest.raises(ConfigError):
        load_replay(path, space)


def test_replay_two_dims(tmp_path):
    space = box((0, 4), (0, 4), kind="integer")
    path = _write_replay(tmp_path, """\
        x0,x1,y
        0,0,1.0
        2,3,9.0
    """)
    table = load_replay(path, space)
    assert table.lookup(np.array([2.0, 3.0])) == 9.0


# ---------------------------------------------------------------------------
# noise wrapper
# ---------------------------------------------------------------------------

def test_with_noise_statistics():
    base = synthetic("f3")
    rng = np.random.default_rng(11)
    noisy = with_noise(base, 0.1, rng)
    x = np.array([0.25, 0.25])
    draws = np.array([noisy.evaluate(x) for _ in range(4000)])
    assert abs(draws.mean() - 1.0) < 0.01
    assert abs(draws.std() - 0.1) < 0.01
    assert noisy.direction == base.direction
    assert noisy.space is base.space


def test_with_noise_zero_sd_is_identity():
    base = synthetic("f3")
    rng = np.random.default_rng(0)
    assert with_noise(base, 0.0, rng) is base


def test_with_noise_negative_sd_raises():
    with pytest.raises(ConfigError):
        with_noise(synthetic("f3"), -0.1, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# external commands
# ---------------------------------------------------------------------------

def test_external_command_parses_last_line():
    space = box((0.0, 10.0))
    obj = external_command("echo header; echo {x0}", space)
    assert obj.evaluate(np.array([3.0])) == 3.0


def test_external_command_integer_formatting():
    space = box((0, 100), kind="integer")
    obj = external_command("echo {x0}", space)
    assert obj.evaluate(np.array([42.0])) == 42.0


def test_external_command_nonzero_exit_raises():
    space = box((0.0, 1.0))
    obj = external_command("echo {x0}; exit 3", space)
    with pytest.raises(EvaluationError):
        obj.evaluate(np.array([0.5]))


def test_external_command_non_numeric_output_raises():
    space = box((0.0, 1.0))
    obj = external_command("echo value-{x0}", space)
    with pytest.raises(EvaluationError):
        obj.evaluate(np.array([0.5]))


def test_external_command_timeout_raises():
    space = box((0.0, 1.0))
    obj = external_command("sleep 2; echo {x0}", space, timeout=0.3)
    with pytest.raises(EvaluationError):
        obj.evaluate(np.array([0.5]))


def test_external_command_missing_placeholder_raises():
    space = box((0.0, 1.0), (0.0, 1.0))
    with pytest.raises(ConfigError):
        external_command("echo {x0}", space)


def test_external_command_extra_placeholder_raises():
    space = box((0.0, 1.0))
    with pytest.raises(ConfigError):
        external_command("echo {x0} {x1}", space)

"""Search-space boxes and the affine map between raw and unit coordinates.

Continuous dimensions map affinely onto [0, 1].  Integer and stepped-integer
dimensions share the affine map but round to the nearest lattice point on the
way back out, clamping after the round so results always stay inside bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

KINDS = ("continuous", "integer", "integer-step")

_EDGE_SLACK = 1e-9


@dataclass(frozen=True)
class DimensionSpec:
    """One box dimension: bounds, kind, and the lattice step for stepped kinds."""

    lower: float
    upper: float
    kind: str = "continuous"
    step: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown dimension kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.lower) or not np.isfinite(self.upper):
            raise ConfigError("dimension bounds must be finite")
        if not self.lower < self.upper:
            raise ConfigError(f"dimension bounds must satisfy lower < upper, got [{self.lower}, {self.upper}]")
        if self.kind == "integer-step":
            if self.step is None or self.step <= 0:
                raise ConfigError("integer-step dimensions need a positive step")
        elif self.step is not None:
            raise ConfigError(f"step is only meaningful for integer-step dimensions, not {self.kind!r}")
        if self.kind == "integer" and (self.lower != int(self.lower) or self.upper != int(self.upper)):
            raise ConfigError("integer dimensions need integral bounds")

    @property
    def span(self) -> float:
        return self.upper - self.lower

    def quantize(self, value: float) -> float:
        """Snap a raw value to this dimension's lattice, clamping after the round."""
        if self.kind == "continuous":
            return float(min(max(value, self.lower), self.upper))
        if self.kind == "integer":
            out = float(np.rint(value))
            return float(min(max(out, self.lower), self.upper))
        # integer-step: lattice points are lower + m * step, m = 0..m_max
        m = np.rint((value - self.lower) / self.step)
        m_max = np.floor(self.span / self.step + _EDGE_SLACK)
        m = min(max(m, 0.0), m_max)
        return float(self.lower + m * self.step)


@dataclass(frozen=True)
class SearchSpace:
    """An ordered box of dimensions defining the raw search domain."""

    dims: tuple[DimensionSpec, ...]

    def __post_init__(self):
        if not self.dims:
            raise ConfigError("a search space needs at least one dimension")
        object.__setattr__(self, "dims", tuple(self.dims))

    @property
    def d(self) -> int:
        return len(self.dims)

    def _lowers(self) -> np.ndarray:
        return np.array([dim.lower for dim in self.dims])

    def _spans(self) -> np.ndarray:
        return np.array([dim.span for dim in self.dims])

    def normalize(self, raw) -> np.ndarray:
        """Map a raw in-bounds point to the unit cube."""
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (self.d,):
            raise DomainError(f"expected a point of dimension {self.d}, got shape {raw.shape}")
        lowers, spans = self._lowers(), self._spans()
        slack = _EDGE_SLACK * spans
        if np.any(raw < lowers - slack) or np.any(raw > lowers + spans + slack):
            raise DomainError(f"point {raw.tolist()} is outside the search box")
        return np.clip((raw - lowers) / spans, 0.0, 1.0)

    def denormalize(self, unit) -> np.ndarray:
        """Map a unit-cube point back to raw coordinates, snapping lattice kinds."""
        affine = self.to_raw_affine(unit)
        return np.array([dim.quantize(v) for dim, v in zip(self.dims, affine)])

    def to_raw_affine(self, unit) -> np.ndarray:
        """Pure affine inverse of normalize, without lattice rounding.

        Accepts one point of shape (d,) or a batch of shape (n, d).
        """
        unit = np.asarray(unit, dtype=float)
        if unit.shape[-1:] != (self.d,) or unit.ndim not in (1, 2):
            raise DomainError(f"expected points of dimension {self.d}, got shape {unit.shape}")
        if np.any(unit < -_EDGE_SLACK) or np.any(unit > 1.0 + _EDGE_SLACK):
            raise DomainError(f"unit points outside [0, 1]^{self.d}")
        unit = np.clip(unit, 0.0, 1.0)
        return self._lowers() + unit * self._spans()

    def quantize(self, raw) -> np.ndarray:
        """Snap a raw point onto the space lattice (identity for continuous dims)."""
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (self.d,):
            raise DomainError(f"expected a point of dimension {self.d}, got shape {raw.shape}")
        return np.array([dim.quantize(v) for dim, v in zip(self.dims, raw)])

    def random_unit_point(self, rng: np.random.Generator) -> np.ndarray:
        """Draw one uniform point in the unit cube."""
        return rng.random(self.d)

    def to_config(self) -> list[dict]:
        out = []
        for dim in self.dims:
            rec = {"lower": dim.lower, "upper": dim.upper, "kind": dim.kind}
            if dim.step is not None:
                rec["step"] = dim.step
            out.append(rec)
        return out

    @classmethod
    def from_config(cls, records) -> "SearchSpace":
        if not isinstance(records, (list, tuple)):
            raise ConfigError("space config must be a list of per-dimension records")
        dims = []
        for i, rec in enumerate(records):
            if not isinstance(rec, dict) or "lower" not in rec or "upper" not in rec:
                raise ConfigError(f"space record {i} must be a dict with lower/upper")
            extra = set(rec) - {"lower", "upper", "kind", "step"}
            if extra:
                raise ConfigError(f"space record {i} has unknown keys {sorted(extra)}")
            dims.append(DimensionSpec(
                lower=float(rec["lower"]),
                upper=float(rec["upper"]),
                kind=rec.get("kind", "continuous"),
                step=float(rec["step"]) if rec.get("step") is not None else None,
            ))
        return cls(dims=tuple(dims))


def box(*bounds, kind: str = "continuous", step: float | None = None) -> SearchSpace:
    """Build a space where every dimension shares one kind: box((0, 1), (0, 2))."""
    return SearchSpace(dims=tuple(
        DimensionSpec(lower=float(lo), upper=float(hi), kind=kind, step=step)
        for lo, hi in bounds
    ))

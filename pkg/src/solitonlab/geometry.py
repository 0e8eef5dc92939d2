"""Orbit-type presets and curvature of the two-summand principal orbit.

A preset fixes the dimensions of the collapsing sphere (``d1``) and of the
base ``Q = G/H`` (``d2``), the Einstein constant of the base, the O'Neill
norm of the submersion and the soliton constant.  The principal orbit metric
is ``f^2 B|p1 + h^2 B|p2``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import re
from typing import TYPE_CHECKING, Any

from .errors import DomainError, PreconditionError, UnknownPresetError

if TYPE_CHECKING:
    from .dynamics import SolitonState


class Collapse(str, enum.Enum):
    """Which factor collapses at the far end of the orbit interval."""

    SAME_END = "SameEnd"  # the fibre sphere collapses again
    OPPOSITE_END = "OppositeEnd"  # the base factor collapses


@dataclasses.dataclass(frozen=True)
class OrbitPreset:
    name: str
    d1: int
    d2: int
    c_q: float
    a2: float
    epsilon: float
    collapse: Collapse = Collapse.SAME_END

    def __post_init__(self) -> None:
        if int(self.d1) != self.d1 or self.d1 < 1:
            raise PreconditionError(f"d1 must be a positive integer, got {self.d1}")
        if int(self.d2) != self.d2 or self.d2 < 1:
            raise PreconditionError(f"d2 must be a positive integer, got {self.d2}")
        if not self.c_q > 0:
            raise PreconditionError(f"c_q must be positive, got {self.c_q}")
        if not self.a2 >= 0:
            raise PreconditionError(f"a2 must be nonnegative, got {self.a2}")
        if not self.epsilon < 0:
            raise PreconditionError(f"epsilon must be negative (shrinker), got {self.epsilon}")
        object.__setattr__(self, "d1", int(self.d1))
        object.__setattr__(self, "d2", int(self.d2))
        object.__setattr__(self, "c_q", float(self.c_q))
        object.__setattr__(self, "a2", float(self.a2))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "collapse", Collapse(self.collapse))

    @property
    def n(self) -> int:
        return self.d1 + self.d2

    @property
    def ubar_min(self) -> float:
        """Lower admissible bound for the initial potential."""
        return -(self.n + 1) / 2.0

    def with_epsilon(self, epsilon: float) -> OrbitPreset:
        return dataclasses.replace(self, epsilon=epsilon)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["collapse"] = self.collapse.value
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> OrbitPreset:
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in fields})


def ricci_components(preset: OrbitPreset, f: float, h: float) -> tuple[float, float]:
    """Eigenvalues ``(r1, r2)`` of the Ricci endomorphism of the principal orbit.

    ``r1`` acts on the fibre directions, ``r2`` on the base directions.
    """
    if not (f > 0 and h > 0):
        raise DomainError(f"ricci_components requires f, h > 0 (got f={f}, h={h})")
    oneill = preset.a2 * f * f / (h * h * h * h)
    r1 = (preset.d1 - 1) / (f * f) + preset.d2 / preset.d1 * oneill
    r2 = preset.c_q / (h * h) - 2.0 * oneill
    if not (math.isfinite(r1) and math.isfinite(r2)):
        raise DomainError(f"non-finite curvature at f={f}, h={h}")
    return r1, r2


def scalar_and_volume(preset: OrbitPreset, state: SolitonState) -> tuple[float, float, float]:
    """Scalar curvature ``S``, mean curvature ``trL`` and relative volume ``v``.

    ``v = f^d1 h^d2``; the constant background factor is dropped since only
    ratios and logarithmic derivatives of ``v`` are used.
    """
    r1, r2 = ricci_components(preset, state.f, state.h)
    S = preset.d1 * r1 + preset.d2 * r2
    trL = preset.d1 * state.fdot / state.f + preset.d2 * state.hdot / state.h
    v = state.f ** preset.d1 * state.h ** preset.d2
    if not (math.isfinite(S) and math.isfinite(trL) and math.isfinite(v) and v > 0):
        raise DomainError("scalar curvature or volume not finite")
    return S, trL, v


def default_epsilon(n: int) -> float:
    """Soliton constant placing the round-sphere start at ``hbar = 10``."""
    return -n / 50.0


_FIXED = {
    "cp2": dict(d1=1, d2=2, c_q=4.0, a2=1.0, epsilon=-7.46562, collapse=Collapse.SAME_END),
    "s5": dict(d1=2, d2=2, c_q=1.0, a2=0.0, epsilon=-0.08, collapse=Collapse.OPPOSITE_END),
    "s2xs3": dict(d1=2, d2=2, c_q=1.0, a2=0.0, epsilon=-0.08, collapse=Collapse.SAME_END),
    "s11": dict(d1=5, d2=5, c_q=4.0, a2=0.0, epsilon=-0.2, collapse=Collapse.OPPOSITE_END),
    "cap2": dict(d1=7, d2=8, c_q=28.0, a2=7.0, epsilon=default_epsilon(15), collapse=Collapse.SAME_END),
    # flat R^3 x S^2 Gaussian: epsilon/2 = -4, used to test instability
    "s2xs2": dict(d1=2, d2=2, c_q=1.0, a2=0.0, epsilon=-8.0, collapse=Collapse.SAME_END),
}

_FAMILY = re.compile(r"^(hp|f)\((\d+)\)$")


def preset_names() -> list[str]:
    return sorted(_FIXED) + ["hp(n)", "f(n)"]


def preset_catalog(name: str, epsilon: float | None = None) -> OrbitPreset:
    """Look up a named orbit type.

    Recognised names: ``cp2``, ``s5``, ``s2xs3``, ``s11``, ``cap2``,
    ``s2xs2`` and the families ``hp(n)`` and ``f(n)`` for ``n >= 1``.
    ``epsilon`` overrides the catalogue value.
    """
    key = name.strip().lower()
    if key in _FIXED:
        preset = OrbitPreset(name=key, **_FIXED[key])
    else:
        m = _FAMILY.match(key)
        if not m or int(m.group(2)) < 1:
            raise UnknownPresetError(f"unknown preset {name!r}; known: {', '.join(preset_names())}")
        fam, k = m.group(1), int(m.group(2))
        d1 = 3 if fam == "hp" else 2
        a2 = 3.0 if fam == "hp" else 8.0
        d2 = 4 * k
        preset = OrbitPreset(
            name=key, d1=d1, d2=d2, c_q=4.0 * k + 8.0, a2=a2,
            epsilon=default_epsilon(d1 + d2), collapse=Collapse.SAME_END,
        )
    if epsilon is not None:
        preset = preset.with_epsilon(epsilon)
    return preset

"""The six-dimensional soliton vector field and pointwise diagnostics.

State components are ``z = (f, fdot, h, hdot, u, udot)``.  The additive
constant in the potential is spent on the conservation constant, so every
``E`` below is ``epsilon * u``.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import BlowUpError, CollapseError
from .geometry import OrbitPreset, scalar_and_volume

EINSTEIN_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class SolitonState:
    t: float
    f: float
    fdot: float
    h: float
    hdot: float
    u: float
    udot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f, self.fdot, self.h, self.hdot, self.u, self.udot])

    @classmethod
    def from_array(cls, t: float, z) -> SolitonState:
        return cls(float(t), *(float(x) for x in z))


@dataclasses.dataclass(frozen=True)
class DiagnosticsRecord:
    """Derived quantities at one state.

    ``W``, ``Hcal``, ``Q`` and ``Lcal`` are ``None`` at a turning point
    (``xi == 0``); ``theta`` is ``None`` on Einstein data.
    """

    xi: float
    W: float | None
    E: float
    F: float
    theta: float | None
    G: float | None
    Hcal: float | None
    Q: float | None
    Lcal: float | None
    Fcal: float
    S: float
    trL: float
    ham_residual: float
    normal_residual: float

    @property
    def W_defined(self) -> bool:
        return self.W is not None


def field_array(preset: OrbitPreset, z: np.ndarray) -> np.ndarray:
    """Vector field on an array of states of shape ``(6, ...)``.

    No domain checks; callers screen for collapse.  Only elementwise
    arithmetic is used, so a column of a batch evaluates bit-identically to
    the same state evaluated alone.
    """
    d1, d2 = preset.d1, preset.d2
    half_eps = 0.5 * preset.epsilon
    f, fd, h, hd, u, ud = z
    inv_f = 1.0 / f
    inv_h = 1.0 / h
    lf = fd * inv_f
    lh = hd * inv_h
    oneill = preset.a2 * (f * f) * (inv_h * inv_h) * (inv_h * inv_h)
    fdd = (
        -(d1 - 1) * fd * lf
        - d2 * fd * lh
        + (d1 - 1) * inv_f
        + (d2 / d1) * oneill * f
        + fd * ud
        + half_eps * f
    )
    hdd = (
        -(d2 - 1) * hd * lh
        - d1 * lf * hd
        + preset.c_q * inv_h
        - 2.0 * oneill * h
        + hd * ud
        + half_eps * h
    )
    udd = -ud * (d1 * lf + d2 * lh) + ud * ud + preset.epsilon * u
    return np.stack([fd, fdd, hd, hdd, ud, udd])


def _check(state: SolitonState) -> None:
    if not (state.f > 0):
        raise CollapseError("f")
    if not (state.h > 0):
        raise CollapseError("h")


def vector_field(preset: OrbitPreset, state: SolitonState) -> np.ndarray:
    """Time derivative of ``(f, fdot, h, hdot, u, udot)`` at ``state``."""
    _check(state)
    dz = field_array(preset, state.as_array())
    if not np.all(np.isfinite(dz)):
        raise BlowUpError(f"non-finite derivative at t={state.t}")
    return dz


def _second_order_parts(preset: OrbitPreset, state: SolitonState):
    S, trL, v = scalar_and_volume(preset, state)
    lf = state.fdot / state.f
    lh = state.hdot / state.h
    trL2 = preset.d1 * lf * lf + preset.d2 * lh * lh
    return S, trL, v, lf, lh, trL2


def ham_residual(preset: OrbitPreset, state: SolitonState) -> float:
    """Violation of the first-integral (zero-energy) constraint."""
    _check(state)
    S, trL, _, _, _, trL2 = _second_order_parts(preset, state)
    xi = trL - state.udot
    E = preset.epsilon * state.u
    return S + trL2 - xi * xi + 0.5 * (preset.n - 1) * preset.epsilon - E


def normal_residual(preset: OrbitPreset, state: SolitonState) -> float:
    """Residual of the normal-direction equation with second derivatives
    supplied by the vector field."""
    dz = vector_field(preset, state)
    return (
        -preset.d1 * dz[1] / state.f
        - preset.d2 * dz[3] / state.h
        + dz[5]
        + 0.5 * preset.epsilon
    )


def normalized_EF(epsilon: float, E: float, F: float) -> tuple[float, float]:
    """Rescale ``(E, F)`` to the ``epsilon = -1`` homothety class."""
    return E / (-epsilon), F / math.sqrt(-epsilon)


def ef_angle(epsilon: float, E: float, F: float) -> float | None:
    """``atan2`` of the normalised pair, F horizontal and E vertical."""
    En, Fn = normalized_EF(epsilon, E, F)
    if abs(En) < EINSTEIN_TOL and abs(Fn) < EINSTEIN_TOL:
        return None
    return math.atan2(En, Fn)


def traceless_square(preset: OrbitPreset, lf: float, lh: float) -> float:
    """``tr((L - trL/n)^2)`` for the two-block shape operator."""
    # written as a weighted variance so it is exactly 0 when lf == lh
    diff = lf - lh
    return preset.d1 * preset.d2 * diff * diff / preset.n


def lyapunov_F(preset: OrbitPreset, state: SolitonState) -> float:
    S, _, v, lf, lh, _ = _second_order_parts(preset, state)
    return v ** (2.0 / preset.n) * (S + traceless_square(preset, lf, lh))


def lyapunov_F_rate(preset: OrbitPreset, state: SolitonState) -> float:
    """Closed-form time derivative of the Lyapunov functional."""
    _, trL, v, lf, lh, _ = _second_order_parts(preset, state)
    xi = trL - state.udot
    return -2.0 * v ** (2.0 / preset.n) * traceless_square(preset, lf, lh) * (xi - trL / preset.n)


def diagnostics(preset: OrbitPreset, state: SolitonState) -> DiagnosticsRecord:
    _check(state)
    S, trL, v, lf, lh, trL2 = _second_order_parts(preset, state)
    eps = preset.epsilon
    xi = trL - state.udot
    E = eps * state.u
    F = state.udot
    ham = S + trL2 - xi * xi + 0.5 * (preset.n - 1) * eps - E
    if xi != 0.0:
        W = 1.0 / xi
        G = W * W * trL2
        Hcal = W * trL
        Q = W * W * E
        Lcal = W * W * (trL2 + S) - 1.0
    else:
        W = G = Hcal = Q = Lcal = None
    Fcal = v ** (2.0 / preset.n) * (S + traceless_square(preset, lf, lh))
    return DiagnosticsRecord(
        xi=xi, W=W, E=E, F=F, theta=ef_angle(eps, E, F), G=G, Hcal=Hcal, Q=Q,
        Lcal=Lcal, Fcal=Fcal, S=S, trL=trL, ham_residual=ham,
        normal_residual=normal_residual(preset, state),
    )

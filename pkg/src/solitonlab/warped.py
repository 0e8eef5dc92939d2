"""Multiply warped products over Einstein factors in phase coordinates.

Phase variables, for metric ``dt^2 + sum g_i^2 h_i`` with ``Ric(h_i) = lambda_i h_i``::

    W   = 1 / xi,             xi = -udot + sum d_i gdot_i / g_i
    X_i = sqrt(d_i) W gdot_i / g_i
    Y_i = sqrt(d_i lambda_i) / (g_i xi)

and ``'`` is ``d/ds = W d/dt``.  With this scaling of ``Y`` the curvature
term of the ``X`` equation is ``Y_i^2 / sqrt(d_i)`` and
``sum X^2 + sum Y^2 - 1`` is the conserved combination.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Sequence

import numpy as np

from .dynamics import SolitonState
from .errors import DomainError, PreconditionError
from .geometry import Collapse, OrbitPreset


@dataclasses.dataclass(frozen=True)
class WarpedPreset:
    factors: tuple[tuple[int, float], ...]
    epsilon: float

    def __post_init__(self) -> None:
        factors = tuple((int(d), float(lam)) for d, lam in self.factors)
        if not factors:
            raise PreconditionError("need at least one factor")
        for d, lam in factors:
            if d < 1 or not lam > 0:
                raise PreconditionError(f"bad factor (d={d}, lambda={lam})")
        if not self.epsilon < 0:
            raise PreconditionError("epsilon must be negative")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @classmethod
    def spheres(cls, dims: Sequence[int], epsilon: float) -> WarpedPreset:
        """Product of unit round spheres, ``lambda_i = d_i - 1``."""
        return cls(tuple((d, d - 1.0) for d in dims), epsilon)

    @property
    def d(self) -> np.ndarray:
        return np.array([d for d, _ in self.factors], dtype=float)

    @property
    def lam(self) -> np.ndarray:
        return np.array([lam for _, lam in self.factors])

    @property
    def m(self) -> int:
        return len(self.factors)

    @property
    def n(self) -> int:
        return sum(d for d, _ in self.factors)

    def to_orbit_preset(self, collapse: Collapse = Collapse.SAME_END) -> OrbitPreset:
        """The two-factor product as a z-system preset (first factor a unit sphere)."""
        if self.m != 2:
            raise PreconditionError("only two-factor products map to the z-system")
        (d1, l1), (d2, l2) = self.factors
        if l1 != d1 - 1:
            raise PreconditionError("first factor must be a unit sphere (lambda_1 = d_1 - 1)")
        return OrbitPreset(f"warped{d1}x{d2}", d1, d2, l2, 0.0, self.epsilon, collapse)


@dataclasses.dataclass(frozen=True)
class PhaseState:
    W: float
    X: tuple[float, ...]
    Y: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.W], self.X, self.Y])

    @classmethod
    def from_array(cls, y) -> PhaseState:
        y = np.asarray(y, dtype=float)
        m = (len(y) - 1) // 2
        return cls(float(y[0]), tuple(map(float, y[1 : m + 1])), tuple(map(float, y[m + 1 :])))


def _rhs_array(preset: WarpedPreset, y: np.ndarray) -> np.ndarray:
    m = preset.m
    sd = np.sqrt(preset.d)
    W, X, Y = y[0], y[1 : m + 1], y[m + 1 :]
    G = float(np.dot(X, X))
    W2 = W * W
    he = 0.5 * preset.epsilon
    dX = X * (G - 1.0) + Y * Y / sd + he * (sd - X) * W2
    dY = Y * (G - X / sd - he * W2)
    dW = W * (G - he * W2)
    return np.concatenate([[dW], dX, dY])


def warped_rhs(preset: WarpedPreset, state: PhaseState) -> PhaseState:
    """``d/ds`` of the phase state."""
    return PhaseState.from_array(_rhs_array(preset, state.as_array()))


def integrate_warped(
    preset: WarpedPreset, start: PhaseState, ds: float, n_steps: int
) -> list[PhaseState]:
    """Fixed-step RK4 in the ``s`` variable."""
    y = start.as_array()
    out = [start]
    # W can escape to infinity in finite s; stop quietly at the first non-finite step
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            k1 = _rhs_array(preset, y)
            k2 = _rhs_array(preset, y + 0.5 * ds * k1)
            k3 = _rhs_array(preset, y + 0.5 * ds * k2)
            k4 = _rhs_array(preset, y + ds * k3)
            y = y + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                break
            out.append(PhaseState.from_array(y))
    return out


def G_of(state: PhaseState) -> float:
    return float(np.dot(state.X, state.X))


def H_of(preset: WarpedPreset, state: PhaseState) -> float:
    return float(np.dot(np.sqrt(preset.d), state.X))


def L_of(state: PhaseState) -> float:
    """``sum X^2 + sum Y^2 - 1``."""
    return float(np.dot(state.X, state.X) + np.dot(state.Y, state.Y) - 1.0)


def lyapunov_phase(preset: WarpedPreset, state: PhaseState) -> float:
    """The scale-invariant Lyapunov functional written in phase variables."""
    d, lam, n = preset.d, preset.lam, preset.n
    Y2 = np.square(state.Y)
    if np.any(Y2 == 0):
        raise DomainError("Y_i = 0: a factor has infinite size")
    vol = float(np.prod((d * lam / Y2) ** (d / n)))
    H = H_of(preset, state)
    return vol * (float(Y2.sum()) + G_of(state) - H * H / n)


def lyapunov_bound(preset: WarpedPreset) -> float:
    """Lower bound ``n * prod lambda_i^(d_i/n)`` of the Lyapunov functional."""
    n = preset.n
    return n * math.prod(lam ** (d / n) for d, lam in preset.factors)


def ef_rhs(epsilon: float, W: float, E: float, F: float) -> tuple[float, float]:
    """``(E', F')`` of the planar companion system."""
    return epsilon * W * F, W * E - F


def ef_eigenvalues(epsilon: float, W: float) -> tuple[complex, complex]:
    disc = complex(1.0 + 4.0 * epsilon * W * W)
    root = disc**0.5
    return (-1.0 + root) / 2.0, (-1.0 - root) / 2.0


def p_point(preset: WarpedPreset, sign: int = 1) -> PhaseState:
    """The fixed point ``P+`` (``sign=1``) or ``P-`` (``sign=-1``)."""
    n = preset.n
    sd = np.sqrt(preset.d)
    return PhaseState(0.0, tuple(sd / n), tuple(sign * sd * math.sqrt(n - 1) / n))


def spherical_cone_curve(preset: WarpedPreset, p: float) -> PhaseState:
    """Point of the Einstein cone orbit, valid for ``epsilon = -2n``."""
    n = preset.n
    if not math.isclose(preset.epsilon, -2.0 * n):
        raise PreconditionError("the cone curve is written for epsilon = -2n")
    sd = np.sqrt(preset.d)
    return PhaseState(
        math.tan(p) / n, tuple(sd / n), tuple(sd * math.sqrt(n - 1) / n / math.cos(p))
    )


@dataclasses.dataclass(frozen=True)
class Linearization:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    discriminant: float
    is_focus: bool


def p_plus_linearization(n: int) -> Linearization:
    """Linearisation at ``P+`` inside the Einstein-cone subvariety, two factors."""
    if n < 2:
        raise PreconditionError("n must be >= 2")
    r = math.sqrt(n - 1)
    A = np.array([[(1.0 - n) / n, 2.0 * r / n], [-r / n, 0.0]])
    disc = (n - 1) * (n - 9) / n**2
    return Linearization(A, np.linalg.eigvals(A), disc, disc < 0)


# -- closed-form solutions ---------------------------------------------------


class OracleKind(str, enum.Enum):
    SMOOTH_GAUSSIAN = "gaussian"
    CONICAL_GAUSSIAN = "conical"
    SPHERICAL_CONE = "cone"


@dataclasses.dataclass(frozen=True)
class OracleSample:
    t: float
    g: np.ndarray
    gdot: np.ndarray
    gddot: np.ndarray
    u: float
    udot: float
    uddot: float
    xi: float
    E: float


def _cone_alpha(preset: WarpedPreset) -> float:
    return math.sqrt(-preset.epsilon / (2.0 * preset.n))


def oracle(preset: WarpedPreset, kind: OracleKind | str, t: float) -> OracleSample:
    """Exact state of one of the three closed-form solitons.

    The potential carries the additive constant that makes the conservation
    constant zero.
    """
    kind = OracleKind(kind)
    eps, n = preset.epsilon, preset.n
    d, lam = preset.d, preset.lam
    if not t > 0:
        raise DomainError(f"{kind.value} oracle is singular at t={t}")
    if kind is OracleKind.SMOOTH_GAUSSIAN:
        if lam[0] != d[0] - 1:
            raise PreconditionError("smooth Gaussian needs a unit-sphere first factor")
        g = np.sqrt(2.0 * lam / -eps)
        g[0] = t
        gdot = np.zeros_like(g)
        gdot[0] = 1.0
        gddot = np.zeros_like(g)
        const = -(d[0] + 1) / 2.0
        xi = 0.5 * eps * t + d[0] / t
        E = -eps * eps * t * t / 4.0 - eps * (d[0] + 1) / 2.0
    elif kind is OracleKind.CONICAL_GAUSSIAN:
        if n < 2:
            raise PreconditionError("conical Gaussian needs n >= 2")
        c = np.sqrt(lam / (n - 1))
        g, gdot, gddot = c * t, c.copy(), np.zeros_like(c)
        const = -(n + 1) / 2.0
        xi = 0.5 * eps * t + n / t
        E = -eps * eps * t * t / 4.0 - eps * (n + 1) / 2.0
    else:
        alpha = _cone_alpha(preset)
        if not t < math.pi / alpha:
            raise DomainError(f"cone oracle defined on (0, {math.pi / alpha}), got t={t}")
        c = np.sqrt(lam / (n - 1)) / alpha
        s, co = math.sin(alpha * t), math.cos(alpha * t)
        g, gdot, gddot = c * s, c * alpha * co, -c * alpha * alpha * s
        xi = alpha * n * co / s
        return OracleSample(t, g, gdot, gddot, 0.0, 0.0, 0.0, xi, 0.0)
    u = -eps * t * t / 4.0 + const
    return OracleSample(t, g, gdot, gddot, u, -eps * t / 2.0, -eps / 2.0, xi, E)


def oracle_residuals(preset: WarpedPreset, s: OracleSample) -> dict[str, np.ndarray | float]:
    """Residuals of the second-order soliton equations at an oracle sample."""
    d, lam, eps, n = preset.d, preset.lam, preset.epsilon, preset.n
    L = s.gdot / s.g
    Ldot = s.gddot / s.g - L * L
    trL = float(np.dot(d, L))
    trL2 = float(np.dot(d, L * L))
    S = float(np.dot(d, lam / (s.g * s.g)))
    xi = trL - s.udot
    E = eps * s.u
    return {
        "tangential": lam / (s.g * s.g) - Ldot + (s.udot - trL) * L + 0.5 * eps,
        "normal": -float(np.dot(d, Ldot)) - trL2 + s.uddot + 0.5 * eps,
        "conservation": s.uddot + xi * s.udot - E,
        "ham": S + trL2 - xi * xi + 0.5 * (n - 1) * eps - E,
        "xi": xi - s.xi,
        "E": E - s.E,
    }


def phase_of(preset: WarpedPreset, s: OracleSample) -> PhaseState:
    xi = float(np.dot(preset.d, s.gdot / s.g)) - s.udot
    sd = np.sqrt(preset.d)
    return PhaseState(
        1.0 / xi,
        tuple(sd * (s.gdot / s.g) / xi),
        tuple(np.sqrt(preset.d * preset.lam) / (s.g * xi)),
    )


def phase_rate_of(preset: WarpedPreset, s: OracleSample) -> PhaseState:
    """Exact ``d/ds`` of the phase state along an oracle, by the chain rule."""
    d = preset.d
    L = s.gdot / s.g
    Ldot = s.gddot / s.g - L * L
    xi = float(np.dot(d, L)) - s.udot
    xidot = float(np.dot(d, Ldot)) - s.uddot
    W = 1.0 / xi
    Wdot = -xidot / (xi * xi)
    sd = np.sqrt(d)
    Xdot = sd * (Wdot * L + W * Ldot)
    Ydot = -np.sqrt(d * preset.lam) * (s.gdot * xi + s.g * xidot) / (s.g * xi) ** 2
    return PhaseState(W * Wdot, tuple(W * Xdot), tuple(W * Ydot))


def oracle_state(s: OracleSample) -> SolitonState:
    """Two-factor oracle sample as a z-system state."""
    if len(s.g) != 2:
        raise PreconditionError("z-system states need exactly two factors")
    return SolitonState(s.t, s.g[0], s.gdot[0], s.g[1], s.gdot[1], s.u, s.udot)


def oracle_state_rate(s: OracleSample) -> np.ndarray:
    return np.array([s.gdot[0], s.gddot[0], s.gdot[1], s.gddot[1], s.udot, s.uddot])

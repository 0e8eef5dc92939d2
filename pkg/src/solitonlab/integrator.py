"""Series start at the singular orbit, fixed-step RK4 and trajectory events."""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Callable, Sequence

import numpy as np

from .dynamics import (
    DiagnosticsRecord,
    SolitonState,
    diagnostics,
    field_array,
    ham_residual,
)
from .errors import BlowUpError, PreconditionError
from .geometry import Collapse, OrbitPreset

TWO_PI = 2.0 * math.pi


class Termination(str, enum.Enum):
    REACHED_T_MAX = "ReachedTMax"
    COLLAPSE_F = "Collapse(f)"
    COLLAPSE_H = "Collapse(h)"
    BLOW_UP = "BlowUp"
    TARGET_HIT = "TargetHit"

    @property
    def is_collapse(self) -> bool:
        return self in (Termination.COLLAPSE_F, Termination.COLLAPSE_H)


_TERMINATIONS = list(Termination)
_CODE = {term: i for i, term in enumerate(_TERMINATIONS)}
_RUNNING = -1
_DTYPES = {"double": np.float64, "extended": np.longdouble}


@dataclasses.dataclass(frozen=True)
class IntegratorConfig:
    step: float = 0.005
    t_max: float | None = None  # None: 50 / sqrt(-epsilon)
    blowup_threshold: float = 1e8
    t0_factor: float = 10.0
    record_every: int = 1
    series_order: int = 3
    tol_series: float = 1e-6
    target_sol: float | None = None
    precision: str = "double"  # or "extended" (numpy longdouble)

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise PreconditionError("step must be positive")
        if not self.t0_factor > 0:
            raise PreconditionError("t0_factor must be positive")
        if self.t_max is not None and not self.t_max > self.t0_factor * self.step:
            raise PreconditionError("t_max must exceed the series hand-off time")
        if self.record_every < 1:
            raise PreconditionError("record_every must be >= 1")
        if self.series_order < 1:
            raise PreconditionError("series_order must be >= 1")
        if self.precision not in _DTYPES:
            raise PreconditionError(f"precision must be one of {sorted(_DTYPES)}")

    def resolved_t_max(self, preset: OrbitPreset) -> float:
        if self.t_max is not None:
            return self.t_max
        return 50.0 / math.sqrt(-preset.epsilon)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- power series start ----------------------------------------------------


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: len(a)]


def _inv(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for k in range(1, len(a)):
        out[k] = -np.dot(a[1 : k + 1], out[k - 1 :: -1][:k]) / a[0]
    return out


def _der(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[:-1] = a[1:] * np.arange(1, len(a))
    return out


def _series_residuals(preset: OrbitPreset, fc, hc, uc):
    """Taylor coefficients of the three equations, multiplied through to
    remove the poles at ``t = 0``."""
    d1, d2, eps = preset.d1, preset.d2, preset.epsilon
    fd, hd, ud = _der(fc), _der(hc), _der(uc)
    fdd, hdd, udd = _der(fd), _der(hd), _der(ud)
    ih = _inv(hc)
    ih2 = _mul(ih, ih)
    one = np.zeros_like(fc)
    one[0] = 1.0
    f2 = _mul(fc, fc)
    e_f = (
        _mul(fc, fdd)
        + (d1 - 1) * (_mul(fd, fd) - one)
        + d2 * _mul(_mul(fc, fd), _mul(hd, ih))
        - (d2 / d1) * preset.a2 * _mul(_mul(f2, f2), _mul(ih2, ih2))
        - _mul(_mul(fc, fd), ud)
        - 0.5 * eps * f2
    )
    e_h = (
        _mul(_mul(fc, hc), hdd)
        + (d2 - 1) * _mul(fc, _mul(hd, hd))
        + d1 * _mul(_mul(fd, hd), hc)
        - preset.c_q * fc
        + 2.0 * preset.a2 * _mul(_mul(f2, fc), ih2)
        - _mul(_mul(fc, hc), _mul(hd, ud))
        - 0.5 * eps * _mul(fc, _mul(hc, hc))
    )
    e_u = (
        _mul(fc, udd)
        + _mul(ud, d1 * fd + d2 * _mul(fc, _mul(hd, ih)))
        - _mul(fc, _mul(ud, ud))
        - eps * _mul(fc, uc)
    )
    return e_f, e_h, e_u


def series_coefficients(
    preset: OrbitPreset, hbar: float, ubar: float, order: int = 3
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Taylor coefficients of ``f``, ``h``, ``u`` about the singular orbit.

    ``f`` is odd with ``f'(0) = 1``; ``h`` and ``u`` are even with
    ``h(0) = hbar``, ``u(0) = ubar``.  ``order`` counts the even powers kept
    in ``h`` and ``u`` (so ``f`` is kept through ``t^(2*order+1)``).  Each new
    coefficient enters its balancing equation linearly, which is solved by
    evaluating the residual at two trial values.
    """
    size = 2 * order + 3
    fc = np.zeros(size)
    hc = np.zeros(size)
    uc = np.zeros(size)
    fc[1], hc[0], uc[0] = 1.0, hbar, ubar

    def solve(arr: np.ndarray, idx: int, eq: int, power: int) -> None:
        arr[idx] = 0.0
        r0 = _series_residuals(preset, fc, hc, uc)[eq][power]
        arr[idx] = 1.0
        r1 = _series_residuals(preset, fc, hc, uc)[eq][power]
        arr[idx] = -r0 / (r1 - r0)

    for j in range(1, order + 1):
        solve(uc, 2 * j, 2, 2 * j - 1)
        solve(hc, 2 * j, 1, 2 * j - 1)
        solve(fc, 2 * j + 1, 0, 2 * j)
    return fc, hc, uc


def _eval_series(c: np.ndarray, t: float) -> tuple[float, float]:
    val = np.polynomial.polynomial.polyval(t, c)
    der = np.polynomial.polynomial.polyval(t, _der(c))
    return float(val), float(der)


def check_start(preset: OrbitPreset, hbar: float, ubar: float) -> None:
    if not hbar > 0:
        raise PreconditionError(f"hbar must be positive, got {hbar}")
    if ubar < preset.ubar_min - 1e-12:
        raise PreconditionError(f"ubar={ubar} below the admissible bound {preset.ubar_min}")


def _start_at(preset: OrbitPreset, coeffs, t0: float) -> SolitonState:
    fc, hc, uc = coeffs
    f, fd = _eval_series(fc, t0)
    h, hd = _eval_series(hc, t0)
    u, ud = _eval_series(uc, t0)
    return SolitonState(t0, f, fd, h, hd, u, ud)


def series_start(
    preset: OrbitPreset, hbar: float, ubar: float, config: IntegratorConfig = IntegratorConfig()
) -> SolitonState:
    """State at the hand-off time ``t0`` from the truncated series.

    ``t0`` starts at ``t0_factor * step`` and is halved (not below one step)
    while the constraint residual exceeds ``tol_series``.
    """
    return _series_start_with_residual(preset, hbar, ubar, config)[0]


def _series_start_with_residual(preset, hbar, ubar, config):
    check_start(preset, hbar, ubar)
    coeffs = series_coefficients(preset, hbar, ubar, config.series_order)
    t0 = config.t0_factor * config.step
    while True:
        state = _start_at(preset, coeffs, t0)
        res = abs(ham_residual(preset, state))
        if res <= config.tol_series or t0 / 2 < config.step:
            return state, res
        t0 /= 2


# -- Runge-Kutta -------------------------------------------------------------


def rk4_step(
    field: Callable[[float, np.ndarray], np.ndarray], t: float, y, step: float
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step for ``y' = field(t, y)``."""
    y = np.asarray(y, dtype=float)
    k1 = np.asarray(field(t, y))
    k2 = np.asarray(field(t + 0.5 * step, y + (0.5 * step) * k1))
    k3 = np.asarray(field(t + 0.5 * step, y + (0.5 * step) * k2))
    k4 = np.asarray(field(t + step, y + step * k3))
    out = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise BlowUpError(f"non-finite RK4 stage at t={t}")
    return out


def _rk4_autonomous(preset: OrbitPreset, z: np.ndarray, step: float) -> np.ndarray:
    k1 = field_array(preset, z)
    k2 = field_array(preset, z + (0.5 * step) * k1)
    k3 = field_array(preset, z + (0.5 * step) * k2)
    k4 = field_array(preset, z + step * k3)
    return z + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def sol_array(z: np.ndarray, pattern: Collapse) -> np.ndarray:
    """Squared distance to the smooth-closing target (array form)."""
    f, fd, h, hd, _, ud = z
    if pattern == Collapse.SAME_END:
        return f * f + (fd + 1.0) * (fd + 1.0) + hd * hd + ud * ud
    return fd * fd + h * h + (hd + 1.0) * (hd + 1.0) + ud * ud


@dataclasses.dataclass
class BatchOutcome:
    min_sol: np.ndarray
    argmin_t: np.ndarray
    termination: list[Termination]
    end_t: np.ndarray


def propagate(
    preset: OrbitPreset,
    t0: np.ndarray,
    z0: np.ndarray,
    config: IntegratorConfig,
    observer: Callable[[np.ndarray, np.ndarray, np.ndarray], None] | None = None,
) -> BatchOutcome:
    """Advance a batch of states ``z0`` (shape ``(6, N)``) in lockstep.

    Every cell takes identical elementwise operations, so results do not
    depend on batch composition.  ``observer(idx, t, z)`` is called after
    each accepted step with the surviving cell indices.
    """
    dtype = _DTYPES[config.precision]
    z0 = np.asarray(z0, dtype=dtype)
    n_cells = z0.shape[1]
    t0 = np.broadcast_to(np.asarray(t0, dtype=float), (n_cells,)).copy()
    step = dtype(config.step)
    t_max = config.resolved_t_max(preset)
    thr = config.blowup_threshold
    pattern = preset.collapse

    min_sol = np.full(n_cells, np.inf)
    argmin_t = np.full(n_cells, np.nan)
    code = np.full(n_cells, _RUNNING)
    end_t = t0.copy()

    idx = np.arange(n_cells)
    z = z0.copy()
    k = 0
    while idx.size:
        k += 1
        zn = _rk4_autonomous(preset, z, step)
        tn = t0[idx] + k * config.step
        finite = np.all(np.isfinite(zn), axis=0)
        big = np.any(np.abs(zn) > thr, axis=0) & finite
        col_f = finite & ~big & (zn[0] <= 0)
        col_h = finite & ~big & ~col_f & (zn[2] <= 0)
        # a stage stepping through zero gives nan: attribute to the factor heading there
        bad = ~finite
        guess_f = bad & (z[0] + step * z[1] <= 0)
        guess_h = bad & ~guess_f & (z[2] + step * z[3] <= 0)
        col_f |= guess_f
        col_h |= guess_h
        blow = (bad & ~guess_f & ~guess_h) | big
        dead = col_f | col_h | blow
        ok = ~dead

        if np.any(ok):
            s = sol_array(zn[:, ok], pattern)
            ids = idx[ok]
            better = s < min_sol[ids]
            min_sol[ids[better]] = s[better]
            argmin_t[ids[better]] = tn[ok][better]
            end_t[ids] = tn[ok]
            if observer is not None:
                observer(ids, tn[ok], zn[:, ok])

        code[idx[col_f]] = _CODE[Termination.COLLAPSE_F]
        code[idx[col_h]] = _CODE[Termination.COLLAPSE_H]
        code[idx[blow]] = _CODE[Termination.BLOW_UP]

        keep = ok.copy()
        if config.target_sol is not None and np.any(ok):
            hit = np.zeros_like(ok)
            hit[ok] = sol_array(zn[:, ok], pattern) < config.target_sol
            code[idx[hit]] = _CODE[Termination.TARGET_HIT]
            keep &= ~hit
        done_time = tn + config.step > t_max + 1e-9 * config.step
        code[idx[keep & done_time]] = _CODE[Termination.REACHED_T_MAX]
        keep &= ~done_time

        if not np.all(keep):
            idx = idx[keep]
            zn = zn[:, keep]
        z = zn
    return BatchOutcome(
        min_sol=min_sol,
        argmin_t=argmin_t,
        termination=[_TERMINATIONS[c] for c in code],
        end_t=end_t,
    )


# -- single trajectories -----------------------------------------------------


@dataclasses.dataclass
class Trajectory:
    preset: OrbitPreset
    hbar: float
    ubar: float
    config: IntegratorConfig
    states: list[SolitonState]
    diags: list[DiagnosticsRecord]
    termination: Termination
    end_t: float
    min_sol: float
    argmin_sol_t: float
    turning_time: float | None
    winding_turning: float | None
    winding_end: float | None
    theta_unwrapped: list[float | None]
    series_residual: float
    max_theta_jump: float = 0.0

    @property
    def samples(self) -> list[tuple[SolitonState, DiagnosticsRecord]]:
        return list(zip(self.states, self.diags))

    @property
    def winding(self) -> float | None:
        return self.winding_turning

    @property
    def is_einstein(self) -> bool:
        return self.theta_unwrapped[0] is None if self.theta_unwrapped else True

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def column(self, name: str) -> np.ndarray:
        """Array of a state or diagnostics field; undefined values become nan."""
        if name in ("t", "f", "fdot", "h", "hdot", "u", "udot"):
            vals = [getattr(s, name) for s in self.states]
        elif name == "theta_unwrapped":
            vals = self.theta_unwrapped
        else:
            vals = [getattr(d, name) for d in self.diags]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)


class _Recorder:
    """Per-step event tracking for a single trajectory."""

    def __init__(self, preset: OrbitPreset, start: SolitonState, record_every: int):
        self.preset = preset
        self.record_every = record_every
        self.count = 0
        self.states = [start]
        self.diags = [diagnostics(preset, start)]
        theta0 = self.diags[0].theta
        self.einstein = theta0 is None
        self.prev_xi = self.diags[0].xi
        self.prev_t = start.t
        self.turning_time = None
        if self.einstein:
            self.theta = None
            self.winding = None
        else:
            anchor = 0.5 * math.pi if self.diags[0].E > 0 else 1.5 * math.pi
            # express the start angle on the branch around its axis
            self.theta = anchor + _wrap(theta0 - anchor)
            self.winding = self.theta - anchor
        self.theta_unwrapped = [self.theta]
        self.winding_turning = None
        self.max_jump = 0.0
        self.pending: tuple[float, SolitonState, DiagnosticsRecord, float | None] | None = None

    def __call__(self, ids, t, z) -> None:
        self.count += 1
        state = SolitonState.from_array(t[0], z[:, 0])
        d = diagnostics(self.preset, state)
        theta_un = None
        if not self.einstein and d.theta is not None:
            delta = _wrap(d.theta - _wrap(self.theta))
            self.max_jump = max(self.max_jump, abs(delta))
            new_theta = self.theta + delta
            if self.turning_time is None and self.prev_xi > 0 >= d.xi:
                frac = self.prev_xi / (self.prev_xi - d.xi)
                self.winding_turning = self.winding + frac * delta
            self.theta = new_theta
            self.winding += delta
            theta_un = new_theta
        if self.turning_time is None and self.prev_xi > 0 >= d.xi:
            self.turning_time = self.prev_t + (state.t - self.prev_t) * self.prev_xi / (self.prev_xi - d.xi)
        self.prev_xi, self.prev_t = d.xi, state.t
        if self.count % self.record_every == 0:
            self.states.append(state)
            self.diags.append(d)
            self.theta_unwrapped.append(theta_un)
            self.pending = None
        else:
            self.pending = (state, d, theta_un)

    def flush(self) -> None:
        if self.pending is not None:
            state, d, theta_un = self.pending
            self.states.append(state)
            self.diags.append(d)
            self.theta_unwrapped.append(theta_un)
            self.pending = None


def _wrap(angle: float) -> float:
    """Reduce to ``(-pi, pi]``."""
    a = math.fmod(angle + math.pi, TWO_PI)
    if a <= 0:
        a += TWO_PI
    return a - math.pi


def integrate(
    preset: OrbitPreset, hbar: float, ubar: float, config: IntegratorConfig = IntegratorConfig()
) -> Trajectory:
    """Shoot from the singular orbit with initial data ``(hbar, ubar)``."""
    start, res = _series_start_with_residual(preset, hbar, ubar, config)
    rec = _Recorder(preset, start, config.record_every)
    out = propagate(preset, np.array([start.t]), start.as_array()[:, None], config, rec)
    rec.flush()
    return Trajectory(
        preset=preset,
        hbar=hbar,
        ubar=ubar,
        config=config,
        states=rec.states,
        diags=rec.diags,
        termination=out.termination[0],
        end_t=float(out.end_t[0]),
        min_sol=float(out.min_sol[0]),
        argmin_sol_t=float(out.argmin_t[0]),
        turning_time=rec.turning_time,
        winding_turning=rec.winding_turning,
        winding_end=rec.winding,
        theta_unwrapped=rec.theta_unwrapped,
        series_residual=res,
        max_theta_jump=rec.max_jump,
    )


def winding_angle(traj: Trajectory, upto: str = "TurningPoint") -> float | None:
    """Accumulated change of the (E, F) angle from the start axis.

    ``upto`` is ``"TurningPoint"`` or ``"End"``.  ``None`` on Einstein
    trajectories, or when the turning point is never reached.
    """
    if upto not in ("TurningPoint", "End"):
        raise PreconditionError(f"upto must be 'TurningPoint' or 'End', got {upto!r}")
    if traj.is_einstein:
        return None
    if upto == "End":
        return traj.winding_end
    return traj.winding_turning


def critical_point_count(traj: Trajectory, until: float | None = None) -> int:
    """Number of sign changes of ``udot`` (critical points of E) strictly
    inside the recorded arc, optionally stopping at time ``until``."""
    if traj.is_einstein:
        return 0
    t = traj.column("t")
    ud = traj.column("udot")
    if until is not None:
        ud = ud[t <= until]
    signs = np.sign(ud)
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def integrate_many(
    preset: OrbitPreset,
    starts: Sequence[tuple[float, float]],
    config: IntegratorConfig = IntegratorConfig(),
) -> tuple[BatchOutcome, np.ndarray]:
    """Batch version of :func:`integrate` returning only min-SOL data.

    Returns the outcome and the per-cell series residuals.
    """
    t0 = np.empty(len(starts))
    z0 = np.empty((6, len(starts)))
    res = np.empty(len(starts))
    for i, (hb, ub) in enumerate(starts):
        s, r = _series_start_with_residual(preset, hb, ub, config)
        t0[i] = s.t
        z0[:, i] = s.as_array()
        res[i] = r
    if not len(starts):
        return BatchOutcome(np.empty(0), np.empty(0), [], np.empty(0)), res
    return propagate(preset, t0, z0, config), res

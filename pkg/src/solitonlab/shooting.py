"""Soliton hunting: SOL closeness, (hbar, ubar) grid scans, clusters, refinement."""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .dynamics import SolitonState
from .errors import PreconditionError
from .geometry import Collapse, OrbitPreset
from .integrator import IntegratorConfig, Termination, integrate_many, sol_array

DEFAULT_THRESHOLD = 0.005
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def sol_metric(state: SolitonState, pattern: Collapse | str) -> float:
    """Squared distance from ``state`` to the smooth-closing target.

    ``SameEnd``: the fibre closes again, target ``(0, -1, *, 0, *, 0)``.
    ``OppositeEnd``: the base closes, target ``(*, 0, 0, -1, *, 0)``.
    """
    return float(sol_array(state.as_array(), Collapse(pattern)))


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    if hi < lo:
        return np.empty(0)
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 12)


@dataclasses.dataclass(frozen=True)
class ScanGrid:
    hbar_min: float
    hbar_max: float
    hbar_step: float
    ubar_min: float
    ubar_max: float
    ubar_step: float

    def __post_init__(self) -> None:
        if not (self.hbar_step > 0 and self.ubar_step > 0):
            raise PreconditionError("grid steps must be positive")

    @classmethod
    def parse(cls, hbar: str, ubar: str) -> ScanGrid:
        """Build from two ``lo:hi:step`` strings."""
        try:
            h = [float(x) for x in hbar.split(":")]
            u = [float(x) for x in ubar.split(":")]
        except ValueError as exc:
            raise PreconditionError(f"bad range: {exc}") from None
        if len(h) != 3 or len(u) != 3:
            raise PreconditionError("ranges must look like lo:hi:step")
        return cls(h[0], h[1], h[2], u[0], u[1], u[2])

    def hbar_values(self) -> np.ndarray:
        return _positive(_axis(self.hbar_min, self.hbar_max, self.hbar_step))

    def ubar_values(self) -> np.ndarray:
        return _axis(self.ubar_min, self.ubar_max, self.ubar_step)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.hbar_values()), len(self.ubar_values())

    def clamped(self, preset: OrbitPreset) -> tuple[ScanGrid, list[str]]:
        """Restrict ``ubar`` to ``[-(n+1)/2, (n+1)/2]`` and ``hbar`` to ``> 0``."""
        warnings = []
        bound = (preset.n + 1) / 2.0
        lo, hi = self.ubar_min, self.ubar_max
        if lo < -bound:
            warnings.append(f"ubar_min {lo} clamped to {-bound}")
            lo = -bound
        if hi > bound:
            warnings.append(f"ubar_max {hi} clamped to {bound}")
            hi = bound
        hlo = self.hbar_min
        if hlo <= 0:
            warnings.append(f"hbar_min {hlo} raised to {self.hbar_step}")
            hlo = self.hbar_step
        return dataclasses.replace(self, ubar_min=lo, ubar_max=hi, hbar_min=hlo), warnings

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _positive(a: np.ndarray) -> np.ndarray:
    return a[a > 0]


@dataclasses.dataclass
class ScanResult:
    grid: ScanGrid
    preset: OrbitPreset
    config: IntegratorConfig
    hbar: np.ndarray
    ubar: np.ndarray
    min_sol: np.ndarray  # shape (len(hbar), len(ubar))
    argmin_t: np.ndarray
    termination: np.ndarray  # of Termination values, same shape
    warnings: list[str] = dataclasses.field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.min_sol.shape

    def cells(self) -> Iterable[tuple[int, int, float, float, float, float, Termination]]:
        """``(i, j, hbar, ubar, min_sol, argmin_t, termination)`` in row-major order."""
        for i, hb in enumerate(self.hbar):
            for j, ub in enumerate(self.ubar):
                yield i, j, hb, ub, self.min_sol[i, j], self.argmin_t[i, j], self.termination[i, j]


def _run_chunk(args) -> tuple:
    preset, starts, config = args
    out, _ = integrate_many(preset, starts, config)
    return out.min_sol, out.argmin_t, out.termination


def evaluate_points(
    preset: OrbitPreset,
    points: Sequence[tuple[float, float]],
    config: IntegratorConfig,
    workers: int = 1,
    chunk: int = 4096,
) -> tuple[np.ndarray, np.ndarray, list[Termination]]:
    """Min-SOL for each ``(hbar, ubar)``; results are independent of the
    chunking and worker count."""
    points = list(points)
    jobs = [(preset, points[k : k + chunk], config) for k in range(0, len(points), chunk)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(job) for job in jobs]
    if not parts:
        return np.empty(0), np.empty(0), []
    ms = np.concatenate([p[0] for p in parts])
    at = np.concatenate([p[1] for p in parts])
    terms = [t for p in parts for t in p[2]]
    return ms, at, terms


def scan(
    preset: OrbitPreset,
    grid: ScanGrid,
    config: IntegratorConfig = IntegratorConfig(),
    workers: int = 1,
) -> ScanResult:
    """Integrate every admissible grid point and record its minimum SOL."""
    grid, warnings = grid.clamped(preset)
    hs, us = grid.hbar_values(), grid.ubar_values()
    points = [(h, u) for h in hs for u in us]
    ms, at, terms = evaluate_points(preset, points, config, workers)
    shape = (len(hs), len(us))
    term_arr = np.empty(shape, dtype=object)
    term_arr.ravel()[:] = terms if terms else []
    return ScanResult(
        grid=grid,
        preset=preset,
        config=config,
        hbar=hs,
        ubar=us,
        min_sol=ms.reshape(shape),
        argmin_t=at.reshape(shape),
        termination=term_arr,
        warnings=warnings,
    )


@dataclasses.dataclass(frozen=True)
class Cluster:
    members: tuple[tuple[int, int], ...]
    centroid: tuple[float, float]
    best_cell: tuple[float, float, float]

    @property
    def size(self) -> int:
        return len(self.members)

    def to_dict(self) -> dict:
        return {
            "centroid": {"hbar": self.centroid[0], "ubar": self.centroid[1]},
            "best_cell": {
                "hbar": self.best_cell[0],
                "ubar": self.best_cell[1],
                "min_sol": self.best_cell[2],
            },
            "member_count": self.size,
            "members": [list(m) for m in self.members],
        }


def find_clusters(result: ScanResult, threshold: float = DEFAULT_THRESHOLD) -> list[Cluster]:
    """8-connected components of sub-threshold cells, best first.

    Centroids weight each member by ``threshold - min_sol``, so cells closer
    to closing up count more.
    """
    if result.min_sol.size == 0:
        return []
    mask = result.min_sol < threshold
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    clusters = []
    for k in range(1, count + 1):
        idx = np.argwhere(labels == k)
        vals = result.min_sol[idx[:, 0], idx[:, 1]]
        w = threshold - vals
        hs = result.hbar[idx[:, 0]]
        us = result.ubar[idx[:, 1]]
        if w.sum() > 0:
            centroid = (float(np.dot(w, hs) / w.sum()), float(np.dot(w, us) / w.sum()))
        else:
            centroid = (float(hs.mean()), float(us.mean()))
        b = int(np.argmin(vals))
        clusters.append(
            Cluster(
                members=tuple((int(i), int(j)) for i, j in idx),
                centroid=centroid,
                best_cell=(float(hs[b]), float(us[b]), float(vals[b])),
            )
        )
    clusters.sort(key=lambda c: c.best_cell[2])
    return clusters


MYERS_MARGIN = 1.02


def myers_diameter(preset: OrbitPreset) -> float:
    """Largest possible diameter of a smooth Einstein metric with
    ``Ric = -(epsilon/2) g`` in dimension ``n + 1``."""
    return math.pi * math.sqrt(2.0 * preset.n / -preset.epsilon)


def einstein_config(preset: OrbitPreset, config: IntegratorConfig) -> IntegratorConfig:
    """``config`` with ``t_max`` capped just past the Myers diameter.

    An Einstein trajectory that nearly closes later than that cannot be a
    smooth metric, so those late near-misses are not searched.
    """
    cap = MYERS_MARGIN * myers_diameter(preset)
    if config.t_max is not None and config.t_max <= cap:
        return config
    return dataclasses.replace(config, t_max=cap)


def einstein_slice(
    preset: OrbitPreset,
    hbar_range: tuple[float, float, float] | Sequence[float] | np.ndarray,
    config: IntegratorConfig = IntegratorConfig(),
    workers: int = 1,
) -> list[tuple[float, float]]:
    """Min-SOL profile along ``ubar = 0`` (trajectories cut at the Myers
    diameter, see :func:`einstein_config`).

    ``hbar_range`` is ``(lo, hi, step)`` or an explicit array of values.
    """
    if isinstance(hbar_range, tuple) and len(hbar_range) == 3:
        hs = _positive(_axis(*hbar_range))
    else:
        hs = np.asarray(hbar_range, dtype=float)
    config = einstein_config(preset, config)
    ms, _, _ = evaluate_points(preset, [(h, 0.0) for h in hs], config, workers)
    return [(float(h), float(m)) for h, m in zip(hs, ms)]


def profile_minima(profile: Sequence[tuple[float, float]], below: float = math.inf) -> list[tuple[float, float]]:
    """Strict local minima of a 1-D ``(x, value)`` profile with value < ``below``."""
    out = []
    for k in range(1, len(profile) - 1):
        x, v = profile[k]
        if v < profile[k - 1][1] and v <= profile[k + 1][1] and v < below:
            out.append((x, v))
    return out


@dataclasses.dataclass(frozen=True)
class RefineResult:
    hbar: float
    ubar: float
    min_sol: float
    seed_min_sol: float
    evaluations: int
    converged: bool


class _Objective:
    def __init__(self, preset: OrbitPreset, config: IntegratorConfig, budget: int):
        self.preset = preset
        self.config = config
        self.budget = budget
        self.calls = 0
        self.cache: dict[tuple[float, float], float] = {}
        self.best = (math.nan, math.nan, math.inf)

    @property
    def exhausted(self) -> bool:
        return self.calls >= self.budget

    def many(self, points: Sequence[tuple[float, float]]) -> list[float]:
        todo = [p for p in points if p not in self.cache]
        if todo:
            self.calls += len(todo)
            ms, _, _ = evaluate_points(self.preset, todo, self.config)
            for p, m in zip(todo, ms):
                self.cache[p] = float(m)
        vals = [self.cache[p] for p in points]
        for p, v in zip(points, vals):
            if v < self.best[2]:
                self.best = (p[0], p[1], v)
        return vals

    def __call__(self, h: float, u: float) -> float:
        return self.many([(h, u)])[0]


def _golden_1d(fun, lo: float, hi: float, tol: float, obj: _Objective) -> None:
    """Golden-section search; every evaluation updates ``obj.best``."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol and not obj.exhausted:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)


def refine(
    preset: OrbitPreset,
    seed: tuple[float, float],
    config: IntegratorConfig = IntegratorConfig(),
    *,
    span: tuple[float, float] = (0.05, 0.05),
    fix_ubar: bool = False,
    tol: float = 1e-6,
    sweeps: int = 4,
    bracket_points: int = 11,
    budget: int = 600,
) -> RefineResult:
    """Coordinate-wise golden-section descent on min-SOL from ``seed``.

    Each coordinate search first samples ``bracket_points`` values across the
    current span (one batched integration) and runs golden section in the
    two cells around the best sample.  Spans halve after every sweep.  The
    returned point is never worse than the seed.
    """
    h0, u0 = float(seed[0]), float(seed[1])
    if not h0 > 0 or u0 < preset.ubar_min:
        raise PreconditionError(f"seed {seed} outside the admissible region")
    obj = _Objective(preset, config, budget)
    seed_val = obj(h0, u0)
    dh, du = span
    u_lo, u_hi = preset.ubar_min, -preset.ubar_min

    def search(axis: int, half: float) -> None:
        h, u, _ = obj.best
        centre = h if axis == 0 else u
        lo, hi = centre - half, centre + half
        if axis == 0:
            lo = max(lo, 1e-6)
        else:
            lo, hi = max(lo, u_lo), min(hi, u_hi)
        xs = np.linspace(lo, hi, bracket_points)
        pts = [(float(x), u) if axis == 0 else (h, float(x)) for x in xs]
        vals = obj.many(pts)
        k = int(np.argmin(vals))
        a, b = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
        if axis == 0:
            _golden_1d(lambda x: obj(float(x), u), a, b, tol, obj)
        else:
            _golden_1d(lambda x: obj(h, float(x)), a, b, tol, obj)

    for _ in range(sweeps):
        if obj.exhausted:
            break
        search(0, dh)
        if not fix_ubar and not obj.exhausted:
            search(1, du)
        dh, du = dh / 2.0, du / 2.0
    h, u, val = obj.best
    return RefineResult(
        hbar=h, ubar=u, min_sol=val, seed_min_sol=seed_val,
        evaluations=obj.calls, converged=not obj.exhausted,
    )

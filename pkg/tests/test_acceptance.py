"""Reproduction criteria for the soliton lab.

Each test prints a single ``PASS criterion k: ...`` or ``FAIL criterion k: ...``
line; the lines are repeated in the pytest terminal summary.  Expensive scans
are module-scoped fixtures shared between criteria.
"""

import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from solitonlab.cli import ORACLE_SAMPLES, gaussian_shot, verify_oracle
from solitonlab.geometry import preset_catalog
from solitonlab.integrator import IntegratorConfig, Termination, integrate, winding_angle
from solitonlab.shooting import (
    ScanGrid,
    einstein_config,
    einstein_slice,
    find_clusters,
    profile_minima,
    refine,
    scan,
)
from solitonlab.warped import OracleKind, WarpedPreset

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow

THRESHOLD = 0.005
KOISO_CAO = (0.7319, -0.5276)
PAGE = (0.9595, 0.0)
SLICE = (0.1, 15.0, 0.01)


def verdict(k: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def refine_on_axis(preset, hbar, tol=1e-5):
    """Golden-section refinement of an Einstein-axis minimum (u = 0 is invariant)."""
    cfg = einstein_config(preset, IntegratorConfig())
    return refine(preset, (hbar, 0.0), cfg, span=(0.01, 0.0), fix_ubar=True, tol=tol, sweeps=2, budget=120)


def refined_slice_minima(preset, below=0.05):
    prof = einstein_slice(preset, SLICE)
    return [refine_on_axis(preset, h) for h, _ in profile_minima(prof, below=below)]


def deepest_minima(preset, count):
    prof = einstein_slice(preset, SLICE)
    return sorted(profile_minima(prof), key=lambda m: m[1])[:count]


# -- 1, 2: oracles and integrator order ---------------------------------------------------


def test_criterion_1_oracle_exactness():
    cases = [
        ("smooth Gaussian", WarpedPreset.spheres([2, 2], -8.0), OracleKind.SMOOTH_GAUSSIAN),
        ("conical Gaussian", WarpedPreset(((2, 1.0), (3, 2.0)), -8.0), OracleKind.CONICAL_GAUSSIAN),
        ("spherical cone", WarpedPreset.spheres([2, 3], -10.0), OracleKind.SPHERICAL_CONE),
    ]
    worst = {}
    for label, preset, kind in cases:
        rep = verify_oracle(preset, kind)
        worst[label] = max(rep.values())
    ok = all(v < 1e-10 for v in worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(1, ok, f"max residual over {ORACLE_SAMPLES} times each: {detail} (< 1e-10)")


def test_criterion_2_rk4_order():
    s5 = preset_catalog("s5")
    # common series start t0 = 0.05; the arc ends before the far singular orbit at 5 pi
    res = []
    for step in (0.005, 0.0025):
        cfg = IntegratorConfig(step=step, t_max=15.0, t0_factor=0.05 / step)
        res.append(float(np.max(np.abs(integrate(s5, 10.0, 0.0, cfg).column("ham_residual")))))
    ratio = res[0] / res[1]
    verdict(2, 10 <= ratio <= 24, f"max |ham_residual| {res[0]:.3e} -> {res[1]:.3e}, ratio {ratio:.2f} in [10, 24]")


# -- 3, 4: CP2 # -CP2 ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def cp2_clusters():
    cp2 = preset_catalog("cp2")
    result = scan(cp2, ScanGrid(0.1, 3.0, 0.05, -2.0, 2.0, 0.05))
    clusters = find_clusters(result, THRESHOLD)
    refined = [refine(cp2, c.best_cell[:2]) for c in clusters]
    return cp2, clusters, refined


def _nearest(refined, target):
    return min(refined, key=lambda r: math.hypot(r.hbar - target[0], r.ubar - target[1]))


def test_criterion_3_cp2_clusters(cp2_clusters):
    cp2, clusters, refined = cp2_clusters
    kc, page = _nearest(refined, KOISO_CAO), _nearest(refined, PAGE)
    others = [r for r in refined if r is not kc and r is not page]
    near = lambda r, t: abs(r.hbar - t[0]) <= 0.02 and abs(r.ubar - t[1]) <= 0.02
    ok = len(clusters) == 3 and near(kc, KOISO_CAO) and near(page, PAGE)
    third = ", ".join(f"({r.hbar:.4f}, {r.ubar:.4f}) sol {r.min_sol:.1e}" for r in others)
    verdict(3, ok, f"{len(clusters)} clusters; Koiso-Cao ({kc.hbar:.4f}, {kc.ubar:.4f}), "
                   f"Page ({page.hbar:.4f}, {page.ubar:.4f}); third cluster {third}")


def test_criterion_4_koiso_cao_winding(cp2_clusters):
    cp2, _, refined = cp2_clusters
    kc = _nearest(refined, KOISO_CAO)
    traj = integrate(cp2, kc.hbar, kc.ubar)
    # theta is followed up to the closing point; later samples lie past the singular orbit
    theta = np.array([th for s, th in zip(traj.states, traj.theta_unwrapped)
                      if th is not None and s.t <= traj.argmin_sol_t])
    rise = float(np.max(np.diff(theta)))
    w = winding_angle(traj, "TurningPoint")
    ok = rise <= 1e-6 and w is not None and -(6 + math.pi / 4) <= w <= 0
    verdict(4, ok, f"largest theta increase {rise:.2e} (<= 1e-6), winding to turning point {w:.4f} "
                   f"in [{-(6 + math.pi / 4):.4f}, 0]")


# -- 5, 6: spheres and products of spheres ------------------------------------------------------


def _match(targets, refined, tol=0.01):
    found = {}
    for t in targets:
        best = min(refined, key=lambda r: abs(r.hbar - t))
        found[t] = best
    ok = all(abs(found[t].hbar - t) <= tol and found[t].min_sol < THRESHOLD for t in targets)
    return ok, ", ".join(f"{t} -> {found[t].hbar:.5f} (sol {found[t].min_sol:.1e})" for t in targets)


def test_criterion_5_s5():
    s5 = preset_catalog("s5")
    refined = refined_slice_minima(s5)
    ok_slice, detail = _match([10.0, 2.5354, 0.53054], refined)
    result = scan(s5, ScanGrid(0.1, 12.0, 0.05, -2.5, 2.5, 0.05))
    sub = np.argwhere(result.min_sol < THRESHOLD)
    off_axis = [float(result.ubar[j]) for _, j in sub if abs(result.ubar[j]) >= 0.05]
    extra = [f"{r.hbar:.4f}" for r in refined if min(abs(r.hbar - t) for t in (10.0, 2.5354, 0.53054)) > 0.01]
    verdict(5, ok_slice and not off_axis and len(sub) > 0,
            f"slice minima {detail}; further refined minima {extra}; "
            f"2-D scan {len(sub)} sub-threshold cells, {len(off_axis)} with |ubar| >= 0.05")


def test_criterion_6_s2xs3():
    p = preset_catalog("s2xs3")
    ok, detail = _match([5.0, 1.1779, 0.23571], refined_slice_minima(p))
    verdict(6, ok, f"slice minima {detail}")


def test_criterion_7_s11():
    """Round S^11 closes through a steep collapse of h: perturbations of hdot
    grow like h^-8 there, and in double precision the closure stalls near
    SOL 0.009 whatever the step.  The scan therefore uses long double
    arithmetic with step 0.0025 on a 0.1 grid."""
    s11 = preset_catalog("s11")
    cfg = IntegratorConfig(step=0.0025, precision="extended")
    result = scan(s11, ScanGrid(0.1, 12.0, 0.1, -5.5, 5.5, 0.1), cfg)
    clusters = find_clusters(result, THRESHOLD)
    near = [c for c in clusters if abs(c.centroid[0] - 10) <= 0.2 and abs(c.centroid[1]) <= 0.1]
    desc = "; ".join(f"centroid ({c.centroid[0]:.3f}, {c.centroid[1]:.3f}) best sol {c.best_cell[2]:.1e}"
                     for c in clusters)
    verdict(7, len(clusters) == 1 and len(near) == 1, f"{len(clusters)} cluster(s): {desc}")


# -- 8, 9: quaternionic, Cayley and F -------------------------------------------------------------

REFERENCE_HP2 = (1.0856062, 0.2184791)


@pytest.fixture(scope="module")
def hp2_calibration():
    p = preset_catalog("hp(2)")
    mins = deepest_minima(p, 2)
    refined = sorted((refine_on_axis(p, h, tol=1e-6) for h, _ in mins), key=lambda r: -r.hbar)
    big, small = refined
    scale = REFERENCE_HP2[0] / big.hbar
    # hbar scales like (-epsilon)^(-1/2), so the calibrated epsilon in units of -n
    eps_per_n = p.epsilon / scale**2 / p.n
    return p, big, small, scale, eps_per_n


def test_criterion_8_hp2_ratio(hp2_calibration):
    p, big, small, scale, eps_per_n = hp2_calibration
    ratio = big.hbar / small.hbar
    target = REFERENCE_HP2[0] / REFERENCE_HP2[1]
    second = small.hbar * scale
    ok = abs(ratio / target - 1) <= 0.02 and abs(second - REFERENCE_HP2[1]) <= 0.01
    verdict(8, ok, f"minima {big.hbar:.6f}, {small.hbar:.6f} at epsilon {p.epsilon}; ratio {ratio:.4f} "
                   f"vs {target:.4f}; calibrated epsilon = {eps_per_n:.4f} n puts the second at {second:.5f}")


def test_criterion_9_hp1_f1_cap2(hp2_calibration):
    _, _, _, _, eps_per_n = hp2_calibration
    parts, ok = [], True
    for name, target in (("hp(1)", 1.060793), ("f(1)", 0.866)):
        p = preset_catalog(name)
        (h, _), = deepest_minima(p, 1)
        r = refine_on_axis(p, h, tol=1e-6)
        # the same calibration rule, epsilon = eps_per_n * n
        calibrated = r.hbar * math.sqrt(p.epsilon / (eps_per_n * p.n))
        good = r.min_sol < THRESHOLD and abs(calibrated - target) <= 0.01
        ok &= good
        parts.append(f"{name} {r.hbar:.6f} (sol {r.min_sol:.1e}) -> {calibrated:.6f} vs {target}")
    cap2 = preset_catalog("cap2")
    result = scan(cap2, ScanGrid(0.1, 10.0, 0.1, -8.0, 8.0, 0.1))
    n_clusters = len(find_clusters(result, THRESHOLD))
    ok &= n_clusters == 0
    parts.append(f"cap2 {result.min_sol.size} cells, {n_clusters} clusters")
    verdict(9, ok, "; ".join(parts))


# -- 10, 11 ----------------------------------------------------------------------------------------


def test_criterion_10_gaussian_instability():
    shot, (t, dev) = gaussian_shot(WarpedPreset.spheres([2, 2], -8.0), IntegratorConfig())
    first = int(np.argmax(dev > 1e-4))
    growing = bool(np.all(np.diff(dev[first:]) >= 0))
    ended = shot["termination"] in (Termination.BLOW_UP.value, Termination.COLLAPSE_F.value,
                                    Termination.COLLAPSE_H.value)
    ok = first > 0 and shot["matched_until"] > t[0] and growing and ended and shot["end_t"] < shot["t_max"]
    verdict(10, ok, f"matched to 1e-4 until t = {shot['matched_until']:.3f}, deviation non-decreasing "
                    f"afterwards: {growing}, {shot['termination']} at t = {shot['end_t']:.3f} "
                    f"< t_max {shot['t_max']:.2f}")


def test_criterion_11_property_suites():
    path = Path(__file__).with_name("test_properties.py")
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(path)],
                          capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    verdict(11, proc.returncode == 0, f"tests/test_properties.py: {summary}")

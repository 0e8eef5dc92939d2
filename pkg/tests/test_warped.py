import math

import numpy as np
import pytest

from solitonlab.errors import DomainError, PreconditionError
from solitonlab.warped import (
    OracleKind,
    PhaseState,
    WarpedPreset,
    ef_eigenvalues,
    ef_rhs,
    integrate_warped,
    L_of,
    lyapunov_bound,
    lyapunov_phase,
    oracle,
    oracle_residuals,
    p_plus_linearization,
    p_point,
    phase_of,
    phase_rate_of,
    spherical_cone_curve,
    warped_rhs,
)

PRESETS = [
    WarpedPreset.spheres([2, 2], -8.0),
    WarpedPreset.spheres([2, 3], -1.0),
    WarpedPreset(((2, 1.0), (4, 6.0), (3, 0.5)), -3.0),
    WarpedPreset(((5, 4.0),), -10.0),
]


def _max_abs(state: PhaseState) -> float:
    return float(np.max(np.abs(state.as_array())))


@pytest.mark.parametrize("preset", PRESETS)
@pytest.mark.parametrize("sign", [1, -1])
def test_p_points_are_fixed(preset, sign):
    assert _max_abs(warped_rhs(preset, p_point(preset, sign))) < 1e-15


@pytest.mark.parametrize("w", [-1.3, 0.2, 2.0])
def test_pure_w_direction(w):
    p = PRESETS[1]
    d = warped_rhs(p, PhaseState(w, (0.0, 0.0), (0.0, 0.0)))
    assert d.W == pytest.approx(-(p.epsilon / 2) * w**3, rel=1e-15)
    assert max(map(abs, d.Y)) == 0.0


@pytest.mark.parametrize("dims", [[2, 2], [2, 3], [3, 3, 2]])
@pytest.mark.parametrize("p", [-1.0, -0.3, 0.4, 1.2])
def test_spherical_cone_curve_solves_system(dims, p):
    n = sum(dims)
    preset = WarpedPreset.spheres(dims, -2.0 * n)
    # along the curve the parameter is t, so d/ds = W d/dp
    k = 1e-5
    fd = (spherical_cone_curve(preset, p + k).as_array() - spherical_cone_curve(preset, p - k).as_array()) / (2 * k)
    at = spherical_cone_curve(preset, p)
    rhs = warped_rhs(preset, at).as_array()
    assert np.allclose(rhs, at.W * fd, atol=1e-8)
    assert L_of(at) + 0.5 * (n - 1) * preset.epsilon * at.W**2 == pytest.approx(0.0, abs=1e-12)


def test_cone_curve_needs_normalised_epsilon():
    with pytest.raises(PreconditionError):
        spherical_cone_curve(WarpedPreset.spheres([2, 2], -1.0), 0.1)


def test_preset_validation():
    with pytest.raises(PreconditionError):
        WarpedPreset((), -1.0)
    with pytest.raises(PreconditionError):
        WarpedPreset.spheres([1, 2], -1.0)  # lambda = 0
    with pytest.raises(PreconditionError):
        WarpedPreset.spheres([2, 2], 0.5)
    assert WarpedPreset.spheres([2, 3], -1.0).n == 5


# -- (E, F) plane ---------------------------------------------------------------


def test_ef_rhs_examples():
    assert ef_rhs(-1.0, 0.7, 0.0, 0.0) == (0.0, 0.0)
    assert ef_rhs(-1.0, 1.0, 1.0, 0.0) == (0.0, 1.0)


@pytest.mark.parametrize("eps", [-1.0, -4.0, -0.25])
def test_ef_focus_threshold(eps):
    w_star = 1 / (2 * math.sqrt(-eps))
    for W in np.linspace(0.05, 3 * w_star, 37):
        ev = ef_eigenvalues(eps, W)
        complex_pair = abs(ev[0].imag) > 0
        assert complex_pair == (W > w_star + 1e-12)
        if complex_pair:
            assert ev[0].real < 0 and ev[1].real < 0
        # compare with the matrix [[0, eps W], [W, -1]]
        A = np.array([[0.0, eps * W], [W, -1.0]])
        assert np.allclose(sorted(np.linalg.eigvals(A), key=lambda z: (z.real, z.imag)),
                           sorted(ev, key=lambda z: (z.real, z.imag)), atol=1e-12)


# -- closed forms ------------------------------------------------------------------


def test_smooth_gaussian_xi():
    p = WarpedPreset.spheres([2, 2], -8.0)
    for t in (0.1, 0.7, 2.0):
        s = oracle(p, "gaussian", t)
        assert s.xi == pytest.approx(-4 * t + 2 / t, rel=1e-14)
        assert s.u == pytest.approx(2 * t * t - 1.5, rel=1e-14)
        assert s.g[1] == pytest.approx(0.5)


def test_conical_gaussian_E():
    p = WarpedPreset(((2, 1.0), (3, 2.0)), -3.0)
    for t in (0.2, 1.0, 4.0):
        s = oracle(p, OracleKind.CONICAL_GAUSSIAN, t)
        assert s.E == pytest.approx(-9 * t * t / 4 + 3 * 6 / 2, rel=1e-14)
        assert np.allclose(s.g**2, t * t * p.lam / 4)


def test_spherical_cone_xi():
    p = WarpedPreset.spheres([2, 3], -10.0)
    alpha = 1.0
    for t in (0.3, 1.5, 3.0):
        s = oracle(p, "cone", t)
        assert s.xi == pytest.approx(alpha * 5 / math.tan(alpha * t), rel=1e-13)
        assert s.udot == 0.0


def test_oracle_domains():
    p = WarpedPreset.spheres([2, 3], -10.0)
    with pytest.raises(DomainError):
        oracle(p, "conical", 0.0)
    with pytest.raises(DomainError):
        oracle(p, "cone", math.pi)
    with pytest.raises(DomainError):
        oracle(p, "gaussian", -1.0)
    with pytest.raises(ValueError):
        oracle(p, "torus", 1.0)


@pytest.mark.parametrize("preset", PRESETS[:3])
@pytest.mark.parametrize("kind", list(OracleKind))
def test_oracles_solve_equations(preset, kind):
    if kind is OracleKind.SPHERICAL_CONE:
        preset = WarpedPreset(preset.factors, -2.0 * preset.n)
    for t in np.linspace(0.1, 2.9, 15):
        if kind is OracleKind.SMOOTH_GAUSSIAN and abs(oracle(preset, kind, t).xi) < 1e-8:
            continue
        s = oracle(preset, kind, float(t))
        for key, val in oracle_residuals(preset, s).items():
            assert np.max(np.abs(val)) < 1e-10, (key, t)
        # phase variables obey the first-order system
        if abs(s.xi) > 1e-3:
            diff = phase_rate_of(preset, s).as_array() - warped_rhs(preset, phase_of(preset, s)).as_array()
            assert np.max(np.abs(diff)) < 1e-9 * max(1.0, _max_abs(phase_of(preset, s)) ** 3)


@pytest.mark.parametrize("kind", list(OracleKind))
def test_L_conservation_on_oracles(kind):
    preset = WarpedPreset(((2, 1.0), (3, 2.0)), -10.0)
    n, eps = preset.n, preset.epsilon
    for t in (0.2, 0.9, 1.7):
        s = oracle(preset, kind, t)
        ph = phase_of(preset, s)
        # the potential constant is normalised so that C = 0
        assert L_of(ph) + 0.5 * (n - 1) * eps * ph.W**2 == pytest.approx(eps * s.u * ph.W**2, abs=1e-12)


# -- linearisation at P+ -------------------------------------------------------------


def test_linearization_examples():
    lin = p_plus_linearization(4)
    assert lin.discriminant == pytest.approx(-15 / 16, rel=1e-15)
    assert lin.is_focus
    nine = p_plus_linearization(9)
    assert nine.discriminant == 0 and not nine.is_focus
    with pytest.raises(PreconditionError):
        p_plus_linearization(1)


@pytest.mark.parametrize("n", range(2, 40))
def test_linearization_matrix_consistency(n):
    lin = p_plus_linearization(n)
    tr, det = np.trace(lin.matrix), np.linalg.det(lin.matrix)
    assert tr == pytest.approx(-(n - 1) / n)
    assert det == pytest.approx(2 * (n - 1) / n**2)
    assert tr * tr - 4 * det == pytest.approx(lin.discriminant, abs=1e-12)
    # the double root at n = 9 is split by ~1e-8 in floating point
    assert lin.is_focus == bool(np.any(np.abs(lin.eigenvalues.imag) > 1e-6))
    assert lin.is_focus == (2 <= n <= 8)


# -- Lyapunov bound ----------------------------------------------------------------------


def test_lyapunov_bound_examples():
    assert lyapunov_bound(WarpedPreset(((7, 6.0),), -1.0)) == pytest.approx(42.0)
    assert lyapunov_bound(WarpedPreset.spheres([2, 2], -1.0)) == pytest.approx(4.0)


@pytest.mark.parametrize("factors", [((2, 1.0), (2, 1.0)), ((2, 1.0), (3, 2.0)), ((2, 3.0), (5, 0.7), (1, 2.0))])
def test_lyapunov_equality_on_cone(factors):
    n = sum(d for d, _ in factors)
    preset = WarpedPreset(factors, -2.0 * n)
    for t in (0.4, 1.0, 2.5):
        ph = phase_of(preset, oracle(preset, "cone", t))
        assert lyapunov_phase(preset, ph) == pytest.approx(lyapunov_bound(preset), rel=1e-12)


def test_lyapunov_undefined_at_zero_y():
    p = WarpedPreset.spheres([2, 2], -1.0)
    with pytest.raises(DomainError):
        lyapunov_phase(p, PhaseState(0.0, (0.1, 0.1), (0.0, 0.2)))


def test_integrate_warped_stays_on_cone():
    preset = WarpedPreset.spheres([2, 3], -10.0)
    start = spherical_cone_curve(preset, 0.3)
    path = integrate_warped(preset, start, 0.001, 200)
    for st in path:
        p = math.atan(5 * st.W)
        ref = spherical_cone_curve(preset, p)
        assert _max_abs(PhaseState.from_array(st.as_array() - ref.as_array())) < 1e-9

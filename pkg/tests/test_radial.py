import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from kadsmodes.angular import fundamental
from kadsmodes.errors import ConvergenceError, DomainError, KadsError
from kadsmodes.geometry import BlackHoleParams, background_polys, derive_geometry
from kadsmodes.potentials import RadialPotential
from kadsmodes.radial import (RadialNumerics, bullet_profile, fd_derivative, frobenius_seed, integrate_regular,
                              kappa_match)
from kadsmodes.shooter import REFERENCE_PATH

from conftest import random_admissible

KADS = derive_geometry(BlackHoleParams(1.0, 0.2, 1.0))


def potential(g, m):
    return RadialPotential(g, m, fundamental(g, m).lam)


POT = potential(KADS, 6)


def test_seed_leading_behaviour():
    devs = []
    for d in (1e-3, 1e-4, 1e-5):
        s = frobenius_seed(POT, delta=d)
        r = KADS.r_plus * (1 + d)
        D = background_polys(KADS, np.array([r]))[0][0]
        devs.append(abs(s.R / D - 1))
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-3


def test_seed_order_robustness():
    a, b = frobenius_seed(POT, order=30), frobenius_seed(POT, order=35)
    assert abs(a.R - b.R) <= 1e-12 * abs(a.R)
    assert abs(a.dR - b.dR) <= 1e-12 * abs(a.dR)
    assert a.truncation_error < 1e-12


def test_seed_independence():
    num = RadialNumerics()
    s1 = frobenius_seed(POT, delta=1e-4)
    s2 = frobenius_seed(POT, delta=5e-5)
    a = integrate_regular(POT, s1, num, normalize=False)
    b = integrate_regular(POT, s2, num, normalize=False)
    assert abs(a.R[-1] - b.R[-1]) <= 1e-9 * abs(a.R[-1])
    assert abs(a.dR[-1] - b.dR[-1]) <= 1e-9 * abs(a.dR[-1])


def test_seed_input_validation():
    with pytest.raises(ValueError):
        frobenius_seed(POT, order=5)
    with pytest.raises(DomainError):
        frobenius_seed(POT, delta=0.5)
    small = potential(REFERENCE_PATH.geometry(1.0), 40)
    with pytest.raises(ConvergenceError):
        frobenius_seed(small, order=10, delta=1e-2)


def test_identities_hold():
    sol = integrate_regular(POT)
    d = sol.defects()
    assert d["pomega_first"] < 1e-8
    assert d["pomega_second"] < 1e-7
    assert d["wronskian"] < 1e-8
    assert d["energy"] < 1e-8


def test_normalisation_against_quadrature():
    sol = integrate_regular(POT)
    f = lambda t: float(np.abs(sol.evaluate(t)[1][0]) ** 2)
    body, _ = quad(f, sol.r_star[0], 0.0, limit=400, epsabs=0, epsrel=1e-12, points=list(sol.steps[1:-1][::10]))
    assert body + sol.tail_norm == pytest.approx(1.0, abs=1e-10)
    assert 0 < sol.tail_norm < 1e-6


def test_real_without_rotation():
    g = derive_geometry(BlackHoleParams(1.0, 0.0, 1.0))
    sol = integrate_regular(potential(g, 4))
    assert np.max(np.abs(sol.R.imag)) < 1e-12 * np.max(np.abs(sol.R))
    assert np.all(sol.W_im == 0)


def test_wronskian_sign_follows_m():
    for m in (4, -4):
        sol = integrate_regular(potential(KADS, m))
        w = sol.W_im[10:]
        assert np.all(np.sign(w) == np.sign(m))


def test_pomega_is_derivative_of_modulus():
    sol = integrate_regular(POT)
    d = fd_derivative(np.abs(sol.R) ** 2, sol.h)
    assert np.max(np.abs(d - sol.pomega)[3:-3]) < 1e-8 * np.max(np.abs(sol.pomega))


def test_defects_follow_tolerance():
    # adaptive control makes the global error roughly proportional to rtol
    tols = np.array([1e-8, 1e-9, 1e-10, 1e-11, 1e-12])
    rows = []
    for t in tols:
        sol = integrate_regular(POT, numerics=RadialNumerics(rtol=t, atol=t * 1e-3))
        rows.append(sol.defects())
    for key in ("pomega_first", "pomega_second", "wronskian", "energy"):
        y = np.log10([r[key] for r in rows])
        slope = np.polyfit(np.log10(tols), y, 1)[0]
        assert slope > 0.7, (key, slope)


def test_bullet_below_threshold_positive():
    g = REFERENCE_PATH.geometry(0.0)
    assert g.eps == pytest.approx(-0.30, abs=0.01)
    sol = integrate_regular(potential(g, 40))
    bp = bullet_profile(sol)
    assert bp.min_value > 0 and bp.near_horizon_positive
    assert np.all(sol.pomega > 0)
    assert np.all(np.diff(np.abs(sol.R) ** 2) > 0)  # |R|^2 increases where p > 0
    assert bp.endpoint == pytest.approx(sol.pomega[-1])
    assert bp.min_value <= bp.endpoint


def test_bullet_above_threshold_negative():
    g = REFERENCE_PATH.geometry(1.0)
    sol = integrate_regular(potential(g, 40))
    bp = bullet_profile(sol)
    assert bp.min_value < 0 and bp.near_horizon_positive


def test_kappa_match_examples():
    m = kappa_match(1.0, 1j)
    assert m.kappa == 1 and m.residual_value == 0 and m.residual_deriv == 0
    m = kappa_match(0.0, 1 + 1j)
    assert m.kappa == pytest.approx(-(1 - 1j) / (1 + 1j))
    assert m.residual_value == 0 and m.residual_deriv == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        kappa_match(0, 0)
    with pytest.raises(KadsError):
        kappa_match(1.0, 1.0, p_tol=1e-8)


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_kappa_match_residuals(R0, dR0):
    if abs(R0) < 1e-6 and abs(dR0) < 1e-6:
        return
    m = kappa_match(R0, dR0)
    assert m.kappa != 0 and abs(abs(m.kappa) - 1) < 1e-12
    assert m.residual_value >= 0 and m.residual_deriv >= 0
    if abs(R0) > 1e-6:
        pw = 2 * (R0 * np.conj(dR0)).real
        assert m.residual_deriv == pytest.approx(abs(pw) / abs(R0), rel=1e-9, abs=1e-9 * abs(dR0))


@given(st.floats(-1e3, 1e3), st.floats(0.1, 10.0), st.floats(0, 2 * np.pi))
def test_kappa_match_exact_mode(t, mag, phase):
    R0 = mag * np.exp(1j * phase)
    m = kappa_match(R0, 1j * t * R0)
    assert m.residual_value < 1e-12 * mag and m.residual_deriv < 1e-9 * max(1.0, abs(t))


def test_fd_derivative_order():
    for n in (200, 400):
        x = np.linspace(0, 2, n)
        h = x[1] - x[0]
        err = np.max(np.abs(fd_derivative(np.sin(3 * x), h) - 3 * np.cos(3 * x)))
        err2 = np.max(np.abs(fd_derivative(np.sin(3 * x), h, order=2) + 9 * np.sin(3 * x)))
        assert err < 1e-7 and err2 < 1e-5


def test_random_identities():
    rng = np.random.default_rng(1)
    for p, g in random_admissible(rng, 4, a_positive=True):
        for m in (2, 7):
            lam = fundamental(g, m, resolution=256, rtol=1e-3).lam * rng.uniform(0.8, 1.2)
            sol = integrate_regular(RadialPotential(g, m, lam))
            assert max(sol.defects().values()) < 1e-7


def test_output_grid_resolves_fast_oscillation():
    # far above threshold: long tortoise range and a large local wavenumber
    g = derive_geometry(BlackHoleParams(0.38234, 0.37485, 0.37205))
    sol = integrate_regular(RadialPotential(g, 20, 204.3))
    assert sol.r_star.size > RadialNumerics().n_out
    assert max(sol.defects().values()) < 1e-7
    with pytest.raises(ValueError):
        RadialNumerics(kh_max=0.0)

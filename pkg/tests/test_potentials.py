import numpy as np
import pytest
from hypothesis import given, strategies as st

from kadsmodes.angular import fundamental
from kadsmodes.errors import CertificateFailure, DomainError
from kadsmodes.geometry import BlackHoleParams, derive_geometry, inverse_tortoise, tortoise
from kadsmodes.potentials import (RadialPotential, certificate_grid, crux_certificate, crux_constant_D, crux_f,
                                  eval_potentials, positivity_certificates, v0_forms, v0_prime, v00_polynomial,
                                  w_prime)
from kadsmodes.shooter import REFERENCE_PATH

from conftest import admissible_params, random_admissible

KADS = derive_geometry(BlackHoleParams(1.0, 0.2, 1.0))


def naive(g, m, lam, r):
    """Potentials straight from their definitions in r (no compactification)."""
    M, a, k = g.params.as_tuple()
    rp, Xi, w = g.r_plus, g.Xi, g.omega_plus
    s = r * r + a * a
    D = s * (1 + k * k * r * r) - 2 * M * r
    dD = 2 * r * (1 + k * k * r * r) + 2 * k * k * r * s - 2 * M
    d2D = 2 + 12 * k * k * r * r + 2 * k * k * a * a
    c = Xi * w * m
    v0 = D / s**2 * (lam - 2 - a * a * k * k) - c**2 * (r * r - rp * rp) ** 2 / s**2
    v00 = (dD**2 / s**2 + D / s**2 * (2 + a * a * k * k - 6 * k * k * r * r - d2D) + r * D * dD / s**3
           - (2 * r * r - a * a) * D**2 / s**4)
    v1 = dD / s**2 * 2 * c * (rp * rp - r * r) + D / s**2 * 8 * c * r
    return v0, v00, v1


def test_against_naive_formulas():
    m = 6
    lam = fundamental(KADS, m).lam
    pot = RadialPotential(KADS, m, lam)
    r = KADS.r_plus * (1 + np.geomspace(1e-2, 1e2, 30))
    got = eval_potentials(pot, r)
    ref = naive(KADS, m, lam, r)
    for x, y in zip(got[:3], ref):
        assert np.allclose(x, y, rtol=1e-9, atol=1e-12 * np.max(np.abs(y)))
    assert np.allclose(got[3], got[0] + got[1] - 1j * got[2])


def test_v1_vanishes_without_rotation():
    g = derive_geometry(BlackHoleParams(1.0, 0.0, 1.0))
    pot = RadialPotential(g, 5, 28.0)
    _, _, v1, V = eval_potentials(pot, g.r_plus * (1 + np.geomspace(1e-4, 1e3, 50)))
    assert np.all(v1 == 0) and np.all(V.imag == 0)


def test_values_at_infinity_by_richardson():
    m = 8
    pot = RadialPotential(KADS, m, fundamental(KADS, m).lam)
    R = 1e4
    vals = [np.array(eval_potentials(pot, np.array([R * 2**j]))[:3]).ravel() for j in range(3)]
    # each potential is smooth in 1/r at infinity
    r1 = 2 * vals[1] - vals[0]
    r2 = 2 * vals[2] - vals[1]
    extrap = (4 * r2 - r1) / 3
    v0i, v00i, v1i = pot.infinity_values()
    k = KADS.params.k
    assert v0i == pytest.approx(k * k * pot.lam_tilde, rel=1e-12)
    assert v00i == 0 and v1i == 0
    scale = abs(v0i)
    assert abs(extrap[0] - v0i) < 1e-8 * scale
    assert abs(extrap[1]) < 1e-8 * scale and abs(extrap[2]) < 1e-8 * scale


def test_quartic_decomposition_zero_at_horizon():
    g = KADS
    k, rp = g.params.k, g.r_plus
    from kadsmodes.geometry import background_polys
    d = background_polys(g, np.array([rp]))[0][0]
    assert abs(d - k * k * (rp - rp) ** 2 * (2 * rp) ** 2) < 1e-12


def test_v0_prime_against_finite_differences():
    m = 10
    pot = RadialPotential(KADS, m, fundamental(KADS, m).lam)
    r = KADS.r_plus * (1 + np.geomspace(1e-2, 1e2, 20))
    t = tortoise(KADS, r)
    h = 1e-3 * np.minimum(np.abs(t), 1.0)
    f = lambda tt: eval_potentials(pot, inverse_tortoise(KADS, tt))[0]
    fd = (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)
    exact = v0_prime(pot, r)
    assert np.allclose(fd, exact, rtol=1e-7, atol=1e-9 * np.max(np.abs(exact)))
    # closed form in r and the rational r_star-derivative agree
    u, xi = pot.uxi_from_r(r)
    assert np.allclose(pot.dv0(u, xi), exact, rtol=1e-10, atol=1e-12 * np.max(np.abs(exact)))


def test_v0_prime_vanishes_at_infinity():
    m = 20
    pot = RadialPotential(KADS, m, fundamental(KADS, m).lam)
    k = KADS.params.k
    vals = [abs(float(v0_prime(pot, np.array([r]))[0])) for r in (1e3, 1e4, 1e5)]
    assert vals[0] > vals[1] > vals[2]
    # V0' is smooth in 1/r: Richardson in 1/r over r = R, 2R, 4R
    f = [float(v0_prime(pot, np.array([1e4 * 2**j]))[0]) for j in range(3)]
    r1, r2 = 2 * f[1] - f[0], 2 * f[2] - f[1]
    assert abs((4 * r2 - r1) / 3) < 1e-8 * m * m * k * k
    assert abs(pot.dv0(0.0, KADS.u_plus)) < 1e-12 * m * m


def test_w_prime_negative_beyond_3M():
    for p, g in random_admissible(np.random.default_rng(11), 20):
        pot = RadialPotential(g, 4, 30.0)
        r = np.geomspace(3 * p.M / g.Xi, 1e4 * max(1.0, g.r_plus), 3000)
        r = r[r > g.r_plus]
        assert np.all(w_prime(pot, r) < 0)


def test_certificates_reference_example():
    rep = positivity_certificates(KADS.params, 4)
    assert rep.passed and rep.failures() == []
    assert rep.v1_lower_margin > 0 and rep.v1_upper_margin > 0
    assert rep.quad_slope > 0
    assert rep.p_derivs.shape == (8,) and np.all(rep.p_derivs > 0)


def test_degree_seven_polynomial_reproduces_v00():
    P = v00_polynomial(KADS.params)
    assert len(P) == 8
    r = KADS.r_plus * (1 + np.geomspace(1e-2, 1e2, 25))
    a = KADS.params.a
    via_poly = np.polynomial.polynomial.polyval(r, P) / (r * r + a * a) ** 4
    assert np.allclose(via_poly, naive(KADS, 4, 20.0, r)[1], rtol=1e-9)
    exact = v00_polynomial(KADS.params, exact=True)
    assert [float(c) for c in exact] == list(P)


def test_certificates_random_sweep():
    for p, g in random_admissible(np.random.default_rng(5), 15, a_positive=True):
        for m in (2, 10, 50):
            rep = positivity_certificates(g, m, n_grid=2000)
            assert rep.passed, rep.failures()


def test_certificate_failure_is_hard():
    rep = positivity_certificates(KADS, 4, strict=False)
    rep.v00_min = -1.0
    assert not rep.passed
    assert "V00 not positive" in rep.failures()


def test_crux_f_without_rotation():
    g = derive_geometry(BlackHoleParams(1.0, 0.0, 1.0))
    pot = RadialPotential(g, 6, fundamental(g, 6).lam)
    r = g.r_plus * (1 + np.geomspace(1e-3, 1e3, 40))
    assert np.allclose(crux_f(pot, r), 2 * v0_prime(pot, r))


def test_crux_just_above_threshold():
    g = REFERENCE_PATH.geometry(REFERENCE_PATH.find_eps(0.01))
    m = 60
    pot = RadialPotential(g, m, fundamental(g, m).lam)
    rep = crux_certificate(pot)
    assert rep.n_points > 0
    assert rep.inside_3M  # N sits beyond 3M/Xi
    r, _ = certificate_grid(g, 10_000)
    v0, v00, _, _ = eval_potentials(pot, r)
    neg = (v0 + v00) <= 0
    assert np.all(crux_f(pot, r[neg]) < 0)
    D, _, tail = crux_constant_D(g)
    assert 0 < D <= tail


def test_domain():
    pot = RadialPotential(KADS, 4, 20.0)
    with pytest.raises(DomainError):
        eval_potentials(pot, KADS.r_plus)


@given(admissible_params(), st.integers(-40, 40).filter(lambda m: abs(m) >= 2), st.floats(0.0, 3.0))
def test_potential_invariants(pg, m, frac):
    p, g = pg
    lam = 2 + (p.a * p.k) ** 2 + frac * m * m
    pot = RadialPotential(g, m, lam)
    r = g.r_plus * (1 + np.geomspace(1e-5, 1e3, 200))
    v0, v00, v1, _ = eval_potentials(pot, r)
    assert np.all(v00 > 0)
    if p.a > 0:
        assert np.all(np.sign(v1) == np.sign(m))
    first, second = v0_forms(pot, r)
    scale = np.max(np.abs(first)) + abs(pot.lam_shift)
    assert np.max(np.abs(first - second)) <= 1e-12 * scale
    assert np.max(np.abs(first - v0)) <= 1e-11 * scale

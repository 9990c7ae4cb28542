import numpy as np
import pytest
from scipy.integrate import quad

from kadsmodes.angular import fundamental
from kadsmodes.errors import EnvelopeViolation, NonNegativeLambdaTilde
from kadsmodes.geometry import inverse_tortoise
from kadsmodes.potentials import RadialPotential, eval_potentials, v0_prime
from kadsmodes.shooter import REFERENCE_PATH
from kadsmodes.wkb import (WkbNumerics, beta_coefficients, duhamel_pomega, error_control_F, interference_q,
                           negativity_scan, sinx_cubic_gap, wkb_basis, wkb_frequency, wkb_frequency_from_potential)

G05 = REFERENCE_PATH.geometry(REFERENCE_PATH.find_eps(0.05))
G02 = REFERENCE_PATH.geometry(REFERENCE_PATH.find_eps(0.02))
_cache = {}


def basis(g, m):
    key = (g.eps, m)
    if key not in _cache:
        pot = RadialPotential(g, m, fundamental(g, m).lam)
        _cache[key] = wkb_basis(pot)
    return _cache[key]


def test_frequency_scales_linearly():
    ratios = np.array([wkb_frequency(G05, m) / m for m in (20, 40, 60, 80)])
    assert np.all(ratios > 0)
    assert ratios.max() / ratios.min() < 1.5


def test_frequency_absent_below_threshold():
    with pytest.raises(NonNegativeLambdaTilde):
        wkb_frequency(REFERENCE_PATH.geometry(0.0), 200)


def test_frequency_matches_potential_at_infinity():
    pot = RadialPotential(G05, 40, fundamental(G05, 40).lam)
    w = wkb_frequency_from_potential(pot)
    v0, v00, v1 = pot.infinity_values()
    assert abs(w * w + (v0 + v00 - 1j * v1)) <= 1e-10 * w * w


def test_error_control_function_properties():
    b = basis(G05, 40)
    F = b.F
    assert F[-1] == 0 and np.all(F >= 0)
    assert np.all(np.diff(F) <= 1e-15)
    pot = b.pot
    again = error_control_F(pot, b.pomega_freq, b.r_star[::64])
    assert np.allclose(again, F[::64], rtol=1e-9, atol=1e-14)
    assert error_control_F(pot, b.pomega_freq, 0.0)[0] == 0


def test_error_control_against_quadrature_in_r():
    # independent route: integrate in r (closed-form potentials, r_star from the tortoise inverse)
    b = basis(G05, 40)
    pot, w = b.pot, b.pomega_freq
    g = pot.geom
    a = g.params.a
    t = b.r_star[0]
    r_lo = float(inverse_tortoise(g, np.array([t]))[0])

    def integrand(u):  # u = 1/r, dr_star = (r^2 + a^2)/Delta dr = -(r^2+a^2)/(Delta u^2) du
        r = 1.0 / u
        D = (r * r + a * a) * (1 + g.params.k**2 * r * r) - 2 * g.params.M * r
        V = eval_potentials(pot, np.array([r]))[3][0]
        return abs(V + w * w) * (r * r + a * a) / (D * u * u)
    val, _ = quad(integrand, 0.0, 1.0 / r_lo, epsabs=0, epsrel=1e-12, limit=200, points=[1e-6])
    assert val / w == pytest.approx(b.F[0], rel=1e-8)


def test_basis_initial_data_and_bullets_at_boundary():
    b = basis(G05, 40)
    w = b.pomega_freq
    s = w**-0.5
    assert b.R1[-1] == s and b.R2[-1] == s
    assert b.dR1[-1] == 1j * w * s and b.dR2[-1] == -1j * w * s
    for R, dR in ((b.R1, b.dR1), (b.R2, b.dR2)):
        assert 2 * np.real(R[-1] * np.conj(dR[-1])) == 0
        v0, v00, _ = b.pot.infinity_values()
        assert abs(2 * abs(dR[-1]) ** 2 + 2 * (v0 + v00) * abs(R[-1]) ** 2) < 1e-12 * w


def test_envelope_holds():
    for m in (20, 40):
        b = basis(G05, m)
        assert np.min(b.envelope_margin()) >= -WkbNumerics().envelope_slack


def test_envelope_violation_raised_for_loose_tolerance():
    pot = RadialPotential(G05, 40, fundamental(G05, 40).lam)
    with pytest.raises(EnvelopeViolation):
        wkb_basis(pot, numerics=WkbNumerics(rtol=1e-3, atol=1e-3, envelope_slack=0.0))


def test_wronskian_constant():
    b = basis(G05, 60)
    W = b.wronskian()
    assert np.max(np.abs(W + 2j)) < 1e-10 * 2


def test_pure_bullets_negative_in_certified_regime():
    b = basis(G02, 60)
    for A in ((1, 0), (0, 1)):
        rep = negativity_scan(b, *A)
        assert rep.max_open < 0 and rep.in_regime and rep.certified
    b1, b2 = beta_coefficients(b.pot, b.pomega_freq)
    assert b1 > 0 and b2 > 0


def test_first_bullet_negative_at_eps_005():
    rep = negativity_scan(basis(G05, 60), 1, 0)
    assert rep.max_open < 0 and rep.certified


def test_interference_dip():
    b = basis(G05, 60)
    th = np.pi / 3
    rep = negativity_scan(b, np.exp(1j * th), 1.0)
    assert rep.kappa_theta in (1, -3)
    assert -np.pi / b.pomega_freq <= rep.dip_location <= 0
    assert rep.q_at_dip <= -3.5
    assert rep.certified


def test_interference_leading_form():
    b = basis(G05, 60)
    z = np.exp(0.7j)
    q = interference_q(b, z, 1.0)
    lead = -4 * np.imag(z * np.exp(2j * b.pomega_freq * b.r_star))
    resid = np.abs(q - lead)
    m = 60
    ratio = resid[:-1] / (m * b.r_star[:-1] ** 2)
    assert resid[-1] < 1e-12
    assert np.max(ratio) < 1.0  # fitted C of the quadratic law


def test_negativity_scan_input_checks():
    b = basis(G05, 40)
    with pytest.raises(ValueError):
        negativity_scan(b, 0, 0)
    with pytest.raises(ValueError):
        negativity_scan(b, 2.0, 1.0)


def test_out_of_regime_is_reported_not_certified():
    b = basis(G05, 40)
    rep = negativity_scan(b, 1, 0, numerics=WkbNumerics(m_range=(100, 200)))
    assert not rep.in_regime and not rep.certified


def test_duhamel_consistency():
    b = basis(G05, 40)
    for which, (R, dR) in ((1, (b.R1, b.dR1)), (2, (b.R2, b.dR2))):
        direct = 2 * np.real(R * np.conj(dR))
        rebuilt = duhamel_pomega(b, which)
        assert np.max(np.abs(rebuilt - direct)) < 1e-7 * np.max(np.abs(direct))


def test_sin_cubic_window():
    gap, top = sinx_cubic_gap()
    assert gap >= -1e-9 and top <= 0


def test_beta_against_richardson():
    b = basis(G05, 60)
    pot, w = b.pot, b.pomega_freq
    exact = beta_coefficients(pot, w)

    def combo(sig, t):
        r = inverse_tortoise(pot.geom, np.array([t]))
        _, _, v1, _ = eval_potentials(pot, r)
        return 4 * sig * v1[0] + 2 * v0_prime(pot, r)[0] / w

    for sig, be in zip((-1.0, 1.0), exact):
        h = 1e-3 / w
        d = [combo(sig, -h / 2**j) / (-h / 2**j) for j in range(3)]  # the combination vanishes at 0
        r1, r2 = 2 * d[1] - d[0], 2 * d[2] - d[1]
        assert (4 * r2 - r1) / 3 == pytest.approx(be, rel=1e-6)

"""Oscillatory basis near conformal infinity and the sign of the bullet above
the Hawking-Reall threshold.

When lambda_tilde < 0 the potential tends to -varpi^2 at r_star = 0 and the
two solutions fixed there by R(0) = varpi^(-1/2), R'(0) = +-i varpi R(0)
oscillate like exp(+-i varpi r_star) on the window [-pi/varpi, 0].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .angular import fundamental
from .errors import ConvergenceError, EnvelopeViolation, NonNegativeLambdaTilde
from .geometry import Geometry, derive_geometry
from .potentials import RadialPotential
from .radial import _rhs_factory, gauss_cumulative

__all__ = [
    "WkbNumerics",
    "WkbBasis",
    "NegativityReport",
    "wkb_frequency",
    "wkb_frequency_from_potential",
    "error_control_F",
    "wkb_basis",
    "negativity_scan",
    "interference_q",
    "beta_coefficients",
    "duhamel_pomega",
    "sinx_cubic_gap",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


@dataclass
class WkbNumerics:
    rtol: float = 1e-12
    atol: float = 1e-14
    n_out: int = 2049
    envelope_slack: float = 1e-10  # absolute, absorbs integrator error
    eps_range: tuple = (0.01, 0.1)
    m_range: tuple = (20, 200)

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.envelope_slack >= 0):
            raise ValueError("tolerances must be positive")


def wkb_frequency_from_potential(pot: RadialPotential) -> float:
    lt = pot.lam_tilde
    if lt >= 0:
        raise NonNegativeLambdaTilde(f"lambda_tilde = {lt:.6g} >= 0: no oscillatory regime")
    return pot.geom.params.k * np.sqrt(-lt)


def wkb_frequency(params, m: int, lam: Optional[float] = None) -> float:
    """varpi = k sqrt(-lambda_tilde) for the fundamental angular eigenvalue.

    Raises
    ------
    NonNegativeLambdaTilde
        When lambda_tilde >= 0 (no oscillatory regime).
    """
    g = params if isinstance(params, Geometry) else derive_geometry(params)
    if lam is None:
        lam = fundamental(g, m).lam
    return wkb_frequency_from_potential(RadialPotential(g, m, lam))


def _xi_dense(pot: RadialPotential, r_lo: float, rtol=1e-13):
    # xi(r_star) on [r_lo, 0] by integrating d xi/dr_star = Dhat/rho from infinity
    g = pot.geom
    f = pot.dxi
    res = solve_ivp(lambda t, y: [float(f(g.u_plus - y[0], y[0]))], (0.0, r_lo), [g.u_plus],
                    method="DOP853", rtol=rtol, atol=1e-15 * g.u_plus, dense_output=True)
    if not res.success:
        raise ConvergenceError(res.message)
    return res


def error_control_F(pot: RadialPotential, varpi: float, r_star, _xi=None):
    """F(r_star) = (1/varpi) * integral over [r_star, 0] of |V + varpi^2|."""
    r_star = np.atleast_1d(np.asarray(r_star, dtype=float))
    if np.any(r_star > 0):
        raise ValueError("r_star must be <= 0")
    lo = float(np.min(r_star)) if r_star.size else 0.0
    if lo == 0.0:
        return np.zeros_like(r_star)
    res = _xi or _xi_dense(pot, lo)
    steps = np.sort(np.asarray(res.t))

    def integrand(t):
        xi = res.sol(t)[0]
        return np.abs(pot.V_at_xi(xi) + varpi**2)

    # cumulative from the lowest step boundary, then measured from 0
    cum = gauss_cumulative(steps, integrand, np.append(r_star, 0.0))
    return (cum[-1] - cum[:-1]) / varpi


@dataclass
class WkbBasis:
    pomega_freq: float
    pot: RadialPotential = field(repr=False)
    r_star: np.ndarray = field(repr=False)  # uniform grid on [-pi/varpi, 0]
    xi: np.ndarray = field(repr=False)
    R1: np.ndarray = field(repr=False)
    dR1: np.ndarray = field(repr=False)
    R2: np.ndarray = field(repr=False)
    dR2: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    dense: Callable = field(repr=False)  # r_star -> 9-state (xi, R1, R1', R2, R2')
    steps: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return float(self.r_star[1] - self.r_star[0])

    def residuals(self):
        """eps_i = varpi^(1/2) R_i - exp(+-i varpi r_star) and their derivatives."""
        w, t = self.pomega_freq, self.r_star
        sq = np.sqrt(w)
        e1, e2 = np.exp(1j * w * t), np.exp(-1j * w * t)
        eps1 = sq * self.R1 - e1
        eps2 = sq * self.R2 - e2
        deps1 = sq * self.dR1 - 1j * w * e1
        deps2 = sq * self.dR2 + 1j * w * e2
        return eps1, deps1, eps2, deps2

    def envelope_margin(self):
        """min over nodes of (exp(F) - 1) - max(|eps_i|, |eps_i'|/varpi)."""
        env = np.expm1(self.F)
        eps1, deps1, eps2, deps2 = self.residuals()
        w = self.pomega_freq
        worst = np.max(np.vstack([np.abs(eps1), np.abs(deps1) / w, np.abs(eps2), np.abs(deps2) / w]), axis=0)
        return env - worst

    def wronskian(self):
        """R1 R2' - R2 R1' on the grid (constant, -2i at r_star = 0)."""
        return self.R1 * self.dR2 - self.R2 * self.dR1

    def evaluate(self, t):
        y = self.dense(np.atleast_1d(np.asarray(t, dtype=float)))
        return y[0], y[1] + 1j * y[2], y[3] + 1j * y[4], y[5] + 1j * y[6], y[7] + 1j * y[8]


def wkb_basis(pot: RadialPotential, varpi: Optional[float] = None,
              numerics: Optional[WkbNumerics] = None, strict: bool = True) -> WkbBasis:
    """Integrate R1, R2 backward from r_star = 0 over [-pi/varpi, 0].

    Raises
    ------
    EnvelopeViolation
        If ``strict`` and a residual exceeds exp(F) - 1 (plus the slack).
    """
    numerics = numerics or WkbNumerics()
    if varpi is None:
        varpi = wkb_frequency_from_potential(pot)
    g = pot.geom
    r_lo = -np.pi / varpi
    base = _rhs_factory(pot)

    def rhs(t, y):
        a = base(t, y[:5])
        b = base(t, np.concatenate([y[:1], y[5:]]))
        return np.concatenate([a, b[1:]])

    s = varpi ** -0.5
    y0 = np.array([g.u_plus, s, 0.0, 0.0, varpi * s, s, 0.0, 0.0, -varpi * s])
    atol = np.full(9, numerics.atol * s * max(varpi, 1.0))
    atol[0] = numerics.atol * g.u_plus
    res = solve_ivp(rhs, (0.0, r_lo), y0, method="DOP853", rtol=numerics.rtol, atol=atol, dense_output=True)
    if not res.success:
        raise ConvergenceError(f"WKB basis integration failed: {res.message}")
    grid = np.linspace(r_lo, 0.0, numerics.n_out)
    y = res.sol(grid)
    y[:, -1] = y0
    steps = np.sort(np.asarray(res.t))

    def integrand(t):
        xi = res.sol(t)[0]
        return np.abs(pot.V_at_xi(xi) + varpi**2)

    cum = gauss_cumulative(steps, integrand, grid)
    F = (cum[-1] - cum) / varpi
    F[-1] = 0.0
    basis = WkbBasis(varpi, pot, grid, y[0], y[1] + 1j * y[2], y[3] + 1j * y[4], y[5] + 1j * y[6],
                     y[7] + 1j * y[8], F, res.sol, steps)
    if strict:
        margin = basis.envelope_margin()
        if np.min(margin) < -numerics.envelope_slack:
            i = int(np.argmin(margin))
            raise EnvelopeViolation(f"WKB residual exceeds exp(F)-1 by {-margin[i]:.2e} at r_star={grid[i]:.4g}")
    return basis


def interference_q(basis: WkbBasis, A1: complex, A2: complex):
    """q = 2 Re(A1 conj(A2) R1 conj(R2') + A2 conj(A1) R2 conj(R1')) on the grid."""
    return 2.0 * np.real(A1 * np.conj(A2) * basis.R1 * np.conj(basis.dR2)
                         + A2 * np.conj(A1) * basis.R2 * np.conj(basis.dR1))


@dataclass
class NegativityReport:
    max_open: float  # max of the bullet on the open window (-pi/varpi, 0)
    min_value: float
    argmin: float
    certified: bool  # in the asymptotic regime the sign conclusion was checked and holds
    in_regime: bool
    dip_location: Optional[float] = None
    q_at_dip: Optional[float] = None
    q_min: Optional[float] = None
    kappa_theta: Optional[int] = None


def negativity_scan(basis: WkbBasis, A1: complex, A2: complex, eps: Optional[float] = None,
                    numerics: Optional[WkbNumerics] = None, q_threshold: float = 0.0) -> NegativityReport:
    """Sign of the bullet of R = A1 R1 + A2 R2 on the WKB window.

    For a pure basis element the report certifies negativity on the open
    window; with interference it evaluates q at the predicted dip
    -theta/(2 varpi) + kappa pi/(4 varpi), theta = arg(A1 conj(A2)).
    ``certified`` is only set inside the configured (eps, m) regime.
    """
    numerics = numerics or WkbNumerics()
    A1, A2 = complex(A1), complex(A2)
    if A1 == 0 and A2 == 0:
        raise ValueError("(A1, A2) must not both vanish")
    if A1 != 0 and A2 != 0 and not np.isclose(abs(A1) * abs(A2), 1.0, rtol=1e-12):
        raise ValueError("normalise so that |A1||A2| = 1")
    m = abs(basis.pot.m)
    if eps is None:
        eps = basis.pot.geom.eps
    in_regime = (numerics.eps_range[0] <= eps <= numerics.eps_range[1]
                 and numerics.m_range[0] <= m <= numerics.m_range[1])
    R = A1 * basis.R1 + A2 * basis.R2
    dR = A1 * basis.dR1 + A2 * basis.dR2
    p = 2.0 * np.real(R * np.conj(dR))
    inner = p[1:-1]
    i = int(np.argmin(p))
    rep = NegativityReport(float(np.max(inner)), float(p[i]), float(basis.r_star[i]), False, in_regime)
    w = basis.pomega_freq
    if A1 == 0 or A2 == 0:
        rep.certified = in_regime and rep.max_open < 0
        return rep
    theta = float(np.angle(A1 * np.conj(A2))) % (2 * np.pi)
    for kap in (1, -3):
        loc = -theta / (2 * w) + kap * np.pi / (4 * w)
        if -np.pi / w <= loc <= 0:
            break
    _, R1, dR1, R2, dR2 = basis.evaluate(loc)
    q_dip = float(2.0 * np.real(A1 * np.conj(A2) * R1 * np.conj(dR2) + A2 * np.conj(A1) * R2 * np.conj(dR1))[0])
    q = interference_q(basis, A1, A2)
    rep.dip_location, rep.q_at_dip, rep.q_min, rep.kappa_theta = float(loc), q_dip, float(np.min(q)), kap
    rep.certified = in_regime and q_dip < q_threshold
    return rep


def beta_coefficients(pot: RadialPotential, varpi: float):
    """beta_i = (4 sigma_i V1 + 2 V0'/varpi)'(0), sigma_i = (-1)^i, i = 1, 2.

    Uses the exact r_star-derivatives of the rational potentials, which are
    regular at conformal infinity.
    """
    up = pot.geom.u_plus
    d2v0 = pot.dv0.d_rstar()(0.0, up)
    dv1 = pot.dv1(0.0, up)
    return tuple(float(4.0 * s * dv1 + 2.0 * d2v0 / varpi) for s in (-1.0, 1.0))


def duhamel_pomega(basis: WkbBasis, which: int, n_nodes: int = 64):
    """Bullet of R_which rebuilt from its source E_i by the Duhamel formula.

    E_i = p_i'' + (2 varpi)^2 p_i is evaluated from the solution through the
    second-order bullet identity (no differentiation of samples).
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    pot, w = basis.pot, basis.pomega_freq
    x, wq = np.polynomial.legendre.leggauss(n_nodes)

    def source(t):
        xi, R1, dR1, R2, dR2 = basis.evaluate(t)
        R, dR = (R1, dR1) if which == 1 else (R2, dR2)
        u = np.maximum(pot.geom.u_plus - xi, 0.0)
        v0, v00, v1 = pot.v0(u, xi), pot.v00(u, xi), pot.v1(u, xi)
        rv = v0 + v00
        d_rv = pot.d_re_v(u, xi)
        p = 2.0 * np.real(R * np.conj(dR))
        imw = 2.0 * np.imag(R * np.conj(dR))
        return 2.0 * v1 * imw + 2.0 * d_rv * np.abs(R) ** 2 + 4.0 * (rv + w * w) * p

    out = np.zeros_like(basis.r_star)
    for j, t in enumerate(basis.r_star[:-1]):
        s = 0.5 * t * (x + 1.0)  # nodes on [t, 0]
        out[j] = np.sum(source(s) * np.sin(2 * w * (t - s)) * wq) * 0.5 * t / (2 * w)
    return out


def sinx_cubic_gap(n: int = 2001):
    """min over x in [-2 pi, 0] of x^3 - 4 pi^2 (x - sin x) and max of x^3."""
    x = np.linspace(-2 * np.pi, 0.0, n)
    return float(np.min(x**3 - 4 * np.pi**2 * (x - np.sin(x)))), float(np.max(x**3))

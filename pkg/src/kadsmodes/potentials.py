"""Radial Teukolsky potential V = V0[lambda] + V00 - i V1 and the positivity
certificates it must satisfy.

Every potential is stored as a rational function ``N(u) / rho(u)^p`` of the
compactified radius ``u = 1/r`` with ``rho = 1 + a^2 u^2``.  Numerators are
kept both in powers of ``u`` (accurate towards conformal infinity) and in
powers of ``xi = u_+ - u`` (accurate at the horizon), so that V is smooth and
fully resolved on the closed tortoise interval ``(-inf, 0]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar

from .errors import CertificateFailure, DomainError
from .geometry import BlackHoleParams, Geometry, derive_geometry, background_polys

__all__ = [
    "RadialPotential",
    "CertificateReport",
    "CruxReport",
    "eval_potentials",
    "v0_prime",
    "v0_forms",
    "w_prime",
    "v00_polynomial",
    "positivity_certificates",
    "crux_f",
    "crux_certificate",
    "crux_constant_D",
    "certificate_grid",
]


# --------------------------------------------------------------------------
# exact polynomial arithmetic (coefficient lists, lowest degree first)

def _padd(*ps):
    n = max(len(p) for p in ps)
    out = [Fraction(0)] * n
    for p in ps:
        for i, c in enumerate(p):
            out[i] += c
    return out


def _pmul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def _pscale(p, c):
    return [c * x for x in p]


def _pder(p):
    return [i * p[i] for i in range(1, len(p))] or [Fraction(0)]


def _ptrim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def _taylor_shift(p, x0):
    """Coefficients of p(x0 + x) in powers of x (exact)."""
    out = [Fraction(0)] * len(p)
    # Horner on polynomials: out = out * (x0 + x) + c
    for c in reversed(p):
        nxt = [Fraction(0)] * len(p)
        for i, a in enumerate(out):
            if a:
                nxt[i] += a * x0
                if i + 1 < len(nxt):
                    nxt[i + 1] += a
        nxt[0] += c
        out = nxt
    return out


def v00_polynomial(params: BlackHoleParams, exact: bool = False):
    """Coefficients (lowest degree first) of P(r) = (r^2+a^2)^4 V00(r).

    The raw expression has degree 10; the top three coefficients cancel
    exactly, which is checked here in rational arithmetic.
    """
    M, a, k = (Fraction(x) for x in params.as_tuple())
    a2, k2 = a * a, k * k
    delta = [a2, -2 * M, 1 + a2 * k2, Fraction(0), k2]
    d1 = _pder(delta)
    d2 = _pder(d1)
    s = [a2, Fraction(0), Fraction(1)]  # r^2 + a^2
    s2 = _pmul(s, s)
    inner = _padd([2 + a2 * k2, Fraction(0), -6 * k2], _pscale(d2, Fraction(-1)))
    terms = [
        _pmul(_pmul(d1, d1), s2),
        _pmul(_pmul(delta, s2), inner),
        _pmul(_pmul(_pmul([Fraction(0), Fraction(1)], delta), d1), s),
        _pscale(_pmul([-a2, Fraction(0), Fraction(2)], _pmul(delta, delta)), Fraction(-1)),
    ]
    P = _ptrim(_padd(*terms))
    if len(P) - 1 > 7:
        raise CertificateFailure(f"P has degree {len(P) - 1}, expected 7")
    P = P + [Fraction(0)] * (8 - len(P))
    return P if exact else np.array([float(c) for c in P])


def _v1_cubic(params: BlackHoleParams, r_plus: float):
    """Q(r) = (r^2+a^2)^2 V1 / (4 Xi omega_+ m), lowest degree first."""
    M, a, k = params.as_tuple()
    a2k2 = a * a * k * k
    return np.array([
        -M * r_plus**2,
        (1 + a2k2) * r_plus**2 + 2 * a * a,
        -3.0 * M,
        2 * k * k * r_plus**2 + 1 + a2k2,
    ])


# --------------------------------------------------------------------------
# rational functions N(u)/rho(u)^p with a horizon-adapted copy of N

class _Rational:
    def __init__(self, geom: Geometry, num: Polynomial, power: int, zero_at_horizon: bool):
        self.geom = geom
        self.num = num
        self.power = power
        self.zero_at_horizon = zero_at_horizon
        shifted = num(Polynomial([geom.u_plus, -1.0]))
        c = shifted.coef.copy()
        if zero_at_horizon:
            c[0] = 0.0
        self.num_xi = Polynomial(c)
        a2 = geom.params.a ** 2
        self.rho = Polynomial([1.0, 0.0, a2])

    def __call__(self, u, xi):
        u = np.asarray(u, dtype=float)
        xi = np.asarray(xi, dtype=float)
        near = xi < 0.5 * self.geom.u_plus
        n = np.where(near, self.num_xi(xi), self.num(u))
        return n / self.rho(u) ** self.power

    def d_rstar(self) -> "_Rational":
        """Derivative with respect to r_star: -(Dhat/rho) d/du."""
        dhat = _dhat_poly(self.geom.params)
        p = self.power
        num = -dhat * (self.num.deriv() * self.rho - p * self.num * self.rho.deriv())
        return _Rational(self.geom, num, p + 2, True)

    def __add__(self, other: "_Rational") -> "_Rational":
        p = max(self.power, other.power)
        num = self.num * self.rho ** (p - self.power) + other.num * other.rho ** (p - other.power)
        return _Rational(self.geom, num, p, self.zero_at_horizon and other.zero_at_horizon)


def _dhat_poly(params: BlackHoleParams) -> Polynomial:
    """u^4 Delta(1/u) in powers of u."""
    M, a, k = params.as_tuple()
    return Polynomial([k * k, 0.0, 1.0 + a * a * k * k, -2.0 * M, a * a])


@dataclass
class RadialPotential:
    """Potential of the stationary radial equation -R'' + V R = 0.

    Parameters
    ----------
    geom : Geometry or BlackHoleParams
    m : int
        Azimuthal number.
    lam : float
        Separation constant (normally the angular eigenvalue).
    """

    geom: Geometry
    m: int
    lam: float
    lam_tilde: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.geom, BlackHoleParams):
            self.geom = derive_geometry(self.geom)
        g = self.geom
        M, a, k = g.params.as_tuple()
        rp = g.r_plus
        self.c_rot = g.Xi * g.omega_plus * self.m  # Xi omega_+ m
        self.lam_tilde = self.lam - 2.0 - a * a * k * k - (self.c_rot / k) ** 2
        dhat = _dhat_poly(g.params)
        one_minus = Polynomial([1.0, 0.0, -rp * rp])  # 1 - r_+^2 u^2
        self.lam_shift = self.lam - 2.0 - a * a * k * k
        self.delta_hat = _Rational(g, dhat, 0, True)
        self.w = _Rational(g, dhat, 2, True)
        self.v0 = _Rational(g, self.lam_shift * dhat - self.c_rot**2 * one_minus**2, 2, True)
        P = v00_polynomial(g.params)
        self.v00 = _Rational(g, Polynomial(np.concatenate([[0.0], P[::-1]])), 4, False)
        Q = _v1_cubic(g.params, rp)
        self.v1 = _Rational(g, 4.0 * self.c_rot * Polynomial(np.concatenate([[0.0], Q[::-1]])), 2, True)
        self.re_v = self.v0 + self.v00
        self.dv0 = self.v0.d_rstar()
        self.dv00 = self.v00.d_rstar()
        self.dv1 = self.v1.d_rstar()
        self.d_re_v = self.re_v.d_rstar()
        # d xi / d r_star = Dhat / rho
        self.dxi = _Rational(g, dhat, 1, True)

    @property
    def params(self) -> BlackHoleParams:
        return self.geom.params

    def with_lambda(self, lam: float) -> "RadialPotential":
        return RadialPotential(self.geom, self.m, lam)

    def uxi_from_r(self, r):
        r = np.asarray(r, dtype=float)
        rp = self.geom.r_plus
        if np.any(r <= rp):
            raise DomainError("potentials are defined for r > r_+")
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(np.isinf(r), 0.0, 1.0 / r)
            xi = np.where(np.isinf(r), self.geom.u_plus, (r - rp) / (r * rp))
        return u, xi

    def at_xi(self, xi):
        """(V0, V00, V1) at compactified radius xi in (0, u_+]."""
        xi = np.asarray(xi, dtype=float)
        u = np.maximum(self.geom.u_plus - xi, 0.0)
        return self.v0(u, xi), self.v00(u, xi), self.v1(u, xi)

    def V_at_xi(self, xi):
        v0, v00, v1 = self.at_xi(xi)
        return v0 + v00 - 1j * v1

    def infinity_values(self):
        """(V0, V00, V1) at r_star = 0; V0(0) = k^2 lambda_tilde."""
        return self.at_xi(self.geom.u_plus)


def eval_potentials(pot: RadialPotential, r):
    """Return (V0, V00, V1, V) at radius r > r_+ (r may be inf)."""
    u, xi = pot.uxi_from_r(r)
    v0, v00, v1 = pot.v0(u, xi), pot.v00(u, xi), pot.v1(u, xi)
    return v0, v00, v1, v0 + v00 - 1j * v1


def v0_forms(pot: RadialPotential, r):
    """Both textbook forms of V0[lambda], evaluated naively in r.

    Used as an independent check on the compactified representation.
    """
    g = pot.geom
    a, k = g.params.a, g.params.k
    r = np.asarray(r, dtype=float)
    delta = background_polys(g, r)[0]
    s2 = (r * r + a * a) ** 2
    sq = ((r - g.r_plus) * (r + g.r_plus)) ** 2
    first = delta / s2 * pot.lam_shift - pot.c_rot**2 * sq / s2
    second = delta / s2 * pot.lam_tilde + (pot.c_rot / k) ** 2 * (delta - k * k * sq) / s2
    return first, second


def w_prime(pot: RadialPotential, r):
    """d w / d r_star for w = Delta/(r^2+a^2)^2, closed form in r."""
    g = pot.geom
    M, a, k = g.params.as_tuple()
    r = np.asarray(r, dtype=float)
    delta = background_polys(g, r)[0]
    cubic = (2 - 2 * a * a * k * k) * r**3 - 6 * M * r**2 + 2 * a * a * (1 - a * a * k * k) * r + 2 * M * a * a
    return -delta / (r * r + a * a) ** 4 * cubic


def v0_prime(pot: RadialPotential, r):
    """d V0 / d r_star from the closed-form expression in r.

    The second term is written with (r^2 - r_+^2) = (r - r_+)(r + r_+) so the
    horizon limit stays accurate.
    """
    g = pot.geom
    a = g.params.a
    r = np.asarray(r, dtype=float)
    delta = background_polys(g, r)[0]
    s = r * r + a * a
    rp = g.r_plus
    tail = 2.0 * delta / s * ((r - rp) * (r + rp) / s) * 2.0 * r * (rp * rp + a * a) / s**2
    return pot.lam_shift * w_prime(pot, r) - pot.c_rot**2 * tail


# --------------------------------------------------------------------------
# certificates

def certificate_grid(geom: Geometry, n: int = 10_000, lo: float = 1e-6, hi: float = 1e3):
    """Radii r_+ + x with x log-spaced in [lo r_+, hi r_+]."""
    x = np.geomspace(lo, hi, n) * geom.r_plus
    return geom.r_plus + x, x


@dataclass
class CertificateReport:
    params: BlackHoleParams
    m: int
    p_derivs: np.ndarray  # d^j P / dr^j at r_+, j = 0..7
    p_derivs_positive: bool
    v1_lower_margin: float  # min V1/(Xi omega_+ m)
    v1_upper_margin: float  # min 8(k^2 r_+^2+2)/r - V1/(Xi omega_+ m)
    v1_applicable: bool
    quad_min: float  # min of Delta - k^2 (r-r_+)^2 (r+r_+)^2
    quad_scale: float
    quad_slope: float  # one-sided derivative at r_+
    v00_min: float

    @property
    def passed(self) -> bool:
        ok = self.p_derivs_positive and self.quad_min >= -1e-12 * self.quad_scale and self.quad_slope > 0
        ok = ok and self.v00_min > 0
        if self.v1_applicable:
            ok = ok and self.v1_lower_margin > 0 and self.v1_upper_margin > 0
        return bool(ok)

    def failures(self):
        out = []
        if not self.p_derivs_positive:
            out.append("P derivatives at r_+ not all positive")
        if self.quad_min < -1e-12 * self.quad_scale or self.quad_slope <= 0:
            out.append("Delta - k^2 (r-r_+)^2 (r+r_+)^2 negative")
        if self.v00_min <= 0:
            out.append("V00 not positive")
        if self.v1_applicable and not (self.v1_lower_margin > 0 and self.v1_upper_margin > 0):
            out.append("V1 two-sided bound violated")
        return out


def positivity_certificates(params, m: int, n_grid: int = 10_000, strict: bool = True) -> CertificateReport:
    """Check V00 > 0, the two-sided V1 bound and the quadratic bound on V0.

    Raises
    ------
    CertificateFailure
        When ``strict`` and any check fails.
    """
    geom = params if isinstance(params, Geometry) else derive_geometry(params)
    p = geom.params
    M, a, k = p.as_tuple()
    rp = geom.r_plus

    P = v00_polynomial(p, exact=True)
    shifted = _taylor_shift(P, Fraction(rp))
    derivs = np.array([float(factorial(j) * c) for j, c in enumerate(shifted)])

    r, x = certificate_grid(geom, n_grid)
    pot = RadialPotential(geom, m, lam=2.0 + a * a * k * k)  # lambda does not enter V00, V1
    u, xi = pot.uxi_from_r(r)
    v00 = pot.v00(u, xi)

    v1_applicable = a > 0
    if v1_applicable:
        ratio = pot.v1(u, xi) / pot.c_rot
        lower = float(np.min(ratio))
        upper = float(np.min(8.0 * (k * k * rp * rp + 2.0) / r - ratio))
    else:
        lower = upper = float("nan")

    A = 2 * k * k * rp * rp + 1 + a * a * k * k
    slope = 2 * A * rp - 2 * M
    quad = A * x * x + slope * x  # written about r_+, where it vanishes exactly
    scale = float(np.max(np.abs(background_polys(geom, r)[0])))

    rep = CertificateReport(
        params=p, m=m, p_derivs=derivs, p_derivs_positive=bool(np.all(derivs > 0)),
        v1_lower_margin=lower, v1_upper_margin=upper, v1_applicable=v1_applicable,
        quad_min=float(min(0.0, np.min(quad))), quad_scale=scale, quad_slope=float(slope),
        v00_min=float(np.min(v00)),
    )
    if strict and not rep.passed:
        raise CertificateFailure(f"{p}, m={m}: " + "; ".join(rep.failures()))
    return rep


def crux_f(pot: RadialPotential, r):
    """f = 4|V1| sqrt|V0 + V00| + 2 V0' (r_star derivative)."""
    v0, v00, v1, _ = eval_potentials(pot, r)
    return 4.0 * np.abs(v1) * np.sqrt(np.abs(v0 + v00)) + 2.0 * v0_prime(pot, r)


def _d_integrand(geom: Geometry, r):
    a = geom.params.a
    rp = geom.r_plus
    delta = background_polys(geom, r)[0]
    s = r * r + a * a
    return 2 * r * delta / s * ((r - rp) * (r + rp) / s) * 2 * r * (rp * rp + a * a) / s**2


def crux_constant_D(geom: Geometry, r_max_factor: float = 1e3):
    """Infimum over (3M, inf) defining the constant D, plus the r -> inf limit.

    Returns (D, r_at_inf, tail_limit).  The scan is truncated at
    ``r_max_factor * r_+``; the analytic limit 4 k^2 (r_+^2 + a^2) covers the
    tail.
    """
    M, a, k = geom.params.as_tuple()
    lo, hi = 3.0 * M, max(r_max_factor * geom.r_plus, 30.0 * M)
    r = np.geomspace(lo, hi, 4000)
    vals = _d_integrand(geom, r)
    i = int(np.argmin(vals))
    best_r, best = r[i], vals[i]
    if 0 < i < r.size - 1:
        res = minimize_scalar(lambda t: _d_integrand(geom, np.exp(t)), bracket=(np.log(r[i - 1]), np.log(r[i]), np.log(r[i + 1])))
        if res.fun < best:
            best_r, best = float(np.exp(res.x)), float(res.fun)
    tail = 4 * k * k * (geom.r_plus**2 + a * a)
    if i == 0:
        best_r, best = lo, float(_d_integrand(geom, np.array(lo)))
    if tail < best:
        best_r, best = float("inf"), tail
    return float(best), best_r, tail


@dataclass
class CruxReport:
    D: float
    n_points: int  # grid points in the negative set N
    n_min: float  # smallest r in N (inf if N is empty)
    bound_3M_over_Xi: float
    max_excess: float  # max over N of f + (Xi omega_+ m)^2 D / r
    holds: bool
    inside_3M: bool


def crux_certificate(pot: RadialPotential, n_grid: int = 10_000) -> CruxReport:
    """Scan the negative set N = {V0 + V00 <= 0} and test f <= -(Xi w_+ m)^2 D / r."""
    g = pot.geom
    D, _, _ = crux_constant_D(g)
    r, _ = certificate_grid(g, n_grid)
    r = np.append(r, np.inf)
    v0, v00, _, _ = eval_potentials(pot, r)
    neg = (v0 + v00) <= 0
    bound = 3.0 * g.params.M / g.Xi
    if not np.any(neg):
        return CruxReport(D, 0, float("inf"), bound, float("-inf"), True, True)
    rn = r[neg]
    finite = np.isfinite(rn)
    f = crux_f(pot, rn[finite])
    excess = f + pot.c_rot**2 * D / rn[finite]
    max_excess = float(np.max(excess)) if excess.size else float("-inf")
    n_min = float(np.min(rn))
    return CruxReport(D, int(neg.sum()), n_min, bound, max_excess, max_excess <= 0, n_min >= bound)

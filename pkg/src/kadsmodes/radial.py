"""Regular-at-horizon solutions of the stationary radial equation
-R'' + V R = 0 (' = d/dr_star), the bullet and the Wronskian.

The solution is seeded by a Frobenius series at the horizon and integrated
forward in r_star up to conformal infinity r_star = 0.  The compactified
radius xi = u_+ - u is carried as an extra state variable (d xi/dr_star =
Dhat/rho), which avoids inverting the tortoise map inside the right-hand
side.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .errors import ConvergenceError, DomainError, KadsError
from .geometry import tortoise_xi
from .potentials import RadialPotential, _dhat_poly, v00_polynomial, _v1_cubic

__all__ = [
    "FrobeniusSeed",
    "RadialNumerics",
    "RadialSolution",
    "BulletProfile",
    "MatchResult",
    "frobenius_seed",
    "integrate_regular",
    "bullet_profile",
    "kappa_match",
    "fd_derivative",
    "gauss_cumulative",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


# --------------------------------------------------------------------------
# Frobenius seed


@dataclass
class FrobeniusSeed:
    """Series R = sum_n c_n xi^(n+1) for the regular branch.

    ``coefficients[0]`` is chosen so that R / Delta -> 1 at the horizon.
    """

    order: int
    delta: float  # r_seed = r_+ (1 + delta)
    coefficients: np.ndarray = field(repr=False)
    xi_seed: float
    r_star_seed: float
    R: complex
    dR: complex  # d R / d r_star
    truncation_error: float  # |last retained term| / |R|

    def series(self, xi):
        """(R, dR/dxi) of the truncated series at xi."""
        xi = np.asarray(xi, dtype=float)
        c = self.coefficients
        n = np.arange(1, c.size + 1)
        pw = xi[..., None] ** n
        R = np.sum(c * pw, axis=-1)
        dR = np.sum(c * n * pw / np.where(xi[..., None] == 0, 1.0, xi[..., None]), axis=-1)
        return R, dR


def _ode_coeffs_xi(pot: RadialPotential):
    # the radial ODE multiplied by rho^4, written as A R_xx + B R_x + C R = 0
    g = pot.geom
    x = Polynomial([g.u_plus, -1.0])  # u as a function of xi

    def shifted(p, zero):
        q = p(x)
        if zero:
            q.coef[0] = 0.0
        return q

    rho = Polynomial([1.0, 0.0, g.params.a ** 2])
    one_minus = Polynomial([1.0, 0.0, -g.r_plus**2])
    n0 = shifted(pot.lam_shift * _dhat_poly(g.params) - pot.c_rot**2 * one_minus**2, True)
    n00 = shifted(Polynomial(np.concatenate([[0.0], v00_polynomial(g.params)[::-1]])), False)
    n1 = shifted(4.0 * pot.c_rot * Polynomial(np.concatenate([[0.0], _v1_cubic(g.params, g.r_plus)[::-1]])), True)
    D, Rh = shifted(_dhat_poly(g.params), True), rho(x)
    Dx, Rhx = D.deriv(), Rh.deriv()
    A = (Rh**2 * D**2).coef
    B = (Rh**2 * D * Dx - Rh * Rhx * D**2).coef
    Cr = -(n0 * Rh**2 + n00).coef
    Ci = (n1 * Rh**2).coef
    C = np.zeros(max(Cr.size, Ci.size), dtype=complex)
    C[: Cr.size] += Cr
    C[: Ci.size] += 1j * Ci
    return A, B, C, D.coef


def frobenius_seed(pot: RadialPotential, order: int = 30, delta: float = 1e-4,
                   tol: float = 1e-12) -> FrobeniusSeed:
    """Seed (R, R') of the regular branch at r = r_+ (1 + delta).

    Raises
    ------
    ConvergenceError
        If the truncation estimate exceeds ``tol`` relative to |R|.
    """
    if order < 10:
        raise ValueError("order must be >= 10")
    if not 1e-8 <= delta <= 1e-2:
        raise DomainError("delta must lie in [1e-8, 1e-2]")
    g = pot.geom
    A, B, C, D = _ode_coeffs_xi(pot)

    def get(arr, j):
        return arr[j] if j < arr.size else 0.0

    def indicial(s):
        return get(A, 2) * s * (s - 1) + get(B, 1) * s + get(C, 0)

    c = np.zeros(order + 1, dtype=complex)
    c[0] = D[1] / g.u_plus**4
    for N in range(1, order + 1):
        acc = 0.0j
        for j in range(1, N + 1):
            n = N - j + 1  # exponent of the earlier term
            acc += c[N - j] * (get(A, j + 2) * n * (n - 1) + get(B, j + 1) * n + get(C, j))
        den = indicial(N + 1)
        if den == 0:
            raise ConvergenceError("Frobenius recurrence hit a resonance")
        c[N] = -acc / den
    r_seed = g.r_plus * (1.0 + delta)
    xi = (r_seed - g.r_plus) / (r_seed * g.r_plus)
    seed = FrobeniusSeed(order, delta, c, xi, float(tortoise_xi(g, xi)), 0j, 0j, 0.0)
    R, dRx = seed.series(xi)
    f = pot.dxi(g.u_plus - xi, xi)  # Dhat/rho
    seed.R, seed.dR = complex(R), complex(f * dRx)
    seed.truncation_error = float(abs(c[-1]) * xi ** (order + 1) / abs(R))
    if seed.truncation_error > tol:
        raise ConvergenceError(f"Frobenius truncation error {seed.truncation_error:.2e} exceeds {tol:.0e}")
    return seed


# --------------------------------------------------------------------------
# integration


@dataclass
class RadialNumerics:
    rtol: float = 1e-12
    atol: float = 1e-15  # relative to |R_seed|
    n_out: int = 4096  # minimum number of output nodes
    kh_max: float = 0.04  # output spacing times the largest local wavenumber sqrt|Re V|
    n_out_max: int = 1 << 18
    seed_order: int = 30
    seed_delta: float = 1e-4
    method: str = "DOP853"

    def __post_init__(self):
        for name in ("rtol", "atol", "seed_delta", "kh_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 16 <= self.n_out <= self.n_out_max:
            raise ValueError("need 16 <= n_out <= n_out_max")


def _scalar_rational(rat, u_plus):
    # plain-float Horner evaluator for the integrator's inner loop
    cu = [float(c) for c in rat.num.coef[::-1]]
    cx = [float(c) for c in rat.num_xi.coef[::-1]]
    a2 = float(rat.rho.coef[2]) if rat.rho.coef.size > 2 else 0.0
    p = rat.power
    half = 0.5 * u_plus

    def ev(u, xi):
        acc = 0.0
        if xi < half:
            for c in cx:
                acc = acc * xi + c
        else:
            for c in cu:
                acc = acc * u + c
        return acc / (1.0 + a2 * u * u) ** p

    return ev


def _rhs_factory(pot: RadialPotential):
    up = pot.geom.u_plus
    dxi = _scalar_rational(pot.dxi, up)
    re_v = _scalar_rational(pot.re_v, up)
    v1 = _scalar_rational(pot.v1, up)

    def rhs(t, y):
        xi = float(y[0])
        u = up - xi
        rv = re_v(u, xi)
        iv = -v1(u, xi)
        rr, ri = y[1], y[2]
        return np.array([dxi(u, xi), y[3], y[4], rv * rr - iv * ri, rv * ri + iv * rr])

    return rhs


def fd_derivative(y, h, order=1):
    """Sixth-order centred finite difference; one-sided stencils at the ends."""
    y = np.asarray(y)
    n = y.size
    out = np.empty_like(y)
    if order == 1:
        cc = np.array([-1, 9, -45, 0, 45, -9, 1]) / 60.0
    elif order == 2:
        cc = np.array([2, -27, 270, -490, 270, -27, 2]) / 180.0
    else:
        raise ValueError("order must be 1 or 2")
    out[3:-3] = sum(cc[j] * y[j: n - 6 + j] for j in range(7)) / h**order
    for i in list(range(3)) + list(range(n - 3, n)):
        # one-sided seven-point stencil from Fornberg weights
        lo = min(max(i - 3, 0), n - 7)
        xs = np.arange(lo, lo + 7) - i
        w = _fd_weights(xs.astype(float), order)
        out[i] = np.dot(w, y[lo: lo + 7]) / h**order
    return out


def _fd_weights(x, order):
    # weights by solving the Vandermonde system
    n = x.size
    V = np.vander(x, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(V, rhs)


def gauss_cumulative(ts, func, t_eval):
    """Cumulative integral of ``func`` from ts[0] to each t in ``t_eval``.

    ``ts`` are the integrator step boundaries; each step is integrated with
    16-point Gauss-Legendre on the dense output, which keeps the quadrature at
    the interpolant's accuracy.
    """
    ts = np.asarray(ts)
    a, b = ts[:-1], ts[1:]
    xm, hw = 0.5 * (a + b), 0.5 * (b - a)
    nodes = xm[:, None] + hw[:, None] * _GL_X
    per_step = np.sum(func(nodes.ravel()).reshape(nodes.shape) * _GL_W, axis=1) * hw
    cum = np.concatenate([[0.0], np.cumsum(per_step)])
    t_eval = np.asarray(t_eval)
    k = np.clip(np.searchsorted(ts, t_eval, side="right") - 1, 0, ts.size - 2)
    lo = ts[k]
    xm2, hw2 = 0.5 * (lo + t_eval), 0.5 * (t_eval - lo)
    nodes2 = xm2[:, None] + hw2[:, None] * _GL_X
    part = np.sum(func(nodes2.ravel()).reshape(nodes2.shape) * _GL_W, axis=1) * hw2
    return cum[k] + part


@dataclass
class RadialSolution:
    """Regular solution sampled on a uniform r_star grid ending at 0.

    ``R`` is normalised so that the integral of |R|^2 over (-inf, 0] is 1;
    ``scale`` is the factor applied to the raw (R/Delta -> 1) solution.
    """

    pot: RadialPotential = field(repr=False)
    seed: FrobeniusSeed = field(repr=False)
    r_star: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    dR: np.ndarray = field(repr=False)
    scale: float
    tail_norm: float  # contribution of (-inf, r_star_min) to the L2 norm
    steps: np.ndarray = field(repr=False)
    nfev: int
    dense: Callable = field(repr=False)

    @property
    def h(self) -> float:
        return float(self.r_star[1] - self.r_star[0])

    @property
    def r(self):
        with np.errstate(divide="ignore"):
            return 1.0 / (self.pot.geom.u_plus - self.xi)

    @property
    def pomega(self):
        return 2.0 * np.real(self.R * np.conj(self.dR))

    @property
    def W_im(self):
        return 2.0 * np.imag(self.R * np.conj(self.dR))

    def V(self):
        return self.pot.V_at_xi(self.xi)

    def evaluate(self, t):
        """(xi, R, R') at arbitrary r_star in [r_star_min, 0] from the dense output."""
        y = self.dense(np.atleast_1d(np.asarray(t, dtype=float)))
        return y[0], self.scale * (y[1] + 1j * y[2]), self.scale * (y[3] + 1j * y[4])

    def pomega_at(self, t):
        _, R, dR = self.evaluate(t)
        return 2.0 * np.real(R * np.conj(dR))

    # ------------------------------------------------------------------
    # horizon tail: integrals over (-inf, r_star_min) from the series in xi

    def _tail(self, func):
        g = self.pot.geom
        xs = 0.5 * self.seed.xi_seed * (_GL_X + 1.0)
        ws = 0.5 * self.seed.xi_seed * _GL_W
        R, dRx = self.seed.series(xs)
        f = self.pot.dxi(g.u_plus - xs, xs)
        R, dR = self.scale * R, self.scale * f * dRx
        v0, v00, v1 = self.pot.at_xi(xs)
        return float(np.sum(func(R, dR, v0, v00, v1) / f * ws))

    def _integrand(self, func):
        def fn(t):
            xi, R, dR = self.evaluate(t)
            v0, v00, v1 = self.pot.at_xi(xi)
            return func(R, dR, v0, v00, v1)
        return fn

    def cumulative(self, func):
        """Integral over (-inf, r_star] of func(R, R', V0, V00, V1) on the grid."""
        return self._tail(func) + gauss_cumulative(self.steps, self._integrand(func), self.r_star)

    # ------------------------------------------------------------------
    # identity defects

    def defects(self):
        """Relative defects of the four first- and second-order identities.

        The two differential identities are measured against the largest
        term on their right side: far above threshold the terms cancel to
        ~1% of their size, so the sum itself is not a floating-point scale.
        """
        h = self.h
        R, dR = self.R, self.dR
        p = self.pomega
        v0, v00, v1 = self.pot.at_xi(self.xi)
        rv = v0 + v00
        R2 = np.abs(R) ** 2
        dp = fd_derivative(p, h)
        rhs1 = 2.0 * np.abs(dR) ** 2 + 2.0 * rv * R2
        sc1 = max(np.max(2.0 * np.abs(dR) ** 2), np.max(np.abs(2.0 * rv * R2)), np.max(np.abs(dp)))
        d1 = np.max(np.abs(dp - rhs1)[3:-3]) / sc1
        # second-order identity: p'' = 2 i Im(V) W + 2 Re(V') |R|^2 + 4 Re(V) p
        W = 1j * self.W_im
        d_rv = self.pot.d_re_v(np.maximum(self.pot.geom.u_plus - self.xi, 0.0), self.xi)
        ddp = fd_derivative(p, h, order=2)
        terms = (np.real(2j * (-v1) * W), 2.0 * d_rv * R2, 4.0 * rv * p)
        rhs2 = sum(terms)
        sc2 = max(max(np.max(np.abs(t)) for t in terms), np.max(np.abs(ddp)))
        d2 = np.max(np.abs(ddp - rhs2)[3:-3]) / sc2
        # Wronskian: Im W = 2 int V1 |R|^2
        wint = 2.0 * self.cumulative(lambda R, dR, v0, v00, v1: v1 * np.abs(R) ** 2)
        scw = max(np.max(np.abs(self.W_im)), 1e-300)
        dw = np.max(np.abs(self.W_im - wint)) / scw
        # energy: p = 2 int (|R'|^2 + (V0+V00)|R|^2)
        eint = 2.0 * self.cumulative(lambda R, dR, v0, v00, v1: np.abs(dR) ** 2 + (v0 + v00) * np.abs(R) ** 2)
        sce = max(np.max(np.abs(p)), 1e-300)
        de = np.max(np.abs(p - eint)) / sce
        return {"pomega_first": float(d1), "pomega_second": float(d2), "wronskian": float(dw), "energy": float(de)}


def integrate_regular(pot: RadialPotential, seed: Optional[FrobeniusSeed] = None,
                      numerics: Optional[RadialNumerics] = None, normalize: bool = True) -> RadialSolution:
    """Integrate the regular branch from the horizon seed to r_star = 0.

    Raises
    ------
    ConvergenceError
        If the integrator fails (step-size collapse or tolerance not met).
    """
    numerics = numerics or RadialNumerics()
    if seed is None:
        seed = frobenius_seed(pot, numerics.seed_order, numerics.seed_delta)
    y0 = np.array([seed.xi_seed, seed.R.real, seed.R.imag, seed.dR.real, seed.dR.imag])
    amp = abs(seed.R) + abs(seed.dR)
    atol = np.array([numerics.atol * seed.xi_seed] + [numerics.atol * amp] * 4)
    t0 = seed.r_star_seed
    res = solve_ivp(_rhs_factory(pot), (t0, 0.0), y0, method=numerics.method, rtol=numerics.rtol,
                    atol=atol, dense_output=True)
    if not res.success:
        raise ConvergenceError(f"radial integration failed: {res.message}")
    ts = np.asarray(res.t)
    # the identity checks differentiate samples, so the grid must resolve the local oscillation
    v0, v00, _ = pot.at_xi(res.y[0])
    k_max = float(np.sqrt(np.max(np.abs(v0 + v00))))
    n = min(max(numerics.n_out, int(np.ceil(abs(t0) * k_max / numerics.kh_max)) + 1), numerics.n_out_max)
    grid = np.linspace(t0, 0.0, n)
    y = res.sol(grid)
    sol = RadialSolution(pot, seed, grid, y[0], y[1] + 1j * y[2], y[3] + 1j * y[4], 1.0, 0.0, ts,
                         int(res.nfev), res.sol)
    if normalize:
        body = gauss_cumulative(ts, sol._integrand(lambda R, dR, *v: np.abs(R) ** 2), [0.0])[0]
        tail = sol._tail(lambda R, dR, *v: np.abs(R) ** 2)
        s = 1.0 / np.sqrt(body + tail)
        sol.scale = s
        sol.R, sol.dR = sol.R * s, sol.dR * s
        sol.tail_norm = tail * s * s
    return sol


# --------------------------------------------------------------------------
# bullet and matching


@dataclass
class BulletProfile:
    min_value: float  # min of pomega on [r_star_lo, 0]
    argmin: float
    endpoint: float  # pomega(0)
    near_horizon_positive: bool  # pomega > 0 on [r_star_min, r_star_lo]
    r_star_lo: float


def bullet_profile(sol: RadialSolution, r_star_lo: Optional[float] = None) -> BulletProfile:
    """Minimum of the bullet on [r_star_lo, 0], refined on the dense output."""
    g = sol.pot.geom
    if r_star_lo is None:
        delta = sol.seed.delta
        r_lo = g.r_plus * (1.0 + 10.0 * delta)
        r_star_lo = float(tortoise_xi(g, (r_lo - g.r_plus) / (r_lo * g.r_plus)))
    p = sol.pomega
    mask = sol.r_star >= r_star_lo
    idx = np.flatnonzero(mask)
    i = idx[np.argmin(p[idx])]
    tmin, pmin = float(sol.r_star[i]), float(p[i])
    if 0 < i < p.size - 1 and mask[i - 1]:
        h = sol.h
        res = minimize_scalar(lambda t: float(sol.pomega_at(t)[0]), bounds=(sol.r_star[i] - h, min(sol.r_star[i] + h, 0.0)),
                              method="bounded", options={"xatol": 1e-12})
        if res.fun < pmin:
            tmin, pmin = float(res.x), float(res.fun)
    near = p[~mask]
    return BulletProfile(pmin, tmin, float(p[-1]), bool(near.size == 0 or np.all(near > 0)), float(r_star_lo))


@dataclass
class MatchResult:
    kappa: complex
    residual_value: float  # |R+(0) - conj(R-(0))|
    residual_deriv: float  # |R+'(0) + conj(R-'(0))|


def kappa_match(R0: complex, dR0: complex, p_tol: float = np.inf) -> MatchResult:
    """Scale R^[-2] = kappa R so the coupled spin +-2 boundary conditions hold.

    Raises
    ------
    ValueError
        If R0 = R0' = 0.
    KadsError
        If the bullet 2 Re(R0 conj(R0')) exceeds ``p_tol`` (no mode to match).
    """
    R0, dR0 = complex(R0), complex(dR0)
    if R0 == 0 and dR0 == 0:
        raise ValueError("trivial data cannot be matched")
    pw = 2.0 * (R0 * dR0.conjugate()).real
    if abs(pw) > p_tol:
        raise KadsError(f"bullet at r_star = 0 is {pw:.3e}, above tolerance {p_tol:.1e}")
    kappa = R0.conjugate() / R0 if R0 != 0 else -dR0.conjugate() / dR0
    Rm, dRm = kappa * R0, kappa * dR0
    return MatchResult(kappa, abs(R0 - Rm.conjugate()), abs(dR0 + dRm.conjugate()))

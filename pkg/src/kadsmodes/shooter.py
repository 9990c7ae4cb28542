"""Continuity/bisection search for stationary modes along a parameter path.

For each s the regular solution R_s (normalised in L2) is integrated and its
bullet p_s = (|R_s|^2)' is inspected.  Below the Hawking-Reall threshold p_s
stays positive; above it the bullet dips negative near conformal infinity.
The first s where the minimum g(s) of p_s changes sign is located by a coarse
scan followed by bisection, and at the limit p_s(0) = 0: a mode.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .angular import fundamental, solve_angular
from .errors import BisectionStall, KadsError, NoBracket, ReboundDetected
from .geometry import BlackHoleParams, Geometry, ParameterPath, derive_geometry
from .potentials import RadialPotential, certificate_grid, eval_potentials
from .radial import (RadialNumerics, RadialSolution, bullet_profile, integrate_regular,
                     kappa_match)

__all__ = [
    "REFERENCE_PATH",
    "ShootNumerics",
    "ShotResult",
    "ModeCertificate",
    "ReboundReport",
    "StabilityReport",
    "shoot",
    "find_threshold",
    "no_rebound_check",
    "accumulation_scan",
    "mode_stability_scan",
    "continuity_constant",
]

log = logging.getLogger(__name__)

# small black hole spun up through the threshold: eps(0) = -0.30, eps(1) = +0.33
REFERENCE_PATH = ParameterPath([BlackHoleParams(0.1, 0.025, 1.0), BlackHoleParams(0.1, 0.045, 1.0)])


@dataclass
class ShootNumerics:
    radial: RadialNumerics = field(default_factory=RadialNumerics)
    angular_resolution: int = 1024
    coarse_samples: int = 64
    s_tol: float = 1e-10
    p_tol: float = 1e-8
    max_iter: int = 80
    zero_tol: float = 1e-6
    boundary_cells: int = 2

    def __post_init__(self):
        for name in ("s_tol", "p_tol", "zero_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.coarse_samples < 2:
            raise ValueError("coarse_samples must be >= 2")


@dataclass
class ShotResult:
    s: float
    params: BlackHoleParams
    lam: float
    g: float  # min of the bullet on [r_star_lo, 0]
    argmin: float
    endpoint: float  # bullet at r_star = 0
    near_horizon_positive: bool
    solution: RadialSolution = field(repr=False)


def shoot(path: ParameterPath, s: float, m: int, numerics: Optional[ShootNumerics] = None) -> ShotResult:
    """Angular solve, potential, regular integration and bullet at path point s."""
    numerics = numerics or ShootNumerics()
    if abs(m) < 2:
        raise ValueError("|m| >= 2 required")
    geom = path.geometry(s)
    lam = fundamental(geom, m, resolution=numerics.angular_resolution).lam
    pot = RadialPotential(geom, m, lam)
    sol = integrate_regular(pot, numerics=numerics.radial)
    bp = bullet_profile(sol)
    return ShotResult(float(s), geom.params, lam, bp.min_value, bp.argmin, bp.endpoint,
                      bp.near_horizon_positive, sol)


# --------------------------------------------------------------------------
# no-rebound diagnostic


@dataclass
class ReboundReport:
    n_touches: int  # near-touches p = p' = 0, at grid nodes or refined extrema of p
    n_concave: int  # touches with p'' < 0
    n_degenerate: int  # touches with Re V > 0, where R and R' nearly vanish
    n_violations: int
    violations: list = field(default_factory=list)  # (r_star, p, p', p'', Re V)
    degenerate_amplitude: float = 0.0  # max (|R|^2 + |R'|^2) at degenerate touches, relative
    trivial_alarm: bool = False  # the whole solution is below the alarm level
    n_extrema: int = 0  # interior critical points of p located by root finding on p'
    closest_approach: float = float("inf")  # min |p|/(2|R||R'|) over those critical points

    @property
    def ok(self) -> bool:
        return self.n_violations == 0 and not self.trivial_alarm


def _bullet_derivatives(pot, xi, R, dR, W_im):
    u = np.maximum(pot.geom.u_plus - xi, 0.0)
    rv = pot.v0(u, xi) + pot.v00(u, xi)
    R2, dR2 = np.abs(R) ** 2, np.abs(dR) ** 2
    p = 2.0 * np.real(R * np.conj(dR))
    dp = 2.0 * dR2 + 2.0 * rv * R2
    ddp = 2.0 * pot.v1(u, xi) * W_im + 2.0 * pot.d_re_v(u, xi) * R2 + 4.0 * rv * p
    return rv, R2, dR2, p, dp, ddp


def _critical_points(sol, pot, dp):
    # roots of the exact p' between consecutive nodes, refined on the dense output
    def dp_at(t):
        xi, R, dR = sol.evaluate(t)
        return float(_bullet_derivatives(pot, xi, R, dR, 0.0)[4][0])

    t = sol.r_star
    idx = np.flatnonzero(np.sign(dp[:-2]) * np.sign(dp[1:-1]) < 0)
    out = []
    for i in idx:
        try:
            out.append(brentq(dp_at, t[i], t[i + 1], xtol=1e-14 * max(1.0, abs(t[i])), rtol=1e-14))
        except ValueError:
            continue
    return np.array(out)


def no_rebound_check(sol: RadialSolution, pot: Optional[RadialPotential] = None,
                     zero_tol: float = 1e-6, scale: str = "local") -> ReboundReport:
    """Classify every interior near-touch p = p' = 0 of the bullet.

    The first and second derivatives come from the exact identities
    p' = 2|R'|^2 + 2 Re(V)|R|^2 and p'' = 2 i Im(V) W + 2 Re(V')|R|^2 + 4 Re(V) p.

    Candidates are the grid nodes plus every interior critical point of p
    (a sign change of p' between nodes, refined by root finding), since an
    exact tangency almost never falls on a node.  With ``scale="local"``
    (default) a touch is measured against the size of its own terms,
    |p| < tol 2|R||R'| and |p'| < tol (2|R'|^2 + 2|Re V||R|^2), which is
    invariant under rescaling R.  With ``scale="global"`` the references are
    max|p| and max|p'|; this also flags the long stretches where the solution
    is merely exponentially small.

    A touch is a violation unless p'' < 0 there or Re V > 0; in the latter
    case the first identity forces |R'|^2 + Re(V)|R|^2 to be small, so the
    solution nearly vanishes there (a normalised solution cannot vanish
    identically, which ``trivial_alarm`` guards).
    """
    if scale not in ("local", "global"):
        raise ValueError("scale must be 'local' or 'global'")
    pot = pot or sol.pot
    rv, R2, dR2, p, dp, ddp = _bullet_derivatives(pot, sol.xi, sol.R, sol.dR, sol.W_im)
    amp = R2 + dR2
    samp = np.max(amp)
    gp, gdp = np.max(np.abs(p)), np.max(np.abs(dp))
    t_nodes = sol.r_star[:-1]  # r_star = 0 is the boundary, not interior

    t_crit = _critical_points(sol, pot, dp)
    if t_crit.size:
        xi_c, R_c, dR_c = sol.evaluate(t_crit)
        W_c = 2.0 * np.imag(R_c * np.conj(dR_c))
        crit = _bullet_derivatives(pot, xi_c, R_c, dR_c, W_c)
    else:
        crit = tuple(np.empty(0) for _ in range(6))
    t_all = np.concatenate([t_nodes, t_crit])
    rv, R2, dR2, p, dp, ddp = (np.concatenate([a[:-1], b]) for a, b in zip((rv, R2, dR2, p, dp, ddp), crit))
    amp = R2 + dR2

    local_p = 2.0 * np.sqrt(R2 * dR2)
    if scale == "local":
        ref_p, ref_dp = local_p, 2.0 * dR2 + 2.0 * np.abs(rv) * R2
    else:
        ref_p, ref_dp = gp, gdp
    touch = (np.abs(p) < zero_tol * ref_p) & (np.abs(dp) < zero_tol * ref_dp)
    idx = np.flatnonzero(touch)
    concave = ddp[idx] < 0
    degenerate = (~concave) & (rv[idx] > 0)
    bad = idx[~concave & ~degenerate]
    viol = [(float(t_all[i]), float(p[i]), float(dp[i]), float(ddp[i]), float(rv[i])) for i in bad]
    damp = float(np.max(amp[idx[degenerate]]) / samp) if degenerate.any() else 0.0
    n_nodes = t_nodes.size
    closest = float(np.min(np.abs(p[n_nodes:]) / local_p[n_nodes:])) if t_crit.size else float("inf")
    return ReboundReport(int(idx.size), int(concave.sum()), int(degenerate.sum()), len(viol), viol, damp,
                         bool(samp == 0), int(t_crit.size), closest)


# --------------------------------------------------------------------------
# threshold search


@dataclass
class ModeCertificate:
    m: int
    s_m: float
    params: dict
    lam: float
    lam_tilde: float
    kappa_re: float
    kappa_im: float
    residual_value: float
    residual_deriv: float
    pomega0: float  # bullet at r_star = 0 for s_m (normalised solution)
    eps_at_sm: float
    bracket: tuple
    bracket_width: float
    iterations: int
    argmin_hi: float  # location of the bullet minimum just past the threshold
    first_zero_hi: float  # first zero of the bullet just past the threshold
    rebound: dict  # no-rebound diagnostics at s_lo and s_hi
    g_lo: float
    g_hi: float

    @property
    def kappa(self) -> complex:
        return complex(self.kappa_re, self.kappa_im)

    def to_dict(self):
        d = asdict(self)
        d["bracket"] = list(self.bracket)
        return d


def _coarse_bracket(path, m, numerics):
    ss = np.linspace(0.0, 1.0, numerics.coarse_samples + 1)
    prev = shoot(path, ss[0], m, numerics)
    table = [(prev.s, prev.g)]
    if not prev.g > 0:
        raise NoBracket(f"g(0) = {prev.g:.3e} is not positive for m={m}")
    for s in ss[1:]:
        cur = shoot(path, float(s), m, numerics)
        table.append((cur.s, cur.g))
        if cur.g < 0:
            return prev, cur, table
        prev = cur
    raise NoBracket(f"g stays non-negative along the path for m={m}")


def _first_zero(sol: RadialSolution, r_from: float):
    # first point at or right of r_from where the bullet turns negative
    p = sol.pomega
    t = sol.r_star
    mask = t >= r_from
    neg = np.flatnonzero(mask & (p < 0))
    if neg.size == 0:
        return 0.0
    i = neg[0]
    if i == 0:
        return float(t[0])
    # linear interpolation between the last positive and first negative node
    return float(t[i - 1] - p[i - 1] * (t[i] - t[i - 1]) / (p[i] - p[i - 1]))


def find_threshold(path: ParameterPath, m: int, s_tol: Optional[float] = None, p_tol: Optional[float] = None,
                   numerics: Optional[ShootNumerics] = None, strict: bool = True) -> ModeCertificate:
    """Locate s_m with p_{s_m}(0) = 0 by bracketing and bisection.

    Raises
    ------
    NoBracket
        If g does not change sign on the coarse scan.
    BisectionStall
        If the bracket cannot be shrunk to ``s_tol`` with |p(0)| < ``p_tol``.
    ReboundDetected
        If, at convergence, the bullet first vanishes away from r_star = 0.
    """
    numerics = numerics or ShootNumerics()
    s_tol = numerics.s_tol if s_tol is None else s_tol
    p_tol = numerics.p_tol if p_tol is None else p_tol
    lo, hi, _ = _coarse_bracket(path, m, numerics)
    it = 0
    while (hi.s - lo.s) > s_tol or abs(lo.endpoint) > p_tol:
        if it >= numerics.max_iter:
            raise BisectionStall(f"m={m}: width {hi.s - lo.s:.2e}, p(0) = {lo.endpoint:.2e} after {it} steps")
        mid = 0.5 * (lo.s + hi.s)
        if mid <= lo.s or mid >= hi.s:
            raise BisectionStall(f"m={m}: bracket [{lo.s!r}, {hi.s!r}] cannot be split")
        shot = shoot(path, mid, m, numerics)
        if shot.g > 0:
            lo = shot
        else:
            hi = shot
        it += 1
        log.debug("m=%d it=%d s=[%.15f, %.15f] p0=%.3e", m, it, lo.s, hi.s, lo.endpoint)
    window = numerics.boundary_cells * hi.solution.h
    rb_lo = no_rebound_check(lo.solution, zero_tol=numerics.zero_tol)
    rb_hi = no_rebound_check(hi.solution, zero_tol=numerics.zero_tol)
    r_lo_star = bullet_profile(hi.solution).r_star_lo
    zero_hi = _first_zero(hi.solution, r_lo_star)
    if strict and (hi.argmin < -window or zero_hi < -window or not rb_lo.ok):
        raise ReboundDetected(f"m={m}: bullet vanishes at r_star={zero_hi:.3e} (window {window:.2e}), "
                              f"minimum at {hi.argmin:.3e}, {rb_lo.n_violations} touch violations")
    sol = lo.solution
    R0, dR0 = sol.R[-1], sol.dR[-1]
    match = kappa_match(R0, dR0, p_tol=p_tol)
    geom = derive_geometry(lo.params)
    return ModeCertificate(
        m=m, s_m=lo.s, params=dict(M=lo.params.M, a=lo.params.a, k=lo.params.k), lam=lo.lam,
        lam_tilde=sol.pot.lam_tilde, kappa_re=match.kappa.real, kappa_im=match.kappa.imag,
        residual_value=match.residual_value, residual_deriv=match.residual_deriv, pomega0=lo.endpoint,
        eps_at_sm=geom.eps, bracket=(lo.s, hi.s), bracket_width=hi.s - lo.s, iterations=it,
        argmin_hi=hi.argmin, first_zero_hi=zero_hi,
        rebound={"lo": asdict(rb_lo), "hi": asdict(rb_hi)}, g_lo=lo.g, g_hi=hi.g,
    )


def continuity_constant(path: ParameterPath, m: int, s_values: Sequence[float],
                        numerics: Optional[ShootNumerics] = None):
    """Empirical Lipschitz constant of g over consecutive scan points."""
    gs = np.array([shoot(path, float(s), m, numerics).g for s in s_values])
    ds = np.diff(np.asarray(s_values, dtype=float))
    return float(np.max(np.abs(np.diff(gs)) / ds)), gs


# --------------------------------------------------------------------------
# scans


def _scan_one(args):
    path, m, numerics = args
    try:
        return find_threshold(path, m, numerics=numerics), None
    except KadsError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def accumulation_scan(path: ParameterPath, m_list: Sequence[int], numerics: Optional[ShootNumerics] = None,
                      jobs: int = 1, slack: float = 1.5):
    """find_threshold for each m; returns (rows, trend_ok).

    Rows are dicts with m, s_m, eps, the certificate (or None) and an error
    string.  ``trend_ok`` checks |eps(s_m)| <= slack * previous over the
    successful rows.
    """
    numerics = numerics or ShootNumerics()
    m_list = list(m_list)
    if m_list != sorted(m_list, key=abs):
        raise ValueError("m_list must be ascending in |m|")
    tasks = [(path, m, numerics) for m in m_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_scan_one, tasks))
    else:
        results = [_scan_one(t) for t in tasks]
    rows = []
    for m, (cert, err) in zip(m_list, results):
        rows.append({"m": m, "s_m": cert.s_m if cert else float("nan"),
                     "eps": cert.eps_at_sm if cert else float("nan"), "certificate": cert, "error": err})
    eps = [abs(r["eps"]) for r in rows if r["certificate"] is not None]
    trend_ok = len(eps) == len(rows) and all(b <= slack * a for a, b in zip(eps, eps[1:]))
    return rows, trend_ok


@dataclass
class StabilityReport:
    params: BlackHoleParams
    rows: list  # per m: dict(m, certified, min_potential per ell, lam per ell, lam_tilde per ell)
    smallest_certified_m: Optional[int]


def mode_stability_scan(params, m_values: Sequence[int], ell_extra: int = 5, n_grid: int = 10_000,
                        resolution: int = 1024) -> StabilityReport:
    """Positivity of V0[lambda_{m l}] + V00 on the certificate grid.

    For eps < 0 and |m| large this sum is positive for every l, which by the
    energy identity rules out a vanishing bullet at r_star = 0.  Failures are
    reported, not raised.
    """
    geom = params if isinstance(params, Geometry) else derive_geometry(params)
    r, _ = certificate_grid(geom, n_grid)
    r = np.append(r, np.inf)
    rows, first = [], None
    for m in m_values:
        pairs = solve_angular(geom, m, ell_extra + 1, resolution=resolution)
        mins, lams, lts = [], [], []
        for ep in pairs:
            pot = RadialPotential(geom, m, ep.lam)
            v0, v00, _, _ = eval_potentials(pot, r)
            mins.append(float(np.min(v0 + v00)))
            lams.append(ep.lam)
            lts.append(pot.lam_tilde)
        ok = all(x > 0 for x in mins)
        rows.append({"m": m, "certified": ok, "min_potential": mins, "lam": lams, "lam_tilde": lts})
        if ok and first is None:
            first = m
    return StabilityReport(geom.params, rows, first)

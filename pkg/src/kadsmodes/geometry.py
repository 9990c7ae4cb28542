"""Kerr-AdS background: admissibility, horizons, metric polynomials and the
tortoise coordinate.

All radial functions below are written either in ``r`` or in the compactified
variables ``u = 1/r`` and ``xi = u_+ - u = (r - r_+)/(r r_+)``.  The latter keep
full relative precision both at the horizon (``xi -> 0``) and at conformal
infinity (``u -> 0``), which is where the interesting physics lives.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, Inadmissible

__all__ = [
    "BlackHoleParams",
    "Geometry",
    "ParameterPath",
    "derive_geometry",
    "background_polys",
    "delta_theta",
    "tortoise",
    "tortoise_xi",
    "inverse_tortoise",
    "inverse_tortoise_xi",
]

# relative gap below which the two outer roots are declared coincident
EXTREMAL_RTOL = 1e-9


@dataclass(frozen=True)
class BlackHoleParams:
    """Mass ``M``, spin ``a`` and inverse AdS radius ``k`` (Lambda = -3k^2)."""

    M: float
    a: float
    k: float

    def __post_init__(self):
        for name in ("M", "a", "k"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise Inadmissible(f"{name} must be finite, got {v!r}")
        if self.M <= 0 or self.k <= 0 or self.a < 0:
            raise Inadmissible(f"need M > 0, a >= 0, k > 0; got {self}")

    def as_tuple(self):
        return (self.M, self.a, self.k)


@dataclass(frozen=True)
class Geometry:
    """Derived horizon data for one admissible parameter set."""

    params: BlackHoleParams
    r_plus: float
    r_minus: float
    Xi: float
    omega_plus: float
    eps: float
    coeffs: np.ndarray = field(repr=False)  # Delta, highest degree first
    roots: np.ndarray = field(repr=False)  # all four complex roots
    residues: np.ndarray = field(repr=False)  # (z^2+a^2)/Delta'(z) at each root

    @property
    def u_plus(self) -> float:
        return 1.0 / self.r_plus

    @property
    def dDelta_plus(self) -> float:
        """d Delta / dr at the event horizon (> 0 when sub-extremal)."""
        return float(np.polyval(np.polyder(self.coeffs), self.r_plus))

    @property
    def surface_gravity(self) -> float:
        """kappa_+ such that Delta ~ exp(2 kappa_+ r_star) near the horizon."""
        p = self.params
        return self.dDelta_plus / (2.0 * (self.r_plus**2 + p.a**2))

    @property
    def hr_gap(self) -> float:
        """Unnormalised Hawking-Reall gap a - k r_+^2."""
        return self.params.a - self.params.k * self.r_plus**2

    @property
    def limit_ratio(self) -> float:
        """Xi^2 (1 - a omega_+)^2, the large-m limit of lambda_{m|m|}/m^2."""
        return self.Xi**2 * (1.0 - self.params.a * self.omega_plus) ** 2


ParamsLike = Union[BlackHoleParams, Geometry]


def _as_geometry(p: ParamsLike) -> Geometry:
    return p if isinstance(p, Geometry) else derive_geometry(p)


def _delta_coeffs(M, a, k):
    return np.array([k * k, 0.0, 1.0 + a * a * k * k, -2.0 * M, a * a])


def derive_geometry(params: BlackHoleParams) -> Geometry:
    """Compute r_+, r_-, Xi, omega_+ and the Hawking-Reall gap.

    Raises
    ------
    Inadmissible
        If ``a k >= 1`` or Delta lacks two distinct non-negative roots.
    """
    M, a, k = params.as_tuple()
    if a * k >= 1.0:
        raise Inadmissible(f"a*k = {a * k} >= 1")
    coeffs = _delta_coeffs(M, a, k)
    roots = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(roots))))
    # near-double roots split into a pair with |Im| ~ sqrt(machine eps)
    real = np.sort(roots[np.abs(roots.imag) <= 1e-6 * scale].real)
    real = real[real >= -1e-12 * scale]
    if real.size < 2:
        raise Inadmissible(f"Delta has fewer than two non-negative roots for {params}")
    r_plus, r_minus = float(real[-1]), float(max(real[-2], 0.0))
    dpoly = np.polyder(coeffs)
    for _ in range(3):
        step = np.polyval(coeffs, r_plus) / np.polyval(dpoly, r_plus)
        r_plus -= step
        if abs(step) <= 1e-16 * r_plus:
            break
    if r_plus - r_minus <= EXTREMAL_RTOL * r_plus or np.polyval(dpoly, r_plus) <= 0:
        raise Inadmissible(f"extremal or degenerate horizon for {params}")

    # replace the polished root in the root list before forming residues
    idx = int(np.argmin(np.abs(roots - r_plus)))
    roots = roots.astype(complex)
    roots[idx] = r_plus
    residues = (roots**2 + a * a) / np.polyval(dpoly, roots)

    Xi = 1.0 - a * a * k * k
    omega_plus = a / (r_plus**2 + a * a)
    eps = (a - k * r_plus**2) / (k * (r_plus**2 + a * a))
    return Geometry(params, r_plus, r_minus, Xi, omega_plus, eps, coeffs, roots, residues)


def background_polys(params: ParamsLike, r):
    """Delta and its first three r-derivatives, evaluated by Horner's rule."""
    p = params.params if isinstance(params, Geometry) else params
    M, a, k = p.as_tuple()
    r = np.asarray(r, dtype=float)
    b = 1.0 + a * a * k * k
    delta = (((k * k * r) * r + b) * r - 2.0 * M) * r + a * a
    d1 = (4.0 * k * k * r * r + 2.0 * b) * r - 2.0 * M
    d2 = 12.0 * k * k * r * r + 2.0 * b
    d3 = 24.0 * k * k * r
    return delta, d1, d2, d3


def delta_theta(params: ParamsLike, theta):
    p = params.params if isinstance(params, Geometry) else params
    return 1.0 - (p.a * p.k * np.cos(theta)) ** 2


def _log1m(w):
    """log(1 - w) for complex w without cancellation when |w| is small."""
    w = np.asarray(w, dtype=complex)
    re = 0.5 * np.log1p(-2.0 * w.real + (w.real**2 + w.imag**2))
    im = np.arctan2(-w.imag, 1.0 - w.real)
    return re + 1j * im


def _tortoise_uxi(geom: Geometry, u, xi):
    # u and xi are both passed so that whichever is small keeps full precision
    out = np.zeros(np.broadcast(u, xi).shape, dtype=complex)
    for z, c in zip(geom.roots, geom.residues):
        if z == geom.r_plus:
            # 1 - r_+ u = r_+ xi; use whichever form avoids cancellation
            x = geom.r_plus * np.asarray(xi, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                term = np.where(x < 0.5, np.log(np.abs(x)), _log1m(geom.r_plus * u).real)
            out = out + c * term
        else:
            out = out + c * _log1m(z * u)
    return out.real


def tortoise_xi(geom: Geometry, xi):
    """Tortoise coordinate as a function of ``xi = u_+ - u`` in (0, u_+].

    Closed form by partial fractions of (r^2+a^2)/Delta over the four roots of
    Delta, normalised so that r_star -> 0 as r -> infinity.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0) or np.any(xi > geom.u_plus * (1 + 1e-15)):
        raise DomainError("xi must lie in (0, u_+]")
    return _tortoise_uxi(geom, np.maximum(geom.u_plus - xi, 0.0), xi)


def tortoise(params: ParamsLike, r):
    """r_star(r) for r > r_+ (vectorised); r = inf maps to 0."""
    geom = _as_geometry(params)
    r = np.asarray(r, dtype=float)
    if np.any(r <= geom.r_plus):
        raise DomainError("tortoise requires r > r_+")
    with np.errstate(invalid="ignore"):
        xi = np.where(np.isinf(r), geom.u_plus, (r - geom.r_plus) / (r * geom.r_plus))
    return _tortoise_uxi(geom, 1.0 / r, xi)


def _inverse_scalar(geom: Geometry, target: float):
    # returns (xi, u); each is computed directly where it is small
    up = geom.u_plus
    half = tortoise_xi(geom, 0.5 * up)
    if target >= half:
        # far region: solve in u directly, where u carries full precision
        u = brentq(lambda u: _tortoise_uxi(geom, u, up - u) - target, 0.0, 0.5 * up, xtol=1e-300, rtol=1e-15, maxiter=500)
        return up - u, u
    # near-horizon region: solve in log(xi)
    c_plus = 1.0 / (2.0 * geom.surface_gravity)
    hi = np.log(0.5 * up)
    lo = hi + (target - half) / c_plus - 1.0
    while tortoise_xi(geom, np.exp(lo)) > target:
        lo -= 2.0 * (hi - lo)
    t = brentq(lambda t: tortoise_xi(geom, np.exp(t)) - target, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    xi = float(np.exp(t))
    return xi, up - xi


def inverse_tortoise_xi(params: ParamsLike, r_star):
    """xi(r_star) for r_star <= 0; r_star = 0 gives xi = u_+ (r = infinity)."""
    geom = _as_geometry(params)
    rs = np.asarray(r_star, dtype=float)
    if np.any(rs > 0):
        raise DomainError("inverse_tortoise requires r_star <= 0")
    flat = [geom.u_plus if t == 0 else _inverse_scalar(geom, float(t))[0] for t in rs.ravel()]
    return np.array(flat).reshape(rs.shape)


def inverse_tortoise(params: ParamsLike, r_star):
    """r(r_star) for r_star < 0."""
    geom = _as_geometry(params)
    rs = np.asarray(r_star, dtype=float)
    if np.any(rs >= 0):
        raise DomainError("inverse_tortoise requires r_star < 0")
    u = [_inverse_scalar(geom, float(t))[1] for t in rs.ravel()]
    return 1.0 / np.array(u).reshape(rs.shape)


class ParameterPath:
    """Piecewise-linear path s in [0, 1] -> (M, a, k) through ``waypoints``.

    Parameters
    ----------
    waypoints : sequence of BlackHoleParams
        At least two points, visited at equally spaced values of s.
    check_samples : int
        Number of samples used to verify admissibility along the path.
    """

    def __init__(self, waypoints: Sequence[BlackHoleParams], check_samples: int = 1000):
        if len(waypoints) < 2:
            raise ValueError("a path needs at least two waypoints")
        self.waypoints = list(waypoints)
        self._nodes = np.linspace(0.0, 1.0, len(self.waypoints))
        self._values = np.array([w.as_tuple() for w in self.waypoints])
        if check_samples:
            self.check_admissible(check_samples)

    def __call__(self, s: float) -> BlackHoleParams:
        if not 0.0 <= s <= 1.0:
            raise DomainError(f"path parameter s={s} outside [0, 1]")
        M, a, k = (float(np.interp(s, self._nodes, self._values[:, j])) for j in range(3))
        return BlackHoleParams(M, a, k)

    def geometry(self, s: float) -> Geometry:
        return derive_geometry(self(s))

    def eps(self, s: float) -> float:
        return self.geometry(s).eps

    def check_admissible(self, n: int = 1000):
        for s in np.linspace(0.0, 1.0, n):
            derive_geometry(self(float(s)))

    def crosses_threshold(self) -> bool:
        return self.eps(0.0) < 0.0 < self.eps(1.0)

    def find_eps(self, target: float, lo: float = 0.0, hi: float = 1.0) -> float:
        """Path parameter where the Hawking-Reall gap equals ``target``."""
        return brentq(lambda s: self.eps(s) - target, lo, hi, xtol=1e-14)

    def to_dict(self):
        return {"waypoints": [dict(M=w.M, a=w.a, k=w.k) for w in self.waypoints]}

"""Stationary gravitational modes of Kerr-AdS black holes near the Hawking-Reall threshold."""

__version__ = "0.1.0"

from .errors import (BisectionStall, CertificateFailure, ConvergenceError, DomainError, EnvelopeViolation,
                     Inadmissible, KadsError, NoBracket, NonNegativeLambdaTilde, ReboundDetected)
from .geometry import BlackHoleParams, Geometry, ParameterPath, derive_geometry, tortoise
from .angular import fundamental, solve_angular
from .potentials import RadialPotential, crux_certificate, positivity_certificates
from .radial import RadialNumerics, integrate_regular, kappa_match
from .wkb import WkbNumerics, negativity_scan, wkb_basis, wkb_frequency
from .shooter import REFERENCE_PATH, ShootNumerics, accumulation_scan, find_threshold, shoot

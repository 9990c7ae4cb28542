"""Horizon data, the tortoise map and the approach of lambda/m^2 to its limit.

Run: python3 demos/geometry_and_angular.py
"""
import numpy as np

from kadsmodes import BlackHoleParams, derive_geometry, fundamental, tortoise
from kadsmodes.angular import limit_target

g = derive_geometry(BlackHoleParams(M=1.0, a=0.2, k=1.0))
print(f"r_+ = {g.r_plus:.12f}   omega_+ = {g.omega_plus:.6f}   eps = {g.eps:+.4f}")

r = g.r_plus * np.array([1.001, 1.1, 2.0, 10.0, 1e3])
for ri, ti in zip(r, tortoise(g, r)):
    print(f"  r = {ri:10.4f}  ->  r_star = {ti:+.6f}")

target = limit_target(g)
print(f"\nlambda_(m,|m|)/m^2 against its large-m limit {target:.6f}")
for m in (4, 16, 64, 256):
    lam = fundamental(g, m).lam
    print(f"  m = {m:4d}   lambda/m^2 = {lam / m**2:.6f}   gap = {lam / m**2 - target:+.2e}")

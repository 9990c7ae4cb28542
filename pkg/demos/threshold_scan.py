"""Stationary modes along the reference path accumulate at the threshold.

For each m the shooter finds the path point s_m where the bullet of the
regular solution vanishes at conformal infinity; |eps(s_m)| shrinks with m.

Run: python3 demos/threshold_scan.py   (about half a minute)
"""
from kadsmodes import REFERENCE_PATH, accumulation_scan

rows, trend_ok = accumulation_scan(REFERENCE_PATH, [8, 12, 16, 24])
print(f"{'m':>4} {'s_m':>16} {'eps(s_m)':>12} {'|p(0)|':>9} {'kappa':>22}")
for row in rows:
    c = row["certificate"]
    if c is None:
        print(f"{row['m']:>4}  failed: {row['error']}")
        continue
    print(f"{c.m:>4} {c.s_m:16.12f} {c.eps_at_sm:+12.5f} {abs(c.pomega0):9.1e} {c.kappa:22.6f}")
print("eps(s_m) decreasing:", trend_ok)

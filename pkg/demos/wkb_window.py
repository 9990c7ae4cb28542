"""WKB basis near conformal infinity above threshold.

Prints the envelope margin, the sign of the two pure bullets and the depth
of the interference dip for a few phases.  The dip prediction relies on the
basis being close to plane waves, i.e. on F staying small over the window;
at eps = 0.02 F grows to ~5 at the far end and dips placed there miss.

Run: python3 demos/wkb_window.py
"""
import numpy as np

from kadsmodes import REFERENCE_PATH, RadialPotential, fundamental, negativity_scan, wkb_basis

for eps in (0.02, 0.05):
    g = REFERENCE_PATH.geometry(REFERENCE_PATH.find_eps(eps))
    m = 60
    basis = wkb_basis(RadialPotential(g, m, fundamental(g, m).lam))
    print(f"eps = {eps}, m = {m}: varpi = {basis.pomega_freq:.4f}, "
          f"F at window end {basis.F[0]:.2f}, envelope margin {np.min(basis.envelope_margin()):+.1e}")
    for name, A in (("R1", (1, 0)), ("R2", (0, 1))):
        print(f"  max bullet of {name} on the open window: {negativity_scan(basis, *A).max_open:+.3e}")
    dips = [negativity_scan(basis, np.exp(1j * th), 1.0).q_at_dip for th in np.arange(8) * np.pi / 4]
    print(f"  interference dip over 8 phases: {min(dips):.3f} .. {max(dips):.3f}")

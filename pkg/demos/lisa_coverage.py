"""Local neighbour-count curves and disk coverage for a clustered pattern.

Usage: python3 demos/lisa_coverage.py
"""
import numpy as np

from fmpp import LGCP, Poisson, coverage_fraction, lisa_marks, rect, simulate_ground

window = rect(0, 1, 0, 1)
h = np.linspace(0.02, 0.2, 10)
for name, model in (("poisson", Poisson(100.0)), ("lgcp", LGCP(np.log(100.0) - 0.5, 1.0, 0.1))):
    xy = simulate_ground(model, window, 3)
    local = lisa_marks(xy, h)
    cover = coverage_fraction(xy, 0.05, window)
    print(f"{name}: n={len(xy)}, mean local count at h=0.1 {local[:, 4].mean():.2f}, "
          f"coverage by r=0.05 disks {cover:.3f}")

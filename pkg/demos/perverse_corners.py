"""Accumulating preshocks with non-decaying corners.

Initial data with slope dips at x = 1/n produce preshocks at
(t, x) = (1, 1 + 1/n); at each one the boundary turns through a right angle
between the Burgers branch (speed 1) and the transport branch (speed -1).

    python demos/perverse_corners.py [n_max]
"""
import sys

import numpy as np

from shockform.mghd import perverse_harness

n_max = int(sys.argv[1]) if len(sys.argv) > 1 else 3
rep = perverse_harness(n_max)
print(f"grid spacing h = {rep['h']:.2e}, dip half-width {rep['width']:.3f}")
print("\n  n   expected x   found x      error      angle - pi/2")
for p in rep["preshocks"]:
    print(f"  {p['n']}   {p['expected'][1]:.6f}   {p['x']:.6f}   {p['error']:.2e}"
          f"   {p['angle'] - np.pi / 2:+.4f}")
print(f"\nall preshocks within 2h: {rep['locations_ok']}; "
      f"angles within 0.05 of pi/2: {rep['angles_ok']}")

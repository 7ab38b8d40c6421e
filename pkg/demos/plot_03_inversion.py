"""
Inverting the strength profile
==============================

The strength profile is a Riesz potential of ``phi``. Discretizing ``phi`` on
a grid gives a dense linear system that we regularize with Tikhonov and pick
``lambda`` from the L-curve. Data on a single circle cannot separate radial
structure, which the row-space floor makes explicit.
"""

import numpy as np

from randsource import inversion as I
from randsource.randfield import Grid, SmoothBump

bump = SmoothBump((0.0, 0.0), 1.0)
grid = Grid((-1.1, -1.1), 32, 2.2 / 32)
truth = I.discretized_bump([bump], grid)

# %%
# Observation geometries: one circle versus a spread of radii.
ang = np.linspace(0, 2 * np.pi, 24, endpoint=False)
ring = 3.0 * np.stack([np.cos(ang), np.sin(ang)], 1)
rad = np.geomspace(1.6, 4.0, 96)
phase = np.arange(96) * np.pi * (3 - np.sqrt(5))
spread = np.stack([rad * np.cos(phase), rad * np.sin(phase)], 1)

for name, pts in (("circle r=3", ring), ("spread", spread)):
    op = I.assemble_kernel(pts, grid, 1)
    T = I.riesz_data([bump], pts, 1)
    sweep = I.lambda_sweep(op, T, np.logspace(-6, -1, 11), nonneg=True, truth=truth)
    _, _, vt = np.linalg.svd(op.matrix, full_matrices=False)
    floor = np.linalg.norm(truth - vt.T @ (vt @ truth)) / np.linalg.norm(truth)
    best = sweep.reconstructions[sweep.best]
    corner = sweep.reconstructions[sweep.corner]
    print(f"{name:11s} best error {best.truth_error:.3f} at lambda {best.lam:.0e}, "
          f"L-curve pick {corner.truth_error:.3f}, row-space floor {floor:.3f}")

# %%
# The iterated Laplacian maps Riesz potentials onto each other.
for n, l in ((1, 1), (2, 1)):
    print(f"(n, l) = ({n}, {l}): relative deviation {I.laplacian_consistency([bump], (3.0, 0.0), l, n):.1e}")

"""
Branching points of a Jacobi pair
=================================

A discrete Laplacian perturbed by a rank-three Gaussian factor.  Resonance
branches collide at isolated points of the resolvent set; going once around
such a point swaps two branches, going twice brings them back.
"""

import numpy as np

from resatlas import EnsembleSpec, PathSpec, build_ensemble, locate_branch_points, monodromy
from resatlas.continuation import cycles, inverse, traverse

p = build_ensemble(EnsembleSpec("jacobi", 8, 3, seed=11))
print("spectrum of H0:", np.round(p.spectrum, 4))

points = locate_branch_points(p, (0.1, 2.0, 0.1, 2.0))
for bp in points:
    loop = PathSpec.circle(bp.location, bp.radius)
    perm = monodromy(p, loop)
    print(f"\nbranch point near {bp.location:.6f} (cell radius {bp.radius:.2e})")
    print("  monodromy", perm, "cycles", cycles(perm), "periods", bp.periods)
    print("  reversed loop gives the inverse:", monodromy(p, loop.reversed()) == inverse(perm))

    start, once = traverse(p, loop, 1)
    _, twice = traverse(p, loop, 2)
    print("  start values     ", np.round(start, 5))
    print("  after one turn   ", np.round(once, 5))
    print("  after two turns  ", np.round(twice, 5))

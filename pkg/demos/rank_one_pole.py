"""
A rank-one pair and its single resonance
========================================

For ``H0 = diag(1, -1)`` and ``V = <v, .> v`` with ``v = (1, 1)/sqrt(2)`` the
transfer function is the scalar ``sigma(z) = -z / (z^2 - 1)``, so the only
resonance is ``r(z) = (z^2 - 1) / z``.  It blows up at ``z = 0``, which is a
plain zero of ``sigma``: a pole, not an absorbing point.
"""

import numpy as np

from resatlas import ResonanceProblem, classify_approach, transfer_at
from resatlas.resonance import herglotz_defect, resonances

p = ResonanceProblem.rank_one(np.array([1.0, -1.0]), np.array([1.0, 1.0]) / np.sqrt(2))

# closed form against the library
for z in (0.5j, 0.3 + 0.2j, 2.0 - 0.5j):
    (r,) = resonances(p, z).values
    print(f"z = {z:>12}   r(z) = {r:.6f}   closed form {(z * z - 1) / z:.6f}")

# sigma is Herglotz: Im sigma > 0 in the upper half-plane
zs = np.linspace(-3, 3, 7) + 0.1j
print("Im sigma on Im z = 0.1:", np.round([transfer_at(p, z).m[0, 0].imag for z in zs], 4))
print("smallest eigenvalue of Im F R_z F*:", min(herglotz_defect(p, z) for z in zs))

# at z = 0 sigma vanishes, so there is no finite coupling there
print("zero_count at z = 0:", transfer_at(p, 0.0).zero_count)

# approach z = 0 from eight directions
for k in range(8):
    d = np.exp(2j * np.pi * k / 8)
    rep = classify_approach(p, 0.0, d)
    print(f"direction {np.round(d, 3)!s:>16}  {rep.label:<14} slope {rep.slopes[0]:+.4f}")

"""The special lines L_{rho_h,x_i}, L_{sigma_h,x_i} and where they cross.

A matrix with a single nonzero entry at x_i lies on one rho line and one sigma
line at the same point x_i; this script builds it from both sides.
"""
import numpy as np

from qmano import random_local
from qmano.jsfamily import line_membership, lines_containing, pi_invariant
from qmano.mano import line_matrix, q_invariant

local = random_local(20240611)
x3 = np.array([local.x(3)])

# on L_{sigma_2,x_3} column 2 of M(x_3) vanishes; column 1 is affine in t
_, F0 = line_matrix(local, "sigma", 2, 3, t=0.0)
_, F1 = line_matrix(local, "sigma", 2, 3, t=1.0)
c0 = (F0.P(x3) @ F0.Q(x3))[0][:, 0]
c1 = (F1.P(x3) @ F1.Q(x3))[0][:, 0] - c0
for r in (0, 1):
    t = -c0[r] / c1[r]
    M, _ = line_matrix(local, "sigma", 2, 3, t=t)
    m = M(x3)[0]
    print(f"t = {t:.6g}: M(x3)/|M(x3)| =\n{np.round(m / np.linalg.norm(m), 8)}")
    print("  on lines:", lines_containing(M))

# the critical values of Pi_12 along the lines
for kind, h, i, partner in (("rho", 1, 1, 2), ("rho", 2, 1, 2), ("sigma", 1, 3, 4), ("sigma", 2, 3, 4)):
    M, _ = line_matrix(local, kind, h, i, t=0.3 - 0.2j, partner=partner)
    print(kind, h, i, line_membership(M, kind, h, i), pi_invariant(M, 1, 2))
print("e^{1;1,2;3} =", q_invariant(local, 1, (1, 2), 3), " e^{2;1,2;3} =", q_invariant(local, 2, (1, 2), 3))

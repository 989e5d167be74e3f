"""Chart point -> matrix -> Mano decomposition -> chart point, on a random validated dataset.

Run: python3 demos/pants_round_trip.py
"""
import numpy as np

from qmano import js_ref, random_local
from qmano.jsfamily import PAIRS, det_profile, pi_invariant
from qmano.mano import PantsPoint, compose, decompose, pants_matrix, phi, recover_pants

local = random_local(7)
pair = (1, 2)
p = PantsPoint.make(local, pair, 0.45 * np.exp(0.9j), 1.3 - 0.4j)
M, _ = pants_matrix(local, p)
print("det residual", det_profile(M)[1])

F = decompose(M, pair)
print("case", F.case, "xi values", np.round(F.values, 10))
print("fit residuals", F.residuals)

r = recover_pants(M, pair, F)
print("recovered xi", r.xi.value, "eta", r.eta)

# Pi_{1,2} of the matrix agrees with the elliptic function at xi
print("Pi vs Phi:", pi_invariant(M, *pair).distance(phi(local, pair, p.xi.value)))

z = np.array([0.3 + 0.2j, -0.6j])
print("compose error", np.abs(compose(F)(z) - M(z)).max() / np.abs(M(z)).max())

# all six invariants at once
for ij in PAIRS:
    print(ij, pi_invariant(M, *ij))

# on the reference data Phi_12 is almost constant, so charts there are poorly separated
ref = js_ref()
print("JS-REF Phi_12 at two points:", phi(ref, pair, 0.7).value(), phi(ref, pair, -0.8 + 0.1j).value())

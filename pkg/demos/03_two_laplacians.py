"""The two sub-Laplacians and the equivalence problem.

A volume gives the divergence-form operator; a complement gives the
walk-limit operator.  Their difference is first order, with frame
coefficients chi_i = sum_{j>k} c_ji^j + X_i(theta); the pair is compatible
exactly when chi vanishes.
"""

import numpy as np

from sublap import compatibility as compat
from sublap import corank1, frames, models, operators

m = models.heisenberg3()
s = m.structure
q = np.array([0.3, -0.5, 0.8])
popp = corank1.popp_volume(s, m.eta)
phi = lambda p: p[..., 0] ** 2 + p[..., 2]

print("== operator values at q =", q)
mac = operators.macroscopic(s, phi, popp, q)
mic = operators.microscopic(s, phi, q)
print(f"   divergence-form (canonical volume): {float(mac.value):+.6f}")
print(f"   walk-limit (complement dz):         {float(mic.value):+.6f}")
print("   gap field chi:", operators.chi(s, popp, q),
      " (compatible pair: zero)")

print("\n== breaking compatibility with a conformal volume factor e^x:")
omx = frames.exp_scaled(popp, lambda p: p[..., 0])
print("   chi =", operators.chi(s, omx, q))

print("\n== the contact solve recovers the compatible complement:")
rep = compat.corank1_solve(s, omx, m.eta, q)
print(f"   status: {rep.status}, complement X0 = {rep.complement}")
resid = compat.roundtrip_chi(s, omx,
                             compat.constant_complement_field(rep.complement),
                             q[None, :])
print(f"   |chi| after rebuilding the frame with X0: {float(resid[0]):.2e}")

print("\n== quasi-contact non-existence (R^4 model, canonical volume):")
mr = models.quasicontact_r4("exp")
popp_r = corank1.popp_volume(mr.structure, mr.eta)
for q4 in np.array([[0.2, 0.1, -0.4, 0.3], [0.0, 0.0, 0.5, 0.0]]):
    rep = compat.corank1_solve(mr.structure, popp_r, mr.eta, q4)
    print(f"   q={q4}: status={rep.status}, "
          f"infeasibility residual={rep.residual:.4f} (= e^(-z/2))")

print("\n== left-invariant complements on nilpotent groups:")
for A, label in [([[0.0, 1.0], [-1.0, 0.0]], "invertible 2x2"),
                 ([[0, 1, 0], [-1, 0, 0], [0, 0, 0]], "3x3 with kernel")]:
    fam = compat.carnot_complements(compat.CarnotSpec.corank1(A))
    print(f"   {label}: affine family of dimension {fam.dim}")

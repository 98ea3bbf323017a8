"""Normal geodesics from the cometric Hamiltonian.

Hamilton's equations close in (position, frame coordinates of the
covector); the integrator is plain fixed-step RK4 and the conserved energy
2H is the quality monitor.
"""

import numpy as np

from sublap import models
from sublap.geodesics import (CovectorCoords, exp_map, integrate_geodesic,
                              taylor_residual)

s = models.heisenberg3().structure

print("== a purely horizontal covector gives a straight line:")
c = CovectorCoords.unit_cylinder(np.array([1.0, 0.0, 0.0]), 2)
print("   exp(0, c, t=1) =", exp_map(s, np.zeros(3), c, 1.0))

print("\n== a vertical component makes the projection curl:")
c = CovectorCoords.unit_cylinder(np.array([1.0, 0.0, 4.0]), 2)
res = integrate_geodesic(s, np.zeros(3), c.h, 1.0, 1e-3, record=True)
for frac in (0, 250, 500, 750, 1000):
    t, q, h, drift = res.trajectory[frac]
    print(f"   t={t:4.2f}  q=({q[0]:+.4f}, {q[1]:+.4f}, {q[2]:+.4f})")
print(f"   energy drift over [0,1]: {float(res.energy_drift):.2e}")

print("\n== rescaling: following 2*lambda for time t equals lambda for 2t:")
a = exp_map(s, np.zeros(3), CovectorCoords(2 * c.h, 2), 0.3)
b = exp_map(s, np.zeros(3), c, 0.6)
print("   difference:", np.max(np.abs(a - b)))

print("\n== second-order expansion: the residual decays like t^3:")
ts = 0.1 * 2.0 ** -np.arange(5)
for t in ts:
    r = abs(float(taylor_residual(s, lambda p: p[..., 2], np.zeros(3), c, t)))
    print(f"   t={t:8.5f}   |residual| = {r:.3e}")
rs = [abs(float(taylor_residual(s, lambda p: p[..., 2], np.zeros(3), c, t)))
      for t in ts]
slope = np.polyfit(np.log(ts), np.log(rs), 1)[0]
print(f"   log-log slope: {slope:.3f}")

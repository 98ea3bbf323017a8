"""Frame calculus on the 3D nilpotent model.

The structure is given by three vector fields on R^3; the first two are
declared orthonormal and span the distribution, the third spans the chosen
complement.  Everything else (brackets, structural functions, gradients)
is computed numerically from these fields.
"""

import numpy as np

from sublap import frames, models

m = models.heisenberg3()
s = m.structure
q = np.array([1.0, 2.0, 0.5])

print("== frame at q =", q)
print(s.frame_matrix(q))

print("\n== the bracket [X1, X2] is the vertical direction:")
print(frames.lie_bracket(s, 0, 1, q))

print("\n== structural tensor c_ij^l (only c_12^3 = -c_21^3 = 1 is nonzero):")
c = frames.structural_functions(s, q).c
for (i, j, l) in np.argwhere(np.abs(c) > 1e-12):
    print(f"   c[{i+1},{j+1}]^{l+1} = {c[i, j, l]:+.3f}")

print("\n== horizontal gradient of the vertical coordinate z at (1, 2, 0):")
print("   grad_h(z) =", frames.grad_h(s, lambda p: p[..., 2],
                                      np.array([1.0, 2.0, 0.0])),
      " (analytic: X1 z = -y/2 = -1, X2 z = x/2 = 1/2)")

print("\n== second directional derivative X1(X1(z^2)) at (0, 1, 0):")
val = frames.second_directional(s, lambda p: p[..., 2] ** 2, 0,
                                np.array([0.0, 1.0, 0.0]))
print(f"   {float(val):.10f}  (analytic: 1/2)")

print("\n== divergences against two volumes:")
om = frames.lebesgue()
omx = frames.exp_scaled(om, lambda p: p[..., 0])
print("   div_Lebesgue(X1) =", float(frames.div_omega(s, om, 0, q)))
print("   div_{e^x Lebesgue}(X1) =", float(frames.div_omega(s, omx, 0, q)),
      " (the volume factor shifts it by X1(x) = 1)")

print("\n== finite-difference Jacobians agree with the analytic ones:")
for a in range(3):
    err = np.max(np.abs(frames.fd_jacobian(s.fields[a], q)
                        - frames.jacobian(s, a, q)))
    print(f"   field {a+1}: max error {err:.2e}")

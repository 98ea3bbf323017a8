"""Corank-1 machinery: the annihilator one-form, the endomorphism J, Reeb
and quasi-Reeb fields, and the canonical volume density."""

import numpy as np

from sublap import corank1, forms, models

print("== 3D contact model")
m = models.heisenberg3()
s = m.structure
q = np.array([0.4, -0.2, 0.7])
jm, scale = corank1.j_matrix(s, corank1.OneForm(
    lambda p: np.sqrt(2.0) * m.eta.value(p), "raw"), q)
print("   raw |J|^2 =", float(jm.frobenius_sq()), " normalization scale =",
      float(scale))
print("   Reeb field:", corank1.reeb(s, m.eta, q))
print("   canonical density:", float(corank1.popp_corank1(s, m.eta, q)),
      "(= 1/sqrt(2))")

print("\n== generic perturbed contact model (pointwise normalization)")
mp = models.contact3_perturbed(0.2, 0.1)
sp = mp.structure
eta_n = corank1.normalized_one_form(sp, mp.eta)
for qq in np.array([[0.0, 0.0, 0.0], [0.5, -0.5, 0.3]]):
    Z = corank1.reeb(sp, eta_n, qq)
    rho = float(corank1.popp_corank1(sp, eta_n, qq))
    print(f"   q={qq}: Reeb={np.round(Z, 4)}, density={rho:.6f}")

print("\n== quasi-contact R^4 model")
mr = models.quasicontact_r4("exp")
sr = mr.structure
q4 = np.array([0.3, -0.7, 0.2, 0.5])
jm4 = corank1.j_matrix_normalized(sr, mr.eta, q4)
print("   J matrix on the horizontal frame:")
print(np.round(jm4.m, 6))
x, y, lam = corank1.eigen_generators(sr, mr.eta, q4, 1)
print(f"   eigenvalue magnitude: {lam:.6f} (= 1/sqrt(2))")
Z1 = corank1.quasi_reeb(sr, mr.eta, q4, 1)
print("   quasi-Reeb field:", np.round(Z1, 6))
B = forms.exterior_d(mr.eta.coeffs, 1, q4)
F = sr.frame_matrix(q4)
print("   defining residuals:",
      f"eta(Z)-1 = {float(mr.eta.pair(q4, Z1)) - 1:+.2e},",
      f"dEta(Z, Xj) = {float(Z1 @ B @ (F[:, :3] @ x)):+.2e},",
      f"dEta(Z, Yj) = {float(Z1 @ B @ (F[:, :3] @ y)):+.2e}")
g = np.exp(q4[2])
print(f"   density {float(corank1.popp_corank1(sr, mr.eta, q4)):.6f}"
      f"  vs g^(5/2)/sqrt(2) = {g**2.5/np.sqrt(2):.6f}")
print(f"   det dEta = {np.linalg.det(B):.6f} vs g^2 gdot^2/4 = {g**4/4:.6f}")

"""The two sub-Laplacians and their first-order gap.

* volume form omega  ->  macroscopic operator
      D_omega phi = sum_i X_i^2 phi + sum_{i,alpha} c_{alpha i}^alpha X_i phi
                    + sum_i X_i(theta) X_i phi,
  theta = log|omega(X_1,...,X_n)| (divergence of the horizontal gradient);

* complement (the frame fields X_{k+1..n})  ->  microscopic operator
      L phi = sum_i X_i^2 phi + sum_{i,j<=k} c_{ji}^j X_i phi,
  the scaled limit of geodesic random-walk single-step expectations;

* chi = macroscopic - microscopic, per horizontal frame coefficient:
      chi_i = sum_{j>k} c_{ji}^j + X_i(theta).
  The pair (complement, volume) is compatible iff chi = 0.

Sign convention: chi is the macroscopic-minus-microscopic gap, so
macro(phi) - micro(phi) = sum_i chi_i X_i(phi) holds identically.

All second-order terms reuse the integral-curve second directional
derivative from `frames` (single code path for the dominant error source).
"""

from dataclasses import dataclass

import numpy as np

from .frames import (Structure, VolumeForm, as_points, get_theta, grad_h,
                     second_directional, structural_functions)


@dataclass(frozen=True)
class OperatorValue:
    """Operator evaluation with its term breakdown; value == sum of terms."""

    second_order: float
    structural_drift: float
    theta_drift: float

    @property
    def value(self):
        return self.second_order + self.structural_drift + self.theta_drift

    def asdict(self):
        return {"value": float(self.value),
                "second_order": float(self.second_order),
                "structural_drift": float(self.structural_drift),
                "theta_drift": float(self.theta_drift)}


def _second_order_sum(s: Structure, phi, q) -> np.ndarray:
    return sum(second_directional(s, phi, i, q) for i in range(s.k))


def macroscopic(s: Structure, phi, omega: VolumeForm, q) -> OperatorValue:
    """Divergence (w.r.t. omega) of the horizontal gradient of phi at q."""
    q = as_points(q)
    c = structural_functions(s, q).c
    xphi = grad_h(s, phi, q)
    second = _second_order_sum(s, phi, q)
    trace = np.einsum("...aia->...i", c)[..., : s.k]     # sum_alpha c_{alpha i}^alpha
    drift = np.einsum("...i,...i->...", trace, xphi)
    theta_fn = lambda p: get_theta(s, omega, p)
    xtheta = grad_h(s, theta_fn, q)
    theta_term = np.einsum("...i,...i->...", xtheta, xphi)
    return OperatorValue(second, drift, theta_term)


def microscopic(s: Structure, phi, q) -> OperatorValue:
    """Walk-limit operator of the splitting defined by the frame: depends
    only on the span of X_{k+1}, ..., X_n."""
    q = as_points(q)
    c = structural_functions(s, q).c
    xphi = grad_h(s, phi, q)
    second = _second_order_sum(s, phi, q)
    trace = np.einsum("...jij->...i", c[..., : s.k, : s.k, : s.k])
    drift = np.einsum("...i,...i->...", trace, xphi)
    return OperatorValue(second, drift, 0.0)


def horizontal_divergence(s: Structure, a: int, q) -> np.ndarray:
    """div(X_a) against the canonical horizontal k-form:
    -sum_{i<=k} <pi_D [X_a, X_i], X_i> in frame coefficients."""
    q = as_points(q)
    c = structural_functions(s, q).c
    return -np.einsum("...ii->...", c[..., a, : s.k, : s.k])


def chi(s: Structure, omega: VolumeForm, q) -> np.ndarray:
    """Frame coefficients (length k) of the first-order gap field:
    chi_i = sum_{j>k} c_{ji}^j + X_i(theta)."""
    q = as_points(q)
    c = structural_functions(s, q).c
    vert = np.einsum("...jij->...i", c[..., s.k:, : s.k, s.k:])
    theta_fn = lambda p: get_theta(s, omega, p)
    return vert + grad_h(s, theta_fn, q)


def chi_norm(s: Structure, omega: VolumeForm, q) -> np.ndarray:
    return np.linalg.norm(chi(s, omega, q), axis=-1)

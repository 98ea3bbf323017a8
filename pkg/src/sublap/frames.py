"""Frame calculus on a single coordinate chart.

A structure is given by n vector fields on R^n: the first k are declared
orthonormal (this *defines* the metric on the distribution they span), the
remaining n-k span a chosen complement.  Everything downstream (brackets,
structural functions, gradients, divergences, the two Laplacians) is
computed from these fields and, where needed, a volume density.

Conventions:
  * chart points are arrays of shape (..., n); every operation is batched
    over the leading axes,
  * field callables map (..., n) -> (..., n); analytic Jacobian callables
    map (..., n) -> (..., n, n) with J[..., a, m] = d(field_a)/dq_m,
  * the frame matrix has the fields as *columns*: F[..., :, alpha] = X_alpha,
  * the structural tensor is indexed c[..., i, j, l] for the X_l-coefficient
    of [X_i, X_j].
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .config import DEFAULTS
from .errors import DegenerateFrameError, EvaluationError, InvalidVolumeError

Field = Callable[[np.ndarray], np.ndarray]


def as_points(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim == 0:
        raise ValueError("a chart point must be a vector, got a scalar")
    return q


def fd_step(q: np.ndarray, scale: float = None) -> np.ndarray:
    """Finite-difference step 'scale*(1+|q|_inf)', one value per point."""
    if scale is None:
        scale = DEFAULTS.fd_step_scale
    return scale * (1.0 + np.max(np.abs(q), axis=-1))


def _check_finite(values: np.ndarray, q: np.ndarray, what: str):
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        coord = int(idx[-1]) if values.ndim > q.ndim - 1 else None
        point = q[tuple(idx[:-1])] if values.ndim == q.ndim else q
        raise EvaluationError(f"non-finite {what}", point=np.asarray(point),
                              coordinate=coord)


@dataclass(frozen=True)
class Structure:
    """A frame-defined (sub)-Riemannian structure on a global chart R^n.

    fields[0..k) form the orthonormal horizontal frame, fields[k..n) the
    complement.  Jacobians are optional per field; missing ones fall back
    to 4th-order central finite differences.
    """

    n: int
    k: int
    fields: Sequence[Field]
    jacobians: Optional[Sequence[Optional[Field]]] = None
    name: str = "structure"

    def __post_init__(self):
        if not (2 <= self.n):
            raise ValueError("chart dimension must be >= 2")
        if not (1 <= self.k <= self.n):
            raise ValueError("rank must satisfy 1 <= k <= n")
        if len(self.fields) != self.n:
            raise ValueError(f"expected {self.n} frame fields, got {len(self.fields)}")
        if self.jacobians is not None and len(self.jacobians) != self.n:
            raise ValueError("jacobians, when given, must match the frame length")

    def field_value(self, a: int, q: np.ndarray) -> np.ndarray:
        q = as_points(q)
        v = np.asarray(self.fields[a](q), dtype=float)
        _check_finite(v, q, f"value of frame field {a}")
        return v

    def frame_matrix(self, q: np.ndarray) -> np.ndarray:
        """(..., n, n) matrix with X_alpha as column alpha."""
        q = as_points(q)
        cols = [np.asarray(f(q), dtype=float) for f in self.fields]
        F = np.stack(cols, axis=-1)
        _check_finite(F, q, "frame matrix")
        return F


def jacobian(s: Structure, a: int, q, scale: float = None, check: bool = True) -> np.ndarray:
    """Jacobian of frame field a: analytic if supplied, else 4th-order FD."""
    q = as_points(q)
    if s.jacobians is not None and s.jacobians[a] is not None:
        J = np.asarray(s.jacobians[a](q), dtype=float)
        if check:
            _check_finite(J, q, f"analytic jacobian of field {a}")
        return J
    return fd_jacobian(s.fields[a], q, scale, check=check)


def fd_jacobian(f: Field, q: np.ndarray, scale: float = None, check: bool = True) -> np.ndarray:
    q = as_points(q)
    n = q.shape[-1]
    h = fd_step(q, scale)[..., None]          # (..., 1) for broadcasting
    base = np.asarray(f(q), dtype=float)
    if check:
        _check_finite(base, q, "field value")
    cols = []
    for m in range(n):
        e = np.zeros(n)
        e[m] = 1.0
        d = h * e
        fm2, fm1 = f(q - 2 * d), f(q - d)
        fp1, fp2 = f(q + d), f(q + 2 * d)
        cols.append((-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h))
    J = np.stack(cols, axis=-1)               # (..., n_out, n_coord)
    if check:
        _check_finite(J, q, "finite-difference jacobian")
    return J


def _stacked_jacobians(s: Structure, q: np.ndarray) -> np.ndarray:
    """(..., n_field, n, n): all frame Jacobians."""
    return np.stack([jacobian(s, a, q) for a in range(s.n)], axis=-3)


def lie_bracket(s: Structure, a: int, b: int, q) -> np.ndarray:
    """[X_a, X_b](q) = (DX_b)(q) X_a(q) - (DX_a)(q) X_b(q)."""
    q = as_points(q)
    Xa, Xb = s.field_value(a, q), s.field_value(b, q)
    Ja, Jb = jacobian(s, a, q), jacobian(s, b, q)
    return np.einsum("...ij,...j->...i", Jb, Xa) - np.einsum("...ij,...j->...i", Ja, Xb)


def solve_frame(F: np.ndarray, rhs: np.ndarray, check: bool = True) -> np.ndarray:
    """Solve F x = rhs (batched).  rhs may be (..., n) or (..., n, m)."""
    if check:
        det = np.linalg.det(F)
        scale = np.sqrt(np.sum(F * F, axis=(-2, -1)) / F.shape[-1])
        tol = DEFAULTS.frame_det_rtol * np.maximum(scale, 1e-300) ** F.shape[-1]
        if np.any(np.abs(det) <= tol):
            raise DegenerateFrameError("frame matrix is singular at a sampled point")
    vec = rhs.ndim == F.ndim - 1
    b = rhs[..., None] if vec else rhs
    x = np.linalg.solve(F, b)
    return x[..., 0] if vec else x


@dataclass(frozen=True)
class StructuralTensor:
    """Values c[..., i, j, l] of the frame-bracket coefficients at chart
    points: [X_i, X_j] = sum_l c_ij^l X_l.  Antisymmetric in (i, j)."""

    c: np.ndarray

    def antisymmetry_defect(self) -> float:
        return float(np.max(np.abs(self.c + np.swapaxes(self.c, -3, -2))))


def structural_functions(s: Structure, q) -> StructuralTensor:
    """Solve Frame(q) c_ij = [X_i, X_j](q) for every pair (i, j)."""
    q = as_points(q)
    F = s.frame_matrix(q)
    Jst = _stacked_jacobians(s, q)
    pairs = [(i, j) for i in range(s.n) for j in range(i + 1, s.n)]
    # bracket for pair (i,j): J_j X_i - J_i X_j, with X_alpha = F[..., :, alpha]
    br = [
        np.einsum("...ab,...b->...a", Jst[..., j, :, :], F[..., :, i])
        - np.einsum("...ab,...b->...a", Jst[..., i, :, :], F[..., :, j])
        for (i, j) in pairs
    ]
    rhs = np.stack(br, axis=-1)                      # (..., n, P)
    coef = solve_frame(F, rhs)                       # (..., n, P)
    c = np.zeros(q.shape[:-1] + (s.n, s.n, s.n))
    for p, (i, j) in enumerate(pairs):
        c[..., i, j, :] = coef[..., :, p]
        c[..., j, i, :] = -coef[..., :, p]
    return StructuralTensor(c)


def directional_derivative(phi, q, v, scale: float = None) -> np.ndarray:
    """4th-order FD of t -> phi(q + t v) at t=0; equals d(phi)(v) exactly in
    the limit, so with v = X_a(q) it computes X_a(phi)(q)."""
    q = as_points(q)
    h = fd_step(q, scale)[..., None]
    d = h * v
    num = (-np.asarray(phi(q + 2 * d)) + 8.0 * np.asarray(phi(q + d))
           - 8.0 * np.asarray(phi(q - d)) + np.asarray(phi(q - 2 * d)))
    return num / (12.0 * h[..., 0])


def field_derivative(s: Structure, phi, a: int, q, scale: float = None) -> np.ndarray:
    """X_a(phi)(q)."""
    q = as_points(q)
    return directional_derivative(phi, q, s.field_value(a, q), scale)


def grad_h(s: Structure, phi, q, scale: float = None) -> np.ndarray:
    """Horizontal gradient in frame coefficients: component i is X_i(phi)(q)."""
    q = as_points(q)
    return np.stack([field_derivative(s, phi, i, q, scale) for i in range(s.k)],
                    axis=-1)


def _combo_field(s: Structure, which) -> Field:
    """Either a frame field (int index) or a fixed linear combination
    sum_a w_a X_a given by a weight vector (length k or n)."""
    if isinstance(which, (int, np.integer)):
        return s.fields[which]
    w = np.asarray(which, dtype=float)
    if w.shape[-1] not in (s.k, s.n):
        raise ValueError("weight vector must have length k or n")

    def f(q):
        F = s.frame_matrix(q)
        return np.einsum("...am,...m->...a", F[..., :, : w.shape[-1]], w)

    return f


def flow_rk4(f: Field, q: np.ndarray, t: float, substeps: int) -> np.ndarray:
    """Integrate dq/ds = f(q) for time t (possibly negative) with fixed-step
    RK4; returns the positions after substeps//2 and substeps steps."""
    dt = t / substeps
    p = np.array(q, dtype=float, copy=True)
    half = None
    for step in range(substeps):
        k1 = f(p)
        k2 = f(p + 0.5 * dt * k1)
        k3 = f(p + 0.5 * dt * k2)
        k4 = f(p + dt * k3)
        p = p + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step + 1 == substeps // 2:
            half = np.array(p, copy=True)
    return half, p


def second_directional(s: Structure, phi, which, q, scale: float = None,
                       substeps: int = None) -> np.ndarray:
    """Y(Y(phi))(q) for Y a frame field (index) or combination (weights).

    Computed as the second derivative of phi along the integral curve of Y:
    central stencil over the RK4 flow, one Richardson refinement.  Nested
    first-difference would lose ~4 digits; this keeps the error near 1e-7.
    """
    q = as_points(q)
    if scale is None:
        scale = DEFAULTS.dir2_step_scale
    if substeps is None:
        substeps = DEFAULTS.dir2_substeps
    f = _combo_field(s, which)
    h = scale * (1.0 + np.max(np.abs(q)))     # one scalar step for the batch
    p_half, p_full = flow_rk4(f, q, h, substeps)
    m_half, m_full = flow_rk4(f, q, -h, substeps)
    for arr in (p_full, m_full):
        _check_finite(arr, q, "integral-curve flow")
    phi0 = np.asarray(phi(q), dtype=float)
    d_full = (np.asarray(phi(p_full)) - 2.0 * phi0 + np.asarray(phi(m_full))) / h**2
    d_half = (np.asarray(phi(p_half)) - 2.0 * phi0 + np.asarray(phi(m_half))) / (0.5 * h) ** 2
    return (4.0 * d_half - d_full) / 3.0


@dataclass(frozen=True)
class VolumeForm:
    """A volume written as density * (coordinate n-form); density > 0."""

    density: Callable[[np.ndarray], np.ndarray]
    name: str = "volume"

    def rho(self, q: np.ndarray) -> np.ndarray:
        q = as_points(q)
        r = np.asarray(self.density(q), dtype=float)
        if np.any(~np.isfinite(r)) or np.any(r <= 0):
            raise InvalidVolumeError(
                f"volume '{self.name}' has a non-positive or non-finite density")
        return r


def lebesgue() -> VolumeForm:
    return VolumeForm(lambda q: np.ones(np.asarray(q).shape[:-1]), "lebesgue")


def scaled(omega: VolumeForm, c: float) -> VolumeForm:
    if c <= 0:
        raise InvalidVolumeError("volume scale must be positive")
    return VolumeForm(lambda q: c * omega.density(q), f"{c}*{omega.name}")


def exp_scaled(omega: VolumeForm, g) -> VolumeForm:
    """e^g * omega for a scalar function g."""
    return VolumeForm(lambda q: np.exp(np.asarray(g(q), dtype=float)) * omega.density(q),
                      f"exp(g)*{omega.name}")


def get_theta(s: Structure, omega: VolumeForm, q) -> np.ndarray:
    """theta(q) = log(rho(q) * |det Frame(q)|), i.e. log|omega(X_1,...,X_n)|."""
    q = as_points(q)
    rho = omega.rho(q)
    det = np.linalg.det(s.frame_matrix(q))
    if np.any(np.abs(det) <= 0):
        raise DegenerateFrameError("frame matrix is singular at a sampled point")
    return np.log(rho * np.abs(det))


def div_omega(s: Structure, omega: VolumeForm, a: int, q) -> np.ndarray:
    """div_omega(X_a)(q) = sum_alpha c_{alpha a}^alpha + X_a(theta)."""
    q = as_points(q)
    c = structural_functions(s, q).c
    trace = np.einsum("...iji->...j", c)[..., a]      # sum_alpha c_{alpha a}^alpha
    theta_fn = lambda p: get_theta(s, omega, p)
    return trace + field_derivative(s, theta_fn, a, q)


def structure_condition(s: Structure, q) -> np.ndarray:
    """Condition number of the frame matrix (diagnostic)."""
    return np.linalg.cond(s.frame_matrix(as_points(q)))

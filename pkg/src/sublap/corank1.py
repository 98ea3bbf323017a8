"""Corank-1 machinery: annihilator one-form, transverse endomorphism J,
Reeb and quasi-Reeb fields, and the canonical volume via Riemannian
extension.

For a corank-1 structure (n = k+1) the distribution is locally ker(eta).
The endomorphism J on the distribution is defined by  g(X, JY) = d eta(X, Y);
in the orthonormal frame its matrix is m_ij = d eta(X_i, X_j), acting on
frame coefficients by (J w)_i = sum_j m_ij w_j.  The one-form is fixed (up
to sign) by the normalization tr(J J^T) = 1, pointwise.

The canonical volume of the structure is the Riemannian volume of the
extension that declares any eta-unital transverse vector orthonormal to the
distribution; its density does not depend on that choice.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import DEFAULTS
from .errors import (NotContactError, QuasiReebUndefinedError,
                     StepTwoViolationError)
from .forms import exterior_d
from .frames import (Structure, as_points, directional_derivative,
                     fd_jacobian, lie_bracket)


@dataclass(frozen=True)
class OneForm:
    """One-form given by coefficient functions against dx^1..dx^n."""

    coeffs: Callable[[np.ndarray], np.ndarray]
    name: str = "eta"
    normalized: bool = False

    def value(self, q: np.ndarray) -> np.ndarray:
        q = as_points(q)
        return np.asarray(self.coeffs(q), dtype=float)

    def pair(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        """<eta(q), v> for a coordinate vector (field value) v."""
        return np.einsum("...a,...a->...", self.value(q), v)


@dataclass(frozen=True)
class JMatrix:
    """Matrix m_ij = d eta(X_i, X_j) at a point; skew-symmetric."""

    m: np.ndarray

    def skew_defect(self) -> float:
        return float(np.max(np.abs(self.m + np.swapaxes(self.m, -1, -2))))

    def frobenius_sq(self) -> np.ndarray:
        return np.sum(self.m * self.m, axis=(-2, -1))


def _as_field(s: Structure, which):
    """Frame index -> the field; coordinate vector -> constant field."""
    if isinstance(which, (int, np.integer)):
        return s.fields[which], which
    v = np.asarray(which, dtype=float)
    return (lambda q: np.broadcast_to(v, np.asarray(q).shape).copy()), None


def d_eta(s: Structure, eta: OneForm, a, b, q) -> np.ndarray:
    """Cartan formula d eta(A, B) = A(eta(B)) - B(eta(A)) - eta([A, B]).

    A, B are frame indices or raw coordinate vectors (treated as constant
    fields, whose mutual bracket vanishes).
    """
    q = as_points(q)
    fa, ia = _as_field(s, a)
    fb, ib = _as_field(s, b)
    eta_b = lambda p: np.einsum("...a,...a->...", eta.value(p), np.asarray(fb(p), dtype=float))
    eta_a = lambda p: np.einsum("...a,...a->...", eta.value(p), np.asarray(fa(p), dtype=float))
    term1 = directional_derivative(eta_b, q, np.asarray(fa(q), dtype=float))
    term2 = directional_derivative(eta_a, q, np.asarray(fb(q), dtype=float))
    if ia is not None and ib is not None:
        br = lie_bracket(s, ia, ib, q)
    elif ia is None and ib is None:
        br = np.zeros(q.shape)
    else:
        # [X, C] = -(DX) C for a constant field C
        if ib is None:
            J = _field_jacobian(s, ia, q)
            br = -np.einsum("...ab,...b->...a", J, np.asarray(fb(q), dtype=float))
        else:
            J = _field_jacobian(s, ib, q)
            br = np.einsum("...ab,...b->...a", J, np.asarray(fa(q), dtype=float))
    return term1 - term2 - eta.pair(q, br)


def _field_jacobian(s: Structure, a: int, q: np.ndarray) -> np.ndarray:
    if s.jacobians is not None and s.jacobians[a] is not None:
        return np.asarray(s.jacobians[a](q), dtype=float)
    return fd_jacobian(s.fields[a], q)


def j_matrix(s: Structure, eta: OneForm, q):
    """Raw matrix m_ij = d eta(X_i, X_j) on the horizontal frame, plus the
    pointwise scale making s*eta normalized: scale = (sum m^2)^(-1/2)."""
    q = as_points(q)
    k = s.k
    m = np.zeros(q.shape[:-1] + (k, k))
    for i in range(k):
        for j in range(i + 1, k):
            val = d_eta(s, eta, i, j, q)
            m[..., i, j] = val
            m[..., j, i] = -val
    frob = np.sum(m * m, axis=(-2, -1))
    if np.any(frob <= 1e-24):
        raise StepTwoViolationError(
            "d(eta) vanishes on the distribution: step-2 violation")
    return JMatrix(m), 1.0 / np.sqrt(frob)


def normalize_scale(s: Structure, eta: OneForm, q) -> np.ndarray:
    return j_matrix(s, eta, q)[1]


def normalized_one_form(s: Structure, eta: OneForm) -> OneForm:
    """Pointwise-normalized multiple of eta (tr(JJ^T) = 1 at every point)."""
    if eta.normalized:
        return eta

    def coeffs(q):
        q = as_points(q)
        scale = normalize_scale(s, eta, q)
        return scale[..., None] * eta.value(q)

    return OneForm(coeffs, name=f"normalized({eta.name})", normalized=True)


def j_matrix_normalized(s: Structure, eta: OneForm, q) -> JMatrix:
    jm, scale = j_matrix(s, eta, q)
    if eta.normalized:
        return jm
    return JMatrix(scale[..., None, None] * jm.m)


def annihilator_one_form(s: Structure) -> OneForm:
    """Reconstruct eta pointwise as the null covector of the horizontal
    frame; the sign is fixed by positivity of eta(X_n) (coorientable case)."""
    if s.k != s.n - 1:
        raise ValueError("annihilator reconstruction requires corank 1")

    def coeffs(q):
        q = as_points(q)
        F = s.frame_matrix(q)
        rows = np.swapaxes(F[..., :, : s.k], -1, -2)      # (..., k, n)
        _, _, vt = np.linalg.svd(rows)
        e = vt[..., -1, :]
        orient = np.einsum("...a,...a->...", e, F[..., :, s.n - 1])
        return e * np.where(orient < 0, -1.0, 1.0)[..., None]

    return OneForm(coeffs, name="annihilator")


def reeb(s: Structure, eta: OneForm, q, min_sv: float = None) -> np.ndarray:
    """The unique Z with d eta(Z, .) = 0 on the frame directions and
    eta(Z) = 1.  Requires a normalized eta and a contact point."""
    q = as_points(q)
    if q.ndim > 1:
        return np.stack([reeb(s, eta, p, min_sv) for p in q.reshape(-1, s.n)]
                        ).reshape(q.shape)
    if min_sv is None:
        min_sv = DEFAULTS.contact_min_sv
    eta_n = normalized_one_form(s, eta)
    jm = j_matrix_normalized(s, eta_n, q)
    sv = np.linalg.svd(jm.m, compute_uv=False)
    if sv[-1] <= min_sv:
        raise NotContactError(
            f"endomorphism J has smallest singular value {sv[-1]:.2e}: "
            "not contact at this point")
    B = exterior_d(eta_n.coeffs, 1, q)                    # coordinate d(eta)
    F = s.frame_matrix(q)
    rows = [B @ F[:, i] for i in range(s.n - 1)]          # d eta(Z, X_i) = Z . (B X_i)
    rows.append(eta_n.value(q))
    A = np.stack(rows, axis=0)
    rhs = np.zeros(s.n)
    rhs[-1] = 1.0
    try:
        Z = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise NotContactError(f"singular transverse system: {exc}") from exc
    return Z


def popp_corank1(s: Structure, eta: OneForm, q) -> np.ndarray:
    """Density of the canonical corank-1 volume at q (against the coordinate
    n-form): 1/|det[X_1 ... X_k Z]| for any Z with normalized eta(Z) = 1."""
    q = as_points(q)
    eta_n = normalized_one_form(s, eta)
    e = eta_n.value(q)
    Z = e / np.sum(e * e, axis=-1, keepdims=True)         # eta_n(Z) = 1
    F = s.frame_matrix(q)
    M = np.concatenate([F[..., :, : s.k], Z[..., :, None]], axis=-1)
    return 1.0 / np.abs(np.linalg.det(M))


def popp_volume(s: Structure, eta: OneForm):
    from .frames import VolumeForm
    eta_n = normalized_one_form(s, eta)
    return VolumeForm(lambda q: popp_corank1(s, eta_n, q), name="popp")


def _eigplanes(m: np.ndarray, gap: float):
    """Cluster the skew matrix's eigenvalue magnitudes via the symmetric
    problem of J^T J; returns [(lam, plane_columns)] ascending, kernel
    included as lam=0."""
    S = m.T @ m
    evals, evecs = np.linalg.eigh(S)
    lam = np.sqrt(np.clip(evals, 0.0, None))
    clusters = []
    start = 0
    for i in range(1, len(lam) + 1):
        if i == len(lam) or lam[i] - lam[i - 1] > 0.5 * gap:
            clusters.append((float(np.mean(lam[start:i])), evecs[:, start:i]))
            start = i
    return clusters


def _generators_at(s: Structure, eta: OneForm, p: np.ndarray, gap: float,
                   lam_ref: float = None, x_ref: np.ndarray = None,
                   j_index: int = 1):
    """Orthonormal eigenplane generators (x, y) with J x = -lam y.

    Without a reference this picks the j-th smallest positive eigenvalue
    cluster; with one it tracks the nearby plane and aligns x to x_ref,
    giving a smooth local gauge for finite differencing."""
    m = j_matrix_normalized(s, eta, p).m
    clusters = _eigplanes(m, gap)
    positive = [c for c in clusters if c[0] > gap]
    if lam_ref is None:
        if j_index < 1 or j_index > len(positive):
            raise QuasiReebUndefinedError(
                f"requested eigenvalue index {j_index} of {len(positive)} "
                "well-separated positive eigenvalues")
        lam, plane = positive[j_index - 1]
        if plane.shape[1] != 2:
            raise QuasiReebUndefinedError(
                "eigenvalue crossing within gap tolerance: quasi-Reeb "
                "undefined at this point")
        x = plane[:, 0]
    else:
        lam, plane = min(positive, key=lambda c: abs(c[0] - lam_ref))
        if abs(lam - lam_ref) > 10 * gap or plane.shape[1] != 2:
            raise QuasiReebUndefinedError(
                "eigenplane tracking lost between nearby points")
        proj = plane @ (plane.T @ x_ref)
        nrm = np.linalg.norm(proj)
        if nrm < 1e-10:
            raise QuasiReebUndefinedError("eigenplane tracking lost (orthogonal drift)")
        x = proj / nrm
    y = -(m @ x) / lam
    return x, y, lam


def quasi_reeb(s: Structure, eta: OneForm, q, j_index: int = 1,
               gap: float = None) -> np.ndarray:
    """Transverse field attached to the j-th eigenplane of J:

        Z_j = -[X_j, Y_j]/lam_j + (d eta([X_j,Y_j], Y_j)/lam_j^2) X_j
                                 - (d eta([X_j,Y_j], X_j)/lam_j^2) Y_j

    where X_j, Y_j are the orthonormal eigenplane generator fields (J X_j =
    -lam_j Y_j).  Defined where the eigenvalue is simple; raises otherwise.
    """
    q = as_points(q)
    if gap is None:
        gap = DEFAULTS.eig_gap
    eta_n = normalized_one_form(s, eta)
    x0, y0, lam = _generators_at(s, eta_n, q, gap, j_index=j_index)

    def gen_field(component):
        def f(p):
            x, y, _ = _generators_at(s, eta_n, p, gap, lam_ref=lam, x_ref=x0)
            w = x if component == 0 else y
            F = s.frame_matrix(p)
            return np.einsum("am,m->a", F[:, : s.k], w)
        return f

    fx, fy = gen_field(0), gen_field(1)
    Jx = fd_jacobian(fx, q)
    Jy = fd_jacobian(fy, q)
    W = Jy @ fx(q) - Jx @ fy(q)                           # [X_j, Y_j](q)
    B = exterior_d(eta_n.coeffs, 1, q)
    F = s.frame_matrix(q)
    xvec = F[:, : s.k] @ x0
    yvec = F[:, : s.k] @ y0
    d_w_y = W @ B @ yvec
    d_w_x = W @ B @ xvec
    return -W / lam + (d_w_y / lam**2) * xvec - (d_w_x / lam**2) * yvec


def eigen_generators(s: Structure, eta: OneForm, q, j_index: int = 1,
                     gap: float = None):
    """Expose the (x, y, lam) eigen-data used by quasi_reeb (frame coefficients)."""
    if gap is None:
        gap = DEFAULTS.eig_gap
    eta_n = normalized_one_form(s, eta)
    return _generators_at(s, eta_n, as_points(q), gap, j_index=j_index)

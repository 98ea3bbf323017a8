"""Deciding and solving the equivalence problem.

Given a volume and a corank-1 structure, the compatible complements
X_0 = Z + xi (eta-normalized transverse Z, horizontal xi) are the solutions
of the k x k linear system

    J xi = v - grad(theta),     v_i = d eta(Z, X_i),
    theta = log|omega(X_1, ..., X_k, Z)|,

classified by rank: invertible J gives a unique complement, a consistent
rank-deficient system an affine family over ker J, an inconsistent one a
certified non-existence (the least-squares residual is the certificate).
theta is insensitive to the choice of the transverse Z, so the system is
well posed.

On contact structures Z can be the Reeb field, v = 0, and the unique
complement is X_0 = Z - J^{-1} grad(theta).

For nilpotent stratified groups the problem is algebraic: left-invariant
complements are graphs of linear maps l: V_0 -> D, compatible iff
tr(l o ad_{X_i}) = 0 for every horizontal i, a homogeneous linear system
whose null space always contains l = 0.

The inverse (fixed complement, find a volume) problem on contact structures
reduces to an integrability condition on the one-form alpha = i_{X0} d eta
/ eta(X0):  with  g = -(d alpha ^ eta ^ (d eta)^{d-1}) / (eta ^ (d eta)^d)
the residual 2-form  d alpha + dg ^ eta + g d eta  must vanish.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import DEFAULTS
from .corank1 import (OneForm, j_matrix_normalized, normalized_one_form, reeb)
from .errors import InvalidSpecError, NotContactError
from .forms import evaluate, exterior_d, nform_ratio, wedge, wedge_power
from .frames import Structure, as_points, grad_h
from .operators import chi_norm

# re-exported here because the integrability test is its main consumer
__all__ = ["SolvabilityReport", "CarnotSpec", "contact_complement",
           "corank1_solve", "carnot_complements", "contact_integrability",
           "exterior_d", "rebuild_with_complement", "reconstruct_theta"]


def _eta_unital_transverse(s: Structure, eta_n: OneForm, q: np.ndarray) -> np.ndarray:
    """The metric-dual transverse vector with eta(Z) = 1 (any eta-unital
    choice gives the same solve; this one is smooth and cheap)."""
    e = eta_n.value(q)
    return e / np.sum(e * e, axis=-1, keepdims=True)


def _theta_function(s: Structure, omega, eta_n: OneForm) -> Callable:
    """theta(p) = log|omega(X_1,...,X_k, Z(p))| with the eta-unital Z."""
    def theta(p):
        p = as_points(p)
        F = s.frame_matrix(p)
        Z = _eta_unital_transverse(s, eta_n, p)
        M = np.concatenate([F[..., :, : s.k], Z[..., :, None]], axis=-1)
        return np.log(omega.rho(p) * np.abs(np.linalg.det(M)))
    return theta


def contact_complement(s: Structure, omega, eta: OneForm, q) -> np.ndarray:
    """X_0 = Z - J^{-1} grad(theta) with Z the Reeb field of normalized eta
    and theta = log|omega(X_1, ..., X_k, Z)|."""
    q = as_points(q)
    eta_n = normalized_one_form(s, eta)

    def theta(p):
        p = np.asarray(p, dtype=float)
        if p.ndim > 1:
            return np.array([theta(row) for row in p.reshape(-1, s.n)]
                            ).reshape(p.shape[:-1])
        Z = reeb(s, eta_n, p)
        F = s.frame_matrix(p)
        M = np.concatenate([F[:, : s.k], Z[:, None]], axis=-1)
        return np.log(float(omega.rho(p)) * abs(np.linalg.det(M)))

    gt = grad_h(s, theta, q)
    jm = j_matrix_normalized(s, eta_n, q)
    try:
        xi = np.linalg.solve(jm.m, gt)
    except np.linalg.LinAlgError as exc:
        raise NotContactError(f"J is singular: {exc}") from exc
    F = s.frame_matrix(q)
    return reeb(s, eta_n, q) - F[..., :, : s.k] @ xi


@dataclass
class SolvabilityReport:
    """Classification of the compatible complements at one point.

    A 'none' verdict is *certified* when the least-squares residual is
    bounded away from zero (above the none_residual tolerance), not merely
    above the consistency threshold: exact-rank arithmetic is fragile under
    FD noise, a quantitative certificate is not."""

    status: str                                  # 'unique' | 'affine' | 'none'
    dim: int                                     # affine dimension (0 if unique)
    residual: float                              # solve / infeasibility residual
    complement: Optional[np.ndarray] = None      # a compatible X_0 (coordinates)
    kernel_basis: Optional[np.ndarray] = None    # (dim, n) directions of the family

    @property
    def certified(self) -> bool:
        if self.status == "none":
            return self.residual > DEFAULTS.none_residual
        return self.residual < DEFAULTS.lstsq_consistent

    def asdict(self):
        return {
            "status": self.status,
            "dim": int(self.dim),
            "residual": float(self.residual),
            "certified": bool(self.certified),
            "complement": None if self.complement is None else
                [float(v) for v in self.complement],
            "kernel_basis": None if self.kernel_basis is None else
                [[float(v) for v in row] for row in self.kernel_basis],
        }


def corank1_solve(s: Structure, omega, eta: OneForm, q,
                  consistent_tol: float = None) -> SolvabilityReport:
    """Solve J xi = d eta(Z, .) - grad(theta) at q and classify."""
    q = as_points(q)
    if q.ndim != 1:
        raise ValueError("corank1_solve classifies one point at a time")
    if consistent_tol is None:
        consistent_tol = DEFAULTS.lstsq_consistent
    eta_n = normalized_one_form(s, eta)
    theta = _theta_function(s, omega, eta_n)
    gt = grad_h(s, theta, q)
    Z = _eta_unital_transverse(s, eta_n, q)
    B = exterior_d(eta_n.coeffs, 1, q)
    F = s.frame_matrix(q)
    v = np.array([Z @ B @ F[:, i] for i in range(s.k)])
    rhs = v - gt
    m = j_matrix_normalized(s, eta_n, q).m

    u, sv, vt = np.linalg.svd(m)
    rank = int(np.sum(sv > max(sv[0], 1.0) * 1e-10))
    if rank == s.k:
        xi = np.linalg.solve(m, rhs)
        comp = Z + F[:, : s.k] @ xi
        return SolvabilityReport("unique", 0, float(np.linalg.norm(m @ xi - rhs)),
                                 complement=comp)
    xi, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    resid = float(np.linalg.norm(m @ xi - rhs))
    null = vt[rank:, :]                           # ker J in frame coefficients
    if resid < consistent_tol:
        comp = Z + F[:, : s.k] @ xi
        kernel = np.stack([F[:, : s.k] @ w for w in null])
        return SolvabilityReport("affine", s.k - rank, resid,
                                 complement=comp, kernel_basis=kernel)
    return SolvabilityReport("none", 0, resid)


def rebuild_with_complement(s: Structure, x0_field: Callable) -> Structure:
    """Corank-1 structure with the same horizontal frame and the given
    complement generator field (chart-point -> coordinate vector)."""
    if s.k != s.n - 1:
        raise ValueError("complement rebuild requires corank 1")
    fields = tuple(s.fields[: s.k]) + (lambda q: np.asarray(x0_field(q), dtype=float),)
    return Structure(s.n, s.k, fields, None, name=s.name + "+complement")


def constant_complement_field(vec) -> Callable:
    vec = np.asarray(vec, dtype=float)
    return lambda q: np.broadcast_to(vec, np.asarray(q).shape).copy()


def roundtrip_chi(s: Structure, omega, x0_field: Callable, points) -> np.ndarray:
    """|chi| of the structure rebuilt with the complement, at given points."""
    s2 = rebuild_with_complement(s, x0_field)
    return chi_norm(s2, omega, points)


# ---------------------------------------------------------------------------
# nilpotent stratified groups

@dataclass(frozen=True)
class CarnotSpec:
    """Stratified nilpotent algebra data on a graded basis.

    strata: dimensions (d_1, ..., d_m) with d_1 = k; c[a, b, g] is the
    e_g-coefficient of [e_a, e_b].  Antisymmetry, grading and Jacobi are
    validated numerically.
    """

    strata: tuple
    c: np.ndarray
    name: str = "carnot"

    @property
    def k(self):
        return self.strata[0]

    @property
    def n(self):
        return int(sum(self.strata))

    def __post_init__(self):
        object.__setattr__(self, "strata", tuple(int(d) for d in self.strata))
        c = np.asarray(self.c, dtype=float)
        n = self.n
        if c.shape != (n, n, n):
            raise InvalidSpecError(f"structure constants must be {(n, n, n)}")
        if np.max(np.abs(c + np.swapaxes(c, 0, 1))) > 1e-12:
            raise InvalidSpecError("structure constants must be antisymmetric in (a, b)")
        # grading: [g_i, g_j] subset of g_{i+j}
        layer = np.concatenate([np.full(d, i + 1) for i, d in enumerate(self.strata)])
        for a in range(n):
            for b in range(n):
                bad = np.abs(c[a, b]) > 1e-12
                if np.any(bad & (layer != layer[a] + layer[b])):
                    raise InvalidSpecError(
                        f"grading violated by [e_{a}, e_{b}]")
        jac = (np.einsum("bcm,amf->abcf", c, c)
               + np.einsum("cam,bmf->abcf", c, c)
               + np.einsum("abm,cmf->abcf", c, c))
        if np.max(np.abs(jac)) > 1e-10:
            raise InvalidSpecError("Jacobi identity violated by the supplied constants")
        object.__setattr__(self, "c", c)

    @classmethod
    def corank1(cls, A, name: str = "carnot-corank1") -> "CarnotSpec":
        A = np.asarray(A, dtype=float)
        k = A.shape[0]
        n = k + 1
        c = np.zeros((n, n, n))
        c[:k, :k, n - 1] = A
        return cls((k, 1), c, name)

    def step2_structure(self) -> Structure:
        """Exponential-coordinate frame X_a = d_a + (1/2) c_{ba}^g x_b d_g
        (exact for step-2 algebras)."""
        if len(self.strata) != 2:
            raise InvalidSpecError("closed-form frame implemented for step 2 only")
        n, k, c = self.n, self.k, self.c

        def make_field(a):
            def f(q):
                out = np.zeros_like(q)
                out[..., a] = 1.0
                out += 0.5 * np.einsum("bg,...b->...g", c[:, a, :], q)
                return out
            return f

        def make_jac(a):
            J0 = 0.5 * c[:, a, :].T            # J[g, b] = (1/2) c_{ba}^g

            def j(q):
                return np.broadcast_to(J0, q.shape + (n,)).copy()
            return j

        return Structure(n, k, tuple(make_field(a) for a in range(n)),
                         tuple(make_jac(a) for a in range(n)),
                         name=self.name + "-frame")


@dataclass
class ComplementFamily:
    """Affine family of compatible left-invariant complements: graphs of the
    maps l: V_0 -> D in the null-space basis (each basis element is a
    (k, n-k) matrix; the family always contains l = 0)."""

    dim: int
    basis: np.ndarray          # (dim, k, n-k)
    singular_values: np.ndarray


def carnot_complements(spec: CarnotSpec) -> ComplementFamily:
    """Null space of l -> (tr(l o ad_{X_i}))_{i<=k} over maps l: V_0 -> D.

    tr(l o ad_{X_i}) = sum_{j<=k} <l([X_i, X_j]), e_j>, so row i has entry
    c[i, j, k+a] at unknown l[j, a]."""
    k, n = spec.k, spec.n
    nv = n - k
    M = np.zeros((k, k * nv))
    for i in range(k):
        M[i] = spec.c[i, :k, k:].reshape(k * nv)
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > max(float(sv[0]), 1.0) * 1e-12)) if sv.size else 0
    _, _, vt = np.linalg.svd(M)
    null = vt[rank:, :]
    return ComplementFamily(dim=k * nv - rank,
                            basis=null.reshape(-1, k, nv),
                            singular_values=sv)


def complement_trace_residual(spec: CarnotSpec, L) -> float:
    """max_i |tr(l o ad_{X_i})| for a candidate map l (matrix (k, n-k))."""
    L = np.asarray(L, dtype=float)
    vals = [abs(float(np.sum(spec.c[i, : spec.k, spec.k:] * L)))
            for i in range(spec.k)]
    return max(vals)


# ---------------------------------------------------------------------------
# the inverse problem on contact structures

def _alpha_coeffs(s: Structure, eta_n: OneForm, x0_field: Callable):
    """alpha = i_{X0} d eta / eta(X0) as a coordinate 1-form function."""
    def alpha(p):
        p = np.asarray(p, dtype=float)
        if p.ndim > 1:
            return np.stack([alpha(row) for row in p.reshape(-1, s.n)]
                            ).reshape(p.shape[:-1] + (s.n,))
        w = np.asarray(x0_field(p), dtype=float)
        B = exterior_d(eta_n.coeffs, 1, p)
        denom = float(eta_n.pair(p, w))
        if denom == 0:
            raise NotContactError("complement candidate is tangent to the distribution")
        return (w @ B) / denom
    return alpha


@dataclass
class IntegrabilityReport:
    integrable: bool
    max_violation: float
    g_values: np.ndarray
    violations: np.ndarray


def contact_integrability(s: Structure, eta: OneForm, x0_field, points,
                          tol: float = None) -> IntegrabilityReport:
    """Does some volume make the given complement compatible?

    Checks, at each sample point, the residual 2-form
        R = d alpha + dg ^ eta + g d eta,
    g = -(d alpha ^ eta ^ (d eta)^{d-1}) / (eta ^ (d eta)^d);  for the
    3-dimensional case g reduces to -d alpha(X_1, X_2)/d eta(X_1, X_2).
    alpha is invariant under rescaling of the complement generator.
    """
    if tol is None:
        tol = DEFAULTS.integrability
    if (s.n - s.k) != 1 or s.n % 2 == 0:
        raise NotContactError("integrability test requires a contact structure")
    d = (s.n - 1) // 2
    if callable(x0_field):
        x0 = x0_field
    else:
        x0 = constant_complement_field(x0_field)
    eta_n = normalized_one_form(s, eta)
    alpha = _alpha_coeffs(s, eta_n, x0)
    points = as_points(points)
    if points.ndim == 1:
        points = points[None, :]

    def g_at(p):
        B = exterior_d(eta_n.coeffs, 1, p)
        da = exterior_d(alpha, 1, p)
        if d == 1:
            F = s.frame_matrix(p)
            num = evaluate(da, F[:, 0], F[:, 1])
            den = evaluate(B, F[:, 0], F[:, 1])
        else:
            e = eta_n.value(p)
            num_form = wedge(wedge(da, 2, e, 1), 3, wedge_power(B, 2, d - 1), 2 * (d - 1))
            den_form = wedge(e, 1, wedge_power(B, 2, d), 2 * d)
            num = num_form[tuple(range(s.n))]
            den = den_form[tuple(range(s.n))]
        if den == 0:
            raise NotContactError("eta ^ (d eta)^d vanishes: not contact here")
        return -num / den

    def g_scalar(r):
        return g_at(np.asarray(r, dtype=float))

    g_vals, viols = [], []
    for p in points:
        B = exterior_d(eta_n.coeffs, 1, p)
        da = exterior_d(alpha, 1, p)
        gv = g_at(p)
        dg = exterior_d(g_scalar, 0, p)
        R = da + wedge(dg, 1, eta_n.value(p), 1) + gv * B
        g_vals.append(gv)
        viols.append(float(np.max(np.abs(R))))
    g_vals = np.array(g_vals)
    viols = np.array(viols)
    return IntegrabilityReport(bool(np.max(viols) < tol), float(np.max(viols)),
                               g_vals, viols)


def reconstruct_theta(s: Structure, eta: OneForm, x0_field, base, target,
                      segments: int = 64):
    """Optional volume reconstruction: line-integrate d theta = alpha + g eta
    from base to target along two coordinate staircase paths; returns
    (theta_path1, theta_path2, |difference|) as a path-independence check."""
    eta_n = normalized_one_form(s, eta)
    if callable(x0_field):
        x0 = x0_field
    else:
        x0 = constant_complement_field(x0_field)
    alpha = _alpha_coeffs(s, eta_n, x0)
    d = (s.n - 1) // 2

    def one_form(p):
        B = exterior_d(eta_n.coeffs, 1, p)
        da = exterior_d(alpha, 1, p)
        F = s.frame_matrix(p)
        if d == 1:
            g = -evaluate(da, F[:, 0], F[:, 1]) / evaluate(B, F[:, 0], F[:, 1])
        else:
            e = eta_n.value(p)
            g = -nform_ratio(
                wedge(wedge(da, 2, e, 1), 3, wedge_power(B, 2, d - 1), 2 * (d - 1)),
                wedge(e, 1, wedge_power(B, 2, d), 2 * d), s.n)
        return alpha(p) + g * eta_n.value(p)

    def seg_integral(a, b):
        # composite Simpson along the straight segment a -> b
        ts = np.linspace(0.0, 1.0, 2 * segments + 1)
        w = np.ones_like(ts)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        vals = np.array([one_form(a + t * (b - a)) @ (b - a) for t in ts])
        return float(np.sum(w * vals) / (3.0 * 2 * segments))

    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)

    def staircase(order):
        total, p = 0.0, base.copy()
        for m in order:
            nxt = p.copy()
            nxt[m] = target[m]
            total += seg_integral(p, nxt)
            p = nxt
        return total

    th1 = staircase(range(s.n))
    th2 = staircase(reversed(range(s.n)))
    return th1, th2, abs(th1 - th2)

"""Normal geodesics in frame coordinates.

The cometric Hamiltonian is H = (1/2) sum_{i<=k} h_i^2 in the frame
coordinates h_alpha(lambda) = <lambda, X_alpha>.  Hamilton's equations close
in (q, h):

    qdot   = sum_{i<=k} h_i X_i(q)
    hdot_a = sum_{i<=k, b} h_i c_{ia}^b(q) h_b

with the structural functions re-evaluated from the frame at each q.  The
right-hand side below avoids forming the full c tensor: with u solving
Frame(q)^T u = h,

    hdot_a = u . ( DX_a v - M X_a ),   v = sum h_i X_i,  M = sum h_i DX_i,

which costs one n x n solve per point per stage.  Integration is fixed-step
RK4 (bit-reproducible for Monte Carlo); energy drift is monitored but never
projected away, so integrator bugs stay visible.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import DEFAULTS
from .errors import IntegrationError
from .frames import Structure, as_points, grad_h, second_directional, structural_functions

_UNIT_TOL = DEFAULTS.unit_cylinder


@dataclass(frozen=True)
class CovectorCoords:
    """Frame coordinates (h_1, ..., h_n) of a covector at a base point."""

    h: np.ndarray
    k: int

    @classmethod
    def unit_cylinder(cls, h, k: int) -> "CovectorCoords":
        h = np.asarray(h, dtype=float)
        sq = float(np.sum(h[..., :k] ** 2))
        if abs(sq - 1.0) > _UNIT_TOL:
            raise ValueError(
                f"not on the unit cylinder: sum of first {k} squares is {sq!r}")
        return cls(h, k)

    def scaled(self, alpha: float) -> "CovectorCoords":
        return CovectorCoords(alpha * np.asarray(self.h, dtype=float), self.k)


@dataclass
class GeodesicState:
    q: np.ndarray
    h: np.ndarray
    t: float = 0.0


def hamiltonian(c: CovectorCoords) -> float:
    h = np.asarray(c.h, dtype=float)
    return 0.5 * float(np.sum(h[..., : c.k] ** 2))


def _eval_frame_raw(s: Structure, q: np.ndarray):
    """Field values and Jacobians as lists, no finiteness checks."""
    from .frames import jacobian
    cols = [np.asarray(f(q), dtype=float) for f in s.fields]
    if s.jacobians is not None and all(j is not None for j in s.jacobians):
        jacs = [np.asarray(j(q), dtype=float) for j in s.jacobians]
    else:
        jacs = [jacobian(s, a, q, check=False) for a in range(s.n)]
    return cols, jacs


def frame_and_jacobians(s: Structure, q: np.ndarray):
    """Frame matrix and stacked Jacobians with non-finite rows sanitized
    (identity frame / zero Jacobians) and flagged, for integrator loops."""
    n = s.n
    with np.errstate(all="ignore"):
        cols, jacs = _eval_frame_raw(s, q)
        F = np.stack(cols, axis=-1)
        Jst = np.stack(jacs, axis=-3)
        det = np.linalg.det(F)
    bad = (~(np.isfinite(F).all(axis=(-2, -1)) & np.isfinite(Jst).all(axis=(-3, -2, -1)))
           | ~np.isfinite(det) | (np.abs(det) <= 1e-300))
    if bad.any():
        F = np.where(bad[..., None, None], np.eye(n), F)
        Jst = np.where(bad[..., None, None, None], 0.0, Jst)
    return F, Jst, bad


def _cofactor_transpose_solve(cols, h):
    """Solve Frame^T u = h for n in {2, 3} by explicit cofactors; returns
    (u, det).  NaN-safe: non-finite input propagates, nothing raises.

    Frame has the fields as columns, so F[a][b] = cols[b][..., a]."""
    n = len(cols)
    if n == 2:
        f00, f10 = cols[0][..., 0], cols[0][..., 1]
        f01, f11 = cols[1][..., 0], cols[1][..., 1]
        det = f00 * f11 - f01 * f10
        u0 = (f11 * h[..., 0] - f10 * h[..., 1]) / det
        u1 = (-f01 * h[..., 0] + f00 * h[..., 1]) / det
        return np.stack([u0, u1], axis=-1), det
    c0, c1, c2 = cols
    f00, f10, f20 = c0[..., 0], c0[..., 1], c0[..., 2]
    f01, f11, f21 = c1[..., 0], c1[..., 1], c1[..., 2]
    f02, f12, f22 = c2[..., 0], c2[..., 1], c2[..., 2]
    cof00 = f11 * f22 - f12 * f21
    cof01 = f12 * f20 - f10 * f22
    cof02 = f10 * f21 - f11 * f20
    cof10 = f02 * f21 - f01 * f22
    cof11 = f00 * f22 - f02 * f20
    cof12 = f01 * f20 - f00 * f21
    cof20 = f01 * f12 - f02 * f11
    cof21 = f02 * f10 - f00 * f12
    cof22 = f00 * f11 - f01 * f10
    det = f00 * cof00 + f01 * cof01 + f02 * cof02
    h0, h1, h2 = h[..., 0], h[..., 1], h[..., 2]
    u0 = (cof00 * h0 + cof01 * h1 + cof02 * h2) / det
    u1 = (cof10 * h0 + cof11 * h1 + cof12 * h2) / det
    u2 = (cof20 * h0 + cof21 * h1 + cof22 * h2) / det
    return np.stack([u0, u1, u2], axis=-1), det


def _rhs(s: Structure, q: np.ndarray, h: np.ndarray):
    """Batched geodesic right-hand side; NaN states are frozen, and the
    returned mask marks them."""
    k, n = s.k, s.n
    with np.errstate(all="ignore"):
        cols, jacs = _eval_frame_raw(s, q)
        v = cols[0] * h[..., 0, None]
        M = jacs[0] * h[..., 0, None, None]
        for i in range(1, k):
            v = v + cols[i] * h[..., i, None]
            M = M + jacs[i] * h[..., i, None, None]
        if n in (2, 3):
            u, det = _cofactor_transpose_solve(cols, h)
        else:
            F = np.stack(cols, axis=-1)
            det = np.linalg.det(F)
            ok = np.isfinite(det) & (np.abs(det) > 1e-300) \
                & np.isfinite(F).all(axis=(-2, -1))
            Fs = np.where(ok[..., None, None], F, np.eye(n)) if not ok.all() else F
            u = np.linalg.solve(np.swapaxes(Fs, -1, -2), h[..., None])[..., 0]
        hdot = np.empty_like(h)
        r = np.einsum("...a,...ab->...b", u, M)          # u^T M, reused for all m
        for m in range(n):
            jv = np.einsum("...ab,...b->...a", jacs[m], v)
            hdot[..., m] = (np.einsum("...a,...a->...", u, jv)
                            - np.einsum("...a,...a->...", r, cols[m]))
        bad = (~np.isfinite(det) | (np.abs(det) <= 1e-300)
               | ~np.isfinite(v).all(axis=-1) | ~np.isfinite(hdot).all(axis=-1))
        if bad.any():
            v = np.where(bad[..., None], 0.0, v)
            hdot = np.where(bad[..., None], 0.0, hdot)
    return v, hdot, bad


def geodesic_rhs(s: Structure, state: GeodesicState):
    """Time derivative (qdot, hdot) of a geodesic state."""
    q, h = as_points(state.q), np.asarray(state.h, dtype=float)
    v, hdot, bad = _rhs(s, q, h)
    if bad.any():
        raise IntegrationError("degenerate or non-finite frame in geodesic RHS",
                               t_fail=state.t)
    return v, hdot


@dataclass
class GeodesicResult:
    q: np.ndarray                       # final positions (..., n)
    h: np.ndarray                       # final frame coordinates (..., n)
    t: float
    energy_drift: np.ndarray            # max_t |2H(t) - 2H(0)| per trajectory
    failed: np.ndarray                  # mask of trajectories that went bad
    trajectory: Optional[list] = None   # [(t, q, h, drift)] when recorded


def integrate_geodesic(s: Structure, q0, h0, t: float, step: float = None,
                       record: bool = False,
                       on_failure: str = "raise") -> GeodesicResult:
    """Fixed-step RK4 for the geodesic flow over [0, t].

    on_failure: 'raise' aborts with the failure time, 'mask' freezes bad
    trajectories (their entries stay NaN) and reports them in the mask.
    """
    if t < 0:
        raise ValueError("duration must be nonnegative")
    if step is None:
        step = DEFAULTS.ode_step
    if step <= 0:
        raise ValueError("step must be positive")
    q = np.array(as_points(q0), dtype=float, copy=True)
    h = np.array(h0, dtype=float, copy=True)
    if q.shape != h.shape:
        q, h = np.broadcast_arrays(q, h)
        q, h = np.array(q, copy=True), np.array(h, copy=True)

    n_full = int(np.floor(t / step + 1e-12))
    remainder = t - n_full * step
    sizes = [step] * n_full + ([remainder] if remainder > 1e-15 else [])

    e0 = np.sum(h[..., : s.k] ** 2, axis=-1)
    drift = np.zeros_like(e0)
    failed = np.zeros(q.shape[:-1], dtype=bool)
    rows = [(0.0, q.copy(), h.copy(), np.zeros_like(e0))] if record else None

    now = 0.0
    for dt in sizes:
        k1q, k1h, b1 = _rhs(s, q, h)
        k2q, k2h, b2 = _rhs(s, q + 0.5 * dt * k1q, h + 0.5 * dt * k1h)
        k3q, k3h, b3 = _rhs(s, q + 0.5 * dt * k2q, h + 0.5 * dt * k2h)
        k4q, k4h, b4 = _rhs(s, q + dt * k3q, h + dt * k3h)
        q = q + (dt / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
        h = h + (dt / 6.0) * (k1h + 2 * k2h + 2 * k3h + k4h)
        now += dt
        bad = b1 | b2 | b3 | b4 | ~np.isfinite(q).all(axis=-1) | ~np.isfinite(h).all(axis=-1)
        new_failures = bad & ~failed
        if new_failures.any():
            if on_failure == "raise":
                raise IntegrationError("geodesic left the chart or went non-finite",
                                       t_fail=now)
            failed |= new_failures
            q[new_failures] = np.nan
            h[new_failures] = np.nan
        e = np.sum(h[..., : s.k] ** 2, axis=-1)
        with np.errstate(invalid="ignore"):
            drift = np.maximum(drift, np.abs(e - e0))
        if record:
            rows.append((now, q.copy(), h.copy(), drift.copy()))

    return GeodesicResult(q=q, h=h, t=t, energy_drift=drift, failed=failed,
                          trajectory=rows)


def exp_map(s: Structure, q, c: CovectorCoords, t: float, step: float = None) -> np.ndarray:
    """Endpoint of the normal geodesic from q with initial covector c."""
    res = integrate_geodesic(s, q, c.h, t, step, on_failure="raise")
    return res.q


def exp_map_batch(s: Structure, q0, h0, t: float, step: float = None) -> GeodesicResult:
    """Batched exponential map for Monte Carlo; failures are masked, not raised."""
    return integrate_geodesic(s, q0, h0, t, step, on_failure="mask")


def taylor_residual(s: Structure, phi, q, c: CovectorCoords, t: float,
                    step: float = None) -> float:
    """phi(geodesic endpoint) minus its second-order frame expansion.

    The expansion is
        phi(q) + t h_i X_i(phi)
              + (t^2/2) [ h_j c_{ji}^a h_a X_i(phi) + h_i h_j X_j(X_i(phi)) ]
    with i, j over the horizontal range and a over the full frame; the
    quadratic frame-Hessian term is evaluated as Y(Y(phi)) for the single
    combination field Y = sum h_i X_i.
    """
    q = as_points(q)
    h = np.asarray(c.h, dtype=float)
    k = s.k
    end = exp_map(s, q, c, t, step)
    phi0 = np.asarray(phi(q), dtype=float)
    xphi = grad_h(s, phi, q)                              # (..., k)
    ctens = structural_functions(s, q).c
    lin = np.einsum("...i,...i->...", h[..., :k], xphi)
    curvature = np.einsum("...j,...jia,...a,...i->...",
                          h[..., :k], ctens[..., :k, :k, :], h, xphi)
    hess = second_directional(s, phi, h[..., :k], q)
    pred = phi0 + t * lin + 0.5 * t * t * (curvature + hess)
    return np.asarray(phi(end), dtype=float) - pred

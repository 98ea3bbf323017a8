"""Monte Carlo engine: geodesic random walks with adapted measures.

A single draw is a covector on the unit cylinder: uniform on the horizontal
unit sphere (h_1..h_k) times a vertical law (h_{k+1}..h_n) with finite
second moments (dirac / gaussian / uniform).  The single-step estimator

    (2k/t^2) * ( E[ phi(exp_q(t, lambda)) ] - phi(q) )

converges to the walk-limit operator as t -> 0.  A full walk advances
wall-clock time t_step per step while following the geodesic for duration
sqrt(2 k t_step) (parabolic scaling), so the estimator and the walk share
one step primitive parameterized by geodesic duration.

The reference diffusion integrates the Stratonovich SDE

    dX = sqrt(2) sum_i X_i(X) o dW^i + b(X) dt,   b = sum_{i,j<=k} c_ji^j X_i

with the Heun predictor-corrector, whose generator is the same walk-limit
operator.

Randomness: every path owns a stream derived from (seed, path index) via
SeedSequence spawning, so results do not depend on how paths are
partitioned across workers; discarded draws are counted, never silent.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import DEFAULTS
from .errors import InputError, IntegrationError
from .frames import Structure, as_points, structural_functions
from .geodesics import CovectorCoords, exp_map_batch

_LAWS = ("dirac", "gaussian", "uniform")


@dataclass(frozen=True)
class MeasureSpec:
    """Adapted measure on the unit cylinder: uniform horizontal sphere times
    a vertical law.  All three laws have finite second moments."""

    vertical_law: str = "dirac"
    vertical_scale: float = 1.0        # sigma (gaussian) or half-width (uniform)
    rng_seed: int = 0

    def __post_init__(self):
        if self.vertical_law not in _LAWS:
            raise InputError(f"vertical law must be one of {_LAWS}")
        if self.vertical_scale < 0:
            raise InputError("vertical scale must be nonnegative")


def _draw_batch(s: Structure, m: MeasureSpec, rng, count: int) -> np.ndarray:
    k, nv = s.k, s.n - s.k
    g = rng.standard_normal((count, k))
    norms = np.linalg.norm(g, axis=-1, keepdims=True)
    norms[norms == 0] = 1.0
    sphere = g / norms
    if nv == 0:
        return sphere
    if m.vertical_law == "dirac":
        vert = np.zeros((count, nv))
    elif m.vertical_law == "gaussian":
        vert = m.vertical_scale * rng.standard_normal((count, nv))
    else:
        vert = rng.uniform(-m.vertical_scale, m.vertical_scale, (count, nv))
    return np.concatenate([sphere, vert], axis=-1)


def sample_cylinder(q, s: Structure, m: MeasureSpec, rng) -> CovectorCoords:
    """One adapted draw at q (the measure is the same in frame coordinates
    at every point; q is kept for signature symmetry)."""
    h = _draw_batch(s, m, rng, 1)[0]
    return CovectorCoords(h, s.k)


def sample_cylinder_batch(s: Structure, m: MeasureSpec, rng, count: int) -> np.ndarray:
    return _draw_batch(s, m, rng, count)


@dataclass
class EstimateResult:
    mean: float
    std_error: float
    n_effective: int
    n_discarded: int
    t: float
    normalization: float              # 2k/t^2

    def asdict(self):
        return {"mean": self.mean, "std_error": self.std_error,
                "n_effective": self.n_effective, "n_discarded": self.n_discarded,
                "t": self.t, "normalization": self.normalization}


def single_step_estimates(s: Structure, phis: dict, q, t: float, n_draws: int,
                          m: MeasureSpec, ode_step: float = None,
                          chunk: int = None) -> dict:
    """Single-step estimates for several test functions sharing one batch of
    geodesic endpoints (the integration dominates the cost)."""
    if t <= 0 or n_draws < 1:
        raise ValueError("need t > 0 and at least one draw")
    q = as_points(q)
    if chunk is None:
        chunk = DEFAULTS.mc_chunk
    norm = 2.0 * s.k / (t * t)
    labels = list(phis)
    phi0 = {lb: float(np.asarray(phis[lb](q))) for lb in labels}
    n_chunks = math.ceil(n_draws / chunk)
    children = np.random.SeedSequence(m.rng_seed).spawn(n_chunks)
    s1 = {lb: 0.0 for lb in labels}
    s2 = {lb: 0.0 for lb in labels}
    n_eff = {lb: 0 for lb in labels}
    n_disc = 0
    for ci in range(n_chunks):
        cn = min(chunk, n_draws - ci * chunk)
        rng = np.random.default_rng(children[ci])
        draws = _draw_batch(s, m, rng, cn)
        q_batch = np.broadcast_to(q, (cn, s.n)).copy()
        res = exp_map_batch(s, q_batch, draws, t, ode_step)
        n_disc += int(res.failed.sum())
        for lb in labels:
            with np.errstate(invalid="ignore"):
                vals = np.asarray(phis[lb](res.q), dtype=float)
            good = ~res.failed & np.isfinite(vals)
            # accumulate centered at phi(q): exact zero for constant phi and
            # no cancellation between the tiny increment and the base value
            vals = vals[good] - phi0[lb]
            s1[lb] += float(vals.sum())
            s2[lb] += float((vals * vals).sum())
            n_eff[lb] += int(good.sum())
    if n_disc > DEFAULTS.discard_fraction * n_draws or min(n_eff.values()) == 0:
        raise IntegrationError(
            f"{n_disc} of {n_draws} draws failed to integrate (> "
            f"{100 * DEFAULTS.discard_fraction:.0f}% discards)")
    out = {}
    for lb in labels:
        ne = n_eff[lb]
        mean_inc = s1[lb] / ne
        var = max(s2[lb] / ne - mean_inc * mean_inc, 0.0) * ne / max(ne - 1, 1)
        out[lb] = EstimateResult(mean=norm * mean_inc,
                                 std_error=norm * math.sqrt(var / ne),
                                 n_effective=ne, n_discarded=n_disc, t=t,
                                 normalization=norm)
    return out


def single_step_estimate(s: Structure, phi, q, t: float, n_draws: int,
                         m: MeasureSpec, ode_step: float = None,
                         chunk: int = None) -> EstimateResult:
    """Monte Carlo estimate of the walk-limit operator applied to phi at q."""
    return single_step_estimates(s, {"phi": phi}, q, t, n_draws, m,
                                 ode_step, chunk)["phi"]


@dataclass(frozen=True)
class WalkConfig:
    """Parabolically scaled walk: each step advances wall-clock time t_step
    while following a unit-speed geodesic for duration sqrt(2 k t_step)."""

    t_step: float
    n_steps: int
    n_paths: int
    ode_step: Optional[float] = None   # default: max(geodesic_duration/100, 1e-4)
    record_paths: bool = False

    def __post_init__(self):
        if self.t_step <= 0:
            raise InputError("t_step must be positive")
        if self.n_steps < 0 or self.n_paths < 1:
            raise InputError("need n_steps >= 0 and n_paths >= 1")

    def geodesic_duration(self, k: int) -> float:
        return math.sqrt(2.0 * k * self.t_step)


@dataclass
class WalkResult:
    endpoints: np.ndarray              # (n_paths, n); NaN rows for failures
    step_arclength: np.ndarray         # (n_paths, n_steps)
    n_discarded: int
    total_time: float
    geodesic_duration: float
    trajectories: Optional[np.ndarray] = None   # (n_steps+1, n_paths, n)

    def regularity(self, tol: float = 1e-6):
        """Fraction of steps whose integrated arc length exceeds the spatial
        scale by more than tol (should be 0: unit-speed geodesic steps)."""
        good = np.isfinite(self.step_arclength)
        if not good.any():
            return {"max_arclength": float("nan"), "fraction_exceeding": 0.0}
        excess = self.step_arclength[good] > self.geodesic_duration * (1.0 + tol)
        return {"max_arclength": float(np.max(self.step_arclength[good])),
                "fraction_exceeding": float(np.mean(excess))}


def _per_path_draws(s: Structure, m: MeasureSpec, n_paths: int, n_steps: int):
    """(n_paths, n_steps, n) covector draws, one spawned stream per path."""
    children = np.random.SeedSequence(m.rng_seed).spawn(max(n_paths, 1))
    out = np.empty((n_paths, n_steps, s.n))
    for p in range(n_paths):
        rng = np.random.default_rng(children[p])
        out[p] = _draw_batch(s, m, rng, n_steps)
    return out


def simulate_walk(s: Structure, q0, cfg: WalkConfig, m: MeasureSpec) -> WalkResult:
    """Geodesic random walk from q0; reproducible per (seed, path index)."""
    q0 = as_points(q0)
    t_geo = cfg.geodesic_duration(s.k)
    ode = cfg.ode_step if cfg.ode_step is not None else max(t_geo / 100.0, 1e-4)
    draws = _per_path_draws(s, m, cfg.n_paths, cfg.n_steps)
    q = np.broadcast_to(q0, (cfg.n_paths, s.n)).copy()
    failed = np.zeros(cfg.n_paths, dtype=bool)
    arcs = np.full((cfg.n_paths, cfg.n_steps), np.nan)
    traj = [q.copy()] if cfg.record_paths else None
    for step in range(cfg.n_steps):
        res = exp_map_batch(s, q, draws[:, step, :], t_geo, ode)
        q = res.q
        failed |= res.failed
        with np.errstate(invalid="ignore"):
            arcs[:, step] = t_geo * np.sqrt(np.sum(res.h[..., : s.k] ** 2, axis=-1))
        if cfg.record_paths:
            traj.append(q.copy())
    n_disc = int(failed.sum())
    if n_disc > DEFAULTS.discard_fraction * cfg.n_paths:
        raise IntegrationError(
            f"{n_disc} of {cfg.n_paths} walk paths failed (> "
            f"{100 * DEFAULTS.discard_fraction:.0f}% discards)")
    q[failed] = np.nan
    return WalkResult(endpoints=q, step_arclength=arcs, n_discarded=n_disc,
                      total_time=cfg.t_step * cfg.n_steps,
                      geodesic_duration=t_geo,
                      trajectories=None if traj is None else np.stack(traj))


@dataclass
class DiffusionResult:
    endpoints: np.ndarray
    n_discarded: int
    total_time: float


def drift_vector(s: Structure, q: np.ndarray) -> np.ndarray:
    """b(q) = sum_{i,j<=k} c_ji^j X_i(q) in coordinates."""
    c = structural_functions(s, q).c
    d = np.einsum("...jij->...i", c[..., : s.k, : s.k, : s.k])
    F = s.frame_matrix(q)
    return np.einsum("...ai,...i->...a", F[..., :, : s.k], d)


def _diffusion_rhs(s: Structure, q: np.ndarray, dw: np.ndarray, dt: float):
    """sqrt(2) sum_i X_i dW_i + b dt, sanitized for non-finite rows."""
    from .geodesics import frame_and_jacobians
    k = s.k
    F, Jst, bad = frame_and_jacobians(s, q)
    with np.errstate(all="ignore"):
        # structural drift via the frame solve, restricted to horizontal pairs
        pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
        d = np.zeros(q.shape[:-1] + (k,))
        if pairs:
            br = [np.einsum("...ab,...b->...a", Jst[..., j, :, :], F[..., :, i])
                  - np.einsum("...ab,...b->...a", Jst[..., i, :, :], F[..., :, j])
                  for (i, j) in pairs]
            rhs_cols = np.stack(br, axis=-1)
            coef = np.linalg.solve(F, rhs_cols)          # (..., n, P)
            for p, (i, j) in enumerate(pairs):
                # c_{ij}^. = coef[..., :, p]; d_m = sum_j c_{jm}^j
                d[..., j] += coef[..., i, p]             # c_ij^i contributes to d_j
                d[..., i] -= coef[..., j, p]             # c_ji^j = -c_ij^j
        drift = np.einsum("...ai,...i->...a", F[..., :, :k], d)
        diff = math.sqrt(2.0) * np.einsum("...ai,...i->...a", F[..., :, :k], dw)
        out = diff + drift * dt
        out = np.where(bad[..., None], 0.0, out)
    return out, bad


def reference_diffusion(s: Structure, q0, T: float, n_paths: int, seed: int,
                        step: float = None) -> DiffusionResult:
    """Stratonovich-Heun integration of the hypoelliptic diffusion whose
    generator is the walk-limit operator of the structure's complement."""
    q0 = as_points(q0)
    if step is None:
        step = DEFAULTS.sde_step
    n_full = int(np.floor(T / step + 1e-12))
    remainder = T - n_full * step
    sizes = [step] * n_full + ([remainder] if remainder > 1e-15 else [])
    children = np.random.SeedSequence(seed).spawn(max(n_paths, 1))
    dwn = np.empty((n_paths, len(sizes), s.k))
    for p in range(n_paths):
        rng = np.random.default_rng(children[p])
        dwn[p] = rng.standard_normal((len(sizes), s.k))
    q = np.broadcast_to(q0, (n_paths, s.n)).copy()
    failed = np.zeros(n_paths, dtype=bool)

    for si, dt in enumerate(sizes):
        dw = dwn[:, si, :] * math.sqrt(dt)
        v1, b1 = _diffusion_rhs(s, q, dw, dt)
        pred = q + v1
        v2, b2 = _diffusion_rhs(s, pred, dw, dt)
        q = q + 0.5 * (v1 + v2)
        failed |= b1 | b2 | ~np.isfinite(q).all(axis=-1)
    n_disc = int(failed.sum())
    if n_disc > DEFAULTS.discard_fraction * n_paths:
        raise IntegrationError(
            f"{n_disc} of {n_paths} diffusion paths went non-finite")
    q[failed] = np.nan
    return DiffusionResult(endpoints=q, n_discarded=n_disc, total_time=T)


def endpoint_statistics(endpoints: np.ndarray, fns) -> dict:
    """Per-function mean and standard error over finite endpoint rows."""
    good = np.isfinite(endpoints).all(axis=-1)
    pts = endpoints[good]
    out = {}
    for label, fn in fns.items():
        vals = np.asarray(fn(pts), dtype=float)
        n = max(vals.size, 1)
        se = float(np.std(vals, ddof=1) / math.sqrt(n)) if vals.size > 1 else float("nan")
        out[label] = {"mean": float(np.mean(vals)) if vals.size else float("nan"),
                      "std_error": se, "n": int(vals.size)}
    return out

"""Runnable invariant suites for the shipped models.

Each check returns a CheckResult; the `check` CLI subcommand runs a
selection and reports machine-readable pass/fail.  These are trimmed-down
siblings of the pytest suite, sized to run in seconds.

`mutate="chi-sign"` flips the sign of the gap field inside the operator
identity check; the suite must then fail (negative control for the
checker itself).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import corank1, models, operators, randomwalk
from .compatibility import CarnotSpec, carnot_complements, corank1_solve, roundtrip_chi
from .forms import exterior_d
from .frames import (exp_scaled, fd_jacobian, grad_h, jacobian, lebesgue,
                     lie_bracket, scaled, structural_functions)
from .geodesics import CovectorCoords, exp_map, integrate_geodesic


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def asdict(self):
        return {"suite": self.suite, "name": self.name, "passed": bool(self.passed),
                "value": float(self.value), "threshold": float(self.threshold),
                "detail": self.detail}


def _zoo():
    return [models.heisenberg3(),
            models.carnot_corank1([[0.0, 1.0], [-1.0, 0.0]]),
            models.carnot_corank1([[0, 1, 0], [-1, 0, 0], [0, 0, 0]]),
            models.quasicontact_r4("exp"),
            models.contact3_perturbed()]


def _points(rng, n, count=30, radius=1.0):
    return rng.uniform(-radius, radius, (count, n))


def random_polynomial(rng, n, degree=3, terms=6):
    """Random sparse polynomial with exponents of total degree <= degree."""
    chosen = []
    for _ in range(terms):
        e = rng.integers(0, degree + 1, size=n)
        while e.sum() > degree:
            e[rng.integers(0, n)] = max(e[rng.integers(0, n)] - 1, 0)
        chosen.append((float(rng.uniform(-1, 1)), e.copy()))

    def f(q):
        out = np.zeros(np.asarray(q).shape[:-1])
        for c, e in chosen:
            mono = np.ones(np.asarray(q).shape[:-1])
            for m in range(n):
                if e[m]:
                    mono = mono * q[..., m] ** int(e[m])
            out = out + c * mono
        return out

    return f


# ---------------------------------------------------------------------------
# core

def check_antisymmetry():
    rng = np.random.default_rng(100)
    worst = 0.0
    for m in _zoo():
        pts = _points(rng, m.structure.n)
        worst = max(worst, structural_functions(m.structure, pts).antisymmetry_defect())
    return CheckResult("core", "structural_antisymmetry", worst < 1e-8, worst, 1e-8)


def check_jacobi_step2():
    s = models.heisenberg3().structure
    rng = np.random.default_rng(101)
    pts = _points(rng, 3, 10)
    # [X1, [X1, X2]] must vanish (step-2 nilpotency); bracket the bracket field
    def inner(q):
        return np.stack([lie_bracket(s, 0, 1, p) for p in np.atleast_2d(q)]
                        ).reshape(np.asarray(q).shape)
    worst = 0.0
    for p in pts:
        Ji = fd_jacobian(inner, p)
        J1 = jacobian(s, 0, p)
        val = Ji @ s.field_value(0, p) - J1 @ inner(p)
        worst = max(worst, float(np.max(np.abs(val))))
    return CheckResult("core", "heisenberg_nested_bracket", worst < 1e-6, worst, 1e-6)


def check_leibniz():
    rng = np.random.default_rng(102)
    worst = 0.0
    for m in _zoo()[:2]:
        s = m.structure
        pts = _points(rng, s.n, 15)
        f = random_polynomial(rng, s.n, 2)
        g = random_polynomial(rng, s.n, 2)
        lhs = grad_h(s, lambda p: f(p) * g(p), pts)
        rhs = f(pts)[..., None] * grad_h(s, g, pts) + g(pts)[..., None] * grad_h(s, f, pts)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return CheckResult("core", "gradient_leibniz", worst < 1e-5, worst, 1e-5)


def check_fd_vs_analytic():
    rng = np.random.default_rng(103)
    worst = 0.0
    for m in _zoo():
        s = m.structure
        pts = _points(rng, s.n, 10)
        for a in range(s.n):
            fd = fd_jacobian(s.fields[a], pts)
            an = jacobian(s, a, pts)
            worst = max(worst, float(np.max(np.abs(fd - an))))
    return CheckResult("core", "fd_matches_analytic_jacobian", worst < 1e-8, worst, 1e-8)


# ---------------------------------------------------------------------------
# geodesics

def check_energy():
    rng = np.random.default_rng(110)
    worst = 0.0
    for m in _zoo():
        s = m.structure
        g = rng.normal(size=s.k)
        h0 = np.concatenate([g / np.linalg.norm(g), rng.normal(size=s.n - s.k)])
        res = integrate_geodesic(s, np.zeros(s.n), h0, 1.0, 1e-3)
        worst = max(worst, float(np.max(res.energy_drift)))
    return CheckResult("geodesics", "energy_drift", worst < 1e-10, worst, 1e-10)


def check_rescaling():
    s = models.heisenberg3().structure
    h = np.array([0.6, 0.8, 1.0])
    c = CovectorCoords(h, 2)
    worst = 0.0
    for alpha in (0.5, 2.0):
        a = exp_map(s, np.zeros(3), CovectorCoords(alpha * h, 2), 0.5)
        b = exp_map(s, np.zeros(3), c, alpha * 0.5)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return CheckResult("geodesics", "covector_rescaling", worst < 1e-8, worst, 1e-8)


def check_rk4_order():
    s = models.heisenberg3().structure
    c = CovectorCoords(np.array([0.6, 0.8, 2.0]), 2)
    ref = exp_map(s, np.zeros(3), c, 1.0, step=0.02 / 4)
    e1 = np.max(np.abs(exp_map(s, np.zeros(3), c, 1.0, step=0.02) - ref))
    e2 = np.max(np.abs(exp_map(s, np.zeros(3), c, 1.0, step=0.01) - ref))
    ratio = e1 / max(e2, 1e-300)
    return CheckResult("geodesics", "rk4_order", 8.0 < ratio < 40.0, ratio, 16.0,
                       detail="error ratio for halved step (ideal 16)")


# ---------------------------------------------------------------------------
# operators

def _volumes_for(m):
    vols = [lebesgue(), exp_scaled(lebesgue(), lambda p: p[..., 0])]
    if m.eta is not None and m.structure.k == m.structure.n - 1:
        vols.append(corank1.popp_volume(m.structure, m.eta))
    return vols


def check_gap_identity(mutate=None):
    rng = np.random.default_rng(120)
    worst = 0.0
    for m in _zoo():
        s = m.structure
        pts = _points(rng, s.n, 10)
        phi = random_polynomial(rng, s.n, 3)
        for om in _volumes_for(m):
            mac = operators.macroscopic(s, phi, om, pts).value
            mic = operators.microscopic(s, phi, pts).value
            ch = operators.chi(s, om, pts)
            if mutate == "chi-sign":
                ch = -ch
            gap = mac - mic - np.einsum("...i,...i->...", ch, grad_h(s, phi, pts))
            worst = max(worst, float(np.max(np.abs(gap))))
    return CheckResult("operators", "chi_gap_identity", worst < 1e-5, worst, 1e-5)


def check_change_of_volume():
    rng = np.random.default_rng(121)
    worst = 0.0
    for m in _zoo():
        s = m.structure
        pts = _points(rng, s.n, 8)
        phi = random_polynomial(rng, s.n, 3)
        g = random_polynomial(rng, s.n, 2)
        om = lebesgue()
        om2 = exp_scaled(om, g)
        a = operators.macroscopic(s, phi, om2, pts).value
        b = operators.macroscopic(s, phi, om, pts).value
        corr = np.einsum("...i,...i->...", grad_h(s, g, pts), grad_h(s, phi, pts))
        worst = max(worst, float(np.max(np.abs(a - b - corr))))
    return CheckResult("operators", "change_of_volume", worst < 1e-5, worst, 1e-5)


def check_no_constant_term():
    rng = np.random.default_rng(122)
    const = lambda p: np.full(np.asarray(p).shape[:-1], 3.7)
    worst = 0.0
    for m in _zoo():
        s = m.structure
        pts = _points(rng, s.n, 10)
        worst = max(worst, float(np.max(np.abs(operators.macroscopic(s, const, lebesgue(), pts).value))))
        worst = max(worst, float(np.max(np.abs(operators.microscopic(s, const, pts).value))))
    return CheckResult("operators", "no_zeroth_order_term", worst < 1e-9, worst, 1e-9)


def check_principal_symbol():
    rng = np.random.default_rng(123)
    worst = 0.0
    for m in _zoo():
        s = m.structure
        pts = _points(rng, s.n, 5)
        ell_vec = rng.uniform(-1, 1, s.n)
        ell = lambda p: p @ ell_vec
        sym = np.sum(grad_h(s, ell, pts) ** 2, axis=-1)       # 2H(d ell)
        for op in (lambda p_: operators.microscopic(s, p_, pts).value,
                   lambda p_: operators.macroscopic(s, p_, lebesgue(), pts).value):
            plus = op(lambda p: np.exp(ell(p)))
            minus = op(lambda p: np.exp(-ell(p)))
            lead = 0.5 * (plus * np.exp(-ell(pts)) + minus * np.exp(ell(pts)))
            rel = np.abs(lead - sym) / np.maximum(np.abs(sym), 1e-12)
            worst = max(worst, float(np.max(rel)))
    return CheckResult("operators", "principal_symbol", worst < 1e-4, worst, 1e-4)


# ---------------------------------------------------------------------------
# corank-1 machinery

def check_annihilator():
    rng = np.random.default_rng(130)
    worst = 0.0
    for m in _zoo():
        if m.eta is None:
            continue
        s = m.structure
        pts = _points(rng, s.n, 30)
        F = s.frame_matrix(pts)
        e = m.eta.value(pts)
        for i in range(s.k):
            worst = max(worst, float(np.max(np.abs(
                np.einsum("...a,...a->...", e, F[..., :, i])))))
    return CheckResult("corank1", "eta_annihilates_distribution", worst < 1e-10,
                       worst, 1e-10)


def check_normalization_idempotent():
    m = models.contact3_perturbed()
    s = m.structure
    rng = np.random.default_rng(131)
    pts = _points(rng, 3, 10)
    once = corank1.normalized_one_form(s, m.eta)
    jm, scale = corank1.j_matrix(s, once, pts)
    worst = float(np.max(np.abs(scale - 1.0)))
    return CheckResult("corank1", "normalization_idempotence", worst < 1e-12,
                       worst, 1e-12)


def check_popp():
    rng = np.random.default_rng(132)
    m = models.heisenberg3()
    pts = _points(rng, 3, 10)
    rho = corank1.popp_corank1(m.structure, m.eta, pts)
    err = float(np.max(np.abs(rho - 1.0 / math.sqrt(2.0))))
    mr = models.quasicontact_r4("exp")
    pts4 = _points(rng, 4, 10)
    rho4 = corank1.popp_corank1(mr.structure, mr.eta, pts4)
    target = np.exp(pts4[:, 2]) ** 2.5 / math.sqrt(2.0)
    err = max(err, float(np.max(np.abs(rho4 - target) / target)))
    return CheckResult("corank1", "popp_closed_forms", err < 1e-6, err, 1e-6)


def check_reeb_residuals():
    m = models.contact3_perturbed()
    s = m.structure
    rng = np.random.default_rng(133)
    worst = 0.0
    eta_n = corank1.normalized_one_form(s, m.eta)
    for p in _points(rng, 3, 8):
        Z = corank1.reeb(s, eta_n, p)
        B = exterior_d(eta_n.coeffs, 1, p)
        F = s.frame_matrix(p)
        worst = max(worst, abs(float(eta_n.pair(p, Z)) - 1.0))
        for i in range(2):
            worst = max(worst, abs(float(Z @ B @ F[:, i])))
    return CheckResult("corank1", "reeb_defining_residuals", worst < 1e-9, worst, 1e-9)


def check_eigen_generators():
    m = models.quasicontact_r4("exp")
    rng = np.random.default_rng(134)
    worst = 0.0
    for p in _points(rng, 4, 6):
        x, y, lam = corank1.eigen_generators(m.structure, m.eta, p, 1)
        worst = max(worst, abs(float(x @ y)), abs(float(x @ x) - 1.0),
                    abs(float(y @ y) - 1.0))
    return CheckResult("corank1", "eigen_generator_orthonormality", worst < 1e-10,
                       worst, 1e-10)


# ---------------------------------------------------------------------------
# compatibility

def check_roundtrip():
    worst = 0.0
    rng = np.random.default_rng(140)
    for mk in (models.heisenberg3(), models.contact3_perturbed()):
        s = mk.structure
        popp = corank1.popp_volume(s, mk.eta)
        q = rng.uniform(-0.5, 0.5, 3)
        rep = corank1_solve(s, popp, mk.eta, q)
        if rep.status == "none":
            return CheckResult("compatibility", "solve_roundtrip", False,
                               rep.residual, 1e-5, detail="unexpected 'none'")
        near = q + rng.uniform(-0.05, 0.05, (20, 3))
        def x0_field(p, _s=s, _pp=popp, _eta=mk.eta):
            from .compatibility import contact_complement
            pp = np.asarray(p, dtype=float)
            if pp.ndim == 1:
                return contact_complement(_s, _pp, _eta, pp)
            return np.stack([contact_complement(_s, _pp, _eta, row) for row in pp])
        vals = roundtrip_chi(s, popp, x0_field, near)
        worst = max(worst, float(np.max(vals)))
    return CheckResult("compatibility", "solve_roundtrip", worst < 1e-5, worst, 1e-5)


def check_volume_uniqueness():
    m = models.heisenberg3()
    s = m.structure
    rng = np.random.default_rng(141)
    pts = _points(rng, 3, 20)
    om = lebesgue()
    base = operators.chi(s, om, pts)
    scaled_diff = float(np.max(np.abs(operators.chi(s, scaled(om, 3.7), pts) - base)))
    broken = float(np.min(np.linalg.norm(
        operators.chi(s, exp_scaled(om, lambda p: p[..., 0]), pts), axis=-1)))
    ok = scaled_diff < 1e-10 and broken > 0.5
    return CheckResult("compatibility", "volume_uniqueness", ok, scaled_diff, 1e-10,
                       detail=f"e^x volume |chi| >= {broken:.3f} (want > 0.5)")


def check_kernel_law():
    worst_ok = True
    for A in ([[0.0, 2.0], [-2.0, 0.0]],
              [[0, 1, 0], [-1, 0, 0], [0, 0, 0]],
              [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]):
        A = np.asarray(A, dtype=float)
        fam = carnot_complements(CarnotSpec.corank1(A))
        ker = int(np.sum(np.linalg.svd(A, compute_uv=False) < 1e-12))
        worst_ok = worst_ok and (fam.dim == ker)
    return CheckResult("compatibility", "carnot_kernel_dimension", worst_ok,
                       0.0, 0.0, detail="family dim == dim ker A on 3 cases")


def check_d_squared():
    rng = np.random.default_rng(142)
    n = 3
    coeff_fns = [random_polynomial(rng, n, 2) for _ in range(n)]

    def one_form(q):
        return np.stack([f(q) for f in coeff_fns], axis=-1)

    worst = 0.0
    for p in _points(rng, n, 5):
        dd = exterior_d(lambda r: exterior_d(one_form, 1, r), 2, p)
        worst = max(worst, float(np.max(np.abs(dd))))
    return CheckResult("compatibility", "exterior_d_squared", worst < 1e-7, worst, 1e-7)


# ---------------------------------------------------------------------------
# random walks

def check_sphere_moments():
    s = models.heisenberg3().structure
    spec = randomwalk.MeasureSpec("gaussian", 1.0, rng_seed=7)
    rng = np.random.default_rng(7)
    d = randomwalk.sample_cylinder_batch(s, spec, rng, 400_000)
    worst = float(np.max(np.abs(d[:, :2].mean(axis=0))))
    second = abs(float((d[:, 0] ** 2).mean()) - 0.5)
    cross = abs(float((d[:, 0] * d[:, 1]).mean()))
    val = max(worst, second, cross)
    return CheckResult("randomwalk", "cylinder_moments", val < 5e-3, val, 5e-3)


def check_seed_determinism():
    s = models.heisenberg3().structure
    cfg = randomwalk.WalkConfig(t_step=0.02, n_steps=10, n_paths=64)
    m = randomwalk.MeasureSpec("gaussian", 1.0, rng_seed=5)
    a = randomwalk.simulate_walk(s, np.zeros(3), cfg, m)
    b = randomwalk.simulate_walk(s, np.zeros(3), cfg, m)
    same = np.array_equal(a.endpoints, b.endpoints)
    return CheckResult("randomwalk", "seed_determinism", same, 0.0, 0.0)


def check_dirac_regularity():
    s = models.heisenberg3().structure
    cfg = randomwalk.WalkConfig(t_step=0.02, n_steps=20, n_paths=128)
    m = randomwalk.MeasureSpec("dirac", rng_seed=6)
    res = randomwalk.simulate_walk(s, np.zeros(3), cfg, m)
    reg = res.regularity()
    return CheckResult("randomwalk", "dirac_step_regularity",
                       reg["fraction_exceeding"] == 0.0,
                       reg["fraction_exceeding"], 0.0,
                       detail=f"max arclength {reg['max_arclength']:.6f} vs "
                              f"scale {res.geodesic_duration:.6f}")


def check_estimator_quick():
    s = models.heisenberg3().structure
    est = randomwalk.single_step_estimate(
        s, lambda p: p[..., 0] ** 2, np.zeros(3), 0.02, 150_000,
        randomwalk.MeasureSpec("dirac", rng_seed=9))
    err = abs(est.mean - 2.0)
    tol = 3 * est.std_error + 0.1
    return CheckResult("randomwalk", "single_step_estimator", err < tol, err, tol,
                       detail=f"estimate {est.mean:.4f} vs 2.0")


SUITES = {
    "core": [check_antisymmetry, check_jacobi_step2, check_leibniz,
             check_fd_vs_analytic],
    "geodesics": [check_energy, check_rescaling, check_rk4_order],
    "operators": [check_gap_identity, check_change_of_volume,
                  check_no_constant_term, check_principal_symbol],
    "corank1": [check_annihilator, check_normalization_idempotent, check_popp,
                check_reeb_residuals, check_eigen_generators],
    "compatibility": [check_roundtrip, check_volume_uniqueness, check_kernel_law,
                      check_d_squared],
    "randomwalk": [check_sphere_moments, check_seed_determinism,
                   check_dirac_regularity, check_estimator_quick],
}


def run_checks(selector: str = "all", mutate: str = None):
    from .errors import InputError
    names = list(SUITES) if selector in (None, "all") else [selector]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise InputError(f"unknown suite(s) {unknown}; know {sorted(SUITES)}")
    results = []
    for suite in names:
        for fn in SUITES[suite]:
            if fn is check_gap_identity:
                results.append(fn(mutate=mutate))
            else:
                results.append(fn())
    return results

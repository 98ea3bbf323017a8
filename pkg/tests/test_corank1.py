"""Annihilator one-form, J matrix, Reeb / quasi-Reeb fields, canonical
corank-1 volume."""

import numpy as np
import pytest

from sublap import corank1, forms, frames, models
from sublap.errors import (NotContactError, QuasiReebUndefinedError,
                           StepTwoViolationError)


def commutative3():
    def e(i):
        def f(q):
            out = np.zeros_like(q)
            out[..., i] = 1.0
            return out
        return f
    return frames.Structure(3, 2, (e(0), e(1), e(2)), None, "commutative3")


RAW_HEIS_ETA = corank1.OneForm(
    lambda p: np.stack([0.5 * p[..., 1], -0.5 * p[..., 0],
                        np.ones(p.shape[:-1])], axis=-1), "raw")


class TestDEta:
    def test_closed_form_vanishes(self, rng):
        s = commutative3()
        eta = corank1.OneForm(lambda p: np.stack(
            [np.zeros(p.shape[:-1]), np.zeros(p.shape[:-1]),
             np.ones(p.shape[:-1])], axis=-1), "dz")
        for a in range(3):
            for b in range(3):
                v = corank1.d_eta(s, eta, a, b, rng.uniform(-1, 1, 3))
                assert abs(float(v)) < 1e-10

    def test_heisenberg_value(self, heis, rng):
        v = corank1.d_eta(heis.structure, RAW_HEIS_ETA, 0, 1,
                          rng.uniform(-1, 1, (6, 3)))
        assert np.max(np.abs(v + 1.0)) < 1e-9        # d eta = -dx^dy

    def test_raw_vector_arguments(self, heis, rng):
        q = rng.uniform(-1, 1, 3)
        v = corank1.d_eta(heis.structure, RAW_HEIS_ETA,
                          np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), q)
        assert abs(float(v) + 1.0) < 1e-9

    def test_matches_coordinate_exterior_derivative(self, contact_pert, rng):
        s = contact_pert.structure
        eta = contact_pert.eta
        for q in rng.uniform(-1, 1, (4, 3)):
            B = forms.exterior_d(eta.coeffs, 1, q)
            F = s.frame_matrix(q)
            for i in range(3):
                for j in range(i + 1, 3):
                    cartan = corank1.d_eta(s, eta, i, j, q)
                    coord = F[:, i] @ B @ F[:, j]
                    assert abs(float(cartan) - coord) < 1e-8


class TestJMatrix:
    def test_heisenberg_raw_norm_and_scale(self, heis, rng):
        jm, scale = corank1.j_matrix(heis.structure, RAW_HEIS_ETA,
                                     rng.uniform(-1, 1, 3))
        assert float(jm.frobenius_sq()) == pytest.approx(2.0, abs=1e-9)
        assert float(scale) == pytest.approx(1 / np.sqrt(2), abs=1e-9)
        assert np.allclose(jm.m, [[0.0, -1.0], [1.0, 0.0]], atol=1e-9)

    def test_quasicontact_action(self, qc_r4, rng):
        # J X = -Y/sqrt2, J Y = X/sqrt2, J Z = 0 (already normalized eta)
        jm = corank1.j_matrix_normalized(qc_r4.structure, qc_r4.eta,
                                         rng.uniform(-1, 1, 4))
        expect = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0],
                           [0.0, 0.0, 0.0]]) / np.sqrt(2.0)
        assert np.max(np.abs(jm.m - expect)) < 1e-9

    def test_skew_invariant_flags_symmetric_noise(self):
        # negative control: a symmetric perturbation must be detected
        jm = corank1.JMatrix(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert jm.skew_defect() < 1e-15
        bad = corank1.JMatrix(jm.m + 1e-3 * np.eye(2))
        assert bad.skew_defect() > 1e-4

    def test_step2_violation(self, rng):
        s = commutative3()
        eta = corank1.OneForm(lambda p: np.stack(
            [np.zeros(p.shape[:-1]), np.zeros(p.shape[:-1]),
             np.ones(p.shape[:-1])], axis=-1), "dz")
        with pytest.raises(StepTwoViolationError):
            corank1.j_matrix(s, eta, rng.uniform(-1, 1, 3))


class TestNormalization:
    def test_annihilator_on_zoo(self, zoo, rng):
        for m in zoo:
            if m.eta is None:
                continue
            s = m.structure
            pts = rng.uniform(-1, 1, (100, s.n))
            F = s.frame_matrix(pts)
            e = m.eta.value(pts)
            for i in range(s.k):
                defect = np.max(np.abs(np.einsum("...a,...a->...", e,
                                                 F[..., :, i])))
                assert defect < 1e-10, m.name

    def test_idempotence(self, contact_pert, rng):
        s = contact_pert.structure
        once = corank1.normalized_one_form(s, contact_pert.eta)
        _, scale = corank1.j_matrix(s, once, rng.uniform(-1, 1, (8, 3)))
        assert np.max(np.abs(scale - 1.0)) < 1e-12

    def test_reconstructed_annihilator(self, contact_pert, rng):
        s = contact_pert.structure
        eta_r = corank1.annihilator_one_form(s)
        pts = rng.uniform(-1, 1, (20, 3))
        F = s.frame_matrix(pts)
        e = eta_r.value(pts)
        for i in range(2):
            assert np.max(np.abs(np.einsum("...a,...a->...",
                                           e, F[..., :, i]))) < 1e-10
        # oriented: positive on the complement field
        orient = np.einsum("...a,...a->...", e, F[..., :, 2])
        assert np.min(orient) > 0


class TestReeb:
    def test_heisenberg(self, heis, rng):
        Z = corank1.reeb(heis.structure, heis.eta, rng.uniform(-1, 1, 3))
        assert np.max(np.abs(Z - [0.0, 0.0, np.sqrt(2.0)])) < 1e-9

    def test_degenerate_raises(self, qc_r4, rng):
        with pytest.raises(NotContactError):
            corank1.reeb(qc_r4.structure, qc_r4.eta, rng.uniform(-1, 1, 4))

    def test_perturbed_contact_residuals(self, contact_pert, rng):
        s = contact_pert.structure
        eta_n = corank1.normalized_one_form(s, contact_pert.eta)
        for q in rng.uniform(-1, 1, (6, 3)):
            Z = corank1.reeb(s, eta_n, q)
            B = forms.exterior_d(eta_n.coeffs, 1, q)
            F = s.frame_matrix(q)
            assert abs(float(eta_n.pair(q, Z)) - 1.0) < 1e-12
            for i in range(2):
                assert abs(float(Z @ B @ F[:, i])) < 1e-9


class TestPopp:
    def test_heisenberg_density(self, heis, rng):
        rho = corank1.popp_corank1(heis.structure, heis.eta,
                                   rng.uniform(-1, 1, (10, 3)))
        assert np.max(np.abs(rho - 1 / np.sqrt(2.0))) < 1e-10

    def test_quasicontact_density(self, qc_r4, rng):
        pts = rng.uniform(-1, 1, (10, 4))
        rho = corank1.popp_corank1(qc_r4.structure, qc_r4.eta, pts)
        target = np.exp(pts[:, 2]) ** 2.5 / np.sqrt(2.0)
        assert np.max(np.abs(rho - target) / target) < 1e-6

    def test_transverse_choice_invariance(self, contact_pert, rng):
        # density from the canonical transverse vs a horizontally shifted one
        s = contact_pert.structure
        eta_n = corank1.normalized_one_form(s, contact_pert.eta)
        for q in rng.uniform(-1, 1, (5, 3)):
            rho = float(corank1.popp_corank1(s, eta_n, q))
            e = eta_n.value(q)
            Z = e / (e @ e)
            F = s.frame_matrix(q)
            Z2 = Z + 0.7 * F[:, 0] - 0.3 * F[:, 1]   # still eta_n(Z2) = 1
            M = np.concatenate([F[:, :2], Z2[:, None]], axis=-1)
            rho2 = 1.0 / abs(np.linalg.det(M))
            assert abs(rho - rho2) < 1e-10

    def test_density_smooth_along_path(self, contact_pert):
        s = contact_pert.structure
        ts = np.linspace(0, 1, 40)
        path = np.stack([np.sin(ts), np.cos(ts), 0.3 * ts], axis=-1)
        rho = corank1.popp_corank1(s, contact_pert.eta, path)
        increments = np.abs(np.diff(rho))
        assert np.max(increments) < 0.05


class TestQuasiReeb:
    def test_carnot_nilpotent_shortcut(self, carnot_flat, rng):
        # nilpotent case: Z_j = -[X_j, Y_j]/lambda_j, corrections vanish
        s = carnot_flat.structure
        q = rng.uniform(-1, 1, 4)
        Z = corank1.quasi_reeb(s, carnot_flat.eta, q, 1)
        x0, y0, lam = corank1.eigen_generators(s, carnot_flat.eta, q, 1)
        F = s.frame_matrix(q)

        def fx(p):
            return np.einsum("...am,m->...a", s.frame_matrix(p)[..., :, :3], x0)

        def fy(p):
            return np.einsum("...am,m->...a", s.frame_matrix(p)[..., :, :3], y0)

        W = frames.fd_jacobian(fy, q) @ fx(q) - frames.fd_jacobian(fx, q) @ fy(q)
        assert np.max(np.abs(Z + W / lam)) < 1e-8

    @pytest.mark.parametrize("model_name", ["carnot", "r4"])
    def test_defining_residuals(self, carnot_flat, qc_r4, rng, model_name):
        m = carnot_flat if model_name == "carnot" else qc_r4
        s = m.structure
        eta_n = corank1.normalized_one_form(s, m.eta)
        for q in rng.uniform(-1, 1, (4, 4)):
            Z = corank1.quasi_reeb(s, eta_n, q, 1)
            x0, y0, lam = corank1.eigen_generators(s, eta_n, q, 1)
            B = forms.exterior_d(eta_n.coeffs, 1, q)
            F = s.frame_matrix(q)
            xv = F[:, : s.k] @ x0
            yv = F[:, : s.k] @ y0
            assert abs(float(eta_n.pair(q, Z)) - 1.0) < 1e-9
            assert abs(float(Z @ B @ xv)) < 1e-8
            assert abs(float(Z @ B @ yv)) < 1e-8

    def test_generator_orthonormality(self, qc_r4, rng):
        x, y, lam = corank1.eigen_generators(qc_r4.structure, qc_r4.eta,
                                             rng.uniform(-1, 1, 4), 1)
        assert abs(float(x @ y)) < 1e-10
        assert abs(float(x @ x) - 1.0) < 1e-10
        assert abs(float(y @ y) - 1.0) < 1e-10
        assert lam == pytest.approx(1 / np.sqrt(2), abs=1e-9)

    def test_eigenvalue_crossing_raises(self, rng):
        # two equal eigenvalue pairs: the eigenplane is not well defined
        A = np.zeros((4, 4))
        A[0, 1], A[1, 0] = 1.0, -1.0
        A[2, 3], A[3, 2] = 1.0, -1.0
        m = models.carnot_corank1(A)
        with pytest.raises(QuasiReebUndefinedError):
            corank1.quasi_reeb(m.structure, m.eta, rng.uniform(-1, 1, 5), 1)

    def test_bad_index_raises(self, carnot_flat, rng):
        with pytest.raises(QuasiReebUndefinedError):
            corank1.quasi_reeb(carnot_flat.structure, carnot_flat.eta,
                               rng.uniform(-1, 1, 4), 2)

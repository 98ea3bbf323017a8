"""Frame calculus: Jacobians, brackets, structural functions, gradients,
second directional derivatives, divergences."""

import numpy as np
import pytest

from conftest import random_poly
from sublap import corank1, frames, models
from sublap.errors import (DegenerateFrameError, EvaluationError,
                           InvalidVolumeError)


def commutative3():
    def e(i):
        def f(q):
            out = np.zeros_like(q)
            out[..., i] = 1.0
            return out
        return f
    return frames.Structure(3, 2, (e(0), e(1), e(2)), None, "commutative3")


class TestJacobian:
    def test_heisenberg_x1_single_entry(self, heis):
        J = frames.jacobian(heis.structure, 0, np.array([0.7, -1.3, 2.0]))
        expected = np.zeros((3, 3))
        expected[2, 1] = -0.5
        assert np.allclose(J, expected, atol=1e-14)

    def test_constant_field_zero_jacobian(self):
        s = commutative3()
        J = frames.jacobian(s, 0, np.array([0.3, 0.4, 0.5]))
        assert np.max(np.abs(J)) < 1e-12

    def test_fd_against_analytic_derivative(self):
        # X = (x^2, 0, 0): d(x^2)/dx = 2x, so entry (0,0) at (1,0,0) is 2
        def f(q):
            out = np.zeros_like(q)
            out[..., 0] = q[..., 0] ** 2
            return out
        s = frames.Structure(3, 2, (f, commutative3().fields[1],
                                    commutative3().fields[2]), None, "quad")
        J = frames.jacobian(s, 0, np.array([1.0, 0.0, 0.0]))
        assert abs(J[0, 0] - 2.0) < 1e-10

    def test_nonfinite_field_raises_with_coordinate(self):
        def f(q):
            out = np.zeros_like(q)
            with np.errstate(invalid="ignore"):
                out[..., 1] = np.sqrt(q[..., 0])      # NaN for x < 0
            out[..., 0] = 1.0
            return out
        s = frames.Structure(3, 2, (f, commutative3().fields[1],
                                    commutative3().fields[2]), None, "bad")
        with pytest.raises(EvaluationError) as err:
            frames.jacobian(s, 0, np.array([-1.0, 0.0, 0.0]))
        assert err.value.coordinate == 1

    def test_fd_matches_supplied_jacobians_on_zoo(self, zoo, rng):
        for m in zoo:
            s = m.structure
            pts = rng.uniform(-1, 1, (10, s.n))
            for a in range(s.n):
                fd = frames.fd_jacobian(s.fields[a], pts)
                an = frames.jacobian(s, a, pts)
                assert np.max(np.abs(fd - an)) < 1e-8, (m.name, a)


class TestLieBracket:
    def test_heisenberg_vertical_bracket(self, heis, rng):
        pts = rng.uniform(-2, 2, (7, 3))
        br = frames.lie_bracket(heis.structure, 0, 1, pts)
        assert np.allclose(br, np.broadcast_to([0.0, 0.0, 1.0], br.shape),
                           atol=1e-13)

    def test_self_bracket_vanishes(self, heis):
        br = frames.lie_bracket(heis.structure, 0, 0, np.array([1.0, 2.0, 3.0]))
        assert np.max(np.abs(br)) < 1e-14

    def test_quasicontact_bracket_fixture(self, qc_r4, rng):
        # hand-computed: [X, Y] = -e^{-z} dw for the e^z-scaled frame
        pts = rng.uniform(-1, 1, (6, 4))
        br = frames.lie_bracket(qc_r4.structure, 0, 1, pts)
        expected = np.zeros_like(pts)
        expected[:, 3] = -np.exp(-pts[:, 2])
        assert np.max(np.abs(br - expected)) < 1e-10


class TestStructuralFunctions:
    def test_heisenberg_single_constant(self, heis, rng):
        c = frames.structural_functions(heis.structure, rng.uniform(-1, 1, 3)).c
        expected = np.zeros((3, 3, 3))
        expected[0, 1, 2] = 1.0
        expected[1, 0, 2] = -1.0
        assert np.max(np.abs(c - expected)) < 1e-12

    def test_commutative_all_zero(self, rng):
        c = frames.structural_functions(commutative3(), rng.uniform(-1, 1, 3)).c
        assert np.max(np.abs(c)) < 1e-12

    def test_carnot_bracket_matrix(self, rng):
        A = np.array([[0.0, 2.0, -1.0], [-2.0, 0.0, 0.5], [1.0, -0.5, 0.0]])
        s = models.carnot_corank1(A).structure
        c = frames.structural_functions(s, rng.uniform(-1, 1, 4)).c
        assert np.max(np.abs(c[:3, :3, 3] - A)) < 1e-12
        assert np.max(np.abs(c[:3, :3, :3])) < 1e-12

    def test_antisymmetry_on_zoo(self, zoo, rng):
        for m in zoo:
            pts = rng.uniform(-1, 1, (100, m.structure.n))
            defect = frames.structural_functions(m.structure, pts).antisymmetry_defect()
            assert defect < 1e-8, m.name

    def test_degenerate_frame_raises(self):
        e0 = commutative3().fields[0]
        s = frames.Structure(3, 2, (e0, e0, commutative3().fields[2]), None, "dup")
        with pytest.raises(DegenerateFrameError):
            frames.structural_functions(s, np.zeros(3))

    def test_heisenberg_step2_nested_bracket(self, heis, rng):
        # [X1, [X1, X2]] = 0 within tolerance (nilpotent step 2)
        s = heis.structure

        def inner(q):
            return frames.lie_bracket(s, 0, 1, q)

        for p in rng.uniform(-1, 1, (5, 3)):
            Ji = frames.fd_jacobian(inner, p)
            J0 = frames.jacobian(s, 0, p)
            val = Ji @ s.field_value(0, p) - J0 @ inner(p)
            assert np.max(np.abs(val)) < 1e-6


class TestGradH:
    def test_coordinate_function(self, heis):
        g = frames.grad_h(heis.structure, lambda p: p[..., 0], np.zeros(3))
        assert np.allclose(g, [1.0, 0.0], atol=1e-11)

    def test_constant(self, heis):
        g = frames.grad_h(heis.structure, lambda p: np.full(p.shape[:-1], 2.5),
                          np.array([0.4, 0.4, 0.4]))
        assert np.max(np.abs(g)) < 1e-12

    def test_vertical_coordinate(self, heis):
        # X1(z) = -y/2, X2(z) = x/2 at (1, 2, 0)
        g = frames.grad_h(heis.structure, lambda p: p[..., 2],
                          np.array([1.0, 2.0, 0.0]))
        assert np.allclose(g, [-1.0, 0.5], atol=1e-10)

    def test_leibniz(self, zoo, rng):
        for m in zoo[:3]:
            s = m.structure
            pts = rng.uniform(-1, 1, (20, s.n))
            f = random_poly(rng, s.n, 2)
            g = random_poly(rng, s.n, 2)
            lhs = frames.grad_h(s, lambda p: f(p) * g(p), pts)
            rhs = (f(pts)[..., None] * frames.grad_h(s, g, pts)
                   + g(pts)[..., None] * frames.grad_h(s, f, pts))
            assert np.max(np.abs(lhs - rhs)) < 1e-5


class TestSecondDirectional:
    def test_quadratic_everywhere(self, heis, rng):
        val = frames.second_directional(heis.structure, lambda p: p[..., 0] ** 2,
                                        0, rng.uniform(-1, 1, (5, 3)))
        assert np.max(np.abs(val - 2.0)) < 1e-7

    def test_linear_along_straight_field(self):
        s = commutative3()
        val = frames.second_directional(s, lambda p: p[..., 0], 0,
                                        np.array([0.2, 0.3, 0.4]))
        assert abs(float(val)) < 1e-9

    def test_heisenberg_vertical_square(self, heis):
        # X1(z^2) = -y z; X1 of that at (0,1,0) is y^2/2 = 1/2
        val = frames.second_directional(heis.structure, lambda p: p[..., 2] ** 2,
                                        0, np.array([0.0, 1.0, 0.0]))
        assert abs(float(val) - 0.5) < 1e-8

    def test_against_nested_first_derivative_oracle(self, contact_pert, rng):
        # independent route: X(X(phi)) as a first derivative of X(phi)
        s = contact_pert.structure
        phi = random_poly(rng, 3, 3)
        pts = rng.uniform(-1, 1, (10, 3))
        for i in range(s.k):
            xphi = lambda p, _i=i: frames.field_derivative(s, phi, _i, p)
            nested = frames.field_derivative(s, xphi, i, pts)
            stencil = frames.second_directional(s, phi, i, pts)
            assert np.max(np.abs(nested - stencil)) < 1e-5

    def test_combination_field_weights(self, heis, rng):
        # Y = a X1 + b X2: Y(Y(x^2)) = 2 a^2
        a, b = 0.8, -0.6
        val = frames.second_directional(heis.structure, lambda p: p[..., 0] ** 2,
                                        np.array([a, b]), rng.uniform(-1, 1, 3))
        assert abs(float(val) - 2 * a * a) < 1e-7


class TestVolumeAndDivergence:
    def test_get_theta_lebesgue(self, heis, rng):
        th = frames.get_theta(heis.structure, frames.lebesgue(),
                              rng.uniform(-1, 1, (4, 3)))
        assert np.max(np.abs(th)) < 1e-14      # det of the frame is 1

    def test_get_theta_scaled(self, heis):
        om = frames.scaled(frames.lebesgue(), 2.0)
        th = frames.get_theta(heis.structure, om, np.zeros(3))
        assert abs(float(th) - np.log(2.0)) < 1e-14

    def test_get_theta_popp(self, heis):
        # canonical corank-1 volume density is 1/sqrt(2) on this model
        popp = corank1.popp_volume(heis.structure, heis.eta)
        th = frames.get_theta(heis.structure, popp, np.zeros(3))
        assert abs(float(th) - np.log(1.0 / np.sqrt(2.0))) < 1e-12

    def test_nonpositive_density_raises(self, heis):
        bad = frames.VolumeForm(lambda q: -np.ones(q.shape[:-1]), "bad")
        with pytest.raises(InvalidVolumeError):
            frames.get_theta(heis.structure, bad, np.zeros(3))

    def test_div_lebesgue_zero(self, heis, rng):
        v = frames.div_omega(heis.structure, frames.lebesgue(), 0,
                             rng.uniform(-1, 1, (5, 3)))
        assert np.max(np.abs(v)) < 1e-10

    def test_div_exp_volume_shift(self, heis, rng):
        om = frames.exp_scaled(frames.lebesgue(), lambda p: p[..., 0])
        v = frames.div_omega(heis.structure, om, 0, rng.uniform(-1, 1, (5, 3)))
        assert np.max(np.abs(v - 1.0)) < 1e-9   # X1(x) = 1

    def test_div_haar_on_carnot(self, carnot_flat, rng):
        s = carnot_flat.structure
        for a in range(s.n):
            v = frames.div_omega(s, frames.lebesgue(), a, rng.uniform(-1, 1, (5, 4)))
            assert np.max(np.abs(v)) < 1e-10

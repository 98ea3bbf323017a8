"""Normal geodesics: Hamiltonian, flow equations, exponential map, the
second-order expansion residual."""

import numpy as np
import pytest

from sublap import frames, geodesics as geo
from sublap.errors import IntegrationError


class TestCovectorAndHamiltonian:
    def test_unit_cylinder_value(self):
        c = geo.CovectorCoords.unit_cylinder(np.array([0.6, 0.8, 3.0]), 2)
        assert geo.hamiltonian(c) == pytest.approx(0.5, abs=1e-15)

    def test_zero_covector(self):
        assert geo.hamiltonian(geo.CovectorCoords(np.zeros(3), 2)) == 0.0

    def test_three_four(self):
        c = geo.CovectorCoords(np.array([3.0, 4.0, 7.0]), 2)
        assert geo.hamiltonian(c) == pytest.approx(12.5)

    def test_unit_cylinder_validation(self):
        with pytest.raises(ValueError):
            geo.CovectorCoords.unit_cylinder(np.array([0.6, 0.9, 0.0]), 2)


class TestGeodesicRHS:
    def test_straight_direction(self, heis):
        qd, hd = geo.geodesic_rhs(heis.structure,
                                  geo.GeodesicState(np.zeros(3),
                                                    np.array([1.0, 0.0, 0.0])))
        assert np.allclose(qd, [1.0, 0.0, 0.0], atol=1e-14)
        assert np.max(np.abs(hd)) < 1e-14

    def test_zero_covector_is_stationary(self, heis, rng):
        qd, hd = geo.geodesic_rhs(heis.structure,
                                  geo.GeodesicState(rng.uniform(-1, 1, 3),
                                                    np.zeros(3)))
        assert np.max(np.abs(qd)) < 1e-14 and np.max(np.abs(hd)) < 1e-14

    def test_vertical_coupling(self, heis):
        # h = (1,0,1): hdot_2 = h_1 c_12^3 h_3 = 1, other components 0
        qd, hd = geo.geodesic_rhs(heis.structure,
                                  geo.GeodesicState(np.zeros(3),
                                                    np.array([1.0, 0.0, 1.0])))
        assert np.allclose(hd, [0.0, 1.0, 0.0], atol=1e-13)

    def test_rhs_matches_flow_finite_difference(self, heis):
        # cross-check the quadratic RHS against FD of the integrated flow
        s = heis.structure
        h0 = np.array([0.6, 0.8, 1.5])
        q0 = np.array([0.2, -0.1, 0.3])
        qd, hd = geo.geodesic_rhs(s, geo.GeodesicState(q0, h0))
        eps = 1e-5
        plus = geo.integrate_geodesic(s, q0, h0, eps, eps / 8)
        fd_q = (plus.q - q0) / eps
        fd_h = (plus.h - h0) / eps
        assert np.max(np.abs(fd_q - qd)) < 1e-4
        assert np.max(np.abs(fd_h - hd)) < 1e-4


class TestExpMap:
    def test_trivial_geodesic(self, heis, rng):
        q = rng.uniform(-1, 1, 3)
        end = geo.exp_map(heis.structure, q, geo.CovectorCoords(np.zeros(3), 2), 0.7)
        assert np.allclose(end, q, atol=1e-14)

    def test_straight_line(self, heis):
        c = geo.CovectorCoords.unit_cylinder(np.array([1.0, 0.0, 0.0]), 2)
        end = geo.exp_map(heis.structure, np.zeros(3), c, 1.0)
        assert np.max(np.abs(end - [1.0, 0.0, 0.0])) < 1e-10

    def test_curved_endpoint_self_consistency(self, heis):
        # Richardson self-oracle: a 10x finer integration agrees to ~1e-10
        c = geo.CovectorCoords.unit_cylinder(np.array([1.0, 0.0, 2.0]), 2)
        end = geo.exp_map(heis.structure, np.zeros(3), c, 1.0, step=1e-3)
        ref = geo.exp_map(heis.structure, np.zeros(3), c, 1.0, step=1e-4)
        assert np.max(np.abs(end - ref)) < 1e-10

    @pytest.mark.slow
    def test_curved_endpoint_high_resolution_oracle(self, heis):
        # the same check against a step-1e-5 reference integration
        c = geo.CovectorCoords.unit_cylinder(np.array([1.0, 0.0, 2.0]), 2)
        end = geo.exp_map(heis.structure, np.zeros(3), c, 1.0, step=1e-3)
        ref = geo.exp_map(heis.structure, np.zeros(3), c, 1.0, step=1e-5)
        assert np.max(np.abs(end - ref)) < 1e-10

    def test_integration_failure_reports_time(self):
        # field blows up in finite time: dx/dt = 1 + x^2 along X1
        def f(q):
            out = np.zeros_like(q)
            out[..., 0] = 1.0 + q[..., 0] ** 2
            return out

        def e(i):
            def g(q):
                out = np.zeros_like(q)
                out[..., i] = 1.0
                return out
            return g

        s = frames.Structure(3, 2, (f, e(1), e(2)), None, "blowup")
        c = geo.CovectorCoords.unit_cylinder(np.array([1.0, 0.0, 0.0]), 2)
        with pytest.raises(IntegrationError) as err:
            geo.exp_map(s, np.zeros(3), c, 3.0, step=1e-3)
        assert err.value.t_fail is not None and 0 < err.value.t_fail <= 3.0


class TestInvariants:
    def test_energy_conservation_on_zoo(self, zoo, rng):
        for m in zoo:
            s = m.structure
            g = rng.normal(size=s.k)
            h0 = np.concatenate([g / np.linalg.norm(g),
                                 rng.normal(size=s.n - s.k)])
            res = geo.integrate_geodesic(s, np.zeros(s.n), h0, 1.0, 1e-3)
            assert float(np.max(res.energy_drift)) < 1e-10, m.name

    @pytest.mark.parametrize("alpha", [0.5, 2.0])
    def test_rescaling(self, heis, alpha):
        h = np.array([0.6, 0.8, 1.0])
        a = geo.exp_map(heis.structure, np.zeros(3),
                        geo.CovectorCoords(alpha * h, 2), 0.5)
        b = geo.exp_map(heis.structure, np.zeros(3),
                        geo.CovectorCoords(h, 2), alpha * 0.5)
        assert np.max(np.abs(a - b)) < 1e-8

    def test_rk4_order(self, heis):
        c = geo.CovectorCoords.unit_cylinder(np.array([0.6, 0.8, 2.0]), 2)
        ref = geo.exp_map(heis.structure, np.zeros(3), c, 1.0, step=0.005)
        e1 = np.max(np.abs(geo.exp_map(heis.structure, np.zeros(3), c, 1.0,
                                       step=0.02) - ref))
        e2 = np.max(np.abs(geo.exp_map(heis.structure, np.zeros(3), c, 1.0,
                                       step=0.01) - ref))
        assert 8.0 < e1 / e2 < 40.0              # ideal factor 16


class TestTaylorResidual:
    def test_exact_for_linear_on_commutative(self):
        def e(i):
            def g(q):
                out = np.zeros_like(q)
                out[..., i] = 1.0
                return out
            return g
        s = frames.Structure(3, 2, (e(0), e(1), e(2)), None, "commutative3")
        c = geo.CovectorCoords.unit_cylinder(np.array([0.6, 0.8, 0.3]), 2)
        r = geo.taylor_residual(s, lambda p: 2 * p[..., 0] - p[..., 1],
                                np.zeros(3), c, 0.3)
        assert abs(float(r)) < 1e-9

    def test_zero_duration(self, heis):
        c = geo.CovectorCoords.unit_cylinder(np.array([0.6, 0.8, 1.0]), 2)
        r = geo.taylor_residual(heis.structure, lambda p: p[..., 2],
                                np.zeros(3), c, 0.0)
        assert abs(float(r)) < 1e-12

    def test_cubic_decay_rate(self, heis):
        # |residual| ~ t^3: log-log slope within [2.7, 3.3]
        rng = np.random.default_rng(5)
        g = rng.normal(size=2)
        h = np.concatenate([g / np.linalg.norm(g), rng.normal(size=1) + 1.0])
        c = geo.CovectorCoords.unit_cylinder(h, 2)
        ts = 0.1 * 2.0 ** -np.arange(7)
        res = [abs(float(geo.taylor_residual(heis.structure,
                                             lambda p: p[..., 2],
                                             np.zeros(3), c, t))) for t in ts]
        slope = np.polyfit(np.log(ts), np.log(res), 1)[0]
        assert 2.7 < slope < 3.3

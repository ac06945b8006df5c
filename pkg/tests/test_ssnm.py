import numpy as np
import pytest

from vropt.problems import QuadraticFiniteSum, least_squares_optimum, prox_step
from vropt.sampling import SeededRng, ssnm_distribution
from vropt.solvers import (
    lyapunov_diagnostics,
    run_ssnm,
    run_uniform_ssnm,
    ssnm_parameters,
    uniform_ssnm_parameters,
)
from vropt.solvers.ssnm import SsnmConfig, SsnmEngine


class TestParameterSelection:
    def test_regime_one(self):
        # m=4, L=1, mu=1/16: sqrt(mu)=1/4 <= mean sqrt(L)=1
        cfg = ssnm_parameters([1.0] * 4, 1.0 / 16.0)
        assert cfg.case == "I"
        assert cfg.lam == pytest.approx(1.0 / 64.0)
        assert cfg.eta == pytest.approx(0.25)

    def test_regime_two(self):
        # m=2, L=1, mu=4: sqrt(mu)=2 > 1
        cfg = ssnm_parameters([1.0, 1.0], 4.0)
        assert cfg.case == "II"
        assert cfg.lam == pytest.approx(1.0 / 8.0)
        assert cfg.eta == pytest.approx(1.0 / 32.0)

    @pytest.mark.parametrize("L,mu", [([2.0], 0.5), ([9.0], 8.0), ([0.3], 0.29)])
    def test_single_component_tau_below_one(self, L, mu):
        cfg = ssnm_parameters(L, mu)
        assert 0.0 <= cfg.tau[0] <= 1.0

    def test_selected_parameters_satisfy_rate_condition(self, rng):
        for _ in range(20):
            m = int(rng.integers(1, 30))
            L = np.exp(rng.uniform(-3, 3, m))
            mu = float(np.exp(rng.uniform(-6, 2)))
            cfg = ssnm_parameters(L, mu)
            assert cfg.satisfies_rate_condition
            assert np.all(cfg.tau <= 1.0) and np.all(cfg.tau >= 0.0)

    def test_constructor_raises_naming_violation(self):
        pi = ssnm_distribution([1.0, 1.0]).probabilities
        with pytest.raises(ValueError, match="tau"):
            SsnmConfig(lam=2.0, eta=0.1, pi=pi, L=np.ones(2), mu_total=1.0)
        with pytest.raises(ValueError, match="1/eta"):
            SsnmConfig(lam=0.4, eta=50.0, pi=pi, L=np.ones(2), mu_total=1.0)

    def test_scaled_config_keeps_structure(self):
        cfg = ssnm_parameters([1.0, 4.0], 0.1)
        s = cfg.scaled(0.3)
        assert s.lam == pytest.approx(0.3 * cfg.lam)
        assert s.eta == pytest.approx(0.3 * cfg.eta)
        np.testing.assert_allclose(s.tau, 0.3 * cfg.tau)

    def test_uniform_variant_uses_homogenized_constants(self):
        L = np.array([1.0, 100.0])
        cfg = uniform_ssnm_parameters(L, 0.5)
        flat = ssnm_parameters([100.0, 100.0], 0.5)
        assert cfg.lam == pytest.approx(flat.lam)
        assert cfg.eta == pytest.approx(flat.eta)
        np.testing.assert_allclose(cfg.pi, [0.5, 0.5])


class TestStep:
    def test_fixed_point_at_optimum(self, quad_sum_m5):
        p = quad_sum_m5.share()
        H = sum(p.Ps)
        x_star = np.linalg.solve(H, -p.a.sum(axis=0))
        cfg = ssnm_parameters(p.L, p.mu_total)
        eng = SsnmEngine(p, cfg, SeededRng(3), x_star)
        for k in range(50):
            before = eng.x.copy()
            eng.step()
            assert np.linalg.norm(eng.x - before) <= 1e-12 * max(1.0, np.linalg.norm(before))

    def test_single_component_estimator_is_exact(self):
        p = QuadraticFiniteSum([np.diag([2.0, 1.0])], np.array([[0.3, -0.2]]))
        cfg = ssnm_parameters(p.L, p.mu_total)
        eng = SsnmEngine(p, cfg, SeededRng(1), np.array([1.0, 1.0]))
        y = cfg.tau[0] * eng.x + (1 - cfg.tau[0]) * eng.phi[0]
        expected = p._component_grad(0, y) - p.mu_vec[0] * y
        np.testing.assert_allclose(eng.estimator_at(0), expected, atol=1e-13)

    def test_estimator_unbiased_by_enumeration(self, quad_sum_m5, rng):
        p = quad_sum_m5.share()
        cfg = ssnm_parameters(p.L, p.mu_total)
        eng = SsnmEngine(p, cfg, SeededRng(5), rng.standard_normal(p.dim))
        eng.advance(17)  # scramble the state
        mean = np.zeros(p.dim)
        target = np.zeros(p.dim)
        for i in range(p.m):
            mean += cfg.pi[i] * eng.estimator_at(i)
            y = cfg.tau[i] * eng.x + (1 - cfg.tau[i]) * eng.phi[i]
            target += p._component_grad(i, y) - p.mu_vec[i] * y
        assert np.linalg.norm(mean - target) <= 1e-10 * max(1.0, np.linalg.norm(target))

    def test_variance_bound_enumerated(self, quad_sum_m5, rng):
        p = quad_sum_m5.share()
        cfg = ssnm_parameters(p.L, p.mu_total)
        eng = SsnmEngine(p, cfg, SeededRng(6), rng.standard_normal(p.dim))
        eng.advance(11)
        mean = sum(cfg.pi[i] * eng.estimator_at(i) for i in range(p.m))
        lhs = 0.0
        rhs = 0.0
        for i in range(p.m):
            d = eng.estimator_at(i) - mean
            lhs += cfg.pi[i] * float(d @ d)
            y = cfg.tau[i] * eng.x + (1 - cfg.tau[i]) * eng.phi[i]

            def hat_val(z):
                return p._component_value(i, z) - 0.5 * p.mu_vec[i] * float(z @ z)

            hat_grad_y = p._component_grad(i, y) - p.mu_vec[i] * y
            bregman = hat_val(eng.phi[i]) - hat_val(y) - float(hat_grad_y @ (eng.phi[i] - y))
            rhs += 2.0 * p.L[i] / cfg.pi[i] * bregman
        assert lhs <= rhs + 1e-9

    def test_running_sum_tracks_table(self, quad_sum_m5):
        p = quad_sum_m5.share()
        cfg = ssnm_parameters(p.L, p.mu_total)
        eng = SsnmEngine(p, cfg, SeededRng(7), np.zeros(p.dim))
        eng.advance(4 * p.m + 3)
        drift = np.linalg.norm(eng.running_sum - eng.grad_table.sum(axis=0))
        assert drift <= 1e-9

    def test_two_gradient_calls_per_iteration(self, quad_sum_m5):
        p = quad_sum_m5.share()
        cfg = ssnm_parameters(p.L, p.mu_total)
        eng = SsnmEngine(p, cfg, SeededRng(8), np.zeros(p.dim))
        after_init = p.counter.total
        assert after_init == p.m
        eng.advance(37)
        assert p.counter.total == after_init + 2 * 37


class TestProxLemma:
    def test_inequality_at_computed_points(self, rng):
        # <g, x+ - u> <= -||x+ - x||^2/(2 eta) + ||x - u||^2/(2 eta)
        #               - (1+eta mu)||x+ - u||^2/(2 eta) + h(u) - h(x+)
        from vropt.problems import Ball, Box, WholeSpace

        n = 4
        for gamma in (WholeSpace(), Ball(np.zeros(n), 2.0), Box(-np.ones(n), np.ones(n))):
            for _ in range(100):
                x_k = rng.standard_normal(n)
                g = 3 * rng.standard_normal(n)
                eta = float(np.exp(rng.uniform(-3, 1)))
                mu = float(np.exp(rng.uniform(-3, 1)))
                u = gamma.project(rng.standard_normal(n))
                x_p = prox_step(x_k, g, eta, mu, gamma)

                def h(z):
                    return 0.5 * mu * float(z @ z)

                lhs = float(g @ (x_p - u))
                rhs = (
                    -np.linalg.norm(x_p - x_k) ** 2 / (2 * eta)
                    + np.linalg.norm(x_k - u) ** 2 / (2 * eta)
                    - (1 + eta * mu) * np.linalg.norm(x_p - u) ** 2 / (2 * eta)
                    + h(u)
                    - h(x_p)
                )
                assert lhs <= rhs + 1e-9


class TestRun:
    def test_terminates_at_optimum_immediately(self, quad_sum_m5):
        p = quad_sum_m5.share()
        H = sum(p.Ps)
        x_star = np.linalg.solve(H, -p.a.sum(axis=0))
        f_star = p.objective(x_star)
        t = run_ssnm(p, seed=0, x0=x_star, gap_tol=1e-8, f_star=f_star, max_passes=50)
        assert t.flags["reached_tol"]
        assert t.rows[-1]["passes"] == 0.0

    def test_budget_exhaustion_is_flagged_not_raised(self, quad_sum_m5):
        p = quad_sum_m5.share()
        x_star = np.linalg.solve(sum(p.Ps), -p.a.sum(axis=0))
        t = run_ssnm(p, seed=0, max_passes=2, gap_tol=1e-30, f_star=p.objective(x_star))
        assert t.flags["budget_exhausted"] and not t.flags["reached_tol"]

    def test_converges_linearly_on_least_squares(self, small_ls):
        p = small_ls.share()
        x_star, f_star = least_squares_optimum(small_ls)
        t = run_ssnm(p, seed=13, max_passes=250, gap_tol=1e-10, f_star=f_star, x_star=x_star)
        assert t.flags["reached_tol"]
        assert t.rows[-1]["gap"] <= 1e-10

    def test_last_iterate_returned(self, quad_sum_m5):
        p = quad_sum_m5.share()
        t = run_ssnm(p, seed=1, max_passes=5, f_star=0.0)
        assert t.final_x.shape == (p.dim,)

    def test_requires_strong_convexity(self):
        p = QuadraticFiniteSum([np.diag([1.0, 0.0])], np.array([[1.0, 0.0]]))
        assert p.mu_total == 0.0
        with pytest.raises(ValueError, match="strongly convex"):
            run_ssnm(p, seed=0)

    def test_m_one_lyapunov_contracts_geometrically(self):
        p = QuadraticFiniteSum([np.diag([2.0, 0.5])])
        x_star = np.zeros(2)
        cfg = ssnm_parameters(p.L, p.mu_total)
        eng = SsnmEngine(p, cfg, SeededRng(0), np.array([1.0, -1.0]))
        rate = 1.0 / (1.0 + cfg.eta * p.mu_total)

        def lyapunov():
            D, P = lyapunov_diagnostics(p, eng, x_star)
            assert D >= -1e-12
            return D / cfg.lam + (1 + cfg.eta * p.mu_total) / (2 * cfg.eta) * P

        psi = lyapunov()
        for _ in range(60):
            eng.step()
            nxt = lyapunov()
            assert nxt <= rate * psi + 1e-12 * max(1.0, psi)
            psi = nxt

    def test_uniform_variant_runs(self, small_ls):
        p = small_ls.share()
        _, f_star = least_squares_optimum(small_ls)
        t = run_uniform_ssnm(p, seed=3, max_passes=30, f_star=f_star)
        assert t.solver == "ssnm_uniform"
        assert t.rows[-1]["passes"] >= 29

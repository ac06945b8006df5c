import numpy as np
import pytest

from vropt.problems import QuadraticFiniteSum, least_squares_optimum
from vropt.sampling import SeededRng, katyusha_distribution
from vropt.solvers import FiniteSumEstimator, KatyushaConfig, KatyushaEngine, run_katyusha


class TestConfig:
    def test_parameter_formulas(self):
        cfg = KatyushaConfig(sigma=0.01, L_prime=100.0, m=8)
        assert cfg.tau2 == 0.5
        assert cfg.tau1 == pytest.approx(min(np.sqrt(2 * 8 * 0.01) / np.sqrt(300.0), 0.5))
        assert cfg.alpha == pytest.approx(1.0 / (3 * cfg.tau1 * 100.0))
        assert cfg.epoch_len == 16

    def test_well_conditioned_caps_at_half(self):
        # sigma = L', m=1: sqrt(2/3) > 1/2 so tau1 = 1/2, alpha = 2/(3 L')
        L = 7.0
        cfg = KatyushaConfig(sigma=L, L_prime=L, m=1)
        assert cfg.tau1 == 0.5
        assert cfg.alpha == pytest.approx(2.0 / (3.0 * L))

    def test_tau_sum_within_one(self, rng):
        for _ in range(30):
            cfg = KatyushaConfig(
                sigma=float(np.exp(rng.uniform(-8, 2))),
                L_prime=float(np.exp(rng.uniform(-1, 6))),
                m=int(rng.integers(1, 50)),
            )
            assert cfg.tau1 + cfg.tau2 <= 1.0 + 1e-15

    def test_rejects_bad_constants(self):
        with pytest.raises(ValueError):
            KatyushaConfig(sigma=0.0, L_prime=1.0, m=2)


class TestSnapshotWeights:
    def test_vanishing_momentum_gives_plain_average(self):
        # alpha*sigma ~ 0: every weight is 1 and the snapshot is the epoch mean
        p = QuadraticFiniteSum([np.diag([1.0, 1e-12])] * 2)
        prov = FiniteSumEstimator(p)
        cfg = KatyushaConfig(sigma=1e-14, L_prime=prov.L_prime, m=p.m)
        eng = KatyushaEngine(prov, cfg, SeededRng(4), np.array([1.0, -1.0]))
        assert np.allclose(eng._weights, 1.0, atol=1e-10)
        ys = []
        for _ in range(cfg.epoch_len):
            eng.advance(1)
            ys.append(eng.y.copy())
        np.testing.assert_allclose(eng.x_tilde, np.mean(ys, axis=0), rtol=1e-10)

    def test_weights_are_geometric(self):
        cfg = KatyushaConfig(sigma=0.5, L_prime=10.0, m=3)
        w = (1 + cfg.alpha * cfg.sigma) ** np.arange(cfg.epoch_len)
        p = QuadraticFiniteSum([np.eye(2)] * 3)
        eng = KatyushaEngine(FiniteSumEstimator(p), cfg, SeededRng(0), np.zeros(2))
        np.testing.assert_allclose(eng._weights, w)


class TestFiniteSumEstimator:
    def test_matches_directly_coded_svrg_estimator(self, quad_sum_m5, rng):
        p = quad_sum_m5.share()
        prov = FiniteSumEstimator(p)
        x_tilde = rng.standard_normal(p.dim)
        x = rng.standard_normal(p.dim)
        prov.take_snapshot(x_tilde)

        def hat_grad(i, z):
            return p._component_grad(i, z) - p.mu_vec[i] * z

        pi = katyusha_distribution(np.ones(p.m), p.L).probabilities
        table_sum = sum(hat_grad(j, x_tilde) for j in range(p.m))
        for i in range(p.m):
            direct = table_sum + (hat_grad(i, x) - hat_grad(i, x_tilde)) / pi[i]
            np.testing.assert_allclose(prov.estimate(x, i), direct, rtol=1e-12, atol=1e-12)

    def test_unbiased_by_enumeration(self, quad_sum_m5, rng):
        p = quad_sum_m5.share()
        prov = FiniteSumEstimator(p)
        x_tilde = rng.standard_normal(p.dim)
        x = rng.standard_normal(p.dim)
        prov.take_snapshot(x_tilde)
        pi = prov.distribution.probabilities
        mean = sum(pi[i] * prov.estimate(x, i) for i in range(p.m))
        target = sum(p._component_grad(i, x) - p.mu_vec[i] * x for i in range(p.m))
        assert np.linalg.norm(mean - target) <= 1e-10 * max(1.0, np.linalg.norm(target))

    def test_snapshot_coincidence_kills_variance(self, quad_sum_m5, rng):
        p = quad_sum_m5.share()
        prov = FiniteSumEstimator(p)
        x = rng.standard_normal(p.dim)
        prov.take_snapshot(x)
        ests = [prov.estimate(x, i) for i in range(p.m)]
        for e in ests[1:]:
            np.testing.assert_allclose(e, ests[0], atol=1e-12)

    def test_uniform_homogenizes(self, quad_sum_m5):
        prov = FiniteSumEstimator(quad_sum_m5.share(), uniform=True)
        np.testing.assert_allclose(prov.distribution.probabilities, 1.0 / quad_sum_m5.m)
        assert prov.L_prime == pytest.approx(quad_sum_m5.m * quad_sum_m5.L.max())


class TestRun:
    def test_converges_on_least_squares(self, small_ls):
        p = small_ls.share()
        x_star, f_star = least_squares_optimum(small_ls)
        t = run_katyusha(p, seed=5, max_passes=300, gap_tol=1e-10, f_star=f_star)
        assert t.flags["reached_tol"]

    def test_oracle_cost_snapshot_plus_one(self, quad_sum_m5):
        p = quad_sum_m5.share()
        t = run_katyusha(p, seed=1, max_passes=10)
        iters = int(t.rows[-1]["iteration"])
        epochs_started = 1 + iters // (2 * p.m) if iters % (2 * p.m) else iters // (2 * p.m)
        assert p.counter.total == epochs_started * p.m + iters

    def test_fixed_point_at_optimum(self, quad_sum_m5):
        p = quad_sum_m5.share()
        x_star = np.linalg.solve(sum(p.Ps), -p.a.sum(axis=0))
        t = run_katyusha(p, seed=2, x0=x_star, max_passes=8)
        assert np.linalg.norm(t.final_x - x_star) <= 1e-10

    def test_requires_unconstrained(self, rng):
        from vropt.problems import Ball

        p = QuadraticFiniteSum([np.eye(2)] * 2, gamma=Ball(np.zeros(2), 1.0))
        with pytest.raises(ValueError, match="unconstrained"):
            run_katyusha(p, seed=0)

    def test_returns_snapshot_attribute(self, quad_sum_m5):
        t = run_katyusha(quad_sum_m5.share(), seed=3, max_passes=7)
        assert t.x_tilde.shape == (quad_sum_m5.dim,)

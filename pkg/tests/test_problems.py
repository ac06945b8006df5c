import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vropt.problems import (
    Ball,
    Box,
    ComponentSpec,
    OracleCounter,
    QuadraticFiniteSum,
    WeightedGLMProblem,
    WholeSpace,
    glm_component_constants,
    least_squares_optimum,
    load_matrix_csv,
    make_weighted_glm,
    prox_step,
    scale_design_matrix,
    skewed_weights,
)


class TestComponentSpec:
    def test_accepts_valid(self):
        ComponentSpec(2.0, 0.5)
        ComponentSpec(1.0, 0.0)

    def test_rejects_invalid(self):
        with pytest.raises(ValueError):
            ComponentSpec(0.0, 0.0)
        with pytest.raises(ValueError):
            ComponentSpec(1.0, 2.0)
        with pytest.raises(ValueError):
            ComponentSpec(1.0, -0.1)


class TestGradOracles:
    def test_squared_loss_single_row(self):
        # w=1, m=1, a=e1, b=0: data term (a'x)^2 has gradient 2 x1 a
        A = np.array([[1.0, 0.0]])
        p = WeightedGLMProblem(A, np.zeros(1), np.ones(1), 1e-9, "squared")
        g = p.hat_component_grad(0, np.array([1.0, 0.0]))
        np.testing.assert_allclose(g, [2.0, 0.0], atol=1e-12)

    def test_logistic_at_zero_margin(self):
        # b a'x = 0: derivative of log(1+exp(-t)) at 0 is -1/2
        A = np.array([[0.5, -1.0]])
        p = WeightedGLMProblem(A, np.array([1.0]), np.array([3.0]), 1e-9, "logistic")
        g = p.hat_component_grad(0, np.zeros(2))
        np.testing.assert_allclose(g, -3.0 * 0.5 * A[0], rtol=1e-12)

    def test_zero_gradient_at_component_minimizer(self, quad_sum_m5):
        i = 2
        x_min = np.linalg.solve(quad_sum_m5.Ps[i], -quad_sum_m5.a[i])
        g = quad_sum_m5.share().component_grad(i, x_min)
        assert np.linalg.norm(g) < 1e-10

    def test_index_and_dim_errors(self, small_ls):
        p = small_ls.share()
        with pytest.raises(IndexError):
            p.component_grad(p.m, np.zeros(p.dim))
        with pytest.raises(ValueError):
            p.component_grad(0, np.zeros(p.dim + 1))

    def test_grad_increments_counter(self, small_ls):
        p = small_ls.share()
        x = np.zeros(p.dim)
        p.component_grad(3, x)
        p.component_grad(3, x)
        p.hat_component_grad(1, x)
        assert p.counter.grad_calls[3] == 2
        assert p.counter.grad_calls[1] == 1
        assert p.counter.total == 3


class TestHatGrad:
    def test_at_origin_equals_full_grad(self, quad_sum_m5):
        p = quad_sum_m5.share()
        x0 = np.zeros(p.dim)
        np.testing.assert_allclose(
            p.hat_component_grad(0, x0), p.component_grad(0, x0), atol=1e-15
        )

    def test_pure_ridge_component_vanishes(self):
        mu = 0.7
        p = QuadraticFiniteSum([mu * np.eye(3)])
        x = np.array([1.0, -2.0, 0.5])
        assert np.linalg.norm(p.hat_component_grad(0, x)) < 1e-12

    def test_quadratic_correction(self):
        P = np.diag([3.0, 1.0])
        p = QuadraticFiniteSum([P])
        e1 = np.array([1.0, 0.0])
        np.testing.assert_allclose(
            p.hat_component_grad(0, e1), (P - p.mu_vec[0] * np.eye(2)) @ e1, atol=1e-14
        )


class TestProxStep:
    def test_unconstrained_closed_form(self):
        v = np.array([2.0, -4.0, 1.0])
        np.testing.assert_allclose(prox_step(np.zeros(3), v, 1.0, 1.0), -v / 2)

    def test_zero_grad_projects_current_point(self):
        ball = Ball(np.zeros(2), 1.0)
        x = np.array([3.0, 4.0])
        np.testing.assert_allclose(prox_step(x, np.zeros(2), 0.5, 0.0, ball), [0.6, 0.8])

    def test_ball_projection(self):
        out = prox_step(np.zeros(2), np.array([2.0, 0.0]), 1.0, 0.0, Ball(np.zeros(2), 1.0))
        np.testing.assert_allclose(out, [-1.0, 0.0])

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            prox_step(np.zeros(2), np.zeros(2), 0.0, 1.0)

    @given(st.integers(0, 10**6))
    @settings(max_examples=40, deadline=None)
    def test_box_projection_optimality(self, seed):
        # the prox point minimizes the model over the box: compare on a grid of candidates
        r = np.random.default_rng(seed)
        n = 3
        x_k = r.standard_normal(n)
        g = r.standard_normal(n)
        eta, mu = 0.5, 0.8
        box = Box(-np.ones(n), np.ones(n))
        out = prox_step(x_k, g, eta, mu, box)

        def model(z):
            return 0.5 * mu * z @ z + g @ z + (z - x_k) @ (z - x_k) / (2 * eta)

        assert box.contains(out)
        for _ in range(20):
            z = box.project(r.standard_normal(n))
            assert model(out) <= model(z) + 1e-10


class TestScaleDesignMatrix:
    def test_unit_rows_scaling(self):
        m, n = 5, 3
        A = np.zeros((m, n))
        A[:, 0] = 1.0  # all rows unit norm
        scaled = scale_design_matrix(A, np.ones(m), "squared")
        np.testing.assert_allclose(scaled, A * np.sqrt(m / 2.0))

    def test_fixed_point(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((10, 4))
        w = np.ones(10)
        once = scale_design_matrix(A, w, "squared")
        np.testing.assert_allclose(scale_design_matrix(once, w, "squared"), once, rtol=1e-12)
        assert abs(glm_component_constants(once, w, 0.0, "squared").max() - 1.0) < 1e-12

    def test_single_row(self):
        a = np.array([[3.0, 4.0]])
        scaled = scale_design_matrix(a, np.ones(1), "squared")
        np.testing.assert_allclose(scaled, a / (np.sqrt(2.0) * 5.0))

    def test_rejects_zero_matrix(self):
        with pytest.raises(ValueError):
            scale_design_matrix(np.zeros((2, 2)), np.ones(2), "squared")


def _finite_diff(fn, x, eps=1e-5):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = eps
        g[j] = (fn(x + e) - fn(x - e)) / (2 * eps)
    return g


@pytest.mark.parametrize("fixture", ["small_ls", "small_logistic", "quad_sum_m5"])
class TestOracleInvariants:
    def test_gradient_matches_finite_differences(self, fixture, request, rng):
        p = request.getfixturevalue(fixture).share()
        for trial in range(3):
            x = rng.standard_normal(p.dim)
            i = int(rng.integers(p.m))
            num = _finite_diff(lambda z: p._component_value(i, z), x)
            ana = p._component_grad(i, x)
            scale = max(np.linalg.norm(ana), 1e-3)
            assert np.linalg.norm(num - ana) / scale < 1e-6

    def test_split_identity(self, fixture, request, rng):
        p = request.getfixturevalue(fixture).share()
        x = rng.standard_normal(p.dim)
        total = sum(p._component_grad(i, x) for i in range(p.m))
        hat_total = sum(p._component_grad(i, x) - p.mu_vec[i] * x for i in range(p.m))
        lhs = hat_total + p.mu_total * x
        assert np.linalg.norm(lhs - total) <= 1e-12 * max(1.0, np.linalg.norm(total))

    def test_strong_convexity_certificate(self, fixture, request, rng):
        p = request.getfixturevalue(fixture).share()
        for _ in range(5):
            x, y = rng.standard_normal((2, p.dim))
            i = int(rng.integers(p.m))
            lhs = p._component_value(i, y)
            rhs = (
                p._component_value(i, x)
                + p._component_grad(i, x) @ (y - x)
                + 0.5 * p.mu_vec[i] * np.linalg.norm(y - x) ** 2
            )
            assert lhs >= rhs - 1e-10

    def test_smoothness_certificate(self, fixture, request, rng):
        p = request.getfixturevalue(fixture).share()
        for _ in range(5):
            x, y = rng.standard_normal((2, p.dim))
            i = int(rng.integers(p.m))
            num = np.linalg.norm(p._component_grad(i, x) - p._component_grad(i, y))
            assert num <= p.L[i] * np.linalg.norm(x - y) + 1e-10


class TestCounter:
    def test_counts_match_calls_exactly(self, small_ls, rng):
        p = small_ls.share()
        expected = np.zeros(p.m, dtype=int)
        for _ in range(200):
            i = int(rng.integers(p.m))
            if rng.uniform() < 0.5:
                p.component_grad(i, np.zeros(p.dim))
            else:
                p.hat_component_grad(i, np.zeros(p.dim))
            expected[i] += 1
        assert np.array_equal(p.counter.grad_calls, expected)
        assert p.counter.total == 200
        assert p.counter.effective_passes(p.m) == 200 / p.m

    def test_share_gives_fresh_counter(self, small_ls):
        a = small_ls.share()
        b = small_ls.share()
        a.component_grad(0, np.zeros(a.dim))
        assert b.counter.total == 0
        assert a.A is b.A  # data shared, not copied

    def test_monotone(self):
        c = OracleCounter(3)
        c.record_grad(1)
        c.record_grads_all()
        assert c.total == 4
        assert list(c.grad_calls) == [1, 2, 1]


class TestGenerators:
    def test_skewed_weights_pattern(self):
        w = skewed_weights(100)
        assert (w == 100.0).sum() == 10
        assert (w == 1.0).sum() == 90

    def test_generated_instance_is_scaled(self, small_ls):
        data_L = glm_component_constants(small_ls.A, small_ls.w, 0.0, "squared")
        assert abs(data_L.max() - 1.0) < 1e-12

    def test_least_squares_optimum_is_stationary(self, small_ls):
        x_star, f_star = least_squares_optimum(small_ls)
        assert np.linalg.norm(small_ls.full_grad_uncounted(x_star)) < 1e-10
        assert small_ls.objective(x_star) == pytest.approx(f_star)

    def test_logistic_labels_are_signs(self, small_logistic):
        assert set(np.unique(small_logistic.b)) <= {-1.0, 1.0}


class TestCsvLoading:
    def test_round_trip_no_header(self, tmp_path):
        M = np.arange(12, dtype=float).reshape(3, 4)
        f = tmp_path / "m.csv"
        np.savetxt(f, M, delimiter=",")
        np.testing.assert_allclose(load_matrix_csv(f), M)

    def test_header_detected(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("c0,c1\n1.0,2.0\n3.0,4.0\n")
        np.testing.assert_allclose(load_matrix_csv(f), [[1.0, 2.0], [3.0, 4.0]])


class TestFeasibleSets:
    def test_whole_space(self):
        x = np.array([5.0, 6.0])
        assert WholeSpace().project(x) is x

    @given(st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_projections_are_idempotent_and_feasible(self, seed):
        r = np.random.default_rng(seed)
        x = 5 * r.standard_normal(4)
        for gamma in (Ball(r.standard_normal(4), 1.5), Box(-np.ones(4), np.ones(4))):
            p = gamma.project(x)
            assert gamma.contains(p)
            np.testing.assert_allclose(gamma.project(p), p, atol=1e-12)

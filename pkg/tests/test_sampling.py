import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from vropt.sampling import (
    SamplingDistribution,
    SeededRng,
    derive_seed,
    katyusha_distribution,
    reduced_distribution,
    ssnm_distribution,
    uniform_distribution,
)


class TestSsnmDistribution:
    def test_symmetric_two_components(self):
        d = ssnm_distribution([1.0, 1.0])
        np.testing.assert_allclose(d.probabilities, [0.5, 0.5])

    def test_skewed_pair(self):
        # sqrt(L) = [2, 1]: 2/6 + 1/4 = 7/12 and 1/6 + 1/4 = 5/12
        d = ssnm_distribution([4.0, 1.0])
        np.testing.assert_allclose(d.probabilities, [7 / 12, 5 / 12], rtol=1e-15)

    def test_single_component(self):
        np.testing.assert_allclose(ssnm_distribution([3.7]).probabilities, [1.0])

    @given(st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_lower_bound_half_uniform(self, L):
        d = ssnm_distribution(L)
        assert d.probabilities.min() >= 1.0 / (2 * len(L)) - 1e-15
        assert abs(d.probabilities.sum() - 1.0) < 1e-12

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            ssnm_distribution([])
        with pytest.raises(ValueError):
            ssnm_distribution([1.0, -2.0])


class TestOtherDistributions:
    def test_katyusha_uniform_when_flat(self):
        d = katyusha_distribution(np.ones(4), np.ones(4))
        np.testing.assert_allclose(d.probabilities, 0.25)

    def test_katyusha_weighted(self):
        d = katyusha_distribution([2.0, 1.0], [1.0, 1.0])
        np.testing.assert_allclose(d.probabilities, [2 / 3, 1 / 3])

    def test_katyusha_single(self):
        np.testing.assert_allclose(katyusha_distribution([5.0], [2.0]).probabilities, [1.0])

    def test_reduced(self):
        np.testing.assert_allclose(reduced_distribution([3.0, 1.0]).probabilities, [0.75, 0.25])
        np.testing.assert_allclose(reduced_distribution([7.0] * 3).probabilities, 1 / 3)
        np.testing.assert_allclose(reduced_distribution([1.0]).probabilities, [1.0])

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            katyusha_distribution([1.0, 0.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            reduced_distribution([0.0])


class TestSampling:
    def test_degenerate_always_zero(self):
        d = SamplingDistribution([1.0])
        rng = SeededRng(5)
        assert all(d.sample(rng) == 0 for _ in range(20))

    def test_determinism_same_seed_same_sequence(self):
        d = ssnm_distribution([4.0, 1.0, 9.0])
        a = d.sample_many(SeededRng(99), 2000)
        b = d.sample_many(SeededRng(99), 2000)
        assert np.array_equal(a, b)
        c = d.sample_many(SeededRng(100), 2000)
        assert not np.array_equal(a, c)

    def test_fair_coin_within_3_sigma(self):
        d = SamplingDistribution([0.5, 0.5])
        n = 10**6
        ones = int(d.sample_many(SeededRng(7), n).sum())
        sigma = np.sqrt(n * 0.25)
        assert abs(ones - n / 2) <= 3 * sigma

    def test_skewed_within_3_sigma(self):
        d = ssnm_distribution([4.0, 1.0])  # pi = [7/12, 5/12]
        n = 10**6
        zeros = int((d.sample_many(SeededRng(8), n) == 0).sum())
        p = 7 / 12
        sigma = np.sqrt(n * p * (1 - p))
        assert abs(zeros - n * p) <= 3 * sigma

    @pytest.mark.parametrize(
        "dist",
        [
            ssnm_distribution([1.0, 4.0, 0.25, 9.0]),
            katyusha_distribution([1.0, 2.0, 3.0], [2.0, 1.0, 5.0]),
            reduced_distribution([0.5, 1.5, 2.0, 4.0, 1.0]),
        ],
        ids=["ssnm", "katyusha", "reduced"],
    )
    def test_chi_square_not_rejected(self, dist):
        n = 10**6
        draws = dist.sample_many(SeededRng(321), n)
        observed = np.bincount(draws, minlength=dist.m)
        _, pvalue = stats.chisquare(observed, n * dist.probabilities)
        assert pvalue > 1e-3

    def test_cumulative_table_validation(self):
        with pytest.raises(ValueError):
            SamplingDistribution([0.5, 0.6])  # sums past 1
        with pytest.raises(ValueError):
            SamplingDistribution([1.0, 1e-18])  # not strictly increasing after cumsum


class TestSeededRng:
    def test_uniform_range_and_reproducibility(self):
        r = SeededRng(0)
        xs = [r.uniform() for _ in range(1000)]
        assert all(0.0 <= x < 1.0 for x in xs)
        r2 = SeededRng(0)
        assert xs == [r2.uniform() for _ in range(1000)]

    def test_state_is_64_bit(self):
        r = SeededRng((1 << 70) + 13)
        assert r.state == ((1 << 70) + 13) % (1 << 64)
        r.next_u64()
        assert 0 <= r.state < 1 << 64

    def test_derive_seed_decorrelates(self):
        children = {derive_seed(42, k) for k in range(100)}
        assert len(children) == 100
        d = uniform_distribution(2)
        a = d.sample_many(SeededRng(derive_seed(42, 0)), 500)
        b = d.sample_many(SeededRng(derive_seed(42, 1)), 500)
        assert not np.array_equal(a, b)

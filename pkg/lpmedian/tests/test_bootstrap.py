"""
Tests for Bayesian-bootstrap posterior sampling.
"""

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from lpmedian.engine.asymptotics import frobenius_relative_error, quantile_sandwich, sandwich
from lpmedian.engine.bootstrap import (
    RngSeed,
    as_directions,
    dirichlet_weights,
    empirical_estimates,
    posterior_sample,
)
from lpmedian.engine.errors import DirectionDomainError, InvalidInputError
from lpmedian.engine.lp_core import NormSpec
from lpmedian.tests.helpers import slow


class RngSeedTest(SimpleTestCase):
    def test_same_path_same_stream(self):
        a = RngSeed(42).child(3).generator().random(5)
        b = RngSeed(42).child(3).generator().random(5)
        assert_array_equal(a, b)

    def test_children_are_distinct_streams(self):
        root = RngSeed(42)
        self.assertFalse(np.array_equal(root.child(0).generator().random(5), root.child(1).generator().random(5)))
        self.assertFalse(np.array_equal(root.generator().random(5), RngSeed(43).generator().random(5)))
        self.assertEqual(root.child(7).child(2).path, (7, 2))
        self.assertEqual(root.child(7).stream, 7)

    def test_seed_range(self):
        with self.assertRaises(InvalidInputError):
            RngSeed(-1)
        with self.assertRaises(InvalidInputError):
            RngSeed(2**64)
        RngSeed(2**64 - 1)


class DirichletWeightsTest(SimpleTestCase):
    def test_weights_form_a_probability_vector(self):
        w = dirichlet_weights(20, RngSeed(1))
        self.assertEqual(w.shape, (20,))
        self.assertTrue(np.all(w > 0))
        self.assertAlmostEqual(w.sum(), 1.0, delta=1e-12)

    def test_marginal_is_beta(self):
        root = RngSeed(5)
        first = np.array([dirichlet_weights(5, root.child(t))[0] for t in range(100_000)])
        self.assertLess(stats.kstest(first, stats.beta(1, 4).cdf).statistic, 0.01)

    def test_scaled_weights_have_unit_mean_and_variance(self):
        n = 10_000
        scaled = n * dirichlet_weights(n, RngSeed(6))
        self.assertAlmostEqual(scaled.mean(), 1.0, delta=1e-12)
        self.assertAlmostEqual(scaled.var(ddof=1), 1.0, delta=0.1)

    def test_single_observation(self):
        assert_array_equal(dirichlet_weights(1, RngSeed(0)), [1.0])
        with self.assertRaises(InvalidInputError):
            dirichlet_weights(0, RngSeed(0))


class PosteriorSampleTest(SimpleTestCase):
    def setUp(self):
        self.data = np.random.default_rng(21).standard_normal((40, 2))
        self.spec = NormSpec(2)

    def test_shapes_and_metadata(self):
        dirs = [[0.0, 0.0], [0.3, -0.2]]
        post = posterior_sample(self.data, dirs, self.spec, 30, RngSeed(9))
        self.assertEqual(post.draws.shape, (30, 4))
        self.assertEqual((post.m, post.k), (2, 2))
        self.assertEqual(post.block(1).shape, (30, 2))
        assert_array_equal(post.block(1), post.draws[:, 2:])
        self.assertEqual(post.dropped, 0)
        self.assertEqual(post.n_data, 40)
        assert_array_equal(post.draw_ids, np.arange(30))
        assert_allclose(post.estimates, empirical_estimates(self.data, dirs, self.spec))

    def test_same_seed_same_draws(self):
        a = posterior_sample(self.data, None, self.spec, 25, RngSeed(3))
        b = posterior_sample(self.data, None, self.spec, 25, RngSeed(3))
        assert_array_equal(a.draws, b.draws)
        c = posterior_sample(self.data, None, self.spec, 25, RngSeed(4))
        self.assertFalse(np.array_equal(a.draws, c.draws))

    def test_thread_count_does_not_change_draws(self):
        serial = posterior_sample(self.data, None, NormSpec(3), 24, RngSeed(8), workers=1)
        threaded = posterior_sample(self.data, None, NormSpec(3), 24, RngSeed(8), workers=4)
        assert_array_equal(serial.draws, threaded.draws)

    def test_prefix_of_a_larger_run(self):
        small = posterior_sample(self.data, None, self.spec, 10, RngSeed(11))
        large = posterior_sample(self.data, None, self.spec, 20, RngSeed(11))
        assert_array_equal(small.draws, large.draws[:10])

    def test_joint_draws_share_weights_across_directions(self):
        dirs = [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.1]]
        joint = posterior_sample(self.data, dirs, NormSpec(3), 20, RngSeed(12))
        for j, u in enumerate(dirs):
            alone = posterior_sample(self.data, [u], NormSpec(3), 20, RngSeed(12))
            assert_array_equal(joint.block(j), alone.draws)

    def test_directions_near_the_boundary(self):
        dirs = [[0.99, 0.0], [0.0, -0.99], [0.7, 0.7]]
        post = posterior_sample(self.data, dirs, self.spec, 20, RngSeed(13))
        self.assertEqual(post.dropped, 0)
        self.assertTrue(np.all(np.isfinite(post.draws)))

    def test_repeated_data_gives_identical_draws(self):
        data = np.tile([[1.0, -2.0]], (6, 1))
        post = posterior_sample(data, None, self.spec, 15, RngSeed(0))
        assert_array_equal(post.draws, np.tile([1.0, -2.0], (15, 1)))

    def test_centered_draws(self):
        post = posterior_sample(self.data, None, self.spec, 10, RngSeed(2))
        assert_allclose(post.centered(), np.sqrt(40) * (post.draws - post.estimates[0]))
        assert_allclose(post.centered(1.0), post.draws - post.estimates[0])

    def test_direction_validation(self):
        with self.assertRaises(DirectionDomainError):
            posterior_sample(self.data, [[0.9, 0.9]], self.spec, 5, RngSeed(0))
        with self.assertRaises(InvalidInputError):
            posterior_sample(self.data, None, self.spec, 0, RngSeed(0))
        assert_array_equal(as_directions(None, self.spec, 3), np.zeros((1, 3)))


class BernsteinVonMisesTest(SimpleTestCase):
    """Posterior covariance of sqrt(n)(draw - estimate) against the plug-in sandwich."""

    @slow
    def test_median_posterior_matches_sandwich(self):
        data = np.random.default_rng(100).standard_normal((2000, 2))
        spec = NormSpec(2)
        post = posterior_sample(data, None, spec, 2000, RngSeed(100), workers=4)
        posterior_cov = np.cov(post.centered(), rowvar=False)
        reference = sandwich(data, post.estimates[0], spec).cov
        self.assertLess(frobenius_relative_error(posterior_cov, reference), 0.20)

    @slow
    def test_posterior_mean_is_centered_on_the_estimate(self):
        data = np.random.default_rng(102).standard_normal((2000, 2))
        post = posterior_sample(data, None, NormSpec(2), 4000, RngSeed(102), workers=4)
        offset = post.draws.mean(axis=0) - post.estimates[0]
        cov_of_mean = np.cov(post.draws, rowvar=False) / len(post.draws)
        for j in range(2):
            self.assertLess(abs(offset[j]), 4.0 * np.sqrt(cov_of_mean[j, j]))

    @slow
    def test_joint_quantile_posterior_matches_sandwich(self):
        data = np.random.default_rng(101).standard_normal((2000, 2))
        spec = NormSpec(2)
        dirs = [[0.0, 0.0], [0.4, 0.2]]
        post = posterior_sample(data, dirs, spec, 2000, RngSeed(101), workers=4)
        posterior_cov = np.cov(post.centered(), rowvar=False)
        reference = quantile_sandwich(data, post.estimates, dirs, spec).full()
        self.assertLess(frobenius_relative_error(posterior_cov, reference), 0.25)

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from lpmedian.engine.asymptotics import (
    frobenius_relative_error,
    quantile_sandwich,
    sandwich,
)
from lpmedian.engine.bootstrap import RngSeed, empirical_estimates
from lpmedian.engine.errors import InsufficientDataError, InvalidInputError
from lpmedian.engine.lp_core import NormSpec
from lpmedian.engine.solver import SolverOptions, uniform_weights, weighted_median
from lpmedian.tests.helpers import slow

CROSS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]])


class SandwichTest(SimpleTestCase):
    def test_unit_cross_excludes_the_center(self):
        est = sandwich(CROSS, [0.0, 0.0], NormSpec(2))
        self.assertEqual((est.n_used, est.n_rows, est.n_excluded), (4, 5, 1))
        assert_allclose(est.psi_dot_hat, 0.5 * np.eye(2))
        assert_allclose(est.sigma_hat, 0.5 * np.eye(2))
        assert_allclose(est.cov, 2.0 * np.eye(2))
        assert_allclose(est.per_observation_cov, 0.4 * np.eye(2))

    def test_zero_convention(self):
        excluded = sandwich(CROSS, [0.0, 0.0], NormSpec(2))
        zeroed = sandwich(CROSS, [0.0, 0.0], NormSpec(2), coincident="zero")
        assert_allclose(zeroed.psi_dot_hat, excluded.psi_dot_hat * 4 / 5)
        assert_allclose(zeroed.cov, 2.5 * np.eye(2))
        with self.assertRaises(InvalidInputError):
            sandwich(CROSS, [0.0, 0.0], NormSpec(2), coincident="drop")

    def test_too_few_distinct_rows(self):
        with self.assertRaises(InsufficientDataError):
            sandwich(CROSS[[0, 4]], [0.0, 0.0], NormSpec(2))

    def test_conventions_differ_by_the_excluded_share(self):
        data = np.random.default_rng(32).standard_normal((80, 2))
        theta = data[int(np.argmin(np.linalg.norm(data, axis=1)))]
        excluded = sandwich(data, theta, NormSpec(3))
        zeroed = sandwich(data, theta, NormSpec(3), coincident="zero")
        self.assertEqual(excluded.n_used, 79)
        gap = frobenius_relative_error(zeroed.cov, excluded.cov)
        self.assertAlmostEqual(gap, 1.0 / 79, delta=1e-10)
        self.assertLessEqual(gap, 5.0 / excluded.n_used)

    def test_translation_leaves_the_covariance_unchanged(self):
        rng = np.random.default_rng(33)
        data = rng.integers(-50, 50, (60, 2)) / 8.0
        theta = np.round(weighted_median(data, uniform_weights(60), NormSpec(2)).minimizer * 8.0) / 8.0
        shift = np.array([3.0, -5.0])
        for p in (2.0, 3.0):
            base = sandwich(data, theta, NormSpec(p))
            moved = sandwich(data + shift, theta + shift, NormSpec(p))
            assert_array_equal(moved.cov, base.cov)

    def test_as_dict(self):
        doc = sandwich(CROSS, [0.0, 0.0], NormSpec(2)).as_dict()
        self.assertEqual(set(doc), {"center", "psi_dot_hat", "sigma_hat", "cov", "n_used", "n_rows"})


class QuantileSandwichTest(SimpleTestCase):
    def setUp(self):
        self.data = np.random.default_rng(31).standard_normal((200, 2))
        self.spec = NormSpec(3)

    def test_zero_direction_is_the_median_sandwich(self):
        theta = weighted_median(self.data, uniform_weights(200), self.spec).minimizer
        joint = quantile_sandwich(self.data, theta, [[0.0, 0.0]], self.spec)
        assert_array_equal(joint.block(0, 0), sandwich(self.data, theta, self.spec).cov)

    def test_full_matrix_is_symmetric(self):
        dirs = [[0.0, 0.0], [0.3, 0.1], [-0.2, 0.4]]
        est = empirical_estimates(self.data, dirs, self.spec)
        joint = quantile_sandwich(self.data, est, dirs, self.spec)
        full = joint.full()
        self.assertEqual(full.shape, (6, 6))
        assert_allclose(full, full.T, atol=1e-14)
        assert_allclose(joint.block(1, 2), joint.block(2, 1).T)
        assert_allclose(full[2:4, 4:6], joint.block(1, 2))

    def test_euclidean_blocks_match_the_projector_form(self):
        spec = NormSpec(2)
        dirs = np.array([[0.0, 0.0], [0.3, 0.1]])
        est = empirical_estimates(self.data, dirs, spec)
        joint = quantile_sandwich(self.data, est, dirs, spec)
        pieces = []
        for center, u in zip(est, dirs):
            d = self.data - center
            r = np.linalg.norm(d, axis=1)
            unit = d / r[:, None]
            psi_hat = np.mean([(np.eye(2) - np.outer(e, e)) / s for e, s in zip(unit, r)], axis=0)
            pieces.append((np.linalg.inv(psi_hat), -unit - u))
        for j in range(2):
            for l in range(2):
                inv_j, e_j = pieces[j]
                inv_l, e_l = pieces[l]
                expected = inv_j @ (e_j.T @ e_l / 200) @ inv_l.T
                assert_allclose(joint.block(j, l), expected, rtol=1e-9, atol=1e-12)

    def test_one_estimate_per_direction(self):
        with self.assertRaises(InvalidInputError):
            quantile_sandwich(self.data, [[0.0, 0.0]], [[0.0, 0.0], [0.1, 0.1]], self.spec)


class FrequentistCoverageTest(SimpleTestCase):
    @slow
    def test_sandwich_tracks_the_sampling_covariance(self):
        spec = NormSpec(2)
        opts = SolverOptions()
        n = 400
        root = RngSeed(77)
        estimates = np.array([
            weighted_median(root.child(r).generator().standard_normal((n, 2)), uniform_weights(n), spec, opts).minimizer
            for r in range(400)
        ])
        empirical = np.cov(np.sqrt(n) * estimates, rowvar=False)
        big = RngSeed(78).generator().standard_normal((20_000, 2))
        theta = weighted_median(big, uniform_weights(20_000), spec, opts).minimizer
        reference = sandwich(big, theta, spec).cov
        self.assertLess(frobenius_relative_error(empirical, reference), 0.15)

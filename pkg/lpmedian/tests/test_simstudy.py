"""
Tests for the Monte Carlo coverage study.
"""

import numpy as np
from django.test import SimpleTestCase
from scipy import stats

from lpmedian.engine.bootstrap import RngSeed
from lpmedian.engine.errors import InvalidInputError
from lpmedian.engine.lp_core import NormSpec
from lpmedian.engine.solver import SolverOptions
from lpmedian.services.simstudy import (
    SimConfig,
    _replication,
    gen_data,
    preset_configs,
    run_cell,
    run_table,
)
from lpmedian.tests.helpers import slow


def small(**overrides) -> SimConfig:
    base = {"distribution": "normal", "k": 2, "n": 40, "p": 2.0, "replications": 12, "draws": 60, "seed": 5}
    return SimConfig(**{**base, **overrides})


class GenDataTest(SimpleTestCase):
    def test_normal_moments(self):
        x = gen_data("normal", 100_000, 2, RngSeed(1))
        self.assertEqual(x.shape, (100_000, 2))
        np.testing.assert_allclose(x.mean(axis=0), 0.0, atol=0.02)
        np.testing.assert_allclose(np.cov(x, rowvar=False), np.eye(2), atol=0.02)

    def test_laplace_has_unit_variance_and_heavy_tails(self):
        x = gen_data("laplace", 100_000, 1, RngSeed(2))[:, 0]
        self.assertAlmostEqual(x.var(), 1.0, delta=0.03)
        self.assertAlmostEqual(stats.kurtosis(x, fisher=False), 6.0, delta=0.7)

    def test_reproducible(self):
        np.testing.assert_array_equal(gen_data("laplace", 10, 3, RngSeed(4)), gen_data("laplace", 10, 3, RngSeed(4)))
        with self.assertRaises(InvalidInputError):
            gen_data("cauchy", 10, 2, RngSeed(0))


class SimConfigTest(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(InvalidInputError):
            small(distribution="uniform")
        with self.assertRaises(InvalidInputError):
            small(region="ball")
        with self.assertRaises(InvalidInputError):
            small(level=1.0)
        with self.assertRaises(InvalidInputError):
            small(p=1.0)
        with self.assertRaises(InvalidInputError):
            small(replications=0)
        with self.assertRaises(InvalidInputError):
            small(method="affine", n=4)

    def test_label(self):
        self.assertEqual(small().label, "normal/k=2/p=2/n=40/plain/box")


class RunCellTest(SimpleTestCase):
    def test_small_cell(self):
        result = run_cell(small())
        self.assertEqual(result.completed, 12)
        self.assertEqual(result.failed, 0)
        self.assertGreater(result.size, 0.0)
        self.assertTrue(0.0 <= result.coverage <= 1.0)
        self.assertGreaterEqual(result.coverage_se, 0.0)

    def test_single_replication(self):
        result = run_cell(small(replications=1))
        self.assertEqual(result.completed, 1)
        self.assertEqual(result.size_se, 0.0)
        self.assertEqual(result.coverage_se, 0.0)

    def test_thread_count_does_not_change_results(self):
        config = small(p=3.0, region="ellipsoid", distribution="laplace")
        self.assertEqual(run_cell(config, workers=1), run_cell(config, workers=3))

    def test_higher_level_never_lowers_coverage(self):
        for region in ("box", "ellipsoid"):
            low = run_cell(small(level=0.80, region=region, replications=20))
            high = run_cell(small(level=0.95, region=region, replications=20))
            self.assertLessEqual(low.coverage, high.coverage)
            self.assertLessEqual(low.size, high.size)

    def test_replications_do_not_depend_on_run_order(self):
        config = small(replications=6)
        spec, opts = NormSpec(config.p, config.k), SolverOptions()
        forward = [_replication(config, spec, opts, i) for i in range(6)]
        backward = [_replication(config, spec, opts, i) for i in reversed(range(6))]
        self.assertEqual(forward, backward[::-1])
        result = run_cell(config)
        self.assertEqual(result.coverage, np.mean([covered for _, covered in forward]))
        self.assertEqual(result.size, float(np.mean([size for size, _ in forward])))

    def test_affine_cell(self):
        result = run_cell(small(method="affine", k=2, n=30, replications=4, draws=40))
        self.assertEqual(result.completed, 4)

    def test_box_size_measures(self):
        diagonal = run_cell(small(replications=3))
        mean_width = run_cell(small(replications=3, box_size="mean_width"))
        self.assertGreater(diagonal.size, mean_width.size)


class TableTest(SimpleTestCase):
    def test_deterministic_csv(self):
        configs = [small(n=30), small(n=60)]
        first = run_table(configs, title="check")
        second = run_table(configs, title="check")
        self.assertEqual(first.to_csv(), second.to_csv())
        self.assertEqual(first.as_dict(), second.as_dict())
        self.assertEqual(len(first.frame()), 2)

    def test_text_layout(self):
        text = run_table([small(n=30, replications=3), small(n=60, replications=3)], title="check").to_text()
        self.assertTrue(text.startswith("check"))
        self.assertIn("Coverage (Monte Carlo s.e.)", text)
        self.assertIn("n=30", text)
        self.assertIn("n=60", text)

    def test_empty_table(self):
        with self.assertRaises(InvalidInputError):
            run_table([])

    def test_preset_grids(self):
        self.assertEqual(len(preset_configs("desk")), 2)
        self.assertEqual(len(preset_configs("table1")), 8)
        cells = preset_configs("table4", full_scale=True, method="affine", replications=50)
        self.assertEqual(len(cells), 12)
        self.assertTrue(all(c.k == 3 and c.region == "ellipsoid" for c in cells))
        self.assertTrue(all(c.method == "affine" and c.replications == 50 for c in cells))
        self.assertEqual({c.n for c in cells}, {100, 1000, 10_000})
        with self.assertRaises(InvalidInputError):
            preset_configs("table9")


class DeskCheckTest(SimpleTestCase):
    """Normal data, k=2, p=2, 95% boxes: near-nominal coverage and sqrt(n) shrinkage."""

    @slow
    def test_desk_preset(self):
        small_n, large_n = run_table(preset_configs("desk"), workers=4).results
        for result in (small_n, large_n):
            self.assertAlmostEqual(result.coverage, 0.937, delta=0.03)
        self.assertAlmostEqual(small_n.size, 0.681, delta=0.25 * 0.681)
        self.assertGreaterEqual(small_n.size / large_n.size, 2.0)
        self.assertGreater(small_n.size, large_n.size)

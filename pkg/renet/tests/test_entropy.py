import math

import numpy as np
from django.test import SimpleTestCase

from renet.entropy import (
    FreqDist, JointFreq, averaged_entropy_bounds, change_base, conditional_entropy, entropy,
    entropy_summary, joint_entropy, marginals, symmetrize, windowed_entropy_report,
)
from renet.exceptions import EntropyError
from renet.trace import RoundRobinGrids, StarZipf, Torus, Trace, generate, torus_edges


def random_joint(rng, keys=8, size=20):
    pairs = {}
    for _ in range(size):
        x, y = rng.choice(keys, size=2, replace=False)
        pairs[(int(x), int(y))] = pairs.get((int(x), int(y)), 0) + int(rng.integers(1, 10))
    return JointFreq.from_counts(pairs)


class FreqDistTests(SimpleTestCase):
    def test_probabilities_must_sum_to_one(self):
        with self.assertRaises(EntropyError):
            FreqDist({'a': 0.5, 'b': 0.4})

    def test_negative_entries_are_rejected(self):
        with self.assertRaises(EntropyError):
            FreqDist({'a': 1.5, 'b': -0.5})

    def test_zero_weights_stay_in_universe(self):
        dist = FreqDist.from_weights({'a': 2, 'b': 0})
        self.assertEqual(dist.universe, frozenset({'a', 'b'}))
        self.assertEqual(len(dist), 1)
        self.assertEqual(dist['b'], 0.0)

    def test_empty_weights(self):
        with self.assertRaises(EntropyError):
            FreqDist.from_weights({})


class EntropyTests(SimpleTestCase):
    def test_uniform(self):
        self.assertAlmostEqual(entropy(FreqDist({k: 0.25 for k in 'abcd'})), 2.0, places=12)

    def test_skewed(self):
        self.assertAlmostEqual(entropy(FreqDist({'a': 0.5, 'b': 0.25, 'c': 0.25})), 1.5, places=12)

    def test_point_mass(self):
        self.assertEqual(entropy(FreqDist({'a': 1.0})), 0.0)

    def test_base_must_exceed_one(self):
        with self.assertRaises(EntropyError):
            entropy(FreqDist({'a': 1.0}), base=1)

    def test_marginals(self):
        hx, hy = marginals(JointFreq({(1, 2): 0.5, (1, 3): 0.5}))
        self.assertEqual(hx.probs, {1: 1.0})
        self.assertEqual(hy.probs, {2: 0.5, 3: 0.5})
        hx, hy = marginals(JointFreq({(1, 2): 0.5, (2, 1): 0.5}))
        self.assertEqual(hx.probs, {1: 0.5, 2: 0.5})
        self.assertEqual(hy.probs, {1: 0.5, 2: 0.5})

    def test_torus_conditional_entropy_is_two(self):
        edges = sorted(torus_edges(16))
        joint = JointFreq({edge: 1 / len(edges) for edge in edges})
        self.assertAlmostEqual(conditional_entropy(joint, 'YgivenX'), 2.0, places=9)
        self.assertAlmostEqual(conditional_entropy(joint, 'XgivenY'), 2.0, places=9)

    def test_conditional_by_hand(self):
        joint = JointFreq({(1, 2): 0.25, (1, 3): 0.25, (2, 1): 0.5})
        self.assertAlmostEqual(conditional_entropy(joint, 'YgivenX'), 0.5, places=12)
        self.assertEqual(conditional_entropy(JointFreq({(1, 2): 1.0}), 'XgivenY'), 0.0)

    def test_unknown_direction(self):
        with self.assertRaises(EntropyError):
            conditional_entropy(JointFreq({(1, 2): 1.0}), 'sideways')

    def test_joint_entropy(self):
        self.assertAlmostEqual(joint_entropy(JointFreq({(1, 2): 0.5, (2, 1): 0.5})), 1.0, places=12)
        self.assertEqual(joint_entropy(JointFreq({(1, 2): 1.0})), 0.0)

    def test_symmetrize(self):
        self.assertEqual(symmetrize(JointFreq({(1, 2): 1.0})).entries, {(1, 2): 0.5, (2, 1): 0.5})
        symmetric = JointFreq({(1, 2): 0.5, (2, 1): 0.5})
        self.assertEqual(symmetrize(symmetric).entries, symmetric.entries)

    def test_change_base(self):
        self.assertAlmostEqual(change_base(4.0, 4), 2.0, places=12)
        self.assertEqual(change_base(3.0, 2), 3.0)


class EntropyIdentityTests(SimpleTestCase):
    """Identities checked over seeded random sparse joints."""

    def test_identities(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            joint = random_joint(rng)
            s = entropy_summary(joint)
            self.assertAlmostEqual(s['HXY'], s['HX'] + s['HYgX'], delta=1e-6)
            self.assertAlmostEqual(s['HXY'], s['HY'] + s['HXgY'], delta=1e-6)
            self.assertLessEqual(s['HYgX'], s['HY'] + 1e-9)
            self.assertLessEqual(s['HXgY'], s['HX'] + 1e-9)
            in_base_5 = conditional_entropy(joint, 'YgivenX', base=5)
            self.assertAlmostEqual(in_base_5, change_base(s['HYgX'], 5), delta=1e-9)

            sym = symmetrize(joint)
            forward = conditional_entropy(sym, 'YgivenX')
            self.assertAlmostEqual(forward, conditional_entropy(sym, 'XgivenY'), delta=1e-9)
            self.assertLessEqual(forward, s['H_con'] + 1 + 1e-6)

    def test_averaged_bounds_hold(self):
        rng = np.random.default_rng(7)
        keys = range(16)
        for _ in range(1000):
            p = FreqDist.from_weights(dict(zip(keys, rng.random(16) * rng.integers(0, 2, 16))) | {0: 1.0})
            q = FreqDist.from_weights(dict(zip(keys, rng.random(16))))
            self.assertTrue(averaged_entropy_bounds(p, q).holds)

    def test_averaged_bounds_tight_case(self):
        p = FreqDist.from_weights({'a': 1, 'b': 0})
        q = FreqDist.from_weights({'a': 0, 'b': 1})
        bounds = averaged_entropy_bounds(p, q)
        self.assertEqual(bounds.h_star, 0.0)
        self.assertAlmostEqual(bounds.averaged, 1.0, places=12)
        self.assertAlmostEqual(bounds.upper_slack, 0.0, places=12)
        self.assertTrue(bounds.holds)

    def test_averaged_bounds_identical(self):
        p = FreqDist({'a': 0.5, 'b': 0.25, 'c': 0.25})
        bounds = averaged_entropy_bounds(p, p)
        self.assertAlmostEqual(bounds.averaged, bounds.h_star, places=12)

    def test_averaged_bounds_need_one_universe(self):
        with self.assertRaises(EntropyError):
            averaged_entropy_bounds(FreqDist({'a': 1.0}), FreqDist({'b': 1.0}))


class WindowedReportTests(SimpleTestCase):
    def test_constant_trace_has_zero_entropy(self):
        report = windowed_entropy_report(Trace.over_range(3, [(1, 2)] * 20), window=5, stride=5)
        self.assertEqual(list(report['t']), [5, 10, 15, 20])
        self.assertTrue((report.drop(columns='t') == 0).all().all())

    def test_window_and_stride_bounds(self):
        trace = Trace.over_range(3, [(1, 2)] * 4)
        with self.assertRaises(EntropyError):
            windowed_entropy_report(trace, window=5, stride=1)
        with self.assertRaises(EntropyError):
            windowed_entropy_report(trace, window=2, stride=0)

    def test_torus_window_conditional_entropy(self):
        trace = generate(Torus(64, 100000), seed=1)
        report = windowed_entropy_report(trace, window=10000, stride=10000)
        self.assertTrue(((report['HYgX'] - 2.0).abs() < 0.1).all())
        self.assertAlmostEqual(report['HX_full'].iloc[-1], math.log2(64), delta=0.01)

    def test_star_zipf_conditioning_reduces_entropy(self):
        trace = generate(StarZipf(32, 5000, alpha=1), seed=3)
        report = windowed_entropy_report(trace, window=1000, stride=500)
        self.assertTrue((report['HYgX'] < report['HY']).all())
        self.assertTrue((report['HXgY'] < report['HX']).all())

    def test_phase_changes_raise_full_trace_conditional_entropy(self):
        trace = generate(RoundRobinGrids(64, 8, 5000), seed=4)
        report = windowed_entropy_report(trace, window=5000, stride=5000)
        self.assertTrue(((report['HYgX'] - 2.0).abs() < 0.1).all())
        last = report.iloc[-1]
        self.assertGreater(last['HYgX_full'], last['HYgX'] + 1.5)

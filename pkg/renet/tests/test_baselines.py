import itertools
import math

from django.test import SimpleTestCase

from renet.baselines import ObliviousNet, build_static_dan, oblivious_cost, stat_cost, static_lower_bound
from renet.exceptions import EntropyError, SparsityViolation, StaticDanError
from renet.network import NetParams
from renet.trace import StarZipf, Torus, Trace, UniformPairs, generate, torus_edges


class ObliviousNetTests(SimpleTestCase):
    def test_de_bruijn_shape(self):
        net = ObliviousNet(range(8))
        self.assertEqual(net.diameter, 3)
        self.assertLessEqual(net.max_degree(), 4)
        for u, v in itertools.permutations(range(8), 2):
            self.assertLessEqual(net.distance(u, v), 3)
            self.assertEqual(net.distance(u, v), net.distance(v, u))

    def test_embedding_is_seeded(self):
        self.assertEqual(ObliviousNet(range(20), seed=4).embedding, ObliviousNet(range(20), seed=4).embedding)

    def test_single_node(self):
        with self.assertRaises(StaticDanError):
            ObliviousNet([0])

    def test_cost_grows_with_log_n(self):
        trace = generate(Torus(256, 20000), seed=1)
        self.assertGreaterEqual(oblivious_cost(ObliviousNet(trace.nodes, seed=1), trace), 4)


class LowerBoundTests(SimpleTestCase):
    def test_torus_edges(self):
        trace = Trace.over_range(16, sorted(torus_edges(16)))
        self.assertAlmostEqual(static_lower_bound(trace, 24), 2 / math.log2(24), places=9)
        self.assertAlmostEqual(static_lower_bound(trace, 24), 0.4362, places=4)

    def test_all_pairs(self):
        trace = Trace.over_range(16, list(itertools.permutations(range(16), 2)))
        self.assertAlmostEqual(static_lower_bound(trace, 24), math.log(15, 24), places=9)

    def test_single_pair(self):
        self.assertEqual(static_lower_bound(Trace.over_range(4, [(1, 2)] * 5), 24), 0.0)

    def test_degree_must_exceed_one(self):
        with self.assertRaises(EntropyError):
            static_lower_bound(Trace.over_range(4, [(1, 2)]), 1)


class StaticDanTests(SimpleTestCase):
    def test_small_nodes_link_directly(self):
        trace = generate(Torus(16, 2000), seed=1)
        dan = build_static_dan(trace, NetParams(n=16, c=4))
        self.assertFalse(dan.large)
        self.assertEqual(stat_cost(dan, trace), 1.0)

    def test_hub_tree_follows_demand(self):
        trace = generate(StarZipf(64, 5000, alpha=1), seed=2)
        params = NetParams(n=64, c=2)
        dan = build_static_dan(trace, params)
        self.assertEqual(dan.large, {0})
        self.assertAlmostEqual(stat_cost(dan, trace), dan.expected_depth(0) + 1, delta=1e-9)
        self.assertLessEqual(max(dan.degrees().values()), params.delta_cap)

    def test_large_pairs_relay_through_a_helper(self):
        requests = [(0, leaf) for leaf in range(2, 12)] + [(1, leaf) for leaf in range(12, 22)] + [(0, 1)]
        trace = Trace.over_range(32, requests)
        dan = build_static_dan(trace, NetParams(n=32, c=2))
        self.assertEqual(dan.large, {0, 1})
        self.assertEqual(dan.helpers[(0, 1)], 2)
        self.assertEqual(dan.trees[0].occupant(1), 2)
        expected = dan.depths(0)[1] + dan.depths(1)[0] + 2
        self.assertEqual(dan.route_hops(0, 1), expected)
        self.assertEqual(dan.route_hops(3, 0), dan.depths(0)[3] + 1)

    def test_unknown_pair(self):
        trace = Trace.over_range(8, [(0, 1), (2, 3)])
        dan = build_static_dan(trace, NetParams(n=8, c=1))
        with self.assertRaises(StaticDanError):
            dan.route_hops(0, 3)

    def test_dense_trace_is_rejected(self):
        trace = generate(UniformPairs(16, 2000), seed=1)
        with self.assertRaises(SparsityViolation):
            build_static_dan(trace, NetParams(n=16, c=1))

    def test_snapshot_layout(self):
        trace = generate(StarZipf(32, 1000, alpha=1), seed=2)
        snapshot = build_static_dan(trace, NetParams(n=32, c=2)).snapshot()
        self.assertEqual(set(snapshot), {'params', 'nodes', 'edges', 'trees', 'coordinator'})
        self.assertEqual([tree['owner'] for tree in snapshot['trees']], [0])

import math
from collections import Counter

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from renet.ego_tree import EgoTree, TreeCost
from renet.entropy import FreqDist, entropy
from renet.exceptions import DuplicateKeyError, KeyAbsentError, TreeError
from renet.trace import zipf_weights

OWNER = 0


def tree_of(keys, capacity=0):
    tree = EgoTree(OWNER, capacity=capacity)
    for key in keys:
        tree.insert(key, key)
    return tree


def physical(counter):
    return {edge: count for edge, count in counter.items() if count}


class InsertTests(SimpleTestCase):
    def test_first_key_becomes_root(self):
        tree = EgoTree(OWNER)
        cost = tree.insert(5, 5)
        self.assertEqual(tree.root.key, 5)
        self.assertEqual((cost.link_changes, cost.rotations), (1, 0))
        self.assertEqual(cost.physical(), {(0, 5): 1})

    def test_second_key_is_splayed_up(self):
        tree = tree_of([5])
        cost = tree.insert(3, 3)
        self.assertEqual(tree.dump(), '(3:3 (5:5))')
        self.assertEqual((cost.rotations, cost.link_changes), (1, 2))
        self.assertEqual(cost.physical(), {(0, 3): 1, (0, 5): -1, (3, 5): 1})

    def test_duplicate_key_leaves_tree_unchanged(self):
        tree = tree_of([5, 3, 8])
        before = tree.dump()
        with self.assertRaises(DuplicateKeyError):
            tree.insert(3, 3)
        self.assertEqual(tree.dump(), before)

    def test_owner_cannot_occupy(self):
        with self.assertRaises(TreeError):
            EgoTree(OWNER).insert(4, OWNER)

    def test_static_tree_rejects_insert(self):
        tree = EgoTree.build_static(OWNER, FreqDist({1: 1.0}))
        with self.assertRaises(TreeError):
            tree.insert(2, 2)


class RouteTests(SimpleTestCase):
    def test_route_down_hit(self):
        tree = EgoTree.from_dump(OWNER, '((1:1) 2:2 (3:3))')
        route = tree.route_down(3)
        self.assertTrue(route.hit)
        self.assertEqual((route.path, route.hops), ([2, 3], 2))

    def test_route_down_miss_reports_anchor(self):
        route = tree_of([3, 1, 4, 2, 5]).route_down(7)
        self.assertFalse(route.hit)
        self.assertEqual(route.anchor, 5)

    def test_route_down_empty_tree(self):
        route = EgoTree(OWNER).route_down(1)
        self.assertEqual((route.hit, route.anchor, route.hops), (False, None, 0))

    def test_route_up(self):
        tree = EgoTree.from_dump(OWNER, '((1:1) 2:2 (3:3 (4:4)))')
        self.assertEqual(tree.route_up(2).hops, 1)
        route = tree.route_up(4)
        self.assertEqual((route.path, route.hops), ([4, 3, 2], 3))

    def test_virtual_root_is_one_hop(self):
        tree = EgoTree.from_dump(OWNER, '(1:1 (2:2 (3:3 (4:4 (5:5)))))', capacity=1, virtual_roots=[5])
        self.assertEqual(tree.depth(5), 4)
        self.assertEqual(tree.route_up(5).hops, 1)
        self.assertEqual(tree.route_down(5).hops, 1)

    @settings(deadline=None, max_examples=60)
    @given(st.permutations(list(range(1, 16))))
    def test_down_and_up_agree(self, order):
        tree = tree_of(order)
        for key in order:
            self.assertEqual(tree.route_down(key).hops, tree.route_up(key).hops)
            self.assertEqual(tree.route_down(key).hops, tree.depth(key) + 1)


class AdjustTests(SimpleTestCase):
    def test_zig_zig_on_left_spine(self):
        tree = EgoTree.from_dump(OWNER, '(((1:1) 2:2) 3:3)')
        cost = tree.adjust(1)
        self.assertEqual(cost.rotations, 2)
        self.assertEqual(tree.dump(), '(1:1 (2:2 (3:3)))')

    def test_adjusting_the_root(self):
        tree = tree_of([1, 2, 3])
        cost = tree.adjust(3)
        self.assertEqual((cost.rotations, cost.link_changes), (0, 0))

        tree = tree_of([1, 2, 3], capacity=2)
        self.assertEqual(tree.adjust(3).link_changes, 1)
        self.assertEqual(tree.adjust(3).link_changes, 0)

    def test_lru_eviction_drops_owner_link(self):
        tree = tree_of([1, 2, 3], capacity=1)
        tree.adjust(1)
        cost = tree.adjust(3)
        self.assertEqual(list(tree.virtual_roots), [3])
        self.assertEqual(cost.link_changes, cost.rotations + 2)
        self.assertNotIn((0, 1), physical(tree.links()))

    def test_fifo_does_not_refresh(self):
        tree = EgoTree(OWNER, capacity=2, policy='fifo')
        for key in (1, 2, 3):
            tree.insert(key, key)
        tree.adjust(1)
        tree.adjust(2)
        tree.adjust(1)
        tree.adjust(3)
        self.assertEqual(list(tree.virtual_roots), [2, 3])

    def test_refused_admission_keeps_the_key_in_the_tree_only(self):
        tree = EgoTree(OWNER, capacity=2, admit=lambda occupant: occupant != 2)
        for key in (1, 2, 3):
            tree.insert(key, key)
        cost = tree.adjust(2)
        self.assertEqual(tree.root.key, 2)
        self.assertEqual(list(tree.virtual_roots), [])
        self.assertEqual(cost.link_changes, cost.rotations)
        tree.adjust(1)
        self.assertEqual(list(tree.virtual_roots), [1])

    def test_release_virtual_root(self):
        tree = tree_of([1, 2, 3], capacity=2)
        tree.adjust(1)
        tree.adjust(3)
        self.assertEqual(list(tree.virtual_roots), [1, 3])

        cost = tree.release_virtual_root(1)
        self.assertEqual((cost.link_changes, cost.physical()), (1, {(0, 1): -1}))
        self.assertNotIn((0, 1), physical(tree.links()))

        cost = tree.release_virtual_root(3)
        self.assertEqual((cost.link_changes, cost.physical()), (1, {}))
        self.assertIn((0, 3), physical(tree.links()))
        self.assertEqual(tree.release_virtual_root(2).link_changes, 0)

    def test_raw_accounting(self):
        tree = EgoTree.from_dump(OWNER, '(((1:1) 2:2) 3:3)', accounting='raw')
        self.assertEqual(tree.adjust(1).link_changes, 12)

    def test_sequential_access_is_linear(self):
        n = 1000
        tree = EgoTree(OWNER)
        for key in range(1, n + 1):
            tree.insert(key, key)
        rotations = sum(tree.adjust(key).rotations for key in range(1, n + 1))
        self.assertLessEqual(rotations, 4 * n)

    def test_static_tree_does_not_move(self):
        tree = EgoTree.build_static(OWNER, FreqDist({1: 0.5, 2: 0.5}))
        before = tree.dump()
        self.assertEqual(tree.adjust(2), TreeCost())
        self.assertEqual(tree.dump(), before)

    def test_access_cost_tracks_entropy(self):
        n, m = 128, 100000
        weights = zipf_weights(n, 1.0)
        h = entropy(FreqDist(dict(zip(range(1, n + 1), weights))))
        rng = np.random.default_rng(5)
        order = rng.permutation(np.arange(1, n + 1))
        accesses = rng.choice(np.arange(1, n + 1), size=m, p=weights)
        for capacity in (0, 23):
            tree = tree_of([int(key) for key in order], capacity=capacity)
            total = 0
            for key in accesses.tolist():
                total += tree.route_down(key).hops + tree.adjust(key).rotations
            self.assertLessEqual(total, 3 * m * (h + 1) + 2 * n * math.log2(n))


class RemoveTests(SimpleTestCase):
    def test_remove_singleton(self):
        tree = tree_of([4])
        cost = tree.remove(4)
        self.assertIsNone(tree.root)
        self.assertEqual(cost.link_changes, 1)
        self.assertEqual(tree.links(), Counter())

    def test_remove_leaf(self):
        tree = EgoTree.from_dump(OWNER, '((1:1) 2:2 (3:3))')
        tree.remove(3)
        self.assertEqual(tree.keys(), [1, 2])
        self.assertEqual(tree.check_order(), [])

    def test_remove_inner_key(self):
        tree = tree_of([5, 2, 8, 1, 3, 7, 9])
        tree.remove(5)
        self.assertEqual(tree.keys(), [1, 2, 3, 7, 8, 9])
        self.assertEqual(tree.check_order(), [])

    def test_remove_absent(self):
        with self.assertRaises(KeyAbsentError):
            tree_of([1]).remove(2)


class ReplaceOccupantTests(SimpleTestCase):
    def test_root_only(self):
        tree = tree_of([1])
        cost = tree.replace_occupant(1, 42)
        self.assertEqual(cost.link_changes, 1)
        self.assertEqual(cost.physical(), {(0, 1): -1, (0, 42): 1})

    def test_inner_entry(self):
        tree = EgoTree.from_dump(OWNER, '((1:1) 2:2 ((3:3) 4:4 (5:5)))')
        self.assertEqual(tree.replace_occupant(4, 42).link_changes, 3)
        self.assertEqual(tree.occupant(4), 42)
        self.assertEqual(tree.keys(), [1, 2, 3, 4, 5])

    def test_owner_is_rejected(self):
        with self.assertRaises(TreeError):
            tree_of([1]).replace_occupant(1, OWNER)


class BuildStaticTests(SimpleTestCase):
    def test_weighted_split(self):
        dist = FreqDist({'a': 0.5, 'b': 0.25, 'c': 0.25})
        tree = EgoTree.build_static('o', dist)
        self.assertEqual(tree.dump(), '((a:a) b:b (c:c))')
        self.assertAlmostEqual(tree.expected_depth(dist), 0.75, places=12)

    def test_uniform_is_balanced(self):
        tree = EgoTree.build_static(OWNER, FreqDist.from_weights({key: 1 for key in range(1, 8)}))
        self.assertEqual(tree.root.key, 4)
        self.assertEqual(max(tree.depths().values()), 2)

    def test_single_key(self):
        dist = FreqDist({7: 1.0})
        tree = EgoTree.build_static(OWNER, dist)
        self.assertEqual(tree.keys(), [7])
        self.assertEqual(tree.expected_depth(dist), 0.0)

    def test_occupants_are_seated(self):
        tree = EgoTree.build_static(OWNER, FreqDist({1: 0.5, 2: 0.5}), occupants={2: 9})
        self.assertEqual(tree.occupant(2), 9)

    def test_expected_depth_is_near_entropy(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            size = int(rng.integers(1, 60))
            dist = FreqDist.from_weights(dict(zip(range(1, size + 1), rng.zipf(1.5, size).astype(float))))
            tree = EgoTree.build_static(OWNER, dist)
            self.assertLessEqual(tree.expected_depth(dist), entropy(dist) + 2 + 1e-9)


class StructureTests(SimpleTestCase):
    def test_dump_round_trip(self):
        text = '((1:1) 2:2 (3:3))'
        self.assertEqual(EgoTree.from_dump(OWNER, text).dump(), text)
        self.assertEqual(EgoTree(OWNER).dump(), '()')
        self.assertEqual(EgoTree.from_dump(OWNER, '()').root, None)

    def test_malformed_dumps(self):
        for text in ('((1:1) 2:2', '(1:1) (2:2)', '(1 2)', '((1:1) (3:3))'):
            with self.assertRaises(TreeError):
                EgoTree.from_dump(OWNER, text)
        with self.assertRaises(TreeError):
            EgoTree.from_dump(OWNER, '(1:1)', capacity=1, virtual_roots=[2])

    def test_check_order_reports_corruption(self):
        tree = EgoTree.from_dump(OWNER, '((3:3) 2:2 (1:1))')
        self.assertTrue(tree.check_order())

    def test_links_match_accumulated_changes(self):
        rng = np.random.default_rng(3)
        tree = EgoTree(OWNER, capacity=3)
        changes = Counter()
        for _ in range(400):
            keys = list(tree.entries)
            action = rng.integers(0, 4)
            if action == 0 or not keys:
                key = int(rng.integers(1, 31))
                if key in tree:
                    continue
                cost = tree.insert(key, key)
            elif action == 1:
                cost = tree.adjust(keys[rng.integers(len(keys))])
            elif action == 2:
                cost = tree.remove(keys[rng.integers(len(keys))])
            else:
                cost = tree.replace_occupant(keys[rng.integers(len(keys))], int(rng.integers(100, 103)))
            changes.update(cost.delta)
            self.assertEqual(physical(changes), physical(tree.links()))
            self.assertEqual(tree.check_order(), [])

"""Ego-trees: one node's self-adjusting binary search tree over its partners.

Each position (``TreeEntry``) is keyed by a partner and physically occupied
either by that partner or by a helper relaying for it. The owner links to the
root and to every virtual root. Every mutation returns a ``TreeCost`` whose
``delta`` records the exact physical edge changes it made.
"""
import math
import re
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DuplicateKeyError, KeyAbsentError, TreeError


ACCOUNTING_MODES = ('unit', 'raw')
VR_POLICIES = ('lru', 'fifo')

# raw accounting: three removals and three additions per rotation
RAW_ROTATION_COST = 6

_DUMP_TOKEN = re.compile(r'\(|\)|[^\s()]+')
_INT_KEY = re.compile(r'^-?\d+$')


def edge_key(a, b):
    return (a, b) if a <= b else (b, a)


def parse_address(text):
    return int(text) if _INT_KEY.match(text) else text


class TreeEntry:
    __slots__ = ('key', 'occupant', 'left', 'right', 'parent')

    def __init__(self, key, occupant):
        self.key = key
        self.occupant = occupant
        self.left = None
        self.right = None
        self.parent = None

    def __repr__(self):
        return f'TreeEntry({self.key!r}:{self.occupant!r})'


@dataclass
class TreeCost:
    hops: int = 0
    link_changes: int = 0
    rotations: int = 0
    delta: Counter = field(default_factory=Counter)

    def add_link(self, a, b):
        if a != b:
            self.delta[edge_key(a, b)] += 1

    def drop_link(self, a, b):
        if a != b:
            self.delta[edge_key(a, b)] -= 1

    def physical(self):
        """Net physical edge changes, zero entries dropped."""
        return {edge: count for edge, count in sorted(self.delta.items()) if count}

    def __iadd__(self, other):
        self.hops += other.hops
        self.link_changes += other.link_changes
        self.rotations += other.rotations
        self.delta.update(other.delta)
        return self


class RouteHit(NamedTuple):
    path: list
    hops: int
    hit: bool = True


class RouteMiss(NamedTuple):
    anchor: object
    path: list
    hops: int
    hit: bool = False


class EgoTree:
    def __init__(self, owner, capacity=0, accounting='unit', policy='lru', static=False, admit=None):
        """``admit(occupant)`` may veto a new virtual root whose occupant has no port left."""
        if accounting not in ACCOUNTING_MODES:
            raise TreeError(f'unknown rotation accounting {accounting!r}')
        if policy not in VR_POLICIES:
            raise TreeError(f'unknown virtual-root policy {policy!r}')
        if capacity < 0:
            raise TreeError(f'virtual-root capacity must be non-negative, got {capacity}')
        self.owner = owner
        self.capacity = capacity
        self.accounting = accounting
        self.policy = policy
        self.static = static
        self.admit = admit
        self.root = None
        self.entries = {}
        self.virtual_roots = OrderedDict()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def __repr__(self):
        return f'EgoTree(owner={self.owner!r}, size={len(self)})'

    @property
    def rotation_cost(self):
        return RAW_ROTATION_COST if self.accounting == 'raw' else 1

    def _entry(self, key):
        try:
            return self.entries[key]
        except KeyError:
            raise KeyAbsentError(f'key {key!r} is not in the ego-tree of {self.owner!r}') from None

    def occupant(self, key):
        return self._entry(key).occupant

    def is_owner_linked(self, key):
        return (self.root is not None and self.root.key == key) or key in self.virtual_roots

    # Structure

    def _set_root(self, new_root, cost):
        """Move the owner's root link; virtual roots keep theirs. Returns physical changes made."""
        old_root, changes = self.root, 0
        if old_root is not None and old_root.key not in self.virtual_roots:
            cost.drop_link(self.owner, old_root.occupant)
            changes += 1
        if new_root is not None and new_root.key not in self.virtual_roots:
            cost.add_link(self.owner, new_root.occupant)
            changes += 1
        self.root = new_root
        if new_root is not None:
            new_root.parent = None
        return changes

    def _rotate(self, x, cost):
        """Rotate ``x`` above its parent."""
        p = x.parent
        g = p.parent
        if p.left is x:
            b = x.right
            p.left, x.right = b, p
        else:
            b = x.left
            p.right, x.left = b, p
        # b changes parent from x to p
        if b is not None:
            b.parent = p
            cost.drop_link(x.occupant, b.occupant)
            cost.add_link(p.occupant, b.occupant)
        p.parent = x
        if g is None:
            self._set_root(x, cost)
        else:
            if g.left is p:
                g.left = x
            else:
                g.right = x
            x.parent = g
            cost.drop_link(g.occupant, p.occupant)
            cost.add_link(g.occupant, x.occupant)
        cost.rotations += 1
        cost.link_changes += self.rotation_cost

    def _splay(self, x, cost):
        while x.parent is not None:
            p = x.parent
            g = p.parent
            if g is None:
                self._rotate(x, cost)
            elif (g.left is p) == (p.left is x):
                self._rotate(p, cost)
                self._rotate(x, cost)
            else:
                self._rotate(x, cost)
                self._rotate(x, cost)

    # Operations

    def insert(self, key, occupant):
        """Attach ``key`` as a leaf at its BST position, then splay it to the root."""
        if self.static:
            raise TreeError(f'the ego-tree of {self.owner!r} is static')
        if key in self.entries:
            raise DuplicateKeyError(f'key {key!r} already in the ego-tree of {self.owner!r}')
        if occupant == self.owner:
            raise TreeError(f'{self.owner!r} cannot occupy a position in its own ego-tree')

        entry = TreeEntry(key, occupant)
        self.entries[key] = entry
        cost = TreeCost()
        if self.root is None:
            cost.link_changes += self._set_root(entry, cost)
            return cost

        # attach as a leaf, then splay up
        node = self.root
        while True:
            side = 'left' if key < node.key else 'right'
            child = getattr(node, side)
            if child is None:
                setattr(node, side, entry)
                entry.parent = node
                break
            node = child
        cost.add_link(node.occupant, occupant)
        cost.link_changes += 1
        self._splay(entry, cost)
        return cost

    def route_down(self, key):
        """Walk from the root towards ``key``; virtual roots are one hop away."""
        if self.root is None:
            return RouteMiss(anchor=None, path=[], hops=0)
        if key in self.virtual_roots:
            entry = self.entries[key]
            return RouteHit(path=[entry.occupant], hops=1)
        path, node = [], self.root
        while True:
            path.append(node.occupant)
            if key == node.key:
                return RouteHit(path=path, hops=len(path))
            child = node.left if key < node.key else node.right
            if child is None:
                return RouteMiss(anchor=node.key, path=path, hops=len(path))
            node = child

    def route_up(self, key):
        """Occupants from ``key``'s position up to the root, then the owner."""
        entry = self._entry(key)
        if key in self.virtual_roots:
            return RouteHit(path=[entry.occupant], hops=1)
        path = []
        while entry is not None:
            path.append(entry.occupant)
            entry = entry.parent
        return RouteHit(path=path, hops=len(path))

    def adjust(self, key):
        """Splay ``key`` to the root and record it as a virtual root."""
        entry = self._entry(key)
        cost = TreeCost()
        if self.static:
            return cost
        self._splay(entry, cost)
        self._push_virtual_root(key, cost)
        return cost

    def _push_virtual_root(self, key, cost):
        if not self.capacity:
            return
        if key in self.virtual_roots:
            if self.policy == 'lru':
                self.virtual_roots.move_to_end(key)
            return
        if self.admit is not None and not self.admit(self.entries[key].occupant):
            return
        self.virtual_roots[key] = True
        cost.link_changes += 1
        if len(self.virtual_roots) > self.capacity:
            cost += self.release_virtual_root(next(iter(self.virtual_roots)))

    def release_virtual_root(self, key):
        """Drop ``key``'s direct owner link; the root keeps its link through the tree."""
        cost = TreeCost()
        if self.virtual_roots.pop(key, None) is None:
            return cost
        cost.link_changes += 1
        entry = self.entries[key]
        if self.root is not entry:
            cost.drop_link(self.owner, entry.occupant)
        return cost

    def remove(self, key):
        """Splay-delete ``key``: splay it up, drop it, and join its two subtrees."""
        if self.static:
            raise TreeError(f'the ego-tree of {self.owner!r} is static')
        entry = self._entry(key)
        cost = TreeCost()
        self._splay(entry, cost)
        self.virtual_roots.pop(key, None)

        left, right = entry.left, entry.right
        for child in (left, right):
            if child is not None:
                cost.drop_link(entry.occupant, child.occupant)
                cost.link_changes += 1
                child.parent = None
        entry.left = entry.right = None
        del self.entries[key]

        if left is None:
            cost.link_changes += self._set_root(right, cost)
            return cost
        # the largest key on the left becomes the root and takes the right side as its right child
        cost.link_changes += self._set_root(left, cost)
        top = left
        while top.right is not None:
            top = top.right
        self._splay(top, cost)
        if right is not None:
            top.right = right
            right.parent = top
            cost.add_link(top.occupant, right.occupant)
            cost.link_changes += 1
        return cost

    def replace_occupant(self, key, new_occupant):
        """Seat ``new_occupant`` at ``key``'s position, rewiring every link of the position."""
        if new_occupant == self.owner:
            raise TreeError(f'{self.owner!r} cannot occupy a position in its own ego-tree')
        entry = self._entry(key)
        cost = TreeCost()
        old = entry.occupant
        neighbours = [other for other in (entry.parent, entry.left, entry.right) if other is not None]
        for other in neighbours:
            cost.drop_link(other.occupant, old)
            cost.add_link(other.occupant, new_occupant)
        cost.link_changes += len(neighbours)
        if self.is_owner_linked(key):
            cost.drop_link(self.owner, old)
            cost.add_link(self.owner, new_occupant)
            cost.link_changes += 1
        entry.occupant = new_occupant
        return cost

    # Static trees

    @classmethod
    def build_static(cls, owner, dist, occupants=None):
        """Fixed tree rooted, at every level, at the key that best balances the two sides' weight.

        Ties go to the smaller key. ``occupants`` maps a key to the node seated there.
        """
        keys = sorted(dist.universe)
        if not keys:
            raise TreeError(f'cannot build a static ego-tree for {owner!r} from an empty distribution')
        occupants = occupants or {}
        tree = cls(owner, capacity=0, static=True)
        prefix = np.concatenate(([0.0], np.cumsum([dist[key] for key in keys])))

        def pick(lo, hi):
            index = np.arange(lo, hi)
            imbalance = np.abs((prefix[index] - prefix[lo]) - (prefix[hi] - prefix[index + 1]))
            return lo + int(np.argmin(np.round(imbalance, 12)))

        pending = [(0, len(keys), None, None)]
        while pending:
            lo, hi, parent, side = pending.pop()
            if lo >= hi:
                continue
            middle = pick(lo, hi)
            key = keys[middle]
            entry = TreeEntry(key, occupants.get(key, key))
            tree.entries[key] = entry
            if parent is None:
                tree.root = entry
            else:
                setattr(parent, side, entry)
                entry.parent = parent
            pending.append((middle + 1, hi, entry, 'right'))
            pending.append((lo, middle, entry, 'left'))
        return tree

    # Inspection

    def _in_order(self):
        stack, node = [], self.root
        while stack or node is not None:
            while node is not None:
                stack.append(node)
                node = node.left
            node = stack.pop()
            yield node
            node = node.right

    def keys(self):
        return [entry.key for entry in self._in_order()]

    def depth(self, key):
        entry, depth = self._entry(key), 0
        while entry.parent is not None:
            entry = entry.parent
            depth += 1
        return depth

    def depths(self):
        """Depth of every key, computed top-down in one pass."""
        result = {}
        if self.root is None:
            return result
        stack = [(self.root, 0)]
        while stack:
            entry, depth = stack.pop()
            result[entry.key] = depth
            for child in (entry.left, entry.right):
                if child is not None:
                    stack.append((child, depth + 1))
        return result

    def expected_depth(self, dist):
        depths = self.depths()
        return math.fsum(p * depths[key] for key, p in sorted(dist.items()))

    def links(self):
        """Physical edges of the live structure, as a multiset."""
        edges = Counter()
        for entry in self.entries.values():
            if entry.parent is not None and entry.parent.occupant != entry.occupant:
                edges[edge_key(entry.parent.occupant, entry.occupant)] += 1
        owner_linked = set(self.virtual_roots)
        if self.root is not None:
            owner_linked.add(self.root.key)
        for key in owner_linked:
            edges[edge_key(self.owner, self.entries[key].occupant)] += 1
        return edges

    def check_order(self):
        """Problems with BST order, parent pointers or virtual roots; empty when healthy."""
        problems = []
        if self.root is not None and self.root.parent is not None:
            problems.append(f'tree {self.owner}: root {self.root.key} has a parent')
        previous, seen = None, 0
        for entry in self._in_order():
            seen += 1
            if previous is not None and not previous.key < entry.key:
                problems.append(f'tree {self.owner}: keys {previous.key} and {entry.key} out of order')
            for child in (entry.left, entry.right):
                if child is not None and child.parent is not entry:
                    problems.append(f'tree {self.owner}: entry {child.key} has a stale parent pointer')
            if entry.occupant == self.owner:
                problems.append(f'tree {self.owner}: owner occupies position {entry.key}')
            previous = entry
        if seen != len(self.entries):
            problems.append(f'tree {self.owner}: {seen} reachable entries but {len(self.entries)} registered')
        if len(self.virtual_roots) > self.capacity:
            problems.append(f'tree {self.owner}: {len(self.virtual_roots)} virtual roots exceed capacity {self.capacity}')
        for key in self.virtual_roots:
            if key not in self.entries:
                problems.append(f'tree {self.owner}: virtual root {key} is not in the tree')
        return problems

    # Dump format: (left key:occupant right)

    def dump(self):
        if self.root is None:
            return '()'
        out, stack = [], [self.root]
        while stack:
            item = stack.pop()
            if isinstance(item, str):
                out.append(item)
                continue
            parts = ['(']
            if item.left is not None:
                parts += [item.left, ' ']
            parts.append(f'{item.key}:{item.occupant}')
            if item.right is not None:
                parts += [' ', item.right]
            parts.append(')')
            stack.extend(reversed(parts))
        return ''.join(out)

    @classmethod
    def from_dump(cls, owner, text, capacity=0, virtual_roots=(), accounting='unit', policy='lru', static=False,
                  admit=None):
        tree = cls(owner, capacity=capacity, accounting=accounting, policy=policy, static=static, admit=admit)
        tokens = _DUMP_TOKEN.findall(text)
        if tokens == ['(', ')']:
            tokens = []
        frames = []
        for token in tokens:
            if token == '(':
                if frames and frames[-1]['right'] is not None:
                    raise TreeError(f'malformed dump for {owner!r}: more than two children')
                frames.append({'left': None, 'entry': None, 'right': None})
            elif token == ')':
                if not frames or frames[-1]['entry'] is None:
                    raise TreeError(f'malformed dump for {owner!r}: unbalanced or empty subtree')
                frame = frames.pop()
                entry = frame['entry']
                entry.left, entry.right = frame['left'], frame['right']
                for child in (entry.left, entry.right):
                    if child is not None:
                        child.parent = entry
                if frames:
                    parent = frames[-1]
                    side = 'left' if parent['entry'] is None else 'right'
                    if parent[side] is not None:
                        raise TreeError(f'malformed dump for {owner!r}: two subtrees on one side')
                    parent[side] = entry
                elif tree.root is None:
                    tree.root = entry
                else:
                    raise TreeError(f'malformed dump for {owner!r}: several roots')
            else:
                parts = token.split(':')
                if not frames or frames[-1]['entry'] is not None or len(parts) != 2:
                    raise TreeError(f'malformed dump for {owner!r}: unexpected token {token!r}')
                key, occupant = parse_address(parts[0]), parse_address(parts[1])
                if key in tree.entries:
                    raise TreeError(f'malformed dump for {owner!r}: duplicate key {key!r}')
                entry = TreeEntry(key, occupant)
                tree.entries[key] = entry
                frames[-1]['entry'] = entry
        if frames:
            raise TreeError(f'malformed dump for {owner!r}: unbalanced parentheses')
        for key in virtual_roots:
            if key not in tree.entries:
                raise TreeError(f'malformed dump for {owner!r}: virtual root {key!r} is not in the tree')
            tree.virtual_roots[key] = True
        # order is not enforced here; check_order() reports it
        return tree

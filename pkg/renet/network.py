"""The self-adjusting network: per-node tables, small/large dynamics, helpers
and the coordinator.

Every node pair in a working set is connected in exactly one way:

  * both small: a direct link;
  * one large: the small node sits in the large node's ego-tree, keyed by itself;
  * both large: a small helper sits in each tree, keyed by the other endpoint.

Forwarding decisions read only the deciding node's own ``NodeState``; the
coordinator is the only component with a global view.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from .ego_tree import ACCOUNTING_MODES, VR_POLICIES, EgoTree, edge_key
from .exceptions import HelperUnavailable, InvariantViolation, NetworkError, SnapshotError, TreeError

logger = logging.getLogger(__name__)

HELPER_PORTS = 6
TREE_PORTS = 3
LOAD_TOLERANCE = 1e-9

SMALL = 'small'
LARGE = 'large'


def debug_invariants_enabled():
    try:
        return bool(getattr(settings, 'RENET_DEBUG_INVARIANTS', False))
    except ImproperlyConfigured:
        return False


@dataclass(frozen=True)
class NetParams:
    n: int
    c: float
    D: int = None
    R: int = None
    rotation_accounting: str = 'unit'
    vr_policy: str = 'lru'

    def __post_init__(self):
        if self.n < 2:
            raise NetworkError(f'a network needs at least 2 nodes, got n={self.n}')
        if not self.c > 0:
            raise NetworkError(f'sparsity constant c must be positive, got c={self.c}')
        if self.rotation_accounting not in ACCOUNTING_MODES:
            raise NetworkError(f'rotation accounting must be one of {ACCOUNTING_MODES}')
        if self.vr_policy not in VR_POLICIES:
            raise NetworkError(f'virtual-root policy must be one of {VR_POLICIES}')
        if self.D is None:
            object.__setattr__(self, 'D', max(1, math.ceil(math.log2(self.n))))
        if self.R is None:
            object.__setattr__(self, 'R', self.delta_cap - 1)
        if self.D < 1:
            raise NetworkError(f'message cost D must be at least 1, got {self.D}')
        if not 0 <= self.R <= self.delta_cap - 1:
            raise NetworkError(f'virtual-root capacity must lie in [0, {self.delta_cap - 1}], got {self.R}')

    @property
    def theta(self):
        return max(2, math.ceil(4 * self.c))

    @property
    def delta_cap(self):
        return 6 * self.theta

    @property
    def reset_threshold(self):
        return self.n * self.theta // 2

    @property
    def helper_cap(self):
        return 2 * self.c

    def to_dict(self):
        return {
            'n': self.n, 'c': self.c, 'D': self.D, 'R': self.R,
            'rotation_accounting': self.rotation_accounting, 'vr_policy': self.vr_policy,
            'theta': self.theta, 'delta_cap': self.delta_cap, 'reset_threshold': self.reset_threshold,
        }


@dataclass
class NodeState:
    id: object
    large: bool = False
    working_set: set = field(default_factory=set)
    S: set = field(default_factory=set)
    L: set = field(default_factory=set)
    H: set = field(default_factory=set)
    tree: EgoTree = None

    @property
    def size_class(self):
        return LARGE if self.large else SMALL

    def ports(self, params):
        if self.large:
            return 1 + params.R
        return len(self.S) + TREE_PORTS * len(self.L) + HELPER_PORTS * len(self.H)

    def clear(self):
        self.large = False
        self.working_set.clear()
        self.S.clear()
        self.L.clear()
        self.H.clear()
        self.tree = None


@dataclass(frozen=True)
class RequestOutcome:
    hops: int
    adjust_cost: int
    coord_cost: int
    reset_fired: bool
    reset_cost: int
    path: tuple


@dataclass
class RouteChange:
    """Coordinator actions of one addRoute, with their cost."""
    link_changes: int = 0
    coord_cost: int = 0
    reset_fired: bool = False
    reset_cost: int = 0
    instructed: set = field(default_factory=set)


class Network:
    def __init__(self, params, nodes=None, check_invariants=None):
        nodes = tuple(range(params.n)) if nodes is None else tuple(nodes)
        if len(nodes) != params.n or len(set(nodes)) != params.n:
            raise NetworkError(f'expected {params.n} distinct node addresses, got {len(set(nodes))}')
        self.params = params
        self.nodes = {node: NodeState(node) for node in nodes}
        self.edges = Counter()
        self.total_ws = 0
        self.helper_load = Counter()
        self.helpers = {}
        self.reset_count = 0
        self.check_invariants = debug_invariants_enabled() if check_invariants is None else check_invariants

    def __repr__(self):
        return f'Network(n={self.params.n}, c={self.params.c}, edges={self.edge_count()})'

    # Physical edges

    def _link(self, a, b):
        self.edges[edge_key(a, b)] += 1

    def _unlink(self, a, b):
        key = edge_key(a, b)
        if self.edges[key] <= 0:
            raise InvariantViolation(f'link {a}-{b} removed but not present', [f'node {a}: missing link to {b}'])
        self.edges[key] -= 1
        if not self.edges[key]:
            del self.edges[key]

    def _apply(self, cost):
        for key, change in cost.delta.items():
            if not change:
                continue
            self.edges[key] += change
            if self.edges[key] < 0:
                raise InvariantViolation(f'link {key[0]}-{key[1]} removed but not present',
                                         [f'node {key[0]}: missing link to {key[1]}'])
            if not self.edges[key]:
                del self.edges[key]
        return cost.link_changes

    def edge_count(self):
        return sum(self.edges.values())

    def degrees(self):
        degree = Counter()
        for (a, b), count in self.edges.items():
            degree[a] += count
            degree[b] += count
        return degree

    def degree(self, node):
        return self.degrees()[node]

    def _seats(self, node):
        """(tree, key) of every position ``node`` occupies in other nodes' ego-trees."""
        state = self.nodes[node]
        seats = [(owner, node) for owner in sorted(state.L)]
        for a, b in sorted(state.H):
            seats += [(a, b), (b, a)]
        for owner, key in seats:
            tree = self.nodes[owner].tree if owner in self.nodes else None
            if tree is not None and key in tree:
                yield tree, key

    def ports(self, node):
        """Table ports of ``node``, counting one more for each virtual root it occupies."""
        state = self.nodes[node]
        ports = state.ports(self.params)
        if not state.large:
            ports += sum(1 for tree, key in self._seats(node) if key in tree.virtual_roots)
        return ports

    def _admits_virtual_root(self, occupant):
        state = self.nodes.get(occupant)
        return state is not None and not state.large and self.ports(occupant) < self.params.delta_cap

    def _fit_ports(self, node, change):
        """Shed virtual roots seated on a small node until its ports fit the cap."""
        if self.nodes[node].large:
            return
        for tree, key in list(self._seats(node)):
            if self.ports(node) <= self.params.delta_cap:
                break
            if key in tree.virtual_roots:
                change.link_changes += self._apply(tree.release_virtual_root(key))
                change.instructed.add(tree.owner)
                logger.debug('node %s shed virtual root %s of %s', node, key, tree.owner)

    def connection_kind(self, u, v):
        su, sv = self.nodes[u], self.nodes[v]
        if v not in su.working_set:
            return None
        if not su.large and not sv.large:
            return 'direct'
        if su.large and sv.large:
            return 'helper'
        return 'tree'

    # Helpers

    def _assign_helper(self, pair, helper):
        self.helpers[pair] = helper
        self.nodes[helper].H.add(pair)
        self.helper_load[helper] += 1
        logger.debug('helper %s assigned to pair %s (load %d)', helper, pair, self.helper_load[helper])

    def _release_helper(self, pair):
        helper = self.helpers.pop(pair)
        self.nodes[helper].H.discard(pair)
        self.helper_load[helper] -= 1
        if not self.helper_load[helper]:
            del self.helper_load[helper]
        return helper

    def find_helper(self, u, v, exclude=()):
        """Least-loaded small node (ties to the smallest address) able to relay u-v."""
        best = None
        cap = self.params.helper_cap + LOAD_TOLERANCE
        for node in sorted(self.nodes):
            state = self.nodes[node]
            if state.large or node == u or node == v or node in exclude:
                continue
            load = self.helper_load[node]
            if load + 1 > cap or state.ports(self.params) + HELPER_PORTS > self.params.delta_cap:
                continue
            if best is None or load < best[0]:
                best = (load, node)
        if best is None:
            raise HelperUnavailable(f'no helper available for large pair ({u}, {v})',
                                    [f'node {u}: no helper for partner {v}'])
        return best[1]

    # Coordinator

    def reset(self):
        """Flush every table and link; costs one broadcast to all n nodes."""
        for state in self.nodes.values():
            state.clear()
        self.edges.clear()
        self.helper_load.clear()
        self.helpers.clear()
        self.total_ws = 0
        self.reset_count += 1
        logger.info('reset #%d: working sets reached %d', self.reset_count, self.params.reset_threshold)
        return self.params.n

    def make_large(self, u):
        """Move u's partners from its small table into a fresh ego-tree.

        Pairs u was helping are handed to new helpers first. Partners whose
        connection is not yet established are left to the caller.
        """
        state = self.nodes[u]
        if state.large:
            raise NetworkError(f'node {u} is already large')
        change = RouteChange(instructed={u})

        # a large node cannot relay, so its helper duties move first
        for pair in sorted(state.H):
            a, b = pair
            helper = self.find_helper(a, b, exclude={u})
            self._release_helper(pair)
            change.link_changes += self._apply(self.nodes[a].tree.replace_occupant(b, helper))
            change.link_changes += self._apply(self.nodes[b].tree.replace_occupant(a, helper))
            self._assign_helper(pair, helper)
            change.instructed |= {a, b, helper}

        state.large = True
        state.tree = EgoTree(u, capacity=self.params.R, accounting=self.params.rotation_accounting,
                             policy=self.params.vr_policy, admit=self._admits_virtual_root)
        for partner in sorted(state.working_set):
            if partner in state.S:
                # direct link becomes a tree position held by the partner itself
                self._unlink(u, partner)
                change.link_changes += 1
                state.S.discard(partner)
                self.nodes[partner].S.discard(u)
                change.link_changes += self._apply(state.tree.insert(partner, partner))
                self.nodes[partner].L.add(u)
                change.instructed.add(partner)
            elif partner in state.L:
                # both large now: one helper takes u's seat in the partner's tree and the partner's in u's
                helper = self.find_helper(u, partner)
                change.link_changes += self._apply(state.tree.insert(partner, helper))
                change.link_changes += self._apply(self.nodes[partner].tree.replace_occupant(u, helper))
                state.L.discard(partner)
                self._assign_helper(edge_key(u, partner), helper)
                change.instructed |= {partner, helper}
        logger.debug('node %s became large with %d partners', u, len(state.working_set))
        return change

    def _grow(self, u, v, change):
        state = self.nodes[u]
        state.working_set.add(v)
        self.total_ws += 1
        if not state.large and len(state.working_set) == self.params.theta + 1:
            grown = self.make_large(u)
            change.link_changes += grown.link_changes
            change.instructed |= grown.instructed

    def add_route(self, u, v, notifier=None):
        """Coordinator handling of a new pair: reset check, working sets, makeLarge, then connect."""
        change = RouteChange()
        su, sv = self.nodes[u], self.nodes[v]
        if v in su.working_set:
            return change
        notifier = u if notifier is None else notifier

        if self.total_ws and self.total_ws + 2 >= self.params.reset_threshold:
            change.reset_cost = self.reset()
            change.reset_fired = True

        self._grow(u, v, change)
        self._grow(v, u, change)

        # sizes are final here; connect by the pair's class
        if not su.large and not sv.large:
            self._link(u, v)
            su.S.add(v)
            sv.S.add(u)
            change.link_changes += 1
        elif su.large and not sv.large:
            change.link_changes += self._apply(su.tree.insert(v, v))
            sv.L.add(u)
        elif sv.large and not su.large:
            change.link_changes += self._apply(sv.tree.insert(u, u))
            su.L.add(v)
        else:
            helper = self.find_helper(u, v)
            change.link_changes += self._apply(su.tree.insert(v, helper))
            change.link_changes += self._apply(sv.tree.insert(u, helper))
            self._assign_helper(edge_key(u, v), helper)
            change.instructed.add(helper)
        change.instructed |= {u, v}
        for node in sorted(change.instructed):
            self._fit_ports(node, change)
        change.coord_cost = self.params.D * (1 + len(change.instructed - {notifier}))
        return change

    # Routing

    def _check_request(self, u, v):
        if u == v:
            raise NetworkError(f'self-request on node {u}')
        for node in (u, v):
            if node not in self.nodes:
                raise NetworkError(f'unknown node {node!r}')

    def _deliver(self, u, v):
        """Route u -> v over the current tables; returns (path, hops, adjustments)."""
        kind = self.connection_kind(u, v)
        if kind is None:
            raise InvariantViolation(f'no connection for {u}->{v}', [f'node {u}: {v} not in its working set'])
        if kind == 'direct':
            return [u, v], 1, []
        su, sv = self.nodes[u], self.nodes[v]
        if kind == 'tree' and not su.large:
            up = sv.tree.route_up(u)
            return up.path + [v], up.hops, [(sv.tree, u)]
        down = su.tree.route_down(v)
        if not down.hit:
            raise InvariantViolation(f'{v} missing from the ego-tree of {u}', [f'node {u}: partner {v} not in tree'])
        if kind == 'tree':
            return [u] + down.path, down.hops, [(su.tree, v)]
        up = sv.tree.route_up(u)
        path = [u] + down.path + up.path[1:] + [v]
        return path, down.hops + up.hops, [(su.tree, v), (sv.tree, u)]

    def _validate_path(self, path):
        for a, b in zip(path, path[1:]):
            if a != b and not self.edges.get(edge_key(a, b)):
                raise InvariantViolation(f'route hop {a}-{b} has no physical link',
                                         [f'node {a}: no link to {b} on route {path}'])

    def serve_request(self, request):
        u, v = request
        self._check_request(u, v)
        hops, change = 0, None

        source = self.nodes[u]
        if source.large:
            walk = source.tree.route_down(v)
            if not walk.hit:
                # the failed walk is paid for; its last node notifies the coordinator
                hops += walk.hops
                change = self.add_route(u, v, notifier=walk.path[-1] if walk.path else u)
        elif v not in source.S and v not in source.L:
            change = self.add_route(u, v, notifier=u)

        path, route_hops, adjustments = self._deliver(u, v)
        self._validate_path(path)
        hops += route_hops
        adjust_cost = change.link_changes if change else 0
        # splay after delivery
        for tree, key in adjustments:
            adjust_cost += self._apply(tree.adjust(key))

        if self.check_invariants:
            problems = self.validate_invariants()
            if problems:
                raise InvariantViolation(f'{len(problems)} invariant violations after {u}->{v}', problems)

        return RequestOutcome(
            hops=hops,
            adjust_cost=adjust_cost,
            coord_cost=change.coord_cost if change else 0,
            reset_fired=bool(change and change.reset_fired),
            reset_cost=change.reset_cost if change else 0,
            path=tuple(path),
        )

    # Invariants

    def expected_edges(self):
        edges = Counter()
        for node, state in self.nodes.items():
            for partner in state.S:
                if node <= partner:
                    edges[edge_key(node, partner)] += 1
            if state.tree is not None:
                edges.update(state.tree.links())
        return edges

    def _check_tree(self, node, state, problems):
        tree = state.tree
        if tree is None:
            problems.append(f'node {node}: large without an ego-tree')
            return
        problems.extend(tree.check_order())
        keys = set(tree.entries)
        if keys != state.working_set:
            problems.append(f'node {node}: tree keys {sorted(keys - state.working_set)} / '
                            f'partners {sorted(state.working_set - keys)} disagree')
        for key in sorted(keys & set(self.nodes)):
            occupant = tree.entries[key].occupant
            if self.nodes[key].large:
                helper = self.helpers.get(edge_key(node, key))
                if occupant != helper:
                    problems.append(f'node {node}: position {key} held by {occupant}, helper is {helper}')
            elif occupant != key or node not in self.nodes[key].L:
                problems.append(f'node {node}: small partner {key} not seated in its own position')

    def validate_invariants(self):
        params = self.params
        problems = []
        total = 0
        for node in sorted(self.nodes):
            state = self.nodes[node]
            size = len(state.working_set)
            total += size
            if state.large != (size > params.theta):
                problems.append(f'node {node}: {state.size_class} with {size} partners (theta={params.theta})')
            for partner in sorted(state.working_set):
                if partner not in self.nodes or node not in self.nodes[partner].working_set:
                    problems.append(f'node {node}: partner {partner} does not list it back')
            ports = self.ports(node)
            if ports > params.delta_cap:
                problems.append(f'node {node}: {ports} table ports exceed {params.delta_cap}')
            if state.large:
                if state.S or state.L or state.H:
                    problems.append(f'node {node}: large node still holds small-table entries')
                self._check_tree(node, state, problems)
            else:
                if state.tree is not None:
                    problems.append(f'node {node}: small node owns an ego-tree')
                if not (state.S | state.L) <= state.working_set:
                    problems.append(f'node {node}: table entries outside its working set')
            load = self.helper_load[node]
            if load != len(state.H):
                problems.append(f'node {node}: helper load {load} but helps {len(state.H)} pairs')
            if load > params.helper_cap + LOAD_TOLERANCE:
                problems.append(f'node {node}: helper load {load} exceeds {params.helper_cap}')
            if state.H and state.large:
                problems.append(f'node {node}: large node is helping pairs')
        if total != self.total_ws:
            problems.append(f'coordinator: total working set {self.total_ws} but nodes hold {total}')
        if self.total_ws > params.reset_threshold:
            problems.append(f'coordinator: total working set {self.total_ws} exceeds {params.reset_threshold}')
        for pair, helper in sorted(self.helpers.items()):
            if pair not in self.nodes[helper].H:
                problems.append(f'node {helper}: registered helper of {pair} but does not list it')

        expected = self.expected_edges()
        for key in sorted(set(expected) | set(self.edges)):
            if expected[key] != self.edges.get(key, 0):
                problems.append(f'node {key[0]}: link {key[0]}-{key[1]} count {self.edges.get(key, 0)}, '
                                f'tables imply {expected[key]}')
        for node, degree in sorted(self.degrees().items()):
            if degree > params.delta_cap:
                problems.append(f'node {node}: degree {degree} exceeds {params.delta_cap}')
        return problems

    # Snapshots

    def snapshot(self):
        return {
            'params': self.params.to_dict(),
            'nodes': [
                {
                    'id': node,
                    'size_class': state.size_class,
                    'working_set': sorted(state.working_set),
                    'S': sorted(state.S),
                    'L': sorted(state.L),
                    'H': [list(pair) for pair in sorted(state.H)],
                }
                for node, state in sorted(self.nodes.items())
            ],
            'edges': [[a, b, count] for (a, b), count in sorted(self.edges.items())],
            'trees': [
                {'owner': node, 'dump': state.tree.dump(), 'virtual_roots': list(state.tree.virtual_roots)}
                for node, state in sorted(self.nodes.items()) if state.tree is not None
            ],
            'coordinator': {
                'total_ws': self.total_ws,
                'helper_load': [[node, load] for node, load in sorted(self.helper_load.items())],
                'helpers': [[a, b, helper] for (a, b), helper in sorted(self.helpers.items())],
                'reset_count': self.reset_count,
            },
        }

    @classmethod
    def from_snapshot(cls, data, check_invariants=False):
        """Rebuild a network exactly as stored, edges included, so corruption stays visible."""
        try:
            raw = data['params']
            params = NetParams(n=raw['n'], c=raw['c'], D=raw['D'], R=raw['R'],
                               rotation_accounting=raw['rotation_accounting'], vr_policy=raw['vr_policy'])
            net = cls(params, nodes=[entry['id'] for entry in data['nodes']], check_invariants=check_invariants)
            for entry in data['nodes']:
                state = net.nodes[entry['id']]
                state.large = entry['size_class'] == LARGE
                state.working_set = set(entry['working_set'])
                state.S = set(entry['S'])
                state.L = set(entry['L'])
                state.H = {edge_key(*pair) for pair in entry['H']}
            for a, b, count in data['edges']:
                net.edges[edge_key(a, b)] = int(count)
            for entry in data['trees']:
                net.nodes[entry['owner']].tree = EgoTree.from_dump(
                    entry['owner'], entry['dump'], capacity=params.R, virtual_roots=entry['virtual_roots'],
                    accounting=params.rotation_accounting, policy=params.vr_policy, admit=net._admits_virtual_root)
            coordinator = data['coordinator']
            net.total_ws = int(coordinator['total_ws'])
            net.helper_load = Counter({node: int(load) for node, load in coordinator['helper_load']})
            net.helpers = {edge_key(a, b): helper for a, b, helper in coordinator['helpers']}
            net.reset_count = int(coordinator['reset_count'])
            unknown = sorted(net._references() - set(net.nodes), key=repr)
        except (KeyError, TypeError, ValueError, NetworkError, TreeError) as exc:
            raise SnapshotError(f'malformed network snapshot: {exc}') from exc
        if unknown:
            raise SnapshotError(f'malformed network snapshot: unknown node {unknown[0]!r}')
        return net

    def _references(self):
        """Every node address the tables, trees, edges and coordinator mention."""
        seen = set()
        for state in self.nodes.values():
            seen |= state.working_set | state.S | state.L
            for pair in state.H:
                seen.update(pair)
            if state.tree is not None:
                for entry in state.tree.entries.values():
                    seen |= {entry.key, entry.occupant}
        for key in self.edges:
            seen.update(key)
        seen.update(self.helper_load)
        for pair, helper in self.helpers.items():
            seen.update(pair)
            seen.add(helper)
        return seen


def new_network(params, nodes=None, check_invariants=None):
    return Network(params, nodes=nodes, check_invariants=check_invariants)

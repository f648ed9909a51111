"""Reference networks: a demand-oblivious de Bruijn network, a clairvoyant
static demand-aware network built from the whole trace, and the entropy
lower bound for fixed degree-bounded networks.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .ego_tree import EgoTree, edge_key
from .entropy import FreqDist, conditional_entropy, symmetrize
from .exceptions import EntropyError, SparsityViolation, StaticDanError
from .network import HELPER_PORTS, LARGE, LOAD_TOLERANCE, SMALL, TREE_PORTS
from .trace import SparsityParams, joint_freq, sparsity_check

logger = logging.getLogger(__name__)


class ObliviousNet:
    """Binary de Bruijn graph on 2^k vertices, nodes embedded by a seeded random bijection."""

    def __init__(self, nodes, seed=0):
        self.nodes = tuple(nodes)
        if len(self.nodes) < 2:
            raise StaticDanError('an oblivious network needs at least 2 nodes')
        self.k = max(1, math.ceil(math.log2(len(self.nodes))))
        size = 1 << self.k
        self.graph = nx.Graph()
        self.graph.add_nodes_from(range(size))
        for vertex in range(size):
            for bit in (0, 1):
                successor = ((vertex << 1) & (size - 1)) | bit
                if successor != vertex:
                    self.graph.add_edge(vertex, successor)
        slots = np.random.default_rng(seed).permutation(size)[:len(self.nodes)]
        self.embedding = {node: int(slot) for node, slot in zip(self.nodes, slots)}
        self._distances = {}

    @property
    def diameter(self):
        return self.k

    def max_degree(self):
        return max(degree for _, degree in self.graph.degree())

    def distance(self, u, v):
        source = self.embedding[u]
        if source not in self._distances:
            self._distances[source] = nx.single_source_shortest_path_length(self.graph, source)
        return self._distances[source][self.embedding[v]]


def oblivious_cost(net, trace):
    if not trace.m:
        return 0.0
    return math.fsum(net.distance(u, v) for u, v in trace.requests) / trace.m


def static_lower_bound(trace, degree):
    """max(H(Y|X), H(X|Y)) of the whole trace, in base ``degree``."""
    if not degree > 1:
        raise EntropyError(f'degree must be greater than 1, got {degree}')
    joint = joint_freq(trace)
    return max(conditional_entropy(joint, 'YgivenX', degree), conditional_entropy(joint, 'XgivenY', degree))


@dataclass
class StaticDan:
    params: object
    nodes: tuple
    large: set
    direct: set
    trees: dict
    helpers: dict
    weights: dict
    edges: Counter = field(default_factory=Counter)
    _depths: dict = field(default_factory=dict, repr=False)

    def depths(self, owner):
        if owner not in self._depths:
            self._depths[owner] = self.trees[owner].depths()
        return self._depths[owner]

    def expected_depth(self, owner):
        return self.trees[owner].expected_depth(self.weights[owner])

    def route_hops(self, u, v):
        """Hops over the fixed network: direct link, tree route, or relay through a helper."""
        if edge_key(u, v) in self.direct:
            return 1
        try:
            if u in self.large and v in self.large:
                return self.depths(u)[v] + self.depths(v)[u] + 2
            if u in self.large:
                return self.depths(u)[v] + 1
            if v in self.large:
                return self.depths(v)[u] + 1
        except KeyError:
            pass
        raise StaticDanError(f'pair ({u}, {v}) is not connected in the static network')

    def degrees(self):
        degree = Counter()
        for (a, b), count in self.edges.items():
            degree[a] += count
            degree[b] += count
        return degree

    def snapshot(self):
        """Same layout as a live network snapshot; static trees carry no virtual roots."""
        neighbours = {node: set() for node in self.nodes}
        for a, b in self.direct:
            neighbours[a].add(b)
            neighbours[b].add(a)
        helped = {node: [] for node in self.nodes}
        for pair, helper in sorted(self.helpers.items()):
            helped[helper].append(list(pair))
        return {
            'params': self.params.to_dict(),
            'nodes': [
                {
                    'id': node,
                    'size_class': LARGE if node in self.large else SMALL,
                    'working_set': sorted(self.weights[node].universe) if node in self.large
                    else sorted(neighbours[node] | {owner for owner in self.large if node in self.trees[owner]}),
                    'S': sorted(neighbours[node]),
                    'L': sorted(owner for owner in self.large if node not in self.large and node in self.trees[owner]),
                    'H': helped[node],
                }
                for node in sorted(self.nodes)
            ],
            'edges': [[a, b, count] for (a, b), count in sorted(self.edges.items())],
            'trees': [{'owner': owner, 'dump': tree.dump(), 'virtual_roots': []}
                      for owner, tree in sorted(self.trees.items())],
            'coordinator': {
                'total_ws': 0,
                'helper_load': [[node, load] for node, load in sorted(Counter(self.helpers.values()).items())],
                'helpers': [[a, b, helper] for (a, b), helper in sorted(self.helpers.items())],
                'reset_count': 0,
            },
        }


def _pick_static_helper(nodes, large, ports, load, u, v, params):
    best = None
    for node in nodes:
        if node in large or node in (u, v):
            continue
        if load[node] + 1 > params.helper_cap + LOAD_TOLERANCE or ports[node] + HELPER_PORTS > params.delta_cap:
            continue
        if best is None or load[node] < best[0]:
            best = (load[node], node)
    if best is None:
        raise StaticDanError(f'no helper available for large pair ({u}, {v}) in the static network')
    return best[1]


def build_static_dan(trace, params):
    """Clairvoyant fixed network: same size classes and degree cap as the online network,
    with every large node's tree built from its symmetrized partner frequencies."""
    report = sparsity_check(trace, SparsityParams(params.c, max(1, trace.m)))
    if not report.ok:
        raise SparsityViolation(f'trace holds {report.worst_unique_pairs} unique pairs, '
                                f'more than c*n = {report.limit:g}')

    partners = trace.working_sets()
    large = {node for node, group in partners.items() if len(group) > params.theta}
    nodes = tuple(sorted(trace.nodes))
    pairs = sorted({edge_key(u, v) for u, v in trace.unique_pairs()})
    sym = symmetrize(joint_freq(trace))

    direct = {pair for pair in pairs if pair[0] not in large and pair[1] not in large}
    ports = Counter()
    for a, b in direct:
        ports[a] += 1
        ports[b] += 1
    for owner in large:
        for partner in partners[owner]:
            if partner not in large:
                ports[partner] += TREE_PORTS

    helpers, load = {}, Counter()
    for a, b in pairs:
        if a in large and b in large:
            helper = _pick_static_helper(nodes, large, ports, load, a, b, params)
            helpers[(a, b)] = helper
            load[helper] += 1
            ports[helper] += HELPER_PORTS

    trees, weights, edges = {}, {}, Counter()
    for pair in direct:
        edges[pair] += 1
    for owner in sorted(large):
        dist = FreqDist.from_weights({partner: sym[(owner, partner)] for partner in partners[owner]})
        occupants = {partner: helpers[edge_key(owner, partner)]
                     for partner in partners[owner] if partner in large}
        trees[owner] = EgoTree.build_static(owner, dist, occupants)
        weights[owner] = dist
        edges.update(trees[owner].links())

    dan = StaticDan(params=params, nodes=nodes, large=large, direct=direct, trees=trees,
                    helpers=helpers, weights=weights, edges=edges)
    over = {node: degree for node, degree in dan.degrees().items() if degree > params.delta_cap}
    if over:
        raise StaticDanError(f'static network exceeds degree {params.delta_cap} at nodes {sorted(over)}')
    logger.info('static network: %d large nodes, %d direct links, %d helpers',
                len(large), len(direct), len(helpers))
    return dan


def stat_cost(dan, trace):
    if not trace.m:
        return 0.0
    hops = {}
    total = 0
    for request in trace.requests:
        if request not in hops:
            hops[request] = dan.route_hops(*request)
        total += hops[request]
    return total / trace.m

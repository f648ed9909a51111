"""Communication demands: traces, synthetic workloads, demand graphs and
(c, delta)-sparsity certification.

Node addresses are opaque: they are compared only to key the ego-trees, never
to infer locality. Requests of one time step are serialized into a total order.
"""
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Hashable, NamedTuple

import numpy as np
import pandas as pd

from .exceptions import TraceError

logger = logging.getLogger(__name__)

NodeId = Hashable

WEIGHT_TOLERANCE = 1e-9

_INT_ADDRESS = re.compile(r'^-?\d+$')
_FORBIDDEN_ADDRESS = re.compile(r'[\s():]')


class Request(NamedTuple):
    src: NodeId
    dst: NodeId


@dataclass(frozen=True)
class Trace:
    nodes: tuple
    requests: tuple

    def __post_init__(self):
        object.__setattr__(self, 'nodes', tuple(self.nodes))
        object.__setattr__(self, 'requests', tuple(Request(*r) for r in self.requests))
        if len(set(self.nodes)) != len(self.nodes):
            raise TraceError('node universe contains duplicate addresses')
        universe = self.node_set
        for index, (src, dst) in enumerate(self.requests):
            if src == dst:
                raise TraceError(f'request {index} is a self-request on {src!r}')
            if src not in universe or dst not in universe:
                raise TraceError(f'request {index} ({src!r}, {dst!r}) leaves the node universe')

    @classmethod
    def over_range(cls, n, pairs):
        return cls(nodes=tuple(range(n)), requests=tuple(pairs))

    @cached_property
    def node_set(self):
        return frozenset(self.nodes)

    @property
    def n(self):
        return len(self.nodes)

    @property
    def m(self):
        return len(self.requests)

    def __len__(self):
        return len(self.requests)

    def __iter__(self):
        return iter(self.requests)

    def slice(self, start, stop):
        return Trace(nodes=self.nodes, requests=self.requests[start:stop])

    def unique_pairs(self, start=0, stop=None):
        return set(self.requests[start:stop])

    def working_sets(self):
        """Full-trace communication partners of every node, both directions."""
        partners = {node: set() for node in self.nodes}
        for src, dst in set(self.requests):
            partners[src].add(dst)
            partners[dst].add(src)
        return partners


@dataclass(frozen=True)
class DemandGraph:
    nodes: frozenset
    edges: dict

    def joint(self):
        from .entropy import JointFreq
        return JointFreq(self.edges)

    def total_weight(self):
        return math.fsum(self.edges[key] for key in sorted(self.edges))


@dataclass(frozen=True)
class SparsityParams:
    c: float
    delta: int

    def __post_init__(self):
        if not self.c > 0:
            raise TraceError(f'sparsity constant c must be positive, got {self.c}')
        if int(self.delta) != self.delta or self.delta < 1:
            raise TraceError(f'sparsity window delta must be a positive integer, got {self.delta}')


@dataclass(frozen=True)
class SparsityReport:
    ok: bool
    worst_window_start: int
    worst_unique_pairs: int
    limit: float = 0.0


def sparsity_check(trace, params):
    """Certify that every window of at most ``delta`` requests holds at most c*n unique pairs.

    Only windows of length min(delta, m) are scanned: a shorter window never
    holds more unique pairs than a longer one containing it.
    """
    limit = params.c * trace.n
    requests = trace.requests
    if not requests:
        return SparsityReport(ok=True, worst_window_start=0, worst_unique_pairs=0, limit=limit)

    width = min(int(params.delta), len(requests))
    counts = Counter()
    worst, worst_start = 0, 0
    for index, request in enumerate(requests):
        counts[request] += 1
        if index >= width:
            expired = requests[index - width]
            counts[expired] -= 1
            if not counts[expired]:
                del counts[expired]
        if index >= width - 1 and len(counts) > worst:
            worst, worst_start = len(counts), index - width + 1

    ok = worst <= limit + WEIGHT_TOLERANCE
    if not ok:
        logger.debug('sparsity: window at %d holds %d unique pairs > %.1f', worst_start, worst, limit)
    return SparsityReport(ok=ok, worst_window_start=worst_start, worst_unique_pairs=worst, limit=limit)


def _check_range(trace, start, stop):
    stop = trace.m if stop is None else stop
    if not 0 <= start < stop <= trace.m:
        raise TraceError(f'empty or out-of-bounds range [{start}, {stop}) for a trace of {trace.m} requests')
    return start, stop


def pair_counts(trace, start=0, stop=None):
    start, stop = _check_range(trace, start, stop)
    return Counter(trace.requests[start:stop]), stop - start


def build_demand_graph(trace, start=0, stop=None):
    counts, length = pair_counts(trace, start, stop)
    edges = {tuple(pair): count / length for pair, count in sorted(counts.items())}
    nodes = frozenset(node for pair in edges for node in pair)
    return DemandGraph(nodes=nodes, edges=edges)


def joint_freq(trace, start=0, stop=None):
    return build_demand_graph(trace, start, stop).joint()


# Synthetic workloads

def _square_side(n, minimum, name):
    side = math.isqrt(n)
    if side * side != n:
        raise TraceError(f'{name} workload needs a perfect-square node count, got n={n}')
    if side < minimum:
        raise TraceError(f'{name} workload needs a side of at least {minimum}, got {side}')
    return side


def _check_common(n, m):
    if n < 2:
        raise TraceError(f'a workload needs at least 2 nodes, got n={n}')
    if m < 1:
        raise TraceError(f'a workload needs at least 1 request, got m={m}')


_STEPS = np.array([(-1, 0), (1, 0), (0, -1), (0, 1)])


def _torus_pairs(n, m, rng):
    side = math.isqrt(n)
    src = rng.integers(0, n, size=m)
    steps = _STEPS[rng.integers(0, 4, size=m)]
    row, col = np.divmod(src, side)
    dst = ((row + steps[:, 0]) % side) * side + (col + steps[:, 1]) % side
    return src, dst


def torus_edges(n):
    """Directed edge set of the wraparound sqrt(n) x sqrt(n) torus."""
    side = math.isqrt(n)
    edges = set()
    for node in range(n):
        row, col = divmod(node, side)
        for d_row, d_col in _STEPS:
            edges.add((node, ((row + d_row) % side) * side + (col + d_col) % side))
    return edges


@dataclass(frozen=True)
class Torus:
    n: int
    m: int
    name = 'torus'

    def validate(self):
        _check_common(self.n, self.m)
        _square_side(self.n, 3, self.name)

    def sample(self, rng):
        return _torus_pairs(self.n, self.m, rng)


@dataclass(frozen=True)
class Grid:
    """Square grid without wraparound: border nodes have two or three neighbours."""
    n: int
    m: int
    name = 'grid'

    def validate(self):
        _check_common(self.n, self.m)
        _square_side(self.n, 2, self.name)

    def sample(self, rng):
        side = math.isqrt(self.n)
        src = rng.integers(0, self.n, size=self.m)
        row, col = np.divmod(src, side)
        steps = _STEPS[rng.integers(0, 4, size=self.m)]
        pending = np.ones(self.m, dtype=bool)
        d_row = np.empty(self.m, dtype=np.int64)
        d_col = np.empty(self.m, dtype=np.int64)
        while pending.any():
            d_row[pending], d_col[pending] = row[pending] + steps[pending, 0], col[pending] + steps[pending, 1]
            pending = (d_row < 0) | (d_row >= side) | (d_col < 0) | (d_col >= side)
            steps[pending] = _STEPS[rng.integers(0, 4, size=int(pending.sum()))]
        return src, d_row * side + d_col


def zipf_weights(count, alpha):
    ranks = np.arange(1, count + 1, dtype=float)
    weights = ranks ** -alpha
    return weights / weights.sum()


@dataclass(frozen=True)
class StarZipf:
    n: int
    m: int
    alpha: float = 1.0
    name = 'star_zipf'

    def validate(self):
        _check_common(self.n, self.m)
        if self.alpha < 0:
            raise TraceError(f'Zipf exponent must be non-negative, got alpha={self.alpha}')

    def sample(self, rng):
        leaves = rng.choice(np.arange(1, self.n), size=self.m, p=zipf_weights(self.n - 1, self.alpha))
        outbound = rng.integers(0, 2, size=self.m).astype(bool)
        return np.where(outbound, 0, leaves), np.where(outbound, leaves, 0)


@dataclass(frozen=True)
class RoundRobinGrids:
    n: int
    k: int
    m_each: int
    name = 'round_robin_grids'

    @property
    def m(self):
        return self.k * self.m_each

    def validate(self):
        if self.k < 1:
            raise TraceError(f'round-robin grids need at least one phase, got k={self.k}')
        _check_common(self.n, self.m_each)
        _square_side(self.n, 3, self.name)

    def sample(self, rng):
        sources, destinations = [], []
        for _ in range(self.k):
            relabel = rng.permutation(self.n)
            src, dst = _torus_pairs(self.n, self.m_each, rng)
            sources.append(relabel[src])
            destinations.append(relabel[dst])
        return np.concatenate(sources), np.concatenate(destinations)


def _normalized(weights, n, label):
    array = np.asarray(weights, dtype=float)
    if array.shape != (n,) or (array < 0).any() or array.sum() <= 0:
        raise TraceError(f'{label} must hold {n} non-negative weights with a positive sum')
    return array / array.sum()


@dataclass(frozen=True)
class ProductDist:
    n: int
    m: int
    px: tuple = field(default=())
    py: tuple = field(default=())
    name = 'product'

    def validate(self):
        _check_common(self.n, self.m)
        px = _normalized(self.px, self.n, 'px')
        py = _normalized(self.py, self.n, 'py')
        if float(np.dot(px, py)) >= 1.0 - WEIGHT_TOLERANCE:
            raise TraceError('px and py put all their mass on the same node: every pair is a self-request')

    def sample(self, rng):
        px = _normalized(self.px, self.n, 'px')
        py = _normalized(self.py, self.n, 'py')
        src = rng.choice(self.n, size=self.m, p=px)
        dst = rng.choice(self.n, size=self.m, p=py)
        clash = src == dst
        while clash.any():
            count = int(clash.sum())
            src[clash] = rng.choice(self.n, size=count, p=px)
            dst[clash] = rng.choice(self.n, size=count, p=py)
            clash = src == dst
        return src, dst


@dataclass(frozen=True)
class UniformPairs:
    n: int
    m: int
    name = 'uniform'

    def validate(self):
        _check_common(self.n, self.m)

    def sample(self, rng):
        src = rng.integers(0, self.n, size=self.m)
        return src, (src + rng.integers(1, self.n, size=self.m)) % self.n


WORKLOADS = {spec.name: spec for spec in (Torus, Grid, StarZipf, RoundRobinGrids, ProductDist, UniformPairs)}


def generate(spec, seed):
    """Deterministic trace for ``(spec, seed)``; all randomness comes from one seeded generator."""
    spec.validate()
    rng = np.random.default_rng(seed)
    src, dst = spec.sample(rng)
    trace = Trace.over_range(spec.n, zip(src.tolist(), dst.tolist()))
    logger.info('generated %s trace: n=%d m=%d seed=%s', spec.name, trace.n, trace.m, seed)
    return trace


# Trace files: '#n=<count>' header, then 'src,dst' lines

def save_trace(trace, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(trace.requests), columns=['src', 'dst'])
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(f'#n={trace.n}\n')
        frame.to_csv(handle, header=False, index=False)


def _parse_addresses(values):
    values = [value.strip() for value in values]
    for value in values:
        if not value or _FORBIDDEN_ADDRESS.search(value):
            raise TraceError(f'invalid node address {value!r}')
    if all(_INT_ADDRESS.match(value) for value in values):
        return [int(value) for value in values]
    return values


def load_trace(path, n=None):
    """Read a trace file; ``n`` is used when the file carries no ``#n=`` header."""
    path = Path(path)
    if not path.exists():
        raise TraceError(f'trace file not found: {path}')
    with open(path, encoding='utf-8') as handle:
        first = handle.readline().strip()
    header = re.match(r'^#\s*n\s*=\s*(\d+)$', first)
    declared = int(header.group(1)) if header else n
    if header and n is not None and n != declared:
        logger.warning('trace header declares n=%d, ignoring configured n=%d', declared, n)

    try:
        frame = pd.read_csv(path, skiprows=1 if header else 0, header=None, names=['src', 'dst'],
                            dtype=str, comment='#', skip_blank_lines=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise TraceError(f'unreadable trace file {path}: {exc}') from exc
    if frame.isna().any().any():
        raise TraceError(f'trace file {path} has lines without two addresses')

    addresses = _parse_addresses(frame['src'].tolist() + frame['dst'].tolist())
    half = len(frame)
    pairs = list(zip(addresses[:half], addresses[half:]))
    distinct = sorted(set(addresses))

    if declared is not None and all(isinstance(a, int) for a in distinct) and all(0 <= a < declared for a in distinct):
        nodes = tuple(range(declared))
    else:
        if declared is not None and len(distinct) > declared:
            raise TraceError(f'trace file {path} names {len(distinct)} nodes but declares n={declared}')
        if declared is not None and len(distinct) < declared:
            logger.warning('trace file %s names %d of %d declared nodes; idle nodes cannot be addressed',
                           path, len(distinct), declared)
        nodes = tuple(distinct)
    trace = Trace(nodes=nodes, requests=pairs)
    logger.info('loaded trace %s: n=%d m=%d', path, trace.n, trace.m)
    return trace

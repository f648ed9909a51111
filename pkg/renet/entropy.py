"""Empirical entropy of traces: marginal, joint and conditional entropies,
symmetrization, and the windowed entropy report.

All sums run in sorted-key order so results are reproducible bit for bit.
Zero frequencies are never stored.
"""
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import EntropyError

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-9
COMPOSED_TOLERANCE = 1e-6

REPORT_COLUMNS = ['t', 'HX', 'HY', 'HYgX', 'HXgY', 'HX_full', 'HY_full', 'HYgX_full', 'HXgY_full']


def _clean(mapping, label):
    probs = {}
    for key in sorted(mapping):
        value = float(mapping[key])
        if value < 0 or math.isnan(value):
            raise EntropyError(f'{label} entry {key!r} is negative or NaN: {value}')
        if value > 0:
            probs[key] = value
    total = math.fsum(probs.values())
    if abs(total - 1.0) > EXACT_TOLERANCE:
        raise EntropyError(f'{label} sums to {total!r}, expected 1')
    return probs


@dataclass(frozen=True)
class FreqDist:
    """A frequency distribution; ``universe`` keeps keys whose frequency is zero."""
    probs: dict
    universe: frozenset = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, 'probs', _clean(self.probs, 'distribution'))
        universe = frozenset(self.probs) if self.universe is None else frozenset(self.universe)
        if not universe >= set(self.probs):
            raise EntropyError('distribution support is not inside its universe')
        object.__setattr__(self, 'universe', universe)

    @classmethod
    def from_counts(cls, counts, universe=None):
        total = sum(counts.values())
        if total <= 0:
            raise EntropyError('cannot build a distribution from zero counts')
        return cls({key: counts[key] / total for key in counts}, universe=universe)

    @classmethod
    def from_weights(cls, weights):
        """Normalize non-negative weights; zero-weight keys stay in the universe."""
        total = math.fsum(float(weights[key]) for key in sorted(weights))
        if total <= 0:
            raise EntropyError('weights must have a positive sum')
        return cls({key: weights[key] / total for key in weights}, universe=frozenset(weights))

    def __getitem__(self, key):
        return self.probs.get(key, 0.0)

    def __len__(self):
        return len(self.probs)

    def items(self):
        return self.probs.items()


@dataclass(frozen=True)
class JointFreq:
    entries: dict

    def __post_init__(self):
        entries = _clean(self.entries, 'joint frequency')
        for pair in entries:
            if len(pair) != 2:
                raise EntropyError(f'joint frequency key {pair!r} is not a pair')
        object.__setattr__(self, 'entries', entries)

    @classmethod
    def from_counts(cls, counts):
        total = sum(counts.values())
        if total <= 0:
            raise EntropyError('cannot build a joint frequency from zero counts')
        return cls({tuple(pair): counts[pair] / total for pair in counts})

    def __getitem__(self, pair):
        return self.entries.get(pair, 0.0)

    def __len__(self):
        return len(self.entries)

    def items(self):
        return self.entries.items()

    def transposed(self):
        return JointFreq({(y, x): f for (x, y), f in self.entries.items()})


def _check_base(base):
    if not base > 1:
        raise EntropyError(f'entropy base must be greater than 1, got {base}')
    return math.log(base)


def _entropy_of_values(values, log_base):
    p = np.fromiter(values, dtype=float)
    if p.size == 0:
        return 0.0
    h = -float(np.sum(p * np.log(p))) / log_base
    return max(h, 0.0)


def entropy(dist, base=2):
    log_base = _check_base(base)
    return _entropy_of_values((dist.probs[key] for key in sorted(dist.probs)), log_base)


def change_base(h_bits, base):
    """Convert an entropy in bits to ``base``."""
    return h_bits / math.log2(base) if base != 2 else h_bits


def marginals(joint):
    """Source and destination marginals (X, Y) of a joint frequency."""
    sources, destinations = defaultdict(float), defaultdict(float)
    for (x, y), f in joint.entries.items():
        sources[x] += f
        destinations[y] += f
    return FreqDist.from_weights(sources), FreqDist.from_weights(destinations)


def _rows(joint, direction):
    if direction not in ('YgivenX', 'XgivenY'):
        raise EntropyError(f"direction must be 'YgivenX' or 'XgivenY', got {direction!r}")
    rows = defaultdict(list)
    for (x, y), f in joint.entries.items():
        if direction == 'YgivenX':
            rows[x].append(f)
        else:
            rows[y].append(f)
    return rows


def conditional_entropy(joint, direction='YgivenX', base=2):
    """H(Y|X) (or H(X|Y)): the frequency-weighted entropy of each normalized row (column)."""
    log_base = _check_base(base)
    total = 0.0
    rows = _rows(joint, direction)
    for key in sorted(rows):
        row = np.array(rows[key])
        weight = float(row.sum())
        total += weight * _entropy_of_values(row / weight, log_base)
    return max(total, 0.0)


def joint_entropy(joint, base=2):
    log_base = _check_base(base)
    return _entropy_of_values((joint.entries[pair] for pair in sorted(joint.entries)), log_base)


def symmetrize(joint):
    """(M + M^T) / 2: every pair gets the mean of its two directions."""
    result = defaultdict(float)
    for (x, y), f in joint.entries.items():
        result[(x, y)] += f / 2
        result[(y, x)] += f / 2
    return JointFreq(dict(result))


def entropy_summary(joint, base=2):
    hx_dist, hy_dist = marginals(joint)
    h_y_given_x = conditional_entropy(joint, 'YgivenX', base)
    h_x_given_y = conditional_entropy(joint, 'XgivenY', base)
    return {
        'HX': entropy(hx_dist, base),
        'HY': entropy(hy_dist, base),
        'HXY': joint_entropy(joint, base),
        'HYgX': h_y_given_x,
        'HXgY': h_x_given_y,
        'H_con': max(h_y_given_x, h_x_given_y),
    }


@dataclass(frozen=True)
class AveragedBounds:
    h_star: float
    lower: float
    mid: float
    averaged: float
    upper_slack: float

    @property
    def holds(self):
        return (self.lower <= self.mid + COMPOSED_TOLERANCE
                and self.mid <= self.averaged + COMPOSED_TOLERANCE
                and self.upper_slack >= -COMPOSED_TOLERANCE)


def averaged_entropy_bounds(p, q, base=2):
    """Sandwich H*/2 <= (H(p)+H(q))/2 <= H((p+q)/2) <= H*+1, with H* = max(H(p), H(q)).

    ``upper_slack`` is H*+1 - H((p+q)/2) measured in bits scaled to ``base``.
    """
    if p.universe != q.universe:
        raise EntropyError('averaged distributions must share one key universe')
    h_p, h_q = entropy(p, base), entropy(q, base)
    mean = FreqDist({key: (p[key] + q[key]) / 2 for key in p.universe}, universe=p.universe)
    h_star = max(h_p, h_q)
    averaged = entropy(mean, base)
    return AveragedBounds(
        h_star=h_star,
        lower=h_star / 2,
        mid=(h_p + h_q) / 2,
        averaged=averaged,
        upper_slack=h_star + change_base(1.0, base) - averaged,
    )


def _counts_row(counts, base):
    summary = entropy_summary(JointFreq.from_counts(counts), base)
    return summary['HX'], summary['HY'], summary['HYgX'], summary['HXgY']


def windowed_entropy_report(trace, window, stride, base=2):
    """Entropies of the trailing window and of the whole prefix at t = stride, 2*stride, ...

    Before t reaches ``window`` the trailing window is the prefix itself.
    """
    if window < 1 or stride < 1:
        raise EntropyError(f'window and stride must be at least 1, got window={window} stride={stride}')
    if window > trace.m:
        raise EntropyError(f'window {window} is longer than the trace ({trace.m} requests)')
    _check_base(base)

    requests = trace.requests
    prefix, trailing = Counter(), Counter()
    rows = []
    for t in range(stride, trace.m + 1, stride):
        for index in range(t - stride, t):
            request = requests[index]
            prefix[request] += 1
            trailing[request] += 1
            if index >= window:
                expired = requests[index - window]
                trailing[expired] -= 1
                if not trailing[expired]:
                    del trailing[expired]
        rows.append((t, *_counts_row(trailing, base), *_counts_row(prefix, base)))

    logger.info('entropy report: %d samples, window=%d stride=%d base=%s', len(rows), window, stride, base)
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)

"""Cost accounting: the per-request ledger, reset-delimited windows and the
static-optimality ratio."""
import logging
import math
from pathlib import Path

import pandas as pd

from .entropy import entropy_summary
from .exceptions import LedgerError
from .trace import joint_freq

logger = logging.getLogger(__name__)

LEDGER_COLUMNS = ['req_idx', 'hops', 'adjust', 'coord', 'reset']
WINDOW_COLUMNS = ['i', 'start', 'length', 'avg_cost', 'avg_cost_total', 'H_con']
FLOAT_FORMAT = '%.6f'


class CostLedger:
    """Append-only record of every served request's cost components."""

    def __init__(self):
        self.hops = []
        self.adjust = []
        self.coord = []
        self.reset = []
        self.reset_marks = []

    def __len__(self):
        return len(self.hops)

    @property
    def m(self):
        return len(self.hops)

    def append(self, hops, adjust=0, coord=0, reset=0, reset_fired=False):
        if min(hops, adjust, coord, reset) < 0:
            raise LedgerError('cost components must be non-negative')
        if reset_fired:
            self.reset_marks.append(len(self.hops))
        self.hops.append(hops)
        self.adjust.append(adjust)
        self.coord.append(coord)
        self.reset.append(reset)

    def record(self, outcome):
        self.append(outcome.hops, outcome.adjust_cost, outcome.coord_cost, outcome.reset_cost, outcome.reset_fired)

    def windows(self):
        """(start, stop) of every reset-delimited window; a reset during request r opens a window at r."""
        bounds = [0] + self.reset_marks + [self.m]
        return [(start, stop) for start, stop in zip(bounds, bounds[1:]) if stop > start]

    def totals(self, start=0, stop=None):
        stop = self.m if stop is None else stop
        return {
            'hops': sum(self.hops[start:stop]),
            'adjust': sum(self.adjust[start:stop]),
            'coord': sum(self.coord[start:stop]),
            'reset': sum(self.reset[start:stop]),
        }

    def to_frame(self):
        return pd.DataFrame({
            'req_idx': range(self.m),
            'hops': self.hops,
            'adjust': self.adjust,
            'coord': self.coord,
            'reset': self.reset,
        }, columns=LEDGER_COLUMNS)


def _average(totals, length, include_coord):
    cost = totals['hops'] + totals['adjust']
    if include_coord:
        cost += totals['coord'] + totals['reset']
    return cost / length


def average_cost(ledger, include_coord=False):
    if not ledger.m:
        raise LedgerError('average cost of an empty ledger')
    return _average(ledger.totals(), ledger.m, include_coord)


def window_report(ledger, trace, base):
    """One row per reset-delimited window, the trailing partial window included."""
    if ledger.m != trace.m:
        raise LedgerError(f'ledger holds {ledger.m} requests but the trace has {trace.m}')
    rows = []
    for index, (start, stop) in enumerate(ledger.windows()):
        totals = ledger.totals(start, stop)
        length = stop - start
        rows.append({
            'i': index,
            'start': start,
            'length': length,
            'avg_cost': _average(totals, length, False),
            'avg_cost_total': _average(totals, length, True),
            'H_con': entropy_summary(joint_freq(trace, start, stop), base)['H_con'],
        })
    return pd.DataFrame(rows, columns=WINDOW_COLUMNS)


def rho_estimate(renet_avg, stat_avg):
    if not stat_avg > 0:
        raise LedgerError(f'static average cost must be positive, got {stat_avg}')
    return renet_avg / stat_avg


def ledger_summary(ledger, D):
    totals = ledger.totals()
    return {
        'm': ledger.m,
        'D': D,
        'total_hops': totals['hops'],
        'total_adjust': totals['adjust'],
        'total_coord': totals['coord'],
        'total_reset': totals['reset'],
        'avg_cost': average_cost(ledger, include_coord=False),
        'avg_cost_total': average_cost(ledger, include_coord=True),
        'resets': len(ledger.reset_marks),
    }


def weighted_window_mean(windows):
    """Length-weighted mean of per-window averages; equals the whole-ledger average."""
    total = windows['length'].sum()
    return math.fsum((windows['avg_cost'] * windows['length']).tolist()) / total


def write_ledger_csv(ledger, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ledger.to_frame().to_csv(path, index=False)
    return path


def write_windows_csv(windows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    windows.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path

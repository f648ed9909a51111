"""Experiment configuration and the pipelines behind the management commands.

A configuration is layered: ``settings.RENET_DEFAULTS``, then a JSON file of
flat keys, then ``--key value`` flags. Outputs are deterministic for a given
configuration: rows are sorted and floats written with a fixed format.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings
from django.db import DatabaseError

from .baselines import ObliviousNet, build_static_dan, oblivious_cost, stat_cost, static_lower_bound
from .entropy import entropy_summary, windowed_entropy_report
from .exceptions import ConfigError, SparsityViolation, StaticDanError
from .metrics import (
    FLOAT_FORMAT, CostLedger, ledger_summary, rho_estimate, weighted_window_mean, window_report, write_ledger_csv,
    write_windows_csv,
)
from .network import NetParams, Network
from .trace import (
    WORKLOADS, Grid, ProductDist, RoundRobinGrids, SparsityParams, StarZipf, Torus, UniformPairs, generate,
    joint_freq, load_trace, sparsity_check, zipf_weights,
)

logger = logging.getLogger(__name__)

BASELINES = ('stat', 'oblivious')
LEDGER_TOLERANCE = 1e-9

FIELD_TYPES = {
    'workload': str, 'trace': str, 'n': int, 'm': int, 'm_per_node': int, 'alpha': float, 'k': int,
    'm_each': int, 'px': [float], 'py': [float], 'seed': int, 'c': float, 'delta': int, 'D': int, 'R': int,
    'rotation_accounting': str, 'vr_policy': str, 'baselines': [str], 'output_dir': str, 'repetitions': int,
    'n_list': [int], 'workloads': [str], 'window': int, 'stride': int, 'base': float, 'xlsx': bool,
    'record': bool,
}

WORKLOAD_KEYS = ('workload', 'trace', 'n', 'm', 'alpha', 'k', 'm_each', 'px', 'py', 'seed')
NETWORK_KEYS = ('c', 'delta', 'D', 'R', 'rotation_accounting', 'vr_policy')
RUN_KEYS = WORKLOAD_KEYS + NETWORK_KEYS + ('baselines', 'output_dir', 'repetitions', 'window', 'base', 'record')
COMPARE_KEYS = tuple(key for key in WORKLOAD_KEYS if key != 'trace') + NETWORK_KEYS + (
    'm_per_node', 'n_list', 'workloads', 'baselines', 'output_dir', 'xlsx', 'record')
ENTROPY_KEYS = WORKLOAD_KEYS + ('window', 'stride', 'base', 'output_dir')

COMPARE_COLUMNS = [
    'workload', 'n', 'm', 'renet_avg', 'renet_avg_total', 'stat_avg', 'oblivious_avg', 'lower_bound',
    'rho', 'oblivious_over_renet', 'resets', 'invariants_ok',
]

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


def _coerce_scalar(key, value, kind):
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in _TRUE or text in _FALSE:
                return text in _TRUE
            raise ValueError(value)
        if isinstance(value, bool):
            raise ValueError(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind is float:
            return float(value)
        if not isinstance(value, str):
            raise ValueError(value)
        return value
    except (TypeError, ValueError):
        raise ConfigError(f'config key {key!r}: {value!r} is not a valid {kind.__name__}') from None


def _coerce(key, value):
    kind = FIELD_TYPES[key]
    if value is None:
        return None
    if isinstance(kind, list):
        if isinstance(value, str):
            value = [item for item in value.split(',') if item.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f'config key {key!r} expects a list, got {value!r}')
        return [_coerce_scalar(key, item, kind[0]) for item in value]
    return _coerce_scalar(key, value, kind)


@dataclass
class ExperimentConfig:
    workload: str = 'torus'
    trace: str = None
    n: int = 256
    m: int = 200_000
    m_per_node: int = None
    alpha: float = 1.0
    k: int = 8
    m_each: int = None
    px: list = None
    py: list = None
    seed: int = 1
    c: float = 4.0
    delta: int = None
    D: int = None
    R: int = None
    rotation_accounting: str = 'unit'
    vr_policy: str = 'lru'
    baselines: list = field(default_factory=lambda: list(BASELINES))
    output_dir: str = None
    repetitions: int = 1
    n_list: list = None
    workloads: list = None
    window: int = 10_000
    stride: int = 10_000
    base: float = 2.0
    xlsx: bool = False
    record: bool = True

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError('configuration must be a JSON object of flat keys')
        unknown = sorted(set(data) - set(FIELD_TYPES))
        if unknown:
            raise ConfigError(f'unknown config keys: {", ".join(unknown)}')
        config = cls(**{key: _coerce(key, value) for key, value in data.items() if value is not None})
        config.validate()
        return config

    @classmethod
    def load(cls, defaults=None, path=None, overrides=None):
        """Defaults, then the JSON file at ``path``, then ``overrides``."""
        merged = dict(defaults or {})
        if path:
            path = Path(path)
            try:
                merged.update(json.loads(path.read_text(encoding='utf-8')))
            except FileNotFoundError:
                raise ConfigError(f'config file not found: {path}') from None
            except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
                raise ConfigError(f'unreadable config file {path}: {exc}') from exc
        merged.update(overrides or {})
        return cls.from_dict(merged)

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if self.workload not in WORKLOADS:
            raise ConfigError(f'unknown workload {self.workload!r}; choose from {", ".join(sorted(WORKLOADS))}')
        if self.n < 2:
            raise ConfigError(f'n must be at least 2, got {self.n}')
        if self.m < 1 or (self.m_per_node is not None and self.m_per_node < 1):
            raise ConfigError('request counts must be positive')
        if not self.c > 0:
            raise ConfigError(f'c must be positive, got {self.c}')
        if self.repetitions < 1:
            raise ConfigError(f'repetitions must be at least 1, got {self.repetitions}')
        if self.window < 1 or self.stride < 1:
            raise ConfigError('window and stride must be at least 1')
        if not self.base > 1:
            raise ConfigError(f'entropy base must be greater than 1, got {self.base}')
        if self.delta is not None and self.delta < 1:
            raise ConfigError(f'delta must be at least 1, got {self.delta}')
        unknown = sorted(set(self.baselines) - set(BASELINES))
        if unknown:
            raise ConfigError(f'unknown baselines: {", ".join(unknown)}')
        for name in self.workloads or ():
            if name not in WORKLOADS:
                raise ConfigError(f'unknown workload {name!r} in workloads')
        if self.n_list is not None and any(n < 2 for n in self.n_list):
            raise ConfigError('every n in n_list must be at least 2')
        try:
            self.net_params(self.n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def effective_m(self, n):
        return self.m_per_node * n if self.m_per_node else self.m

    def workload_spec(self, n=None):
        n = self.n if n is None else n
        m = self.effective_m(n)
        if self.workload == Torus.name:
            return Torus(n, m)
        if self.workload == Grid.name:
            return Grid(n, m)
        if self.workload == StarZipf.name:
            return StarZipf(n, m, self.alpha)
        if self.workload == RoundRobinGrids.name:
            return RoundRobinGrids(n, self.k, self.m_each or max(1, m // self.k))
        if self.workload == ProductDist.name:
            px = tuple(self.px) if self.px else tuple(zipf_weights(n, self.alpha).tolist())
            py = tuple(self.py) if self.py else tuple([1.0] * n)
            return ProductDist(n, m, px, py)
        return UniformPairs(n, m)

    def net_params(self, n):
        return NetParams(n=n, c=self.c, D=self.D, R=self.R,
                         rotation_accounting=self.rotation_accounting, vr_policy=self.vr_policy)

    def sparsity_window(self, params):
        return self.delta or math.ceil(self.c * params.n * params.D)


def to_python_type(obj):
    if isinstance(obj, dict):
        return {k: to_python_type(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple, set)):
        return [to_python_type(v) for v in obj]
    elif isinstance(obj, (np.bool_,)):
        return bool(obj)
    elif isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, np.floating):
        return float(obj)
    elif isinstance(obj, Path):
        return str(obj)
    else:
        return obj


def write_json(data, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_python_type(data), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def default_output_dir(config, command):
    if config.output_dir:
        return Path(config.output_dir)
    source = Path(config.trace).stem if config.trace else config.workload
    return Path(settings.RENET_OUTPUT_DIR) / command / f'{source}_n{config.n}_seed{config.seed}'


def build_trace(config, seed, n=None):
    if config.trace:
        return load_trace(config.trace, n=config.n)
    return generate(config.workload_spec(n), seed)


def replay(net, trace):
    ledger = CostLedger()
    for request in trace.requests:
        ledger.record(net.serve_request(request))
    return ledger


@dataclass
class RunResult:
    summary: dict
    ledger: CostLedger
    windows: pd.DataFrame
    network: Network


def run_experiment(config, seed, output_dir):
    """Replay one trace through the network and the requested baselines; write every output file."""
    output_dir = Path(output_dir)
    trace = build_trace(config, seed)
    params = config.net_params(trace.n)
    window = config.sparsity_window(params)
    sparsity = sparsity_check(trace, SparsityParams(config.c, window))
    if not sparsity.ok:
        logger.warning('trace is not (%s, %d)-sparse: window at %d holds %d unique pairs',
                       config.c, window, sparsity.worst_window_start, sparsity.worst_unique_pairs)

    net = Network(params, nodes=trace.nodes)
    ledger = replay(net, trace)
    violations = net.validate_invariants()
    windows = window_report(ledger, trace, params.delta_cap)

    summary = ledger_summary(ledger, params.D)
    window_mean = weighted_window_mean(windows)
    if not math.isclose(window_mean, summary['avg_cost'], rel_tol=LEDGER_TOLERANCE, abs_tol=LEDGER_TOLERANCE):
        violations.append('ledger: window averages do not add up to the run average')
    full = entropy_summary(joint_freq(trace), params.delta_cap)
    summary.update({
        'workload': Path(config.trace).stem if config.trace else config.workload,
        'n': trace.n,
        'c': config.c,
        'seed': seed,
        'theta': params.theta,
        'delta_cap': params.delta_cap,
        'reset_threshold': params.reset_threshold,
        'sparsity_ok': sparsity.ok,
        'sparsity_window': window,
        'worst_unique_pairs': sparsity.worst_unique_pairs,
        'invariants_ok': not violations,
        'violations': violations,
        'H_con_windows': windows['H_con'].tolist(),
        'H_con_full': full['H_con'],
        'lower_bound': static_lower_bound(trace, params.delta_cap),
        'oblivious_avg': None,
        'stat_avg': None,
        'rho_stat': None,
        'rho_oblivious': None,
    })

    if 'oblivious' in config.baselines:
        summary['oblivious_avg'] = oblivious_cost(ObliviousNet(trace.nodes, seed=seed), trace)
        summary['rho_oblivious'] = rho_estimate(summary['avg_cost_total'], summary['oblivious_avg'])
    if 'stat' in config.baselines:
        try:
            dan = build_static_dan(trace, params)
        except (SparsityViolation, StaticDanError) as exc:
            logger.warning('static baseline unavailable: %s', exc)
        else:
            summary['stat_avg'] = stat_cost(dan, trace)
            summary['rho_stat'] = rho_estimate(summary['avg_cost_total'], summary['stat_avg'])
            write_json(dan.snapshot(), output_dir / 'static.json')

    write_ledger_csv(ledger, output_dir / 'ledger.csv')
    write_windows_csv(windows, output_dir / 'windows.csv')
    write_json(net.snapshot(), output_dir / 'network.json')
    write_json(summary, output_dir / 'summary.json')
    logger.info('run written to %s: avg_cost=%.4f resets=%d', output_dir, summary['avg_cost'], summary['resets'])
    return RunResult(summary=summary, ledger=ledger, windows=windows, network=net)


def _mean(values):
    values = [value for value in values if value is not None]
    return math.fsum(values) / len(values) if values else None


def run_pipeline(config, output_dir):
    """One run, or ``repetitions`` runs with seeds seed..seed+r-1 under rep_<i>/ plus a summary of means."""
    output_dir = Path(output_dir)
    if config.repetitions == 1:
        return run_experiment(config, config.seed, output_dir).summary

    summaries = [
        run_experiment(config, config.seed + index, output_dir / f'rep_{index}').summary
        for index in range(config.repetitions)
    ]
    keys = ('avg_cost', 'avg_cost_total', 'oblivious_avg', 'stat_avg', 'rho_stat', 'lower_bound', 'resets')
    summary = {f'mean_{key}': _mean([item[key] for item in summaries]) for key in keys}
    summary.update({
        'repetitions': config.repetitions,
        'seeds': [item['seed'] for item in summaries],
        'invariants_ok': all(item['invariants_ok'] for item in summaries),
        'sparsity_ok': all(item['sparsity_ok'] for item in summaries),
        'violations': [v for item in summaries for v in item['violations']],
        'workload': summaries[0]['workload'],
        'n': summaries[0]['n'],
        'm': summaries[0]['m'],
        'c': config.c,
        'seed': config.seed,
        'avg_cost': summary['mean_avg_cost'],
        'avg_cost_total': summary['mean_avg_cost_total'],
        'oblivious_avg': summary['mean_oblivious_avg'],
        'stat_avg': summary['mean_stat_avg'],
        'rho_stat': summary['mean_rho_stat'],
        'lower_bound': summary['mean_lower_bound'],
        'resets': sum(item['resets'] for item in summaries),
    })
    write_json(summary, output_dir / 'summary.json')
    return summary


def compare(config, output_dir):
    """One row per (workload, n) cell, each cell a full run under its own directory."""
    if not config.n_list:
        raise ConfigError('compare needs a non-empty n_list')
    output_dir = Path(output_dir)
    rows, summaries = [], []
    for workload in sorted(config.workloads or [config.workload]):
        for n in sorted(set(config.n_list)):
            cell = replace(config, workload=workload, n=n, trace=None)
            cell.validate()
            summary = run_experiment(cell, config.seed, output_dir / f'{workload}_n{n}').summary
            summaries.append((cell, summary))
            oblivious = summary['oblivious_avg']
            rows.append({
                'workload': workload,
                'n': n,
                'm': summary['m'],
                'renet_avg': summary['avg_cost'],
                'renet_avg_total': summary['avg_cost_total'],
                'stat_avg': summary['stat_avg'],
                'oblivious_avg': oblivious,
                'lower_bound': summary['lower_bound'],
                'rho': summary['rho_stat'],
                'oblivious_over_renet': oblivious / summary['avg_cost'] if oblivious is not None else None,
                'resets': summary['resets'],
                'invariants_ok': summary['invariants_ok'],
            })
    frame = pd.DataFrame(rows, columns=COMPARE_COLUMNS)
    output_dir.mkdir(parents=True, exist_ok=True)
    frame.to_csv(output_dir / 'compare.csv', index=False, float_format=FLOAT_FORMAT)
    if config.xlsx:
        write_compare_workbook(frame, config, output_dir / 'compare.xlsx')
    logger.info('compare written to %s: %d cells', output_dir, len(frame))
    return frame, summaries


def write_compare_workbook(frame, config, path):
    settings_frame = pd.DataFrame(
        [(key, json.dumps(to_python_type(value))) for key, value in sorted(config.to_dict().items())],
        columns=['Key', 'Value'],
    )
    with pd.ExcelWriter(path, engine='xlsxwriter') as writer:
        workbook = writer.book
        header_format = workbook.add_format({'bold': True, 'bg_color': '#D9E1F2', 'border': 1})
        float_format = workbook.add_format({'num_format': '0.0000'})

        def write(df, sheet):
            df.to_excel(writer, sheet_name=sheet, index=False, startrow=1, header=False)
            ws = writer.sheets[sheet]
            for i, col in enumerate(df.columns):
                ws.write(0, i, col, header_format)
                width = max(15, len(str(col)) + 2)
                ws.set_column(i, i, width, float_format if pd.api.types.is_float_dtype(df[col]) else None)
            ws.add_table(0, 0, max(len(df), 1), len(df.columns) - 1, {
                'name': f'Table_{sheet}',
                'style': 'TableStyleLight8',
                'columns': [{'header': c} for c in df.columns]
            })

        write(frame, '00_Compare')
        write(settings_frame, '01_Config')
    return path


def entropy_pipeline(config, output_dir):
    trace = build_trace(config, config.seed)
    report = windowed_entropy_report(trace, config.window, config.stride, config.base)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    report.to_csv(output_dir / 'entropy.csv', index=False, float_format=FLOAT_FORMAT)
    return report


def entropy_ordering_failures(report):
    """Sample times where a window conditional entropy is not strictly below its marginal."""
    failing = report[(report['HYgX'] >= report['HY']) | (report['HXgY'] >= report['HX'])]
    return failing['t'].tolist()


def record_run(command, config, summary, output_dir):
    """Store a registry row; a missing table only costs the row."""
    from .models import ExperimentRun

    try:
        return ExperimentRun.objects.create(
            command=command,
            workload=summary['workload'],
            n=summary['n'],
            m=summary['m'],
            c=config.c,
            seed=summary['seed'],
            avg_cost=summary['avg_cost'],
            avg_cost_total=summary['avg_cost_total'],
            rho_stat=summary.get('rho_stat'),
            oblivious_avg=summary.get('oblivious_avg'),
            lower_bound=summary.get('lower_bound'),
            resets=summary['resets'],
            invariants_ok=summary['invariants_ok'],
            sparsity_ok=summary['sparsity_ok'],
            output_dir=str(output_dir),
            config=to_python_type(config.to_dict()),
        )
    except DatabaseError as exc:
        logger.warning('run registry unavailable, run not recorded: %s', exc)
        return None


def add_config_arguments(parser, keys):
    parser.add_argument('--config', dest='config', default=None, help='JSON file of flat configuration keys.')
    for key in keys:
        kind = FIELD_TYPES[key]
        if isinstance(kind, list):
            parser.add_argument(f'--{key}', dest=key, nargs='+', default=None,
                                help=f'Overrides "{key}" (one or more values).')
        else:
            parser.add_argument(f'--{key}', dest=key, default=None, help=f'Overrides "{key}".')


def config_from_options(options, keys):
    overrides = {key: options[key] for key in keys if options.get(key) is not None}
    return ExperimentConfig.load(getattr(settings, 'RENET_DEFAULTS', {}), options.get('config'), overrides)

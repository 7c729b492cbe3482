"""
Experiment protocols: the three-variable walkthrough, scaling sweeps over random
instances with one invalid configuration, Δt tuning, and the FALQON vs FALQON-IC
comparison. Every summary is computed from the per-instance trajectories, which
are written next to it when an output directory is given.
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.stats import sem
from tqdm import tqdm

from src.algorithms import CSV_HEADER, MONOTONE_TOL, RunConfig, feedback_loop, prepare, run, run_sweep
from src.bits import bits_of
from src.control import FeedbackLaw
from src.errors import ConfigError, InputError, InstanceError, TuningFailureError
from src.optim_utils import write_csv, write_json
from src.oracle_metrics import resource_estimate
from src.problem import random_instance, svp_problem
from src.qc_observable import ObservableSpec

logger = logging.getLogger(__name__)

FAMILIES = ('svp_example', 'random_scaling', 'falqon_comparison')
DEFAULT_THRESHOLDS = {'r_a_target': 0.98, 'sp_target': 0.25}
SVP_OPTIMUM = (1, 0, 0)
SVP_GAMMA = 3.0

COMPARISON_DT_IC = {7: 0.008, 8: 0.0048, 9: 0.0048, 10: 0.004}
COMPARISON_DT_FALQON = {7: 0.0058, 8: 0.0035, 9: 0.003, 10: 0.0025}
COMPARISON_GAMMA = 8.0


@dataclass
class ExperimentPlan:
    family: str
    sizes: list = field(default_factory=list)
    instances_per_size: int = 50
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    dt_table: dict = field(default_factory=dict)
    base: RunConfig = None
    output_dir: str = None
    seed: int = 0
    n_ic: int = 1
    tune: bool = False
    tune_grid: list = None
    smoothing: int = 20
    workers: int = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f'unknown experiment family {self.family!r}, expected one of {FAMILIES}')
        if self.family != 'svp_example' and not self.sizes:
            raise ConfigError('an experiment plan needs at least one size')
        self.sizes = [int(n) for n in self.sizes]
        if self.instances_per_size < 0:
            raise ConfigError(f'instances_per_size must be non-negative, got {self.instances_per_size}')
        self.thresholds = {**DEFAULT_THRESHOLDS, **self.thresholds}
        for key, value in self.thresholds.items():
            if not 0 < value < 1:
                raise ConfigError(f'threshold {key}={value} must lie in (0, 1)')
        self.dt_table = {int(n): float(dt) for n, dt in self.dt_table.items()}
        if self.base is None:
            self.base = RunConfig(algorithm='falqon_ic', observable=ObservableSpec('deflation', gammas=[8.0]),
                                  law=FeedbackLaw('identity', 1.0), layers=2000)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f'unknown plan keys {sorted(unknown)}')
        if isinstance(d.get('base'), dict):
            d['base'] = RunConfig.from_dict(d['base'])
        return cls(**d)

    def to_dict(self):
        return {'family': self.family, 'sizes': self.sizes, 'instances_per_size': self.instances_per_size,
                'thresholds': self.thresholds, 'dt_table': {str(n): dt for n, dt in self.dt_table.items()},
                'base': self.base.to_dict(), 'output_dir': self.output_dir, 'seed': self.seed, 'n_ic': self.n_ic,
                'tune': self.tune, 'tune_grid': self.tune_grid, 'smoothing': self.smoothing, 'workers': self.workers}

    def instance_seed(self, n, i):
        return self.seed + 1000 * n + i

    def instances(self, n):
        return [random_instance(n, self.n_ic, seed=self.instance_seed(n, i)) for i in range(self.instances_per_size)]


def load_plan(path):
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise InputError(f'{path}: {e}') from e
    return ExperimentPlan.from_dict(d)


### Walkthrough on the three-variable example
def svp_configs(layers=1000):
    law = FeedbackLaw('identity', 1.0)
    return {
        'falqon': RunConfig('falqon', ObservableSpec('penalty_ic', gammas=[SVP_GAMMA]), law, dt=0.08, layers=layers),
        'falqon_c': RunConfig('falqon_c', ObservableSpec('penalty_ic', gammas=[SVP_GAMMA]), law, dt=0.08,
                              layers=layers),
        'deflation': RunConfig('falqon_ic', ObservableSpec('deflation', gammas=[SVP_GAMMA]), law, dt=0.1,
                               layers=layers),
        'folded_spectrum': RunConfig('falqon_ic', ObservableSpec('folded_spectrum', alpha=1.3), law, dt=0.03,
                                     layers=layers),
    }


def run_svp_example(variants=None, layers=1000):
    configs = svp_configs(layers)
    variants = list(configs) if variants in (None, 'all') else list(variants)
    unknown = set(variants) - set(configs)
    if unknown:
        raise ConfigError(f'unknown walkthrough variants {sorted(unknown)}, expected some of {list(configs)}')
    problem = svp_problem()
    report = {}
    for name in variants:
        traj = run(problem, configs[name])
        decoded = tuple(int(b) for b in bits_of(traj.argmax(), traj.n_decision))
        entry = {'dt': configs[name].dt, 'decoded': list(decoded), 'histogram': traj.histogram(),
                 'success_prob': traj.records[-1].success_prob, 'monotone': traj.is_monotone(),
                 'max_increase': float(traj.lyapunov_increases().max(initial=0.0)),
                 'passed': decoded == SVP_OPTIMUM, 'error': None, 'trajectory': traj}
        if not entry['passed']:
            entry['error'] = f'{name} decoded {list(decoded)}, expected {list(SVP_OPTIMUM)}'
            logger.warning(entry['error'])
        report[name] = entry
    return report


### Δt tuning
def tune_dt(problems, cfg, grid, workers=None):
    """Largest grid value whose trajectories are all Lyapunov-monotone."""
    grid = [float(dt) for dt in grid]
    if not grid:
        raise ConfigError('the Δt grid is empty')
    if any(a <= b for a, b in zip(grid, grid[1:])):
        raise ConfigError(f'the Δt grid must be strictly descending, got {grid}')
    for dt in grid:
        trajectories = run_sweep(problems, replace(cfg, dt=dt, adaptive_dt=False), workers)
        worst = max(float(t.lyapunov_increases().max(initial=0.0)) for t in trajectories) if trajectories else 0.0
        if worst <= MONOTONE_TOL:
            logger.info(f'dt={dt:g} accepted')
            return dt
        logger.info(f'dt={dt:g} rejected, largest Lyapunov increase {worst:.3g}')
    raise TuningFailureError(f'no Δt in {grid} keeps every trajectory monotone')


def auto_grid(problem, cfg, ratio=0.8, count=12):
    """Geometric grid starting from the step bound measured after the first layer."""
    hp, qc = prepare(problem, cfg)
    bound = None
    for k, _, _, bound, _ in feedback_loop(hp, qc, replace(cfg, layers=2)):
        pass
    if not bound:
        raise TuningFailureError('the controller vanishes after the first layer; no step bound to start from')
    return [bound * ratio ** i for i in range(count)]


### Summaries
def layers_to_threshold(values, target):
    """First layer (1-based) at which values reach target; None when never reached."""
    hits = np.flatnonzero(np.asarray(values) >= target)
    return int(hits[0]) + 1 if hits.size else None


def _threshold_stats(trajectories, metric, target):
    reached = [layers_to_threshold(getattr(t, metric), target) for t in trajectories]
    hits = [k for k in reached if k is not None]
    return {'target': target, 'reached': len(hits), 'censored': len(reached) - len(hits),
            'mean_layers': float(np.mean(hits)) if hits else None, 'per_instance': reached}


def summarize(trajectories, thresholds=None):
    thresholds = {**DEFAULT_THRESHOLDS, **(thresholds or {})}
    if not trajectories:
        return {'instances': 0}
    out = {'instances': len(trajectories)}
    for name, attr in (('theta', 'thetas'), ('approx_ratio', 'approx_ratios'), ('success_prob', 'success_probs')):
        stack = np.array([getattr(t, attr) for t in trajectories])
        out[name] = {'mean': np.mean(stack, axis=0), 'std': np.std(stack, axis=0)}
    finals = np.array([t.records[-1].success_prob for t in trajectories])
    out['final_success_prob'] = {'mean': float(finals.mean()),
                                 'sem': float(sem(finals)) if finals.size > 1 else 0.0}
    out['to_r_a'] = _threshold_stats(trajectories, 'approx_ratios', thresholds['r_a_target'])
    out['to_sp'] = _threshold_stats(trajectories, 'success_probs', thresholds['sp_target'])
    return out


def smoothed(curve, window=20):
    return uniform_filter1d(np.asarray(curve, dtype=float), size=max(1, int(window)), mode='nearest')


def is_increasing(curve, window=20, tol=0.0):
    return bool(np.all(np.diff(smoothed(curve, window)) >= -tol))


def _mean_rows(summary):
    return [[k + 1, summary['theta']['mean'][k], summary['theta']['std'][k],
             summary['approx_ratio']['mean'][k], summary['approx_ratio']['std'][k],
             summary['success_prob']['mean'][k], summary['success_prob']['std'][k]]
            for k in range(len(summary['theta']['mean']))]


def _write_instances(directory, trajectories, seeds):
    for i, (traj, seed) in enumerate(zip(trajectories, seeds)):
        write_csv(os.path.join(directory, f'instance_{i:03d}.csv'), CSV_HEADER, traj.csv_rows())
    write_json(os.path.join(directory, 'seeds.json'), {'instance_seeds': seeds})


def _split_failures(results):
    trajectories = [r for r in results if not isinstance(r, InstanceError)]
    failures = [{'index': r.index, 'error': str(r.cause)} for r in results if isinstance(r, InstanceError)]
    for f in failures:
        logger.warning(f'Instance {f["index"]} failed: {f["error"]}')
    return trajectories, failures


### Scaling sweep
def run_scaling(plan, progress=False):
    rows, curves = [], {}
    for n in tqdm(plan.sizes, disable=not progress, desc='sizes'):
        problems = plan.instances(n)
        cfg = plan.base
        if plan.tune:
            grid = plan.tune_grid or auto_grid(problems[0], cfg)
            dt = tune_dt(problems, cfg, grid, plan.workers)
        elif n in plan.dt_table:
            dt = plan.dt_table[n]
        else:
            dt = cfg.dt
        trajectories, failures = _split_failures(
            run_sweep(problems, replace(cfg, dt=dt), plan.workers, keep_errors=True))
        summary = summarize(trajectories, plan.thresholds)
        summary['failures'] = failures
        curves[n] = summary
        row = {'n': n, 'dt': dt, 'instances': len(trajectories), 'failed': len(failures)}
        if trajectories:
            row.update({'layers_to_r_a': summary['to_r_a']['mean_layers'], 'reached_r_a': summary['to_r_a']['reached'],
                        'layers_to_sp': summary['to_sp']['mean_layers'], 'reached_sp': summary['to_sp']['reached'],
                        'final_sp_mean': summary['final_success_prob']['mean'],
                        'final_sp_sem': summary['final_success_prob']['sem']})
        rows.append(row)
        logger.info(f'n={n}: dt={dt:g} {row}')

        if plan.output_dir:
            directory = os.path.join(plan.output_dir, f'n{n}')
            _write_instances(directory, trajectories, [plan.instance_seed(n, i) for i in range(len(problems))])
            if trajectories:
                write_csv(os.path.join(directory, 'mean_curves.csv'),
                          ['layer', 'theta_mean', 'theta_std', 'r_a_mean', 'r_a_std', 'sp_mean', 'sp_std'],
                          _mean_rows(summary))
    if plan.output_dir:
        _write_table(plan, rows, 'scaling')
    return {'rows': rows, 'curves': curves}


def _write_table(plan, rows, name):
    header = sorted({key for row in rows for key in row}, key=lambda k: (k != 'n', k))
    write_csv(os.path.join(plan.output_dir, f'{name}_summary.csv'), header,
              [[row.get(key) for key in header] for row in rows])
    write_json(os.path.join(plan.output_dir, f'{name}_summary.json'), {'plan': plan.to_dict(), 'rows': rows})


### FALQON vs FALQON-IC
def run_comparison(plan, progress=False):
    law = plan.base.law
    layers = plan.base.layers
    rows = []
    if plan.instances_per_size == 0:
        return {'rows': rows}
    for n in tqdm(plan.sizes, disable=not progress, desc='sizes'):
        problems = plan.instances(n)
        ic_cfg = RunConfig('falqon_ic', ObservableSpec('deflation', gammas=[COMPARISON_GAMMA]), law,
                           dt=plan.dt_table.get(n, COMPARISON_DT_IC.get(n, plan.base.dt)), layers=layers,
                           seed=plan.base.seed)
        fq_cfg = RunConfig('falqon', ObservableSpec('penalty_ic', gammas=[COMPARISON_GAMMA]), law,
                           dt=COMPARISON_DT_FALQON.get(n, plan.base.dt), layers=layers, seed=plan.base.seed)
        row = {'n': n,
               'qubits_falqon_ic': resource_estimate(problems[0], 'falqon_ic').qubits,
               'qubits_falqon': resource_estimate(problems[0], 'falqon', [COMPARISON_GAMMA]).qubits}
        for name, cfg in (('falqon_ic', ic_cfg), ('falqon', fq_cfg)):
            trajectories, failures = _split_failures(run_sweep(problems, cfg, plan.workers, keep_errors=True))
            finals = np.array([t.records[-1].success_prob for t in trajectories])
            row[f'dt_{name}'] = cfg.dt
            row[f'sp_{name}_mean'] = float(finals.mean()) if finals.size else None
            row[f'sp_{name}_sem'] = float(sem(finals)) if finals.size > 1 else None
            row[f'failed_{name}'] = len(failures)
            if plan.output_dir:
                _write_instances(os.path.join(plan.output_dir, f'n{n}', name), trajectories,
                                 [plan.instance_seed(n, i) for i in range(len(problems))])
        rows.append(row)
        logger.info(f'n={n}: {row}')
    if plan.output_dir:
        _write_table(plan, rows, 'comparison')
    return {'rows': rows}


def run_plan(plan, progress=False):
    if plan.family == 'svp_example':
        report = run_svp_example(layers=plan.base.layers)
        if plan.output_dir:
            for name, entry in report.items():
                traj = entry['trajectory']
                write_csv(os.path.join(plan.output_dir, f'svp_{name}.csv'), CSV_HEADER, traj.csv_rows())
            write_json(os.path.join(plan.output_dir, 'svp_report.json'),
                       {name: {k: v for k, v in entry.items() if k != 'trajectory'} for name, entry in report.items()})
        return report
    if plan.family == 'random_scaling':
        return run_scaling(plan, progress)
    return run_comparison(plan, progress)

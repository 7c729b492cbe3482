"""
Layer-by-layer feedback drivers.

falqon      the problem is first converted to an unconstrained one; the converted
            Hamiltonian both generates V_P and serves as the Lyapunov observable.
falqon_c    V_P is generated by the objective, Q_c is the penalty Hamiltonian.
falqon_ic   V_P is generated by the objective, Q_c is the deflated or folded
            observable; no slack qubits for invalid configurations.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from tqdm import tqdm

from src.bits import bitstring, index_of
from src.control import (DEFAULT_FD_STEP, FeedbackLaw, apply_law, controller_pauli_sum, dt_bound,
                         finite_diff_expectation, pauli_controller_expectation)
from src.errors import ConfigError, FalqonError, InputError, InstanceError, UndefinedMetricError
from src.oracle_metrics import ALGORITHMS, approximation_ratio, brute_force, success_probability
from src.pauli import DiagonalObservable, diagonal_of
from src.qc_observable import ObservableSpec, QcObservable, build_qc, problem_hamiltonian
from src.simulator import (LAYER_ORDERS, MixerSpec, apply_layer, controller_expectation, expectation_diag,
                           init_state, marginal_probabilities, sample)

logger = logging.getLogger(__name__)

PAIRINGS = {
    'falqon': ('penalty', 'penalty_ic'),
    'falqon_c': ('penalty', 'penalty_ic'),
    'falqon_ic': ('deflation', 'folded_spectrum'),
}
CONTROLLER_MODES = ('analytic', 'expectation_split', 'pauli', 'finite_diff')
MONOTONE_TOL = 1e-9
HISTOGRAM_TOL = 1e-12
DEFAULT_SHOTS = 1024
CSV_HEADER = ('layer', 'theta', 'lyapunov', 'energy', 'approx_ratio', 'success_prob')


@dataclass
class RunConfig:
    algorithm: str = 'falqon_ic'
    observable: ObservableSpec = field(default_factory=ObservableSpec)
    law: FeedbackLaw = field(default_factory=FeedbackLaw)
    dt: float = 0.1
    layers: int = 1000
    theta_init: float = 0.0
    mixer: MixerSpec = field(default_factory=MixerSpec)
    initial_state: str = 'plus_superposition'
    initial_index: int = None
    seed: int = 0
    controller_mode: str = None
    fd_step: float = DEFAULT_FD_STEP
    layer_order: str = 'mixer_first'
    adaptive_dt: bool = False
    shots: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f'unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}')
        if self.observable.variant not in PAIRINGS[self.algorithm]:
            raise ConfigError(f'{self.algorithm} cannot run with a {self.observable.variant} observable, '
                              f'expected one of {PAIRINGS[self.algorithm]}')
        if not self.dt > 0:
            raise ConfigError(f'dt must be positive, got {self.dt}')
        if int(self.layers) != self.layers or self.layers < 1:
            raise ConfigError(f'layers must be a positive integer, got {self.layers}')
        self.layers = int(self.layers)
        if self.controller_mode is None:
            self.controller_mode = 'expectation_split' if self.observable.variant == 'deflation' else 'analytic'
        if self.controller_mode not in CONTROLLER_MODES:
            raise ConfigError(f'unknown controller mode {self.controller_mode!r}, expected one of {CONTROLLER_MODES}')
        if self.layer_order not in LAYER_ORDERS:
            raise ConfigError(f'unknown layer order {self.layer_order!r}, expected one of {LAYER_ORDERS}')
        if self.shots < 0:
            raise ConfigError(f'shots must be non-negative, got {self.shots}')

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f'unknown run-config keys {sorted(unknown)}')
        if isinstance(d.get('observable'), dict):
            d['observable'] = ObservableSpec.from_dict(d['observable'])
        if isinstance(d.get('law'), dict):
            d['law'] = FeedbackLaw.from_dict(d['law'])
        if isinstance(d.get('mixer'), dict):
            d['mixer'] = MixerSpec.from_dict(d['mixer'])
        return cls(**d)

    def to_dict(self):
        return {'algorithm': self.algorithm, 'observable': self.observable.to_dict(), 'law': self.law.to_dict(),
                'dt': self.dt, 'layers': self.layers, 'theta_init': self.theta_init, 'mixer': self.mixer.to_dict(),
                'initial_state': self.initial_state, 'initial_index': self.initial_index, 'seed': self.seed,
                'controller_mode': self.controller_mode, 'fd_step': self.fd_step, 'layer_order': self.layer_order,
                'adaptive_dt': self.adaptive_dt, 'shots': self.shots}


@dataclass
class LayerRecord:
    layer: int
    theta: float
    lyapunov: float
    energy: float
    approx_ratio: float
    success_prob: float
    dt: float
    dt_bound: float = None

    def csv_row(self):
        return [self.layer, self.theta, self.lyapunov, self.energy, self.approx_ratio, self.success_prob]


@dataclass
class Trajectory:
    records: list
    final_state: object = field(repr=False)
    n_decision: int
    config: dict = field(default_factory=dict)
    counts: dict = None

    @property
    def thetas(self):
        return np.array([r.theta for r in self.records])

    @property
    def lyapunov(self):
        return np.array([r.lyapunov for r in self.records])

    @property
    def success_probs(self):
        return np.array([r.success_prob for r in self.records])

    @property
    def approx_ratios(self):
        return np.array([r.approx_ratio for r in self.records])

    def final_probabilities(self):
        return marginal_probabilities(self.final_state, self.n_decision)

    def histogram(self):
        probs = self.final_probabilities()
        return {bitstring(int(j), self.n_decision): float(probs[j]) for j in np.flatnonzero(probs > HISTOGRAM_TOL)}

    def sampled_counts(self, shots, seed):
        """Measurement counts of the final state, keyed by the decision bits only."""
        counts = {}
        for key, count in sample(self.final_state, shots, seed).items():
            key = key[:self.n_decision]
            counts[key] = counts.get(key, 0) + count
        return counts

    def histogram_json(self, shots=DEFAULT_SHOTS, seed=0):
        return {'counts': self.sampled_counts(shots, seed), 'shots': shots, 'probabilities': self.histogram()}

    def argmax(self):
        return int(np.argmax(self.final_probabilities()))

    def lyapunov_increases(self):
        return np.diff(self.lyapunov)

    def is_monotone(self, tol=MONOTONE_TOL):
        return bool(np.all(self.lyapunov_increases() <= tol))

    def csv_rows(self):
        return [r.csv_row() for r in self.records]

    def to_dict(self):
        def clean(v):
            return None if v is None or not np.isfinite(v) else float(v)
        return {
            'config': self.config,
            'records': [{'layer': r.layer, 'theta': r.theta, 'lyapunov': r.lyapunov, 'energy': r.energy,
                         'approx_ratio': clean(r.approx_ratio), 'success_prob': r.success_prob,
                         'dt': r.dt, 'dt_bound': clean(r.dt_bound)} for r in self.records],
            'histogram': self.histogram(),
            'counts': self.counts,
        }


### Setup
# For falqon the converted Hamiltonian is both generator and observable. Otherwise the
# objective is padded with idle qubits up to the observable's register.
def prepare(problem, cfg):
    qc = build_qc(problem, cfg.observable)
    if cfg.algorithm == 'falqon':
        hp = qc.diag
    else:
        hp = diagonal_of(problem_hamiltonian(problem, n_qubits=qc.n))
    cfg.mixer.check(qc.n)
    return hp, qc


def _controller(qc, cfg):
    if cfg.controller_mode == 'pauli':
        R = controller_pauli_sum(qc, cfg.mixer)
        return lambda s, dt: pauli_controller_expectation(s, R)
    if cfg.controller_mode == 'finite_diff':
        return lambda s, dt: finite_diff_expectation(s, qc, cfg.mixer, dt, cfg.fd_step)
    split = cfg.controller_mode == 'expectation_split'
    return lambda s, dt: controller_expectation(s, qc, cfg.mixer, split=split)


def feedback_loop(hp, qc, cfg, progress=False):
    """
    Yields (k, theta_k, dt_k, bound_k, state) after layer k is applied, for k = 1..p.
    theta_{k+1} is computed from the state after layer k only.
    """
    state = init_state(qc.n, cfg.initial_state, cfg.initial_index)
    controller = _controller(qc, cfg)
    norm_hm, norm_hp = cfg.mixer.norm(qc.n), hp.norm()
    theta, dt, bound = float(cfg.theta_init), float(cfg.dt), None
    for k in tqdm(range(1, cfg.layers + 1), disable=not progress, desc=cfg.algorithm):
        apply_layer(state, hp, cfg.mixer, theta, dt, cfg.layer_order)
        yield k, theta, dt, bound, state
        if k == cfg.layers:
            break
        w = controller(state, dt)
        bound = dt_bound(w, norm_hm, norm_hp, theta)
        if bound.stalled:
            logger.debug(f'Layer {k}: controller expectation is zero, theta stays at 0')
        theta = float(apply_law(cfg.law, w))
        if cfg.adaptive_dt and not bound.stalled:
            dt = min(float(cfg.dt), 0.9 * bound.value)
        bound = bound.value


def run(problem, cfg, spectrum=None, progress=False):
    hp, qc = prepare(problem, cfg)
    spectrum = brute_force(problem) if spectrum is None else spectrum
    logger.info(f'{cfg.algorithm} ({cfg.observable.variant}) on {qc.n} qubits: dt={cfg.dt} layers={cfg.layers}')

    ratio_defined = True
    records = []
    state = None
    for k, theta, dt, bound, state in feedback_loop(hp, qc, cfg, progress):
        if ratio_defined:
            try:
                ratio = approximation_ratio(state, problem, spectrum)
            except UndefinedMetricError:
                logger.warning('All feasible costs are equal; the approximation ratio is recorded as NaN')
                ratio_defined = False
        if not ratio_defined:
            ratio = float('nan')
        records.append(LayerRecord(layer=k, theta=theta, lyapunov=expectation_diag(state, qc.diag),
                                   energy=expectation_diag(state, hp), approx_ratio=ratio,
                                   success_prob=success_probability(state, spectrum), dt=dt, dt_bound=bound))

    traj = Trajectory(records=records, final_state=state, n_decision=qc.n_decision, config=cfg.to_dict())
    if cfg.shots:
        traj.counts = traj.sampled_counts(cfg.shots, cfg.seed)
    return traj


### Batches
def _run_indexed(args):
    index, problem, cfg, keep_errors = args
    try:
        return run(problem, cfg)
    except FalqonError as e:
        if keep_errors:
            return InstanceError(index, e)
        raise InstanceError(index, e) from e


def default_workers():
    return int(os.environ.get('FALQON_WORKERS', 1))


def run_sweep(problems, cfg, workers=None, progress=False, keep_errors=False):
    """
    Independent runs, instance i seeded with cfg.seed + i; results keep input order.
    With keep_errors a failed instance yields its InstanceError in place of a Trajectory.
    """
    problems = list(problems)
    if not problems:
        return []
    sizes = {p.n for p in problems}
    if len(sizes) > 1:
        raise InputError(f'a sweep needs problems of one size, got sizes {sorted(sizes)}')
    workers = default_workers() if workers is None else int(workers)
    jobs = [(i, p, replace(cfg, seed=cfg.seed + i), keep_errors) for i, p in enumerate(problems)]
    if workers <= 1:
        return [_run_indexed(job) for job in tqdm(jobs, disable=not progress, desc='instances')]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(_run_indexed, jobs), total=len(jobs), disable=not progress, desc='instances'))


### Helpers driven by the feedback loop
def _run_ground_energy(d, cfg):
    qc = QcObservable(d, 'penalty', d.n)
    energy = None
    for _, _, _, _, state in feedback_loop(d, qc, cfg):
        energy = expectation_diag(state, d)
    return energy


def estimate_energy_gap(problem, cfg):
    """
    Estimate of e_max - e_min from two feedback runs, one descending H_P and one
    descending -H_P. Both runs stop short of the extremes, so this is a lower estimate.
    """
    h = problem_hamiltonian(problem)
    d = diagonal_of(h)
    base = replace(cfg, algorithm='falqon', observable=ObservableSpec(variant='penalty'),
                   controller_mode='analytic', adaptive_dt=False, shots=0)
    low = _run_ground_energy(d, base)
    high = -_run_ground_energy(DiagonalObservable(d.n, -d.diag), base)
    logger.info(f'Estimated energy range [{low:.4g}, {high:.4g}]')
    return high - low


def make_ic_runner(problem, cfg, name='gamma'):
    """
    Runner for iterative_hyperparameter: runs the full feedback loop with the given gamma
    (or alpha) and reports whether the final state's most likely outcome is invalid.
    """
    if name not in ('gamma', 'alpha'):
        raise ConfigError(f'can only iterate gamma or alpha, got {name!r}')
    invalid = {index_of(z) for z in problem.invalid_configs}
    spectrum = brute_force(problem)

    def runner(value):
        spec = replace(cfg.observable, gammas=[value]) if name == 'gamma' else replace(cfg.observable, alpha=value)
        return run(problem, replace(cfg, observable=spec), spectrum=spectrum).argmax() in invalid
    return runner

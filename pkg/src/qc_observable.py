import logging
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from src.bits import index_of, check_qubits
from src.errors import (ConfigError, InputError, InvalidHyperparameterError, NonConvergenceError,
                        FsInapplicableError, FsInapplicableWarning)
from src.oracle_metrics import brute_force
from src.pauli import DiagonalObservable, qubo_to_hamiltonian, diagonal_of, pauli_of_diagonal
from src.problem import (QuboProblem, constraint_table, cost_table, inequality_to_equality, is_feasible,
                         evaluate_cost, per_constraint, to_qubo)

logger = logging.getLogger(__name__)

VARIANTS = ('penalty', 'penalty_ic', 'deflation', 'folded_spectrum')
GAMMA_STRATEGIES = ('bound', 'reference', 'iterative')
FS_ORACLE_QUBITS = 20


@dataclass
class ObservableSpec:
    variant: str = 'deflation'
    betas: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    alpha: float = None
    m: int = 1
    trust_fs: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f'unknown observable variant {self.variant!r}, expected one of {VARIANTS}')
        self.betas = [float(b) for b in np.atleast_1d(np.asarray(self.betas, dtype=float))]
        self.gammas = [float(g) for g in np.atleast_1d(np.asarray(self.gammas, dtype=float))]
        if any(b <= 0 for b in self.betas):
            raise InvalidHyperparameterError(f'betas must be positive, got {self.betas}')
        if any(g < 0 for g in self.gammas):
            raise InvalidHyperparameterError(f'gammas must be non-negative, got {self.gammas}')
        if self.variant == 'folded_spectrum' and self.alpha is None:
            raise ConfigError('folded_spectrum needs alpha')
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f'folded-spectrum exponent m must be a positive integer, got {self.m}')
        self.m = int(self.m)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        aliases = {'beta': 'betas', 'gamma': 'gammas'}
        for short, long in aliases.items():
            if short in d:
                d[long] = d.pop(short)
        unknown = set(d) - {'variant', 'betas', 'gammas', 'alpha', 'm', 'trust_fs'}
        if unknown:
            raise ConfigError(f'unknown observable keys {sorted(unknown)}')
        return cls(**d)

    def to_dict(self):
        return {'variant': self.variant, 'beta': self.betas, 'gamma': self.gammas,
                'alpha': self.alpha, 'm': self.m, 'trust_fs': self.trust_fs}


class QcObservable:
    """
    Diagonal Lyapunov observable. `base` is the diagonal without deflation shifts,
    `deflation_projectors` lists the (basis index, gamma) shifts on top of it.
    """

    def __init__(self, diag, variant, n_decision, base=None, projectors=(), pauli=None):
        self.diag = diag
        self.variant = variant
        self.n_decision = n_decision
        self.base = base if base is not None else diag
        self.deflation_projectors = list(projectors)
        self._pauli = pauli

    @property
    def n(self):
        return self.diag.n

    @cached_property
    def pauli(self):
        if self.variant == 'deflation':
            return None
        return self._pauli if self._pauli is not None else pauli_of_diagonal(self.diag)


def problem_hamiltonian(problem, n_qubits=None, keep_offset=True):
    """Objective of `problem` as a Z-type Pauli sum, padded with idle qubits up to n_qubits."""
    n_qubits = problem.n if n_qubits is None else n_qubits
    T = np.zeros((n_qubits, n_qubits))
    c = np.zeros(n_qubits)
    T[:problem.n, :problem.n] = problem.T
    c[:problem.n] = problem.c
    q = QuboProblem(T=T, c=c, a=problem.a, n_decision=problem.n_decision,
                    n_slack=n_qubits - problem.n_decision)
    return qubo_to_hamiltonian(q, keep_offset)


def constraint_hamiltonian(con):
    if con.kind != 'equality':
        raise InputError('inequality constraints must be converted with inequality_to_equality first')
    return DiagonalObservable(con.n, constraint_table(con) ** 2)


def _resolve(values, count, name):
    if count and not values:
        raise ConfigError(f'{count} {name} value(s) required, none given')
    return per_constraint(values, count, name)


def fs_applicable(problem):
    """Every invalid configuration must cost strictly less than the best feasible outcome."""
    spectrum = brute_force(problem)
    return spectrum.e_n1 is None or spectrum.e_n1 < spectrum.e_f_min


def build_qc(problem, spec):
    original = problem
    problem = inequality_to_equality(problem)
    check_qubits(problem.n, 'observable')
    betas = _resolve(spec.betas, len(problem.equalities), 'beta')

    if spec.variant in ('penalty', 'penalty_ic'):
        if spec.variant == 'penalty' and problem.invalid_configs:
            raise ConfigError('the penalty variant cannot encode invalid configurations; '
                              'use penalty_ic, deflation or folded_spectrum')
        gammas = _resolve(spec.gammas, problem.n_ic, 'gamma') if spec.variant == 'penalty_ic' else []
        if all(con.is_linear for con in problem.equalities):
            qubo = to_qubo(problem, gammas, betas)
            pauli = qubo_to_hamiltonian(qubo)
            return QcObservable(diagonal_of(pauli), spec.variant, problem.n_decision, pauli=pauli)
        if gammas:
            raise InputError('penalty_ic needs linear equality constraints')

    pre = cost_table(problem)
    for con, beta in zip(problem.equalities, betas):
        pre = pre + beta * constraint_hamiltonian(con).diag

    if spec.variant in ('penalty', 'penalty_ic'):
        return QcObservable(DiagonalObservable(problem.n, pre), spec.variant, problem.n_decision)

    if spec.variant == 'deflation':
        gammas = _resolve(spec.gammas, problem.n_ic, 'gamma')
        diag = pre.copy()
        projectors = []
        width = 1 << problem.n_slack
        for z, gamma in zip(problem.invalid_configs, gammas):
            for j in range(index_of(z) * width, (index_of(z) + 1) * width):
                diag[j] += gamma
                projectors.append((j, gamma))
        return QcObservable(DiagonalObservable(problem.n, diag), spec.variant, problem.n_decision,
                            base=DiagonalObservable(problem.n, pre), projectors=projectors)

    if not spec.trust_fs and original.n <= FS_ORACLE_QUBITS and not fs_applicable(original):
        warnings.warn('invalid configurations are not the lowest-cost outcomes; '
                      'the folded-spectrum ground state may not be the optimum', FsInapplicableWarning)
    folded = (pre - spec.alpha) ** (2 * spec.m)
    return QcObservable(DiagonalObservable(problem.n, folded), spec.variant, problem.n_decision)


### Hyperparameter selection
def beta_upper_bound(h):
    """2 * sum |c_r| over non-identity terms, an upper bound on e_max - e_min."""
    return 2.0 * sum(abs(c) for c in h.without_identity().terms.values())


def penalty_by_bound(problem):
    """beta_upper_bound of the objective plus a unit margin; usable for every beta and gamma."""
    return beta_upper_bound(problem_hamiltonian(problem, keep_offset=False)) + 1.0


def gamma_by_reference(problem, x_ref, z):
    if not is_feasible(problem, x_ref):
        raise InputError(f'reference outcome {list(x_ref)} is not feasible')
    gap = evaluate_cost(problem, x_ref) - evaluate_cost(problem, z)
    return 0.0 if gap <= 0 else gap + 1.0


def iterative_hyperparameter(runner, initial, max_doublings=10):
    """
    Doubles the value while `runner(value)` reports convergence to an invalid
    configuration and returns the first value it does not.
    """
    if initial <= 0:
        raise InvalidHyperparameterError(f'initial value must be positive, got {initial}')
    value = float(initial)
    trace = []
    for attempt in range(max_doublings + 1):
        rejected = bool(runner(value))
        trace.append((value, rejected))
        logger.info(f'Hyperparameter {value:g}: {"rejected" if rejected else "accepted"}')
        if not rejected:
            return value
        if attempt < max_doublings:
            value *= 2
    raise NonConvergenceError(f'still converging to an invalid configuration after {max_doublings} doublings',
                              trace)


def argmin_is_invalid(problem, spec, name='gamma'):
    """Oracle runner: does the ground state of Q_c decode to an invalid configuration?"""
    def runner(value):
        trial = replace(spec, gammas=[value]) if name == 'gamma' else replace(spec, alpha=value)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', FsInapplicableWarning)
            qc = build_qc(problem, trial)
        j = int(np.argmin(qc.diag.diag)) >> (qc.n - qc.n_decision)
        return j in {index_of(z) for z in problem.invalid_configs}
    return runner


def select_gammas(problem, strategy, x_ref=None, initial=1.0, runner=None):
    """
    One gamma per invalid configuration.

    bound       penalty_by_bound for every configuration
    reference   gamma_by_reference against the feasible outcome x_ref
    iterative   iterative_hyperparameter from `initial`, driven by `runner`
    """
    if strategy not in GAMMA_STRATEGIES:
        raise ConfigError(f'unknown gamma strategy {strategy!r}, expected one of {GAMMA_STRATEGIES}')
    if not problem.invalid_configs:
        return []
    if strategy == 'bound':
        return [penalty_by_bound(problem)] * problem.n_ic
    if strategy == 'reference':
        if x_ref is None:
            raise ConfigError('the reference strategy needs a feasible outcome x_ref')
        return [gamma_by_reference(problem, x_ref, z) for z in problem.invalid_configs]
    if runner is None:
        raise ConfigError('the iterative strategy needs a runner')
    return [iterative_hyperparameter(runner, initial)] * problem.n_ic


def alpha_interval(spectrum):
    if spectrum.e_n1 is not None and spectrum.e_n1 >= spectrum.e_f_min:
        raise FsInapplicableError(f'largest invalid-configuration cost {spectrum.e_n1} is not below '
                                  f'the best feasible cost {spectrum.e_f_min}')
    lower = -np.inf if spectrum.e_n1 is None else (spectrum.e_f_min + spectrum.e_n1) / 2
    if spectrum.e_bar is not None:
        upper = (spectrum.e_f_min + spectrum.e_bar) / 2
    elif np.isfinite(lower):
        upper = 2 * spectrum.e_f_min - lower
    else:
        upper = np.inf
    return float(lower), float(upper)

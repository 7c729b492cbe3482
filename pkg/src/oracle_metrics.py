import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from src.bits import bits_of, index_of, check_qubits
from src.errors import ConfigError, InfeasibleProblemError, UndefinedMetricError, UnsupportedSizeError
from src.pauli import qubo_to_hamiltonian
from src.problem import (cost_table, feasible_table, inequality_to_equality, to_qubo,
                         QuadraticForm, add_ic_penalty)
from src.simulator import marginal_probabilities

logger = logging.getLogger(__name__)

TIE_TOL = 1e-9
ALGORITHMS = ('falqon', 'falqon_c', 'falqon_ic')


@dataclass
class SpectrumSummary:
    n: int
    e_min: float
    e_max: float
    e_f_min: float
    e_f_max: float
    e_bar: float
    e_n1: float
    e_g: float
    optimal_set: list
    costs: np.ndarray = field(default=None, repr=False, compare=False)
    feasible: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def optimal_indices(self):
        return np.array([index_of(x) for x in self.optimal_set], dtype=np.int64)

    def to_dict(self):
        out = asdict(self)
        out.pop('costs')
        out.pop('feasible')
        out['optimal_set'] = [list(x) for x in self.optimal_set]
        return out


### Brute-force oracle
# Costs and feasibility are enumerated over every variable (slack included) and then
# projected onto the decision bits: a decision vector is feasible when some slack
# assignment is, and its cost is the best feasible completion.
def brute_force(problem):
    check_qubits(problem.n, 'brute-force enumeration')
    costs = cost_table(problem)
    feasible = feasible_table(problem)
    if not feasible.any():
        raise InfeasibleProblemError('no bit string satisfies every constraint')

    n_d = problem.n_decision
    C = costs.reshape(1 << n_d, -1)
    F = feasible.reshape(1 << n_d, -1)
    feasible_dec = F.any(axis=1)
    best_any = C.min(axis=1)
    cost_dec = np.where(feasible_dec, np.where(F, C, np.inf).min(axis=1), best_any)

    fc = cost_dec[feasible_dec]
    e_f_min, e_f_max = float(fc.min()), float(fc.max())
    above = fc[fc > e_f_min + TIE_TOL]
    optimal = np.flatnonzero(feasible_dec & (cost_dec <= e_f_min + TIE_TOL))
    ic_costs = [best_any[index_of(z)] for z in problem.invalid_configs]
    summary = SpectrumSummary(
        n=n_d,
        e_min=float(costs.min()),
        e_max=float(costs.max()),
        e_f_min=e_f_min,
        e_f_max=e_f_max,
        e_bar=float(above.min()) if above.size else None,
        e_n1=float(max(ic_costs)) if ic_costs else None,
        e_g=float(costs.max() - costs.min()),
        optimal_set=[tuple(int(b) for b in bits_of(int(j), n_d)) for j in optimal],
        costs=cost_dec,
        feasible=feasible_dec,
    )
    logger.debug(f'Spectrum: e_min={summary.e_min} e_f_min={e_f_min} |X*|={len(optimal)}')
    return summary


def approximation_ratio(s, problem, spectrum):
    if abs(spectrum.e_f_min - spectrum.e_f_max) <= TIE_TOL:
        raise UndefinedMetricError('approximation ratio is undefined when every feasible cost is equal')
    probs = marginal_probabilities(s, spectrum.n)
    weights = (spectrum.costs - spectrum.e_f_max) / (spectrum.e_f_min - spectrum.e_f_max)
    value = float(np.sum(probs[spectrum.feasible] * weights[spectrum.feasible]))
    return float(np.clip(value, 0.0, 1.0))


def success_probability(s, spectrum):
    probs = marginal_probabilities(s, spectrum.n)
    return float(np.clip(probs[spectrum.optimal_indices].sum(), 0.0, 1.0))


### Resource estimates for one layer
# l1, l2: Z and ZZ terms of H_P. For falqon the generator is the converted QUBO
# Hamiltonian, which adds l3 (s_q h_k products, the unmerged single-Z count on the
# invalid-configuration slack qubits), l4 (ZZ terms touching those slack qubits),
# and l5, l6 (any further Z / ZZ terms the penalties introduce on the other qubits).
@dataclass
class ResourceEstimate:
    algorithm: str
    qubits: int
    rx_gates: int
    rz_gates: int
    cnot_gates: int
    hadamard_gates: int
    l1: int
    l2: int
    l3: int = 0
    l4: int = 0
    l5: int = 0
    l6: int = 0
    l3_merged: int = 0
    n_s1: int = 0
    n_t: int = 0

    def to_dict(self):
        return asdict(self)


def _z_support(string):
    return {q for q, letter in enumerate(string) if letter == 'Z'}


def resource_estimate(problem, algorithm, gammas=None, betas=None):
    if algorithm not in ALGORITHMS:
        raise ConfigError(f'unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}')
    converted = inequality_to_equality(problem)
    n = problem.n_decision
    n_s1 = converted.n_slack - problem.n_slack
    n1 = problem.n_ic

    h_p = qubo_to_hamiltonian(problem.objective(), keep_offset=False)
    base_z = {frozenset(_z_support(s)) for s in h_p.terms}
    l1 = sum(len(k) == 1 for k in base_z)
    l2 = sum(len(k) == 2 for k in base_z)

    if algorithm == 'falqon_ic':
        qubits = n + n_s1
        return ResourceEstimate(algorithm=algorithm, qubits=qubits, rx_gates=qubits, rz_gates=l1 + l2,
                                cnot_gates=2 * l2, hadamard_gates=qubits, l1=l1, l2=l2, n_s1=n_s1, n_t=qubits)

    if n1 and n < 2:
        raise UnsupportedSizeError(f'invalid-configuration slack blocks need n >= 2, got {n}')
    if algorithm == 'falqon_c':
        qubits = n + n_s1 + n1 * (n - 2)
        return ResourceEstimate(algorithm=algorithm, qubits=qubits, rx_gates=qubits, rz_gates=l1 + l2,
                                cnot_gates=2 * l2, hadamard_gates=qubits, l1=l1, l2=l2, n_s1=n_s1, n_t=qubits)

    qubo = to_qubo(converted, 1.0 if gammas is None else gammas, 1.0 if betas is None else betas)
    qubits = qubo.n
    ic_slack = set(range(converted.n, qubo.n))
    l3 = 0
    for r, z in enumerate(converted.invalid_configs):
        start = converted.n + r * (n - 2)
        l3 += add_ic_penalty(QuadraticForm(qubo.n), z, list(range(start, start + n - 2)))
    l4 = l5 = l6 = l3_merged = 0
    for string in qubo_to_hamiltonian(qubo, keep_offset=False).terms:
        support = _z_support(string)
        on_slack = bool(support & ic_slack)
        if len(support) == 1 and on_slack:
            l3_merged += 1
        elif len(support) == 2 and on_slack:
            l4 += 1
        elif frozenset(support) not in base_z:
            l5 += len(support) == 1
            l6 += len(support) == 2
    logger.debug(f'falqon resources n={n} n1={n1}: l3={l3} l4={l4} l5={l5} l6={l6}')
    return ResourceEstimate(algorithm=algorithm, qubits=qubits, rx_gates=qubits,
                            rz_gates=l1 + l2 + l3 + l4 + l5 + l6, cnot_gates=2 * (l2 + l4 + l6),
                            hadamard_gates=qubits, l1=l1, l2=l2, l3=l3, l4=l4, l5=l5, l6=l6,
                            l3_merged=l3_merged, n_s1=n_s1, n_t=qubits)

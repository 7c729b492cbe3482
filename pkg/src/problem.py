import json
import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import numpy as np

from src.bits import as_bits, index_of, bits_of, qubit_axis
from src.errors import (InputError, InfeasibleProblemError, UnsupportedSizeError,
                        InvalidHyperparameterError, DuplicateInvalidConfigWarning)

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
FEASIBILITY_TOL = 1e-9
MAX_DENOMINATOR = 10 ** 6


def _vector(c, name):
    c = np.asarray(c, dtype=float).reshape(-1)
    if not np.all(np.isfinite(c)):
        raise InputError(f'{name} has non-finite entries')
    return c


def _matrix(T, n, name):
    if T is None:
        return np.zeros((n, n))
    T = np.asarray(T, dtype=float)
    if T.shape != (n, n):
        raise InputError(f'{name} must be {n}x{n}, got shape {T.shape}')
    if not np.all(np.isfinite(T)):
        raise InputError(f'{name} has non-finite entries')
    if np.max(np.abs(T - T.T), initial=0.0) > SYMMETRY_TOL:
        raise InputError(f'{name} is not symmetric')
    return T


def _pad(T, c, n_total):
    n = c.size
    T_out = np.zeros((n_total, n_total))
    T_out[:n, :n] = T
    c_out = np.zeros(n_total)
    c_out[:n] = c
    return T_out, c_out


@dataclass
class QuadraticConstraint:
    """G(x) = x^T T x + c^T x + a, satisfied by G(x)=0 (equality) or G(x)<=0 (inequality)."""
    c: np.ndarray
    T: np.ndarray = None
    a: float = 0.0
    kind: str = 'equality'

    def __post_init__(self):
        if self.kind not in ('equality', 'inequality'):
            raise InputError(f'unknown constraint kind {self.kind!r}')
        self.c = _vector(self.c, 'constraint c')
        self.T = _matrix(self.T, self.c.size, 'constraint T')
        self.a = float(self.a)

    @property
    def n(self):
        return self.c.size

    @property
    def is_linear(self):
        return not np.any(self.T - np.diag(np.diag(self.T)))

    def affine(self):
        """(constant, {index: coefficient}) form, valid only when is_linear."""
        lin = self.c + np.diag(self.T)
        return self.a, {q: float(v) for q, v in enumerate(lin) if v != 0.0}

    def padded(self, n_total):
        T, c = _pad(self.T, self.c, n_total)
        return QuadraticConstraint(c=c, T=T, a=self.a, kind=self.kind)

    def to_dict(self):
        out = {'c': self.c.tolist(), 'a': self.a}
        if np.any(self.T):
            out['T'] = self.T.tolist()
        return out


@dataclass
class QcboProblem:
    """
    min x^T T x + c^T x + a subject to equality, inequality and invalid-configuration
    constraints. The last n_slack variables are slack variables; invalid configurations
    are bit vectors over the first n - n_slack (decision) variables.
    """
    c: np.ndarray
    T: np.ndarray = None
    a: float = 0.0
    equalities: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)
    invalid_configs: list = field(default_factory=list)
    n_slack: int = 0

    def __post_init__(self):
        self.c = _vector(self.c, 'cost c')
        if self.c.size < 1:
            raise InputError('a problem needs at least one variable')
        self.T = _matrix(self.T, self.c.size, 'cost T')
        self.a = float(self.a)
        self.n_slack = int(self.n_slack)
        if not 0 <= self.n_slack < self.n:
            raise InputError(f'n_slack={self.n_slack} leaves no decision variables')
        self.equalities = [self._check_constraint(con, 'equality') for con in self.equalities]
        self.inequalities = [self._check_constraint(con, 'inequality') for con in self.inequalities]
        configs = []
        for z in self.invalid_configs:
            z = tuple(int(b) for b in as_bits(z, self.n_decision))
            if z in configs:
                warnings.warn(f'duplicate invalid configuration {list(z)} dropped',
                              DuplicateInvalidConfigWarning)
                continue
            configs.append(z)
        self.invalid_configs = configs

    def _check_constraint(self, con, kind):
        if isinstance(con, dict):
            con = QuadraticConstraint(c=con['c'], T=con.get('T'), a=con.get('a', 0.0), kind=kind)
        if con.kind != kind:
            raise InputError(f'{con.kind} constraint listed among {kind} constraints')
        if con.n != self.n:
            raise InputError(f'constraint over {con.n} variables in a problem with {self.n}')
        return con

    @property
    def n(self):
        return self.c.size

    @property
    def n_decision(self):
        return self.n - self.n_slack

    @property
    def n_ic(self):
        return len(self.invalid_configs)

    @property
    def has_constraints(self):
        return bool(self.equalities or self.inequalities or self.invalid_configs)

    def objective(self):
        """The same problem with every constraint dropped."""
        return QuboProblem(T=self.T.copy(), c=self.c.copy(), a=self.a,
                           n_decision=self.n_decision, n_slack=self.n_slack)


@dataclass
class QuboProblem:
    T: np.ndarray
    c: np.ndarray
    a: float
    n_decision: int
    n_slack: int = 0
    penalties: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = _vector(self.c, 'cost c')
        self.T = _matrix(self.T, self.c.size, 'cost T')
        self.a = float(self.a)
        if self.n_decision + self.n_slack != self.c.size:
            raise InputError(f'{self.n_decision} decision + {self.n_slack} slack variables '
                             f'do not add up to {self.c.size}')

    @property
    def n(self):
        return self.c.size

    @property
    def slack_indices(self):
        return range(self.n_decision, self.n)

    def to_qcbo(self):
        return QcboProblem(c=self.c.copy(), T=self.T.copy(), a=self.a, n_slack=self.n_slack)


def evaluate_cost(p, x):
    x = as_bits(x, p.n).astype(float)
    return float(x @ p.T @ x + p.c @ x + p.a)


def constraint_residual(con, x):
    x = as_bits(x, con.n).astype(float)
    return float(x @ con.T @ x + con.c @ x + con.a)


def is_feasible(p, x):
    x = as_bits(x, p.n)
    for con in p.equalities:
        if abs(constraint_residual(con, x)) > FEASIBILITY_TOL:
            return False
    for con in p.inequalities:
        if constraint_residual(con, x) > FEASIBILITY_TOL:
            return False
    return tuple(int(b) for b in x[:p.n_decision]) not in p.invalid_configs


def quadratic_table(T, c, a, n):
    """x^T T x + c^T x + a for every x, indexed by basis index."""
    table = np.full((2,) * n, float(a))
    x = [np.array([0.0, 1.0]).reshape(qubit_axis(q, n)) for q in range(n)]
    for q in range(n):
        lin = c[q] + T[q, q]
        if lin != 0.0:
            table += lin * x[q]
        for j in range(q + 1, n):
            if T[q, j] != 0.0:
                table += 2.0 * T[q, j] * (x[q] * x[j])
    return table.reshape(-1)


def cost_table(p):
    return quadratic_table(p.T, p.c, p.a, p.n)


def constraint_table(con):
    return quadratic_table(con.T, con.c, con.a, con.n)


def feasible_table(p):
    mask = np.ones(1 << p.n, dtype=bool)
    for con in p.equalities:
        mask &= np.abs(constraint_table(con)) <= FEASIBILITY_TOL
    for con in p.inequalities:
        mask &= constraint_table(con) <= FEASIBILITY_TOL
    blocks = mask.reshape(1 << p.n_decision, 1 << p.n_slack)
    for z in p.invalid_configs:
        blocks[index_of(z), :] = False
    return mask


### Inequality -> equality conversion with binary slack variables
# An inequality G(x) <= 0 is scaled to integer coefficients and rewritten as
#   -scale*G(x) - sum_j 2^j s_j = 0
# with enough slack bits to represent max_x(-scale*G(x)).
def _integer_scale(values):
    scale = 1
    for v in values:
        scale = lcm(scale, Fraction(float(v)).limit_denominator(MAX_DENOMINATOR).denominator)
    scaled = np.asarray(values, dtype=float) * scale
    if np.max(np.abs(scaled - np.round(scaled)), initial=0.0) > 1e-6:
        raise InputError('inequality coefficients are not rational with small denominators')
    return scale


def _slack_count(con):
    n = con.n
    iu = np.triu_indices(n, 1)
    lin = con.c + np.diag(con.T)
    quad = 2.0 * con.T[iu]
    scale = _integer_scale([con.a, *lin, *quad])
    # term-wise upper bound of max_x(-scale*G(x)), exact when G is linear
    upper = -scale * con.a + np.sum(np.maximum(0.0, -scale * lin)) + np.sum(np.maximum(0.0, -scale * quad))
    upper = int(round(upper))
    if upper < 0:
        raise InfeasibleProblemError(f'inequality with residual bound {upper} < 0 admits no solution')
    return scale, upper.bit_length()


def inequality_to_equality(p):
    if not p.inequalities:
        return p
    plans = [_slack_count(con) for con in p.inequalities]
    n_new = sum(k for _, k in plans)
    n_total = p.n + n_new
    T, c = _pad(p.T, p.c, n_total)
    equalities = [con.padded(n_total) for con in p.equalities]
    offset = p.n
    for con, (scale, k) in zip(p.inequalities, plans):
        T_eq, c_eq = _pad(-scale * con.T, -scale * con.c, n_total)
        c_eq[offset:offset + k] = -(2.0 ** np.arange(k))
        equalities.append(QuadraticConstraint(c=c_eq, T=T_eq, a=-scale * con.a))
        offset += k
    logger.info(f'Converted {len(p.inequalities)} inequalities with {n_new} slack variables')
    return QcboProblem(c=c, T=T, a=p.a, equalities=equalities,
                       invalid_configs=list(p.invalid_configs), n_slack=p.n_slack + n_new)


### Invalid-configuration penalty
# h = x XOR z, v = [s_1..s_{n-2}, 1-h_n, 1], A upper-triangular with -1 on the
# diagonal and +1 above it. g = 1 + v^T A h is a non-negative integer, equal to 1
# at x=z for every s, and some s drives it to 0 for any x != z.
def _penalty_matrix(n):
    return np.triu(np.ones((n, n), dtype=np.int64), 1) - np.eye(n, dtype=np.int64)


def ic_penalty_g(z, x, s):
    z = as_bits(z)
    n = z.size
    if n < 2:
        raise UnsupportedSizeError(f'invalid-configuration penalty needs n >= 2, got {n}')
    x = as_bits(x, n)
    s = as_bits(s, n - 2)
    h = x ^ z
    v = np.concatenate([s, [1 - h[-1], 1]])
    return int(1 + v @ _penalty_matrix(n) @ h)


def ic_indicator(z, x):
    z = as_bits(z)
    x = as_bits(x, z.size)
    return int(np.prod(1 - (z * (1 - x) + (1 - z) * x)))


class QuadraticForm:
    """Accumulates const + lin^T y + y^T quad y over binary y from products of affine terms."""

    def __init__(self, n):
        self.const = 0.0
        self.lin = np.zeros(n)
        self.quad = np.zeros((n, n))
        self.products = 0

    def add_affine(self, f, weight=1.0):
        f0, fl = f
        self.const += weight * f0
        for i, ci in fl.items():
            self.lin[i] += weight * ci

    def add_product(self, f, g, weight=1.0):
        (f0, fl), (g0, gl) = f, g
        self.const += weight * f0 * g0
        for i, ci in fl.items():
            self.lin[i] += weight * ci * g0
        for j, cj in gl.items():
            self.lin[j] += weight * cj * f0
        for i, ci in fl.items():
            for j, cj in gl.items():
                w = weight * ci * cj
                if i == j:
                    self.lin[i] += w  # y_i^2 = y_i
                else:
                    self.quad[i, j] += w / 2
                    self.quad[j, i] += w / 2
                self.products += 1


def _affine_sum(terms):
    const, coeffs = 0.0, {}
    for sign, (f0, fl) in terms:
        const += sign * f0
        for i, ci in fl.items():
            coeffs[i] = coeffs.get(i, 0.0) + sign * ci
    return const, {i: ci for i, ci in coeffs.items() if ci != 0.0}


def add_ic_penalty(form, z, slack_indices, weight=1.0):
    """
    Adds weight * g(x, s) for the configuration z, expanded as
    1 + sum_q s_q (-h_q + sum_{k>q} h_k) - h_{n-1} - h_n + h_n h_{n-1}.
    Returns the number of s_q*h_k products added.
    """
    n = len(z)
    if n < 2:
        raise UnsupportedSizeError(f'invalid-configuration penalty needs n >= 2, got {n}')
    if len(slack_indices) != n - 2:
        raise InputError(f'{len(slack_indices)} slack variables given, {n - 2} needed')
    h = [(float(z[q]), {q: 1.0 - 2.0 * z[q]}) for q in range(n)]
    before = form.products
    form.add_affine((1.0, {}), weight)
    for q, s_index in enumerate(slack_indices):
        inner = _affine_sum([(-1.0, h[q])] + [(1.0, h[k]) for k in range(q + 1, n)])
        form.add_product((0.0, {s_index: 1.0}), inner, weight)
    added = form.products - before
    form.add_affine(h[n - 2], -weight)
    form.add_affine(h[n - 1], -weight)
    form.add_product(h[n - 1], h[n - 2], weight)
    return added


def per_constraint(values, count, name):
    if values is None:
        values = []
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.size == 1:
        values = np.repeat(values, count)
    if values.size != count:
        raise InvalidHyperparameterError(f'expected {count} {name} values, got {values.size}')
    return [float(v) for v in values]


def to_qubo(p, gammas=None, betas=None):
    """Unconstrained equivalent: F(x) + sum_r gamma_r g_r(x, s_r) + sum_q beta_q G_q(x)^2."""
    if p.inequalities:
        raise InputError('convert inequalities with inequality_to_equality before to_qubo')
    gammas = per_constraint(gammas, p.n_ic, 'gamma')
    betas = per_constraint(betas, len(p.equalities), 'beta')
    if any(g <= 0 for g in gammas) or any(b <= 0 for b in betas):
        raise InvalidHyperparameterError(f'gammas {gammas} and betas {betas} must be positive')
    n_d = p.n_decision
    if p.invalid_configs and n_d < 2:
        raise UnsupportedSizeError(f'invalid-configuration constraints need n >= 2, got {n_d}')

    n_ic_slack = p.n_ic * (n_d - 2) if p.invalid_configs else 0
    n_total = p.n + n_ic_slack
    form = QuadraticForm(n_total)
    for con, beta in zip(p.equalities, betas):
        if not con.is_linear:
            raise InputError('squared quadratic equality constraints are quartic, not a QUBO')
        G = con.affine()
        form.add_product(G, G, beta)
    for r, (z, gamma) in enumerate(zip(p.invalid_configs, gammas)):
        start = p.n + r * (n_d - 2)
        add_ic_penalty(form, z, list(range(start, start + n_d - 2)), gamma)

    T, c = _pad(p.T, p.c, n_total)
    T = T + form.quad
    return QuboProblem(T=(T + T.T) / 2, c=c + form.lin, a=p.a + form.const,
                       n_decision=n_d, n_slack=p.n_slack + n_ic_slack,
                       penalties={'gammas': gammas, 'betas': betas})


def random_instance(n, n_ic=1, seed=0, low=-5.0, high=5.0):
    if n < 2:
        raise InputError(f'random instances need n >= 2, got {n}')
    if n_ic > 1 << n:
        raise InputError(f'cannot draw {n_ic} distinct configurations of {n} bits')
    rng = np.random.default_rng(seed)
    T = rng.uniform(low, high, size=(n, n))
    T = (T + T.T) / 2
    c = rng.uniform(low, high, size=n)
    a = rng.uniform(low, high)
    picks = rng.choice(1 << n, size=n_ic, replace=False)
    return QcboProblem(c=c, T=T, a=a, invalid_configs=[bits_of(int(j), n) for j in picks])


def svp_problem():
    """min x1 + 2x2 + 5x3 + 2x2x3 subject to x != [0,0,0]."""
    T = np.zeros((3, 3))
    T[1, 2] = T[2, 1] = 1.0
    return QcboProblem(c=[1.0, 2.0, 5.0], T=T, invalid_configs=[[0, 0, 0]])


### JSON file format
PROBLEM_KEYS = {'n', 'T', 'c', 'a', 'equalities', 'inequalities', 'invalid_configs', 'n_slack', 'penalties'}


def problem_from_dict(d):
    unknown = set(d) - PROBLEM_KEYS
    if unknown:
        raise InputError(f'unknown problem keys {sorted(unknown)}')
    if 'c' not in d:
        raise InputError('problem needs a cost vector "c"')
    p = QcboProblem(c=d['c'], T=d.get('T'), a=d.get('a', 0.0),
                    equalities=list(d.get('equalities', [])),
                    inequalities=list(d.get('inequalities', [])),
                    invalid_configs=list(d.get('invalid_configs', [])),
                    n_slack=d.get('n_slack', 0))
    if 'n' in d and int(d['n']) != p.n:
        raise InputError(f'"n"={d["n"]} does not match a cost vector of length {p.n}')
    return p


def problem_to_dict(p):
    out = {'n': p.n, 'T': p.T.tolist(), 'c': p.c.tolist(), 'a': p.a,
           'equalities': [con.to_dict() for con in getattr(p, 'equalities', [])],
           'inequalities': [con.to_dict() for con in getattr(p, 'inequalities', [])],
           'invalid_configs': [list(z) for z in getattr(p, 'invalid_configs', [])]}
    if p.n_slack:
        out['n_slack'] = p.n_slack
    if getattr(p, 'penalties', None):
        out['penalties'] = p.penalties
    return out


def load_problem(path):
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise InputError(f'{path}: {e}') from e
    return problem_from_dict(d)

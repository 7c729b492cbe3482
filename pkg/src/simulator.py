"""
Dense statevector engine for the layered evolution V_M(theta) V_P.

States are owned by the caller and layers update them in place; copy() before
probing. Qubit q is bit n-1-q of the basis index.
"""

from dataclasses import dataclass

import numpy as np

from src.bits import bitstring, check_qubits, qubit_mask
from src.errors import ConfigError, InputError
from src.pauli import DiagonalObservable, PauliSum, apply_pauli_string

NORM_TOL = 1e-10
MIXER_KINDS = ('transverse_x', 'pauli_sum')
INITIAL_STATES = ('plus_superposition', 'basis')
LAYER_ORDERS = ('mixer_first', 'problem_first')


@dataclass
class StateVector:
    n: int
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.ascontiguousarray(self.amps, dtype=complex).reshape(-1)
        if self.amps.size != 1 << self.n:
            raise InputError(f'{self.amps.size} amplitudes do not match {self.n} qubits')
        if abs(self.norm() - 1.0) > NORM_TOL:
            raise InputError(f'state is not normalized (norm {self.norm()})')

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def probabilities(self):
        return np.abs(self.amps) ** 2

    def copy(self):
        return StateVector(self.n, self.amps.copy())


@dataclass
class MixerSpec:
    kind: str = 'transverse_x'
    terms: PauliSum = None

    def __post_init__(self):
        if self.kind not in MIXER_KINDS:
            raise ConfigError(f'unknown mixer kind {self.kind!r}, expected one of {MIXER_KINDS}')
        if self.kind == 'pauli_sum' and not self.terms:
            raise ConfigError('a pauli_sum mixer needs at least one term')

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {'kind', 'terms'}
        if unknown:
            raise ConfigError(f'unknown mixer keys {sorted(unknown)}')
        terms = d.get('terms')
        if terms:
            terms = PauliSum.from_list(len(terms[0]['string']), terms)
        return cls(kind=d.get('kind', 'transverse_x'), terms=terms)

    def to_dict(self):
        out = {'kind': self.kind}
        if self.terms is not None:
            out['terms'] = self.terms.to_list()
        return out

    def check(self, n):
        if self.kind == 'pauli_sum' and self.terms.n != n:
            raise InputError(f'mixer acts on {self.terms.n} qubits, state has {n}')

    def norm(self, n):
        """||H_M||: exactly n for the transverse field, the triangle bound otherwise."""
        if self.kind == 'transverse_x':
            return float(n)
        return float(sum(abs(c) for c in self.terms.terms.values()))


def init_state(n, kind='plus_superposition', index=None):
    if n < 1:
        raise InputError(f'a state needs at least one qubit, got {n}')
    check_qubits(n, 'state')
    if kind == 'plus_superposition':
        return StateVector(n, np.full(1 << n, 2.0 ** (-n / 2), dtype=complex))
    if kind == 'basis':
        if index is None or not 0 <= index < 1 << n:
            raise InputError(f'basis index {index} out of range for {n} qubits')
        amps = np.zeros(1 << n, dtype=complex)
        amps[index] = 1.0
        return StateVector(n, amps)
    raise ConfigError(f'unknown initial state {kind!r}, expected one of {INITIAL_STATES}')


def _check_diag(s, d):
    if d.n != s.n:
        raise InputError(f'observable on {d.n} qubits applied to a {s.n}-qubit state')


def apply_problem_layer(s, d, dt):
    _check_diag(s, d)
    s.amps *= np.exp(-1j * dt * d.diag)
    return s


def apply_mixer_layer(s, m, theta, dt):
    m.check(s.n)
    phi = theta * dt
    if phi == 0.0:
        return s
    if m.kind == 'transverse_x':
        # e^{-i phi X} on each qubit in turn; the X_q commute so this is exact
        c, sn = np.cos(phi), np.sin(phi)
        for q in range(s.n):
            v = s.amps.reshape(1 << q, 2, -1)
            a0 = v[:, 0].copy()
            a1 = v[:, 1]
            v[:, 0] = c * a0 - 1j * sn * a1
            v[:, 1] = c * a1 - 1j * sn * a0
        return s
    for string, coeff in m.terms:
        angle = phi * coeff
        s.amps = np.cos(angle) * s.amps - 1j * np.sin(angle) * apply_pauli_string(s.amps, string)
    return s


def apply_layer(s, hp, m, theta, dt, order='mixer_first'):
    if order == 'mixer_first':
        apply_mixer_layer(s, m, theta, dt)
        return apply_problem_layer(s, hp, dt)
    if order == 'problem_first':
        apply_problem_layer(s, hp, dt)
        return apply_mixer_layer(s, m, theta, dt)
    raise ConfigError(f'unknown layer order {order!r}, expected one of {LAYER_ORDERS}')


def apply_hamiltonian(s, m):
    """H_M |psi> as a new vector."""
    m.check(s.n)
    if m.kind == 'transverse_x':
        idx = np.arange(s.amps.size)
        out = np.zeros_like(s.amps)
        for q in range(s.n):
            out += s.amps[idx ^ qubit_mask(q, s.n)]
        return out
    out = np.zeros_like(s.amps)
    for string, coeff in m.terms:
        out += coeff * apply_pauli_string(s.amps, string)
    return out


def expectation_diag(s, d):
    _check_diag(s, d)
    return float(np.dot(d.diag, s.probabilities()))


def controller_expectation(s, Q, m, split=True):
    """
    <psi| i[H_M, Q] |psi> = -2 Im <H_M psi | Q psi>.

    With split=True a deflated Q is applied as its base diagonal plus one
    projector term per shifted index; otherwise the shifted diagonal is used.
    """
    if isinstance(Q, DiagonalObservable):
        base, projectors = Q, []
    elif split:
        base, projectors = Q.base, Q.deflation_projectors
    else:
        base, projectors = Q.diag, []
    _check_diag(s, base)
    h_psi = apply_hamiltonian(s, m)
    w = -2.0 * np.vdot(h_psi, base.diag * s.amps).imag
    for j, gamma in projectors:
        w += -2.0 * gamma * (np.conj(h_psi[j]) * s.amps[j]).imag
    return float(w)


def sample(s, shots, seed):
    if shots < 1:
        raise InputError(f'shots must be positive, got {shots}')
    probs = s.probabilities()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs / probs.sum())
    return {bitstring(int(j), s.n): int(counts[j]) for j in np.flatnonzero(counts)}


def marginal_probabilities(s, n_keep):
    return s.probabilities().reshape(1 << n_keep, -1).sum(axis=1)

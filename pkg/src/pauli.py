"""
Pauli sums with real coefficients, the binary -> spin mapping x_q -> (I - Z_q)/2,
dense diagonals of Z-type sums and their Walsh expansion, and commutators
against X mixers.

Letter q of a Pauli string acts on qubit q, i.e. on variable x_{q+1}, which is
the most significant bit of the basis index.
"""

from dataclasses import dataclass

import numpy as np

from src.bits import qubit_axis, qubit_mask
from src.errors import InputError, NotDiagonalError

PRUNE_TOL = 1e-14
LETTERS = frozenset('IXYZ')

_PAULI_MATRICES = {
    'I': np.eye(2, dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}
_Z_SIGNS = np.array([1.0, -1.0])


class PauliSum:
    def __init__(self, n, terms=None):
        self.n = int(n)
        self.terms = {}
        for string, coeff in (terms or {}).items():
            self._check_string(string)
            coeff = complex(coeff)
            if abs(coeff.imag) > PRUNE_TOL:
                raise InputError(f'coefficient of {string} must be real, got {coeff}')
            self.terms[string] = self.terms.get(string, 0.0) + coeff.real
        self.terms = {s: c for s, c in self.terms.items() if abs(c) > PRUNE_TOL}

    def _check_string(self, string):
        if len(string) != self.n or not set(string) <= LETTERS:
            raise InputError(f'{string!r} is not a Pauli string on {self.n} qubits')

    @classmethod
    def identity(cls, n, coeff=1.0):
        return cls(n, {'I' * n: coeff})

    def __add__(self, other):
        if other.n != self.n:
            raise InputError(f'cannot add Pauli sums on {self.n} and {other.n} qubits')
        terms = dict(self.terms)
        for s, c in other.terms.items():
            terms[s] = terms.get(s, 0.0) + c
        return PauliSum(self.n, terms)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return PauliSum(self.n, {s: scalar * c for s, c in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    def __eq__(self, other):
        return isinstance(other, PauliSum) and self.n == other.n and self.terms == other.terms

    def __repr__(self):
        body = ' + '.join(f'{c:g}*{s}' for s, c in self) or '0'
        return f'PauliSum({self.n}: {body})'

    def coeff(self, string):
        return self.terms.get(string, 0.0)

    @property
    def is_diagonal(self):
        return all(set(s) <= {'I', 'Z'} for s in self.terms)

    def identity_coeff(self):
        return self.coeff('I' * self.n)

    def without_identity(self):
        return PauliSum(self.n, {s: c for s, c in self.terms.items() if set(s) != {'I'}})

    def weight_counts(self):
        """{number of non-identity letters: term count}."""
        counts = {}
        for s in self.terms:
            w = sum(letter != 'I' for letter in s)
            counts[w] = counts.get(w, 0) + 1
        return counts

    def to_list(self):
        return [{'string': s, 'coeff': c} for s, c in self]

    @classmethod
    def from_list(cls, n, items):
        terms = {}
        for item in items:
            terms[item['string']] = terms.get(item['string'], 0.0) + float(item['coeff'])
        return cls(n, terms)


@dataclass
class DiagonalObservable:
    n: int
    diag: np.ndarray

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float).reshape(-1)
        if self.diag.size != 1 << self.n:
            raise InputError(f'diagonal of length {self.diag.size} does not match {self.n} qubits')
        if not np.all(np.isfinite(self.diag)):
            raise InputError('diagonal has non-finite entries')

    def norm(self):
        return float(np.max(np.abs(self.diag)))


def _z_string(n, *qubits):
    letters = ['I'] * n
    for q in qubits:
        letters[q] = 'Z'
    return ''.join(letters)


def qubo_to_hamiltonian(q, keep_offset=True):
    """Ising form of x^T T x + c^T x + a with x_q -> (I - Z_q)/2 and symmetric T."""
    n, T, c = q.n, q.T, q.c
    terms = {}
    for i in range(n):
        terms[_z_string(n, i)] = -0.5 * (c[i] + T[i].sum())
        for j in range(i + 1, n):
            terms[_z_string(n, i, j)] = 0.5 * T[i, j]
    if keep_offset:
        terms['I' * n] = 0.25 * T.sum() + 0.25 * np.trace(T) + 0.5 * c.sum() + q.a
    return PauliSum(n, terms)


def diagonal_of(h):
    if not h.is_diagonal:
        raise NotDiagonalError('only I/Z Pauli sums have a diagonal realization')
    n = h.n
    out = np.zeros((2,) * n)
    for string, coeff in h.terms.items():
        term = np.asarray(coeff)
        for q, letter in enumerate(string):
            if letter == 'Z':
                term = term * _Z_SIGNS.reshape(qubit_axis(q, n))
        out += term
    return DiagonalObservable(n, out.reshape(-1))


def walsh_hadamard(values):
    a = np.array(values, dtype=float)
    h = 1
    while h < a.size:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1).reshape(-1)
        h *= 2
    return a


def pauli_of_diagonal(d):
    diag = d.diag if isinstance(d, DiagonalObservable) else np.asarray(d, dtype=float).reshape(-1)
    size = diag.size
    if size < 1 or size & (size - 1):
        raise InputError(f'diagonal length {size} is not a power of two')
    n = size.bit_length() - 1
    coeffs = walsh_hadamard(diag) / size
    terms = {}
    for mask in np.flatnonzero(np.abs(coeffs) > PRUNE_TOL):
        terms[_z_string(n, *[q for q in range(n) if mask & qubit_mask(q, n)])] = coeffs[mask]
    return PauliSum(n, terms)


def commutator_with_x_mixer(Q, mixer_qubit):
    """i[X_q, Q] for a Z-type Q: every term with Z at q becomes 2c times the string with Y at q."""
    if not Q.is_diagonal:
        raise NotDiagonalError('commutator expansion supports Z-type observables only')
    if not 0 <= mixer_qubit < Q.n:
        raise InputError(f'mixer qubit {mixer_qubit} out of range for {Q.n} qubits')
    terms = {}
    for string, coeff in Q.terms.items():
        if string[mixer_qubit] == 'Z':
            terms[string[:mixer_qubit] + 'Y' + string[mixer_qubit + 1:]] = 2.0 * coeff
    return PauliSum(Q.n, terms)


def transverse_commutator(Q, weights=None):
    """i[sum_q w_q X_q, Q]."""
    out = PauliSum(Q.n)
    for q in range(Q.n):
        w = 1.0 if weights is None else weights[q]
        out = out + w * commutator_with_x_mixer(Q, q)
    return out


def apply_pauli_string(amps, string):
    """P|psi> for one Pauli string; Y = iXZ acts as i(-1)^b |b xor 1>."""
    n = len(string)
    idx = np.arange(amps.size)
    x_mask = 0
    parity = np.zeros(amps.size, dtype=np.int64)
    n_y = 0
    for q, letter in enumerate(string):
        if letter in 'XY':
            x_mask |= qubit_mask(q, n)
        if letter in 'YZ':
            parity ^= (idx >> (n - 1 - q)) & 1
        n_y += letter == 'Y'
    out = np.empty(amps.size, dtype=complex)
    out[idx ^ x_mask] = (1j ** n_y) * (1 - 2 * parity) * amps
    return out


def pauli_expectation(h, amps):
    return float(sum(c * np.vdot(amps, apply_pauli_string(amps, s)).real for s, c in h.terms.items()))


def to_matrix(h):
    dim = 1 << h.n
    out = np.zeros((dim, dim), dtype=complex)
    for string, coeff in h.terms.items():
        term = np.ones((1, 1), dtype=complex)
        for letter in string:
            term = np.kron(term, _PAULI_MATRICES[letter])
        out += coeff * term
    return out

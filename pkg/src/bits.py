"""
Bit-vector <-> basis-index convention.

Variable x_1 is the most significant bit of the basis index, so for n=3 the
index of [1,0,0] is 4. Every module goes through these helpers.
"""

import numpy as np

from src.errors import InputError, QubitCapError


def as_bits(x, n=None):
    bits = np.asarray(x, dtype=np.int64).reshape(-1)
    if n is not None and bits.size != n:
        raise InputError(f'expected a bit vector of length {n}, got {bits.size}')
    if np.any((bits != 0) & (bits != 1)):
        raise InputError(f'bit vector must contain only 0/1, got {bits.tolist()}')
    return bits


def index_of(x):
    index = 0
    for b in as_bits(x):
        index = (index << 1) | int(b)
    return index


def bits_of(index, n):
    if index < 0 or index >= 1 << n:
        raise InputError(f'basis index {index} out of range for {n} qubits')
    return np.array([(index >> (n - 1 - q)) & 1 for q in range(n)], dtype=np.int64)


def bitstring(index, n):
    return format(index, f'0{n}b') if n > 0 else ''


def bit_table(n):
    """All 2^n bit vectors as rows, row j = bits_of(j, n)."""
    idx = np.arange(1 << n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] >> shifts[None, :]) & 1


def qubit_axis(q, n):
    """Broadcast shape selecting qubit q in an (2,)*n view of a 2^n vector."""
    shape = [1] * n
    shape[q] = 2
    return tuple(shape)


def qubit_mask(q, n):
    return 1 << (n - 1 - q)


QUBIT_CAP = 24


def check_qubits(n, what='register'):
    if n > QUBIT_CAP:
        raise QubitCapError(f'{what} needs {n} qubits, the dense simulator is capped at {QUBIT_CAP}')

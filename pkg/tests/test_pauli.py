import numpy as np
import pytest

from src.errors import NotDiagonalError
from src.pauli import (DiagonalObservable, PauliSum, apply_pauli_string, commutator_with_x_mixer, diagonal_of,
                       pauli_expectation, pauli_of_diagonal, qubo_to_hamiltonian, to_matrix, transverse_commutator)
from src.problem import QcboProblem, QuboProblem, cost_table, random_instance

from conftest import random_state


def test_svp_hamiltonian_terms(svp):
    h = qubo_to_hamiltonian(svp.objective())
    expected = PauliSum(3, {'III': 4.5, 'ZII': -0.5, 'IZI': -1.5, 'IIZ': -3.0, 'IZZ': 0.5})
    assert h == expected
    assert np.array_equal(diagonal_of(h).diag, [0, 5, 2, 9, 1, 6, 3, 10])


def test_hamiltonian_diagonal_matches_costs():
    for seed in range(10):
        p = random_instance(5, n_ic=0, seed=seed)
        assert np.allclose(diagonal_of(qubo_to_hamiltonian(p.objective())).diag, cost_table(p), atol=1e-12)


def test_dropping_the_offset():
    p = random_instance(3, n_ic=0, seed=1)
    h = qubo_to_hamiltonian(p.objective(), keep_offset=False)
    assert h.identity_coeff() == 0.0
    assert np.allclose(diagonal_of(h).diag, cost_table(p) - cost_table(p).mean())


def test_folded_svp_expansion():
    folded = (np.array([0, 5, 2, 9, 1, 6, 3, 10], dtype=float) - 1.3) ** 2
    h = pauli_of_diagonal(folded)
    expected = {'III': 21.99, 'ZII': -3.2, 'IZI': -12.6, 'IIZ': -20.7, 'ZZI': 1.5, 'ZIZ': 3.0, 'IZZ': 12.2,
                'ZZZ': -0.5}
    assert set(h.terms) == set(expected)
    for string, coeff in expected.items():
        assert h.coeff(string) == pytest.approx(coeff, abs=1e-12)


def test_walsh_expansion_round_trip(rng):
    diag = rng.normal(size=32)
    assert np.allclose(diagonal_of(pauli_of_diagonal(diag)).diag, diag)


def test_non_diagonal_sum_has_no_diagonal():
    with pytest.raises(NotDiagonalError):
        diagonal_of(PauliSum(2, {'XZ': 1.0}))


def test_sum_arithmetic_prunes_zeros():
    a = PauliSum(2, {'ZI': 1.0, 'IZ': 2.0})
    assert (a - a).terms == {}
    assert (2 * a).coeff('IZ') == 4.0


def test_pauli_string_action_matches_matrices(rng):
    psi = random_state(rng, 3).amps
    for string in ['XYZ', 'YYI', 'IZX', 'ZZZ', 'YIY']:
        dense = to_matrix(PauliSum(3, {string: 1.0}))
        assert np.allclose(apply_pauli_string(psi, string), dense @ psi)


@pytest.mark.parametrize('n', [2, 3, 4, 5, 6])
def test_commutator_matches_dense(rng, n):
    Q = pauli_of_diagonal(rng.normal(size=1 << n))
    mixer = PauliSum(n, {'I' * q + 'X' + 'I' * (n - q - 1): 1.0 for q in range(n)})
    dense = 1j * (to_matrix(mixer) @ to_matrix(Q) - to_matrix(Q) @ to_matrix(mixer))
    assert np.allclose(to_matrix(transverse_commutator(Q)), dense)
    for q in range(n):
        X = to_matrix(PauliSum(n, {'I' * q + 'X' + 'I' * (n - q - 1): 1.0}))
        single = 1j * (X @ to_matrix(Q) - to_matrix(Q) @ X)
        assert np.allclose(to_matrix(commutator_with_x_mixer(Q, q)), single)


def test_commutator_examples():
    assert len(commutator_with_x_mixer(PauliSum(3, {'IZI': 1.0}), 0)) == 0
    assert commutator_with_x_mixer(PauliSum(3, {'IZZ': 0.5}), 1) == PauliSum(3, {'IYZ': 1.0})


def test_hamiltonian_mapping_is_linear():
    a = random_instance(4, n_ic=0, seed=3).objective()
    b = random_instance(4, n_ic=0, seed=4).objective()
    mixed = QuboProblem(T=a.T + 2.5 * b.T, c=a.c + 2.5 * b.c, a=a.a + 2.5 * b.a, n_decision=4)
    lhs = qubo_to_hamiltonian(mixed)
    rhs = qubo_to_hamiltonian(a) + 2.5 * qubo_to_hamiltonian(b)
    for string in set(lhs.terms) | set(rhs.terms):
        assert lhs.coeff(string) == pytest.approx(rhs.coeff(string), abs=1e-12)


@pytest.mark.parametrize('n', [2, 3, 4, 5, 6, 7])
def test_qubo_diagonal_has_at_most_pairwise_terms(n):
    rng = np.random.default_rng(n)
    for trial in range(5):
        T = rng.integers(-5, 6, size=(n, n)).astype(float)
        p = QcboProblem(c=rng.integers(-5, 6, size=n), T=T + T.T, a=float(rng.integers(-5, 6)))
        h = pauli_of_diagonal(cost_table(p))
        assert len(h) <= 1 + n + n * (n - 1) // 2
        assert max(h.weight_counts()) <= 2


def test_pauli_expectation_matches_dense(rng):
    s = random_state(rng, 4)
    h = PauliSum(4, {'XYZI': 0.3, 'ZZII': -1.2, 'IIIY': 0.7})
    assert pauli_expectation(h, s.amps) == pytest.approx(np.vdot(s.amps, to_matrix(h) @ s.amps).real)


def test_diagonal_observable_norm():
    assert DiagonalObservable(2, [1.0, -7.0, 3.0, 0.0]).norm() == 7.0

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qnizk.hamiltonian import history_state
from qnizk.quantum import (GATES, CliffordOp, DensityMatrix, NotCliffordError, PauliString, QuantumError,
                           Statevector, apply_unitary, embed, measure_computational, pauli_conjugate,
                           reduced_density)

ONE_Q = ["H", "S", "SDG", "X", "Y", "Z"]


def clifford_words(n):
    one = st.tuples(st.sampled_from(ONE_Q), st.integers(0, n - 1)).map(lambda g: (g[0], [g[1]]))
    if n == 1:
        return st.lists(one, max_size=8)
    two = st.tuples(st.sampled_from(["CNOT", "CZ", "SWAP"]),
                    st.permutations(list(range(n))).map(lambda p: p[:2])).map(lambda g: (g[0], list(g[1])))
    return st.lists(st.one_of(one, two), max_size=8)


def test_hh_on_00():
    out = apply_unitary(Statevector.zeros(2), GATES["HH"], [0, 1])
    assert np.allclose(out.amplitudes, 0.5)


@pytest.mark.parametrize("bits,expected", [("11", 1j), ("10", 1), ("01", 1), ("00", 1)])
def test_controlled_phase(bits, expected):
    out = apply_unitary(Statevector.from_bits(bits), GATES["CP"], [0, 1])
    assert np.isclose(out.amplitudes[int(bits, 2)], expected)


def test_reduced_density_product_and_bell():
    plus = Statevector(1, np.array([1, 1]) / np.sqrt(2))
    rho = reduced_density(Statevector.zeros(1).tensor(plus), [1])
    assert np.allclose(rho.matrix, 0.5 * np.ones((2, 2)))
    bell = Statevector(2, np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert np.allclose(reduced_density(bell, [0]).matrix, np.eye(2) / 2)


def test_toy_history_clock_marginal(fixtures):
    circ, d = fixtures["toy"]
    hist = history_state(circ, d["instance"], Statevector.from_bits(d["witness"]))
    clock = reduced_density(hist.state, [0]).matrix
    # uniform over times; the gate fixes |10>, so the clock is coherent: |+><+|
    assert np.allclose(np.diag(clock), [0.5, 0.5])
    assert np.allclose(clock, 0.5 * np.ones((2, 2)))


def test_measure_computational():
    rng = np.random.default_rng(0)
    assert measure_computational(DensityMatrix.from_bits("0"), rng) == ((0,), 1.0)
    mixed = DensityMatrix.maximally_mixed(1)
    freq = np.mean([measure_computational(mixed, rng)[0][0] for _ in range(10_000)])
    assert abs(freq - 0.5) < 0.02
    state = apply_unitary(Statevector.from_bits("10"), GATES["CP"], [0, 1])
    assert measure_computational(state, rng, [0]) == ((1,), 1.0)


def test_conjugation_examples():
    h = CliffordOp(1, GATES["H"])
    assert pauli_conjugate(h, PauliString.from_label("X")) == PauliString.from_label("Z")
    ident = CliffordOp.identity(3)
    for label in ("XYZ", "IIZ", "YYI"):
        p = PauliString.from_label(label)
        assert pauli_conjugate(ident, p) == p


def test_controlled_phase_is_not_clifford():
    # dense oracle: the image of X(x)I under controlled-S has no single-Pauli expansion
    u = GATES["CP"]
    img = u @ np.kron(GATES["X"], np.eye(2)) @ u.conj().T
    overlaps = [abs(np.trace(PauliString.from_label("".join(lbl)).matrix().conj().T @ img)) / 4
                for lbl in itertools.product("IXYZ", repeat=2)]
    assert max(overlaps) < 1 - 1e-6
    with pytest.raises(NotCliffordError):
        CliffordOp(2, u)


@given(clifford_words(3), st.text("IXYZ", min_size=3, max_size=3))
def test_conjugation_matches_dense(word, label):
    c = CliffordOp.from_word(3, word)
    p = PauliString.from_label(label)
    img = pauli_conjugate(c, p)
    assert np.allclose(img.matrix(), c.matrix @ p.matrix() @ c.matrix.conj().T, atol=1e-9)


@given(clifford_words(2))
def test_dagger_and_conjugate_are_involutions(word):
    c = CliffordOp.from_word(2, word)
    assert c.dagger().dagger() is c
    assert np.allclose(c.dagger().matrix @ c.matrix, np.eye(4))
    assert np.allclose(c.conjugate().matrix, c.matrix.conj())


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=8, max_size=8),
       st.lists(st.integers(0, 2), min_size=1, max_size=3, unique=True))
def test_partial_trace_is_a_state(amps, keep):
    a = np.array(amps)
    if np.linalg.norm(a) < 1e-3:
        return
    rho = reduced_density(Statevector.normalized(a), keep)
    assert np.isclose(np.trace(rho.matrix).real, 1)
    assert np.linalg.eigvalsh(rho.matrix).min() > -1e-9


def test_embed_orders_targets():
    cnot_10 = embed(GATES["CNOT"], [1, 0], 2)
    out = cnot_10 @ Statevector.from_bits("01").amplitudes
    assert np.isclose(out[0b11], 1)


def test_invalid_states_rejected():
    with pytest.raises(QuantumError):
        Statevector(1, np.array([1, 1]))
    with pytest.raises(QuantumError):
        DensityMatrix(1, np.array([[1, 1], [0, 0]]))

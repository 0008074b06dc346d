import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisyvqc.errors import DimensionError, NotCliffordError
from noisyvqc.pauli import (
    PauliString,
    all_paulis,
    clifford_conjugate,
    is_clifford,
    pauli_expand,
    pauli_mul,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0 + 0j, -1.0])
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
S = np.diag([1, 1j])
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def pauli_strings(n):
    bits = st.lists(st.integers(0, 1), min_size=n, max_size=n)
    return st.builds(lambda x, z, p: PauliString(tuple(x), tuple(z), p), bits, bits, st.integers(0, 3))


def test_identity_is_neutral():
    x = PauliString.from_label("X")
    assert pauli_mul(x, PauliString.identity(1)) == x
    assert PauliString.identity(2).to_matrix().tolist() == np.eye(4).tolist()


def test_zx_is_minus_xz():
    zx = pauli_mul(PauliString.from_label("Z"), PauliString.from_label("X"))
    assert zx.x == (1,) and zx.z == (1,) and zx.phase == 2
    np.testing.assert_allclose(zx.to_matrix(), Z @ X, atol=1e-12)


def test_xz_squared_is_minus_identity():
    xz = PauliString((1,), (1,), 0)
    sq = xz * xz
    assert sq.is_identity() and sq.phase == 2
    np.testing.assert_allclose(sq.to_matrix(), (X @ Z) @ (X @ Z), atol=1e-12)


def test_labels_and_matrices():
    np.testing.assert_allclose(PauliString.from_label("Y").to_matrix(), Y)
    np.testing.assert_allclose(PauliString.from_label("-iXZ").to_matrix(), -1j * np.kron(X, Z))
    assert PauliString.from_label("Y").label() == "Y"
    assert PauliString((1,), (1,), 0).label() == "-iY"
    with pytest.raises(ValueError):
        PauliString.from_label("XQ")


def test_length_mismatch():
    with pytest.raises(DimensionError):
        pauli_mul(PauliString.from_label("X"), PauliString.from_label("XX"))
    with pytest.raises(DimensionError):
        PauliString((1, 0), (1,), 0)


def test_multiplication_exhaustive_one_qubit():
    ps = [PauliString(p.x, p.z, ph) for p in all_paulis(1) for ph in range(4)]
    for a in ps:
        for b in ps:
            np.testing.assert_allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(pauli_strings(n), pauli_strings(n), pauli_strings(n))))
def test_multiplication_matches_dense(abc):
    a, b, c = abc
    np.testing.assert_allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12)
    assert (a * b) * c == a * (b * c)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3).flatmap(pauli_strings))
def test_hermitian_flag(p):
    m = p.to_matrix()
    assert p.is_hermitian() == np.allclose(m, m.conj().T)
    h = p.hermitian().to_matrix()
    np.testing.assert_allclose(h, h.conj().T)


def test_expand_identity_and_zero_projector():
    assert pauli_expand(np.eye(2)).coeffs == {((0,), (0,)): 1}
    c = pauli_expand(np.diag([1.0, 0.0])).coeffs
    assert c == pytest.approx({((0,), (0,)): 0.5, ((0,), (1,)): 0.5})


def test_expand_zero_projector_many_qubits():
    # |0..0><0..0| = 2^-n sum_k Z^k
    for n in (2, 3):
        d = 1 << n
        proj = np.zeros((d, d))
        proj[0, 0] = 1
        arr = pauli_expand(proj).array
        np.testing.assert_allclose(arr[0], np.full(d, 1 / d), atol=1e-15)
        np.testing.assert_allclose(arr[1:], 0, atol=1e-15)


def test_expand_bell_state():
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    exp = pauli_expand(np.outer(phi, phi))
    # (1/4) sum_{l,k} X^l Z^k (x) X^l Z^k, qubit A most significant
    expected = {}
    for l in (0, 1):
        for k in (0, 1):
            expected[((l, l), (k, k))] = 0.25
    assert exp.coeffs == pytest.approx(expected)
    np.testing.assert_allclose(exp.reconstruct(), np.outer(phi, phi), atol=1e-12)


def test_expand_rejects_bad_dimension():
    with pytest.raises(DimensionError):
        pauli_expand(np.eye(3))
    with pytest.raises(DimensionError):
        pauli_expand(np.eye(4), n=1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_expand_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    d = 1 << n
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    herm = a + a.conj().T
    exp = pauli_expand(herm)
    np.testing.assert_allclose(exp.reconstruct(), herm, atol=1e-12)
    p = PauliString.from_ints(1, d - 1, n)
    assert exp.coefficient(p) == pytest.approx(np.trace(p.to_matrix().conj().T @ herm) / d)


def test_clifford_examples():
    assert clifford_conjugate(H, PauliString.from_label("X")) == PauliString.from_label("Z")
    assert clifford_conjugate(CNOT, PauliString.from_label("XI")) == PauliString.from_label("XX")
    q = clifford_conjugate(S, PauliString.from_label("X"))
    assert q == PauliString((1,), (1,), 1)
    np.testing.assert_allclose(q.to_matrix(), S @ X @ S.conj().T, atol=1e-12)


def test_not_clifford():
    t = np.diag([1, np.exp(1j * np.pi / 4)])
    assert not is_clifford(t)
    with pytest.raises(NotCliffordError):
        clifford_conjugate(t, PauliString.from_label("X"))
    with pytest.raises(NotCliffordError):
        clifford_conjugate(np.diag([1.0, 2.0]), PauliString.from_label("Z"))


def _random_two_qubit_clifford(rng):
    gens = [np.kron(H, I2), np.kron(I2, H), np.kron(S, I2), np.kron(I2, S), CNOT]
    c = np.eye(4, dtype=complex)
    for g in rng.integers(0, len(gens), size=12):
        c = gens[g] @ c
    return c * np.exp(1j * rng.uniform(0, 2 * np.pi))


def test_clifford_conjugation_matches_dense_on_samples():
    rng = np.random.default_rng(7)
    for _ in range(30):
        c = _random_two_qubit_clifford(rng)
        assert is_clifford(c)
        for p in all_paulis(2):
            q = clifford_conjugate(c, p)
            np.testing.assert_allclose(q.to_matrix(), c @ p.to_matrix() @ c.conj().T, atol=1e-12)

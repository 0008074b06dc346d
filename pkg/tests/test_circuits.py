import numpy as np
import pytest
from scipy.stats import unitary_group

from noisyvqc.circuits import (
    CNOT_MAT,
    Gate,
    GateSequence,
    cnot,
    ensure_cnot_skeleton,
    h,
    p,
    rot,
    rotation,
    unitary_gate,
)
from noisyvqc.errors import DimensionError, PreconditionError


def dense(g, n):
    """Oracle embedding via explicit basis-state permutation for gates on arbitrary targets."""
    d = 1 << n
    k = len(g.targets)
    m = g.matrix(None)
    out = np.zeros((d, d), dtype=complex)
    for col in range(d):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub = sum(bits[q] << (k - 1 - i) for i, q in enumerate(g.targets))
        for r in range(1 << k):
            nb = list(bits)
            for i, q in enumerate(g.targets):
                nb[q] = (r >> (k - 1 - i)) & 1
            row = sum(b << (n - 1 - q) for q, b in enumerate(nb))
            out[row, col] += m[r, sub]
    return out


def test_rotation_definition():
    th = 0.37
    for axis, s in (("x", np.array([[0, 1], [1, 0]])), ("z", np.diag([1, -1]))):
        assert np.allclose(rotation(axis, th), np.cos(th / 2) * np.eye(2) - 1j * np.sin(th / 2) * s)


def test_sequence_unitary_matches_dense_oracle():
    gates = [h(2), cnot(2, 0), unitary_gate(unitary_group.rvs(4, random_state=1), (1, 2)), p(0, 0.3),
             cnot(0, 2)]
    seq = GateSequence(3, gates)
    ref = np.eye(8)
    for g in gates:
        ref = dense(g, 3) @ ref
    assert np.allclose(seq.unitary(), ref)


def test_parametric_sequence_and_adjoint():
    seq = GateSequence(2, [rot("y", 0, 0), cnot(0, 1), rot("z", 1, 1)])
    x = np.array([0.4, -1.2])
    u = seq.unitary(x)
    assert np.allclose(seq.adjoint().unitary(x), u.conj().T)
    assert np.allclose(seq.bind(x).unitary(), u)
    with pytest.raises(DimensionError):
        seq.unitary()
    with pytest.raises(DimensionError):
        seq.unitary([0.1])
    with pytest.raises(ValueError):
        seq.unitary([0.1, np.nan])


def test_embedding_and_concatenation():
    seq = GateSequence(2, [cnot(0, 1)])
    big = seq.embedded(3, [2, 0])
    assert np.allclose(big.unitary(), dense(cnot(2, 0), 3))
    both = seq.then(GateSequence(2, [cnot(0, 1)]))
    assert np.allclose(both.unitary(), np.eye(4))
    assert both.cnot_count == 2
    with pytest.raises(DimensionError):
        seq.then(GateSequence(3, []))


def test_gate_guards():
    with pytest.raises(DimensionError):
        cnot(1, 1)
    with pytest.raises(DimensionError):
        GateSequence(2, [cnot(0, 2)])
    with pytest.raises(ValueError):
        Gate("bad", (0,))
    with pytest.raises(DimensionError):
        Gate("big", (0,), fixed=CNOT_MAT)
    with pytest.raises(DimensionError):
        GateSequence(0, [])


def test_from_unitary_and_skeleton_check():
    u = unitary_group.rvs(4, random_state=2)
    seq = GateSequence.from_unitary(u)
    assert np.allclose(seq.unitary(), u)
    with pytest.raises(PreconditionError):
        ensure_cnot_skeleton(seq)
    ensure_cnot_skeleton(GateSequence(2, [h(0), cnot(0, 1)]))

"""Three-qubit target circuits: Toffoli, QFT and W-state preparation."""
from __future__ import annotations

import numpy as np

from .ansatz import single_qubit_gate
from .circuits import Gate, GateSequence, cnot, h, p, t, tdg, x
from .errors import DimensionError

W_BETA1 = 2 * np.arccos(np.sqrt(1 / 3))


def toffoli() -> GateSequence:
    """Standard six-CNOT decomposition, controls 0 and 1, target 2."""
    g = [
        h(2), cnot(1, 2), tdg(2), cnot(0, 2), t(2), cnot(1, 2), tdg(2), cnot(0, 2),
        t(1), t(2), h(2), cnot(0, 1), t(0), tdg(1), cnot(0, 1),
    ]
    return GateSequence(3, g)


def toffoli_matrix() -> np.ndarray:
    m = np.eye(8, dtype=complex)
    m[[6, 7]] = m[[7, 6]]
    return m


def _swap(a: int, b: int) -> list[Gate]:
    return [cnot(a, b), cnot(b, a), cnot(a, b)]


def _controlled_phase(c: int, tq: int, phi: float) -> list[Gate]:
    """``diag(1, 1, 1, e^{i phi})`` as two CNOTs and three phase gates."""
    return [p(c, phi / 2), cnot(c, tq), p(tq, -phi / 2), cnot(c, tq), p(tq, phi / 2)]


def qft(n: int = 3) -> GateSequence:
    """Textbook QFT with closing swaps; the dense matrix is ``omega^{jk}/sqrt(2^n)``."""
    if n < 1:
        raise DimensionError("QFT needs at least one qubit")
    gates: list[Gate] = []
    for j in range(n):
        gates.append(h(j))
        for m, k in enumerate(range(j + 1, n), start=2):
            gates += _controlled_phase(k, j, 2 * np.pi / 2**m)
    for j in range(n // 2):
        gates += _swap(j, n - 1 - j)
    return GateSequence(n, gates)


def dft_matrix(n: int) -> np.ndarray:
    d = 1 << n
    jk = np.outer(np.arange(d), np.arange(d))
    return np.exp(2j * np.pi * jk / d) / np.sqrt(d)


def w_state_prep() -> GateSequence:
    """Prepares ``(|001> + |010> + |100>)/sqrt(3)`` from ``|000>`` (qubit 0 is the leftmost bit)."""
    g = [
        Gate("v", (0,), fixed=single_qubit_gate((W_BETA1, 0, 0))),
        Gate("v", (1,), fixed=single_qubit_gate((np.pi / 4, 0, 0))),
        cnot(0, 1),
        Gate("v", (1,), fixed=single_qubit_gate((-np.pi / 4, 0, 0))),
        cnot(1, 2),
        cnot(0, 1),
        x(0),
    ]
    return GateSequence(3, g)


def w_state() -> np.ndarray:
    v = np.zeros(8, dtype=complex)
    v[[1, 2, 4]] = 1 / np.sqrt(3)
    return v


TARGETS = {"toffoli": toffoli, "qft": qft, "w_state": w_state_prep}


def get_target(name: str) -> GateSequence:
    try:
        return TARGETS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown target {name!r}; choose from {sorted(TARGETS)}") from None


__all__ = ["toffoli", "qft", "w_state_prep", "toffoli_matrix", "dft_matrix", "w_state", "get_target"]

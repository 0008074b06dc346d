"""Dense density-matrix simulation.

States are ``2^n x 2^n`` complex matrices over an ordered qubit register.  Local
operators are applied by reshaping the matrix into a ``(2,)*2n`` tensor and
contracting only the target axes, so a one-qubit gate never builds a full
``2^n`` matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, NotUnitaryError, NumericalError
from .pauli import num_qubits_of

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9


def _check_targets(targets: Sequence[int], n: int) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise DimensionError(f"repeated target qubits {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise DimensionError(f"target {t} out of range for {n} qubits")
    return targets


def apply_left(tensor: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``op`` (a ``2^k x 2^k`` matrix) into ``axes`` of a qubit tensor."""
    k = len(axes)
    op_t = op.reshape((2,) * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def conjugate_raw(mat: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Return ``op rho op^dagger`` with ``op`` embedded on ``targets``."""
    t = mat.reshape((2,) * (2 * n))
    t = apply_left(t, op, targets)
    t = apply_left(t, op.conj(), [n + q for q in targets])
    return t.reshape(mat.shape)


def kraus_raw(mat: np.ndarray, kraus: Sequence[np.ndarray], targets: Sequence[int], n: int) -> np.ndarray:
    """Return ``sum_i K_i rho K_i^dagger`` with each ``K_i`` embedded on ``targets``."""
    if len(kraus) == 1:
        return conjugate_raw(mat, kraus[0], targets, n)
    out = np.zeros_like(mat)
    for k in kraus:
        out += conjugate_raw(mat, k, targets, n)
    return out


def adjoint_kraus_raw(mat: np.ndarray, kraus: Sequence[np.ndarray], targets: Sequence[int], n: int) -> np.ndarray:
    """Heisenberg-picture action ``sum_i K_i^dagger X K_i``."""
    out = np.zeros_like(mat)
    for k in kraus:
        out += conjugate_raw(mat, k.conj().T, targets, n)
    return out


def expectation(effect: np.ndarray, mat: np.ndarray) -> float:
    """``Re Tr[effect @ mat]`` without forming the product."""
    return float(np.real(np.sum(effect * mat.T)))


@dataclass
class DensityState:
    """Density matrix on a labelled register; labels[0] is the most significant qubit."""

    mat: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=complex)
        if self.mat.ndim != 2 or self.mat.shape[0] != self.mat.shape[1]:
            raise DimensionError(f"density matrix must be square, got {self.mat.shape}")
        n = num_qubits_of(self.mat.shape[0])
        if not self.labels:
            self.labels = tuple(f"q{j}" for j in range(n))
        self.labels = tuple(self.labels)
        if len(self.labels) != n:
            raise DimensionError(f"{len(self.labels)} labels for {n} qubits")

    @property
    def n(self) -> int:
        return len(self.labels)

    @classmethod
    def zero(cls, n: int, labels: Sequence[str] | None = None) -> DensityState:
        mat = np.zeros((1 << n, 1 << n), dtype=complex)
        mat[0, 0] = 1.0
        return cls(mat, tuple(labels) if labels else ())

    @classmethod
    def from_vector(cls, psi: np.ndarray, labels: Sequence[str] | None = None) -> DensityState:
        psi = np.asarray(psi, dtype=complex).ravel()
        return cls(np.outer(psi, psi.conj()), tuple(labels) if labels else ())

    def copy(self) -> DensityState:
        return DensityState(self.mat.copy(), self.labels)

    def validate(self, hermitian_tol: float = HERMITIAN_TOL, trace_tol: float = TRACE_TOL, psd_tol: float = PSD_TOL) -> None:
        if np.max(np.abs(self.mat - self.mat.conj().T)) > hermitian_tol:
            raise NumericalError("density matrix is not Hermitian")
        tr = np.trace(self.mat)
        if abs(tr - 1.0) > trace_tol:
            raise NumericalError(f"density matrix trace is {tr}")
        if np.min(np.linalg.eigvalsh((self.mat + self.mat.conj().T) / 2)) < -psd_tol:
            raise NumericalError("density matrix has a negative eigenvalue")

    def index_of(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class PovmEffect:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"effect must be square, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise NumericalError("effect is not Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev[0] < -1e-10 or ev[-1] > 1 + 1e-10:
            raise NumericalError("effect eigenvalues leave [0, 1]")


def check_unitary(u: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError(f"unitary must be square, got {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > atol:
        raise NotUnitaryError("matrix is not unitary within tolerance")
    return u


def apply_unitary(state: DensityState, u: np.ndarray, targets: Sequence[int]) -> DensityState:
    u = check_unitary(u)
    targets = _check_targets(targets, state.n)
    if u.shape[0] != 1 << len(targets):
        raise DimensionError(f"{u.shape[0]}-dimensional unitary on {len(targets)} targets")
    return DensityState(conjugate_raw(state.mat, u, targets, state.n), state.labels)


def apply_channel(state: DensityState, ch, targets: Sequence[int]) -> DensityState:
    """Apply a Channel (anything with ``arity`` and ``kraus``) on ``targets``."""
    targets = _check_targets(targets, state.n)
    if ch.arity != len(targets):
        raise DimensionError(f"channel of arity {ch.arity} applied to {len(targets)} targets")
    return DensityState(kraus_raw(state.mat, ch.kraus, targets, state.n), state.labels)


def povm_probability(state: DensityState, effect) -> float:
    m = effect.matrix if isinstance(effect, PovmEffect) else np.asarray(effect)
    if m.shape != state.mat.shape:
        raise DimensionError(f"effect shape {m.shape} does not match state shape {state.mat.shape}")
    return clamp_probability(expectation(m, state.mat))


def clamp_probability(p: float, tol: float = 1e-9) -> float:
    if p < -tol or p > 1 + tol:
        raise NumericalError(f"probability {p} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def partial_trace(state: DensityState, keep: Sequence[int]) -> DensityState:
    """Reduced state on ``keep`` (in the order given)."""
    keep = _check_targets(keep, state.n)
    if not keep:
        raise DimensionError("partial trace must keep at least one qubit")
    n = state.n
    t = state.mat.reshape((2,) * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    ket = list(letters[:n])
    bra = list(letters[n:2 * n])
    for q in range(n):
        if q not in keep:
            bra[q] = ket[q]
    out = "".join(ket[q] for q in keep) + "".join(bra[q] for q in keep)
    red = np.einsum("".join(ket) + "".join(bra) + "->" + out, t)
    d = 1 << len(keep)
    return DensityState(red.reshape(d, d), tuple(state.labels[q] for q in keep))


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int, a tuple of ints or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        ss = np.random.SeedSequence([int(s) for s in seed])
    else:
        ss = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


def sample_counts(probs: Sequence[float], shots: int, seed) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if shots < 1:
        raise ValueError("shots must be at least 1")
    if np.any(probs < -1e-9):
        raise NumericalError("negative probability")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise NumericalError(f"probabilities sum to {probs.sum()}")
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    return make_rng(seed).multinomial(int(shots), probs)

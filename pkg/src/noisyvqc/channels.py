"""Noise channels: depolarizing, Pauli, non-unital Pauli, thermal relaxation and readout.

Channels carry a Kraus list (possibly built lazily).  Channels whose action is
diagonal in the ``X^l Z^k`` basis, except for an affine image of the identity,
also store the transfer coefficients ``c[l, k]`` and the affine offsets
``d[l, k]``.  These arrays give an O(d^3) application route that does not touch
the Kraus operators, which matters for global channels on six qubits.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import hadamard

from .errors import ChannelError, DimensionError
from .pauli import (
    PauliString,
    bits_to_int,
    clifford_conjugate,
    int_to_bits,
    pauli_expand,
    pauli_matrix,
)
from .sim import adjoint_kraus_raw, kraus_raw

KRAUS_TOL = 1e-10
CHOI_TOL = 1e-9
STRUCT_TOL = 1e-10


@functools.lru_cache(maxsize=256)
def _diag_plan(targets: tuple[int, ...], n: int):
    """Index arrays for embedding a Pauli-diagonal map on ``targets`` of ``n`` qubits.

    Returns ``(rows, had, lt, rest)`` where ``rows[l, c] = c ^ l``, ``had`` is the
    Sylvester-Hadamard matrix, ``lt[L]`` extracts the target bits of a full
    pattern ``L`` as a local pattern and ``rest[L]`` clears them.
    """
    dim = 1 << n
    full = np.arange(dim)
    rows = full[None, :] ^ full[:, None]
    k = len(targets)
    lt = np.zeros(dim, dtype=np.int64)
    mask = 0
    for pos, q in enumerate(targets):
        bit = 1 << (n - 1 - q)
        mask |= bit
        lt |= ((full & bit) != 0).astype(np.int64) << (k - 1 - pos)
    rest = full & ~mask
    for arr in (rows, lt, rest):
        arr.setflags(write=False)
    had = hadamard(dim).astype(float)
    had.setflags(write=False)
    return rows, had, lt, rest


def _to_pauli_coeffs(mat: np.ndarray, rows: np.ndarray, had: np.ndarray) -> np.ndarray:
    cols = np.arange(mat.shape[0])
    return (mat[rows, cols[None, :]] @ had) / mat.shape[0]


def _from_pauli_coeffs(r: np.ndarray, rows: np.ndarray, had: np.ndarray) -> np.ndarray:
    out = np.empty_like(r)
    cols = np.arange(r.shape[0])
    out[rows, cols[None, :]] = r @ had
    return out


class Channel:
    """CPTP map on ``arity`` qubits.

    Parameters
    ----------
    arity : qubit count.
    kraus : list of ``2^arity`` square matrices, or a zero-argument callable
        returning that list (used for large depolarizing and Pauli channels).
    kind : one of ``depolarizing, pauli, nonunital_pauli, unitary, thermal, general``.
    transfer, affine : optional ``(d, d)`` arrays indexed ``[l, k]``.  When given,
        the channel maps ``X^l Z^k`` to ``transfer[l, k] X^l Z^k`` for every
        non-identity word and the identity to ``1 + sum affine[l, k] X^l Z^k``.
    components : optional list of ``(Channel, local_targets)`` whose tensor
        product is this channel; used for product channels that are not
        Pauli-diagonal as a whole.
    """

    KINDS = ("depolarizing", "pauli", "nonunital_pauli", "unitary", "thermal", "general")

    def __init__(
        self,
        arity: int,
        kraus,
        kind: str = "general",
        transfer: np.ndarray | None = None,
        affine: np.ndarray | None = None,
        components: list | None = None,
        params: Mapping | None = None,
        validate: bool = True,
    ):
        if arity < 1:
            raise DimensionError("channel arity must be at least 1")
        if kind not in self.KINDS:
            raise ChannelError(f"unknown channel kind {kind!r}")
        self.arity = int(arity)
        self.kind = kind
        self.params = dict(params or {})
        self._kraus_src = kraus
        self._kraus: list[np.ndarray] | None = None
        self.transfer_array = None if transfer is None else np.asarray(transfer)
        self.affine_array = None if affine is None else np.asarray(affine, dtype=complex)
        if self.transfer_array is not None and self.affine_array is None:
            self.affine_array = np.zeros_like(self.transfer_array, dtype=complex)
        self.components = components
        if not callable(kraus):
            self._kraus = [np.asarray(k, dtype=complex) for k in kraus]
            dim = 1 << self.arity
            for k in self._kraus:
                if k.shape != (dim, dim):
                    raise DimensionError(f"Kraus operator of shape {k.shape} for arity {arity}")
        if validate and self.arity <= 3:
            self.validate()

    def __repr__(self) -> str:
        return f"Channel(kind={self.kind!r}, arity={self.arity}, params={self.params})"

    @property
    def dim(self) -> int:
        return 1 << self.arity

    @property
    def kraus(self) -> list[np.ndarray]:
        if self._kraus is None:
            self._kraus = [np.asarray(k, dtype=complex) for k in self._kraus_src()]
        return self._kraus

    @property
    def has_diagonal_form(self) -> bool:
        return self.transfer_array is not None

    @property
    def is_unital(self) -> bool:
        if self.affine_array is not None and self.components is None:
            return bool(np.max(np.abs(self.affine_array)) <= STRUCT_TOL)
        return bool(np.max(np.abs(self.apply_matrix(np.eye(self.dim)) - np.eye(self.dim))) <= STRUCT_TOL)

    # -- coefficient maps -------------------------------------------------
    @property
    def transfer(self) -> dict:
        """``(l_bits, k_bits) -> c`` for channels with a diagonal form."""
        if self.transfer_array is None:
            raise ChannelError(f"{self.kind} channel has no Pauli-diagonal transfer map")
        return _array_to_map(self.transfer_array.real, self.arity, skip_zero=False)

    @property
    def affine(self) -> dict:
        if self.affine_array is None:
            raise ChannelError(f"{self.kind} channel has no affine map")
        return _array_to_map(self.affine_array, self.arity, skip_zero=True)

    # -- dense representations (oracle routes; small arity only) ----------
    def superop(self) -> np.ndarray:
        """Row-major superoperator: ``vec(E(rho)) = S @ vec(rho)``."""
        return sum(np.kron(k, k.conj()) for k in self.kraus)

    def ptm(self) -> np.ndarray:
        """Transfer matrix ``R[a, b] = Tr[P_a^dagger E(P_b)] / d`` in the ``X^l Z^k`` basis.

        Index ``a = l * d + k``.  Computed from the Kraus operators, independent of
        the stored diagonal form.
        """
        d = self.dim
        out = np.empty((d * d, d * d), dtype=complex)
        for l in range(d):
            for k in range(d):
                img = self.apply_matrix_kraus(pauli_matrix(l, k, self.arity))
                out[:, l * d + k] = pauli_expand(img).array.reshape(-1)
        return out

    def choi(self) -> np.ndarray:
        vecs = [k.T.reshape(-1) for k in self.kraus]
        return sum(np.outer(v, v.conj()) for v in vecs)

    def validate(self) -> None:
        d = self.dim
        comp = sum(k.conj().T @ k for k in self.kraus)
        if np.max(np.abs(comp - np.eye(d))) > KRAUS_TOL:
            raise ChannelError("Kraus operators are not trace preserving")
        if np.min(np.linalg.eigvalsh(self.choi())) < -CHOI_TOL:
            raise ChannelError("Choi matrix is not positive semidefinite")
        if self.kind in ("pauli", "depolarizing"):
            r = self.ptm()
            if np.max(np.abs(r - np.diag(np.diag(r)))) > STRUCT_TOL:
                raise ChannelError("Pauli channel has off-diagonal transfer terms")
        if self.transfer_array is not None and self.components is None:
            r = self.ptm()
            expect = np.diag(self.transfer_array.reshape(-1)).astype(complex)
            expect[:, 0] += self.affine_array.reshape(-1)
            if np.max(np.abs(r - expect)) > 1e-9:
                raise ChannelError("stored transfer coefficients disagree with Kraus operators")

    # -- application ------------------------------------------------------
    def apply_matrix_kraus(self, mat: np.ndarray) -> np.ndarray:
        return sum(k @ mat @ k.conj().T for k in self.kraus)

    def apply_matrix(self, mat: np.ndarray) -> np.ndarray:
        """Apply to a ``2^arity`` square operator."""
        return self.apply_raw(np.asarray(mat, dtype=complex), tuple(range(self.arity)), self.arity)

    def apply_raw(self, mat: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
        targets = tuple(targets)
        if self.components is not None:
            for ch, local in self.components:
                mat = ch.apply_raw(mat, tuple(targets[q] for q in local), n)
            return mat
        if self.transfer_array is not None and self.arity >= 2:
            return self._apply_diag(mat, targets, n, adjoint=False)
        return kraus_raw(mat, self.kraus, targets, n)

    def adjoint_raw(self, mat: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
        """Heisenberg-picture map ``E^dagger`` embedded on ``targets``."""
        targets = tuple(targets)
        if self.components is not None:
            for ch, local in reversed(self.components):
                mat = ch.adjoint_raw(mat, tuple(targets[q] for q in local), n)
            return mat
        if self.transfer_array is not None and self.arity >= 2:
            return self._apply_diag(mat, targets, n, adjoint=True)
        return adjoint_kraus_raw(mat, self.kraus, targets, n)

    def _apply_diag(self, mat, targets, n, adjoint):
        rows, had, lt, rest = _diag_plan(targets, n)
        r = _to_pauli_coeffs(mat, rows, had)
        c_full = self.transfer_array[lt[:, None], lt[None, :]]
        out = c_full * r
        aff = self.affine_array
        if np.any(aff != 0):
            d_full = aff[lt[:, None], lt[None, :]]
            if not adjoint:
                out += d_full * r[rest[:, None], rest[None, :]]
            else:
                np.add.at(out, (rest[:, None], rest[None, :]), d_full.conj() * r)
        return _from_pauli_coeffs(out, rows, had)

    # -- algebra ----------------------------------------------------------
    def compose(self, first: Channel) -> Channel:
        """Channel ``self o first`` (``first`` acts first)."""
        if first.arity != self.arity:
            raise DimensionError("cannot compose channels of different arity")
        kraus = [a @ b for a in self.kraus for b in first.kraus]
        transfer = affine = None
        kind = "general"
        if self.has_diagonal_form and first.has_diagonal_form and self.components is None and first.components is None:
            transfer = self.transfer_array * first.transfer_array
            affine = self.affine_array + self.transfer_array * first.affine_array
            unital = np.max(np.abs(affine)) <= STRUCT_TOL
            kind = "pauli" if unital else "nonunital_pauli"
        return Channel(self.arity, kraus, kind, transfer, affine, params={"composed": [self.kind, first.kind]})

    def tensor(self, other: Channel) -> Channel:
        """``self (x) other`` with ``self`` on the leading qubits."""
        comps = []
        for ch, offset in ((self, 0), (other, self.arity)):
            if ch.components is None:
                comps.append((ch, tuple(range(offset, offset + ch.arity))))
            else:
                comps.extend((c, tuple(offset + q for q in loc)) for c, loc in ch.components)
        def kraus():
            return [np.kron(a, b) for a in self.kraus for b in other.kraus]

        transfer = affine = None
        kind = "general"
        if self.has_diagonal_form and other.has_diagonal_form:
            transfer = np.kron(self.transfer_array, other.transfer_array)
            ida = self.affine_array.copy()
            ida[0, 0] += 1
            idb = other.affine_array.copy()
            idb[0, 0] += 1
            affine = np.kron(ida, idb)
            affine[0, 0] -= 1
            both_unital = np.max(np.abs(affine)) <= STRUCT_TOL
            kind = "pauli" if both_unital else "nonunital_pauli"
            if both_unital:
                comps = None  # the product is itself Pauli-diagonal
        return Channel(self.arity + other.arity, kraus, kind, transfer, affine, components=comps,
                       params={"tensor": [self.kind, other.kind]}, validate=False)


def _array_to_map(arr: np.ndarray, n: int, skip_zero: bool) -> dict:
    out = {}
    d = 1 << n
    for l in range(d):
        for k in range(d):
            v = arr[l, k]
            if skip_zero and (abs(v) <= 1e-15 or (l == 0 and k == 0)):
                continue
            out[(int_to_bits(l, n), int_to_bits(k, n))] = v
    return out


# -- constructors -----------------------------------------------------------

def _check_prob(p: float, name: str = "p") -> float:
    p = float(p)
    if not np.isfinite(p) or p < 0 or p > 1:
        raise ChannelError(f"{name}={p} is not a probability")
    return p


def identity_channel(arity: int = 1) -> Channel:
    return depolarizing(1.0, arity)


def depolarizing(p: float, arity: int = 1) -> Channel:
    """``rho -> p rho + (1 - p) 1/2^arity``."""
    p = _check_prob(p)
    d = 1 << arity
    transfer = np.full((d, d), p)
    transfer[0, 0] = 1.0
    probs = np.full((d, d), (1 - p) / d**2)
    probs[0, 0] += p
    return Channel(arity, lambda: _pauli_kraus(probs, arity), "depolarizing", transfer,
                   params={"p": p}, validate=arity <= 2)


def _pauli_kraus(probs: np.ndarray, n: int) -> list[np.ndarray]:
    out = []
    for l, k in zip(*np.nonzero(probs > 0)):
        out.append(np.sqrt(probs[l, k]) * pauli_matrix(l, k, n))
    return out


def pauli_transfer_from_probs(probs: np.ndarray) -> np.ndarray:
    """``c[a, b] = sum_{l,k} (-1)^{a.k} (-1)^{b.l} p[l, k]``."""
    had = hadamard(probs.shape[0])
    return had @ probs.T @ had


def _probs_array(probs, arity: int | None) -> tuple[np.ndarray, int]:
    if isinstance(probs, np.ndarray):
        arr = np.asarray(probs, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError("probability array must be square")
        return arr, arr.shape[0].bit_length() - 1
    items = []
    for key, val in dict(probs).items():
        p = key if isinstance(key, PauliString) else PauliString.from_label(str(key))
        items.append((p, float(val)))
    if not items:
        raise ChannelError("empty Pauli channel")
    n = items[0][0].n if arity is None else arity
    arr = np.zeros((1 << n, 1 << n))
    for p, v in items:
        if p.n != n:
            raise DimensionError("Pauli channel keys act on different qubit counts")
        arr[bits_to_int(p.x), bits_to_int(p.z)] += v
    return arr, n


def pauli_channel(probs, strict: bool = False, arity: int | None = None) -> Channel:
    """Pauli channel ``rho -> sum p_{lk} X^l Z^k rho (X^l Z^k)^dagger``.

    ``probs`` is a mapping from Pauli labels or PauliStrings to probabilities, or
    an array indexed ``[l, k]``.  ``strict`` rejects channels with a negative
    transfer coefficient.
    """
    arr, n = _probs_array(probs, arity)
    if np.any(arr < -1e-12) or abs(arr.sum() - 1) > 1e-10:
        raise ChannelError("Pauli probabilities must be nonnegative and sum to 1")
    arr = np.clip(arr, 0, None)
    transfer = pauli_transfer_from_probs(arr)
    if strict and np.min(transfer) < -1e-12:
        raise ChannelError(f"negative transfer coefficient {np.min(transfer):.3g} under strict construction")
    ch = Channel(n, lambda: _pauli_kraus(arr, n), "pauli", transfer, params={"strict": strict},
                 validate=n <= 2)
    ch.probs = arr
    return ch


def random_pauli_channel(n: int, rng: np.random.Generator, p_identity=(0.5, 0.95)) -> Channel:
    """Random Pauli channel with ``p_I`` drawn from ``p_identity``.

    ``p_I >= 1/2`` makes every transfer coefficient nonnegative, since
    ``c >= p_I - (1 - p_I)``.
    """
    d = 1 << n
    rest = rng.dirichlet(np.ones(d * d - 1))
    p_id = rng.uniform(*p_identity)
    arr = np.concatenate([[p_id], (1 - p_id) * rest]).reshape(d, d)
    return pauli_channel(arr, strict=True)


def dephasing(p_z: float) -> Channel:
    p_z = _check_prob(p_z, "p_z")
    return pauli_channel({"I": 1 - p_z, "Z": p_z})


def amplitude_damping(gamma: float) -> Channel:
    gamma = _check_prob(gamma, "gamma")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    s = np.sqrt(1 - gamma)
    transfer = np.array([[1, 1 - gamma], [s, s]])
    affine = np.array([[0, gamma], [0, 0]])
    return Channel(1, [k0, k1], "nonunital_pauli", transfer, affine, params={"gamma": gamma})


def thermal_relaxation(t1: float, t2: float, gate_time: float) -> Channel:
    """Amplitude damping ``1 - exp(-t/T1)`` followed by the dephasing that brings
    the off-diagonal decay to ``exp(-t/T2)``.  ``t1`` may be ``inf``."""
    t1, t2, t = float(t1), float(t2), float(gate_time)
    if not (t1 > 0 and t2 > 0 and t >= 0):
        raise ChannelError("T1, T2 must be positive and the gate time nonnegative")
    if t2 > 2 * t1:
        raise ChannelError(f"T2={t2} exceeds 2*T1={2 * t1}")
    gamma = 1 - np.exp(-t / t1)
    # off-diagonal factor from damping alone is exp(-t/(2 T1))
    extra = np.exp(-t / t2 + t / (2 * t1))
    p_z = max(0.0, (1 - extra) / 2)
    ch = dephasing(p_z).compose(amplitude_damping(gamma))
    ch.kind = "thermal"
    ch.params = {"t1": t1, "t2": t2, "gate_time": t, "gamma": gamma, "p_z": p_z}
    return ch


def unitary_channel(u: np.ndarray) -> Channel:
    u = np.asarray(u, dtype=complex)
    n = u.shape[0].bit_length() - 1
    return Channel(n, [u], "unitary")


def _is_local_diagonal(ch: Channel) -> bool:
    r = ch.ptm()
    off = r - np.diag(np.diag(r))
    off[:, 0] = 0
    return bool(np.max(np.abs(off)) <= STRUCT_TOL and np.min(np.diag(r).real) >= -STRUCT_TOL
                and np.max(np.abs(np.diag(r).imag)) <= STRUCT_TOL)


def _with_diagonal_form(ch: Channel) -> Channel:
    if ch.has_diagonal_form:
        return ch
    r = ch.ptm()
    transfer = np.diag(r).real.reshape(2, 2)
    affine = r[:, 0].reshape(2, 2).copy()
    affine[0, 0] = 0
    return Channel(1, ch.kraus, "nonunital_pauli", transfer, affine, params=ch.params)


def nonunital_pauli_from_locals(locals_: Sequence[Channel]) -> Channel:
    """Tensor product of one-qubit channels with diagonal action on X and Z.

    Each factor must map every non-identity Pauli to a nonnegative multiple of
    itself; its identity image may carry a Pauli offset.
    """
    if not locals_:
        raise ChannelError("need at least one local channel")
    out = None
    for ch in locals_:
        if ch.arity != 1:
            raise ChannelError("local channels must act on one qubit")
        if not _is_local_diagonal(ch):
            raise ChannelError(f"{ch.kind} channel does not act diagonally on the Pauli basis")
        ch = _with_diagonal_form(ch)
        out = ch if out is None else out.tensor(ch)
    out.kind = "nonunital_pauli" if not out.is_unital else "pauli"
    return out


def commute_through_clifford(p: Channel, w: np.ndarray) -> Channel:
    """Return ``Q`` with ``W P(rho) W^dagger = Q(W rho W^dagger)`` for Clifford ``W``."""
    if getattr(p, "probs", None) is None:
        raise ChannelError("commute_through_clifford needs a Pauli channel built by pauli_channel")
    n = p.arity
    out = np.zeros_like(p.probs)
    for l, k in zip(*np.nonzero(p.probs)):
        q = clifford_conjugate(w, PauliString.from_ints(l, k, n))
        out[bits_to_int(q.x), bits_to_int(q.z)] += p.probs[l, k]
    return pauli_channel(out, strict=p.params.get("strict", False))


# -- readout ------------------------------------------------------------------

@dataclass(frozen=True)
class NoisyPovm:
    """Per-qubit readout confusion; ``rows[j][k, l]`` = P(outcome k | input l)."""

    rows: tuple

    def __post_init__(self):
        mats = []
        for m in self.rows:
            m = np.asarray(m, dtype=float)
            if m.shape != (2, 2):
                raise ChannelError("each confusion matrix must be 2x2")
            if np.any(m < 0) or np.max(np.abs(m.sum(axis=0) - 1)) > 1e-12:
                raise ChannelError("confusion columns must be probability vectors")
            if not (m[0, 0] > m[0, 1] and m[1, 1] > m[1, 0]):
                raise ChannelError("readout confusion is not diagonally dominant")
            m.setflags(write=False)
            mats.append(m)
        object.__setattr__(self, "rows", tuple(mats))

    @property
    def n(self) -> int:
        return len(self.rows)

    def local_effect(self, qubit: int, outcome: int) -> np.ndarray:
        m = self.rows[qubit]
        return np.diag([m[outcome, 0], m[outcome, 1]]).astype(complex)

    def effect(self, outcome: Sequence[int], qubits: Sequence[int] | None = None) -> np.ndarray:
        """Effect operator for the outcome string on the listed measured qubits."""
        qubits = range(self.n) if qubits is None else qubits
        out = np.ones((1, 1), dtype=complex)
        for q, z in zip(qubits, outcome):
            out = np.kron(out, self.local_effect(q, int(z)))
        return out

    def zero_effect(self, qubits: Sequence[int] | None = None) -> np.ndarray:
        qubits = list(range(self.n)) if qubits is None else list(qubits)
        return self.effect([0] * len(qubits), qubits)

    def confusion(self, qubits: Sequence[int] | None = None) -> np.ndarray:
        """Full classical confusion matrix over outcome strings of ``qubits``."""
        qubits = range(self.n) if qubits is None else qubits
        out = np.ones((1, 1))
        for q in qubits:
            out = np.kron(out, self.rows[q])
        return out


def measurement_noise(rows: Sequence[tuple[float, float]]) -> NoisyPovm:
    """Build a NoisyPovm from per-qubit ``(p00, p11)`` pairs."""
    mats = []
    for p00, p11 in rows:
        p00, p11 = _check_prob(p00, "p00"), _check_prob(p11, "p11")
        mats.append(np.array([[p00, 1 - p11], [1 - p00, p11]]))
    return NoisyPovm(tuple(mats))


def ideal_readout(n: int) -> NoisyPovm:
    return measurement_noise([(1.0, 1.0)] * n)


def effective_z(noisy: NoisyPovm, qubit: int) -> np.ndarray:
    if not 0 <= qubit < noisy.n:
        raise DimensionError(f"qubit {qubit} is not measured")
    m = noisy.rows[qubit]
    return np.diag([m[0, 0] - m[1, 0], -(m[1, 1] - m[0, 1])]).astype(complex)


def channel_from_kraus(kraus: Sequence[np.ndarray]) -> Channel:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    return Channel(kraus[0].shape[0].bit_length() - 1, kraus, "general")


"""Phase-exact algebra of n-qubit Pauli words.

A Pauli word is stored in X-before-Z normal form, ``i**phase * X^x Z^z``, where
``x`` and ``z`` are bit tuples and ``phase`` is an integer mod 4.  Qubit 0 is
the most significant bit of a computational-basis index, matching ``np.kron``
ordering.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.linalg import hadamard

from .errors import DimensionError, NotCliffordError

_PHASES = (1.0 + 0j, 1j, -1.0 + 0j, -1j)


def bits_to_int(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def int_to_bits(value: int, n: int) -> tuple[int, ...]:
    return tuple((value >> (n - 1 - j)) & 1 for j in range(n))


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


@dataclass(frozen=True)
class PauliString:
    """``i**phase * X^x Z^z`` on ``len(x)`` qubits."""

    x: tuple[int, ...]
    z: tuple[int, ...]
    phase: int = 0

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise DimensionError(f"x and z bit-vectors differ in length ({len(self.x)} vs {len(self.z)})")
        if len(self.x) < 1:
            raise DimensionError("a Pauli string needs at least one qubit")
        object.__setattr__(self, "x", tuple(int(b) & 1 for b in self.x))
        object.__setattr__(self, "z", tuple(int(b) & 1 for b in self.z))
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def coefficient(self) -> complex:
        return _PHASES[self.phase]

    @property
    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Phase-free label ``(x, z)`` used as a dictionary key."""
        return (self.x, self.z)

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls((0,) * n, (0,) * n, 0)

    @classmethod
    def from_ints(cls, x: int, z: int, n: int, phase: int = 0) -> PauliString:
        return cls(int_to_bits(x, n), int_to_bits(z, n), phase)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse a word such as ``"XIZ"`` or ``"-iYX"``.

        ``Y`` is taken as the Hermitian operator ``i X Z``.
        """
        phase = 0
        body = label.strip()
        if body.startswith("-"):
            phase += 2
            body = body[1:]
        elif body.startswith("+"):
            body = body[1:]
        if body.startswith("i"):
            phase += 1
            body = body[1:]
        x, z = [], []
        for ch in body:
            if ch == "I":
                x.append(0), z.append(0)
            elif ch == "X":
                x.append(1), z.append(0)
            elif ch == "Z":
                x.append(0), z.append(1)
            elif ch == "Y":
                x.append(1), z.append(1)
                phase += 1
            else:
                raise ValueError(f"unknown Pauli letter {ch!r} in {label!r}")
        return cls(tuple(x), tuple(z), phase)

    def label(self) -> str:
        """Hermitian-letter label with the leftover phase as a prefix."""
        letters = []
        phase = self.phase
        for xb, zb in zip(self.x, self.z):
            if xb and zb:
                letters.append("Y")
                phase -= 1  # XZ = -iY
            elif xb:
                letters.append("X")
            elif zb:
                letters.append("Z")
            else:
                letters.append("I")
        prefix = {0: "", 1: "i", 2: "-", 3: "-i"}[phase % 4]
        return prefix + "".join(letters)

    def __repr__(self) -> str:
        return f"PauliString({self.label()!r})"

    def __mul__(self, other: PauliString) -> PauliString:
        return pauli_mul(self, other)

    def to_matrix(self) -> np.ndarray:
        return self.coefficient * pauli_matrix(bits_to_int(self.x), bits_to_int(self.z), self.n)

    def is_identity(self) -> bool:
        return not any(self.x) and not any(self.z)

    def is_hermitian(self) -> bool:
        # (XZ)^dagger = ZX = (-1)^{x.z} XZ, so hermiticity fixes the phase parity.
        overlap = sum(a & b for a, b in zip(self.x, self.z))
        return (self.phase + overlap) % 2 == 0

    def hermitian(self) -> PauliString:
        """Same word with the phase chosen so the operator is Hermitian and has sign +."""
        overlap = sum(a & b for a, b in zip(self.x, self.z))
        return PauliString(self.x, self.z, overlap % 4)


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    """Normal-form product ``a @ b``.

    Uses ``Z^k X^l = (-1)^{k.l} X^l Z^k`` to move ``b``'s X block left.
    """
    if a.n != b.n:
        raise DimensionError(f"cannot multiply Pauli strings on {a.n} and {b.n} qubits")
    sign = sum(kz & lx for kz, lx in zip(a.z, b.x)) & 1
    x = tuple(p ^ q for p, q in zip(a.x, b.x))
    z = tuple(p ^ q for p, q in zip(a.z, b.z))
    return PauliString(x, z, a.phase + b.phase + 2 * sign)


@functools.lru_cache(maxsize=4096)
def _pauli_matrix_cached(x: int, z: int, n: int) -> np.ndarray:
    d = 1 << n
    cols = np.arange(d)
    rows = cols ^ x
    signs = np.array([1.0 - 2.0 * _parity(z & c) for c in range(d)])
    mat = np.zeros((d, d), dtype=complex)
    mat[rows, cols] = signs
    mat.setflags(write=False)
    return mat


def pauli_matrix(x: int, z: int, n: int) -> np.ndarray:
    """Dense matrix of ``X^x Z^z`` with ``x`` and ``z`` given as integers."""
    return _pauli_matrix_cached(int(x), int(z), int(n))


def all_paulis(n: int) -> Iterator[PauliString]:
    for x in range(1 << n):
        for z in range(1 << n):
            yield PauliString.from_ints(x, z, n)


def num_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class PauliExpansion:
    """Coefficients of an operator in the ``X^l Z^k`` basis.

    ``array[l, k]`` holds the coefficient of ``X^l Z^k`` with ``l`` and ``k``
    encoded as integers.
    """

    n: int
    array: np.ndarray

    @property
    def coeffs(self) -> dict[tuple[tuple[int, ...], tuple[int, ...]], complex]:
        out = {}
        for l, k in zip(*np.nonzero(np.abs(self.array) > 1e-15)):
            out[(int_to_bits(l, self.n), int_to_bits(k, self.n))] = complex(self.array[l, k])
        return out

    def coefficient(self, p: PauliString) -> complex:
        return complex(self.array[bits_to_int(p.x), bits_to_int(p.z)])

    def reconstruct(self) -> np.ndarray:
        d = 1 << self.n
        out = np.zeros((d, d), dtype=complex)
        for l, k in zip(*np.nonzero(self.array)):
            out += self.array[l, k] * pauli_matrix(l, k, self.n)
        return out


def pauli_expand(op: np.ndarray, n: int | None = None) -> PauliExpansion:
    """Expand ``op`` as ``sum_{l,k} c_{lk} X^l Z^k``.

    ``c_{lk} = Tr[(X^l Z^k)^dagger op] / 2^n``, computed per X-pattern with a
    Walsh-Hadamard transform over the Z-pattern.
    """
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {op.shape}")
    d = op.shape[0]
    nq = num_qubits_of(d)
    if n is not None and n != nq:
        raise DimensionError(f"operator of dimension {d} does not act on {n} qubits")
    had = hadamard(d)
    cols = np.arange(d)
    out = np.empty((d, d), dtype=complex)
    for l in range(d):
        out[l] = had @ op[cols ^ l, cols]
    return PauliExpansion(nq, out / d)


def _match_pauli(m: np.ndarray, n: int, atol: float) -> PauliString | None:
    """Return the Pauli word equal to ``m`` within ``atol``, if any."""
    d = 1 << n
    col0 = m[:, 0]
    x = int(np.argmax(np.abs(col0)))
    ph = col0[x]
    idx = [k for k, c in enumerate(_PHASES) if abs(ph - c) <= atol]
    if not idx:
        return None
    z = 0
    for j in range(n):
        c = 1 << (n - 1 - j)
        if abs(m[c ^ x, c] + ph) <= atol:
            z |= c
        elif abs(m[c ^ x, c] - ph) > atol:
            return None
    cand = PauliString.from_ints(x, z, n, idx[0])
    if np.max(np.abs(cand.to_matrix() - m)) > atol:
        return None
    return cand


def _check_unitary(c: np.ndarray, atol: float = 1e-10) -> int:
    c = np.asarray(c)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {c.shape}")
    n = num_qubits_of(c.shape[0])
    if np.max(np.abs(c.conj().T @ c - np.eye(c.shape[0]))) > atol:
        raise NotCliffordError("matrix is not unitary")
    return n


def is_clifford(c: np.ndarray, atol: float = 1e-10) -> bool:
    try:
        n = _check_unitary(c, atol)
    except NotCliffordError:
        return False
    cd = c.conj().T
    for j in range(n):
        bit = 1 << (n - 1 - j)
        for x, z in ((bit, 0), (0, bit)):
            if _match_pauli(c @ pauli_matrix(x, z, n) @ cd, n, atol) is None:
                return False
    return True


def clifford_conjugate(c: np.ndarray, p: PauliString, atol: float = 1e-10) -> PauliString:
    """Return ``q`` with ``c p c^dagger = q`` exactly, phase included.

    Raises NotCliffordError unless ``c`` maps every single-qubit generator to a
    Pauli word.
    """
    c = np.asarray(c, dtype=complex)
    n = _check_unitary(c, atol)
    if n != p.n:
        raise DimensionError(f"unitary acts on {n} qubits, Pauli string on {p.n}")
    if not is_clifford(c, atol):
        raise NotCliffordError("unitary does not normalize the Pauli group")
    q = _match_pauli(c @ p.to_matrix() @ c.conj().T, n, atol)
    if q is None:  # pragma: no cover - excluded by the generator check
        raise NotCliffordError("conjugated operator is not a Pauli word")
    return q

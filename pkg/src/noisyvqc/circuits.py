"""Gate sequences with optional trainable rotation slots."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, PreconditionError
from .sim import apply_left, check_unitary

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

H_MAT = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X_MAT = PAULI["x"]
S_MAT = np.diag([1, 1j])
T_MAT = np.diag([1, np.exp(1j * np.pi / 4)])
CNOT_MAT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def rotation(axis: str, theta: float) -> np.ndarray:
    """``exp(-i theta sigma / 2)``."""
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * PAULI[axis]


def phase_gate(phi: float) -> np.ndarray:
    return np.diag([1, np.exp(1j * phi)])


@dataclass(frozen=True, eq=False)
class Gate:
    """A fixed unitary, or a rotation ``exp(-i (sign*alpha[slot] + offset) sigma/2)``."""

    name: str
    targets: tuple[int, ...]
    fixed: np.ndarray | None = None
    axis: str | None = None
    slot: int | None = None
    sign: int = 1
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.fixed is None:
            if self.axis not in PAULI:
                raise ValueError(f"rotation gate {self.name!r} needs an axis in x, y, z")
            if len(self.targets) != 1:
                raise DimensionError("rotation gates act on one qubit")
        else:
            m = check_unitary(self.fixed)
            if m.shape[0] != 1 << len(self.targets):
                raise DimensionError(f"gate {self.name!r}: {m.shape[0]}-dim matrix on {len(self.targets)} qubits")
            object.__setattr__(self, "fixed", m)

    @property
    def is_parametric(self) -> bool:
        return self.slot is not None

    def angle(self, params: Sequence[float] | None) -> float:
        base = 0.0 if self.slot is None else float(params[self.slot])
        return self.sign * base + self.offset

    def matrix(self, params: Sequence[float] | None = None) -> np.ndarray:
        if self.fixed is not None:
            return self.fixed
        return rotation(self.axis, self.angle(params))

    def dagger(self) -> Gate:
        if self.fixed is not None:
            if np.allclose(self.fixed, self.fixed.conj().T, atol=1e-14):
                return self
            name = self.name[:-1] if self.name.endswith("†") else self.name + "†"
            return replace(self, name=name, fixed=self.fixed.conj().T)
        return replace(self, sign=-self.sign, offset=-self.offset)

    def bound(self, params: Sequence[float] | None) -> Gate:
        if self.fixed is not None:
            return self
        return Gate(f"r{self.axis}", self.targets, axis=self.axis, offset=self.angle(params))

    def moved(self, mapping: Sequence[int]) -> Gate:
        return replace(self, targets=tuple(mapping[t] for t in self.targets))


@dataclass
class GateSequence:
    """Ordered gates on ``n`` qubits; the first gate acts first."""

    n: int
    gates: list[Gate] = field(default_factory=list)
    num_params: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError("a gate sequence needs at least one qubit")
        self.gates = list(self.gates)
        for g in self.gates:
            for t in g.targets:
                if not 0 <= t < self.n:
                    raise DimensionError(f"gate {g.name!r} target {t} outside {self.n} qubits")
            if len(set(g.targets)) != len(g.targets):
                raise DimensionError(f"gate {g.name!r} has repeated targets")
        slots = [g.slot for g in self.gates if g.slot is not None]
        needed = max(slots) + 1 if slots else 0
        if self.num_params is None:
            self.num_params = needed
        elif self.num_params < needed:
            raise DimensionError("declared parameter count is smaller than the largest slot")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def _check_params(self, params) -> np.ndarray | None:
        if self.num_params == 0:
            return None if params is None else np.asarray(params, dtype=float)
        if params is None:
            raise DimensionError(f"sequence has {self.num_params} parameters but none were given")
        params = np.asarray(params, dtype=float)
        if params.shape != (self.num_params,):
            raise DimensionError(f"expected {self.num_params} parameters, got shape {params.shape}")
        if not np.all(np.isfinite(params)):
            raise ValueError("parameters must be finite")
        return params

    def unitary(self, params=None) -> np.ndarray:
        params = self._check_params(params)
        d = 1 << self.n
        t = np.eye(d, dtype=complex).reshape((2,) * self.n + (d,))
        for g in self.gates:
            t = apply_left(t, g.matrix(params), g.targets)
        return t.reshape(d, d)

    def adjoint(self) -> GateSequence:
        return GateSequence(self.n, [g.dagger() for g in reversed(self.gates)], self.num_params)

    def bind(self, params) -> GateSequence:
        params = self._check_params(params)
        return GateSequence(self.n, [g.bound(params) for g in self.gates], 0)

    def embedded(self, n: int, mapping: Sequence[int] | None = None) -> GateSequence:
        """Same gates on a larger register; qubit ``q`` goes to ``mapping[q]``."""
        mapping = list(range(self.n)) if mapping is None else list(mapping)
        return GateSequence(n, [g.moved(mapping) for g in self.gates], self.num_params)

    def then(self, other: GateSequence) -> GateSequence:
        if other.n != self.n:
            raise DimensionError("cannot concatenate sequences on different registers")
        return GateSequence(self.n, self.gates + other.gates, max(self.num_params, other.num_params))

    def count(self, name: str) -> int:
        return sum(1 for g in self.gates if g.name == name)

    @property
    def cnot_count(self) -> int:
        return self.count("cnot")

    @classmethod
    def from_unitary(cls, u: np.ndarray, name: str = "U") -> GateSequence:
        u = check_unitary(u)
        n = u.shape[0].bit_length() - 1
        if 1 << n != u.shape[0]:
            raise DimensionError("unitary dimension is not a power of two")
        return cls(n, [Gate(name, tuple(range(n)), fixed=u)])


# -- gate constructors -------------------------------------------------------

def h(q: int) -> Gate:
    return Gate("h", (q,), fixed=H_MAT)


def x(q: int) -> Gate:
    return Gate("x", (q,), fixed=X_MAT)


def s(q: int) -> Gate:
    return Gate("s", (q,), fixed=S_MAT)


def t(q: int) -> Gate:
    return Gate("t", (q,), fixed=T_MAT)


def tdg(q: int) -> Gate:
    return Gate("t†", (q,), fixed=T_MAT.conj().T)


def p(q: int, phi: float) -> Gate:
    return Gate("p", (q,), fixed=phase_gate(phi))


def cnot(control: int, target: int) -> Gate:
    if control == target:
        raise DimensionError("CNOT control and target coincide")
    return Gate("cnot", (control, target), fixed=CNOT_MAT)


def rot(axis: str, q: int, slot: int | None = None, angle: float = 0.0) -> Gate:
    """Trainable rotation when ``slot`` is given, otherwise a fixed rotation by ``angle``."""
    return Gate(f"r{axis}", (q,), axis=axis, slot=slot, offset=0.0 if slot is not None else angle)


def unitary_gate(u: np.ndarray, targets: Iterable[int], name: str = "u") -> Gate:
    return Gate(name, tuple(targets), fixed=np.asarray(u, dtype=complex))


def is_single_qubit(g: Gate) -> bool:
    return len(g.targets) == 1


def ensure_cnot_skeleton(seq: GateSequence) -> None:
    """Raise unless every gate is a one-qubit unitary or a CNOT."""
    for g in seq.gates:
        if len(g.targets) == 1:
            continue
        if g.fixed is not None and len(g.targets) == 2 and np.allclose(g.fixed, CNOT_MAT, atol=1e-12):
            continue
        raise PreconditionError(f"gate {g.name!r} is neither a one-qubit gate nor a CNOT; expand it first")

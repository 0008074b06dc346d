"""Trainable ansatz constructions built from dressed CNOTs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from .circuits import CNOT_MAT, Gate, GateSequence, cnot, ensure_cnot_skeleton, rot, rotation
from .errors import DimensionError, PreconditionError

STRUCTURES = ("alternating_pair", "target_inspired", "custom")


@dataclass(frozen=True)
class ParameterVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("angles must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class Ansatz:
    template: GateSequence
    structure: str = "custom"
    witness: np.ndarray | None = None
    meta: tuple = ()

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown ansatz structure {self.structure!r}")
        slots = [g.slot for g in self.template.gates if g.slot is not None]
        if sorted(slots) != list(range(self.template.num_params)):
            raise DimensionError("every parameter slot must be used exactly once")

    @property
    def n(self) -> int:
        return self.template.n

    @property
    def param_count(self) -> int:
        return self.template.num_params

    @property
    def cnot_count(self) -> int:
        return self.template.cnot_count

    def describe(self) -> dict:
        return {"structure": self.structure, "n": self.n, "param_count": self.param_count,
                "cnots": self.cnot_count, **dict(self.meta)}


def single_qubit_gate(angles: Sequence[float]) -> np.ndarray:
    """``Ry(a3) Rz(a2) Ry(a1)``."""
    a1, a2, a3 = (float(a) for a in angles)
    if not np.all(np.isfinite([a1, a2, a3])):
        raise ValueError("angles must be finite")
    return rotation("y", a3) @ rotation("z", a2) @ rotation("y", a1)


def v_block(q: int, base: int) -> list[Gate]:
    """Gates of ``V(alpha)`` on qubit ``q`` reading slots ``base..base+2`` (first gate first)."""
    return [rot("y", q, base), rot("z", q, base + 1), rot("y", q, base + 2)]


def dressed_cnot(control: int, target: int, base: int = 0) -> list[Gate]:
    """CNOT with a trainable one-qubit gate on each wire before and after it.

    Slots ``base..base+11``: before-control, before-target, after-control,
    after-target, three angles each.
    """
    if control == target:
        raise DimensionError("dressed CNOT needs two distinct qubits")
    return (v_block(control, base) + v_block(target, base + 3) + [cnot(control, target)]
            + v_block(control, base + 6) + v_block(target, base + 9))


def euler_angles(u: np.ndarray) -> np.ndarray:
    """Angles ``(a1, a2, a3)`` with ``single_qubit_gate(a)`` equal to ``u`` up to phase."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise DimensionError("Euler decomposition needs a 2x2 unitary")
    m = u / np.sqrt(np.linalg.det(u))
    # Rx(pi/2) maps Ry -> Rz and Rz -> Ry(-.), turning the YZY form into ZYZ.
    g = rotation("x", np.pi / 2)
    mp = g @ m @ g.conj().T
    beta = 2 * np.arctan2(abs(mp[1, 0]), abs(mp[0, 0]))
    if abs(mp[0, 0]) < 1e-12:
        plus, minus = 0.0, 2 * np.angle(mp[1, 0])
    elif abs(mp[1, 0]) < 1e-12:
        plus, minus = 2 * np.angle(mp[1, 1]), 0.0
    else:
        plus, minus = 2 * np.angle(mp[1, 1]), 2 * np.angle(mp[1, 0])
    alpha, gamma = (plus + minus) / 2, (plus - minus) / 2
    return np.array([gamma, -beta, alpha])


def _pair_groups(n: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    first = [(i, i + 1) for i in range(0, n - 1, 2)]
    second = [(i, i + 1) for i in range(1, n - 1, 2)]
    return first, second


def alternating_pair(n: int, layers: int, orientation: str = "lower") -> Ansatz:
    """Layers of dressed CNOTs on alternating neighbour pairs.

    Pair groups ``(0,1),(2,3),...`` and ``(1,2),(3,4),...`` alternate, and each
    layer takes dressed CNOTs from the cycle until it holds ``n`` of them
    (one for ``n = 2``).  ``orientation="lower"`` puts the control on the lower
    index, ``"upper"`` on the higher one.
    """
    if n < 2:
        raise DimensionError("the alternating-pair ansatz needs at least two qubits")
    if layers < 1:
        raise ValueError("layers must be at least 1")
    if orientation not in ("lower", "upper"):
        raise ValueError("orientation must be 'lower' or 'upper'")
    first, second = _pair_groups(n)
    cycle = [first, second] if second else [first]
    per_layer = 1 if n == 2 else n
    pairs: list[tuple[int, int]] = []
    g = 0
    while len(pairs) < per_layer * layers:
        pairs.extend(cycle[g % len(cycle)])
        g += 1
    pairs = pairs[: per_layer * layers]
    gates: list[Gate] = []
    for k, (a, b) in enumerate(pairs):
        c, t = (a, b) if orientation == "lower" else (b, a)
        gates += dressed_cnot(c, t, 12 * k)
    seq = GateSequence(n, gates, 12 * len(pairs))
    return Ansatz(seq, "alternating_pair", np.zeros(seq.num_params),
                  (("layers", layers), ("orientation", orientation), ("pairs", tuple(pairs))))


def target_inspired(u: GateSequence) -> Ansatz:
    """Dressed-CNOT skeleton copied from ``u`` plus a witness parameter vector.

    One-qubit gates of ``u`` are dropped; those on a wire between two CNOTs
    are folded into the before-block of the next dressed CNOT, trailing ones
    into the after-block of the last CNOT on that wire.  Wires never touched
    by a CNOT keep one trainable block if ``u`` acts on them.
    """
    ensure_cnot_skeleton(u)
    if u.num_params:
        raise PreconditionError("target sequence must be fully bound")
    n = u.n
    pending = [np.eye(2, dtype=complex) for _ in range(n)]
    touched_1q = [False] * n
    last_after: dict[int, int] = {}  # qubit -> witness offset of its latest after-block
    gates: list[Gate] = []
    witness: list[float] = []
    base = 0
    for g in u.gates:
        if len(g.targets) == 1:
            q = g.targets[0]
            pending[q] = g.matrix(None) @ pending[q]
            touched_1q[q] = True
            continue
        c, t = g.targets
        gates += dressed_cnot(c, t, base)
        witness += list(euler_angles(pending[c])) + list(euler_angles(pending[t])) + [0.0] * 6
        pending[c] = np.eye(2, dtype=complex)
        pending[t] = np.eye(2, dtype=complex)
        last_after[c] = base + 6
        last_after[t] = base + 9
        base += 12
    for q in range(n):
        if q in last_after:
            off = last_after[q]
            witness[off:off + 3] = list(euler_angles(pending[q]))
        elif touched_1q[q]:
            gates += v_block(q, base)
            witness += list(euler_angles(pending[q]))
            base += 3
    seq = GateSequence(n, gates, base)
    return Ansatz(seq, "target_inspired", np.array(witness), (("source_cnots", u.cnot_count),))


def bind(a: Ansatz, p) -> GateSequence:
    values = np.asarray(p, dtype=float).reshape(-1)
    if values.size != a.param_count:
        raise DimensionError(f"ansatz has {a.param_count} parameters, got {values.size}")
    return a.template.bind(values)


def unbind(a: Ansatz, seq: GateSequence) -> ParameterVector:
    """Recover the angle vector from a sequence produced by :func:`bind`."""
    if len(seq.gates) != len(a.template.gates):
        raise DimensionError("sequence does not match the ansatz template")
    out = np.zeros(a.param_count)
    for tg, g in zip(a.template.gates, seq.gates):
        if tg.slot is not None:
            if g.fixed is not None or g.axis != tg.axis:
                raise DimensionError("sequence does not match the ansatz template")
            out[tg.slot] = (g.offset - tg.offset) * tg.sign
    return ParameterVector(out)


def random_cnot_circuit(n: int, depth: int, rng: np.random.Generator) -> GateSequence:
    """Random alternation of one-qubit unitaries and CNOTs (used by completeness tests)."""
    gates: list[Gate] = []
    for _ in range(depth):
        q = int(rng.integers(n))
        gates.append(Gate("u1", (q,), fixed=unitary_group.rvs(2, random_state=rng)))
        if n > 1:
            c, t = rng.choice(n, size=2, replace=False)
            gates.append(Gate("cnot", (int(c), int(t)), fixed=CNOT_MAT))
    return GateSequence(n, gates)

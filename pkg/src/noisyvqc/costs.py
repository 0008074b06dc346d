"""Cost-evaluation circuits for unitary and fixed-input compiling.

A cost circuit is compiled into a :class:`Program`: a trunk of operations shared
by all measurement branches, plus one or more branches, each with its own tail
of operations, a diagonal POVM effect and a weight.  The cost is
``1 - sum_b weight_b * P_b(effect)``.

* HST: trunk = E, tau1, W, tau2; one branch = E^dagger, all-zero effect on 2n qubits.
* LHST: same trunk; branch j = (E^(j))^dagger, zero effect on A_j B_j, weight 1/n.
* LET: trunk = tau1, W; one branch with the all-zero effect on n qubits.
* LLET: same trunk; branch j has the zero effect on qubit j, weight 1/n.

The weighted combinations ``q C_HST + (1-q) C_LHST`` (kind ``"fumc"``) and
``q C_LET + (1-q) C_LLET`` (kind ``"fisc"``) reuse the shared trunk.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuits import CNOT_MAT, H_MAT, Gate, GateSequence, rotation
from .errors import DimensionError, NumericalError
from .sim import DensityState, apply_left, clamp_probability, conjugate_raw, make_rng

MAX_QUBITS = 3
FUMC_KINDS = ("hst", "lhst", "fumc")
FISC_KINDS = ("let", "llet", "fisc")
HALF_PI = np.pi / 2


@dataclass(frozen=True)
class Shots:
    """Sampled evaluation with ``n`` shots per circuit and a seed (int or tuple)."""

    n: int
    seed: object = 0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("shots must be at least 1")


@dataclass(frozen=True)
class CostEstimate:
    value: float
    mode: str = "exact"
    shots_used: int = 0
    std_error: float | None = None
    branch_probabilities: tuple[float, ...] = ()

    def __post_init__(self):
        if not -1e-9 <= self.value <= 1 + 1e-9:
            raise NumericalError(f"cost {self.value} outside [0, 1]")
        if self.mode == "sampled" and self.shots_used < 1:
            raise ValueError("sampled estimates need shots_used >= 1")


@dataclass
class Branch:
    ops: list
    effect: np.ndarray  # diagonal of the POVM effect on the full register
    weight: float
    measured: tuple[int, ...]
    label: str = ""


@dataclass
class Program:
    kind: str
    nreg: int
    trunk: list
    branches: list[Branch]
    num_params: int = 0
    noisy: bool = False
    readout: object = None
    depol_layers: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return 1 << self.nreg

    def branch_depol_product(self, b: int) -> float:
        """Product of all global depolarizing parameters seen by branch ``b``."""
        prod = 1.0
        for op in self.trunk + self.branches[b].ops:
            if op[0] == "d":
                prod *= op[1]
        return prod


# -- register helpers ----------------------------------------------------------------

def as_sequence(u) -> GateSequence:
    if isinstance(u, GateSequence):
        return u
    return GateSequence.from_unitary(np.asarray(u, dtype=complex))


def _zero_effect_diag(nreg: int, measured: Sequence[int], readout) -> np.ndarray:
    out = np.ones(1)
    for q in range(nreg):
        if q in measured:
            if readout is None:
                local = np.array([1.0, 0.0])
            else:
                m = readout.rows[q]
                local = np.array([m[0, 0], m[0, 1]])
        else:
            local = np.ones(2)
        out = np.kron(out, local)
    return out


class _Builder:
    def __init__(self, nreg: int, noise, region_scope: str):
        self.nreg = nreg
        self.noise = noise
        self.ops: list = []

    def depol(self, ops):
        if self.noise is not None and self.noise.continuous_global_depol < 1.0:
            ops.append(("d", float(self.noise.continuous_global_depol)))

    def gate_noise(self, ops, gate_targets, which: str, region: str):
        nz = self.noise
        if nz is None or not nz.gate_noise:
            return
        if nz.gate_noise_scope == "entanglers" and region != "E":
            return
        gn = nz.gate_noise.get("1q" if len(gate_targets) == 1 else "2q")
        if gn is None:
            return
        for ch, span in (gn.pre if which == "pre" else gn.post):
            if span == "global":
                if ch.arity != self.nreg:
                    raise DimensionError(f"global gate noise of arity {ch.arity} on {self.nreg} qubits")
                ops.append(("c", ch, tuple(range(self.nreg))))
            elif span == "touched":
                ops.append(("c", ch, tuple(gate_targets)))
            else:
                for q in gate_targets:
                    ops.append(("c", ch, (q,)))

    def gate(self, ops, g: Gate | tuple, targets, region: str):
        self.gate_noise(ops, targets, "pre", region)
        if isinstance(g, Gate):
            if g.is_parametric:
                ops.append(("r", g, tuple(targets)))
            elif g.fixed is not None:
                ops.append(("u", g.fixed, tuple(targets)))
            else:
                ops.append(("u", g.matrix(None), tuple(targets)))
        else:
            ops.append(("u", np.asarray(g, dtype=complex), tuple(targets)))
        self.gate_noise(ops, targets, "post", region)
        self.depol(ops)

    def placements(self, ops, items, subsystems):
        for pl in items:
            qubits = subsystems[pl.subsystem]
            if pl.local is not None:
                qubits = tuple(qubits[i] for i in pl.local)
            ops.append(("c", pl.channel, tuple(qubits)))


def build_program(kind: str, u, v, noise=None, q: float | None = None, j: int | None = None) -> Program:
    """Compile one of the cost circuits.  ``v`` may carry trainable slots."""
    kind = kind.lower()
    u, v = as_sequence(u), as_sequence(v)
    if u.n != v.n:
        raise DimensionError(f"u acts on {u.n} qubits, v on {v.n}")
    n = u.n
    if n > MAX_QUBITS:
        raise DimensionError(f"at most {MAX_QUBITS} qubits are supported, got {n}")
    if u.num_params:
        raise DimensionError("the target sequence must not have free parameters")
    if noise is not None and noise.n != n:
        raise DimensionError(f"noise schedule is for {noise.n} qubits, circuit has {n}")
    if noise is not None and noise.is_identity:
        noise = None
    if j is not None and not 0 <= j < n:
        raise DimensionError(f"qubit index {j} out of range for {n} qubits")
    if kind in ("hst", "let"):
        q = 1.0
    elif kind in ("lhst", "llet"):
        q = 0.0
    elif kind in ("fumc", "fisc"):
        q = 0.5 if q is None else float(q)
        if not 0 <= q <= 1:
            raise ValueError("q must lie in [0, 1]")
    else:
        raise ValueError(f"unknown cost kind {kind!r}")
    fumc = kind in FUMC_KINDS
    if not fumc and noise is not None and noise.during_w_B:
        raise DimensionError("fixed-input circuits have no B register")
    nreg = 2 * n if fumc else n
    A = tuple(range(n))
    B = tuple(range(n, 2 * n))
    subs = {"AB": A + B, "A": A, "B": B}
    bld = _Builder(nreg, noise, "")
    readout = None if noise is None else noise.readout
    if readout is not None and readout.n != nreg:
        raise DimensionError(f"readout noise covers {readout.n} qubits, circuit measures {nreg}")
    trunk: list = []
    if fumc:
        for a, b in zip(A, B):
            bld.gate(trunk, H_MAT, (a,), "E")
            bld.gate(trunk, CNOT_MAT, (a, b), "E")
    if noise is not None:
        bld.placements(trunk, noise.tau1, subs)
    w_gates = list(u.gates) + list(v.adjoint().gates)
    for g in w_gates:
        bld.gate(trunk, g, g.targets, "W")
        if noise is not None:
            bld.placements(trunk, noise.during_w_A, subs)
            bld.placements(trunk, noise.during_w_B, subs)
    if noise is not None:
        bld.placements(trunk, noise.tau2, subs)

    branches: list[Branch] = []
    if q > 0 and j is None:
        ops: list = []
        if fumc:
            for a, b in reversed(list(zip(A, B))):
                bld.gate(ops, CNOT_MAT, (a, b), "E")
                bld.gate(ops, H_MAT, (a,), "E")
        measured = tuple(range(nreg))
        branches.append(Branch(ops, _zero_effect_diag(nreg, measured, readout), q, measured,
                               "hst" if fumc else "let"))
    if q < 1 or j is not None:
        local = range(n) if j is None else [j]
        weight = 1.0 if j is not None else (1 - q) / n
        for jj in local:
            ops = []
            if fumc:
                bld.gate(ops, CNOT_MAT, (A[jj], B[jj]), "E")
                bld.gate(ops, H_MAT, (A[jj],), "E")
                measured = (A[jj], B[jj])
            else:
                measured = (jj,)
            branches.append(Branch(ops, _zero_effect_diag(nreg, measured, readout), weight, measured,
                                   f"{'lhst' if fumc else 'llet'}[{jj}]"))
    return Program(kind, nreg, trunk, branches, v.num_params, noise is not None, readout)


# -- execution ------------------------------------------------------------------------------

def _apply_op(mat: np.ndarray, op, nreg: int, params) -> np.ndarray:
    tag = op[0]
    if tag == "u":
        return conjugate_raw(mat, op[1], op[2], nreg)
    if tag == "r":
        return conjugate_raw(mat, op[1].matrix(params), op[2], nreg)
    if tag == "c":
        return op[1].apply_raw(mat, op[2], nreg)
    if tag == "d":
        p = op[1]
        out = p * mat
        out[np.diag_indices_from(out)] += (1 - p) * np.trace(mat) / mat.shape[0]
        return out
    raise ValueError(f"unknown op {tag!r}")


def _adjoint_op(mat: np.ndarray, op, nreg: int, params) -> np.ndarray:
    tag = op[0]
    if tag == "u":
        return conjugate_raw(mat, op[1].conj().T, op[2], nreg)
    if tag == "r":
        return conjugate_raw(mat, op[1].matrix(params).conj().T, op[2], nreg)
    if tag == "c":
        return op[1].adjoint_raw(mat, op[2], nreg)
    return _apply_op(mat, op, nreg, params)


def run_ops(mat: np.ndarray, ops, nreg: int, params=None) -> np.ndarray:
    for op in ops:
        mat = _apply_op(mat, op, nreg, params)
    return mat


def run_ops_adjoint(mat: np.ndarray, ops, nreg: int, params=None) -> np.ndarray:
    for op in reversed(ops):
        mat = _adjoint_op(mat, op, nreg, params)
    return mat


def _run_pure(psi: np.ndarray, ops, nreg: int, params) -> np.ndarray:
    t = psi.reshape((2,) * nreg)
    for op in ops:
        if op[0] == "u":
            t = apply_left(t, op[1], op[2])
        elif op[0] == "r":
            t = apply_left(t, op[1].matrix(params), op[2])
        else:
            raise ValueError("pure-state execution met a noise operation")
    return t.reshape(-1)


def _zero_state(nreg: int) -> np.ndarray:
    mat = np.zeros((1 << nreg, 1 << nreg), dtype=complex)
    mat[0, 0] = 1
    return mat


def branch_probabilities(prog: Program, params=None, debug: bool = False) -> np.ndarray:
    """Exact probability of the all-zero outcome for every branch."""
    params = None if params is None else np.asarray(params, dtype=float)
    if not prog.noisy:
        psi = np.zeros(prog.dim, dtype=complex)
        psi[0] = 1
        psi = _run_pure(psi, prog.trunk, prog.nreg, params)
        out = []
        for br in prog.branches:
            amp = _run_pure(psi, br.ops, prog.nreg, params)
            out.append(clamp_probability(float(np.dot(br.effect, np.abs(amp) ** 2))))
        return np.array(out)
    mat = _zero_state(prog.nreg)
    for op in prog.trunk:
        mat = _apply_op(mat, op, prog.nreg, params)
        if debug:
            DensityState(mat).validate()
    out = []
    for br in prog.branches:
        m = run_ops(mat, br.ops, prog.nreg, params)
        if debug:
            DensityState(m).validate()
        out.append(clamp_probability(float(np.dot(br.effect, np.diag(m).real))))
    return np.array(out)


def final_states(prog: Program, params=None) -> list[np.ndarray]:
    mat = run_ops(_zero_state(prog.nreg), prog.trunk, prog.nreg, params)
    return [run_ops(mat, br.ops, prog.nreg, params) for br in prog.branches]


def sample_fidelity(probs, weights, shots, rng: np.random.Generator) -> tuple[float, float]:
    """Shot estimate of ``sum_b w_b p_b`` and its single-shot variance.

    Every shot picks branch ``b`` with probability ``w_b / sum(w)`` and records
    whether its measured qubits all read zero.
    """
    weights = np.asarray(weights, dtype=float)
    total = float(weights.sum())
    shots = int(shots)
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, 1.0)
    if len(probs) == 1:
        hits = rng.binomial(shots, probs[0])
    else:
        alloc = rng.multinomial(shots, weights / total)
        hits = rng.binomial(alloc, probs).sum()
    f = hits / shots
    return total * f, total**2 * f * (1 - f)


def evaluate_program(prog: Program, params=None, mode="exact", debug: bool = False) -> CostEstimate:
    probs = branch_probabilities(prog, params, debug)
    weights = np.array([b.weight for b in prog.branches])
    if mode == "exact" or mode is None:
        value = 1.0 - float(weights @ probs)
        return CostEstimate(min(max(value, 0.0), 1.0), "exact", 0, None, tuple(probs))
    if not isinstance(mode, Shots):
        raise ValueError(f"mode must be 'exact' or Shots, got {mode!r}")
    fid, var = sample_fidelity(probs, weights, mode.n, make_rng(mode.seed))
    return CostEstimate(min(max(1.0 - fid, 0.0), 1.0), "sampled", int(mode.n), float(np.sqrt(var / mode.n)),
                        tuple(probs))


def _cost(kind, u, v, noise, mode, params=None, q=None, j=None, debug=False) -> CostEstimate:
    prog = build_program(kind, u, v, noise, q=q, j=j)
    return evaluate_program(prog, params, mode, debug)


def hst_cost(u, v, noise=None, mode="exact", params=None) -> CostEstimate:
    """``1 - |Tr(V^dagger U)|^2 / d^2`` when noiseless."""
    return _cost("hst", u, v, noise, mode, params)


def lhst_cost(u, v, noise=None, mode="exact", j: int | None = None, params=None) -> CostEstimate:
    """``1 - (1/n) sum_j F^(j)``; with ``j`` given, ``1 - F^(j)``."""
    return _cost("lhst", u, v, noise, mode, params, j=j)


def let_cost(u, v, noise=None, mode="exact", params=None) -> CostEstimate:
    """``1 - |<0|V^dagger U|0>|^2`` when noiseless."""
    return _cost("let", u, v, noise, mode, params)


def llet_cost(u, v, noise=None, mode="exact", j: int | None = None, params=None) -> CostEstimate:
    return _cost("llet", u, v, noise, mode, params, j=j)


def weighted_cost(q: float, a: CostEstimate, b: CostEstimate) -> CostEstimate:
    """``q a + (1 - q) b``; standard errors add in quadrature."""
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    value = q * a.value + (1 - q) * b.value
    sampled = a.mode == "sampled" or b.mode == "sampled"
    err = None
    if sampled:
        ea, eb = a.std_error or 0.0, b.std_error or 0.0
        err = float(np.hypot(q * ea, (1 - q) * eb))
    return CostEstimate(value, "sampled" if sampled else "exact", a.shots_used + b.shots_used, err)


def haar_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def average_fidelity(u, v, samples: int, seed, return_error: bool = False):
    """Monte-Carlo average of ``|<psi|V^dagger U|psi>|^2`` over Haar-random states."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    w = as_sequence(v).unitary().conj().T @ as_sequence(u).unitary()
    d = w.shape[0]
    rng = make_rng(seed)
    psi = rng.normal(size=(samples, d)) + 1j * rng.normal(size=(samples, d))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    vals = np.abs(np.einsum("si,ij,sj->s", psi.conj(), w, psi)) ** 2
    mean = float(vals.mean())
    if return_error:
        return mean, float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return mean


def _bell_vector(n: int) -> np.ndarray:
    """``E|0>`` on ``A_1..A_n B_1..B_n``: ``2^{-n/2} sum_x |x>_A |x>_B``."""
    d = 1 << n
    phi = np.zeros(d * d, dtype=complex)
    phi[np.arange(d) * d + np.arange(d)] = 1 / np.sqrt(d)
    return phi


def _pair_projector(n: int, j: int) -> np.ndarray:
    """``|Phi^(j)><Phi^(j)|`` on ``A_j B_j`` tensored with identity, on 2n qubits."""
    d2 = 1 << (2 * n)
    proj = np.zeros((d2, d2), dtype=complex)
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    pair = np.outer(bell, bell.conj()).reshape(2, 2, 2, 2)
    t = np.eye(d2, dtype=complex).reshape((2,) * (2 * n) + (d2,))
    t = apply_left(t, pair.reshape(4, 4), (j, n + j))
    proj = t.reshape(d2, d2)
    return proj


def effective_hamiltonian(kind: str, u) -> np.ndarray:
    """Effective Hamiltonian whose ground space is the set of exact compilations.

    ``LET`` and ``LLET`` act on n qubits, ``HST`` and ``LHST`` on 2n qubits.
    """
    kind = kind.upper()
    uu = as_sequence(u).unitary()
    n = as_sequence(u).n
    if n > MAX_QUBITS:
        raise DimensionError(f"at most {MAX_QUBITS} qubits are supported")
    d = 1 << n
    if kind == "LET":
        col = uu[:, 0]
        return np.eye(d) - np.outer(col, col.conj())
    if kind == "LLET":
        acc = np.zeros((d, d), dtype=complex)
        for j in range(n):
            p0 = np.ones(1)
            for q in range(n):
                p0 = np.kron(p0, [1.0, 0.0] if q == j else [1.0, 1.0])
            acc += uu @ np.diag(p0) @ uu.conj().T
        return np.eye(d) - acc / n
    big = np.kron(uu, np.eye(d))
    if kind == "HST":
        chi = big @ _bell_vector(n)
        return np.eye(d * d) - np.outer(chi, chi.conj())
    if kind == "LHST":
        acc = sum(_pair_projector(n, j) for j in range(n)) / n
        return np.eye(d * d) - big @ acc @ big.conj().T
    raise ValueError(f"unknown Hamiltonian kind {kind!r}")


def choi_state(v) -> np.ndarray:
    vv = as_sequence(v).unitary()
    d = vv.shape[0]
    return np.kron(vv, np.eye(d)) @ _bell_vector(as_sequence(v).n)


# -- variational cost with cached parameter-shift terms ------------------------------------

class VariationalCost:
    """Cost of compiling ``u`` with a trainable sequence ``ansatz``.

    Holds a noisy program (used for training) and a noiseless program (used to
    report the noiseless cost at the same parameters).
    """

    def __init__(self, kind: str, u, ansatz: GateSequence, noise=None, q: float | None = None):
        self.kind = kind.lower()
        self.u = as_sequence(u)
        self.ansatz = ansatz
        self.noise = noise
        self.q = q
        self.program = build_program(self.kind, self.u, ansatz, noise, q=q)
        self.clean = build_program(self.kind, self.u, ansatz, None, q=q)
        self.num_params = ansatz.num_params
        self.weights = np.array([b.weight for b in self.program.branches])
        self.positions = [(i, op[1].slot) for i, op in enumerate(self.program.trunk) if op[0] == "r"]
        slots = [s for _, s in self.positions]
        self.single_use = len(slots) == len(set(slots))
        for br in self.program.branches:
            if any(op[0] == "r" for op in br.ops):
                raise ValueError("trainable gates must sit in the shared trunk")

    @property
    def num_branches(self) -> int:
        return len(self.program.branches)

    def value(self, params) -> float:
        return evaluate_program(self.program, params).value

    def noiseless(self, params) -> float:
        return evaluate_program(self.clean, params).value

    def estimate(self, params, shots: int, seed) -> CostEstimate:
        return evaluate_program(self.program, params, Shots(shots, seed))

    def shift_probabilities(self, params) -> np.ndarray:
        return self.shift_terms(params)[0]

    def shift_terms(self, params) -> tuple[np.ndarray, np.ndarray]:
        """``(out, base)`` where ``base[b]`` is the unshifted probability of branch ``b`` and ``out[i, s, b]``: zero-outcome probability of branch ``b`` with slot ``i``
        shifted by ``+pi/2`` (``s=0``) or ``-pi/2`` (``s=1``).

        Uses one forward pass storing the state before each trainable gate and one
        backward (Heisenberg) pass per branch storing the effect after it.  A slot
        used by several gates has its per-gate terms summed, which is what the
        shift rule needs for the total derivative.
        """
        params = np.asarray(params, dtype=float)
        prog = self.program
        nreg = prog.nreg
        pre = {}
        if prog.noisy:
            mat = _zero_state(nreg)
            for i, op in enumerate(prog.trunk):
                if op[0] == "r":
                    pre[i] = mat
                mat = _apply_op(mat, op, nreg, params)
            end_state = mat
        else:
            psi = np.zeros(prog.dim, dtype=complex)
            psi[0] = 1
            t = psi
            for i, op in enumerate(prog.trunk):
                if op[0] == "r":
                    pre[i] = t
                t = _run_pure(t, [op], nreg, params)
            end_state = t
        base = []
        for br in prog.branches:
            if prog.noisy:
                m = run_ops(end_state, br.ops, nreg, params)
                base.append(float(np.dot(br.effect, np.diag(m).real)))
            else:
                amp = _run_pure(end_state, br.ops, nreg, params)
                base.append(float(np.dot(br.effect, np.abs(amp) ** 2)))
        base = np.clip(base, 0.0, 1.0)
        post = [dict() for _ in prog.branches]
        for b, br in enumerate(prog.branches):
            eff = np.diag(br.effect).astype(complex)
            eff = run_ops_adjoint(eff, br.ops, nreg, params)
            for i in range(len(prog.trunk) - 1, -1, -1):
                op = prog.trunk[i]
                if op[0] == "r":
                    post[b][i] = eff
                eff = _adjoint_op(eff, op, nreg, params)
        out = np.zeros((self.num_params, 2, len(prog.branches)))
        for i, slot in self.positions:
            g = prog.trunk[i][1]
            targets = prog.trunk[i][2]
            for s, shift in enumerate((HALF_PI, -HALF_PI)):
                ang = g.sign * (params[slot] + shift) + g.offset
                r = rotation(g.axis, ang)
                if prog.noisy:
                    rho = conjugate_raw(pre[i], r, targets, nreg)
                    for b in range(len(prog.branches)):
                        out[slot, s, b] += float(np.real(np.sum(post[b][i] * rho.T)))
                else:
                    t = apply_left(pre[i].reshape((2,) * nreg), r, targets).reshape(-1)
                    for b in range(len(prog.branches)):
                        out[slot, s, b] += float(np.real(t.conj() @ post[b][i] @ t))
        # per-gate terms were summed; the constant part of each extra occurrence must go
        counts = np.bincount([slot for _, slot in self.positions], minlength=self.num_params)
        if np.any(counts > 1):
            extra = np.clip(counts - 1, 0, None)[:, None, None]
            out -= extra * base[None, None, :]
        return out, base

    def gradient(self, params) -> np.ndarray:
        sp = self.shift_probabilities(params)
        return -((sp[:, 0, :] - sp[:, 1, :]) / 2) @ self.weights

"""Numerical checks of the noise-resilience statements.

Strong-OPR is tested through its consequences: the noisy fidelity at ``V = U``
beats sampled competitors, and along one-parameter slices through ``U`` the
noisy and noiseless minimizers coincide.  Weak-OPR for fixed-input compiling
is checked by enumerating permutation unitaries, which saturate the
rearrangement bound.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import hadamard
from scipy.optimize import minimize_scalar
from scipy.stats import unitary_group

from . import costs
from .channels import Channel, NoisyPovm, commute_through_clifford, depolarizing, effective_z, measurement_noise, pauli_channel
from .circuits import CNOT_MAT, H_MAT, PAULI, S_MAT
from .errors import NoiseModelError, PreconditionError
from .noise_models import NoiseSchedule, Placement
from .pauli import PauliString, is_clifford, pauli_expand, pauli_matrix
from .sim import apply_left, make_rng

AFFINE_TOL = 1e-10
SUPEROP_TOL = 1e-12


@dataclass
class OprReport:
    mode: str
    verdict: str
    margin: float
    tol: float
    noiseless_optimal: list = field(default_factory=list)
    noisy_optimal: list = field(default_factory=list)
    counterexample: dict | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in ("consistent", "violated"):
            raise ValueError("verdict must be 'consistent' or 'violated'")
        if self.verdict == "violated" and not self.counterexample:
            raise ValueError("a violated verdict needs a counterexample")

    @property
    def passed(self) -> bool:
        return self.verdict == "consistent"

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


# -- depolarizing affine law -----------------------------------------------------------

def check_depolarizing_affine(kind: str, u, v, layers, continuous: float = 1.0, readout=None,
                              extra: NoiseSchedule | None = None, tol: float = AFFINE_TOL) -> CheckResult:
    """``C~ = p C + (1 - p)(1 - Tr L / 2^m)`` with ``p`` the product of all layers.

    ``layers`` are global depolarizing parameters inserted at the noise epochs
    (split between tau1 and tau2 for the full-unitary circuits); ``continuous``
    adds one layer after every gate.  ``extra`` may add unital noise; the
    reference cost then keeps that noise and drops only the depolarizing part.
    """
    kind = kind.lower()
    u, v = costs.as_sequence(u), costs.as_sequence(v)
    n = u.n
    fumc = kind in costs.FUMC_KINDS
    if extra is not None and extra.has_nonunital():
        raise PreconditionError("the affine law needs every other channel to be unital")
    if extra is not None and extra.readout is not None:
        raise PreconditionError("pass readout noise through the readout argument")
    sub = "AB" if fumc else "A"
    size = 2 * n if fumc else n
    layers = [float(p) for p in layers]
    placed = [Placement(depolarizing(p, size), sub) for p in layers]
    split = (len(placed) + 1) // 2 if fumc else len(placed)
    base = dict(n=n, tag="custom")
    if extra is not None:
        base.update(tau1=extra.tau1, tau2=extra.tau2, during_w_A=extra.during_w_A,
                    during_w_B=extra.during_w_B, gate_noise=extra.gate_noise,
                    gate_noise_scope=extra.gate_noise_scope)
    if readout is not None and not isinstance(readout, NoisyPovm):
        readout = measurement_noise(readout)
    ref_sched = NoiseSchedule(**base, readout=readout)
    noisy_sched = NoiseSchedule(**{**base, "tau1": tuple(base.get("tau1", ())) + tuple(placed[:split]),
                                   "tau2": tuple(base.get("tau2", ())) + tuple(placed[split:])},
                                continuous_global_depol=continuous, readout=readout)
    ref_prog = costs.build_program(kind, u, v, ref_sched if not ref_sched.is_identity else None)
    prog = costs.build_program(kind, u, v, noisy_sched)
    ref = costs.evaluate_program(ref_prog).value
    noisy = costs.evaluate_program(prog).value
    predicted = 0.0
    ptots = []
    for b, br in enumerate(prog.branches):
        ptot = prog.branch_depol_product(b) * float(np.prod(layers))
        ptots.append(ptot)
        tr_eff = float(br.effect.sum()) / (1 << prog.nreg) * (1 << len(br.measured))
        p_ref = 1.0 - _branch_value(ref_prog, b)
        predicted += br.weight * (ptot * p_ref + (1 - ptot) * tr_eff / (1 << len(br.measured)))
    predicted = 1.0 - predicted
    resid = abs(noisy - predicted)
    return CheckResult("affine", resid <= tol, resid,
                       {"kind": kind, "n": n, "p_tot": ptots, "noisy": noisy, "reference": ref,
                        "predicted": predicted, "register": prog.nreg})


def _branch_value(prog: costs.Program, b: int) -> float:
    probs = costs.branch_probabilities(prog)
    return 1.0 - float(probs[b])


# -- strong OPR for full-unitary compiling ---------------------------------------------

def _noisy_fids(u, v, noise) -> dict:
    return {k: 1.0 - costs.evaluate_program(costs.build_program(k, u, v, noise)).value for k in ("hst", "lhst")}


def _random_generator(n: int, rng: np.random.Generator) -> np.ndarray:
    """Involutory Hermitian generator: a non-identity Pauli word in a random frame."""
    d = 1 << n
    while True:
        x, z = int(rng.integers(d)), int(rng.integers(d))
        if x or z:
            break
    p = PauliString.from_ints(x, z, n).hermitian().to_matrix()
    q = unitary_group.rvs(d, random_state=rng)
    return q @ p @ q.conj().T


def _slice_unitary(u: np.ndarray, gen: np.ndarray, theta: float, theta0: float) -> np.ndarray:
    t = theta - theta0
    return u @ (np.cos(t / 2) * np.eye(u.shape[0]) - 1j * np.sin(t / 2) * gen)


def _argmin_on_circle(f, center: float) -> float:
    grid = center + np.linspace(-np.pi, np.pi, 65)[:-1]
    vals = np.array([f(t) for t in grid])
    i = int(np.argmin(vals))
    lo, mid, hi = grid[i] - 2 * np.pi / 64, grid[i], grid[i] + 2 * np.pi / 64
    res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden", tol=1e-10)
    return float(res.x)


def _angle_gap(a: float, b: float) -> float:
    return abs((a - b + np.pi) % (2 * np.pi) - np.pi)


def check_strong_opr_fumc(theorem: int, u, noise: NoiseSchedule, trials: int = 200, seed=0,
                          tol: float = 1e-10, slices: int = 10, angle_tol: float = 1e-3) -> OprReport:
    """Inequality check against Haar samples plus argmin location along slices through ``U``.

    A slice is ``V(theta) = U exp(-i (theta - theta0) G / 2)`` with ``G`` a
    random involutory generator; both costs are minimized on a grid, then
    refined by golden-section search.
    """
    expected = {1: "NM1", 2: "NM2"}
    if theorem not in expected:
        raise ValueError("theorem must be 1 or 2")
    if noise.tag != expected[theorem]:
        raise NoiseModelError(f"theorem {theorem} needs a {expected[theorem]} schedule, got {noise.tag}")
    if not noise.strict:
        raise PreconditionError("strong-OPR checks need a strict noise instance")
    u = costs.as_sequence(u).unitary()
    n = noise.n
    d = 1 << n
    rng = make_rng(seed)
    at_u = _noisy_fids(u, u, noise)
    phi = float(rng.uniform(0, 2 * np.pi))
    at_phase = _noisy_fids(u, np.exp(1j * phi) * u, noise)
    margin = np.inf
    worst = None
    samples = []
    for t in range(trials):
        v = unitary_group.rvs(d, random_state=rng)
        f = _noisy_fids(u, v, noise)
        for k in f:
            m = at_u[k] - f[k]
            if m < margin:
                margin, worst = m, {"kind": k, "trial": t, "v": v, "noisy_fid_v": f[k], "noisy_fid_u": at_u[k]}
        samples.append(f)
    phase_gap = max(abs(at_u[k] - at_phase[k]) for k in at_u)
    slice_gap = 0.0
    slice_rows = []
    worst_slice = None
    for s in range(slices):
        gen = _random_generator(n, rng)
        theta0 = float(rng.uniform(-np.pi, np.pi))
        for k in ("hst", "lhst"):
            def noisy(th, k=k):
                return costs.evaluate_program(costs.build_program(k, u, _slice_unitary(u, gen, th, theta0), noise)).value

            def clean(th, k=k):
                return costs.evaluate_program(costs.build_program(k, u, _slice_unitary(u, gen, th, theta0))).value

            a_noisy = _argmin_on_circle(noisy, theta0)
            a_clean = _argmin_on_circle(clean, theta0)
            gap = _angle_gap(a_noisy, a_clean)
            slice_rows.append({"slice": s, "kind": k, "theta0": theta0, "noisy_argmin": a_noisy,
                               "noiseless_argmin": a_clean, "gap": gap})
            if gap > slice_gap:
                slice_gap, worst_slice = gap, slice_rows[-1]
    ok = margin >= -tol and phase_gap <= tol and slice_gap <= angle_tol
    cex = None
    if not ok:
        cex = worst if margin < -tol else (worst_slice or {"phase_gap": phase_gap})
    return OprReport(
        "strong", "consistent" if ok else "violated", float(margin), tol,
        noiseless_optimal=[{"v": "U", "phase": phi}],
        noisy_optimal=[{"v": "U", "noisy_fidelity": at_u}],
        counterexample=cex,
        details={"theorem": theorem, "trials": trials, "phase_gap": phase_gap,
                 "max_slice_gap": slice_gap, "slices": slice_rows, "angle_tol": angle_tol},
    )


# -- weak OPR for fixed-input compiling ---------------------------------------------------

def _permutation_unitaries(d: int):
    for perm in itertools.permutations(range(d)):
        w = np.zeros((d, d))
        w[list(perm), range(d)] = 1
        yield perm, w


def _nm3_vectors(noise: NoiseSchedule) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``q_l`` (tau1 channel on |0><0|), ``p_i`` (readout) and the per-qubit rows."""
    n = noise.n
    d = 1 << n
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1
    for pl in noise.tau1:
        rho = pl.channel.apply_matrix(rho)
    q = np.real(np.diag(rho))
    rows = noise.readout.rows if noise.readout is not None else [np.eye(2)] * n
    p = np.ones(1)
    for m in rows:
        p = np.kron(p, [m[0, 0], m[0, 1]])
    return q, p, np.array([[m[0, 0], m[0, 1]] for m in rows])


def rearrangement_bounds(noise: NoiseSchedule) -> dict:
    """Upper bounds on the noisy fixed-input fidelities, before depolarizing."""
    q, p, rows = _nm3_vectors(noise)
    n = noise.n
    d = 1 << n
    let = float(np.sort(p)[::-1] @ np.sort(q)[::-1])
    # local version: p~_k = (1/n) sum_j p^(j)_k over nonzero strings
    bits = (np.arange(d)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    ptilde = np.mean(rows[np.arange(n)[None, :], bits], axis=1)
    llet = float(np.mean(rows[:, 0]) * q[0] + np.sort(ptilde[1:])[::-1] @ np.sort(q[1:])[::-1])
    return {"let": let, "llet": llet, "q": q, "p": p, "ptilde": ptilde}


def check_weak_opr_fisc(u, noise: NoiseSchedule, tol: float = 1e-12, samples: int = 0, seed=0,
                        membership_tol: float = 1e-9) -> OprReport:
    """Enumerate permutation unitaries ``W = V^dagger U`` and compare with the rearrangement bound.

    When ``q`` or ``p`` has ties with its top entry the optimal set is only
    defined up to those ties; inclusion is then checked on the quotient, i.e.
    a maximizer must send some top-``q`` index to some top-``p`` index.
    """
    if noise.tag != "NM3":
        raise NoiseModelError(f"weak-OPR checks need an NM3 schedule, got {noise.tag}")
    u = costs.as_sequence(u).unitary()
    n = noise.n
    if n > 2:
        raise PreconditionError("the exhaustive permutation branch supports n <= 2")
    d = 1 << n
    bounds = rearrangement_bounds(noise)
    q, p = bounds["q"], bounds["p"]
    top_q = np.flatnonzero(q >= q.max() - tol)
    top_p = np.flatnonzero(p >= p.max() - tol)
    degenerate = bool(len(top_q) > 1 or len(top_p) > 1 or q.argmax() != 0 or p.argmax() != 0)
    rows = []
    for perm, w in _permutation_unitaries(d):
        v = u @ w.conj().T  # V^dagger U = W
        g = {k: 1.0 - costs.evaluate_program(costs.build_program(k, u, v, noise)).value for k in ("let", "llet")}
        rows.append((perm, w, g))
    ptot = costs.build_program("let", u, u, noise).branch_depol_product(0)
    mean_local = float(np.mean(np.sum(bounds_rows(noise), axis=1)))
    expect = {"let": ptot * bounds["let"] + (1 - ptot) * float(p.sum()) / d,
              "llet": ptot * bounds["llet"] + (1 - ptot) * mean_local / 2}

    def included(w):
        if not degenerate:
            return abs(w[0, 0]) >= 1 - membership_tol
        return bool(np.max(np.abs(w[np.ix_(top_p, top_q)])) >= 1 - membership_tol)

    report = {}
    ok = True
    cex = None
    noisy_opt = []
    margin = np.inf
    for k in ("let", "llet"):
        best = max(r[2][k] for r in rows)
        gap = abs(best - expect[k]) if k == "let" else max(best - expect[k], 0.0)
        maximizers = [r for r in rows if r[2][k] >= best - tol]
        inside = [included(r[1]) for r in maximizers]
        report[k] = {"max": best, "bound": expect[k], "raw_bound": bounds[k], "gap": gap,
                     "maximizers": [list(r[0]) for r in maximizers], "all_included": all(inside)}
        noisy_opt += [{"kind": k, "perm": list(r[0]), "noisy_fidelity": r[2][k]} for r in maximizers]
        margin = min(margin, -gap)
        # the LLET bound need not be attained; only the LET branch is checked for inclusion
        if gap > tol or (k == "let" and not all(inside)):
            ok = False
            bad = next((r for r, fz in zip(maximizers, inside) if not fz), maximizers[0])
            noiseless = costs.evaluate_program(costs.build_program(k, u, u @ bad[1].conj().T)).value
            cex = {"kind": k, "perm": list(bad[0]), "noisy_fidelity": bad[2][k],
                   "noiseless_cost": noiseless, "bound": expect[k]}
    if samples:
        rng = make_rng(seed)
        worst = -np.inf
        for _ in range(samples):
            v = unitary_group.rvs(d, random_state=rng)
            for k in ("let", "llet"):
                g = 1.0 - costs.evaluate_program(costs.build_program(k, u, v, noise)).value
                if g - expect[k] > worst:
                    worst, arg = g - expect[k], {"kind": k, "v": v, "noisy_fidelity": g, "bound": expect[k]}
        report["sampled_excess"] = worst
        if worst > tol:
            ok = False
            cex = cex or arg
    return OprReport("weak", "consistent" if ok else "violated", float(margin), tol,
                     noiseless_optimal=[{"condition": "|<0|W|0>| = 1"}], noisy_optimal=noisy_opt,
                     counterexample=cex,
                     details={"n": n, "p_tot": ptot, "degenerate": degenerate, **report,
                              "p_sorted": np.sort(p)[::-1], "q_sorted": np.sort(q)[::-1]})


def bounds_rows(noise: NoiseSchedule) -> np.ndarray:
    return _nm3_vectors(noise)[2]


# -- corollary conditions ---------------------------------------------------------------

def _unitary_superop(w: np.ndarray) -> np.ndarray:
    return np.kron(w, w.conj())


def _pauli_basis_superop(s: np.ndarray, n: int) -> np.ndarray:
    """Transfer matrix of a row-major superoperator in the ``X^l Z^k`` basis."""
    d = 1 << n
    out = np.empty((d * d, d * d), dtype=complex)
    for l in range(d):
        for k in range(d):
            img = (s @ pauli_matrix(l, k, n).reshape(-1)).reshape(d, d)
            out[:, l * d + k] = pauli_expand(img, n).array.reshape(-1)
    return out


def _probs_from_transfer(diag: np.ndarray, n: int) -> np.ndarray:
    d = 1 << n
    had = hadamard(d)
    c = diag.reshape(d, d).real
    # c = H p^T H with H^2 = d I
    return (had @ c @ had).T / d**2


def check_corollary_condition(which: str, w_layers=(), channel_layers=(), rng=None, trials: int = 20,
                              tol: float = SUPEROP_TOL) -> CheckResult:
    """Verify ``P_k W_k ... P_1 W_1 = W_k ... W_1 P^`` for the requested channel class.

    ``pauli_conj`` / ``clifford`` / ``nonunital_conj`` take unitary layers and
    channels on the same register; ``tensor_depol`` takes layers of
    ``(W', W'')`` pairs and ``(p', p'')`` local depolarizing parameters;
    ``ricochet`` checks ``(1 (x) M^T)|Phi+> = (M (x) 1)|Phi+>`` on random ``M``.
    """
    if which == "ricochet":
        rng = make_rng(0) if rng is None else rng
        worst = 0.0
        for dim in (2, 4, 8):
            for _ in range(trials):
                m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
                phi = np.eye(dim).reshape(-1) / np.sqrt(dim)
                lhs = np.kron(np.eye(dim), m.T) @ phi
                rhs = np.kron(m, np.eye(dim)) @ phi
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return CheckResult("ricochet", worst <= tol, worst, {"trials": trials})
    w_layers = list(w_layers)
    channel_layers = list(channel_layers)
    if len(w_layers) != len(channel_layers) or not w_layers:
        raise ValueError("need matching, nonempty unitary and channel layer lists")
    if which == "tensor_depol":
        return _check_tensor_depol(w_layers, channel_layers, tol)
    ws = [np.asarray(w, dtype=complex) for w in w_layers]
    n = ws[0].shape[0].bit_length() - 1
    total = np.eye(ws[0].shape[0] ** 2, dtype=complex)
    w_all = np.eye(ws[0].shape[0], dtype=complex)
    for w, ch in zip(ws, channel_layers):
        total = ch.superop() @ _unitary_superop(w) @ total
        w_all = w @ w_all
    hat_s = _unitary_superop(w_all).conj().T @ total  # W^-1 o (P_k W_k ... P_1 W_1)
    r = _pauli_basis_superop(hat_s, n)
    d2 = r.shape[0]
    if which in ("pauli_conj", "clifford"):
        off = r - np.diag(np.diag(r))
        resid = float(np.max(np.abs(off)))
        probs = _probs_from_transfer(np.diag(r), n)
        is_pauli = resid <= 1e-9 and np.min(probs) >= -1e-9
        hat = pauli_channel(np.clip(probs, 0, None) / np.clip(probs, 0, None).sum()) if is_pauli else None
        details = {"n": n, "layers": len(ws)}
        if which == "clifford":
            if not all(is_clifford(w) for w in ws):
                raise PreconditionError("clifford mode needs Clifford layers")
            # push every channel to the front analytically with the Clifford lemma
            front = None
            for j, ch in enumerate(channel_layers):
                q = ch
                for w in reversed(ws[: j + 1]):
                    q = commute_through_clifford(q, w.conj().T)
                front = q if front is None else front.compose(q)
            lemma_s = _unitary_superop(w_all) @ front.superop()
            resid = max(resid, float(np.max(np.abs(lemma_s - total))))
            hat = front
            details["lemma_residual"] = float(np.max(np.abs(lemma_s - total)))
        return CheckResult(which, resid <= tol and hat is not None, resid, {**details, "channel": hat})
    if which == "nonunital_conj":
        off = r.copy()
        off[np.arange(d2), np.arange(d2)] = 0
        off[:, 0] = 0
        resid = float(np.max(np.abs(off)))
        ok = resid <= tol and np.min(np.diag(r).real) >= -tol
        return CheckResult(which, bool(ok), resid, {"n": n, "transfer": np.diag(r).real, "affine": r[:, 0]})
    raise ValueError(f"unknown corollary mode {which!r}")


def _check_tensor_depol(w_layers, p_layers, tol) -> CheckResult:
    worst = 0.0
    for (wa, wb), (pa, pb) in zip(w_layers, p_layers):
        wa, wb = np.asarray(wa, dtype=complex), np.asarray(wb, dtype=complex)
        na, nb = wa.shape[0].bit_length() - 1, wb.shape[0].bit_length() - 1
        dep = depolarizing(pa, na).tensor(depolarizing(pb, nb)).superop()
        w = _unitary_superop(np.kron(wa, wb))
        worst = max(worst, float(np.max(np.abs(dep @ w - w @ dep))))
    return CheckResult("tensor_depol", worst <= tol, worst, {"layers": len(w_layers)})


def random_clifford(n: int, rng: np.random.Generator, depth: int = 12) -> np.ndarray:
    """Product of random H, S and CNOT gates."""
    d = 1 << n
    out = np.eye(d, dtype=complex)
    for _ in range(depth):
        r = int(rng.integers(3 if n > 1 else 2))
        q = int(rng.integers(n))
        if r < 2:
            g = H_MAT if r == 0 else S_MAT
            full = np.kron(np.kron(np.eye(1 << q), g), np.eye(1 << (n - q - 1)))
        else:
            c, t = rng.choice(n, 2, replace=False)
            full = _embed_two(CNOT_MAT, int(c), int(t), n)
        out = full @ out
    return out


def _embed_two(g: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    d = 1 << n
    t = np.eye(d, dtype=complex).reshape((2,) * n + (d,))
    return apply_left(t, g, (a, b)).reshape(d, d)


# -- VQE warm-up ------------------------------------------------------------------------

def local_field_hamiltonian(coeffs, frames, readout: NoisyPovm | None = None) -> np.ndarray:
    """``-sum_j c_j U_j Z U_j^dagger`` on qubit ``j``; with ``readout`` the Z is replaced by its noisy version."""
    n = len(coeffs)
    d = 1 << n
    h = np.zeros((d, d), dtype=complex)
    for j, (c, uj) in enumerate(zip(coeffs, frames)):
        z = PAULI["z"] if readout is None else effective_z(readout, j)
        local = uj @ z @ uj.conj().T
        h -= c * np.kron(np.kron(np.eye(1 << j), local), np.eye(1 << (n - j - 1)))
    return h


def _ground_projector(h: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    vals, vecs = np.linalg.eigh(h)
    g = vecs[:, vals <= vals[0] + tol]
    return g @ g.conj().T


def vqe_warmup_check(coeffs, frames, readout_rows, tol: float = 1e-10) -> CheckResult:
    """Ground states of the local-field Hamiltonian with and without readout noise.

    Zero coefficients leave degenerate ground spaces; the product state must
    then lie in both, and the two spaces must coincide.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if np.any(coeffs < 0):
        raise PreconditionError("coefficients must be nonnegative")
    if len(readout_rows) != len(coeffs) or len(frames) != len(coeffs):
        raise ValueError("need one coefficient, frame and readout row per qubit")
    for p00, p11 in readout_rows:
        if not p00 + p11 > (1 - p00) + (1 - p11):
            raise PreconditionError(f"readout row ({p00}, {p11}) violates p00 + p11 > p01 + p10")
    readout = measurement_noise(readout_rows)
    frames = [np.asarray(f, dtype=complex) for f in frames]
    proj_h = _ground_projector(local_field_hamiltonian(coeffs, frames))
    proj_ht = _ground_projector(local_field_hamiltonian(coeffs, frames, readout))
    ground = np.ones(1, dtype=complex)
    for f in frames:
        ground = np.kron(ground, f[:, 0])
    fid_h = float(np.real(np.vdot(ground, proj_h @ ground)))
    fid_ht = float(np.real(np.vdot(ground, proj_ht @ ground)))
    space_gap = float(np.max(np.abs(proj_h - proj_ht)))
    worst = max(abs(1 - fid_h), abs(1 - fid_ht), space_gap)
    return CheckResult("warmup", bool(worst <= tol), worst,
                       {"fidelity_h": fid_h, "fidelity_htilde": fid_ht, "projector_gap": space_gap,
                        "ground_dim": int(round(np.real(np.trace(proj_h)))), "n": len(coeffs)})


# -- sandwiches -------------------------------------------------------------------------

def check_cost_sandwiches(trials: int = 200, seed=0, ns=(2, 3), slack: float = 1e-12) -> CheckResult:
    rng = make_rng(seed)
    worst = np.inf
    where = None
    for t in range(trials):
        for n in ns:
            d = 1 << n
            u = unitary_group.rvs(d, random_state=rng)
            v = unitary_group.rvs(d, random_state=rng)
            h, lh = costs.hst_cost(u, v).value, costs.lhst_cost(u, v).value
            e, le = costs.let_cost(u, v).value, costs.llet_cost(u, v).value
            gaps = {"hst-lhst": h - lh, "n*lhst-hst": n * lh - h, "let-llet": e - le, "n*llet-let": n * le - e}
            k = min(gaps, key=gaps.get)
            if gaps[k] < worst:
                worst, where = gaps[k], {"trial": t, "n": n, "which": k}
    return CheckResult("sandwiches", worst >= -slack, float(worst), {"trials": trials, "worst": where})

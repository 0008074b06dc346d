import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from noisyvqc import costs
from noisyvqc.ansatz import alternating_pair, dressed_cnot
from noisyvqc.channels import depolarizing, measurement_noise, pauli_channel
from noisyvqc.circuits import GateSequence, phase_gate, rotation
from noisyvqc.errors import DimensionError
from noisyvqc.noise_models import HardwareParams, hardware_like, noise_model_1, noise_model_3

X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2)


def haar(d, seed):
    return unitary_group.rvs(d, random_state=seed)


def ptrace_keep(rho, keep, n):
    """Oracle partial trace via explicit index loops over the traced qubits."""
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    out = np.zeros((2 ** len(keep),) * 2, dtype=complex)
    for bits in np.ndindex(*(2,) * len(drop)):
        idx_r = [slice(None)] * n
        for q, b in zip(drop, bits):
            idx_r[q] = b
        sub = t[tuple(idx_r) + tuple(idx_r)]
        out += sub.reshape(out.shape)
    return out


def lhst_oracle(u, v):
    n = int(np.log2(u.shape[0]))
    d = 1 << n
    w = v.conj().T @ u
    phi = np.eye(d).reshape(-1) / np.sqrt(d)  # A-major: index a*d + b
    chi = np.kron(w, np.eye(d)) @ phi
    rho = np.outer(chi, chi.conj())
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    fs = []
    for j in range(n):
        r = ptrace_keep(rho, [j, n + j], 2 * n)
        fs.append(float(np.real(bell @ r @ bell)))
    return 1 - np.mean(fs), fs


def llet_oracle(u, v):
    n = int(np.log2(u.shape[0]))
    w = v.conj().T @ u
    psi = w[:, 0]
    rho = np.outer(psi, psi.conj())
    gs = [float(np.real(ptrace_keep(rho, [j], n)[0, 0])) for j in range(n)]
    return 1 - np.mean(gs), gs


# -- noiseless values ----------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
def test_hst_and_let_match_closed_forms(n):
    d = 1 << n
    for s in range(4):
        u, v = haar(d, s), haar(d, 100 + s)
        w = v.conj().T @ u
        assert costs.hst_cost(u, v).value == pytest.approx(1 - abs(np.trace(w)) ** 2 / d**2, abs=1e-10)
        assert costs.let_cost(u, v).value == pytest.approx(1 - abs(w[0, 0]) ** 2, abs=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_local_costs_match_partial_trace_oracles(n):
    d = 1 << n
    for s in range(3):
        u, v = haar(d, s), haar(d, 50 + s)
        c, fs = lhst_oracle(u, v)
        assert costs.lhst_cost(u, v).value == pytest.approx(c, abs=1e-10)
        for j in range(n):
            assert costs.lhst_cost(u, v, j=j).value == pytest.approx(1 - fs[j], abs=1e-10)
        c, gs = llet_oracle(u, v)
        assert costs.llet_cost(u, v).value == pytest.approx(c, abs=1e-10)
        for j in range(n):
            assert costs.llet_cost(u, v, j=j).value == pytest.approx(1 - gs[j], abs=1e-10)


def test_trivial_examples():
    assert costs.hst_cost(I2, rotation("z", np.pi)).value == pytest.approx(1, abs=1e-12)
    assert costs.hst_cost(I2, X).value == pytest.approx(1, abs=1e-12)
    assert costs.let_cost(I2, X).value == pytest.approx(1, abs=1e-12)
    for phi in np.linspace(0, 2 * np.pi, 7):
        assert costs.let_cost(I2, phase_gate(phi)).value == pytest.approx(0, abs=1e-12)
    u = haar(4, 3)
    for f in (costs.hst_cost, costs.lhst_cost, costs.let_cost, costs.llet_cost):
        assert f(u, u).value == pytest.approx(0, abs=1e-12)


def test_x_on_first_qubit_local_values():
    xi = np.kron(X, I2)
    assert costs.lhst_cost(xi, np.eye(4), j=0).value == pytest.approx(1, abs=1e-12)
    assert costs.lhst_cost(xi, np.eye(4), j=1).value == pytest.approx(0, abs=1e-12)
    assert costs.lhst_cost(xi, np.eye(4)).value == pytest.approx(0.5, abs=1e-12)
    assert costs.hst_cost(xi, np.eye(4)).value == pytest.approx(1, abs=1e-12)
    assert costs.llet_cost(xi, np.eye(4)).value == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_sandwich_inequalities(seed, n):
    d = 1 << n
    u, v = haar(d, seed), haar(d, seed + 1)
    h, lh = costs.hst_cost(u, v).value, costs.lhst_cost(u, v).value
    e, le = costs.let_cost(u, v).value, costs.llet_cost(u, v).value
    assert lh <= h + 1e-12 and h <= n * lh + 1e-12
    assert le <= e + 1e-12 and e <= n * le + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 2 * np.pi), st.sampled_from([1, 2, 3]))
def test_global_phase_invariance(seed, phi, n):
    d = 1 << n
    u, v = haar(d, seed), haar(d, seed + 7)
    for f in (costs.hst_cost, costs.lhst_cost, costs.let_cost, costs.llet_cost):
        assert abs(f(u, v).value - f(u, np.exp(1j * phi) * v).value) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2, 3]), st.floats(0, 2 * np.pi))
def test_faithfulness(seed, n, phi):
    u = haar(1 << n, seed)
    assert costs.hst_cost(u, np.exp(1j * phi) * u).value <= 1e-9
    assert costs.let_cost(u, np.exp(1j * phi) * u).value <= 1e-9
    # a V agreeing with U only on |0> zeroes the fixed-input cost but not the full one
    w = np.eye(1 << n, dtype=complex)
    w[1:, 1:] = haar((1 << n) - 1, seed + 1) if n > 1 else np.exp(1j * phi)
    v = u @ w.conj().T
    assert costs.let_cost(u, v).value <= 1e-9
    if n > 1:
        assert costs.hst_cost(u, v).value > 1e-6


def test_weighted_cost():
    a = costs.CostEstimate(0.2)
    b = costs.CostEstimate(0.4)
    assert costs.weighted_cost(1, a, b).value == pytest.approx(0.2)
    assert costs.weighted_cost(0, a, b).value == pytest.approx(0.4)
    assert costs.weighted_cost(0.5, a, b).value == pytest.approx(0.3)
    sa = costs.CostEstimate(0.2, "sampled", 10, 0.03)
    sb = costs.CostEstimate(0.4, "sampled", 10, 0.04)
    assert costs.weighted_cost(0.5, sa, sb).std_error == pytest.approx(np.hypot(0.015, 0.02))
    with pytest.raises(ValueError):
        costs.weighted_cost(1.5, a, b)


def test_combined_program_matches_weighted_sum():
    u, v = haar(4, 1), haar(4, 2)
    for q in (0.0, 0.3, 1.0):
        fumc = costs.evaluate_program(costs.build_program("fumc", u, v, q=q)).value
        ref = q * costs.hst_cost(u, v).value + (1 - q) * costs.lhst_cost(u, v).value
        assert fumc == pytest.approx(ref, abs=1e-12)
        fisc = costs.evaluate_program(costs.build_program("fisc", u, v, q=q)).value
        ref = q * costs.let_cost(u, v).value + (1 - q) * costs.llet_cost(u, v).value
        assert fisc == pytest.approx(ref, abs=1e-12)


def test_cost_estimate_contract():
    with pytest.raises(Exception):
        costs.CostEstimate(1.1)
    with pytest.raises(ValueError):
        costs.CostEstimate(0.5, "sampled", 0)


def test_input_guards():
    with pytest.raises(DimensionError):
        costs.hst_cost(np.eye(4), np.eye(2))
    with pytest.raises(DimensionError):
        costs.hst_cost(np.eye(16), np.eye(16))
    with pytest.raises(DimensionError):
        costs.lhst_cost(np.eye(4), np.eye(4), j=2)
    with pytest.raises(DimensionError):
        costs.hst_cost(np.eye(4), np.eye(4), noise=noise_model_3(1, depol=0.9, readout=[(0.9, 0.9)]))


# -- sampling -----------------------------------------------------------------

@pytest.mark.parametrize("fn", [costs.hst_cost, costs.lhst_cost, costs.let_cost, costs.llet_cost])
def test_sampled_estimates_converge(fn):
    u, v = haar(4, 11), haar(4, 12)
    exact = fn(u, v).value
    est = fn(u, v, mode=costs.Shots(100_000, 5))
    f = 1 - exact
    assert est.mode == "sampled" and est.shots_used == 100_000
    assert abs(est.value - exact) <= 5 * np.sqrt(f * (1 - f) / 100_000)


def test_sampling_is_deterministic_per_seed():
    u, v = haar(4, 1), haar(4, 2)
    a = costs.lhst_cost(u, v, mode=costs.Shots(1000, (3, 4)))
    b = costs.lhst_cost(u, v, mode=costs.Shots(1000, (3, 4)))
    c = costs.lhst_cost(u, v, mode=costs.Shots(1000, (3, 5)))
    assert a.value == b.value
    assert a.value != c.value


# -- average fidelity -------------------------------------------------------------

def test_average_fidelity_examples():
    u = haar(4, 9)
    assert costs.average_fidelity(u, u, 100, 0) == pytest.approx(1, abs=1e-12)
    assert costs.average_fidelity(I2, X, 100_000, 1) == pytest.approx(1 / 3, abs=0.01)
    with pytest.raises(ValueError):
        costs.average_fidelity(I2, X, 0, 1)


def test_average_fidelity_relation():
    u, v = haar(2, 4), haar(2, 5)
    fbar, err = costs.average_fidelity(u, v, 100_000, 2, return_error=True)
    d = 2
    assert abs(costs.hst_cost(u, v).value - (d + 1) / d * (1 - fbar)) <= 3 * (d + 1) / d * err


# -- effective Hamiltonians ----------------------------------------------------------

def test_let_hamiltonian_identity_target():
    h = costs.effective_hamiltonian("LET", np.eye(2))
    assert np.allclose(h, np.diag([0, 1]), atol=1e-14)


@pytest.mark.parametrize("kind,fn", [("HST", costs.hst_cost), ("LHST", costs.lhst_cost)])
def test_fumc_hamiltonians_reproduce_costs(kind, fn):
    for s in range(20):
        u, v = haar(4, s), haar(4, 40 + s)
        h = costs.effective_hamiltonian(kind, u)
        chi = costs.choi_state(v)
        assert np.real(chi.conj() @ h @ chi) == pytest.approx(fn(u, v).value, abs=1e-10)


def test_let_hamiltonian_reproduces_cost():
    for s in range(10):
        u, v = haar(8, s), haar(8, 40 + s)
        psi = v[:, 0]
        h = costs.effective_hamiltonian("LET", u)
        assert np.real(psi.conj() @ h @ psi) == pytest.approx(costs.let_cost(u, v).value, abs=1e-10)


def test_llet_hamiltonian_expectation_exchanges_roles():
    # <0|V^dag H_LLET(U) V|0> is the local cost of compiling V with U
    for s in range(10):
        u, v = haar(4, s), haar(4, 40 + s)
        psi = v[:, 0]
        h = costs.effective_hamiltonian("LLET", u)
        assert np.real(psi.conj() @ h @ psi) == pytest.approx(costs.llet_cost(v, u).value, abs=1e-10)


@pytest.mark.parametrize("kind", ["LET", "LLET", "HST", "LHST"])
def test_hamiltonian_ground_space(kind):
    u = haar(4, 3)
    h = costs.effective_hamiltonian(kind, u)
    assert np.allclose(h, h.conj().T, atol=1e-12)
    evals, evecs = np.linalg.eigh(h)
    assert evals[0] == pytest.approx(0, abs=1e-12)
    state = costs.choi_state(u) if kind in ("HST", "LHST") else u[:, 0]
    assert np.real(state.conj() @ h @ state) == pytest.approx(0, abs=1e-12)
    assert np.all(evals > -1e-12)


def test_hamiltonian_guards():
    with pytest.raises(ValueError):
        costs.effective_hamiltonian("XYZ", np.eye(2))
    with pytest.raises(DimensionError):
        costs.effective_hamiltonian("LET", np.eye(16))


# -- noisy evaluation --------------------------------------------------------------

def test_identity_noise_equals_noiseless():
    u, v = haar(4, 1), haar(4, 2)
    nm = noise_model_1(2, strict=False)
    assert costs.hst_cost(u, v, noise=nm).value == pytest.approx(costs.hst_cost(u, v).value, abs=1e-12)


def test_readout_only_matches_confusion_oracle():
    u, v = haar(4, 1), haar(4, 2)
    rows = [(0.9, 0.8), (0.95, 0.85)]
    nm = noise_model_3(2, readout=rows, strict=False)
    w = v.conj().T @ u
    p = np.abs(w[:, 0]) ** 2
    # P(read 0 on both) = sum_x p(x) prod_q P(0 | x_q)
    conf = [np.array([[a, 1 - b], [1 - a, b]]) for a, b in rows]
    ref = sum(p[x] * conf[0][0, x >> 1] * conf[1][0, x & 1] for x in range(4))
    assert costs.let_cost(u, v, noise=nm).value == pytest.approx(1 - ref, abs=1e-12)


def _dense_noisy_fisc_oracle(u, v, p1, t1, t2, time_1q):
    """Single-qubit LET under per-gate depolarizing then thermal relaxation, from explicit Kraus sums."""
    g = 1 - np.exp(-time_1q / t1)
    ad = [np.array([[1, 0], [0, np.sqrt(1 - g)]]), np.array([[0, np.sqrt(g)], [0, 0]])]
    lam = np.exp(-time_1q / t2) / np.sqrt(1 - g)
    pz = (1 - lam) / 2
    deph = [np.sqrt(1 - pz) * I2, np.sqrt(pz) * np.diag([1, -1])]
    rho = np.diag([1.0, 0.0]).astype(complex)
    for gate in (u, v.conj().T):
        rho = gate @ rho @ gate.conj().T
        rho = (1 - p1) * rho + p1 * np.trace(rho) * I2 / 2
        rho = sum(k @ rho @ k.conj().T for k in ad)
        rho = sum(k @ rho @ k.conj().T for k in deph)
    return 1 - rho[0, 0].real


def test_hardware_model_matches_dense_oracle():
    u, v = haar(2, 5), haar(2, 6)
    hp = HardwareParams(depol_1q=0.01, t1=20e-6, t2=30e-6, time_1q=1e-6, readout=((1.0, 1.0),))
    nm = hardware_like(1, "FISC", hp)
    ref = _dense_noisy_fisc_oracle(u, v, 0.01, 20e-6, 30e-6, 1e-6)
    assert costs.let_cost(u, v, noise=nm).value == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("kind", ["hst", "lhst", "let", "llet"])
def test_global_depolarizing_affine_law(kind):
    n = 2
    u, v = haar(4, 21), haar(4, 22)
    p = 0.93
    nm = noise_model_3(n, depol=p, strict=False) if kind in ("let", "llet") else noise_model_1(n, depol=p, strict=False)
    prog = costs.build_program(kind, u, v, nm)
    clean = costs.evaluate_program(costs.build_program(kind, u, v)).value
    noisy = costs.evaluate_program(prog).value
    for b, br in enumerate(prog.branches):
        assert prog.branch_depol_product(b) == pytest.approx(prog.branch_depol_product(0))
    ptot = prog.branch_depol_product(0)
    m = len(prog.branches[0].measured)
    assert noisy == pytest.approx(ptot * clean + (1 - ptot) * (1 - 2.0**-m), abs=1e-10)


def test_pauli_noise_at_tau1_on_hst():
    # X on A_0 with probability r right after E flips the first Bell pair
    r = 0.2
    ch = pauli_channel({"IIII": 1 - r, "XIII": r}, strict=True)
    nm = noise_model_1(2, tau1=ch, strict=False)
    u = haar(4, 1)
    assert costs.hst_cost(u, u, noise=nm).value == pytest.approx(r, abs=1e-12)
    assert costs.lhst_cost(u, u, noise=nm).value < r


# -- gradients -----------------------------------------------------------------------

def _fd(vc, x, h=1e-5):
    return np.array([(vc.value(x + h * e) - vc.value(x - h * e)) / (2 * h) for e in np.eye(len(x))])


@pytest.mark.parametrize("kind", ["hst", "lhst", "let", "llet", "fumc", "fisc"])
def test_gradient_matches_finite_differences(kind):
    rng = np.random.default_rng(0)
    ans = GateSequence(2, dressed_cnot(0, 1))
    u = haar(4, 3)
    vc = costs.VariationalCost(kind, u, ans)
    x = rng.uniform(-np.pi, np.pi, vc.num_params)
    assert np.max(np.abs(vc.gradient(x) - _fd(vc, x))) <= 1e-6


def test_noisy_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    ans = alternating_pair(2, 2).template
    u = haar(4, 4)
    vc = costs.VariationalCost("lhst", u, ans, hardware_like(2))
    x = rng.uniform(-np.pi, np.pi, vc.num_params)
    assert np.max(np.abs(vc.gradient(x) - _fd(vc, x))) <= 1e-6


def test_shift_terms_base_is_cost():
    ans = alternating_pair(2, 1).template
    u = haar(4, 4)
    vc = costs.VariationalCost("fumc", u, ans, hardware_like(2), q=0.3)
    x = np.linspace(0, 1, vc.num_params)
    _, base = vc.shift_terms(x)
    assert 1 - vc.weights @ base == pytest.approx(vc.value(x), abs=1e-12)


def test_repeated_slot_gradient():
    from noisyvqc.circuits import rot

    seq = GateSequence(1, [rot("y", 0, 0), rot("z", 0, 1), rot("y", 0, 0)])
    vc = costs.VariationalCost("let", haar(2, 1), seq)
    assert not vc.single_use
    x = np.array([0.4, -1.1])
    assert np.max(np.abs(vc.gradient(x) - _fd(vc, x))) <= 1e-6

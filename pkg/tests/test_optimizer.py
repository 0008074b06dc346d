import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from noisyvqc import ansatz, costs, optimizer as opt
from noisyvqc.circuits import GateSequence, rot
from noisyvqc.noise_models import hardware_like
from noisyvqc.sim import make_rng


def rz_cost(kind="hst", noise=None):
    return costs.VariationalCost(kind, np.eye(2), GateSequence(1, [rot("z", 0, 0)]), noise)


def dressed_cost(seed, kind="hst", noise=None):
    u = unitary_group.rvs(4, random_state=seed)
    return costs.VariationalCost(kind, u, GateSequence(2, ansatz.dressed_cnot(0, 1)), noise)


def finite_difference(cost, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (cost.value(x + e) - cost.value(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("kind", ["hst", "lhst", "let", "llet"])
def test_exact_shift_matches_finite_difference(kind):
    cost = dressed_cost(3, kind)
    x = make_rng(1).uniform(-np.pi, np.pi, 12)
    assert np.max(np.abs(opt.parameter_shift_gradient(cost, x) - finite_difference(cost, x))) < 1e-6


def test_gradient_vanishes_at_witness():
    u = ansatz.random_cnot_circuit(2, 3, make_rng(2))
    a = ansatz.target_inspired(u)
    cost = costs.VariationalCost("hst", u, a.template)
    assert np.linalg.norm(opt.parameter_shift_gradient(cost, a.witness)) <= 1e-8


def test_idle_slot_has_zero_gradient():
    # slot 1 is a Z rotation acting on |0>-diagonal part of an LET: still sampled, mean zero
    seq = GateSequence(1, [rot("z", 0, 0), rot("y", 0, 1)])
    cost = costs.VariationalCost("let", np.eye(2), seq)
    x = np.array([0.4, 0.0])
    assert opt.parameter_shift_gradient(cost, x)[0] == pytest.approx(0, abs=1e-14)
    g = np.array([opt.parameter_shift_gradient(cost, x, shots=2000, seed=s)[0] for s in range(5)])
    assert np.all(np.abs(g) < 0.1)


def test_sampled_gradient_unbiased():
    cost = dressed_cost(4, "lhst")
    x = make_rng(3).normal(size=12)
    exact = opt.parameter_shift_gradient(cost, x)
    grad, var, _ = opt.shift_gradient(cost, x, shots=20000, seed=5)
    assert np.all(np.abs(grad - exact) <= 5 * np.sqrt(var / 20000) + 1e-12)


def test_exact_descent_on_rz_converges():
    cost = rz_cost()
    cfg = opt.OptimizerConfig(learning_rate=1.0, max_iterations=200, shots=None, window=10**6)
    tr = opt.gradient_descent(cost, [1.0], cfg)
    assert tr.final.noisy_cost <= 1e-8
    best = np.minimum.accumulate(tr.column("noisy_cost"))
    assert np.all(np.diff(tr.column("noisy_cost")) <= 1e-15)
    assert np.all(np.diff(best) <= 0)


def test_descent_is_deterministic():
    cost = dressed_cost(5, "lhst", hardware_like(2))
    cfg = opt.OptimizerConfig(learning_rate=0.3, max_iterations=5, shots=30, seed=11)
    a = opt.gradient_descent(cost, np.zeros(12), cfg)
    b = opt.gradient_descent(cost, np.zeros(12), cfg)
    assert a.to_rows() == b.to_rows()
    c = opt.gradient_descent(cost, np.zeros(12), opt.OptimizerConfig(learning_rate=0.3, max_iterations=5, shots=30, seed=12))
    assert a.to_rows() != c.to_rows()


def test_shot_accounting_fixed():
    cost = dressed_cost(6)
    cfg = opt.OptimizerConfig(learning_rate=0.1, max_iterations=4, shots=7)
    tr = opt.gradient_descent(cost, np.zeros(12), cfg)
    assert tr.column("shots").tolist() == [2 * 12 * 7] * 4
    assert np.array_equal(tr.column("cumulative_shots"), np.cumsum(tr.column("shots")))


def test_budget_stop_fixed():
    cost = dressed_cost(6)
    cfg = opt.OptimizerConfig(learning_rate=0.1, max_iterations=100, shots=10, budget=2400)
    tr = opt.gradient_descent(cost, np.zeros(12), cfg)
    assert tr.termination == "budget" and tr.total_shots <= 2400 and len(tr.records) == 10
    with pytest.raises(ValueError):
        opt.gradient_descent(cost, np.zeros(12), opt.OptimizerConfig(shots=10, budget=100))


def test_window_termination():
    cost = rz_cost()
    cfg = opt.OptimizerConfig(learning_rate=1e-6, max_iterations=500, shots=None, window=5, rel_tol=1e-3)
    tr = opt.gradient_descent(cost, [1.0], cfg)
    assert tr.termination == "converged" and len(tr.records) == 6


def test_learning_rate_halves_on_plateau():
    cost = rz_cost()
    # theta -> theta - (lr/2) sin(theta) is unstable at 0 for lr > 4, so the best cost stalls
    cfg = opt.OptimizerConfig(learning_rate=8.0, max_iterations=60, shots=None, patience=3, window=10**6)
    tr = opt.gradient_descent(cost, [1.0], cfg)
    assert tr.column("learning_rate").min() < 8.0
    assert tr.final.noisy_cost < 1e-3


def test_shot_growth_on_plateau():
    cost = rz_cost()
    cfg = opt.OptimizerConfig(learning_rate=8.0, max_iterations=60, shots=10, patience=3, window=10**6,
                              shot_growth=2.0, max_shots=40)
    tr = opt.gradient_descent(cost, [1.0], cfg)
    per = tr.column("shots") // 2
    assert per.max() == 40 and np.all(np.diff(per) >= 0)


def test_adaptive_reduces_to_descent_without_variance():
    cost = dressed_cost(7, "lhst")
    x0 = make_rng(8).normal(size=12)
    cfg = opt.OptimizerConfig(learning_rate=0.5, max_iterations=15, shots=None, budget=10**6, patience=None,
                              window=10**6)
    a = opt.adaptive_shot_descent(cost, x0, cfg)
    b = opt.gradient_descent(cost, x0, cfg)
    assert np.allclose(np.array([r.params for r in a.records]), np.array([r.params for r in b.records]), atol=1e-14)


def test_adaptive_contract():
    cost = dressed_cost(9, "lhst", hardware_like(2))
    cfg = opt.OptimizerConfig(learning_rate=0.5, max_iterations=10**6, n_min=3, budget=20000, seed=2)
    tr = opt.adaptive_shot_descent(cost, np.zeros(12), cfg)
    assert tr.termination == "budget"
    assert tr.total_shots <= 20000
    assert np.all(tr.column("shots") >= 2 * 12 * 3)
    assert np.array_equal(tr.column("cumulative_shots"), np.cumsum(tr.column("shots")))
    again = opt.adaptive_shot_descent(cost, np.zeros(12), cfg)
    assert tr.to_rows() == again.to_rows()


def test_adaptive_n_min_raise():
    cost = dressed_cost(9, "lhst")
    cfg = opt.OptimizerConfig(learning_rate=0.5, max_iterations=10**6, n_min=2, budget=60000,
                              n_min_raise=((10000, 250),))
    tr = opt.adaptive_shot_descent(cost, np.zeros(12), cfg)
    after = [r.shots for r in tr.records if r.cumulative_shots - r.shots >= 10000]
    assert after and min(after) >= 2 * 12 * 250


def test_adaptive_guards():
    cost = dressed_cost(1)
    with pytest.raises(ValueError):
        opt.adaptive_shot_descent(cost, np.zeros(12), opt.OptimizerConfig(budget=None))
    with pytest.raises(ValueError):
        opt.adaptive_shot_descent(cost, np.zeros(12), opt.OptimizerConfig(budget=40))
    with pytest.raises(ValueError):
        opt.adaptive_shot_descent(cost, np.zeros(12), opt.OptimizerConfig(budget=10**5, learning_rate=2.5))


@pytest.mark.parametrize("kwargs", [dict(learning_rate=0), dict(max_iterations=0), dict(shots=0), dict(n_min=1),
                                    dict(budget=0), dict(window=0), dict(patience=0), dict(mu=1.0),
                                    dict(n_min_raise=((10, 1),)), dict(shot_growth=0.5),
                                    dict(shots=10, max_shots=5), dict(average_tail=-1)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        opt.OptimizerConfig(**kwargs)


def test_trace_rows_and_monotone_shots():
    tr = opt.OptimizerTrace()
    rec = opt.IterationRecord(0, np.array([0.5]), 0.3, 0.2, 10, 10, 0.1, 1.0)
    tr.append(rec)
    assert tr.to_rows()[0] == {"iteration": 0, "noisy_cost": 0.3, "noiseless_cost_at_params": 0.2,
                               "shots_this_iter": 10, "cumulative_shots": 10, "theta_0": 0.5}
    with pytest.raises(ValueError):
        tr.append(opt.IterationRecord(1, np.array([0.5]), 0.3, 0.2, 0, 5, 0.1, 1.0))


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 1.0))
def test_exact_descent_best_cost_monotone_on_rz(theta, lr):
    tr = opt.gradient_descent(rz_cost(), [theta], opt.OptimizerConfig(learning_rate=lr, max_iterations=30, shots=None,
                                                                      window=10**6))
    best = np.minimum.accumulate(tr.column("noisy_cost"))
    assert np.all(np.diff(best) <= 0) and best[-1] <= tr.records[0].noisy_cost


def test_average_tail_appends_free_record():
    cost = dressed_cost(6, "lhst")
    cfg = opt.OptimizerConfig(learning_rate=0.1, max_iterations=6, shots=7, average_tail=3)
    tr = opt.gradient_descent(cost, np.zeros(12), cfg)
    assert len(tr.records) == 7
    last, prev = tr.records[-1], tr.records[-2]
    assert last.shots == 0 and last.cumulative_shots == prev.cumulative_shots
    assert np.allclose(last.params, np.mean([r.params for r in tr.records[-4:-1]], axis=0))
    assert last.noisy_cost == pytest.approx(cost.value(last.params), abs=1e-14)
    with pytest.raises(ValueError):
        opt.OptimizerConfig(average_tail=-1)

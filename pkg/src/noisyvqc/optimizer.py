"""Parameter-shift gradients and two shot-based trainers.

``gradient_descent`` spends a fixed number of shots on every shifted circuit.
``adaptive_shot_descent`` follows the iCANS rule: per-component shot counts
are set from running estimates of gradient mean and single-shot variance.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .costs import VariationalCost, sample_fidelity
from .sim import make_rng

TERMINATIONS = ("max_iterations", "converged", "budget", "target")


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.1
    max_iterations: int = 1000
    shots: int | None = 50000  # per shifted circuit; None means exact gradients
    n_min: int = 2
    budget: int | None = None
    window: int = 50
    rel_tol: float = 1e-3
    patience: int | None = 20  # react after this many non-improving steps
    shot_growth: float = 1.0  # on a plateau, multiply shots by this (up to max_shots) before halving the rate
    max_shots: int | None = None
    average_tail: int = 0  # if positive, finish with one record at the mean of the last this-many iterates
    seed: int = 0
    lipschitz: float = 1.0
    mu: float = 0.99
    bias: float = 1e-6
    n_min_raise: tuple = ()  # ((cumulative_shots, new_n_min), ...)
    target_cost: float | None = None
    track_noiseless: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive")
        if self.n_min < 2:
            raise ValueError("n_min must be at least 2")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be positive")
        if self.window < 1 or self.rel_tol < 0:
            raise ValueError("window must be positive and rel_tol nonnegative")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be positive")
        if self.shot_growth < 1:
            raise ValueError("shot_growth must be at least 1")
        if self.max_shots is not None and self.shots is not None and self.max_shots < self.shots:
            raise ValueError("max_shots must not be below shots")
        if self.average_tail < 0:
            raise ValueError("average_tail must be nonnegative")
        if self.lipschitz <= 0 or not 0 < self.mu < 1:
            raise ValueError("lipschitz must be positive and mu in (0, 1)")
        for thr, val in self.n_min_raise:
            if thr < 0 or val < 2:
                raise ValueError("n_min_raise entries need a nonnegative threshold and n_min >= 2")


@dataclass
class IterationRecord:
    iteration: int
    params: np.ndarray
    noisy_cost: float
    noiseless_cost: float
    shots: int
    cumulative_shots: int
    learning_rate: float
    gradient_norm: float


@dataclass
class OptimizerTrace:
    records: list[IterationRecord] = field(default_factory=list)
    termination: str = ""
    wall_time: float = 0.0

    def append(self, rec: IterationRecord) -> None:
        if self.records and rec.cumulative_shots < self.records[-1].cumulative_shots:
            raise ValueError("cumulative shots must not decrease")
        self.records.append(rec)

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    @property
    def total_shots(self) -> int:
        return self.records[-1].cumulative_shots if self.records else 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_rows(self) -> list[dict]:
        rows = []
        for r in self.records:
            row = {
                "iteration": r.iteration,
                "noisy_cost": r.noisy_cost,
                "noiseless_cost_at_params": r.noiseless_cost,
                "shots_this_iter": r.shots,
                "cumulative_shots": r.cumulative_shots,
            }
            row.update({f"theta_{i}": float(v) for i, v in enumerate(r.params)})
            rows.append(row)
        return rows


def _shot_vector(shots, m: int) -> np.ndarray | None:
    if shots is None:
        return None
    arr = np.broadcast_to(np.asarray(shots, dtype=np.int64), (m,)).copy()
    if np.any(arr < 1):
        raise ValueError("every component needs at least one shot")
    return arr


def shift_gradient(cost: VariationalCost, params, shots=None, seed=0, iteration: int = 0):
    """Gradient plus per-component single-shot variance and base probabilities.

    Each (component, sign) draws from its own stream keyed by
    ``(seed, iteration, component, sign)``.
    """
    params = np.asarray(params, dtype=float)
    sp, base = cost.shift_terms(params)
    w = cost.weights
    m = cost.num_params
    shots = _shot_vector(shots, m)
    if shots is None:
        grad = -((sp[:, 0, :] - sp[:, 1, :]) / 2) @ w
        return grad, np.zeros(m), base
    if not cost.single_use:
        raise ValueError("sampled shift terms need every slot to appear in one gate")
    grad = np.zeros(m)
    var = np.zeros(m)
    for i in range(m):
        est = []
        for s in range(2):
            fid, v = sample_fidelity(sp[i, s], w, shots[i], make_rng((seed, iteration, i, s)))
            est.append(fid)
            var[i] += v / 4
        grad[i] = -(est[0] - est[1]) / 2
    return grad, var, base


def parameter_shift_gradient(cost: VariationalCost, params, shots=None, seed=0, iteration: int = 0) -> np.ndarray:
    """``dC/dtheta_i = [C(theta_i + pi/2) - C(theta_i - pi/2)] / 2``; exact when ``shots`` is None."""
    return shift_gradient(cost, params, shots, seed, iteration)[0]


def _record(cost, trace, it, x, base, spent, lr, grad, cfg):
    noisy = float(np.clip(1.0 - cost.weights @ base, 0.0, 1.0))
    clean = cost.noiseless(x) if cfg.track_noiseless else float("nan")
    cum = (trace.total_shots if trace.records else 0) + int(spent)
    trace.append(IterationRecord(it, x.copy(), noisy, clean, int(spent), cum, lr, float(np.linalg.norm(grad))))


def _converged(best_hist: list[float], cfg: OptimizerConfig) -> bool:
    if len(best_hist) <= cfg.window:
        return False
    old, new = best_hist[-cfg.window - 1], best_hist[-1]
    return old - new < cfg.rel_tol * max(old, 1e-300)


def _finish(cost, trace, cfg, reason, t0):
    if cfg.average_tail > 0 and trace.records:
        # Polyak tail average; its cost is evaluated exactly and charged no shots
        last = trace.final
        x = np.mean([r.params for r in trace.records[-cfg.average_tail:]], axis=0)
        clean = cost.noiseless(x) if cfg.track_noiseless else float("nan")
        trace.append(IterationRecord(last.iteration + 1, x, float(cost.value(x)), clean, 0, last.cumulative_shots,
                                     last.learning_rate, 0.0))
    trace.termination = reason
    trace.wall_time = time.perf_counter() - t0
    return trace


def gradient_descent(cost: VariationalCost, init, cfg: OptimizerConfig = OptimizerConfig()) -> OptimizerTrace:
    t0 = time.perf_counter()
    x = np.array(init, dtype=float)
    if x.shape != (cost.num_params,):
        raise ValueError(f"expected {cost.num_params} initial parameters, got {x.shape}")
    shots = cfg.shots
    per_iter = 0 if shots is None else 2 * cost.num_params * shots
    if cfg.budget is not None and per_iter > cfg.budget:
        raise ValueError("budget is smaller than one iteration")
    cap = cfg.max_shots if cfg.max_shots is not None else shots
    trace = OptimizerTrace()
    lr = cfg.learning_rate
    best, stall, best_hist = math.inf, 0, []
    reason = "max_iterations"
    for it in range(cfg.max_iterations):
        if cfg.budget is not None and trace.total_shots + per_iter > cfg.budget:
            reason = "budget"
            break
        grad, _, base = shift_gradient(cost, x, shots, cfg.seed, it)
        _record(cost, trace, it, x, base, per_iter, lr, grad, cfg)
        c = trace.final.noisy_cost
        if c < best:
            best, stall = c, 0
        else:
            stall += 1
            if cfg.patience is not None and stall >= cfg.patience:
                stall = 0
                if shots is not None and cfg.shot_growth > 1 and shots < cap:
                    shots = min(int(math.ceil(shots * cfg.shot_growth)), cap)
                    per_iter = 2 * cost.num_params * shots
                else:
                    lr /= 2
        best_hist.append(best)
        if cfg.target_cost is not None and c <= cfg.target_cost:
            reason = "target"
            break
        if _converged(best_hist, cfg):
            reason = "converged"
            break
        x = x - lr * grad
    return _finish(cost, trace, cfg, reason, t0)


def adaptive_shot_descent(cost: VariationalCost, init, cfg: OptimizerConfig) -> OptimizerTrace:
    """iCANS: shots per component ``s_i = ceil(2 L a / (2 - L a) * xi_i / (chi_i^2 + b mu^k))``,
    capped at the count of the component with the largest expected gain per shot."""
    if cfg.budget is None:
        raise ValueError("adaptive descent needs a shot budget")
    t0 = time.perf_counter()
    x = np.array(init, dtype=float)
    m = cost.num_params
    if x.shape != (m,):
        raise ValueError(f"expected {m} initial parameters, got {x.shape}")
    if 2 * m * cfg.n_min > cfg.budget:
        raise ValueError("budget is smaller than one minimal iteration")
    lr, lip = cfg.learning_rate, cfg.lipschitz
    if lr * lip >= 2:
        raise ValueError("learning_rate * lipschitz must be below 2")
    n_min = cfg.n_min
    raises = sorted(cfg.n_min_raise)
    shots = np.full(m, n_min, dtype=np.int64)
    chi = np.zeros(m)
    xi = np.zeros(m)
    trace = OptimizerTrace()
    reason = "max_iterations"
    for k in range(cfg.max_iterations):
        while raises and trace.total_shots >= raises[0][0]:
            n_min = max(n_min, int(raises.pop(0)[1]))
        shots = np.maximum(shots, n_min)
        spent = 0 if cfg.shots is None else int(2 * shots.sum())
        if trace.total_shots + spent > cfg.budget:
            reason = "budget"
            break
        grad, var, base = shift_gradient(cost, x, None if cfg.shots is None else shots, cfg.seed, k)
        _record(cost, trace, k, x, base, spent, lr, grad, cfg)
        if cfg.target_cost is not None and trace.final.noisy_cost <= cfg.target_cost:
            reason = "target"
            break
        x = x - lr * grad
        xi = cfg.mu * xi + (1 - cfg.mu) * var
        chi = cfg.mu * chi + (1 - cfg.mu) * grad
        xi_hat = xi / (1 - cfg.mu ** (k + 1))
        chi_hat = chi / (1 - cfg.mu ** (k + 1))
        want = 2 * lip * lr / (2 - lip * lr) * xi_hat / (chi_hat**2 + cfg.bias * cfg.mu**k)
        want = np.ceil(np.nan_to_num(want, nan=n_min, posinf=1e12))
        want = np.maximum(want, n_min)
        gain = ((lr - lip * lr**2 / 2) * chi_hat**2 - lip * lr**2 * xi_hat / (2 * want)) / want
        cap = want[int(np.argmax(gain))]
        shots = np.clip(want, n_min, max(cap, n_min)).astype(np.int64)
    return _finish(cost, trace, cfg, reason, t0)


def config_dict(cfg: OptimizerConfig) -> dict:
    d = asdict(cfg)
    d["n_min_raise"] = [list(p) for p in cfg.n_min_raise]
    return d

"""Command-line driver: ``compile``, ``verify`` and ``sweep``.

Exit codes: 0 success, 1 a verification failed, 2 the config could not be
parsed, 3 the config or inputs are invalid, 4 a runtime failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.stats import unitary_group

from . import ansatz as ansatz_mod
from . import costs, noise_models, optimizer, targets, verifier
from .channels import random_pauli_channel
from .circuits import Gate, GateSequence, cnot, h, p, rotation, s, t, tdg, x
from .errors import NoisyVQCError
from .sim import make_rng

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3, 4
WORKERS_ENV = "NOISYVQC_WORKERS"
SUITES = ("affine", "thm1", "thm2", "thm3", "corollaries", "warmup", "sandwiches")


class ConfigParseError(Exception):
    pass


class ConfigError(Exception):
    pass


# -- configuration ------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    target: str | dict
    approach: str = "FUMC"
    cost: str = "lhst"
    q: float | None = None
    ansatz: dict = field(default_factory=lambda: {"type": "target_inspired"})
    noise: dict = field(default_factory=lambda: {"model": "none"})
    optimizer: dict = field(default_factory=dict)
    seed: int | None = None
    output: str = "runs"

    def as_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in
                ("target", "approach", "cost", "q", "ansatz", "noise", "optimizer", "seed", "output")}


_OPT_KEYS = {f for f in optimizer.OptimizerConfig.__dataclass_fields__} | {"method", "init_scale"}
_KIND_APPROACH = {"hst": "FUMC", "lhst": "FUMC", "fumc": "FUMC", "let": "FISC", "llet": "FISC", "fisc": "FISC"}


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigParseError("config root must be a mapping")
    return data


def experiment_config(data: dict) -> ExperimentConfig:
    known = set(ExperimentConfig.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    if "target" not in data:
        raise ConfigError("config needs a target")
    if data.get("seed") is None:
        raise ConfigError("config needs an explicit seed")
    if not isinstance(data["seed"], int) or isinstance(data["seed"], bool):
        raise ConfigError("seed must be an integer")
    cfg = ExperimentConfig(**copy.deepcopy(data))
    cfg.approach = str(cfg.approach).upper()
    cfg.cost = str(cfg.cost).lower()
    if cfg.approach not in ("FUMC", "FISC"):
        raise ConfigError("approach must be FUMC or FISC")
    if _KIND_APPROACH.get(cfg.cost) != cfg.approach:
        raise ConfigError(f"cost {cfg.cost!r} does not belong to approach {cfg.approach}")
    if cfg.cost in ("fumc", "fisc") and cfg.q is None:
        raise ConfigError("weighted costs need q")
    bad = set(cfg.optimizer) - _OPT_KEYS
    if bad:
        raise ConfigError(f"unknown optimizer keys: {sorted(bad)}")
    return cfg


_GATES = {"h": h, "x": x, "s": s, "t": t, "tdg": tdg}


def build_target(spec) -> GateSequence:
    if isinstance(spec, str):
        try:
            return targets.get_target(spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if not isinstance(spec, dict) or "n" not in spec or "gates" not in spec:
        raise ConfigError("inline targets need 'n' and 'gates'")
    gates = []
    for item in spec["gates"]:
        name, *args = item
        name = str(name).lower()
        try:
            if name in _GATES:
                gates.append(_GATES[name](int(args[0])))
            elif name in ("cnot", "cx"):
                gates.append(cnot(int(args[0]), int(args[1])))
            elif name == "p":
                gates.append(p(int(args[0]), float(args[1])))
            elif name in ("rx", "ry", "rz"):
                gates.append(Gate(name, (int(args[0]),), fixed=rotation(name[1], float(args[1]))))
            else:
                raise ConfigError(f"unknown gate {name!r} in inline target")
        except (IndexError, TypeError) as exc:
            raise ConfigError(f"malformed gate entry {item!r}") from exc
    return GateSequence(int(spec["n"]), gates)


def build_ansatz(spec: dict, u: GateSequence) -> ansatz_mod.Ansatz:
    kind = spec.get("type", "target_inspired")
    if kind == "target_inspired":
        return ansatz_mod.target_inspired(u)
    if kind == "alternating_pair":
        return ansatz_mod.alternating_pair(u.n, int(spec.get("layers", 2)), spec.get("orientation", "lower"))
    raise ConfigError(f"unknown ansatz type {kind!r}")


def build_noise(spec: dict, n: int, approach: str, seed: int):
    model = str(spec.get("model", "none")).lower()
    params = dict(spec.get("params", {}) or {})
    if model == "none":
        return None
    if model == "hardware":
        scale = float(spec.get("scale", 1.0))
        base = noise_models.HardwareParams(**params) if params else noise_models.HardwareParams()
        if scale != 1.0:
            base = noise_models.HardwareParams(**{**base.__dict__, "depol_1q": base.depol_1q * scale,
                                                  "depol_2q": base.depol_2q * scale})
        return noise_models.hardware_like(n, approach, base)
    if model == "global_depolarizing":
        return noise_models.NoiseSchedule(n=n, continuous_global_depol=float(params.get("p", 0.99)))
    if model in ("random_nm1", "random_nm2", "random_nm3"):
        rng = make_rng((seed, 17))
        return getattr(noise_models, model)(n, rng)
    raise ConfigError(f"unknown noise model {model!r}")


def _optimizer_config(spec: dict, seed: int, overrides: dict) -> tuple[str, float, optimizer.OptimizerConfig]:
    spec = {**spec, **{k: v for k, v in overrides.items() if v is not None}}
    method = spec.pop("method", "gd")
    scale = float(spec.pop("init_scale", 0.3))
    if "n_min_raise" in spec:
        spec["n_min_raise"] = tuple(tuple(x) for x in spec["n_min_raise"])
    spec["seed"] = seed
    if method not in ("gd", "icans"):
        raise ConfigError(f"unknown optimizer method {method!r}")
    return method, scale, optimizer.OptimizerConfig(**spec)


# -- compile ------------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def trace_csv(trace: optimizer.OptimizerTrace) -> str:
    rows = trace.to_rows()
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(rows[0]))
    for r in rows:
        w.writerow([_fmt(v) for v in r.values()])
    return buf.getvalue()


@dataclass
class CompileJob:
    cfg: ExperimentConfig
    ansatz: ansatz_mod.Ansatz
    noise: object
    cost: costs.VariationalCost
    method: str
    init_scale: float
    opt: optimizer.OptimizerConfig


def prepare_compile(cfg: ExperimentConfig, overrides: dict | None = None) -> CompileJob:
    """Resolve every name in the config; all input errors surface here."""
    u = build_target(cfg.target)
    a = build_ansatz(cfg.ansatz, u)
    noise = build_noise(cfg.noise, u.n, cfg.approach, cfg.seed)
    cost = costs.VariationalCost(cfg.cost, u, a.template, noise, q=cfg.q)
    method, scale, ocfg = _optimizer_config(dict(cfg.optimizer), cfg.seed, overrides or {})
    if method == "icans" and ocfg.budget is None:
        raise ConfigError("the adaptive optimizer needs a budget")
    return CompileJob(cfg, a, noise, cost, method, scale, ocfg)


def run_compile(job: CompileJob, out_dir: Path) -> dict:
    cfg, a, noise, cost, method, scale, ocfg = (job.cfg, job.ansatz, job.noise, job.cost, job.method,
                                                job.init_scale, job.opt)
    init = np.random.default_rng(cfg.seed).normal(0.0, scale, a.param_count)
    if method == "gd":
        trace = optimizer.gradient_descent(cost, init, ocfg)
    else:
        trace = optimizer.adaptive_shot_descent(cost, init, ocfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.csv").write_text(trace_csv(trace))
    fin = trace.final
    summary = {
        "final_params": [float(v) for v in fin.params],
        "final_noisy_cost": fin.noisy_cost,
        "final_noiseless_cost": fin.noiseless_cost,
        "iterations": len(trace.records),
        "total_shots": trace.total_shots,
        "termination": trace.termination,
        "wall_time": trace.wall_time,
        "seed": cfg.seed,
        "ansatz": a.describe(),
        "noise": None if noise is None else noise.describe(),
        "optimizer": {"method": method, "init_scale": scale, **optimizer.config_dict(ocfg)},
        "config": cfg.as_dict(),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    return summary


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    raise TypeError(f"cannot serialize {type(o).__name__}")


# -- verify -------------------------------------------------------------------------

def _haar(d, rng):
    return unitary_group.rvs(d, random_state=rng)


def run_verify(suite: str, params: dict, seed: int) -> dict:
    """Run one verification suite; returns ``{"suite", "passed", "checks"}``."""
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {list(SUITES)}")
    rng = make_rng((seed, SUITES.index(suite)))
    checks = []
    n = int(params.get("n", 2))
    count = int(params.get("instances", 3))
    if suite == "affine":
        for k in ("hst", "lhst", "let", "llet"):
            for nn in params.get("ns", [1, 2]):
                d = 1 << nn
                layers = params.get("layers", [0.9, 0.8])
                r = verifier.check_depolarizing_affine(k, _haar(d, rng), _haar(d, rng), layers,
                                                       continuous=float(params.get("continuous", 0.99)))
                checks.append({"kind": k, "n": nn, "passed": r.passed, "residual": r.residual,
                               "p_tot": r.details["p_tot"]})
    elif suite in ("thm1", "thm2"):
        theorem = 1 if suite == "thm1" else 2
        for i in range(count):
            noise = noise_models.random_nm1(n, rng) if theorem == 1 else noise_models.random_nm2(n, rng)
            rep = verifier.check_strong_opr_fumc(theorem, _haar(1 << n, rng), noise,
                                                 trials=int(params.get("trials", 50)), seed=(seed, i),
                                                 slices=int(params.get("slices", 3)))
            checks.append({"instance": i, "passed": rep.passed, "margin": rep.margin,
                           "max_slice_gap": rep.details["max_slice_gap"], "counterexample": rep.counterexample})
    elif suite == "thm3":
        for i in range(count):
            noise = noise_models.random_nm3(n, rng)
            rep = verifier.check_weak_opr_fisc(_haar(1 << n, rng), noise, samples=int(params.get("samples", 0)))
            checks.append({"instance": i, "passed": rep.passed, "margin": rep.margin,
                           "let_max": rep.details["let"]["max"], "let_bound": rep.details["let"]["bound"],
                           "rearrangement_bound": rep.details["let"]["raw_bound"],
                           "llet_max": rep.details["llet"]["max"], "llet_bound": rep.details["llet"]["bound"],
                           "degenerate": rep.details["degenerate"]})
    elif suite == "corollaries":
        for i in range(count):
            w = verifier.random_clifford(n, rng)
            r = verifier.check_corollary_condition("clifford", [w], [random_pauli_channel(n, rng)])
            checks.append({"mode": "clifford", "passed": r.passed, "residual": r.residual})
            wa, wb = _haar(2, rng), _haar(1 << max(n - 1, 1), rng)
            r = verifier.check_corollary_condition("tensor_depol", [(wa, wb)], [tuple(rng.uniform(0.5, 1, 2))])
            checks.append({"mode": "tensor_depol", "passed": r.passed, "residual": r.residual})
        r = verifier.check_corollary_condition("ricochet", rng=rng, trials=count)
        checks.append({"mode": "ricochet", "passed": r.passed, "residual": r.residual})
    elif suite == "warmup":
        rows = params.get("readout_rows")
        for i in range(count):
            rr = [tuple(r) for r in rows] if rows is not None else [tuple(rng.uniform(0.6, 1, 2)) for _ in range(n)]
            nn = len(rr)
            r = verifier.vqe_warmup_check(rng.uniform(0.1, 2, nn), [_haar(2, rng) for _ in range(nn)], rr)
            checks.append({"instance": i, "passed": r.passed, "residual": r.residual})
    elif suite == "sandwiches":
        r = verifier.check_cost_sandwiches(int(params.get("trials", 200)), seed=(seed, 1))
        checks.append({"passed": r.passed, "worst_gap": r.residual, "where": r.details["worst"]})
    return {"suite": suite, "seed": seed, "params": params,
            "passed": all(c["passed"] for c in checks), "checks": checks}


# -- sweep --------------------------------------------------------------------------

def _with_value(data: dict, key: str, value: float) -> dict:
    data = copy.deepcopy(data)
    if key == "q":
        data["q"] = value
    else:
        data["noise"] = {**data.get("noise", {}), "scale": value}
    return data


def _sweep_point(args):
    data, key, value, out_dir, overrides = args
    job = prepare_compile(experiment_config(_with_value(data, key, value)), overrides)
    s = run_compile(job, Path(out_dir))
    return {key: value, "final_noisy_cost": s["final_noisy_cost"],
            "final_noiseless_cost": s["final_noiseless_cost"], "total_shots": s["total_shots"],
            "termination": s["termination"]}


def check_sweep(data: dict, key: str, values, overrides: dict) -> None:
    if key not in ("q", "noise_scale"):
        raise ConfigError("sweep key must be q or noise_scale")
    if not values:
        raise ConfigError("sweep needs at least one value")
    for v in values:
        prepare_compile(experiment_config(_with_value(data, key, float(v))), overrides)


def run_sweep(data: dict, key: str, values, out: Path, overrides: dict) -> list[dict]:
    jobs = [(data, key, float(v), str(out / f"point_{i:03d}"), overrides) for i, v in enumerate(values)]
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(rows[0]))
    for r in rows:
        w.writerow([_fmt(v) for v in r.values()])
    (out / "sweep.csv").write_text(buf.getvalue())
    return rows


# -- entry point --------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noisyvqc", description="Noisy variational quantum compiling experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")

    c = sub.add_parser("compile", help="train an ansatz on a target and write trace.csv and summary.json")
    c.add_argument("config")
    common(c)
    c.add_argument("--shots", type=int, help="override shots per shifted circuit")
    c.add_argument("--budget", type=int, help="override the total shot budget")

    v = sub.add_parser("verify", help="run a verification suite and write a JSON report")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--config", help="YAML mapping of suite parameters")
    common(v)

    s = sub.add_parser("sweep", help="repeat a compile run over a grid of q or noise scales")
    s.add_argument("config")
    s.add_argument("--key", choices=("q", "noise_scale"), required=True)
    s.add_argument("--values", type=float, nargs="+", required=True)
    common(s)
    s.add_argument("--shots", type=int)
    s.add_argument("--budget", type=int)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            params = load_config(args.config) if args.config else {}
            seed = args.seed if args.seed is not None else int(params.pop("seed", 0))
            params.pop("seed", None)
            run = lambda: _verify(args, params, seed)  # noqa: E731
        else:
            data = load_config(args.config)
            if args.seed is not None:
                data["seed"] = args.seed
            overrides = {"shots": args.shots, "budget": args.budget}
            cfg = experiment_config(data)
            out = Path(args.out or cfg.output)
            if args.command == "compile":
                job = prepare_compile(cfg, overrides)
                run = lambda: _compile(job, out)  # noqa: E731
            else:
                check_sweep(data, args.key, args.values, overrides)
                run = lambda: _sweep(data, args, out, overrides)  # noqa: E731
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, NoisyVQCError, ValueError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return run()
    except (ConfigError, NoisyVQCError) as exc:
        # verification suites build their inputs lazily
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _verify(args, params, seed) -> int:
    report = run_verify(args.suite, params, seed)
    text = json.dumps(report, indent=2, default=_json_default, sort_keys=True)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"verify_{args.suite}.json").write_text(text + "\n")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _compile(job, out) -> int:
    s = run_compile(job, out)
    print(json.dumps({k: s[k] for k in ("final_noisy_cost", "final_noiseless_cost", "total_shots", "termination")}))
    return EXIT_OK


def _sweep(data, args, out, overrides) -> int:
    for row in run_sweep(data, args.key, args.values, out, overrides):
        print(json.dumps(row))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

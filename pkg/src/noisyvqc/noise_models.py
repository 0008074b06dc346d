"""Noise schedules: which channels act where in the cost-evaluation circuits.

A schedule names channel insertions at circuit epochs.  For the FUMC circuits
the register is ``A_1..A_n B_1..B_n`` and subsystem labels are ``"AB"``,
``"A"`` and ``"B"``; for the FISC circuits only ``"A"`` exists.  The program
builder in :mod:`noisyvqc.costs` turns a schedule into a flat op list.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import (
    Channel,
    NoisyPovm,
    amplitude_damping,
    depolarizing,
    measurement_noise,
    nonunital_pauli_from_locals,
    pauli_channel,
    random_pauli_channel,
    thermal_relaxation,
)
from .errors import NoiseModelError

TAGS = ("NM1", "NM2", "NM3", "hardware", "custom")
SPANS = ("global", "touched", "each")


@dataclass(frozen=True)
class Placement:
    """A channel on a subsystem; ``local`` selects qubits inside it (``None`` = all)."""

    channel: Channel
    subsystem: str = "AB"
    local: tuple[int, ...] | None = None


@dataclass(frozen=True)
class GateNoise:
    """Channels around a gate.  ``span`` is ``global`` (whole register),
    ``touched`` (the gate's qubits) or ``each`` (a one-qubit channel on every
    touched qubit)."""

    pre: tuple[tuple[Channel, str], ...] = ()
    post: tuple[tuple[Channel, str], ...] = ()


@dataclass(frozen=True)
class NoiseSchedule:
    n: int
    tag: str = "custom"
    continuous_global_depol: float = 1.0
    tau1: tuple[Placement, ...] = ()
    tau2: tuple[Placement, ...] = ()
    during_w_A: tuple[Placement, ...] = ()
    during_w_B: tuple[Placement, ...] = ()
    gate_noise: dict = field(default_factory=dict)
    gate_noise_scope: str = "entanglers"
    readout: NoisyPovm | None = None
    strict: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise NoiseModelError(f"unknown noise model tag {self.tag!r}")
        p = float(self.continuous_global_depol)
        if not 0 <= p <= 1:
            raise NoiseModelError("global depolarizing parameter must lie in [0, 1]")
        if self.gate_noise_scope not in ("entanglers", "all"):
            raise NoiseModelError("gate_noise_scope must be 'entanglers' or 'all'")
        for key, gn in self.gate_noise.items():
            if key not in ("1q", "2q"):
                raise NoiseModelError(f"gate noise class {key!r} is not 1q or 2q")
            for ch, span in gn.pre + gn.post:
                if span not in SPANS:
                    raise NoiseModelError(f"gate-noise span {span!r}")
        for pl in self.tau1 + self.tau2 + self.during_w_A + self.during_w_B:
            if pl.subsystem not in ("AB", "A", "B"):
                raise NoiseModelError(f"unknown subsystem {pl.subsystem!r}")
            size = self.subsystem_size(pl.subsystem) if pl.local is None else len(pl.local)
            if pl.channel.arity != size:
                raise NoiseModelError(
                    f"{pl.channel.kind} channel of arity {pl.channel.arity} placed on {size} qubits")
        for pl in self.during_w_A:
            if pl.subsystem != "A":
                raise NoiseModelError("during_w_A channels must sit on subsystem A")
        for pl in self.during_w_B:
            if pl.subsystem != "B":
                raise NoiseModelError("during_w_B channels must sit on subsystem B")
        validate_tag(self)

    def subsystem_size(self, sub: str) -> int:
        return 2 * self.n if sub == "AB" else self.n

    @property
    def is_identity(self) -> bool:
        return (self.continuous_global_depol == 1.0 and not self.tau1 and not self.tau2
                and not self.during_w_A and not self.during_w_B and not self.gate_noise
                and self.readout is None)

    def has_nonunital(self) -> bool:
        chans = [pl.channel for pl in self.tau1 + self.tau2 + self.during_w_A + self.during_w_B]
        for gn in self.gate_noise.values():
            chans += [c for c, _ in gn.pre + gn.post]
        return any(not c.is_unital for c in chans)

    def describe(self) -> dict:
        def pl(items):
            return [{"kind": p.channel.kind, "subsystem": p.subsystem, "arity": p.channel.arity,
                     "params": _jsonable(p.channel.params)} for p in items]

        return {
            "tag": self.tag,
            "n": self.n,
            "continuous_global_depol": self.continuous_global_depol,
            "tau1": pl(self.tau1),
            "tau2": pl(self.tau2),
            "during_w_A": pl(self.during_w_A),
            "during_w_B": pl(self.during_w_B),
            "gate_noise": {k: {"pre": [c.kind for c, _ in v.pre], "post": [c.kind for c, _ in v.post]}
                           for k, v in self.gate_noise.items()},
            "gate_noise_scope": self.gate_noise_scope,
            "readout": None if self.readout is None else [m.tolist() for m in self.readout.rows],
            "params": _jsonable(self.params),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj if isinstance(obj, (str, bool, type(None))) else str(obj)


def _is_pauli(ch: Channel) -> bool:
    return ch.kind in ("pauli", "depolarizing")


def _is_nupn(ch: Channel) -> bool:
    return ch.kind in ("pauli", "depolarizing", "nonunital_pauli")


def _nonnegative(ch: Channel) -> bool:
    return ch.transfer_array is not None and float(np.min(ch.transfer_array.real)) >= -1e-12


def validate_tag(s: NoiseSchedule) -> None:
    """Check that every channel sits in a slot its model tag allows."""
    if s.tag in ("custom", "hardware"):
        return

    def fail(msg):
        raise NoiseModelError(f"{s.tag}: {msg}")

    if s.gate_noise_scope != "entanglers":
        fail("gate noise is only allowed on the entangling gates")
    for gn in s.gate_noise.values():
        for ch, span in gn.pre + gn.post:
            if span != "global" or not _is_pauli(ch):
                fail("gate noise must be global Pauli channels")
    if s.tag == "NM3":
        if s.tau2 or s.during_w_A or s.during_w_B or s.gate_noise:
            fail("only global depolarizing, a Pauli channel at tau1 and readout noise are allowed")
        for pl in s.tau1:
            if not _is_pauli(pl.channel) or pl.subsystem != "A" or pl.local is not None:
                fail("the tau1 channel must be a global Pauli channel")
    else:
        for pl in s.tau2:
            if not _is_pauli(pl.channel) or pl.subsystem != "AB":
                fail("tau2 channels must be global Pauli channels on AB")
        for pl in s.tau1:
            if pl.subsystem == "AB" and _is_pauli(pl.channel):
                continue
            if s.tag == "NM2" and pl.subsystem == "A" and _is_nupn(pl.channel):
                continue
            fail(f"{pl.channel.kind} channel on {pl.subsystem} is not allowed at tau1")
        for pl in s.during_w_A:
            if pl.channel.kind != "depolarizing" or pl.local is not None:
                fail("only global depolarizing noise may act on A during W")
        for pl in s.during_w_B:
            ok = _is_nupn(pl.channel) if s.tag == "NM1" else _is_pauli(pl.channel)
            if not ok:
                fail(f"{pl.channel.kind} channel is not allowed on B during W")
    if s.strict:
        chans = [pl.channel for pl in s.tau1 + s.tau2 + s.during_w_A + s.during_w_B]
        for gn in s.gate_noise.values():
            chans += [c for c, _ in gn.pre + gn.post]
        for ch in chans:
            if not _nonnegative(ch):
                fail(f"{ch.kind} channel has a negative transfer coefficient")


def _rows(readout, m: int) -> NoisyPovm | None:
    if readout is None or isinstance(readout, NoisyPovm):
        return readout
    rows = list(readout)
    if len(rows) == 1 and m > 1:
        rows = rows * m
    return measurement_noise(rows)


def _gate_noise(pre: Channel | None, post: Channel | None) -> dict:
    if pre is None and post is None:
        return {}
    gn = GateNoise(tuple([(pre, "global")] if pre is not None else []),
                   tuple([(post, "global")] if post is not None else []))
    return {"1q": gn, "2q": gn}


def noise_model_1(
    n: int,
    depol: float = 1.0,
    tau1: Channel | None = None,
    tau2: Channel | None = None,
    depol_A: float = 1.0,
    nupn_B: Channel | None = None,
    gate_pre: Channel | None = None,
    gate_post: Channel | None = None,
    readout=None,
    strict: bool = True,
) -> NoiseSchedule:
    """Global depolarizing throughout, Pauli at tau1/tau2, depolarizing on A and
    non-unital Pauli on B during W, Pauli gate noise on E and E^dagger, readout."""
    return NoiseSchedule(
        n=n,
        tag="NM1",
        continuous_global_depol=depol,
        tau1=(Placement(tau1, "AB"),) if tau1 is not None else (),
        tau2=(Placement(tau2, "AB"),) if tau2 is not None else (),
        during_w_A=(Placement(depolarizing(depol_A, n), "A"),) if depol_A != 1.0 else (),
        during_w_B=(Placement(nupn_B, "B"),) if nupn_B is not None else (),
        gate_noise=_gate_noise(gate_pre, gate_post),
        readout=_rows(readout, 2 * n),
        strict=strict,
    )


def noise_model_2(
    n: int,
    depol: float = 1.0,
    tau1: Channel | None = None,
    tau2: Channel | None = None,
    nupn_A: Channel | None = None,
    depol_A: float = 1.0,
    pauli_B: Channel | None = None,
    gate_pre: Channel | None = None,
    gate_post: Channel | None = None,
    readout=None,
    strict: bool = True,
) -> NoiseSchedule:
    """As Noise Model 1, except non-unital Pauli noise hits A at tau1 and only
    Pauli noise acts on B during W."""
    t1 = []
    if tau1 is not None:
        t1.append(Placement(tau1, "AB"))
    if nupn_A is not None:
        t1.append(Placement(nupn_A, "A"))
    return NoiseSchedule(
        n=n,
        tag="NM2",
        continuous_global_depol=depol,
        tau1=tuple(t1),
        tau2=(Placement(tau2, "AB"),) if tau2 is not None else (),
        during_w_A=(Placement(depolarizing(depol_A, n), "A"),) if depol_A != 1.0 else (),
        during_w_B=(Placement(pauli_B, "B"),) if pauli_B is not None else (),
        gate_noise=_gate_noise(gate_pre, gate_post),
        readout=_rows(readout, 2 * n),
        strict=strict,
    )


def noise_model_3(
    n: int,
    depol: float = 1.0,
    tau1: Channel | None = None,
    readout=None,
    tau2: Channel | None = None,
    strict: bool = True,
) -> NoiseSchedule:
    """Global depolarizing throughout, a Pauli channel at tau1 and readout noise."""
    if tau2 is not None:
        raise NoiseModelError("NM3: measurement follows W immediately; no tau2 channel exists")
    return NoiseSchedule(
        n=n,
        tag="NM3",
        continuous_global_depol=depol,
        tau1=(Placement(tau1, "A"),) if tau1 is not None else (),
        readout=_rows(readout, n),
        strict=strict,
    )


@dataclass(frozen=True)
class HardwareParams:
    depol_1q: float = 1e-3
    depol_2q: float = 2e-2
    t1: float = 50e-6
    t2: float = 70e-6
    time_1q: float = 100e-9
    time_2q: float = 300e-9
    readout: tuple = ((0.97, 0.97),)


def hardware_like(n: int, approach: str = "FUMC", params: HardwareParams | None = None, **overrides) -> NoiseSchedule:
    """Per-gate depolarizing then thermal relaxation on every gate, plus readout noise.

    ``depol_1q``/``depol_2q`` are error rates: the depolarizing channel keeps the
    state with probability ``1 - rate``.
    """
    hp = params or HardwareParams()
    if overrides:
        hp = HardwareParams(**{**hp.__dict__, **overrides})
    thermal_1q = thermal_relaxation(hp.t1, hp.t2, hp.time_1q)
    thermal_2q = thermal_relaxation(hp.t1, hp.t2, hp.time_2q)
    gn = {
        "1q": GateNoise((), ((depolarizing(1 - hp.depol_1q, 1), "touched"), (thermal_1q, "each"))),
        "2q": GateNoise((), ((depolarizing(1 - hp.depol_2q, 2), "touched"), (thermal_2q, "each"))),
    }
    m = 2 * n if approach.upper() == "FUMC" else n
    readout = _rows(hp.readout, m) if any(r != (1.0, 1.0) for r in map(tuple, hp.readout)) else None
    return NoiseSchedule(n=n, tag="hardware", gate_noise=gn, gate_noise_scope="all", readout=readout,
                         params={k: v for k, v in hp.__dict__.items()})


# -- random instances for theorem checks ---------------------------------------

def random_readout_rows(m: int, rng: np.random.Generator, low: float = 0.75) -> list[tuple[float, float]]:
    return [tuple(rng.uniform(low, 1.0, size=2)) for _ in range(m)]


def amplitude_damping_product(gammas: Sequence[float]) -> Channel:
    return nonunital_pauli_from_locals([amplitude_damping(g) for g in gammas])


def reset_mixture(p: float, sigma_diag: Sequence[float]) -> Channel:
    """``rho -> p rho + (1 - p) sigma`` with ``sigma`` diagonal.

    Non-identity Paulis scale by ``p`` and the identity picks up
    ``(1 - p)(d sigma - 1)``, a global non-unital Pauli channel.
    """
    from .pauli import pauli_expand

    sigma_diag = np.asarray(sigma_diag, dtype=float)
    d = sigma_diag.size
    if abs(sigma_diag.sum() - 1) > 1e-12 or np.any(sigma_diag < 0):
        raise NoiseModelError("sigma must be a probability vector")
    if not 0 <= p <= 1:
        raise NoiseModelError("p must lie in [0, 1]")
    n = d.bit_length() - 1
    kraus = [np.sqrt(p) * np.eye(d)]
    for i in range(d):
        for j in range(d):
            if sigma_diag[i] > 0:
                k = np.zeros((d, d))
                k[i, j] = np.sqrt((1 - p) * sigma_diag[i])
                kraus.append(k)
    transfer = np.full((d, d), p)
    transfer[0, 0] = 1.0
    affine = (1 - p) * pauli_expand(d * np.diag(sigma_diag) - np.eye(d)).array
    affine[0, 0] = 0
    return Channel(n, kraus, "nonunital_pauli", transfer, affine,
                   params={"p": p, "sigma": sigma_diag.tolist()}, validate=n <= 2)


def random_nm1(n: int, rng: np.random.Generator) -> NoiseSchedule:
    return noise_model_1(
        n,
        depol=rng.uniform(0.9, 1.0),
        tau1=random_pauli_channel(2 * n, rng),
        tau2=random_pauli_channel(2 * n, rng),
        depol_A=rng.uniform(0.8, 1.0),
        nupn_B=amplitude_damping_product(rng.uniform(0, 0.3, size=n)),
        gate_pre=random_pauli_channel(2 * n, rng, (0.85, 0.99)),
        gate_post=random_pauli_channel(2 * n, rng, (0.85, 0.99)),
        readout=random_readout_rows(2 * n, rng),
    )


def random_nm2(n: int, rng: np.random.Generator, global_nupn: bool = False) -> NoiseSchedule:
    if global_nupn:
        nupn = reset_mixture(rng.uniform(0.6, 0.95), rng.dirichlet(np.ones(1 << n)))
    else:
        nupn = amplitude_damping_product(rng.uniform(0, 0.3, size=n))
    return noise_model_2(
        n,
        depol=rng.uniform(0.9, 1.0),
        tau1=random_pauli_channel(2 * n, rng),
        tau2=random_pauli_channel(2 * n, rng),
        nupn_A=nupn,
        depol_A=rng.uniform(0.8, 1.0),
        pauli_B=random_pauli_channel(n, rng),
        gate_pre=random_pauli_channel(2 * n, rng, (0.85, 0.99)),
        gate_post=random_pauli_channel(2 * n, rng, (0.85, 0.99)),
        readout=random_readout_rows(2 * n, rng),
    )


def random_nm3(n: int, rng: np.random.Generator) -> NoiseSchedule:
    return noise_model_3(
        n,
        depol=rng.uniform(0.85, 1.0),
        tau1=random_pauli_channel(n, rng),
        readout=random_readout_rows(n, rng),
    )


def pauli_from_spec(spec: dict, arity: int) -> Channel:
    """Build a Pauli channel from ``{"I": 0.9, "X": 0.1}``-style config maps."""
    return pauli_channel(dict(spec), arity=arity)

"""Cerebellar forward model predicting task-space velocity.

Layout per task DOF j and sign s in {+, -}: a Purkinje assembly ``pc{s}{j}``,
an inferior-olive assembly ``io{s}{j}`` and a deep-nuclei assembly
``dcn{s}{j}``. Mossy fibres encode joint angles, the joint-velocity command
and the delayed task velocity; granule cells each sample one mossy fibre per
assembly. Parallel-fibre (GC->PC) synapses learn under the anti-symmetric
rule; an update needs recent olive activity for that DOF.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .coding import Codec, SignedPairDecode, decode_signed_pair
from .snn import (
    Network, NeuronParams, PlasticityRule, all_to_all, firing_rates, one_to_one,
    probabilistic, random_fan_in,
)

SIGNS = ("+", "-")


@dataclass
class CBConfig:
    n_ts: int = 2
    m: int = 2
    mf_params: NeuronParams = NeuronParams(0.1, 0.2, -65.0, 2.0)
    gc_params: NeuronParams = NeuronParams(0.02, 0.25, -65.0, 2.0)
    pc_params: NeuronParams = NeuronParams(1.0, 1.5, -60.0, 0.0)
    io_params: NeuronParams = NeuronParams(0.1, 0.2, -65.0, 2.0)
    dcn_params: NeuronParams = NeuronParams(0.05, 0.1, -65.0, 2.0)
    n_mf: int = 20
    n_gc: int = 1000
    n_pc: int = 8
    n_io: int = 8
    n_dcn: int = 4
    w_mf_gc: float = 1.6
    w_mf_dcn: float = 1.0
    p_gc_pc: float = 0.8
    w_gc_pc: float = 0.2
    w_gc_pc_max: float = 8.0
    w_io_pc: float = 500.0
    w_io_dcn: float = 1.7
    w_pc_dcn: float = -5.0
    s_a: float = 0.005
    s_b: float = 0.00065
    tau_a: float = 20.0
    tau_b: float = 20.0
    stdp_window: float = 30.0
    gate_window: float = 50.0
    # "dof": either olive assembly of the DOF opens plasticity on both signs;
    # "sign": only the matching olive assembly does
    gating: str = "dof"
    io_rate_max: float = 50.0
    dcn_rate_max: float = 100.0
    io_deadband: float = 0.005
    xdot_max: tuple = (0.05, 0.05)
    mf_gain: float = 80.0
    pc_bias: float = -64.25
    dcn_bias: float = 6.0
    gc_bias: float = -2.0
    window_ms: float = 80.0
    theta_ranges: list = field(default_factory=lambda: [
        (float(np.deg2rad(-110.0)), float(np.deg2rad(-30.0))),
        (float(np.deg2rad(60.0)), float(np.deg2rad(150.0))),
    ])
    thetadot_range: tuple = (-0.2, 0.2)
    xdot_range: tuple = (-0.04, 0.04)
    printed_stdp: bool = False

    def __post_init__(self):
        sizes = (self.n_ts, self.m, self.n_mf, self.n_gc, self.n_pc, self.n_io, self.n_dcn)
        if min(sizes) < 1:
            raise ValueError("all population sizes must be at least 1")
        if len(self.xdot_max) != self.n_ts:
            raise ValueError("one xdot_max per task DOF")
        if self.gating not in ("dof", "sign"):
            raise ValueError("gating must be 'dof' or 'sign'")
        if self.io_deadband < 0:
            raise ValueError("io_deadband must be non-negative")

    @property
    def n_mf_assemblies(self) -> int:
        # joint angles and commands (joint space) + delayed task velocity
        return 2 * self.m + self.n_ts

    def rule(self, gate) -> PlasticityRule:
        return PlasticityRule.antisymmetric(
            self.s_a, self.s_b, self.tau_a, self.tau_b, window=self.stdp_window,
            gate=gate, gate_window=self.gate_window, printed_form=self.printed_stdp)


def assembly(kind: str, sign: str, dof: int) -> str:
    return f"{kind}{sign}{dof}"


@dataclass
class TeachingSignal:
    e_pred: np.ndarray

    def __post_init__(self):
        self.e_pred = np.asarray(self.e_pred, dtype=float)
        if not np.all(np.isfinite(self.e_pred)):
            raise ValueError("teaching signal must be finite")


@dataclass
class CBNetwork:
    config: CBConfig
    net: Network
    mf_codecs: list[Codec]
    io_current: float
    decoders: list[SignedPairDecode]
    last_context: np.ndarray | None = None
    last_record: object = None

    def mf_currents(self, theta, thetadot_cmd, xdot_s) -> np.ndarray:
        values = [*theta, *thetadot_cmd, *xdot_s]
        if len(values) != len(self.mf_codecs):
            raise ValueError("wrong number of mossy-fibre inputs")
        return np.concatenate([c.currents(float(np.clip(v, c.lo, c.hi)))
                               for c, v in zip(self.mf_codecs, values)])

    def pf_groups(self):
        return [self.net.group("gc", assembly("pc", s, j))
                for j in range(self.config.n_ts) for s in SIGNS]

    def pf_weights(self) -> np.ndarray:
        return np.concatenate([g.weights for g in self.pf_groups()], axis=1)

    def pf_mask(self) -> np.ndarray:
        return np.concatenate([g.mask for g in self.pf_groups()], axis=1)


@functools.lru_cache(maxsize=64)
def current_for_rate(params: NeuronParams, rate_hz: float, duration: float = 1000.0) -> float:
    """Constant input current at which a neuron fires at ``rate_hz`` (bisection)."""
    if rate_hz <= 0:
        return 0.0
    lo, hi = 0.0, 200.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        net = Network()
        net.add_population("n", params, 1)
        rec = net.run_window({"n": mid}, duration)
        if len(rec) * 1000.0 / duration < rate_hz:
            lo = mid
        else:
            hi = mid
    return hi


def build_cb(config: CBConfig, seed: int = 0) -> CBNetwork:
    rng = np.random.default_rng(seed)
    cfg = config
    net = Network()
    n_asm = cfg.n_mf_assemblies
    net.add_population("mf", cfg.mf_params, n_asm * cfg.n_mf)
    net.add_population("gc", cfg.gc_params, cfg.n_gc, bias=cfg.gc_bias)
    for j in range(cfg.n_ts):
        for s in SIGNS:
            net.add_population(assembly("pc", s, j), cfg.pc_params, cfg.n_pc, bias=cfg.pc_bias)
            net.add_population(assembly("io", s, j), cfg.io_params, cfg.n_io)
            net.add_population(assembly("dcn", s, j), cfg.dcn_params, cfg.n_dcn, bias=cfg.dcn_bias)

    groups = [range(a * cfg.n_mf, (a + 1) * cfg.n_mf) for a in range(n_asm)]
    net.connect("mf", "gc", random_fan_in(n_asm * cfg.n_mf, cfg.n_gc, n_asm, rng, groups=groups),
                weight=cfg.w_mf_gc, topology=f"random-fan-in({n_asm})")
    for j in range(cfg.n_ts):
        for s in SIGNS:
            pc, io, dcn = (assembly(k, s, j) for k in ("pc", "io", "dcn"))
            gate = io if cfg.gating == "sign" else tuple(assembly("io", t, j) for t in SIGNS)
            net.connect("gc", pc, probabilistic(cfg.n_gc, cfg.n_pc, cfg.p_gc_pc, rng),
                        weight=cfg.w_gc_pc, w_min=0.0, w_max=cfg.w_gc_pc_max,
                        rule=cfg.rule(gate), topology=f"probabilistic({cfg.p_gc_pc})")
            net.connect(io, pc, one_to_one(cfg.n_io, cfg.n_pc), weight=cfg.w_io_pc,
                        topology="one-to-one")
            net.connect(io, dcn, one_to_one(cfg.n_io, cfg.n_dcn), weight=cfg.w_io_dcn,
                        topology="one-to-one")
            net.connect(pc, dcn, one_to_one(cfg.n_pc, cfg.n_dcn), weight=cfg.w_pc_dcn,
                        topology="one-to-one")
            net.connect("mf", dcn, all_to_all(n_asm * cfg.n_mf, cfg.n_dcn),
                        weight=cfg.w_mf_dcn, topology="all-to-all")
    net.plasticity_enabled = False

    def codec(lo_hi):
        return Codec(lo_hi[0], lo_hi[1], cfg.n_mf, gain=cfg.mf_gain)

    codecs = ([codec(r) for r in cfg.theta_ranges]
              + [codec(cfg.thetadot_range) for _ in range(cfg.m)]
              + [codec(cfg.xdot_range) for _ in range(cfg.n_ts)])
    decoders = [SignedPairDecode(cfg.n_dcn, cfg.dcn_rate_max, x) for x in cfg.xdot_max]
    return CBNetwork(cfg, net, codecs, current_for_rate(cfg.io_params, cfg.io_rate_max),
                     decoders)


def decode_dcn(cb: CBNetwork, rates: dict[str, np.ndarray]) -> np.ndarray:
    return np.array([
        decode_signed_pair(dec, rates[assembly("dcn", "+", j)], rates[assembly("dcn", "-", j)])
        for j, dec in enumerate(cb.decoders)
    ])


def predict(cb: CBNetwork, theta, thetadot_cmd, xdot_s) -> np.ndarray:
    """One plasticity-free window; the mossy-fibre context is kept for teaching."""
    ctx = cb.mf_currents(theta, thetadot_cmd, xdot_s)
    cb.last_context = ctx
    cb.net.reset_state()
    rec = cb.net.run_window({"mf": ctx}, cb.config.window_ms, plasticity=False)
    cb.last_record = rec
    return decode_dcn(cb, firing_rates(rec, cb.config.window_ms))


def io_drive(cb: CBNetwork, e_pred) -> dict[str, float]:
    """Olive input currents: the assembly matching the error sign is driven."""
    cfg = cb.config
    drive = {}
    for j in range(cfg.n_ts):
        e = float(e_pred[j])
        drive[assembly("io", "+", j)] = cb.io_current if e > cfg.io_deadband else 0.0
        drive[assembly("io", "-", j)] = cb.io_current if e < -cfg.io_deadband else 0.0
    return drive


def teach(cb: CBNetwork, signal: TeachingSignal, context: np.ndarray | None = None):
    """Replay a mossy-fibre context with the olive driven by the error sign.

    Returns the spike record of the teaching window, or ``None`` when no
    olive assembly is driven (the window would change nothing).
    """
    if not isinstance(signal, TeachingSignal):
        signal = TeachingSignal(signal)
    if signal.e_pred.shape != (cb.config.n_ts,):
        raise ValueError(f"expected {cb.config.n_ts} error components")
    ctx = cb.last_context if context is None else context
    drive = io_drive(cb, signal.e_pred)
    if ctx is None or not any(drive.values()):
        return None
    cb.net.reset_state()
    return cb.net.run_window({"mf": ctx, **drive}, cb.config.window_ms, plasticity=True)

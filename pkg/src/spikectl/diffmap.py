"""Differential-map network: (joint angles, task velocity) -> joint velocities.

Two layers of Izhikevich neurons. The input layer holds one assembly per
task-space velocity component followed by one per joint angle; the output
layer holds one assembly per joint velocity. Input and output are joined by
an excitatory and an inhibitory all-to-all plastic group sharing the
symmetric STDP rule, and each output assembly has fixed lateral inhibition
that grows with the distance between neurons.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .coding import Codec, NoSignal, decode_population
from .snn import Network, NeuronParams, PlasticityRule, all_to_all, firing_rates


class RangeError(ValueError):
    """A training sample falls outside the configured encoding ranges."""


@dataclass
class DMConfig:
    n: int = 2
    m: int = 2
    neurons_per_assembly: int = 68
    input_params: NeuronParams = NeuronParams(0.1, 0.2, -65.0, 2.0)
    output_params: NeuronParams = NeuronParams(0.02, 0.15, -55.0, 6.0)
    s: float = 0.01
    tau1: float = 20.0
    tau2: float = 18.0
    stdp_window: float = 30.0
    c_e: float = 4.0
    c_i: float = -4.0
    init_scale: float = 0.01
    lateral_gain: float = 10.0
    output_bias: float = 4.0
    gain: float = 20.0
    window_ms: float = 80.0
    theta_ranges: list = field(default_factory=lambda: [
        (float(np.deg2rad(-110.0)), float(np.deg2rad(-30.0))),
        (float(np.deg2rad(60.0)), float(np.deg2rad(150.0))),
    ])
    xdot_range: tuple[float, float] = (-0.3, 0.3)
    thetadot_range: tuple[float, float] = (-0.5, 0.5)
    printed_stdp: bool = False

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be at least 1")
        if not self.c_e > 0 > self.c_i:
            raise ValueError("need c_e > 0 > c_i")
        if len(self.theta_ranges) != self.m:
            raise ValueError("one theta range per joint")

    def rule(self) -> PlasticityRule:
        return PlasticityRule.symmetric(self.s, self.tau1, self.tau2, window=self.stdp_window,
                                        printed_form=self.printed_stdp)


@dataclass
class DMNetwork:
    config: DMConfig
    net: Network
    xdot_codecs: list[Codec]
    theta_codecs: list[Codec]
    thetadot_codecs: list[Codec]
    trained_windows: int = 0

    @property
    def k(self) -> int:
        return self.config.neurons_per_assembly

    @property
    def excitatory(self):
        return self.net.groups[0]

    @property
    def inhibitory(self):
        return self.net.groups[1]

    @property
    def lateral(self):
        return self.net.groups[2]

    def input_assemblies(self) -> list[str]:
        return ([f"xdot{i}" for i in range(self.config.n)]
                + [f"theta{j}" for j in range(self.config.m)])

    def output_assemblies(self) -> list[str]:
        return [f"thetadot{j}" for j in range(self.config.m)]

    def _input_currents(self, theta, xdot) -> np.ndarray:
        parts = [c.currents(v) for c, v in zip(self.xdot_codecs, xdot)]
        parts += [c.currents(v) for c, v in zip(self.theta_codecs, theta)]
        return np.concatenate(parts)

    def _check(self, codecs, values, name):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(codecs),) or not np.all(np.isfinite(values)):
            raise RangeError(f"{name} must be {len(codecs)} finite values")
        for c, v in zip(codecs, values):
            if not c.contains(v):
                raise RangeError(f"{name}={v:.4g} outside [{c.lo:.4g}, {c.hi:.4g}]")
        return values


def lateral_inhibition(k: int, n_assemblies: int, gain: float) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal mask and weights ``-gain * distance / k`` within assemblies."""
    idx = np.arange(k)
    block = -gain * np.abs(idx[:, None] - idx[None, :]) / k
    mask = np.kron(np.eye(n_assemblies, dtype=bool), ~np.eye(k, dtype=bool))
    weights = np.kron(np.eye(n_assemblies), block)
    return mask, weights


def build_dm(config: DMConfig, seed: int = 0) -> DMNetwork:
    rng = np.random.default_rng(seed)
    k = config.neurons_per_assembly
    n_in = (config.n + config.m) * k
    n_out = config.m * k
    net = Network()
    net.add_population("input", config.input_params, n_in)
    net.add_population("output", config.output_params, n_out, bias=config.output_bias)
    rule = config.rule()
    net.connect("input", "output", all_to_all(n_in, n_out),
                weight=rng.uniform(0.0, config.init_scale, (n_in, n_out)),
                w_min=0.0, w_max=config.c_e, rule=rule, topology="all-to-all")
    net.connect("input", "output", all_to_all(n_in, n_out),
                weight=-rng.uniform(0.0, config.init_scale, (n_in, n_out)),
                w_min=config.c_i, w_max=0.0, rule=rule, topology="all-to-all")
    mask, w = lateral_inhibition(k, config.m, config.lateral_gain)
    net.connect("output", "output", mask, weight=w, topology="local-inhibition")
    net.plasticity_enabled = False

    def codec(lo_hi):
        return Codec(lo_hi[0], lo_hi[1], k, gain=config.gain)

    return DMNetwork(
        config, net,
        xdot_codecs=[codec(config.xdot_range) for _ in range(config.n)],
        theta_codecs=[codec(r) for r in config.theta_ranges],
        thetadot_codecs=[codec(config.thetadot_range) for _ in range(config.m)],
    )


def train_step(dm: DMNetwork, theta, xdot, thetadot) -> DMNetwork:
    """Present one babbling sample with both layers clamped by their codes."""
    theta = dm._check(dm.theta_codecs, theta, "theta")
    xdot = dm._check(dm.xdot_codecs, xdot, "xdot")
    thetadot = dm._check(dm.thetadot_codecs, thetadot, "thetadot")
    out = np.concatenate([c.currents(v) for c, v in zip(dm.thetadot_codecs, thetadot)])
    dm.net.reset_state()
    dm.net.run_window({"input": dm._input_currents(theta, xdot), "output": out},
                      dm.config.window_ms, plasticity=True)
    dm.trained_windows += 1
    return dm


def output_rates(dm: DMNetwork, theta, xdot) -> np.ndarray:
    """Output-layer rates (Hz) for one inference window, shape (m, k)."""
    theta = np.clip(np.asarray(theta, dtype=float),
                    [c.lo for c in dm.theta_codecs], [c.hi for c in dm.theta_codecs])
    xdot = np.clip(np.asarray(xdot, dtype=float),
                   [c.lo for c in dm.xdot_codecs], [c.hi for c in dm.xdot_codecs])
    dm.net.reset_state()
    rec = dm.net.run_window({"input": dm._input_currents(theta, xdot)},
                            dm.config.window_ms, plasticity=False)
    return firing_rates(rec, dm.config.window_ms)["output"].reshape(dm.config.m, dm.k)


def infer(dm: DMNetwork, theta, xdot) -> np.ndarray:
    """Joint-velocity command; a silent output assembly yields zero."""
    rates = output_rates(dm, theta, xdot)
    cmd = np.zeros(dm.config.m)
    for j, codec in enumerate(dm.thetadot_codecs):
        try:
            cmd[j] = decode_population(codec, rates[j])
        except NoSignal:
            cmd[j] = 0.0
    return cmd


# --- weight snapshots ---------------------------------------------------------

WEIGHT_HEADER = ["pre_assembly", "pre_idx", "post_assembly", "post_idx", "weight"]


def _assembly_labels(names: list[str], k: int):
    return [(names[i // k], i % k) for i in range(len(names) * k)]


def export_weights(dm: DMNetwork, path) -> None:
    """Write both plastic groups; the inhibitory one is tagged ``inh:``."""
    pre = _assembly_labels(dm.input_assemblies(), dm.k)
    post = _assembly_labels(dm.output_assemblies(), dm.k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WEIGHT_HEADER)
        for tag, group in (("", dm.excitatory), ("inh:", dm.inhibitory)):
            W = group.weights
            for i, (pa, pi) in enumerate(pre):
                for j, (qa, qj) in enumerate(post):
                    w.writerow([tag + pa, pi, qa, qj, repr(float(W[i, j]))])


def import_weights(dm: DMNetwork, path) -> None:
    ins = {name: a for a, name in enumerate(dm.input_assemblies())}
    outs = {name: a for a, name in enumerate(dm.output_assemblies())}
    k = dm.k
    exc, inh = dm.excitatory.weights, dm.inhibitory.weights
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            pa = row["pre_assembly"]
            target = exc
            if pa.startswith("inh:"):
                pa, target = pa[4:], inh
            i = ins[pa] * k + int(row["pre_idx"])
            j = outs[row["post_assembly"]] * k + int(row["post_idx"])
            target[i, j] = float(row["weight"])

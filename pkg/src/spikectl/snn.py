"""Clocked simulation of Izhikevich neuron populations with STDP synapses.

A :class:`Network` holds populations laid out in one flat neuron array and
synapse groups whose dense weight matrices live in one flat buffer. A window
of simulation is delegated to the compiled loop in :mod:`spikectl._kernel`.

Timing conventions: the global step is ``dt`` (1 ms by default); the membrane
equation is integrated in four sub-steps per tick while the recovery variable
is updated once per tick. A spike emitted at tick k is delivered as a current
pulse of size ``weight`` lasting exactly tick k+1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import _kernel

V_PEAK = _kernel.V_PEAK


class SimulationFault(RuntimeError):
    """A neuron state became non-finite (parameter or input blow-up)."""


@dataclass(frozen=True)
class NeuronParams:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d)
        if not all(math.isfinite(x) for x in vals):
            raise ValueError(f"non-finite neuron parameters {vals}")
        if self.a <= 0:
            raise ValueError("recovery time-scale a must be positive")

    def rest_state(self, i_ext: float = 0.0) -> tuple[float, float]:
        """Stable fixed point (v*, u*) for constant input, if one exists."""
        # 0.04 v^2 + (5 - b) v + 140 + I = 0, lower root is the stable node
        disc = (5.0 - self.b) ** 2 - 4 * 0.04 * (140.0 + i_ext)
        if disc < 0:
            raise ValueError("no resting state: neuron fires tonically at this input")
        v = (-(5.0 - self.b) - math.sqrt(disc)) / (2 * 0.04)
        return v, self.b * v


@dataclass
class NeuronState:
    v: float
    u: float
    i_ext: float = 0.0


def step_neuron(state: NeuronState, params: NeuronParams, dt: float = 1.0):
    """Advance a single neuron by one tick; returns ``(new_state, spiked)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (math.isfinite(state.v) and math.isfinite(state.u)):
        raise SimulationFault("non-finite neuron state")
    v, u, fired = _kernel.izh_step(
        float(state.v), float(state.u), float(state.i_ext),
        params.a, params.b, params.c, params.d, float(dt),
    )
    if not (math.isfinite(v) and math.isfinite(u)):
        raise SimulationFault(f"neuron diverged (v={v}, u={u})")
    return NeuronState(v, u, state.i_ext), bool(fired)


# --- plasticity -------------------------------------------------------------

RULE_KINDS = ("none", "symmetric", "anti-symmetric")


@dataclass(frozen=True)
class PlasticityRule:
    """Pair-based STDP rule. Lags are ``t_post - t_pre`` in ms.

    ``printed_form`` switches both rules to exponentials that grow with the
    lag magnitude; it exists only for side-by-side comparison.
    """

    kind: str = "none"
    s: float = 0.0
    tau1: float = 20.0
    tau2: float = 18.0
    s_a: float = 0.0
    s_b: float = 0.0
    tau_a: float = 20.0
    tau_b: float = 20.0
    window: float = 30.0
    gate: str | tuple[str, ...] | None = None
    gate_window: float = 50.0
    printed_form: bool = False

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown plasticity kind {self.kind!r}")
        taus = (self.tau1, self.tau2, self.tau_a, self.tau_b, self.gate_window)
        if min(taus) <= 0:
            raise ValueError("time constants must be positive")
        if min(self.s, self.s_a, self.s_b) < 0:
            raise ValueError("STDP magnitudes must be non-negative")
        if self.window <= 0:
            raise ValueError("pairing window must be positive")

    @classmethod
    def symmetric(cls, s=0.05, tau1=20.0, tau2=18.0, **kw) -> "PlasticityRule":
        return cls(kind="symmetric", s=s, tau1=tau1, tau2=tau2, **kw)

    @classmethod
    def antisymmetric(cls, s_a, s_b, tau_a, tau_b, **kw) -> "PlasticityRule":
        return cls(kind="anti-symmetric", s_a=s_a, s_b=s_b, tau_a=tau_a, tau_b=tau_b, **kw)

    @property
    def gates(self) -> tuple[str, ...]:
        """Populations whose recent spiking opens the gate (any one suffices)."""
        if self.gate is None:
            return ()
        return (self.gate,) if isinstance(self.gate, str) else tuple(self.gate)

    @property
    def code(self) -> int:
        return RULE_KINDS.index(self.kind)

    def packed(self) -> np.ndarray:
        return np.array([
            self.s, self.tau1, self.tau2, self.s_a, self.s_b,
            self.tau_a, self.tau_b, self.window, float(self.printed_form),
        ])


NO_PLASTICITY = PlasticityRule()


def stdp_delta_symmetric(lag: float, rule: PlasticityRule) -> float:
    if rule.kind != "symmetric":
        raise ValueError("rule is not symmetric")
    return _kernel.sym_delta(float(lag), rule.s, rule.tau1, rule.tau2,
                             rule.window, rule.printed_form)


def stdp_delta_antisymmetric(lag: float, rule: PlasticityRule) -> float:
    if rule.kind != "anti-symmetric":
        raise ValueError("rule is not anti-symmetric")
    return _kernel.antisym_delta(float(lag), rule.s_a, rule.s_b, rule.tau_a,
                                 rule.tau_b, rule.window, rule.printed_form)


# --- connectivity masks -----------------------------------------------------

def one_to_one(n_pre: int, n_post: int) -> np.ndarray:
    """Pair neurons by position; unequal sizes map blocks onto one another."""
    mask = np.zeros((n_pre, n_post), dtype=bool)
    n = max(n_pre, n_post)
    for k in range(n):
        mask[k * n_pre // n, k * n_post // n] = True
    return mask


def all_to_all(n_pre: int, n_post: int) -> np.ndarray:
    return np.ones((n_pre, n_post), dtype=bool)


def probabilistic(n_pre: int, n_post: int, p: float, rng: np.random.Generator) -> np.ndarray:
    return rng.random((n_pre, n_post)) < p


def random_fan_in(n_pre: int, n_post: int, k: int, rng: np.random.Generator,
                  groups: list[range] | None = None) -> np.ndarray:
    """Each post neuron receives ``k`` distinct random afferents.

    With ``groups`` given, it instead receives exactly one afferent drawn from
    every group (``k`` is then ignored).
    """
    mask = np.zeros((n_pre, n_post), dtype=bool)
    for j in range(n_post):
        if groups is None:
            src = rng.choice(n_pre, size=k, replace=False)
        else:
            src = [g[rng.integers(len(g))] for g in groups]
        mask[src, j] = True
    return mask


# --- populations, synapses, records -----------------------------------------

@dataclass
class Population:
    id: str
    params: NeuronParams
    size: int
    start: int = 0
    bias: float = 0.0
    net: "Network | None" = field(default=None, repr=False)

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"population {self.id!r} needs at least one neuron")

    @property
    def slice(self) -> slice:
        return slice(self.start, self.start + self.size)

    @property
    def v(self) -> np.ndarray:
        return self.net.v[self.slice]

    @property
    def u(self) -> np.ndarray:
        return self.net.u[self.slice]

    @property
    def states(self) -> list[NeuronState]:
        return [NeuronState(float(v), float(u)) for v, u in zip(self.v, self.u)]


@dataclass
class SynapseGroup:
    pre: str
    post: str
    topology: str
    mask: np.ndarray
    w_min: float
    w_max: float
    rule: PlasticityRule = NO_PLASTICITY
    offset: int = 0
    net: "Network | None" = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def weights(self) -> np.ndarray:
        """Live (n_pre, n_post) view into the network weight buffer."""
        n = self.mask.size
        return self.net._weights[self.offset:self.offset + n].reshape(self.mask.shape)

    @property
    def plastic(self) -> bool:
        return self.rule.kind != "none"

    @property
    def n_synapses(self) -> int:
        return int(self.mask.sum())


class SpikeRecord:
    """Spikes per population as parallel (neuron index, time ms) arrays."""

    def __init__(self, sizes: Mapping[str, int], spikes: Mapping[str, tuple] | None = None,
                 duration: float = 0.0):
        self.sizes = dict(sizes)
        self.duration = duration
        empty = (np.zeros(0, dtype=np.int64), np.zeros(0))
        self.spikes = {p: empty for p in self.sizes}
        if spikes:
            self.spikes.update({p: (np.asarray(i, dtype=np.int64), np.asarray(t, dtype=float))
                                for p, (i, t) in spikes.items()})

    def __getitem__(self, pop: str):
        return self.spikes[pop]

    def __len__(self):
        return sum(len(i) for i, _ in self.spikes.values())

    def counts(self, pop: str) -> np.ndarray:
        idx, _ = self.spikes[pop]
        return np.bincount(idx, minlength=self.sizes[pop])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["population", "neuron", "t_ms"])
            for pop, (idx, ts) in self.spikes.items():
                for i, t in zip(idx, ts):
                    w.writerow([pop, int(i), f"{t:g}"])

    @classmethod
    def from_csv(cls, path, sizes: Mapping[str, int]) -> "SpikeRecord":
        rows: dict[str, tuple[list, list]] = {p: ([], []) for p in sizes}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                idx, ts = rows[row["population"]]
                idx.append(int(row["neuron"]))
                ts.append(float(row["t_ms"]))
        return cls(sizes, rows)


def firing_rates(record: SpikeRecord, window: float) -> dict[str, np.ndarray]:
    """Per-neuron rate in Hz given the window length in ms."""
    if window <= 0:
        raise ValueError("window must be positive")
    return {p: record.counts(p) * (1000.0 / window) for p in record.sizes}


class Network:
    """A set of populations and synapse groups advanced on a common clock."""

    def __init__(self, dt: float = 1.0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = dt
        self.t = 0.0
        self.populations: dict[str, Population] = {}
        self.groups: list[SynapseGroup] = []
        self.plasticity_enabled = True
        self.v = np.zeros(0)
        self.u = np.zeros(0)
        self._weights = np.zeros(0)
        self._mask = np.zeros(0, dtype=bool)
        self._syn_in = np.zeros(0)
        self._last_spike = np.zeros(0)
        self._compiled = None

    # building ---------------------------------------------------------------

    @property
    def size(self) -> int:
        return self.v.shape[0]

    def add_population(self, pop_id: str, params: NeuronParams, size: int,
                       bias: float = 0.0) -> Population:
        if pop_id in self.populations:
            raise ValueError(f"duplicate population {pop_id!r}")
        pop = Population(pop_id, params, size, start=self.size, bias=bias, net=self)
        v0, u0 = _initial_state(params, bias)
        self.v = np.concatenate([self.v, np.full(size, v0)])
        self.u = np.concatenate([self.u, np.full(size, u0)])
        self._syn_in = np.concatenate([self._syn_in, np.zeros(size)])
        self._last_spike = np.concatenate([self._last_spike, np.full(size, -np.inf)])
        self.populations[pop_id] = pop
        self._compiled = None
        return pop

    def connect(self, pre: str, post: str, mask: np.ndarray, weight=0.0,
                w_min: float = -np.inf, w_max: float = np.inf,
                rule: PlasticityRule = NO_PLASTICITY, topology: str = "custom") -> SynapseGroup:
        """Add a synapse group. ``weight`` is a scalar or an (n_pre, n_post) array."""
        p, q = self.populations[pre], self.populations[post]
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (p.size, q.size):
            raise ValueError(f"mask shape {mask.shape} != {(p.size, q.size)}")
        for gate in rule.gates:
            if gate not in self.populations:
                raise ValueError(f"unknown gate population {gate!r}")
        w = np.where(mask, np.broadcast_to(np.asarray(weight, dtype=float), mask.shape), 0.0)
        w = np.where(mask, np.clip(w, w_min, w_max), 0.0)
        group = SynapseGroup(pre, post, topology, mask, float(w_min), float(w_max), rule,
                             offset=self._weights.size, net=self)
        self._weights = np.concatenate([self._weights, w.ravel()])
        self._mask = np.concatenate([self._mask, mask.ravel()])
        self.groups.append(group)
        self._compiled = None
        return group

    def group(self, pre: str, post: str) -> SynapseGroup:
        for g in self.groups:
            if g.pre == pre and g.post == post:
                return g
        raise KeyError((pre, post))

    # state ------------------------------------------------------------------

    def reset_state(self) -> None:
        """Return every neuron to rest and forget pending spikes; weights kept."""
        for pop in self.populations.values():
            v0, u0 = _initial_state(pop.params, pop.bias)
            self.v[pop.slice] = v0
            self.u[pop.slice] = u0
        self._syn_in[:] = 0.0
        self._last_spike[:] = -np.inf

    def weight_snapshot(self) -> np.ndarray:
        return self._weights.copy()

    def restore_weights(self, snapshot: np.ndarray) -> None:
        if snapshot.shape != self._weights.shape:
            raise ValueError("snapshot does not match this network")
        self._weights[:] = snapshot

    # simulation -------------------------------------------------------------

    def _compile(self):
        pops = list(self.populations.values())
        param = lambda name: np.concatenate(  # noqa: E731
            [np.full(p.size, getattr(p.params, name)) for p in pops])
        pop_index = {p.id: k for k, p in enumerate(pops)}
        gs = self.groups
        self._compiled = dict(
            a=param("a"), b=param("b"), c=param("c"), d=param("d"),
            bias=np.concatenate([np.full(p.size, p.bias) for p in pops]),
            pop_start=np.array([p.start for p in pops], dtype=np.int64),
            pop_end=np.array([p.start + p.size for p in pops], dtype=np.int64),
            pop_last=np.full(len(pops), -np.inf),
            g_pre0=np.array([self.populations[g.pre].start for g in gs], dtype=np.int64),
            g_npre=np.array([g.shape[0] for g in gs], dtype=np.int64),
            g_post0=np.array([self.populations[g.post].start for g in gs], dtype=np.int64),
            g_npost=np.array([g.shape[1] for g in gs], dtype=np.int64),
            g_woff=np.array([g.offset for g in gs], dtype=np.int64),
            g_kind=np.array([g.rule.code for g in gs], dtype=np.int64),
            g_rule=np.array([g.rule.packed() for g in gs]).reshape(len(gs), 9),
            g_wmin=np.array([g.w_min for g in gs]),
            g_wmax=np.array([g.w_max for g in gs]),
            g_gate=_gate_table(gs, pop_index),
            g_gate_win=np.array([g.rule.gate_window for g in gs]),
            g_plastic=np.array([g.plastic for g in gs], dtype=np.bool_),
        )
        return self._compiled

    def set_bias(self, pop_id: str, bias: float) -> None:
        self.populations[pop_id].bias = float(bias)
        self._compiled = None

    def run_window(self, currents: Mapping[str, np.ndarray | float] | None = None,
                   duration: float = 80.0, plasticity: bool | None = None) -> SpikeRecord:
        """Simulate ``duration`` ms with constant per-neuron input currents."""
        n_steps = int(round(duration / self.dt))
        if n_steps < 1 or abs(n_steps * self.dt - duration) > 1e-9:
            raise ValueError("duration must be a positive multiple of dt")
        ext = np.zeros(self.size)
        for pop_id, cur in (currents or {}).items():
            pop = self.populations[pop_id]
            cur = np.broadcast_to(np.asarray(cur, dtype=float), (pop.size,))
            if not np.all(np.isfinite(cur)):
                raise ValueError(f"non-finite input current for {pop_id!r}")
            ext[pop.slice] = cur
        comp = self._compiled or self._compile()
        plastic_on = self.plasticity_enabled if plasticity is None else plasticity
        fired = np.zeros((n_steps, self.size), dtype=np.bool_)
        status = _kernel.run_window(
            n_steps, self.dt, self.t,
            comp["a"], comp["b"], comp["c"], comp["d"], self.v, self.u,
            comp["bias"], ext, self._syn_in, self._last_spike,
            comp["pop_start"], comp["pop_end"], comp["pop_last"],
            comp["g_pre0"], comp["g_npre"], comp["g_post0"], comp["g_npost"],
            comp["g_woff"], comp["g_kind"], comp["g_rule"], comp["g_wmin"],
            comp["g_wmax"], comp["g_gate"], comp["g_gate_win"], comp["g_plastic"],
            self._weights, self._mask, bool(plastic_on), fired,
        )
        if status >= 0:
            raise SimulationFault(f"neuron {status} diverged near t={self.t} ms")
        steps, neurons = np.nonzero(fired)
        times = self.t + steps * self.dt
        spikes = {}
        for pop in self.populations.values():
            sel = (neurons >= pop.start) & (neurons < pop.start + pop.size)
            spikes[pop.id] = (neurons[sel] - pop.start, times[sel])
        self.t += n_steps * self.dt
        return SpikeRecord({p.id: p.size for p in self.populations.values()}, spikes, duration)


def _gate_table(groups, pop_index) -> np.ndarray:
    width = max([1] + [len(g.rule.gates) for g in groups])
    table = np.full((len(groups), width), -1, dtype=np.int64)
    for k, g in enumerate(groups):
        for m, gate in enumerate(g.rule.gates):
            table[k, m] = pop_index[gate]
    return table


def _initial_state(params: NeuronParams, bias: float) -> tuple[float, float]:
    try:
        return params.rest_state(bias)
    except ValueError:
        return params.c, params.b * params.c

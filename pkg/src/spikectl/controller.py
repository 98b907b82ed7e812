"""Smith-predictor control loop around the differential map and cerebellum.

Timing. Cycle t starts from the arm state produced by the command of cycle
t-1. The sensors return the snapshot pushed ``delay`` cycles earlier, whose
velocity is the outcome of command ``t-1-delay``. The forward model is
evaluated on the command still in flight (issued at t-1); its value from
``delay`` cycles back is the prediction of the outcome now being measured.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import arm as plant
from . import cerebellum, diffmap


@dataclass
class ControlConfig:
    cycle_ms: float = 80.0
    v_ref: float = 0.03
    k_c: float = 1.0
    tolerance: float = 0.002
    time_limit_s: float = 60.0

    def __post_init__(self):
        if self.cycle_ms <= 0 or self.v_ref <= 0 or self.tolerance <= 0:
            raise ValueError("cycle, v_ref and tolerance must be positive")

    @property
    def dt_s(self) -> float:
        return self.cycle_ms / 1000.0


def target_direction(x_d, x_s, v_ref: float, tolerance: float) -> tuple[np.ndarray, bool]:
    """Unit vector toward the target scaled by ``v_ref``; zero once within tolerance."""
    diff = np.asarray(x_d, dtype=float) - np.asarray(x_s, dtype=float)
    dist = float(np.hypot(*diff))
    if dist <= tolerance:
        return np.zeros_like(diff), True
    return v_ref * diff / dist, False


def prediction_error(xdot_s, xcereb_prev) -> np.ndarray:
    return np.asarray(xdot_s, dtype=float) - np.asarray(xcereb_prev, dtype=float)


def corrected_reference(xdot_ref, xcereb_now, e_pred, k_c: float,
                        lo=-np.inf, hi=np.inf) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(xdot_pred, xdot_dm_in)``."""
    xdot_ref = np.asarray(xdot_ref, dtype=float)
    xdot_pred = np.asarray(xcereb_now, dtype=float) + np.asarray(e_pred, dtype=float)
    dm_in = xdot_ref + k_c * (xdot_ref - xdot_pred)
    return xdot_pred, np.clip(dm_in, lo, hi)


class OracleForwardModel:
    """Exact plant forward model, J(theta) times the clamped command."""

    def __init__(self, model: plant.ArmModel):
        self.model = model

    def predict(self, theta, thetadot_cmd, xdot_s) -> np.ndarray:
        qd = np.clip(thetadot_cmd, -self.model.thetadot_max, self.model.thetadot_max)
        return plant.jacobian(self.model, theta) @ qd


class SpikingForwardModel:
    """Adapter giving the cerebellum the same surface as the oracle."""

    def __init__(self, cb: cerebellum.CBNetwork, learning: bool = True):
        self.cb = cb
        self.learning = learning

    def predict(self, theta, thetadot_cmd, xdot_s) -> np.ndarray:
        return cerebellum.predict(self.cb, theta, thetadot_cmd, xdot_s)

    @property
    def context(self):
        return self.cb.last_context

    def teach(self, e_pred, context) -> None:
        if self.learning and context is not None:
            cerebellum.teach(self.cb, cerebellum.TeachingSignal(e_pred), context)


@dataclass
class SmithState:
    xcereb: np.ndarray = field(default_factory=lambda: np.zeros(2))
    e_pred: np.ndarray = field(default_factory=lambda: np.zeros(2))
    # predictions still awaiting their measurement: (xcereb, context)
    pending: deque = field(default_factory=deque)


@dataclass
class ControlCycleRecord:
    cycle: int
    t_ms: float
    x_s: np.ndarray
    x_d: np.ndarray
    xdot_ref: np.ndarray
    xcereb: np.ndarray
    e_pred: np.ndarray
    xdot_pred: np.ndarray
    xdot_dm_in: np.ndarray
    theta: np.ndarray
    thetadot_cmd: np.ndarray
    xdot_s: np.ndarray
    xcereb_delayed: np.ndarray
    reached: bool = False
    x_true: np.ndarray | None = None


CYCLE_HEADER = ["cycle", "t_ms", "xs_x", "xs_y", "xd_x", "xd_y", "xref_x", "xref_y",
                "xcereb_x", "xcereb_y", "epred_x", "epred_y", "xpred_x", "xpred_y",
                "xdmin_x", "xdmin_y", "th1", "th2", "thd1", "thd2"]


def record_row(rec: ControlCycleRecord) -> list:
    vals = [rec.x_s, rec.x_d, rec.xdot_ref, rec.xcereb, rec.e_pred, rec.xdot_pred,
            rec.xdot_dm_in, rec.theta, rec.thetadot_cmd]
    return [rec.cycle, repr(float(rec.t_ms))] + [repr(float(x)) for v in vals for x in v]


class ControlLoop:
    """State for one trial: plant, sensors, networks and Smith bookkeeping."""

    def __init__(self, model: plant.ArmModel, dm: diffmap.DMNetwork, forward_model=None,
                 config: ControlConfig | None = None, delay: int = 1,
                 sigma_x: float = 0.0, sigma_xdot: float = 0.0, seed: int = 0,
                 theta0=None):
        self.model = model
        self.dm = dm
        self.fm = forward_model
        self.config = config or ControlConfig()
        self.line = plant.DelayLine(delay, sigma_x, sigma_xdot, np.random.default_rng(seed))
        theta0 = (model.lower + model.upper) / 2 if theta0 is None else theta0
        self.state = plant.make_state(model, theta0)
        self.line.push(self.state)
        self.smith = SmithState()
        self.cmd = np.zeros(model.lower.shape)
        self.cycle = 0

    @property
    def delay(self) -> int:
        return self.line.delay

    def reset_motion(self, theta) -> None:
        """Place the arm at rest at ``theta``; sensors and Smith state start over."""
        self.state = plant.make_state(self.model, theta, t=self.state.t)
        self.line.queue.clear()
        self.line.push(self.state)
        self.smith = SmithState()
        self.cmd = np.zeros_like(self.cmd)

    def dm_range(self):
        codecs = self.dm.xdot_codecs
        return np.array([c.lo for c in codecs]), np.array([c.hi for c in codecs])


def run_cycle(loop: ControlLoop, x_d) -> ControlCycleRecord:
    cfg = loop.config
    sm = loop.smith
    snap = plant.read_sensors(loop.line)
    x_s, xdot_s, theta = snap.x, snap.xdot, snap.theta

    def forward():
        # forward model on the command in flight
        if loop.fm is None:
            return np.zeros(2), None
        y = np.asarray(loop.fm.predict(theta, loop.cmd, xdot_s), dtype=float)
        return y, getattr(loop.fm, "context", None)

    if loop.delay == 0:
        # the fresh measurement is the outcome of the prediction made now
        sm.pending.append(forward())
    # the measured outcome belongs to the prediction made `delay` cycles ago
    if len(sm.pending) >= max(loop.delay, 1):
        xcereb_delayed, ctx_delayed = sm.pending[-max(loop.delay, 1)]
    else:
        xcereb_delayed, ctx_delayed = np.zeros(2), None
    e_pred = prediction_error(xdot_s, xcereb_delayed)
    if loop.fm is not None and hasattr(loop.fm, "teach"):
        loop.fm.teach(e_pred, ctx_delayed)
    if loop.delay > 0:
        sm.pending.append(forward())
    while len(sm.pending) > max(loop.delay, 1):
        sm.pending.popleft()
    xcereb = sm.pending[-1][0]

    xdot_ref, reached = target_direction(x_d, x_s, cfg.v_ref, cfg.tolerance)
    lo, hi = loop.dm_range()
    k_c = cfg.k_c if loop.fm is not None else 0.0
    xdot_pred, dm_in = corrected_reference(xdot_ref, xcereb, e_pred, k_c, lo, hi)
    if reached:
        cmd = np.zeros_like(loop.cmd)
    else:
        cmd = diffmap.infer(loop.dm, theta, dm_in)
    sm.xcereb, sm.e_pred = xcereb, e_pred

    rec = ControlCycleRecord(
        loop.cycle, loop.state.t, x_s, np.asarray(x_d, dtype=float), xdot_ref, xcereb,
        e_pred, xdot_pred, dm_in, theta, cmd, xdot_s, np.asarray(xcereb_delayed),
        reached, loop.state.x,
    )
    loop.state = plant.step(loop.model, loop.state, cmd, cfg.dt_s)
    loop.line.push(loop.state)
    loop.cmd = cmd
    loop.cycle += 1
    return rec


def reach(loop: ControlLoop, x_d, max_cycles: int | None = None) -> list[ControlCycleRecord]:
    """Run cycles until the target is reported reached or the time limit hits."""
    cfg = loop.config
    limit = max_cycles or int(round(cfg.time_limit_s * 1000.0 / cfg.cycle_ms))
    records = []
    for _ in range(limit):
        rec = run_cycle(loop, x_d)
        records.append(rec)
        if rec.reached:
            break
    return records

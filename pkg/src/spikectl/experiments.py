"""Babbling, the three reaching tasks and their metrics."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import arm as plant
from . import cerebellum, diffmap
from .config import Config
from .controller import (
    CYCLE_HEADER, ControlLoop, OracleForwardModel, SpikingForwardModel, reach, record_row,
)

log = logging.getLogger(__name__)

TASKS = ("babble", "random-reach", "radial-reach", "contour")


@dataclass
class ExperimentSpec:
    task: str
    seed: int = 0
    iterations: int | None = None
    cb: bool = True
    out: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be positive")


def streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# --- metrics ------------------------------------------------------------------

@dataclass
class Metrics:
    max_deviation: float = 0.0
    reach_time: float = 0.0
    reached: bool = True
    contour_error: np.ndarray = field(default_factory=lambda: np.zeros(0))
    filtered_error: np.ndarray = field(default_factory=lambda: np.zeros(0))
    completion_time: float = 0.0

    def summary(self) -> dict:
        out = {"max_deviation": self.max_deviation, "reach_time": self.reach_time,
               "reached": self.reached, "completion_time": self.completion_time}
        if self.contour_error.size:
            out["max_contour_error"] = float(self.contour_error.max())
            out["max_filtered_error"] = float(self.filtered_error.max())
            out["mean_contour_error"] = float(self.contour_error.mean())
        return out


def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    s = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.hypot(*(p - (a + s * ab))))


def polyline_distance(p, points, closed: bool = True) -> float:
    pts = np.asarray(points, dtype=float)
    segs = list(zip(pts[:-1], pts[1:]))
    if closed:
        segs.append((pts[-1], pts[0]))
    return min(point_segment_distance(p, a, b) for a, b in segs)


def low_pass(series, beta: float) -> np.ndarray:
    """First-order filter ``y <- y + beta * (e - y)`` started at zero."""
    y, out = 0.0, []
    for e in series:
        y += beta * (e - y)
        out.append(y)
    return np.array(out)


def compute_metrics(positions, start, target, reached: bool = True,
                    cycle_ms: float = 80.0) -> Metrics:
    """Reach metrics from the sensed positions of one reach."""
    positions = np.asarray(positions, dtype=float)
    if positions.size == 0:
        raise ValueError("no records")
    dev = max(point_segment_distance(p, start, target) for p in positions)
    t = len(positions) * cycle_ms / 1000.0
    return Metrics(max_deviation=dev, reach_time=t, reached=reached, completion_time=t)


def contour_metrics(positions, contour, beta: float, cycle_ms: float = 80.0) -> Metrics:
    positions = np.asarray(positions, dtype=float)
    if positions.size == 0:
        raise ValueError("no records")
    err = np.array([polyline_distance(p, contour) for p in positions])
    filt = low_pass(err, beta)
    t = len(positions) * cycle_ms / 1000.0
    return Metrics(max_deviation=float(err.max()), reach_time=t, contour_error=err,
                   filtered_error=filt, completion_time=t)


def reach_metrics(records, start, target, cycle_ms: float = 80.0) -> Metrics:
    if not records:
        raise ValueError("no records")
    return compute_metrics([r.x_s for r in records], start, target,
                           records[-1].reached, cycle_ms)


# --- babbling -----------------------------------------------------------------

DATASET_HEADER = ["t_ms", "theta1", "theta2", "xdot", "ydot", "thetadot1", "thetadot2"]


def babble(model: plant.ArmModel, dm: diffmap.DMNetwork | None, iterations: int,
           rng: np.random.Generator, cycle_ms: float = 80.0, theta0=None) -> np.ndarray:
    """Random joint-velocity exploration; each sample also trains ``dm`` if given.

    A fresh velocity is drawn per iteration; any draw that would push a joint
    out of range is redrawn, so every recorded sample is unclamped.
    """
    dt = cycle_ms / 1000.0
    state = plant.make_state(model, (model.lower + model.upper) / 2 if theta0 is None else theta0)
    rows = []
    for _ in range(iterations):
        while True:
            qd = rng.uniform(-model.thetadot_max, model.thetadot_max, size=2)
            q = state.theta + dt * qd
            if model.within_limits(q):
                break
        state = plant.step(model, state, qd, dt)
        rows.append([state.t, *state.theta, *state.xdot, *state.thetadot])
        if dm is not None:
            diffmap.train_step(dm, state.theta, state.xdot, state.thetadot)
    return np.array(rows)


def train_dm(cfg: Config, seed: int, iterations: int | None = None):
    rng_build, rng_babble = streams(seed, 2)
    dm = diffmap.build_dm(cfg.dm, int(rng_build.integers(2**31)))
    data = babble(cfg.arm.model(), dm, iterations or cfg.task.babble_iterations, rng_babble,
                  cfg.control.cycle_ms)
    return dm, data


def directional_fidelity(dm: diffmap.DMNetwork, model: plant.ArmModel, n: int,
                         rng: np.random.Generator, speed: float = 0.03) -> float:
    """Fraction of random (pose, direction) probes where J(theta) @ cmd points forward."""
    ok = 0
    for _ in range(n):
        q = model.sample_theta(rng)
        ang = rng.uniform(0.0, 2 * np.pi)
        xd = speed * np.array([np.cos(ang), np.sin(ang)])
        v = plant.jacobian(model, q) @ diffmap.infer(dm, q, xd)
        ok += float(v @ xd) > 0
    return ok / n


# --- loops ----------------------------------------------------------------------

def make_loop(cfg: Config, dm, fm=None, seed: int = 0, theta0=None, **overrides) -> ControlLoop:
    arm = cfg.arm
    kw = dict(delay=arm.delay, sigma_x=arm.sigma_x, sigma_xdot=arm.sigma_xdot)
    kw.update(overrides)
    return ControlLoop(arm.model(), dm, fm, cfg.control, seed=seed, theta0=theta0, **kw)


def segment_reachable(model: plant.ArmModel, a, b, n: int = 25) -> bool:
    return all(plant.reachable(model, a + s * (b - a)) for s in np.linspace(0.0, 1.0, n))


def sample_pair(model: plant.ArmModel, rng: np.random.Generator, min_dist: float = 0.02):
    """Start pose and target position, both images of in-range joint angles.

    Pairs whose straight connecting segment leaves the workspace are redrawn.
    """
    while True:
        q0 = model.sample_theta(rng)
        x0 = plant.forward_kinematics(model, q0)
        target = plant.forward_kinematics(model, model.sample_theta(rng))
        if np.hypot(*(target - x0)) < min_dist:
            log.info("resampling a too-short reach")
        elif not segment_reachable(model, x0, target):
            log.info("resampling a reach whose straight path leaves the workspace")
        else:
            return q0, target


@dataclass
class ReachResult:
    start: np.ndarray
    target: np.ndarray
    records: list
    metrics: Metrics


def run_reach(loop: ControlLoop, theta0, target) -> ReachResult:
    loop.reset_motion(theta0)
    start = plant.forward_kinematics(loop.model, theta0)
    records = reach(loop, target)
    return ReachResult(start, np.asarray(target, dtype=float), records,
                       reach_metrics(records, start, target, loop.config.cycle_ms))


def train_cb_random(cfg: Config, dm, cb: cerebellum.CBNetwork, iterations: int,
                    rng: np.random.Generator, noise_seed: int = 0) -> list:
    """Chained reaches to random targets with plasticity on; returns per-cycle |e_pred|."""
    model = cfg.arm.model()
    fm = SpikingForwardModel(cb, learning=True)
    loop = make_loop(cfg, dm, fm, seed=noise_seed, theta0=model.sample_theta(rng))
    errors = []
    limit = int(round(cfg.control.time_limit_s * 1000.0 / cfg.control.cycle_ms))
    while len(errors) < iterations:
        target = plant.forward_kinematics(model, model.sample_theta(rng))
        records = reach(loop, target, max_cycles=min(limit, iterations - len(errors)))
        errors.extend(np.abs(r.e_pred) for r in records)
        loop.smith.pending.clear()
    return errors


def evaluate_pairs(cfg: Config, dm, cb, pairs, seed: int) -> list[dict]:
    """Each pair is run with the frozen cerebellum and without it, same sensor noise."""
    out = []
    for i, (q0, target) in enumerate(pairs):
        noise = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        on = run_reach(make_loop(cfg, dm, SpikingForwardModel(cb, learning=False), seed=noise),
                       q0, target)
        off = run_reach(make_loop(cfg, dm, None, seed=noise), q0, target)
        out.append({"index": i, "on": on, "off": off})
    return out


def reduction(before: float, after: float) -> float:
    return 0.0 if before == 0 else (before - after) / before


def pair_summary(pairs: list[dict]) -> dict:
    dev = [reduction(p["off"].metrics.max_deviation, p["on"].metrics.max_deviation) for p in pairs]
    tim = [reduction(p["off"].metrics.reach_time, p["on"].metrics.reach_time) for p in pairs]
    ratio = [p["off"].metrics.reach_time / p["on"].metrics.reach_time for p in pairs]
    return {
        "n": len(pairs),
        "deviation_reduction": dev,
        "time_reduction": tim,
        "mean_deviation_reduction": float(np.mean(dev)),
        "std_deviation_reduction": float(np.std(dev)),
        "mean_time_reduction": float(np.mean(tim)),
        "mean_time_ratio": float(np.mean(ratio)),
        "reached_on": int(sum(p["on"].metrics.reached for p in pairs)),
        "reached_off": int(sum(p["off"].metrics.reached for p in pairs)),
    }


def run_random_reach(cfg: Config, dm, seed: int, iterations: int | None = None,
                     n_eval: int | None = None, cb: cerebellum.CBNetwork | None = None):
    """Train the cerebellum on random reaches, then paired on/off evaluation."""
    rng_build, rng_train, rng_eval = streams(seed, 3)
    if cb is None:
        cb = cerebellum.build_cb(cfg.cb, int(rng_build.integers(2**31)))
    iterations = iterations or cfg.task.train_iterations
    errors = train_cb_random(cfg, dm, cb, iterations, rng_train, noise_seed=seed)
    model = cfg.arm.model()
    pairs = [sample_pair(model, rng_eval) for _ in range(n_eval or cfg.task.eval_reaches)]
    results = evaluate_pairs(cfg, dm, cb, pairs, seed)
    return cb, np.array(errors), results


def repeated_reach(cfg: Config, dm, cb, theta0, target, attempts: int, seed: int = 0):
    """Same reach over and over with learning on; per-attempt mean |e_pred| per DOF."""
    fm = SpikingForwardModel(cb, learning=True)
    loop = make_loop(cfg, dm, fm, seed=seed)
    per_attempt, results = [], []
    for _ in range(attempts):
        res = run_reach(loop, theta0, target)
        results.append(res)
        per_attempt.append(np.mean([np.abs(r.e_pred) for r in res.records], axis=0))
    return np.array(per_attempt), results


def radial_targets(center, radius: float, n: int = 8) -> list[np.ndarray]:
    angles = np.deg2rad(np.arange(n) * 360.0 / n)
    return [np.asarray(center) + radius * np.array([np.cos(a), np.sin(a)]) for a in angles]


def workspace_center(model: plant.ArmModel) -> np.ndarray:
    return (model.lower + model.upper) / 2


def run_radial_reach(cfg: Config, dm, seed: int, repetitions=None, theta_center=None):
    """Per-target training from a fresh cerebellum; evaluation after each level.

    Level 0 is the arm without the cerebellum; later levels use the frozen
    cerebellum after that many training reaches to the target.
    """
    model = cfg.arm.model()
    q_c = workspace_center(model) if theta_center is None else np.asarray(theta_center)
    center = plant.forward_kinematics(model, q_c)
    reps = sorted(repetitions or cfg.task.radial_repetitions)
    targets = radial_targets(center, cfg.task.radial_radius)
    for k, tgt in enumerate(targets):
        if not plant.reachable(model, tgt):
            raise ValueError(f"radial target at {45 * k} deg is outside the workspace")
    rng_build, = streams(seed, 1)
    cb_seed = int(rng_build.integers(2**31))
    out = []
    for k, tgt in enumerate(targets):
        cb = cerebellum.build_cb(cfg.cb, cb_seed)
        noise = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        train = make_loop(cfg, dm, SpikingForwardModel(cb, learning=True), seed=noise + 1)
        levels, done = {}, 0
        for n in reps:
            while done < n:
                run_reach(train, q_c, tgt)
                done += 1
            fm = None if n == 0 else SpikingForwardModel(cb, learning=False)
            levels[n] = run_reach(make_loop(cfg, dm, fm, seed=noise), q_c, tgt)
        out.append({"angle": 45 * k, "target": tgt, "levels": levels,
                    "weights": cb.pf_weights().copy()})
    return out


def radial_summary(results: list[dict]) -> dict:
    reps = sorted(results[0]["levels"])
    first, last = reps[0], reps[-1]
    dev = {n: [r["levels"][n].metrics.max_deviation for r in results] for n in reps}
    tim = {n: [r["levels"][n].metrics.reach_time for r in results] for n in reps}
    red = [reduction(a, b) for a, b in zip(dev[first], dev[last])]
    monotone = sum(all(dev[a][k] >= dev[b][k] for a, b in zip(reps, reps[1:]))
                   for k in range(len(results)))
    return {
        "repetitions": reps,
        "max_deviation": {str(n): v for n, v in dev.items()},
        "reach_time": {str(n): v for n, v in tim.items()},
        "deviation_reduction": red,
        "mean_deviation_reduction": float(np.mean(red)),
        "std_deviation_reduction": float(np.std(red)),
        "mean_time_reduction": float(np.mean([reduction(a, b) for a, b in
                                              zip(tim[first], tim[last])])),
        "mean_time_ratio": float(np.mean(np.array(tim[first]) / np.array(tim[last]))),
        "monotone_targets": int(monotone),
    }


# --- contour --------------------------------------------------------------------

def contour_points(radius: float, n: int, center=(0.0, 0.0)) -> np.ndarray:
    """Figure-eight: ``x = R/2 sin(2g)``, ``y = R cos(g)``, g evenly spaced on [0, 2pi)."""
    g = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return np.asarray(center) + np.stack([0.5 * radius * np.sin(2 * g), radius * np.cos(g)], 1)


def contour_center(model: plant.ArmModel, radius: float) -> np.ndarray:
    return plant.forward_kinematics(model, workspace_center(model))


@dataclass
class ContourResult:
    points: np.ndarray
    records: list
    skipped: list
    metrics: Metrics


def run_contour(cfg: Config, dm, cb=None, seed: int = 0, learning: bool = True) -> ContourResult:
    """Follow the figure-eight point by point, starting and ending at the first point."""
    model = cfg.arm.model()
    task = cfg.task
    pts = contour_points(task.contour_radius, task.contour_points,
                         contour_center(model, task.contour_radius))
    q0 = plant.inverse_kinematics(model, pts[0])
    if q0 is None:
        raise ValueError("contour start is outside the workspace")
    fm = None if cb is None else SpikingForwardModel(cb, learning=learning)
    loop = make_loop(cfg, dm, fm, seed=seed, theta0=q0)
    loop.config = type(cfg.control)(**{**cfg.control.__dict__, "tolerance": task.contour_tolerance})
    per_point = max(1, int(round(task.contour_time_limit_s * 1000.0 / cfg.control.cycle_ms)))
    records, skipped = [], []
    sequence = list(pts[1:]) + [pts[0]]
    for p in range(task.contour_passes):
        for i, tgt in enumerate(sequence):
            recs = reach(loop, tgt, max_cycles=per_point)
            records.extend(recs)
            if not recs[-1].reached:
                skipped.append((p, (i + 1) % len(pts)))
    metrics = contour_metrics([r.x_s for r in records], pts, task.filter_beta,
                              cfg.control.cycle_ms)
    return ContourResult(pts, records, skipped, metrics)


# --- files ----------------------------------------------------------------------

def write_cycles(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CYCLE_HEADER)
        for r in records:
            w.writerow(record_row(r))


def read_cycles(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in CYCLE_HEADER}


def write_dataset(path, data: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_HEADER)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


TRAJECTORY_HEADER = ["t_ms", "theta1", "theta2", "x", "y", "xdot", "ydot"]


def write_trajectory(path, states) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for s in states:
            w.writerow([repr(float(v)) for v in (s.t, *s.theta, *s.x, *s.xdot)])


def write_pf_weights(path, cb: cerebellum.CBNetwork) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(diffmap.WEIGHT_HEADER)
        for g in cb.pf_groups():
            W, M = g.weights, g.mask
            for i, j in zip(*np.nonzero(M)):
                w.writerow(["gc", int(i), g.post, int(j), repr(float(W[i, j]))])


def read_pf_weights(path, cb: cerebellum.CBNetwork) -> None:
    groups = {g.post: g for g in cb.pf_groups()}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            g = groups[row["post_assembly"]]
            g.weights[int(row["pre_idx"]), int(row["post_idx"])] = float(row["weight"])

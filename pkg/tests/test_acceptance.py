"""End-to-end acceptance checks; the terminal summary lists one verdict per criterion."""

import time

import numpy as np
import pytest

from spikectl import arm, cerebellum, cli
from spikectl import experiments as ex
from spikectl.coding import Codec, decode_population, encode
from spikectl.config import Config
from spikectl.controller import OracleForwardModel
from spikectl.snn import (
    Network, NeuronParams, PlasticityRule, probabilistic,
    stdp_delta_antisymmetric, stdp_delta_symmetric,
)

pytestmark = pytest.mark.slow

RS = NeuronParams(0.02, 0.2, -65.0, 8.0)


def euler_count(I=10.0, p=RS, T=1000.0, h=0.01):
    v, u, n = -65.0, p.b * -65.0, 0
    for _ in range(int(round(T / h))):
        v += h * (0.04 * v * v + 5 * v + 140 - u + I)
        u += h * p.a * (p.b * v - u)
        if v >= 30:
            v, u, n = p.c, u + p.d, n + 1
    return n


def test_1_neuron_oracle(criterion):
    def run(current):
        net = Network()
        net.add_population("n", RS, 1)
        net.v[:], net.u[:] = -65.0, -13.0
        return len(net.run_window({"n": current}, 1000.0))

    run(10.0)  # compile outside the timed run
    t0 = time.perf_counter()
    count = run(10.0)
    elapsed = time.perf_counter() - t0
    ref = euler_count()
    rest = Network()
    rest.add_population("n", RS, 5)
    v_star = min(np.roots([0.04, 5 - RS.b, 140]).real)  # stable rest, -70 mV
    rest.v[:], rest.u[:] = v_star, RS.b * v_star
    silent = len(rest.run_window(None, 1000.0)) == 0
    ok = abs(count - ref) <= 1 and silent and elapsed < 1.0
    criterion(1, ok, f"{count} spikes vs reference {ref}; rest silent={silent}; {elapsed:.3f} s")


def test_2_stdp_suite(criterion):
    sym = PlasticityRule.symmetric(0.05, 20.0, 18.0, window=60.0)
    anti = PlasticityRule.antisymmetric(0.01, 0.004, 15.0, 25.0)
    e = np.exp(-1.0)
    examples = [
        (stdp_delta_symmetric(0.0, sym), 0.05),
        (stdp_delta_symmetric(20.0, sym), 0.0),
        (stdp_delta_symmetric(40.0, sym), -0.01625520348328438),
        (stdp_delta_antisymmetric(0.0, anti), -0.01),
        (stdp_delta_antisymmetric(25.0, anti), 0.004 * e),
        (stdp_delta_antisymmetric(-15.0, anti), -0.01 * e),
    ]
    exact = sum(got == pytest.approx(want, rel=1e-12, abs=1e-15) for got, want in examples)

    rng = np.random.default_rng(7)
    net = Network()
    net.add_population("a", RS, 40)
    net.add_population("b", RS, 40)
    mask = probabilistic(40, 40, 0.5, rng)
    groups = [
        net.connect("a", "b", mask, weight=rng.uniform(0, 2, (40, 40)), w_min=0.0, w_max=2.0,
                    rule=PlasticityRule.symmetric(1.5, window=30.0)),
        net.connect("b", "a", mask.T, weight=rng.uniform(-2, 0, (40, 40)), w_min=-2.0,
                    w_max=0.0, rule=PlasticityRule.antisymmetric(1.5, 1.5, 10.0, 10.0)),
    ]
    net.plasticity_enabled = True
    updates, held = 0, True
    while updates < 100_000:
        w0 = net.weight_snapshot()
        net.run_window({"a": rng.uniform(0, 30, 40), "b": rng.uniform(0, 30, 40)}, 50.0)
        updates += int(np.count_nonzero(net.weight_snapshot() != w0))
        held &= all(g.weights.min() >= g.w_min and g.weights.max() <= g.w_max for g in groups)
    criterion(2, exact == 6 and held,
              f"{exact}/6 examples exact; bounds held over {updates} weight updates: {held}")


def test_3_coding_round_trip(criterion):
    c = Codec(-0.3, 0.3, 20)
    vals = np.random.default_rng(3).uniform(-0.27, 0.27, 100)
    err = max(abs(decode_population(c, 100.0 * encode(c, v)) - v) for v in vals) / c.span
    criterion(3, err <= 0.05, f"worst round-trip error {100 * err:.2f}% of range")


def test_4_jacobian(criterion):
    model = arm.ArmModel()
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        q = model.sample_theta(rng)
        J = arm.jacobian(model, q)
        fd = np.zeros((2, 2))
        for j in range(2):
            h = np.zeros(2)
            h[j] = 1e-6
            fd[:, j] = (arm.forward_kinematics(model, q + h)
                        - arm.forward_kinematics(model, q - h)) / 2e-6
        worst = max(worst, np.linalg.norm(J - fd) / np.linalg.norm(J))
    criterion(4, worst < 1e-6, f"max relative error {worst:.2e}")


def test_5_dm_quality(criterion):
    cfg = Config()
    t0 = time.perf_counter()
    dm, _ = ex.train_dm(cfg, seed=0)
    elapsed = time.perf_counter() - t0
    fid = ex.directional_fidelity(dm, cfg.arm.model(), 100, np.random.default_rng(5))
    criterion(5, fid >= 0.8 and elapsed <= 300,
              f"fidelity {fid:.2f} after 3000 babbling iterations in {elapsed:.0f} s")


def test_6_prediction_error_converges(criterion, trained_dm):
    cfg = Config()
    model = cfg.arm.model()
    qc = ex.workspace_center(model)
    target = ex.radial_targets(arm.forward_kinematics(model, qc), cfg.task.radial_radius)[0]
    cb = cerebellum.build_cb(cfg.cb, 0)
    _, results = ex.repeated_reach(cfg, trained_dm, cb, qc, target, attempts=30)
    e = np.concatenate([[np.abs(r.e_pred) for r in res.records] for res in results])
    n = len(e) // 10
    ratio = e[-n:].mean(0) / e[:n].mean(0)
    x = np.arange(len(e))
    slopes = [np.polyfit(x, e[:, j], 1)[0] for j in range(2)]
    ok = bool(np.all(ratio < 0.5)) and all(s < 0 for s in slopes)
    criterion(6, ok, f"last/first 10% |e_pred| = {ratio.round(3).tolist()} over {len(e)} "
                     f"cycles; slopes {[f'{s:.1e}' for s in slopes]}")


def test_7_random_reach(criterion, trained_dm):
    cfg = Config()
    _, _, results = ex.run_random_reach(cfg, trained_dm, seed=0)
    s = ex.pair_summary(results)
    dev, tim = s["mean_deviation_reduction"], s["mean_time_reduction"]
    criterion(7, s["n"] >= 20 and dev >= 0.2 and tim >= 0.4,
              f"{s['n']} pairs: deviation reduced {100 * dev:.1f}%, reach time reduced "
              f"{100 * tim:.1f}%")


def test_8_radial_reach(criterion, trained_dm):
    s = ex.radial_summary(ex.run_radial_reach(Config(), trained_dm, seed=0))
    red, mono = s["mean_deviation_reduction"], s["monotone_targets"]
    criterion(8, red >= 0.3 and mono >= 6,
              f"deviation reduced {100 * red:.1f}% after 8 repetitions; monotone 0-4-8 on "
              f"{mono}/8 targets")


def test_9_contour(criterion, trained_dm):
    cfg = Config()
    off = ex.run_contour(cfg, trained_dm, None, seed=0).metrics
    on = ex.run_contour(cfg, trained_dm, cerebellum.build_cb(cfg.cb, 0), seed=0).metrics
    err_ratio = on.contour_error.max() / off.contour_error.max()
    faster = ex.reduction(off.completion_time, on.completion_time)
    criterion(9, err_ratio <= 0.5 and faster >= 0.15,
              f"max error {1000 * on.contour_error.max():.1f} vs "
              f"{1000 * off.contour_error.max():.1f} mm (x{err_ratio:.2f}); completion "
              f"{on.completion_time:.1f} vs {off.completion_time:.1f} s ({100 * faster:.0f}% less)")


def test_10_smith_wiring(criterion, trained_dm):
    cfg = Config()
    model = cfg.arm.model()
    rng = np.random.default_rng(10)
    pairs = [ex.sample_pair(model, rng) for _ in range(20)]
    cfg.control.k_c = 1.0
    smith = [ex.run_reach(ex.make_loop(cfg, trained_dm, OracleForwardModel(model), seed=i,
                                       delay=1), q0, t).metrics.max_deviation
             for i, (q0, t) in enumerate(pairs)]
    base_cfg = Config()
    base_cfg.control.k_c = 0.0
    base = [ex.run_reach(ex.make_loop(base_cfg, trained_dm, None, seed=i, delay=0),
                         q0, t).metrics.max_deviation for i, (q0, t) in enumerate(pairs)]
    a, b = float(np.mean(smith)), float(np.mean(base))
    criterion(10, a <= b, f"mean deviation {1000 * a:.2f} mm with oracle at D=1 vs "
                          f"{1000 * b:.2f} mm at D=0 without predictor")


def test_11_determinism(criterion, tmp_path):
    cfgfile = tmp_path / "small.toml"
    cfgfile.write_text("[task]\nbabble_iterations = 300\ntrain_iterations = 60\n"
                       "eval_reaches = 2\nradial_repetitions = [0, 1]\ncontour_points = 12\n")
    runs = []
    for name in ("first", "second"):
        out = tmp_path / name
        for cmd in (["reach-random"], ["reach-radial"], ["contour"]):
            cli.main(cmd + ["--config", str(cfgfile), "--seed", "3", "--out", str(out)])
        runs.append(out)
    files = sorted(p.name for p in runs[0].glob("*.csv"))
    same = [f for f in files if (runs[0] / f).read_bytes() == (runs[1] / f).read_bytes()]
    criterion(11, files and len(same) == len(files),
              f"{len(same)}/{len(files)} CSV files byte-identical across reruns")

import json

import numpy as np
import pytest

from spikectl import arm, cli
from spikectl import experiments as ex
from spikectl.config import Config, from_dict, load_config, to_dict


def test_spec_validation():
    with pytest.raises(ValueError):
        ex.ExperimentSpec("dance")
    with pytest.raises(ValueError):
        ex.ExperimentSpec("babble", iterations=0)


def test_config_validation():
    with pytest.raises(ValueError):
        from_dict({"task": {"contour_radius": 0.0}})
    with pytest.raises(ValueError):
        from_dict({"arm": {"delay": 11}})
    with pytest.raises(KeyError):
        from_dict({"arm": {"wingspan": 1.0}})
    with pytest.raises(KeyError):
        from_dict({"legs": {}})


def test_toml_round_trip(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[arm]\ndelay = 2\n[cb]\npc_params = [1.0, 1.5, -60.0, 0.0]\n"
                    "xdot_max = [0.04, 0.04]\n[control]\nk_c = 0.5\n")
    cfg = load_config(path)
    assert cfg.arm.delay == 2 and cfg.control.k_c == 0.5
    assert cfg.cb.xdot_max == (0.04, 0.04)
    assert from_dict(to_dict(cfg)) == cfg
    json.dumps(to_dict(Config()))


def test_babble_dataset(model):
    data = ex.babble(model, None, 3000, np.random.default_rng(0))
    assert data.shape == (3000, 7)
    for row in data:
        q, xd, qd = row[1:3], row[3:5], row[5:7]
        assert model.within_limits(q)
        assert np.linalg.norm(xd - arm.jacobian(model, q) @ qd) <= 1e-9
    again = ex.babble(model, None, 3000, np.random.default_rng(0))
    assert data.tobytes() == again.tobytes()
    np.testing.assert_allclose(np.diff(data[:, 0]), 80.0)


def test_trained_babble_rows(trained_dm_weights):
    _, dm, data = trained_dm_weights
    assert len(data) == 3000 and dm.trained_windows == 3000


def test_metric_geometry():
    path = [(0, 0), (0.5, 0.1), (1, 0)]
    assert ex.compute_metrics(path, (0, 0), (1, 0)).max_deviation == pytest.approx(0.1)
    straight = [(t, 0.0) for t in np.linspace(0, 1, 11)]
    m = ex.compute_metrics(straight, (0, 0), (1, 0), cycle_ms=80.0)
    assert m.max_deviation == 0.0 and m.reach_time == pytest.approx(0.88)
    assert ex.compute_metrics([(0.2, 0.3)], (0.2, 0.3), (0.2, 0.3)).max_deviation == 0.0
    with pytest.raises(ValueError):
        ex.compute_metrics([], (0, 0), (1, 0))
    assert ex.point_segment_distance((2, 1), (0, 0), (1, 0)) == pytest.approx(np.sqrt(2))


def test_filter_approaches_constant_monotonically():
    y = ex.low_pass(np.full(100, 0.004), 0.1)
    assert np.all(np.diff(y) > 0) and np.all(y <= 0.004)
    assert y[-1] == pytest.approx(0.004, rel=1e-4)


def test_contour_points():
    pts = ex.contour_points(0.07, 80, np.zeros(2))
    assert len(pts) == 80
    np.testing.assert_allclose(pts[0], (0.0, 0.07), atol=1e-15)
    np.testing.assert_allclose(pts[20], (0.0, 0.0), atol=1e-15)
    np.testing.assert_allclose(pts[10], (0.035, 0.0495), atol=5e-5)


def test_contour_metric_on_contour():
    pts = ex.contour_points(0.07, 80, np.zeros(2))
    m = ex.contour_metrics(pts, pts, 0.1)
    assert m.contour_error.max() < 1e-12


def test_radial_targets(model):
    c = ex.workspace_center(model)
    x0 = arm.forward_kinematics(model, c)
    t = np.array(ex.radial_targets(x0, 0.10))
    assert len(t) == 8
    np.testing.assert_allclose(np.hypot(*(t - x0).T), 0.10)
    ang = np.degrees(np.arctan2(*(t - x0).T[::-1])) % 360
    np.testing.assert_allclose(ang, np.arange(0, 360, 45), atol=1e-9)
    assert all(arm.reachable(model, p) for p in t)


def test_sample_pair_is_reachable(model):
    rng = np.random.default_rng(2)
    for _ in range(20):
        q0, target = ex.sample_pair(model, rng)
        assert model.within_limits(q0) and arm.reachable(model, target)
        assert ex.segment_reachable(model, arm.forward_kinematics(model, q0), target)


def test_zero_length_reach(trained_dm, model):
    cfg = Config()
    q0 = np.array([-1.0, 1.6])
    loop = ex.make_loop(cfg, trained_dm, sigma_x=0.0, sigma_xdot=0.0)
    res = ex.run_reach(loop, q0, arm.forward_kinematics(model, q0))
    assert res.metrics.max_deviation == 0.0 and res.metrics.reached
    assert len(res.records) == 1


def test_cycle_csv_recomputes_metrics(trained_dm, tmp_path):
    cfg = Config()
    q0 = np.array([-1.0, 1.6])
    target = arm.forward_kinematics(cfg.arm.model(), q0) + [0.02, 0.01]
    res = ex.run_reach(ex.make_loop(cfg, trained_dm), q0, target)
    path = tmp_path / "cycles.csv"
    ex.write_cycles(path, res.records)
    rows = ex.read_cycles(path)
    xs = np.stack([rows["xs_x"], rows["xs_y"]], 1)
    again = ex.compute_metrics(xs, res.start, target, res.metrics.reached)
    assert again.max_deviation == res.metrics.max_deviation
    assert again.reach_time == res.metrics.reach_time


def test_pf_weight_csv_round_trip(tmp_path):
    from spikectl.cerebellum import CBConfig, build_cb
    cb = build_cb(CBConfig(), 0)
    cb.pf_groups()[1].weights[cb.pf_groups()[1].mask] = 0.37
    ex.write_pf_weights(tmp_path / "pf.csv", cb)
    other = build_cb(CBConfig(), 0)
    ex.read_pf_weights(tmp_path / "pf.csv", other)
    np.testing.assert_array_equal(other.pf_weights(), cb.pf_weights())


@pytest.mark.slow
def test_radial_reset_keeps_targets_independent(trained_dm):
    cfg = Config()
    cfg.task.radial_repetitions = (0, 1)
    res = ex.run_radial_reach(cfg, trained_dm, seed=0)
    weights = [r["weights"] for r in res]
    assert not np.array_equal(weights[0], weights[1])
    # with target 1's reach also run, target 0's snapshot is unchanged
    alone = ex.run_radial_reach(cfg, trained_dm, seed=0)
    assert alone[0]["weights"].tobytes() == weights[0].tobytes()
    base = [r["levels"][0].metrics.max_deviation for r in res]
    assert base == [r["levels"][0].metrics.max_deviation for r in alone]


def test_contour_skip_rule(trained_dm):
    cfg = Config()
    cfg.task.contour_points = 8
    cfg.task.contour_time_limit_s = 0.16
    res = ex.run_contour(cfg, trained_dm, None, seed=0)
    per_point = 2
    assert len(res.records) <= per_point * 8
    assert len(res.skipped) >= 1


def test_cli_babble_metrics_and_plot(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["babble", "--iterations", "20", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["result"]["iterations"] == 20
    assert (out / "babble.csv").read_text().splitlines()[0] == ",".join(ex.DATASET_HEADER)
    assert len((out / "babble.csv").read_text().splitlines()) == 21

    from spikectl import diffmap
    cfg = Config()
    dm = diffmap.build_dm(cfg.dm, 0)
    diffmap.import_weights(dm, out / "dm_weights.csv")
    q0 = np.array([-1.0, 1.6])
    target = arm.forward_kinematics(cfg.arm.model(), q0) + [0.01, 0.0]
    res = ex.run_reach(ex.make_loop(cfg, dm), q0, target)
    cycles = out / "reach000_off.csv"
    ex.write_cycles(cycles, res.records[:5])
    capsys.readouterr()
    assert cli.main(["metrics", "--cycles", str(cycles), "--out", str(out)]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["reach_time"] == pytest.approx(0.4)
    assert cli.main(["plot", "--out", str(out)]) == 0
    assert (out / "trajectories.svg").exists()


def test_cli_is_deterministic(tmp_path):
    cfgfile = tmp_path / "small.toml"
    cfgfile.write_text("[task]\ntrain_iterations = 30\neval_reaches = 1\n")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        cli.main(["babble", "--iterations", "200", "--out", str(out)])
        cli.main(["train-cb", "--config", str(cfgfile), "--dm", str(out / "dm_weights.csv"),
                  "--out", str(out)])
        outs.append(out)
    for f in ("babble.csv", "dm_weights.csv", "pf_weights.csv", "epred.csv"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f


def test_cli_rejects_bad_iterations(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["babble", "--iterations", "0", "--out", str(tmp_path)])

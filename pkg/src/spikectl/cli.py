"""Command-line entry point: ``spikectl <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import arm as plant
from . import cerebellum, diffmap
from . import experiments as ex
from .config import Config, load_config, to_dict

log = logging.getLogger("spikectl")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def write_summary(out: str, summary: dict) -> None:
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _dm(cfg: Config, args, out: str | None = None):
    if args.dm:
        dm = diffmap.build_dm(cfg.dm, args.seed)
        diffmap.import_weights(dm, args.dm)
        return dm
    log.info("babbling %d iterations to train the differential map", cfg.task.babble_iterations)
    dm, data = ex.train_dm(cfg, args.seed)
    if out:
        ex.write_dataset(os.path.join(out, "babble.csv"), data)
        diffmap.export_weights(dm, os.path.join(out, "dm_weights.csv"))
    return dm


def _cb(cfg: Config, args):
    """Pre-trained cerebellum from --cb-weights, else a fresh one."""
    cb = cerebellum.build_cb(cfg.cb, args.seed)
    if args.cb_weights:
        ex.read_pf_weights(args.cb_weights, cb)
    return cb


def cmd_babble(cfg: Config, args) -> dict:
    iters = args.iterations or cfg.task.babble_iterations
    dm, data = ex.train_dm(cfg, args.seed, iters)
    ex.write_dataset(os.path.join(args.out, "babble.csv"), data)
    diffmap.export_weights(dm, os.path.join(args.out, "dm_weights.csv"))
    fid = ex.directional_fidelity(dm, cfg.arm.model(), 100, np.random.default_rng(args.seed + 1))
    return {"iterations": iters, "directional_fidelity": fid}


def cmd_train_cb(cfg: Config, args) -> dict:
    dm = _dm(cfg, args, args.out)
    cb = _cb(cfg, args)
    iters = args.iterations or cfg.task.train_iterations
    rng, = ex.streams(args.seed + 1, 1)
    errors = np.array(ex.train_cb_random(cfg, dm, cb, iters, rng, noise_seed=args.seed))
    ex.write_pf_weights(os.path.join(args.out, "pf_weights.csv"), cb)
    write_epred(os.path.join(args.out, "epred.csv"), errors)
    n = max(1, len(errors) // 10)
    return {"iterations": iters,
            "mean_abs_epred_first10": errors[:n].mean(0),
            "mean_abs_epred_last10": errors[-n:].mean(0)}


def write_epred(path, errors) -> None:
    with open(path, "w") as fh:
        fh.write("cycle,abs_epred_x,abs_epred_y\n")
        for i, e in enumerate(errors):
            fh.write(f"{i},{float(e[0])!r},{float(e[1])!r}\n")


def cmd_reach_random(cfg: Config, args) -> dict:
    dm = _dm(cfg, args, args.out)
    model = cfg.arm.model()
    rng_eval, = ex.streams(args.seed + 2, 1)
    pairs = [ex.sample_pair(model, rng_eval) for _ in range(cfg.task.eval_reaches)]
    if args.cb == "off":
        results = []
        for i, (q0, tgt) in enumerate(pairs):
            noise = int(np.random.SeedSequence([args.seed, i]).generate_state(1)[0])
            res = ex.run_reach(ex.make_loop(cfg, dm, None, seed=noise), q0, tgt)
            ex.write_cycles(os.path.join(args.out, f"reach{i:03d}_off.csv"), res.records)
            results.append(res.metrics.summary())
        return {"cb": "off", "reaches": results}
    cb = _cb(cfg, args)
    if not args.cb_weights:
        iters = args.iterations or cfg.task.train_iterations
        rng, = ex.streams(args.seed + 1, 1)
        errors = np.array(ex.train_cb_random(cfg, dm, cb, iters, rng, noise_seed=args.seed))
        write_epred(os.path.join(args.out, "epred.csv"), errors)
        ex.write_pf_weights(os.path.join(args.out, "pf_weights.csv"), cb)
    res = ex.evaluate_pairs(cfg, dm, cb, pairs, args.seed)
    for p in res:
        for side in ("on", "off"):
            ex.write_cycles(os.path.join(args.out, f"reach{p['index']:03d}_{side}.csv"),
                            p[side].records)
    summary = ex.pair_summary(res)
    summary["time_speedup_percent"] = 100.0 * (summary["mean_time_ratio"] - 1.0)
    return summary


def cmd_reach_radial(cfg: Config, args) -> dict:
    dm = _dm(cfg, args, args.out)
    results = ex.run_radial_reach(cfg, dm, args.seed)
    for r in results:
        for n, res in r["levels"].items():
            ex.write_cycles(os.path.join(args.out, f"radial{r['angle']:03d}_rep{n}.csv"),
                            res.records)
    summary = ex.radial_summary(results)
    summary["time_speedup_percent"] = 100.0 * (summary["mean_time_ratio"] - 1.0)
    return summary


def cmd_contour(cfg: Config, args) -> dict:
    dm = _dm(cfg, args, args.out)
    cb = _cb(cfg, args) if args.cb == "on" else None
    res = ex.run_contour(cfg, dm, cb, seed=args.seed)
    ex.write_cycles(os.path.join(args.out, f"contour_{args.cb}.csv"), res.records)
    with open(os.path.join(args.out, f"contour_error_{args.cb}.csv"), "w") as fh:
        fh.write("cycle,error,filtered\n")
        for i, (e, f) in enumerate(zip(res.metrics.contour_error, res.metrics.filtered_error)):
            fh.write(f"{i},{float(e)!r},{float(f)!r}\n")
    if cb is not None and cb.last_record is not None:
        cb.last_record.to_csv(os.path.join(args.out, "dcn_raster.csv"))
    out = res.metrics.summary()
    out.update(cb=args.cb, skipped=len(res.skipped), points=len(res.points))
    return out


def cmd_metrics(cfg: Config, args) -> dict:
    """Recompute metrics from a cycles CSV alone."""
    if not args.cycles:
        raise SystemExit("metrics needs --cycles <file>")
    rows = ex.read_cycles(args.cycles)
    xs = np.stack([rows["xs_x"], rows["xs_y"]], 1)
    if args.contour:
        model = cfg.arm.model()
        pts = ex.contour_points(cfg.task.contour_radius, cfg.task.contour_points,
                                ex.contour_center(model, cfg.task.contour_radius))
        return ex.contour_metrics(xs, pts, cfg.task.filter_beta, cfg.control.cycle_ms).summary()
    target = np.array([rows["xd_x"][0], rows["xd_y"][0]])
    dist = np.hypot(*(target - xs[-1]))
    return ex.compute_metrics(xs, xs[0], target, bool(dist <= cfg.control.tolerance),
                              cfg.control.cycle_ms).summary()


def cmd_plot(cfg: Config, args) -> dict:
    from . import plots
    return {"written": plots.plot_directory(args.out)}


COMMANDS = {
    "babble": cmd_babble,
    "train-cb": cmd_train_cb,
    "reach-random": cmd_reach_random,
    "reach-radial": cmd_reach_radial,
    "contour": cmd_contour,
    "metrics": cmd_metrics,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spikectl", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config", help="TOML file with [arm] [dm] [cb] [control] [task]")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--cb", choices=("on", "off"), default="on")
    ap.add_argument("--iterations", type=int, help="override the task's iteration count")
    ap.add_argument("--dm", help="differential-map weight CSV to load instead of babbling")
    ap.add_argument("--cb-weights", help="parallel-fibre weight CSV from train-cb")
    ap.add_argument("--cycles", help="cycle CSV for the metrics command")
    ap.add_argument("--contour", action="store_true", help="metrics: score against the contour")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.iterations is not None and args.iterations < 1:
        raise SystemExit("--iterations must be positive")
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    result = COMMANDS[args.command](cfg, args)
    if args.command == "metrics":
        json.dump(result, sys.stdout, indent=2, sort_keys=True, default=_json_default)
        print()
        return 0
    if args.command != "plot":
        write_summary(args.out, {"command": args.command, "seed": args.seed,
                                 "config": to_dict(cfg), "result": result})
    print(json.dumps({"command": args.command, "out": args.out}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

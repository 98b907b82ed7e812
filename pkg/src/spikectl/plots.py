"""SVG figures from the CSV outputs of a run directory."""

from __future__ import annotations

import csv
import glob
import os

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "spikectl"
    return plt


def _save(fig, path) -> str:
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def trajectories(paths, out_path) -> str:
    from .experiments import read_cycles
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    for p in paths:
        rows = read_cycles(p)
        style = "-" if "_on" in os.path.basename(p) else "--"
        ax.plot(rows["xs_x"], rows["xs_y"], style, lw=0.8)
        ax.plot(rows["xd_x"][-1], rows["xd_y"][-1], "k+")
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    out = _save(fig, out_path)
    plt.close(fig)
    return out


def epred_curve(path, out_path, smooth: int = 100) -> str:
    plt = _pyplot()
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    fig, ax = plt.subplots(figsize=(6, 3))
    k = max(1, min(smooth, len(data)))
    kernel = np.ones(k) / k
    for col, name in ((1, "x"), (2, "y")):
        ax.plot(np.convolve(data[:, col], kernel, mode="valid"), label=f"|e_pred| {name}")
    ax.set_xlabel("cycle")
    ax.set_ylabel("m/s")
    ax.legend()
    out = _save(fig, out_path)
    plt.close(fig)
    return out


def dcn_raster(path, out_path) -> str:
    plt = _pyplot()
    pops, idx, ts = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["population"].startswith("dcn"):
                pops.append(row["population"])
                idx.append(int(row["neuron"]))
                ts.append(float(row["t_ms"]))
    names = sorted(set(pops))
    fig, ax = plt.subplots(figsize=(6, 3))
    for k, name in enumerate(names):
        sel = [i for i, p in enumerate(pops) if p == name]
        ax.plot([ts[i] for i in sel], [k * 4 + idx[i] for i in sel], "|", ms=6)
    ax.set_yticks([k * 4 + 1.5 for k in range(len(names))], names)
    ax.set_xlabel("t (ms)")
    out = _save(fig, out_path)
    plt.close(fig)
    return out


def plot_directory(out: str) -> list[str]:
    written = []
    reach = sorted(glob.glob(os.path.join(out, "reach*_*.csv")) +
                   glob.glob(os.path.join(out, "radial*_rep*.csv")) +
                   glob.glob(os.path.join(out, "contour_o*.csv")))
    if reach:
        written.append(trajectories(reach, os.path.join(out, "trajectories.svg")))
    if os.path.exists(os.path.join(out, "epred.csv")):
        written.append(epred_curve(os.path.join(out, "epred.csv"), os.path.join(out, "epred.svg")))
    if os.path.exists(os.path.join(out, "dcn_raster.csv")):
        written.append(dcn_raster(os.path.join(out, "dcn_raster.csv"),
                                  os.path.join(out, "dcn_raster.svg")))
    return written

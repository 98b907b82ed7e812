"""Compiled inner loop for clocked Izhikevich network simulation.

Everything here works on flat arrays so one call advances the whole network
through a presentation window. The Python layer in ``snn.py`` owns the layout.
"""

import numba as nb
import numpy as np

V_PEAK = 30.0
N_SUBSTEPS = 4

# rule kinds
NONE = 0
SYMMETRIC = 1
ANTISYMMETRIC = 2


@nb.njit(cache=True)
def sym_delta(dt, s, tau1, tau2, window, printed):
    if abs(dt) > window:
        return 0.0
    r = dt / tau1
    if printed:
        return s * (1.0 - r * r) * np.exp(abs(dt) / tau2)
    return s * (1.0 - r * r) * np.exp(-abs(dt) / tau2)


@nb.njit(cache=True)
def antisym_delta(dt, s_a, s_b, tau_a, tau_b, window, printed):
    if abs(dt) > window:
        return 0.0
    if dt <= 0.0:
        if printed:
            return -s_a * np.exp(-dt / tau_a)
        return -s_a * np.exp(-abs(dt) / tau_a)
    return s_b * np.exp(-dt / tau_b)


@nb.njit(cache=True)
def rule_delta(kind, dt, rp):
    # rp: s, tau1, tau2, s_a, s_b, tau_a, tau_b, window, printed
    if kind == SYMMETRIC:
        return sym_delta(dt, rp[0], rp[1], rp[2], rp[7], rp[8] != 0.0)
    if kind == ANTISYMMETRIC:
        return antisym_delta(dt, rp[3], rp[4], rp[5], rp[6], rp[7], rp[8] != 0.0)
    return 0.0


@nb.njit(cache=True)
def izh_step(v, u, i_in, a, b, c, d, dt):
    """One clocked update; returns (v, u, fired)."""
    if v >= V_PEAK:
        return c, u + d, True
    h = dt / N_SUBSTEPS
    fired = False
    for _ in range(N_SUBSTEPS):
        v += h * ((0.04 * v + 5.0) * v + 140.0 - u + i_in)
        if v >= V_PEAK:
            fired = True
            break
    u += dt * a * (b * v - u)
    if fired:
        v = c
        u += d
    return v, u, fired


@nb.njit(cache=True)
def run_window(
    n_steps, dt, t0,
    a, b, c, d, v, u, bias, ext, syn_in,
    last_spike, pop_start, pop_end, pop_last,
    g_pre0, g_npre, g_post0, g_npost, g_woff, g_kind, g_rule,
    g_wmin, g_wmax, g_gate, g_gate_win, g_plastic,
    weights, mask, plasticity_on, fired_out,
):
    """Advance the network ``n_steps`` clock ticks.

    Spikes emitted at tick k reach their targets as a one-tick current pulse
    at tick k+1. Returns -1 on success or the first non-finite neuron index.
    """
    n = v.shape[0]
    n_groups = g_pre0.shape[0]
    n_pops = pop_start.shape[0]
    fired = np.zeros(n, dtype=np.bool_)
    prev_last = np.empty(n)
    for k in range(n_steps):
        t = t0 + k * dt
        for i in range(n):
            i_tot = bias[i] + ext[i] + syn_in[i]
            syn_in[i] = 0.0
            vi, ui, f = izh_step(v[i], u[i], i_tot, a[i], b[i], c[i], d[i], dt)
            if not (np.isfinite(vi) and np.isfinite(ui)):
                return i
            v[i] = vi
            u[i] = ui
            fired[i] = f
            fired_out[k, i] = f
            prev_last[i] = last_spike[i]
            if f:
                last_spike[i] = t
        for p in range(n_pops):
            for i in range(pop_start[p], pop_end[p]):
                if fired[i]:
                    pop_last[p] = t
                    break

        for g in range(n_groups):
            pre0 = g_pre0[g]
            post0 = g_post0[g]
            npre = g_npre[g]
            npost = g_npost[g]
            off = g_woff[g]
            # delivery
            for i in range(npre):
                if fired[pre0 + i]:
                    row = off + i * npost
                    for j in range(npost):
                        syn_in[post0 + j] += weights[row + j]
            if not plasticity_on or not g_plastic[g]:
                continue
            if g_gate[g, 0] >= 0:
                open_ = False
                for m in range(g_gate.shape[1]):
                    gp = g_gate[g, m]
                    if gp >= 0 and t - pop_last[gp] < g_gate_win[g]:
                        open_ = True
                if not open_:
                    continue
            kind = g_kind[g]
            rp = g_rule[g]
            window = rp[7]
            lo = g_wmin[g]
            hi = g_wmax[g]
            # post spike: pair with the latest pre spike (same tick counts as dt=0)
            for j in range(npost):
                if not fired[post0 + j]:
                    continue
                for i in range(npre):
                    idx = off + i * npost + j
                    if not mask[idx]:
                        continue
                    lag = t - last_spike[pre0 + i]
                    if lag > window:
                        continue
                    w = weights[idx] + rule_delta(kind, lag, rp)
                    weights[idx] = min(max(w, lo), hi)
            # pre spike: pair with the latest strictly earlier post spike
            for i in range(npre):
                if not fired[pre0 + i]:
                    continue
                row = off + i * npost
                for j in range(npost):
                    idx = row + j
                    if not mask[idx]:
                        continue
                    lag = prev_last[post0 + j] - t
                    if -lag > window:
                        continue
                    w = weights[idx] + rule_delta(kind, lag, rp)
                    weights[idx] = min(max(w, lo), hi)
    return -1

"""Multistage rollout search over holding actions.

A decision is scored by playing the line forward in expectation: apply
a candidate hold, advance the bus one stop with expected travel and
dwell, price the fleet's headway spread at the departure instant, then
let the next-due bus face its own menu, and so on for a fixed number
of stages. Beyond the last stage the scorer network supplies the
value of the best action at the next due decision, discounted once
per stage on the way back up. Ties prefer the shorter hold because
menus are scanned in increasing order with a strict comparison.

The search runs on a compiled kernel (cache-enabled, no allocation in
the hot loop beyond small workspaces). ``engine="python"`` switches
to a line-by-line twin used to cross-check the kernel: both do the
same arithmetic in the same order, so their results match exactly.

Projection rules during the rollout, for bus b at evaluation time tau:

* buses still dwelling walk from their stop without their own
  remaining dwell, i.e. from tau;
* buses committed to travel walk from their projected arrival, first
  paying their already-fixed forced dwell there;
* every further stop costs its dwell coefficient times the service
  gap, and each hop costs the segment's expected transit;
* the headway is the walk's arrival at the predecessor's anchor stop
  minus the predecessor's arrival there (passage interval at a common
  point), with the ring order of predecessors frozen at the root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..headways import LineExpectations, preceding_bus
from ..model import BusLineConfig

__all__ = [
    "RolloutTables",
    "RolloutState",
    "rollout_from_context",
    "root_q_min",
    "search_best_action",
]


@dataclass(frozen=True)
class RolloutTables:
    """Per-line constants the search needs, in kernel-friendly form."""

    n_stops: int
    n_buses: int
    seg_expected: np.ndarray  # stop -> expected transit to next stop
    beta: np.ndarray  # stop -> expected dwell per second of gap
    menu_flat: np.ndarray  # concatenated per-stop hold menus
    menu_off: np.ndarray  # stop -> slice of menu_flat, len n_stops+1
    max_hold_s: float
    ring_m: float

    @classmethod
    def from_config(
        cls, cfg: BusLineConfig, exp: LineExpectations | None = None
    ) -> "RolloutTables":
        if exp is None:
            exp = LineExpectations(cfg)
        flat: list[float] = []
        off = [0]
        for e in range(cfg.n_stops):
            flat.extend(cfg.stop_action_set(e + 1).holds_s)
            off.append(len(flat))
        return cls(
            n_stops=cfg.n_stops,
            n_buses=cfg.n_buses,
            seg_expected=exp.seg_expected.astype(np.float64),
            beta=exp.beta.astype(np.float64),
            menu_flat=np.array(flat, dtype=np.float64),
            menu_off=np.array(off, dtype=np.int64),
            max_hold_s=float(cfg.max_hold_s()),
            ring_m=float(exp.ring_m),
        )


@dataclass
class RolloutState:
    """Per-bus projected coordinates plus stop visit times."""

    act_time_s: np.ndarray
    act_stop: np.ndarray
    arr_time_s: np.ndarray
    pending: np.ndarray  # uint8: dwelling at act_stop right now
    dwell_next_s: np.ndarray
    latest_arrival_s: np.ndarray
    pred: np.ndarray  # bus -> bus physically ahead, frozen

    def copies(self):
        return (
            self.act_time_s.copy(),
            self.act_stop.copy(),
            self.arr_time_s.copy(),
            self.pending.copy(),
            self.dwell_next_s.copy(),
            self.latest_arrival_s.copy(),
        )


def rollout_from_context(ctx) -> RolloutState:
    """Freeze a decision context into rollout coordinates."""
    n_b = len(ctx.act_time_s)
    pred = np.empty(n_b, dtype=np.int64)
    for b in range(n_b):
        pred[b] = preceding_bus(ctx.view, ctx.exp.ring_m, b)
    return RolloutState(
        act_time_s=np.asarray(ctx.act_time_s, dtype=np.float64).copy(),
        act_stop=np.asarray(ctx.act_stop, dtype=np.int64).copy(),
        arr_time_s=np.asarray(ctx.arr_time_s, dtype=np.float64).copy(),
        pending=np.asarray(ctx.pending_here, dtype=np.uint8).copy(),
        dwell_next_s=np.asarray(ctx.dwell_next_s, dtype=np.float64).copy(),
        latest_arrival_s=np.asarray(ctx.view.latest_arrival_s, dtype=np.float64).copy(),
        pred=pred,
    )


# ---------------------------------------------------------------------------
# Compiled kernel


@njit(cache=True)
def _k_headway(
    b, tau, act_stop, arr_time, pending, dwell_next, la, pred, seg_exp, beta, n_e
):
    p = pred[b]
    fp = act_stop[p]
    ap = arr_time[p]
    f = act_stop[b]
    if pending[b] != 0:
        if f == fp:
            return tau - ap
        r = tau + seg_exp[f]
    else:
        r = arr_time[b]
        if f == fp:
            return r - ap
        r = r + dwell_next[b] + seg_exp[f]
    f = (f + 1) % n_e
    while f != fp:
        g = r - la[f]
        if g > 0.0:
            r = r + beta[f] * g
        r = r + seg_exp[f]
        f = (f + 1) % n_e
    return r - ap


@njit(cache=True)
def _k_stage_cost(
    tau,
    act_stop,
    arr_time,
    pending,
    dwell_next,
    la,
    pred,
    seg_exp,
    beta,
    n_e,
    n_b,
    coef_esh,
    esh_s,
    scale,
):
    if coef_esh:
        acc = 0.0
        for b in range(n_b):
            h = _k_headway(
                b, tau, act_stop, arr_time, pending, dwell_next, la, pred,
                seg_exp, beta, n_e,
            )
            dv = h - esh_s
            acc += dv * dv
        return acc / scale
    s1 = 0.0
    s2 = 0.0
    for b in range(n_b):
        h = _k_headway(
            b, tau, act_stop, arr_time, pending, dwell_next, la, pred,
            seg_exp, beta, n_e,
        )
        s1 += h
        s2 += h * h
    return (s2 - s1 * s1 / n_b) / scale


@njit(cache=True)
def _k_q_scan(
    tbar,
    la,
    act_time,
    act_stop,
    n_e,
    n_b,
    hscale,
    menu_flat,
    lo,
    hi,
    max_hold,
    w1,
    b1,
    w2,
    b2,
    w3,
    b3,
    alpha,
    x,
    base1,
    h1v,
    h2v,
):
    """Min and argmin of the scorer over one stop's menu at one state."""
    d = x.shape[0]
    for e in range(n_e):
        x[e] = (tbar - la[e]) / hscale
    for b in range(n_b):
        x[n_e + b] = (act_time[b] - tbar) / hscale
    for b in range(n_b):
        x[n_e + n_b + b] = (act_stop[b] + 1.0) / n_e
    n1 = w1.shape[0]
    n2 = w2.shape[0]
    for j in range(n1):
        s = 0.0
        for c in range(d - 1):
            s += w1[j, c] * x[c]
        base1[j] = s - b1[j]
    best = np.inf
    besti = -1
    for m in range(lo, hi):
        a_n = menu_flat[m] / max_hold
        for j in range(n1):
            v = base1[j] + w1[j, d - 1] * a_n
            h1v[j] = 1.0 / (1.0 + math.exp(-alpha * v))
        for j2 in range(n2):
            s = 0.0
            for j in range(n1):
                s += w2[j2, j] * h1v[j]
            v = s - b2[j2]
            h2v[j2] = 1.0 / (1.0 + math.exp(-alpha * v))
        s = 0.0
        for j2 in range(n2):
            s += w3[j2] * h2v[j2]
        y = 1.0 / (1.0 + math.exp(-alpha * (s - b3)))
        if y < best:
            best = y
            besti = m - lo
    return best, besti


@njit(cache=True)
def _k_search(
    depth,
    i0,
    act_time,
    act_stop,
    arr_time,
    pending,
    dwell_next,
    la,
    pred,
    seg_exp,
    beta,
    menu_flat,
    menu_off,
    max_hold,
    hscale,
    gamma,
    coef_esh,
    esh_s,
    scale,
    w1,
    b1,
    w2,
    b2,
    w3,
    b3,
    alpha,
):
    n_b = act_time.shape[0]
    n_e = la.shape[0]
    d = n_e + 2 * n_b + 1
    x = np.empty(d)
    base1 = np.empty(w1.shape[0])
    h1v = np.empty(w1.shape[0])
    h2v = np.empty(w2.shape[0])

    if depth == 0:
        f0 = act_stop[i0]
        best, besti = _k_q_scan(
            act_time[i0], la, act_time, act_stop, n_e, n_b, hscale,
            menu_flat, menu_off[f0], menu_off[f0 + 1], max_hold,
            w1, b1, w2, b2, w3, b3, alpha, x, base1, h1v, h2v,
        )
        return besti, best

    st_bus = np.empty(depth, np.int64)
    st_t0 = np.empty(depth)
    st_hi = np.empty(depth, np.int64)
    st_lo = np.empty(depth, np.int64)
    st_cur = np.empty(depth, np.int64)
    st_best = np.empty(depth)
    st_cost = np.empty(depth)
    u_time = np.empty(depth)
    u_stop = np.empty(depth, np.int64)
    u_arr = np.empty(depth)
    u_pend = np.empty(depth, np.uint8)
    u_dn = np.empty(depth)
    u_f1 = np.empty(depth, np.int64)
    u_la = np.empty(depth)

    best_root = -1
    lvl = 0
    st_bus[0] = i0
    st_t0[0] = act_time[i0]
    f = act_stop[i0]
    st_lo[0] = menu_off[f]
    st_hi[0] = menu_off[f + 1]
    st_cur[0] = st_lo[0]
    st_best[0] = np.inf

    while True:
        if st_cur[lvl] < st_hi[lvl]:
            m = st_cur[lvl]
            st_cur[lvl] += 1
            a = menu_flat[m]
            i = st_bus[lvl]
            f = act_stop[i]
            f1 = (f + 1) % n_e
            u_time[lvl] = act_time[i]
            u_stop[lvl] = f
            u_arr[lvl] = arr_time[i]
            u_pend[lvl] = pending[i]
            u_dn[lvl] = dwell_next[i]
            u_f1[lvl] = f1
            u_la[lvl] = la[f1]

            t0 = st_t0[lvl]
            aprime = t0 + a + seg_exp[f]
            g = aprime - la[f1]
            dn = beta[f1] * g if g > 0.0 else 0.0
            act_time[i] = aprime + dn
            act_stop[i] = f1
            arr_time[i] = aprime
            pending[i] = 0
            dwell_next[i] = dn
            la[f1] = aprime
            tau = t0 + a
            c = _k_stage_cost(
                tau, act_stop, arr_time, pending, dwell_next, la, pred,
                seg_exp, beta, n_e, n_b, coef_esh, esh_s, scale,
            )
            st_cost[lvl] = c

            if lvl + 1 < depth:
                lvl += 1
                im = 0
                tm = act_time[0]
                for b in range(1, n_b):
                    if act_time[b] < tm:
                        tm = act_time[b]
                        im = b
                st_bus[lvl] = im
                st_t0[lvl] = tm
                ff = act_stop[im]
                st_lo[lvl] = menu_off[ff]
                st_hi[lvl] = menu_off[ff + 1]
                st_cur[lvl] = st_lo[lvl]
                st_best[lvl] = np.inf
            else:
                im = 0
                tm = act_time[0]
                for b in range(1, n_b):
                    if act_time[b] < tm:
                        tm = act_time[b]
                        im = b
                ff = act_stop[im]
                mq, _ = _k_q_scan(
                    tm, la, act_time, act_stop, n_e, n_b, hscale,
                    menu_flat, menu_off[ff], menu_off[ff + 1], max_hold,
                    w1, b1, w2, b2, w3, b3, alpha, x, base1, h1v, h2v,
                )
                v = c + gamma * mq
                act_time[i] = u_time[lvl]
                act_stop[i] = u_stop[lvl]
                arr_time[i] = u_arr[lvl]
                pending[i] = u_pend[lvl]
                dwell_next[i] = u_dn[lvl]
                la[u_f1[lvl]] = u_la[lvl]
                if v < st_best[lvl]:
                    st_best[lvl] = v
                    if lvl == 0:
                        best_root = m - st_lo[0]
        else:
            if lvl == 0:
                break
            sub = st_best[lvl]
            lvl -= 1
            i = st_bus[lvl]
            act_time[i] = u_time[lvl]
            act_stop[i] = u_stop[lvl]
            arr_time[i] = u_arr[lvl]
            pending[i] = u_pend[lvl]
            dwell_next[i] = u_dn[lvl]
            la[u_f1[lvl]] = u_la[lvl]
            v = st_cost[lvl] + gamma * sub
            if v < st_best[lvl]:
                st_best[lvl] = v
                if lvl == 0:
                    best_root = st_cur[lvl] - 1 - st_lo[0]
    return best_root, st_best[0]


# ---------------------------------------------------------------------------
# Pure-python twin, kept line for line parallel with the kernel


def _p_headway(
    b, tau, act_stop, arr_time, pending, dwell_next, la, pred, seg_exp, beta, n_e
):
    p = pred[b]
    fp = act_stop[p]
    ap = arr_time[p]
    f = act_stop[b]
    if pending[b] != 0:
        if f == fp:
            return tau - ap
        r = tau + seg_exp[f]
    else:
        r = arr_time[b]
        if f == fp:
            return r - ap
        r = r + dwell_next[b] + seg_exp[f]
    f = (f + 1) % n_e
    while f != fp:
        g = r - la[f]
        if g > 0.0:
            r = r + beta[f] * g
        r = r + seg_exp[f]
        f = (f + 1) % n_e
    return r - ap


def _p_stage_cost(
    tau, act_stop, arr_time, pending, dwell_next, la, pred, seg_exp, beta,
    n_e, n_b, coef_esh, esh_s, scale,
):
    if coef_esh:
        acc = 0.0
        for b in range(n_b):
            h = _p_headway(
                b, tau, act_stop, arr_time, pending, dwell_next, la, pred,
                seg_exp, beta, n_e,
            )
            dv = h - esh_s
            acc += dv * dv
        return acc / scale
    s1 = 0.0
    s2 = 0.0
    for b in range(n_b):
        h = _p_headway(
            b, tau, act_stop, arr_time, pending, dwell_next, la, pred,
            seg_exp, beta, n_e,
        )
        s1 += h
        s2 += h * h
    return (s2 - s1 * s1 / n_b) / scale


def _p_q_scan(
    tbar, la, act_time, act_stop, n_e, n_b, hscale, menu_flat, lo, hi, max_hold,
    w1, b1, w2, b2, w3, b3, alpha, x, base1, h1v, h2v,
):
    d = x.shape[0]
    for e in range(n_e):
        x[e] = (tbar - la[e]) / hscale
    for b in range(n_b):
        x[n_e + b] = (act_time[b] - tbar) / hscale
    for b in range(n_b):
        x[n_e + n_b + b] = (act_stop[b] + 1.0) / n_e
    n1 = w1.shape[0]
    n2 = w2.shape[0]
    for j in range(n1):
        s = 0.0
        for c in range(d - 1):
            s += w1[j, c] * x[c]
        base1[j] = s - b1[j]
    best = np.inf
    besti = -1
    for m in range(lo, hi):
        a_n = menu_flat[m] / max_hold
        for j in range(n1):
            v = base1[j] + w1[j, d - 1] * a_n
            h1v[j] = 1.0 / (1.0 + math.exp(-alpha * v))
        for j2 in range(n2):
            s = 0.0
            for j in range(n1):
                s += w2[j2, j] * h1v[j]
            v = s - b2[j2]
            h2v[j2] = 1.0 / (1.0 + math.exp(-alpha * v))
        s = 0.0
        for j2 in range(n2):
            s += w3[j2] * h2v[j2]
        y = 1.0 / (1.0 + math.exp(-alpha * (s - b3)))
        if y < best:
            best = y
            besti = m - lo
    return best, besti


def _p_search(
    depth, i0, act_time, act_stop, arr_time, pending, dwell_next, la, pred,
    seg_exp, beta, menu_flat, menu_off, max_hold, hscale,
    gamma, coef_esh, esh_s, scale, w1, b1, w2, b2, w3, b3, alpha,
):
    n_b = act_time.shape[0]
    n_e = la.shape[0]
    d = n_e + 2 * n_b + 1
    x = np.empty(d)
    base1 = np.empty(w1.shape[0])
    h1v = np.empty(w1.shape[0])
    h2v = np.empty(w2.shape[0])

    if depth == 0:
        f0 = act_stop[i0]
        best, besti = _p_q_scan(
            act_time[i0], la, act_time, act_stop, n_e, n_b, hscale,
            menu_flat, menu_off[f0], menu_off[f0 + 1], max_hold,
            w1, b1, w2, b2, w3, b3, alpha, x, base1, h1v, h2v,
        )
        return besti, best

    st_bus = np.empty(depth, np.int64)
    st_t0 = np.empty(depth)
    st_hi = np.empty(depth, np.int64)
    st_lo = np.empty(depth, np.int64)
    st_cur = np.empty(depth, np.int64)
    st_best = np.empty(depth)
    st_cost = np.empty(depth)
    u_time = np.empty(depth)
    u_stop = np.empty(depth, np.int64)
    u_arr = np.empty(depth)
    u_pend = np.empty(depth, np.uint8)
    u_dn = np.empty(depth)
    u_f1 = np.empty(depth, np.int64)
    u_la = np.empty(depth)

    best_root = -1
    lvl = 0
    st_bus[0] = i0
    st_t0[0] = act_time[i0]
    f = act_stop[i0]
    st_lo[0] = menu_off[f]
    st_hi[0] = menu_off[f + 1]
    st_cur[0] = st_lo[0]
    st_best[0] = np.inf

    while True:
        if st_cur[lvl] < st_hi[lvl]:
            m = st_cur[lvl]
            st_cur[lvl] += 1
            a = menu_flat[m]
            i = st_bus[lvl]
            f = act_stop[i]
            f1 = (f + 1) % n_e
            u_time[lvl] = act_time[i]
            u_stop[lvl] = f
            u_arr[lvl] = arr_time[i]
            u_pend[lvl] = pending[i]
            u_dn[lvl] = dwell_next[i]
            u_f1[lvl] = f1
            u_la[lvl] = la[f1]

            t0 = st_t0[lvl]
            aprime = t0 + a + seg_exp[f]
            g = aprime - la[f1]
            dn = beta[f1] * g if g > 0.0 else 0.0
            act_time[i] = aprime + dn
            act_stop[i] = f1
            arr_time[i] = aprime
            pending[i] = 0
            dwell_next[i] = dn
            la[f1] = aprime
            tau = t0 + a
            c = _p_stage_cost(
                tau, act_stop, arr_time, pending, dwell_next, la, pred,
                seg_exp, beta, n_e, n_b, coef_esh, esh_s, scale,
            )
            st_cost[lvl] = c

            if lvl + 1 < depth:
                lvl += 1
                im = 0
                tm = act_time[0]
                for b in range(1, n_b):
                    if act_time[b] < tm:
                        tm = act_time[b]
                        im = b
                st_bus[lvl] = im
                st_t0[lvl] = tm
                ff = act_stop[im]
                st_lo[lvl] = menu_off[ff]
                st_hi[lvl] = menu_off[ff + 1]
                st_cur[lvl] = st_lo[lvl]
                st_best[lvl] = np.inf
            else:
                im = 0
                tm = act_time[0]
                for b in range(1, n_b):
                    if act_time[b] < tm:
                        tm = act_time[b]
                        im = b
                ff = act_stop[im]
                mq, _ = _p_q_scan(
                    tm, la, act_time, act_stop, n_e, n_b, hscale,
                    menu_flat, menu_off[ff], menu_off[ff + 1], max_hold,
                    w1, b1, w2, b2, w3, b3, alpha, x, base1, h1v, h2v,
                )
                v = c + gamma * mq
                act_time[i] = u_time[lvl]
                act_stop[i] = u_stop[lvl]
                arr_time[i] = u_arr[lvl]
                pending[i] = u_pend[lvl]
                dwell_next[i] = u_dn[lvl]
                la[u_f1[lvl]] = u_la[lvl]
                if v < st_best[lvl]:
                    st_best[lvl] = v
                    if lvl == 0:
                        best_root = m - st_lo[0]
        else:
            if lvl == 0:
                break
            sub = st_best[lvl]
            lvl -= 1
            i = st_bus[lvl]
            act_time[i] = u_time[lvl]
            act_stop[i] = u_stop[lvl]
            arr_time[i] = u_arr[lvl]
            pending[i] = u_pend[lvl]
            dwell_next[i] = u_dn[lvl]
            la[u_f1[lvl]] = u_la[lvl]
            v = st_cost[lvl] + gamma * sub
            if v < st_best[lvl]:
                st_best[lvl] = v
                if lvl == 0:
                    best_root = st_cur[lvl] - 1 - st_lo[0]
    return best_root, st_best[0]


# ---------------------------------------------------------------------------
# Wrappers


def _net_args(net):
    return (
        net.w1,
        net.b1,
        net.w2,
        net.b2,
        net.w3,
        float(net.b3),
        float(net.slope),
    )


def root_q_min(
    tables: RolloutTables,
    net,
    roll: RolloutState,
    bus: int,
    headway_scale_s: float,
    engine: str = "numba",
) -> tuple[float, int]:
    """(min, argmin index) of the scorer over the due stop's menu."""
    fn = _k_search if engine == "numba" else _p_search
    act_time, act_stop, arr_time, pending, dwell_next, la = roll.copies()
    besti, best = fn(
        0, bus, act_time, act_stop, arr_time, pending, dwell_next, la, roll.pred,
        tables.seg_expected, tables.beta, tables.menu_flat, tables.menu_off,
        tables.max_hold_s, headway_scale_s,
        0.0, False, 0.0, 1.0, *_net_args(net),
    )
    return best, int(besti)


def search_best_action(
    tables: RolloutTables,
    net,
    roll: RolloutState,
    bus: int,
    depth: int,
    gamma: float,
    coefficient: str,
    esh_s: float,
    headway_scale_s: float | None = None,
    cost_scale: float | None = None,
    engine: str = "numba",
) -> tuple[int, float]:
    """Best action index in the due stop's menu, and its backed-up value."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if coefficient not in ("dch", "esh"):
        raise ValueError("coefficient must be 'dch' or 'esh'")
    if headway_scale_s is None:
        headway_scale_s = esh_s
    if cost_scale is None:
        cost_scale = tables.n_buses * esh_s * esh_s
    fn = _k_search if engine == "numba" else _p_search
    act_time, act_stop, arr_time, pending, dwell_next, la = roll.copies()
    besti, best = fn(
        depth, bus, act_time, act_stop, arr_time, pending, dwell_next, la,
        roll.pred, tables.seg_expected, tables.beta, tables.menu_flat,
        tables.menu_off, tables.max_hold_s, headway_scale_s,
        gamma, coefficient == "esh", esh_s, cost_scale, *_net_args(net),
    )
    return int(besti), float(best)

"""Headway estimators for a ring of buses.

The instantaneous headway of a bus is the expected time it needs to
reach the current position of the bus ahead of it: expected cruise time
over the remaining road, expected wait at each signal on the way, and
the expected dwell at each stop strictly between the two buses. The
bus's own unfinished dwell and the leading bus's dwell at its current
stop are not part of that gap.

Two spacing coefficients are derived from those headways: the mean
headway of the fleet right now (a dynamic coefficient), and a
demand-weighted equilibrium headway for the whole line (a static one),
found by a fixed point over the expected dwell per visit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BusLineConfig

__all__ = [
    "LineExpectations",
    "BusMarker",
    "RingView",
    "expected_signal_delay",
    "preceding_bus",
    "instantaneous_headway",
    "all_headways",
    "dch",
    "esh",
]


def expected_signal_delay(red_s: float, cycle_s: float) -> float:
    """Mean wait at a signal for a uniformly random arrival time.

    A red of r within a cycle of c delays an arrival by r - u with
    probability r/c (u uniform over the remaining red), zero otherwise,
    giving r^2 / (2 c).
    """
    return red_s * red_s / (2.0 * cycle_s)


@dataclass(frozen=True)
class _SegmentLayout:
    """Traversal order for one segment: pieces and signals between them."""

    piece_lengths_m: tuple[float, ...]
    intersection_idx: tuple[int, ...]  # indices into config.intersections


class LineExpectations:
    """Static geometry and expected-value tables for one line.

    Everything here is derived from the config once and shared by the
    simulator, the metrics and the controllers. Stop and bus indices
    are 0-based throughout.
    """

    def __init__(self, cfg: BusLineConfig):
        self.cfg = cfg
        self.n_stops = cfg.n_stops
        self.n_buses = cfg.n_buses
        self.ring_m = float(sum(g.length_m for g in cfg.segments))
        self.v_ms = cfg.cruise_speed_ms

        seg_lengths = np.array([g.length_m for g in cfg.segments], dtype=float)
        self.stop_pos = np.concatenate(([0.0], np.cumsum(seg_lengths)[:-1]))

        # Per-segment piece layout, and ring position of every signal.
        self.segment_layout: list[_SegmentLayout] = []
        inter_pos = np.zeros(len(cfg.intersections))
        inter_delay = np.zeros(len(cfg.intersections))
        for g in cfg.segments:
            idx = tuple(
                k for k, i in enumerate(cfg.intersections) if i.segment == g.id
            )
            pieces = g.pieces(len(idx))
            self.segment_layout.append(_SegmentLayout(pieces, idx))
            at = self.stop_pos[g.id - 1]
            for piece, k in zip(pieces, idx):
                at += piece
                inter_pos[k] = at
                spec = cfg.intersections[k]
                inter_delay[k] = expected_signal_delay(spec.red_s, spec.cycle_s)
        self.inter_pos = inter_pos
        self.inter_delay = inter_delay

        # Expected transit per segment: cruise plus its signals.
        self.seg_expected = seg_lengths / self.v_ms
        for layout, g in zip(self.segment_layout, range(self.n_stops)):
            for k in layout.intersection_idx:
                self.seg_expected[g] += inter_delay[k]

        # Steady-state alighting rate per stop: riders from each origin
        # land k stops downstream with the origin's series weight.
        rates = np.array([s.rate_per_min for s in cfg.stops])
        alight = np.zeros(self.n_stops)
        for o, stop in enumerate(cfg.stops):
            probs = cfg.series_by_id(stop.series_id).probs
            for k, p in enumerate(probs, start=1):
                alight[(o + k) % self.n_stops] += rates[o] * p
        self.rate_per_min = rates
        self.alight_per_min = alight

        # Expected dwell per second of service gap at each stop: the
        # slower door wins, boarding counts accumulate over the gap and
        # alighting counts mirror them in steady state.
        pt = cfg.passenger_types
        self.beta = (
            np.maximum(pt.expected_board_s * rates, pt.expected_alight_s * alight)
            / 60.0
        )

        self.signal_delay_total = float(inter_delay.sum())
        self.cruise_total_s = self.ring_m / self.v_ms

        # All stops and signals merged into one ring-ordered feature
        # list so a headway walk only touches what lies in its gap.
        # kind 1 = stop, 0 = intersection; idx points into the
        # respective table.
        feats = [(self.stop_pos[e], 1, e) for e in range(self.n_stops)]
        feats += [(inter_pos[k], 0, k) for k in range(len(inter_pos))]
        feats.sort()
        self.feat_pos = np.array([f[0] for f in feats])
        self.feat_kind = np.array([f[1] for f in feats], dtype=np.int64)
        self.feat_idx = np.array([f[2] for f in feats], dtype=np.int64)

    def forward_gap_m(self, x_from: float, x_to: float) -> float:
        """Metres travelled from x_from forward (ring order) to x_to."""
        return (x_to - x_from) % self.ring_m

    def expected_dwell_s(self, stop_idx: int, gap_s: float) -> float:
        """Expected dwell at a stop last served ``gap_s`` seconds ago."""
        return self.beta[stop_idx] * max(0.0, gap_s)

    def expected_transit_to_stop_s(
        self, ring_pos_m: float, stop_idx: int, at_signal: bool = False
    ) -> float:
        """Expected seconds from a ring position to the given stop.

        Cruise time plus the expected wait at every signal not yet
        crossed. ``at_signal`` marks a bus standing exactly on a signal
        line, whose wait there still lies ahead of it.
        """
        dist = (self.stop_pos[stop_idx] - ring_pos_m) % self.ring_m
        t = dist / self.v_ms
        for k in range(len(self.inter_pos)):
            d = (self.inter_pos[k] - ring_pos_m) % self.ring_m
            if (0.0 < d < dist) or (d == 0.0 and at_signal):
                t += self.inter_delay[k]
        return t


@dataclass(frozen=True)
class BusMarker:
    """Where one bus is right now, for headway purposes."""

    ring_pos_m: float
    dwelling: bool  # doors open at a stop
    stop_idx: int = -1  # 0-based, only meaningful while dwelling
    queue_rank: int = 0  # arrival order within a shared stop, 0 = head


@dataclass(frozen=True)
class RingView:
    """Fleet snapshot handed to the headway estimator."""

    now_s: float
    markers: tuple[BusMarker, ...]
    latest_arrival_s: np.ndarray  # per stop, absolute seconds


def preceding_bus(view: RingView, ring_m: float, bus: int) -> int:
    """Index of the nearest bus ahead of ``bus`` along the ring.

    A bus at the exact same position counts as ahead only if it is
    earlier in the same stop queue; otherwise it is behind and the gap
    to it wraps the whole ring.
    """
    me = view.markers[bus]
    best = -1
    best_key = (float("inf"), 0)
    for c, other in enumerate(view.markers):
        if c == bus:
            continue
        gap = (other.ring_pos_m - me.ring_pos_m) % ring_m
        if gap == 0.0:
            ahead = (
                me.dwelling
                and other.dwelling
                and other.stop_idx == me.stop_idx
                and other.queue_rank < me.queue_rank
            )
            if not ahead:
                gap = ring_m
        key = (gap, other.queue_rank)
        if key < best_key:
            best, best_key = c, key
    return best


def instantaneous_headway(
    exp: LineExpectations, view: RingView, bus: int, ahead: int | None = None
) -> float:
    """Expected seconds for ``bus`` to reach the bus ahead of it."""
    if exp.n_buses < 2 or len(view.markers) < 2:
        raise ValueError("headways need at least two buses on the line")
    me = view.markers[bus]
    if ahead is None:
        ahead = preceding_bus(view, exp.ring_m, bus)
    target = view.markers[ahead]

    gap_m = (target.ring_pos_m - me.ring_pos_m) % exp.ring_m
    if gap_m == 0.0:
        if me.dwelling and target.dwelling and target.stop_idx == me.stop_idx:
            if target.queue_rank < me.queue_rank:
                return 0.0
        gap_m = exp.ring_m

    # Walk the ring-ordered feature list from just past our position.
    # A feature exactly under the bus is skipped unless it is a signal
    # and the bus is cruising (stopped on the line, wait still ahead).
    feat_pos, feat_kind, feat_idx = exp.feat_pos, exp.feat_kind, exp.feat_idx
    n_feat = len(feat_pos)
    start = int(np.searchsorted(feat_pos, me.ring_pos_m, side="left"))
    t = 0.0
    last_d = 0.0
    for step in range(n_feat):
        j = (start + step) % n_feat
        d = (feat_pos[j] - me.ring_pos_m) % exp.ring_m
        if d >= gap_m:
            break
        if d == 0.0 and (me.dwelling or feat_kind[j] == 1):
            continue
        t += (d - last_d) / exp.v_ms
        last_d = d
        if feat_kind[j] == 0:
            t += exp.inter_delay[feat_idx[j]]
        else:
            e = int(feat_idx[j])
            gap_s = (view.now_s + t) - view.latest_arrival_s[e]
            t += exp.expected_dwell_s(e, gap_s)
    t += (gap_m - last_d) / exp.v_ms
    return t


def all_headways(exp: LineExpectations, view: RingView) -> np.ndarray:
    """Instantaneous headway of every bus, indexed like the markers."""
    return np.array(
        [instantaneous_headway(exp, view, b) for b in range(len(view.markers))]
    )


def dch(headways: np.ndarray) -> tuple[float, float]:
    """Fleet-mean headway and its population-style spread.

    Returns (mean, sigma) where sigma uses the fleet-size divisor: it
    measures how uneven the ring is right now, not a sample estimate.
    """
    h = np.asarray(headways, dtype=float)
    mean = float(h.mean())
    sigma = float(np.sqrt(((h - mean) ** 2).mean()))
    return mean, sigma


def esh(
    exp: LineExpectations, tol_s: float = 0.01, max_iter: int = 100
) -> float:
    """Equilibrium headway for evenly spread buses.

    Solves H = (cruise + signal waits + sum of expected dwells under
    gap H) / fleet size by fixed-point iteration from the dwell-free
    headway. Raises if it fails to settle within ``max_iter`` rounds.
    """
    if exp.n_buses < 1:
        raise ValueError("need at least one bus")
    base = exp.cruise_total_s + exp.signal_delay_total
    h = base / exp.n_buses
    for _ in range(max_iter):
        dwell = float(sum(exp.expected_dwell_s(e, h) for e in range(exp.n_stops)))
        nxt = (base + dwell) / exp.n_buses
        if abs(nxt - h) < tol_s:
            return nxt
        h = nxt
    raise ValueError(f"equilibrium headway did not converge in {max_iter} iterations")

"""Bundled benchmark lines L1..L5.

L5 is the fully specified 42-stop line used by most tests and by the
acceptance run. L1..L4 are smaller companions derived from the same
material: per-stop demand, destination series and signal timings are
tiled from the L5 tables, bus start stops are spread evenly, and
segment lengths come from the same seeded generator that produced the
frozen L5 list. All of it is deterministic, so builtin_line always
returns identical configs.
"""

from __future__ import annotations

import math

import numpy as np

from .model import (
    ActionSet,
    BusLineConfig,
    BusSpec,
    DestinationSeries,
    IntersectionSpec,
    PassengerTypes,
    SegmentSpec,
    StopSpec,
    validate_config,
)

__all__ = ["builtin_line", "BUILTIN_NAMES"]

# (n_buses, n_stops, n_intersections, length_m) per line.
_SHAPES = {
    "L1": (5, 18, 8, 10650.0),
    "L2": (7, 24, 11, 14210.0),
    "L3": (9, 30, 13, 17950.0),
    "L4": (11, 36, 15, 21350.0),
    "L5": (13, 42, 18, 24600.0),
}

BUILTIN_NAMES = tuple(_SHAPES)

# Passengers per minute at each L5 stop, stops 1..42.
_L5_RATES = (
    2, 2, 3, 1, 2, 1, 2, 1, 3, 2,
    3, 2, 1, 2, 1, 1, 1, 2, 3, 1,
    1, 4, 2, 1, 2, 1, 2, 1, 3, 4,
    1, 2, 2, 1, 2, 1, 2, 1, 2, 1,
    2, 2,
)

# Stops whose riders follow the long-ride series; the rest use the
# short-ride series.
_L5_SERIES1_STOPS = frozenset({1, 7, 10, 13, 20, 21, 27, 30, 31, 37, 40})

# Ride-length distributions. Weights over 1..13 and 1..10 stops; the
# published four-decimal tables are these fractions rounded.
_SERIES1_WEIGHTS = (1, 2, 4, 6, 8, 10, 10, 9, 9, 6, 4, 3, 2)  # / 74
_SERIES2_WEIGHTS = (2, 5, 7, 9, 10, 9, 7, 5, 3, 1)  # / 58

# Signal table, intersections 1..18 for L5:
# (segment, red_s, green_s, initial_phase, initial_remaining_s).
# Segment 16 carries two intersections, in this listed order.
_L5_SIGNALS = (
    (1, 40, 50, "green", 20),
    (4, 40, 30, "red", 20),
    (8, 40, 35, "red", 10),
    (10, 30, 45, "green", 20),
    (12, 30, 30, "green", 20),
    (13, 40, 30, "red", 20),
    (16, 40, 45, "green", 30),
    (16, 30, 35, "green", 20),
    (20, 30, 45, "green", 20),
    (21, 40, 50, "green", 10),
    (24, 40, 30, "red", 20),
    (28, 40, 35, "red", 10),
    (30, 30, 45, "green", 20),
    (31, 40, 50, "green", 20),
    (34, 40, 30, "red", 15),
    (38, 40, 35, "red", 20),
    (40, 30, 45, "green", 20),
    (41, 40, 50, "green", 20),
)

# Fleet table for L5: (capacity, initial_stop, trab_s).
_L5_BUSES = (
    (72, 1, 20),
    (70, 4, 0),
    (80, 8, 40),
    (60, 11, 30),
    (72, 15, 50),
    (60, 18, 10),
    (72, 21, 30),
    (80, 25, 36),
    (60, 28, 24),
    (72, 31, 18),
    (70, 34, 26),
    (70, 37, 16),
    (80, 40, 34),
)

# Frozen segment lengths for L5, metres, segment i = stop i -> i+1.
# Generated once by _draw_segment_lengths(42, 24600, seed=24600) and
# pinned here so the geometry can never drift.
_L5_SEGMENTS = (
    600, 560, 600, 490, 660, 660, 640, 450, 560, 730,
    800, 510, 530, 580, 580, 640, 520, 560, 530, 470,
    560, 620, 530, 560, 630, 510, 630, 600, 570, 690,
    640, 450, 510, 520, 450, 470, 680, 640, 640, 650,
    660, 720,
)

_SEGMENT_SEEDS = {"L1": 10650, "L2": 14210, "L3": 17950, "L4": 21350, "L5": 24600}


def _draw_segment_lengths(n: int, total_m: float, seed: int) -> tuple[int, ...]:
    """Seeded lengths ~ N(600, 80) rounded to 10 m in [450, 800].

    Two entries are pinned to the extremes (one 800 m, one 450 m) and
    the residual against ``total_m`` is spread in 10 m steps so the ring
    closes exactly.
    """
    rng = np.random.default_rng(seed)
    lens = np.clip(np.round(rng.normal(600.0, 80.0, n) / 10) * 10, 450, 800)
    hi, lo = (10, 31) if n > 31 else (0, n - 1)
    lens[hi] = 800.0
    lens[lo] = 450.0
    order = rng.permutation(n)
    i = 0
    while lens.sum() != total_m:
        j = order[i % n]
        step = 10.0 if lens.sum() < total_m else -10.0
        new = lens[j] + step
        if 450 <= new <= 800 and j not in (hi, lo):
            lens[j] = new
        i += 1
    return tuple(int(v) for v in lens)


def _series() -> tuple[DestinationSeries, ...]:
    s1 = tuple(wt / sum(_SERIES1_WEIGHTS) for wt in _SERIES1_WEIGHTS)
    s2 = tuple(wt / sum(_SERIES2_WEIGHTS) for wt in _SERIES2_WEIGHTS)
    return (DestinationSeries("S1", s1), DestinationSeries("S2", s2))


def builtin_line(name: str) -> BusLineConfig:
    if name not in _SHAPES:
        raise KeyError(f"unknown line {name!r}, have {', '.join(_SHAPES)}")
    n_b, n_e, n_i, length_m = _SHAPES[name]

    if name == "L5":
        seg_lengths = _L5_SEGMENTS
        signals = _L5_SIGNALS
        fleet = _L5_BUSES
    else:
        seg_lengths = _draw_segment_lengths(n_e, length_m, _SEGMENT_SEEDS[name])
        # Tile the L5 signal rows onto this ring, rescaling the segment
        # assignment to keep them spread out the same way.
        signals = tuple(
            (max(1, math.ceil(seg * n_e / 42)), red, green, phase, remaining)
            for seg, red, green, phase, remaining in _L5_SIGNALS[:n_i]
        )
        fleet = tuple(
            (_L5_BUSES[i][0], 1 + (i * n_e) // n_b, _L5_BUSES[i][2])
            for i in range(n_b)
        )

    stops = tuple(
        StopSpec(
            id=e,
            rate_per_min=float(_L5_RATES[(e - 1) % 42]),
            series_id="S1" if ((e - 1) % 42) + 1 in _L5_SERIES1_STOPS else "S2",
            action_set_id="A",
        )
        for e in range(1, n_e + 1)
    )
    segments = tuple(
        SegmentSpec(id=g, length_m=float(seg_lengths[g - 1]))
        for g in range(1, n_e + 1)
    )
    intersections = tuple(
        IntersectionSpec(
            id=i + 1,
            segment=int(signals[i][0]),
            red_s=float(signals[i][1]),
            green_s=float(signals[i][2]),
            initial_phase=signals[i][3],
            initial_remaining_s=float(signals[i][4]),
        )
        for i in range(n_i)
    )
    buses = tuple(
        BusSpec(id=i + 1, capacity=fleet[i][0], initial_stop=fleet[i][1],
                trab_s=float(fleet[i][2]))
        for i in range(n_b)
    )

    cfg = BusLineConfig(
        name=name,
        horizon_s=7200.0,
        cruise_speed_kmh=30.0,
        travel_noise_s_per_km=5.0,
        line_length_m=length_m,
        passenger_types=PassengerTypes(),
        action_sets=(ActionSet("A", (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)),),
        series=_series(),
        stops=stops,
        segments=segments,
        intersections=intersections,
        buses=buses,
    )
    validate_config(cfg)
    return cfg

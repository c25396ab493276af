"""Shared fixtures: small hand-checkable lines and context capture."""

import pytest

from busline.model import (
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


def make_tiny_line(
    rates=(2.0, 1.0, 3.0, 2.0),
    holds=(0.0, 5.0, 10.0),
    with_signal=True,
    noise_s_per_km=5.0,
    horizon_s=3600.0,
    capacities=(60, 60),
    initial_stops=(1, 3),
    trabs=(10.0, 20.0),
    name="tiny",
) -> BusLineConfig:
    """Four stops, segments 600/450/600/750 m, optional one signal.

    The signal sits mid-segment 1 (red 40, green 50, green showing
    with 20 s left), so its expected delay is 40^2 / 180 = 8.888... s.
    Destination series is a coin flip between riding 1 or 2 stops.
    """
    inters = ()
    seg1_pieces = None
    if with_signal:
        inters = (
            IntersectionSpec(
                id=1, segment=1, red_s=40.0, green_s=50.0,
                initial_phase="green", initial_remaining_s=20.0,
            ),
        )
        seg1_pieces = (300.0, 300.0)
    cfg = BusLineConfig(
        name=name,
        horizon_s=horizon_s,
        cruise_speed_kmh=30.0,
        travel_noise_s_per_km=noise_s_per_km,
        line_length_m=2400.0,
        passenger_types=PassengerTypes(),
        action_sets=(ActionSet(id="A", holds_s=tuple(float(h) for h in holds)),),
        series=(DestinationSeries(id="S1", probs=(0.5, 0.5)),),
        stops=tuple(
            StopSpec(id=e + 1, rate_per_min=rates[e], series_id="S1", action_set_id="A")
            for e in range(4)
        ),
        segments=(
            SegmentSpec(id=1, length_m=600.0, piece_lengths_m=seg1_pieces),
            SegmentSpec(id=2, length_m=450.0),
            SegmentSpec(id=3, length_m=600.0),
            SegmentSpec(id=4, length_m=750.0),
        ),
        intersections=inters,
        buses=tuple(
            BusSpec(id=b + 1, capacity=capacities[b], initial_stop=initial_stops[b],
                    trab_s=trabs[b])
            for b in range(len(capacities))
        ),
    )
    validate_config(cfg)
    return cfg


@pytest.fixture
def tiny_line() -> BusLineConfig:
    return make_tiny_line()


@pytest.fixture
def tiny_line_quiet() -> BusLineConfig:
    """No demand, no signal, no travel noise: pure cruising."""
    return make_tiny_line(
        rates=(0.0, 0.0, 0.0, 0.0), with_signal=False, noise_s_per_km=0.0,
        name="tiny-quiet",
    )


def capture_contexts(cfg, seed=3, horizon_s=None, skip_s=200.0, limit=80):
    """Run a zero-hold episode and collect its decision contexts."""
    from busline.simulator import Controller, run_episode

    contexts = []

    class Probe(Controller):
        name = "probe"

        def decide(self, ctx):
            if len(contexts) < limit and ctx.now_s >= skip_s:
                contexts.append(ctx)
            return 0.0, False

    run_episode(cfg, Probe(), seed=seed, horizon_s=horizon_s)
    return contexts

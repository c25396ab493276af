"""Headway walk, spacing coefficients and equilibrium headway.

Hand numbers come from the tiny 4-stop line: 2400 m ring at 30 km/h
(8.333 m/s), stops at 0/600/1050/1650 m, one signal at 300 m with
red 40 / cycle 90 (expected delay 1600/180 = 8.888...), demand rates
(2, 1, 3, 2) per minute with a 50/50 ride-1-or-2 series.
"""

import math

import numpy as np
import pytest

from busline.headways import (
    BusMarker,
    LineExpectations,
    RingView,
    all_headways,
    dch,
    esh,
    expected_signal_delay,
    instantaneous_headway,
    preceding_bus,
)
from busline.model import builtin_line

from conftest import make_tiny_line

V = 30.0 / 3.6  # cruise speed, m/s
SIGNAL_DELAY = 40.0 * 40.0 / (2.0 * 90.0)  # 8.888...


@pytest.fixture(scope="module")
def tiny_exp():
    return LineExpectations(make_tiny_line())


@pytest.fixture(scope="module")
def l5_exp():
    return LineExpectations(builtin_line("L5"))


def view_of(now_s, markers, la=None, n_stops=4):
    la_arr = np.zeros(n_stops) if la is None else np.asarray(la, dtype=float)
    return RingView(now_s=now_s, markers=tuple(markers), latest_arrival_s=la_arr)


class TestExpectations:
    def test_signal_delay_formula(self):
        assert expected_signal_delay(40.0, 90.0) == pytest.approx(SIGNAL_DELAY)
        assert expected_signal_delay(30.0, 75.0) == pytest.approx(6.0)

    def test_stop_positions(self, tiny_exp):
        assert tiny_exp.stop_pos.tolist() == [0.0, 600.0, 1050.0, 1650.0]
        assert tiny_exp.ring_m == 2400.0

    def test_segment_expectations_include_signals(self, tiny_exp):
        want = [600.0 / V + SIGNAL_DELAY, 450.0 / V, 600.0 / V, 750.0 / V]
        assert tiny_exp.seg_expected == pytest.approx(want)
        assert tiny_exp.signal_delay_total == pytest.approx(SIGNAL_DELAY)
        assert tiny_exp.cruise_total_s == pytest.approx(288.0)

    def test_alighting_rates_from_series(self, tiny_exp):
        # Coin-flip rides of 1 or 2 stops from rates (2, 1, 3, 2).
        assert tiny_exp.alight_per_min == pytest.approx([2.5, 2.0, 1.5, 2.0])

    def test_dwell_slope_takes_slower_door(self, tiny_exp):
        # max(1.3 * boardings, 0.65 * alightings) per minute of gap.
        assert (tiny_exp.beta * 60.0) == pytest.approx([2.6, 1.3, 3.9, 2.6])

    def test_expected_dwell_clamps_negative_gap(self, tiny_exp):
        assert tiny_exp.expected_dwell_s(0, -5.0) == 0.0
        assert tiny_exp.expected_dwell_s(2, 60.0) == pytest.approx(3.9)

    def test_transit_time_counts_signals_in_gap(self, tiny_exp):
        # 450 m -> stop 2 at 1050 m: no signal in between.
        assert tiny_exp.expected_transit_to_stop_s(450.0, 2) == pytest.approx(72.0)
        # 150 m -> stop 1 at 600 m: crosses the signal at 300 m.
        assert tiny_exp.expected_transit_to_stop_s(150.0, 1) == pytest.approx(
            54.0 + SIGNAL_DELAY
        )

    def test_transit_time_on_signal_line(self, tiny_exp):
        on = tiny_exp.expected_transit_to_stop_s(300.0, 1, at_signal=True)
        off = tiny_exp.expected_transit_to_stop_s(300.0, 1, at_signal=False)
        assert on == pytest.approx(36.0 + SIGNAL_DELAY)
        assert off == pytest.approx(36.0)

    def test_feature_ring_is_sorted_and_complete(self, tiny_exp):
        assert tiny_exp.feat_pos.tolist() == [0.0, 300.0, 600.0, 1050.0, 1650.0]
        assert tiny_exp.feat_kind.tolist() == [1, 0, 1, 1, 1]


class TestPrecedingBus:
    def test_nearest_ahead(self, tiny_exp):
        view = view_of(
            0.0,
            [
                BusMarker(100.0, False),
                BusMarker(700.0, False),
                BusMarker(1200.0, False),
            ],
        )
        assert preceding_bus(view, tiny_exp.ring_m, 0) == 1
        assert preceding_bus(view, tiny_exp.ring_m, 1) == 2
        assert preceding_bus(view, tiny_exp.ring_m, 2) == 0  # wraps

    def test_same_stop_queue_order(self, tiny_exp):
        head = BusMarker(600.0, True, stop_idx=1, queue_rank=0)
        tail = BusMarker(600.0, True, stop_idx=1, queue_rank=1)
        view = view_of(0.0, [head, tail])
        assert preceding_bus(view, tiny_exp.ring_m, 1) == 0
        # The head's follower is a full ring away, not at gap zero.
        assert instantaneous_headway(tiny_exp, view, 1) == 0.0
        assert instantaneous_headway(tiny_exp, view, 0) > 100.0


class TestInstantaneousHeadway:
    def test_pure_cruise_gap(self, tiny_exp):
        # Cruising at 450 m behind a bus dwelling at stop 2 (1050 m);
        # stop 1 in the gap was served exactly when we would reach it.
        now = 500.0
        la = [0.0, now + 18.0, 0.0, 0.0]
        view = view_of(
            now,
            [BusMarker(450.0, False), BusMarker(1050.0, True, stop_idx=2)],
            la=la,
        )
        assert instantaneous_headway(tiny_exp, view, 0) == pytest.approx(72.0)

    def test_stale_stop_adds_dwell(self, tiny_exp):
        # Same geometry, but stop 1 was last served 60 s before we
        # would arrive there, so its expected dwell (1.3 s) is added.
        now = 500.0
        la = [0.0, now + 18.0 - 60.0, 0.0, 0.0]
        view = view_of(
            now,
            [BusMarker(450.0, False), BusMarker(1050.0, True, stop_idx=2)],
            la=la,
        )
        assert instantaneous_headway(tiny_exp, view, 0) == pytest.approx(73.3)

    def test_signal_in_gap(self, tiny_exp):
        view = view_of(
            100.0,
            [BusMarker(150.0, False), BusMarker(600.0, True, stop_idx=1)],
            la=[0.0, 0.0, 0.0, 0.0],
        )
        assert instantaneous_headway(tiny_exp, view, 0) == pytest.approx(
            54.0 + SIGNAL_DELAY
        )

    def test_coincident_cruisers_wrap_the_ring(self):
        exp = LineExpectations(
            make_tiny_line(rates=(0.0, 0.0, 0.0, 0.0), with_signal=False)
        )
        view = view_of(50.0, [BusMarker(100.0, False), BusMarker(100.0, False)])
        assert instantaneous_headway(exp, view, 0) == pytest.approx(288.0)

    def test_all_headways_matches_elementwise(self, tiny_exp):
        view = view_of(
            300.0,
            [BusMarker(450.0, False), BusMarker(1200.0, False)],
            la=[10.0, 20.0, 30.0, 40.0],
        )
        hs = all_headways(tiny_exp, view)
        assert hs == pytest.approx(
            [instantaneous_headway(tiny_exp, view, b) for b in range(2)]
        )


class TestSpacingCoefficients:
    def test_dch_hand_values(self):
        mean, sigma = dch(np.array([100.0, 300.0]))
        assert mean == pytest.approx(200.0)
        assert sigma == pytest.approx(100.0)
        mean, sigma = dch(np.array([0.0, 200.0, 400.0]))
        assert mean == pytest.approx(200.0)
        assert sigma == pytest.approx(math.sqrt(80000.0 / 3.0))

    def test_dch_uniform_fleet_has_zero_spread(self):
        mean, sigma = dch(np.full(5, 144.0))
        assert mean == pytest.approx(144.0)
        assert sigma == pytest.approx(0.0, abs=1e-12)


class TestEquilibriumHeadway:
    def test_cruise_only_is_exact(self):
        exp = LineExpectations(
            make_tiny_line(rates=(0.0, 0.0, 0.0, 0.0), with_signal=False)
        )
        assert esh(exp) == pytest.approx(288.0 / 2.0)

    def test_fixed_point_matches_linear_solution(self, tiny_exp):
        # With linear dwells the equilibrium is closed-form:
        # H = (cruise + signals) / (n_buses - sum of dwell slopes).
        base = tiny_exp.cruise_total_s + tiny_exp.signal_delay_total
        analytic = base / (tiny_exp.n_buses - tiny_exp.beta.sum())
        assert esh(tiny_exp, tol_s=1e-6) == pytest.approx(analytic, abs=1e-4)

    def test_fixed_point_property(self, tiny_exp):
        h = esh(tiny_exp)
        dwell = sum(tiny_exp.expected_dwell_s(e, h) for e in range(4))
        lhs = h * tiny_exp.n_buses
        rhs = tiny_exp.cruise_total_s + tiny_exp.signal_delay_total + dwell
        assert lhs == pytest.approx(rhs, abs=tiny_exp.n_buses * 0.01)


class TestReferenceLine:
    def test_geometry(self, l5_exp):
        assert l5_exp.ring_m == 24600.0
        assert l5_exp.cruise_total_s == pytest.approx(2952.0)

    def test_signal_subtotal_matches_hand_sum(self, l5_exp):
        hand = sum(
            i.red_s**2 / (2.0 * (i.red_s + i.green_s))
            for i in l5_exp.cfg.intersections
        )
        assert l5_exp.signal_delay_total == pytest.approx(hand, abs=1e-9)
        assert hand == pytest.approx(161.1047, abs=1e-3)

    def test_equilibrium_headway_anchor(self, l5_exp):
        assert esh(l5_exp) == pytest.approx(274.26, abs=0.3)

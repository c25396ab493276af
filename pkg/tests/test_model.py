"""Config model: validation, serialization, bundled lines."""

import math

import numpy as np
import pytest

from busline.model import (
    ActionSet,
    ConfigError,
    HyperParams,
    PassengerTypes,
    builtin_line,
    load_config,
    parse_action_notation,
    parse_config,
    serialize_config,
    validate_config,
)
from busline.lines import BUILTIN_NAMES

from conftest import make_tiny_line


class TestPassengerTypes:
    def test_slow_share(self):
        pt = PassengerTypes()
        assert pt.p_slow == pytest.approx(0.1)

    def test_expected_door_times(self):
        pt = PassengerTypes()
        assert pt.expected_board_s == pytest.approx(1.3)
        assert pt.expected_alight_s == pytest.approx(0.65)


class TestActionNotation:
    def test_step_form(self):
        assert parse_action_notation("2x5") == (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
        assert parse_action_notation("5x4") == (0.0, 5.0, 10.0, 15.0, 20.0)

    def test_list_form(self):
        assert parse_action_notation("0,3,7") == (0.0, 3.0, 7.0)

    def test_rejects_bad_menus(self):
        for bad in ("", "3,1", "1,2,3", "0x5", "2x0", "x", "0,0,5"):
            with pytest.raises(ConfigError):
                parse_action_notation(bad)


class TestValidation:
    def test_tiny_line_is_valid(self, tiny_line):
        validate_config(tiny_line)

    def test_collects_multiple_errors(self, tiny_line):
        from dataclasses import replace

        broken = replace(
            tiny_line,
            horizon_s=-5.0,
            cruise_speed_kmh=0.0,
            action_sets=(ActionSet(id="A", holds_s=(5.0, 3.0)),),
        )
        with pytest.raises(ConfigError) as err:
            validate_config(broken)
        msg = str(err.value)
        assert "horizon" in msg
        assert "cruise" in msg
        assert "hold" in msg

    def test_segment_lengths_must_sum_to_line(self, tiny_line):
        from dataclasses import replace

        bad = replace(tiny_line, line_length_m=9999.0)
        with pytest.raises(ConfigError):
            validate_config(bad)

    def test_series_must_sum_to_one(self, tiny_line):
        from dataclasses import replace
        from busline.model import DestinationSeries

        bad = replace(
            tiny_line, series=(DestinationSeries(id="S1", probs=(0.5, 0.4)),)
        )
        with pytest.raises(ConfigError):
            validate_config(bad)

    def test_initial_remaining_bounded_by_phase(self, tiny_line):
        from dataclasses import replace
        from busline.model import IntersectionSpec

        bad = replace(
            tiny_line,
            intersections=(
                IntersectionSpec(
                    id=1, segment=1, red_s=40.0, green_s=50.0,
                    initial_phase="green", initial_remaining_s=60.0,
                ),
            ),
        )
        with pytest.raises(ConfigError):
            validate_config(bad)


class TestSerialization:
    def test_round_trip_identity(self, tiny_line):
        text = serialize_config(tiny_line)
        again = parse_config(text)
        assert again == tiny_line

    def test_round_trip_all_builtins(self):
        for name in BUILTIN_NAMES:
            cfg = builtin_line(name)
            assert parse_config(serialize_config(cfg)) == cfg

    def test_parse_reports_line_numbers(self):
        text = serialize_config(make_tiny_line())
        broken = text.replace("format = busline-cfg-1", "format = nope")
        with pytest.raises(ConfigError) as err:
            parse_config(broken, source="memory")
        assert "memory" in str(err.value)

    def test_bundled_data_file_matches_builtin(self):
        import importlib.resources as res

        path = res.files("busline").joinpath("data/l5.cfg")
        with res.as_file(path) as p:
            assert load_config(p) == builtin_line("L5")


class TestBuiltinLines:
    def test_shapes(self):
        shapes = {
            "L1": (5, 18, 8, 10650.0),
            "L2": (7, 24, 11, 14210.0),
            "L3": (9, 30, 13, 17950.0),
            "L4": (11, 36, 15, 21350.0),
            "L5": (13, 42, 18, 24600.0),
        }
        for name, (n_b, n_e, n_i, length) in shapes.items():
            cfg = builtin_line(name)
            assert cfg.n_buses == n_b
            assert cfg.n_stops == n_e
            assert len(cfg.intersections) == n_i
            assert sum(g.length_m for g in cfg.segments) == pytest.approx(length)

    def test_destination_series_sum_to_one_exactly(self):
        cfg = builtin_line("L5")
        for s in cfg.series:
            assert abs(math.fsum(s.probs) - 1.0) < 1e-9

    def test_destination_series_round_to_published_weights(self):
        cfg = builtin_line("L5")
        s1 = cfg.series_by_id("S1").probs
        s2 = cfg.series_by_id("S2").probs
        s1_4dp = tuple(round(p, 4) for p in s1)
        s2_4dp = tuple(round(p, 4) for p in s2)
        assert s1_4dp == (
            0.0135, 0.027, 0.0541, 0.0811, 0.1081, 0.1351, 0.1351,
            0.1216, 0.1216, 0.0811, 0.0541, 0.0405, 0.027,
        )
        assert s2_4dp == (
            0.0345, 0.0862, 0.1207, 0.1552, 0.1724, 0.1552, 0.1207,
            0.0862, 0.0517, 0.0172,
        )
        # The published 4 dp weights famously sum a hair off 1.
        assert round(sum(s1_4dp), 4) == 0.9999
        assert round(sum(s2_4dp), 4) == 1.0

    def test_l5_fleet_table(self):
        cfg = builtin_line("L5")
        buses = [(b.capacity, b.initial_stop, b.trab_s) for b in cfg.buses]
        assert buses[0] == (72, 1, 20.0)
        assert buses[7] == (80, 25, 36.0)
        assert buses[-1] == (80, 40, 34.0)

    def test_unknown_line_raises(self):
        with pytest.raises(KeyError):
            builtin_line("L9")

    def test_default_menu_is_two_step_five(self):
        cfg = builtin_line("L5")
        for e in range(cfg.n_stops):
            assert cfg.stop_action_set(e + 1).holds_s == (0, 2, 4, 6, 8, 10)

    def test_with_action_set(self):
        cfg = builtin_line("L5").with_action_set((0.0, 5.0, 10.0, 15.0, 20.0))
        assert cfg.max_hold_s() == 20.0
        for e in range(cfg.n_stops):
            assert cfg.stop_action_set(e + 1).holds_s == (0.0, 5.0, 10.0, 15.0, 20.0)


class TestHyperParams:
    def test_epsilon_schedule_endpoint(self):
        hp = HyperParams()
        assert hp.epsilon_at(300) == pytest.approx(0.1)
        assert hp.epsilon_at(1) == pytest.approx(0.6 - 1.0 / 600.0)

    def test_epsilon_floors_at_zero(self):
        hp = HyperParams(epsilon0=0.1, xi=0.1, episodes=1)
        assert hp.epsilon_at(5) == 0.0

    def test_validate_rejects_negative_schedule(self):
        hp = HyperParams(epsilon0=0.2, xi=0.01, episodes=100)
        with pytest.raises(ConfigError):
            hp.validate()

    def test_validate_accepts_defaults(self):
        HyperParams().validate()

"""Domain types and config handling for a circular bus line.

A line is a ring of stops joined by road segments. Segments may contain
signalled intersections, which split them into road pieces. Buses cycle
the ring forever; passengers appear at stops and ride to a downstream
stop drawn from a per-stop destination series.

Configs live in a small sectioned text format (see ``parse_config``) so
that lines can be edited by hand and diffed. ``builtin_line`` returns
the five bundled lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

__all__ = [
    "ConfigError",
    "PassengerTypes",
    "ActionSet",
    "DestinationSeries",
    "StopSpec",
    "IntersectionSpec",
    "SegmentSpec",
    "BusSpec",
    "BusLineConfig",
    "HyperParams",
    "parse_config",
    "serialize_config",
    "load_config",
    "save_config",
    "builtin_line",
    "parse_action_notation",
]

CONFIG_FORMAT = "busline-cfg-1"

# Positions and lengths are metres, times are seconds, rates are
# passengers per minute. Tolerances used by the validator.
LENGTH_SUM_TOL_M = 1.0
SERIES_SUM_TOL = 1e-9
PIECE_SUM_TOL_M = 1e-6


class ConfigError(ValueError):
    """Raised when a config file or object fails validation."""


@dataclass(frozen=True)
class PassengerTypes:
    """Service times for the two passenger types.

    ``slow_quick_ratio`` is the expected count of slow passengers per
    quick passenger, so the probability that a fresh passenger is slow
    is ratio / (1 + ratio).
    """

    board_slow_s: float = 4.0
    alight_slow_s: float = 2.0
    board_quick_s: float = 1.0
    alight_quick_s: float = 0.5
    slow_quick_ratio: float = 1.0 / 9.0

    @property
    def p_slow(self) -> float:
        return self.slow_quick_ratio / (1.0 + self.slow_quick_ratio)

    @property
    def expected_board_s(self) -> float:
        p = self.p_slow
        return p * self.board_slow_s + (1.0 - p) * self.board_quick_s

    @property
    def expected_alight_s(self) -> float:
        p = self.p_slow
        return p * self.alight_slow_s + (1.0 - p) * self.alight_quick_s


@dataclass(frozen=True)
class ActionSet:
    """A finite menu of holding times, in seconds. First entry must be 0."""

    id: str
    holds_s: tuple[float, ...]

    @property
    def max_hold_s(self) -> float:
        return self.holds_s[-1]


@dataclass(frozen=True)
class DestinationSeries:
    """probs[k-1] = probability of alighting k stops downstream."""

    id: str
    probs: tuple[float, ...]


@dataclass(frozen=True)
class StopSpec:
    id: int
    rate_per_min: float
    series_id: str
    action_set_id: str


@dataclass(frozen=True)
class IntersectionSpec:
    """A signalled intersection on a segment.

    ``initial_phase`` is the phase showing at time 0 and
    ``initial_remaining_s`` how much of it is left; it must not exceed
    the length of that phase.
    """

    id: int
    segment: int
    red_s: float
    green_s: float
    initial_phase: str  # "red" | "green"
    initial_remaining_s: float

    @property
    def cycle_s(self) -> float:
        return self.red_s + self.green_s


@dataclass(frozen=True)
class SegmentSpec:
    """Road from stop ``id`` to the next stop on the ring.

    ``piece_lengths_m`` optionally fixes the split into road pieces; the
    number of pieces is always (intersections on the segment) + 1 and
    the default is an equal split.
    """

    id: int
    length_m: float
    piece_lengths_m: tuple[float, ...] | None = None

    def pieces(self, n_intersections: int) -> tuple[float, ...]:
        n = n_intersections + 1
        if self.piece_lengths_m is not None:
            return self.piece_lengths_m
        return tuple(self.length_m / n for _ in range(n))


@dataclass(frozen=True)
class BusSpec:
    """``trab_s`` is the time left, at time 0, until first activation."""

    id: int
    capacity: int
    initial_stop: int
    trab_s: float


@dataclass(frozen=True)
class BusLineConfig:
    name: str
    horizon_s: float
    cruise_speed_kmh: float
    travel_noise_s_per_km: float
    line_length_m: float
    passenger_types: PassengerTypes
    action_sets: tuple[ActionSet, ...]
    series: tuple[DestinationSeries, ...]
    stops: tuple[StopSpec, ...]
    segments: tuple[SegmentSpec, ...]
    intersections: tuple[IntersectionSpec, ...]
    buses: tuple[BusSpec, ...]
    bunching_fraction: float = 0.05

    @property
    def n_stops(self) -> int:
        return len(self.stops)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def cruise_speed_ms(self) -> float:
        return self.cruise_speed_kmh / 3.6

    def action_set(self, set_id: str) -> ActionSet:
        for a in self.action_sets:
            if a.id == set_id:
                return a
        raise KeyError(set_id)

    def series_by_id(self, series_id: str) -> DestinationSeries:
        for s in self.series:
            if s.id == series_id:
                return s
        raise KeyError(series_id)

    def stop_action_set(self, stop_id: int) -> ActionSet:
        return self.action_set(self.stops[stop_id - 1].action_set_id)

    def intersections_on(self, segment_id: int) -> tuple[IntersectionSpec, ...]:
        return tuple(i for i in self.intersections if i.segment == segment_id)

    def max_hold_s(self) -> float:
        return max(a.max_hold_s for a in self.action_sets)

    def with_action_set(self, holds_s: tuple[float, ...]) -> "BusLineConfig":
        """Copy of this config with every stop using one new action menu."""
        new_set = ActionSet(id="A", holds_s=tuple(float(h) for h in holds_s))
        stops = tuple(replace(s, action_set_id="A") for s in self.stops)
        cfg = replace(self, action_sets=(new_set,), stops=stops)
        validate_config(cfg)
        return cfg


@dataclass(frozen=True)
class HyperParams:
    """Training knobs for the learned holding controller.

    The exploration rate in episode k (1-based) is epsilon0 - k * xi,
    floored at 0, so epsilon0 - episodes * xi must not be negative.
    ``lookahead`` 0 means plain one-step value greedy (no rollout).
    ``cost_scale`` None lets the network pick n_buses * esh**2.
    """

    epsilon0: float = 0.6
    xi: float = 1.0 / 600.0
    gamma: float = 0.5
    learn_rate: float = 0.05
    learn_rate_decay: float = 0.995
    episodes: int = 300
    lookahead: int = 3
    cost_coefficient: str = "dch"  # "dch" | "esh"
    cost_scale: float | None = None
    hidden1: int = 5
    hidden2: int = 3
    sigmoid_slope: float = 0.5
    weight_init_half_range: float = 2.0
    divergence_bound: float = 1e3

    def epsilon_at(self, episode: int) -> float:
        """Exploration rate for a 1-based episode index."""
        return max(0.0, self.epsilon0 - episode * self.xi)

    def validate(self) -> None:
        errs = []
        if not (0.0 <= self.epsilon0 <= 1.0):
            errs.append("epsilon0 must be in [0, 1]")
        if self.xi < 0.0:
            errs.append("xi must be >= 0")
        if self.epsilon0 - self.episodes * self.xi < -1e-12:
            errs.append("epsilon schedule goes negative before the last episode")
        if not (0.0 <= self.gamma < 1.0):
            errs.append("gamma must be in [0, 1)")
        if self.learn_rate < 0.0:
            errs.append("learn_rate must be >= 0")
        if self.episodes < 1:
            errs.append("episodes must be >= 1")
        if self.lookahead < 0:
            errs.append("lookahead must be >= 0")
        if self.cost_coefficient not in ("dch", "esh"):
            errs.append("cost_coefficient must be 'dch' or 'esh'")
        if self.cost_scale is not None and self.cost_scale <= 0.0:
            errs.append("cost_scale must be positive")
        if errs:
            raise ConfigError("; ".join(errs))


def validate_config(cfg: BusLineConfig) -> None:
    """Raise ConfigError listing every violated constraint."""
    errs: list[str] = []

    if cfg.horizon_s <= 0:
        errs.append("horizon_s must be positive")
    if cfg.cruise_speed_kmh <= 0:
        errs.append("cruise_speed_kmh must be positive")
    if cfg.travel_noise_s_per_km < 0:
        errs.append("travel_noise_s_per_km must be >= 0")
    if not (0.0 < cfg.bunching_fraction < 1.0):
        errs.append("bunching_fraction must be in (0, 1)")

    n_e = len(cfg.stops)
    if n_e < 2:
        errs.append("need at least 2 stops")
    if [s.id for s in cfg.stops] != list(range(1, n_e + 1)):
        errs.append("stop ids must be 1..n consecutive")
    if [g.id for g in cfg.segments] != list(range(1, n_e + 1)):
        errs.append("segment ids must be 1..n_stops (one per stop)")
    if [b.id for b in cfg.buses] != list(range(1, len(cfg.buses) + 1)):
        errs.append("bus ids must be 1..n consecutive")
    if len(cfg.buses) < 1:
        errs.append("need at least 1 bus")

    set_ids = {a.id for a in cfg.action_sets}
    if len(set_ids) != len(cfg.action_sets):
        errs.append("duplicate action set ids")
    for a in cfg.action_sets:
        if not a.holds_s or a.holds_s[0] != 0.0:
            errs.append(f"action set {a.id}: first hold must be 0")
        if any(y <= x for x, y in zip(a.holds_s, a.holds_s[1:])):
            errs.append(f"action set {a.id}: holds must be strictly increasing")

    series_ids = {s.id for s in cfg.series}
    if len(series_ids) != len(cfg.series):
        errs.append("duplicate series ids")
    for s in cfg.series:
        if any(p < 0 for p in s.probs):
            errs.append(f"series {s.id}: negative probability")
        if abs(sum(s.probs) - 1.0) > SERIES_SUM_TOL:
            errs.append(f"series {s.id}: probabilities sum to {sum(s.probs)!r}, not 1")
        if len(s.probs) >= n_e:
            errs.append(f"series {s.id}: rides {len(s.probs)} stops, must be shorter than the ring")

    for st in cfg.stops:
        if st.rate_per_min < 0:
            errs.append(f"stop {st.id}: negative arrival rate")
        if st.series_id not in series_ids:
            errs.append(f"stop {st.id}: unknown series {st.series_id}")
        if st.action_set_id not in set_ids:
            errs.append(f"stop {st.id}: unknown action set {st.action_set_id}")

    seg_count: dict[int, int] = {g.id: 0 for g in cfg.segments}
    for i in cfg.intersections:
        if i.segment not in seg_count:
            errs.append(f"intersection {i.id}: segment {i.segment} does not exist")
            continue
        seg_count[i.segment] += 1
        if i.red_s <= 0 or i.green_s <= 0:
            errs.append(f"intersection {i.id}: phase lengths must be positive")
        if i.initial_phase not in ("red", "green"):
            errs.append(f"intersection {i.id}: initial_phase must be red or green")
        else:
            limit = i.red_s if i.initial_phase == "red" else i.green_s
            if not (0.0 < i.initial_remaining_s <= limit):
                errs.append(
                    f"intersection {i.id}: initial_remaining_s must be in (0, {limit}]"
                )

    total = 0.0
    for g in cfg.segments:
        if g.length_m <= 0:
            errs.append(f"segment {g.id}: length must be positive")
        total += g.length_m
        n_p = seg_count.get(g.id, 0) + 1
        if g.piece_lengths_m is not None:
            if len(g.piece_lengths_m) != n_p:
                errs.append(
                    f"segment {g.id}: {len(g.piece_lengths_m)} pieces given, "
                    f"needs {n_p} (intersections + 1)"
                )
            if any(p <= 0 for p in g.piece_lengths_m):
                errs.append(f"segment {g.id}: piece lengths must be positive")
            if abs(sum(g.piece_lengths_m) - g.length_m) > PIECE_SUM_TOL_M:
                errs.append(f"segment {g.id}: pieces do not sum to the segment length")
    if abs(total - cfg.line_length_m) > LENGTH_SUM_TOL_M:
        errs.append(
            f"segment lengths sum to {total} m, config says {cfg.line_length_m} m"
        )

    for b in cfg.buses:
        if b.capacity < 1:
            errs.append(f"bus {b.id}: capacity must be >= 1")
        if not (1 <= b.initial_stop <= n_e):
            errs.append(f"bus {b.id}: initial_stop {b.initial_stop} out of range")
        if b.trab_s < 0:
            errs.append(f"bus {b.id}: trab_s must be >= 0")

    if errs:
        raise ConfigError("; ".join(errs))


# ---------------------------------------------------------------------------
# Config text format


def _fmt(x: float) -> str:
    """Format a number so that parsing it back is exact."""
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def serialize_config(cfg: BusLineConfig) -> str:
    pt = cfg.passenger_types
    out: list[str] = []
    w = out.append
    w(f"format = {CONFIG_FORMAT}")
    w("")
    w("[line]")
    w(f"name = {cfg.name}")
    w(f"horizon_s = {_fmt(cfg.horizon_s)}")
    w(f"cruise_speed_kmh = {_fmt(cfg.cruise_speed_kmh)}")
    w(f"travel_noise_s_per_km = {_fmt(cfg.travel_noise_s_per_km)}")
    w(f"line_length_m = {_fmt(cfg.line_length_m)}")
    w(f"bunching_fraction = {_fmt(cfg.bunching_fraction)}")
    w("")
    w("[passenger_types]")
    w(f"board_slow_s = {_fmt(pt.board_slow_s)}")
    w(f"alight_slow_s = {_fmt(pt.alight_slow_s)}")
    w(f"board_quick_s = {_fmt(pt.board_quick_s)}")
    w(f"alight_quick_s = {_fmt(pt.alight_quick_s)}")
    w(f"slow_quick_ratio = {_fmt(pt.slow_quick_ratio)}")
    w("")
    w("[action_sets]")
    w("# id  hold seconds")
    for a in cfg.action_sets:
        w(f"{a.id}  " + " ".join(_fmt(h) for h in a.holds_s))
    w("")
    w("[destination_series]")
    w("# id  P(ride k stops), k = 1, 2, ...")
    for s in cfg.series:
        w(f"{s.id}  " + " ".join(_fmt(p) for p in s.probs))
    w("")
    w("[stops]")
    w("# id  rate_per_min  series  action_set")
    for st in cfg.stops:
        w(f"{st.id}  {_fmt(st.rate_per_min)}  {st.series_id}  {st.action_set_id}")
    w("")
    w("[segments]")
    w("# id  length_m  [piece lengths]")
    for g in cfg.segments:
        row = f"{g.id}  {_fmt(g.length_m)}"
        if g.piece_lengths_m is not None:
            row += "  " + " ".join(_fmt(p) for p in g.piece_lengths_m)
        w(row)
    w("")
    w("[intersections]")
    w("# id  segment  red_s  green_s  initial_phase  initial_remaining_s")
    for i in cfg.intersections:
        w(
            f"{i.id}  {i.segment}  {_fmt(i.red_s)}  {_fmt(i.green_s)}  "
            f"{i.initial_phase}  {_fmt(i.initial_remaining_s)}"
        )
    w("")
    w("[buses]")
    w("# id  capacity  initial_stop  trab_s")
    for b in cfg.buses:
        w(f"{b.id}  {b.capacity}  {b.initial_stop}  {_fmt(b.trab_s)}")
    w("")
    return "\n".join(out)


def _parse_err(source: str, lineno: int, msg: str) -> ConfigError:
    return ConfigError(f"{source}:{lineno}: {msg}")


def parse_config(text: str, source: str = "<string>") -> BusLineConfig:
    """Parse the sectioned text format produced by serialize_config."""
    scalars: dict[str, dict[str, str]] = {"line": {}, "passenger_types": {}}
    rows: dict[str, list[tuple[int, list[str]]]] = {
        "action_sets": [],
        "destination_series": [],
        "stops": [],
        "segments": [],
        "intersections": [],
        "buses": [],
    }
    section = None
    saw_format = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in scalars and section not in rows:
                raise _parse_err(source, lineno, f"unknown section [{section}]")
            continue
        if section is None:
            if "=" in line:
                key, val = (part.strip() for part in line.split("=", 1))
                if key == "format":
                    if val != CONFIG_FORMAT:
                        raise _parse_err(source, lineno, f"unsupported format {val!r}")
                    saw_format = True
                    continue
            raise _parse_err(source, lineno, "content before first section")
        if section in scalars:
            if "=" not in line:
                raise _parse_err(source, lineno, "expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            scalars[section][key] = val
        else:
            rows[section].append((lineno, line.split()))
    if not saw_format:
        raise _parse_err(source, 1, f"missing 'format = {CONFIG_FORMAT}' header")

    def need(sec: str, key: str) -> str:
        try:
            return scalars[sec][key]
        except KeyError:
            raise ConfigError(f"{source}: missing {key} in [{sec}]") from None

    def fnum(sec: str, key: str) -> float:
        val = need(sec, key)
        try:
            return float(val)
        except ValueError:
            raise ConfigError(f"{source}: {key} is not a number: {val!r}") from None

    def row_floats(vals: list[str], lineno: int) -> list[float]:
        try:
            return [float(v) for v in vals]
        except ValueError as exc:
            raise _parse_err(source, lineno, str(exc)) from None

    pt = PassengerTypes(
        board_slow_s=fnum("passenger_types", "board_slow_s"),
        alight_slow_s=fnum("passenger_types", "alight_slow_s"),
        board_quick_s=fnum("passenger_types", "board_quick_s"),
        alight_quick_s=fnum("passenger_types", "alight_quick_s"),
        slow_quick_ratio=fnum("passenger_types", "slow_quick_ratio"),
    )

    action_sets = []
    for lineno, vals in rows["action_sets"]:
        if len(vals) < 2:
            raise _parse_err(source, lineno, "action set needs an id and holds")
        action_sets.append(ActionSet(vals[0], tuple(row_floats(vals[1:], lineno))))

    series = []
    for lineno, vals in rows["destination_series"]:
        if len(vals) < 2:
            raise _parse_err(source, lineno, "series needs an id and probabilities")
        series.append(DestinationSeries(vals[0], tuple(row_floats(vals[1:], lineno))))

    stops = []
    for lineno, vals in rows["stops"]:
        if len(vals) != 4:
            raise _parse_err(source, lineno, "stop row needs: id rate series action_set")
        stops.append(
            StopSpec(int(vals[0]), row_floats(vals[1:2], lineno)[0], vals[2], vals[3])
        )

    segments = []
    for lineno, vals in rows["segments"]:
        if len(vals) < 2:
            raise _parse_err(source, lineno, "segment row needs: id length [pieces]")
        nums = row_floats(vals[1:], lineno)
        pieces = tuple(nums[1:]) if len(nums) > 1 else None
        segments.append(SegmentSpec(int(vals[0]), nums[0], pieces))

    intersections = []
    for lineno, vals in rows["intersections"]:
        if len(vals) != 6:
            raise _parse_err(
                source, lineno,
                "intersection row needs: id segment red green phase remaining",
            )
        intersections.append(
            IntersectionSpec(
                id=int(vals[0]),
                segment=int(vals[1]),
                red_s=float(vals[2]),
                green_s=float(vals[3]),
                initial_phase=vals[4],
                initial_remaining_s=float(vals[5]),
            )
        )

    buses = []
    for lineno, vals in rows["buses"]:
        if len(vals) != 4:
            raise _parse_err(source, lineno, "bus row needs: id capacity stop trab")
        buses.append(BusSpec(int(vals[0]), int(vals[1]), int(vals[2]), float(vals[3])))

    cfg = BusLineConfig(
        name=need("line", "name"),
        horizon_s=fnum("line", "horizon_s"),
        cruise_speed_kmh=fnum("line", "cruise_speed_kmh"),
        travel_noise_s_per_km=fnum("line", "travel_noise_s_per_km"),
        line_length_m=fnum("line", "line_length_m"),
        bunching_fraction=fnum("line", "bunching_fraction"),
        passenger_types=pt,
        action_sets=tuple(action_sets),
        series=tuple(series),
        stops=tuple(stops),
        segments=tuple(segments),
        intersections=tuple(intersections),
        buses=tuple(buses),
    )
    validate_config(cfg)
    return cfg


def load_config(path) -> BusLineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def save_config(cfg: BusLineConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_config(cfg))


def parse_action_notation(text: str) -> tuple[float, ...]:
    """Accept 'NxM' (unit N s, M non-zero holds) or a comma list of seconds."""
    text = text.strip()
    if "x" in text and "," not in text:
        left, _, right = text.partition("x")
        try:
            unit, count = float(left), int(right)
        except ValueError:
            raise ConfigError(f"bad action set notation {text!r}") from None
        if unit <= 0 or count < 1:
            raise ConfigError(f"bad action set notation {text!r}")
        return tuple(unit * i for i in range(count + 1))
    try:
        holds = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad action set notation {text!r}") from None
    if not holds or holds[0] != 0.0 or any(y <= x for x, y in zip(holds, holds[1:])):
        raise ConfigError("action list must start at 0 and increase")
    return holds


def builtin_line(name: str) -> BusLineConfig:
    # Imported late: lines.py needs the classes above.
    from . import lines

    return lines.builtin_line(name)

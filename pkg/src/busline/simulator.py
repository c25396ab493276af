"""Event-driven simulation of one service period on a circular line.

Buses cycle the ring. Arriving at a stop, a bus first serves both
doors: everyone destined here alights, everyone already waiting boards
(capacity permitting), and the two door times overlap, so this forced
dwell lasts as long as the slower door. When that finishes the bus is
*activated*: the controller is asked for a holding time. Passengers
keep boarding while the bus holds; whoever shows up strictly before the
scheduled departure instant still gets on, even if serving them runs a
little past it. Then the bus departs, crosses the next segment piece by
piece with noisy travel times, waits out red signals, and arrives at
the next stop.

Each activation is one decision stage. Every stage whose departure
falls inside the horizon is recorded together with the fleet's
instantaneous headways at the departure instant; those snapshots feed
the stability metrics and the learning controller's cost signal.

All randomness comes from named generator streams derived from
(seed, episode), so identical inputs replay identical episodes.
"""

from __future__ import annotations

import heapq
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .headways import BusMarker, LineExpectations, RingView, all_headways, esh
from .model import BusLineConfig

__all__ = [
    "Passenger",
    "StageRecord",
    "EpisodeLog",
    "DecisionContext",
    "Controller",
    "SimulationError",
    "RngStreams",
    "rng_streams",
    "generate_passengers",
    "sample_piece_time",
    "signal_wait",
    "run_episode",
    "write_episode_csv",
]


class SimulationError(RuntimeError):
    """An impossible decision or broken invariant inside a run."""


# Event priorities at equal times: arrivals first, then headway
# snapshots (taken with the departing bus still in place), then the
# departure itself, then any activation it unlocks.
_ARRIVE, _SNAPSHOT, _DEPART, _ACTIVATE = 0, 1, 2, 3


@dataclass
class Passenger:
    id: int
    origin: int  # 0-based stop index
    destination: int
    slow: bool
    arrive_s: float
    board_s: float | None = None
    alight_s: float | None = None
    bus: int | None = None  # 0-based index of the bus they rode


@dataclass
class StageRecord:
    """One holding decision and the fleet state when its action ended."""

    stage: int
    bus: int
    stop: int
    activation_s: float
    departure_s: float
    hold_s: float
    idle_hold_s: float
    controlled: bool
    headways_s: np.ndarray | None = None
    mean_headway_s: float = 0.0
    sigma_headway_s: float = 0.0
    min_headway_s: float = 0.0


@dataclass
class EpisodeLog:
    config_name: str
    controller_name: str
    seed: int
    episode: int
    horizon_s: float
    esh_s: float
    bunching_threshold_s: float
    n_buses: int
    n_stops: int
    ring_m: float = 0.0
    stages: list[StageRecord] = field(default_factory=list)
    passengers: list[Passenger] = field(default_factory=list)
    # Per bus: (time, ring position, odometer) knots; position is
    # piecewise linear between them.
    trajectory_knots: list[list[tuple[float, float, float]]] = field(
        default_factory=list
    )
    bunched: bool = False

    def departure_times(self) -> np.ndarray:
        return np.array([s.departure_s for s in self.stages])


@dataclass
class DecisionContext:
    """Everything a controller may look at when asked for a hold.

    Projections are expected values from current physical positions:
    ``act_time_s[b]`` is when bus b is next activated, at stop
    ``act_stop[b]``, arriving there at ``arr_time_s[b]`` and being
    forced to dwell ``dwell_next_s[b]``. ``pending_here[b]`` marks
    buses whose next activation is at the stop they are standing at
    (their arrival time is then the actual one, in the past).
    """

    now_s: float
    bus: int
    stop: int
    action_set: tuple[float, ...]
    view: RingView
    act_time_s: np.ndarray
    arr_time_s: np.ndarray
    act_stop: np.ndarray
    pending_here: np.ndarray
    dwell_next_s: np.ndarray
    exp: LineExpectations
    esh_s: float


class Controller:
    """Base interface; concrete schemes live in control and adp."""

    name = "base"
    # When True the engine enforces that decisions come from the
    # stop's action menu.
    bounded_to_action_set = True

    def begin_episode(self, rng: np.random.Generator) -> None:
        pass

    def decide(self, ctx: DecisionContext) -> tuple[float, bool]:
        """Return (hold seconds, whether this counts as a controlled stage)."""
        raise NotImplementedError

    def notify_stage(self, record: StageRecord, ctx_stage: int) -> None:
        """Called when a stage's departure snapshot is complete."""


@dataclass
class RngStreams:
    arrivals: np.random.Generator
    travel: np.random.Generator
    policy: np.random.Generator


def rng_streams(seed: int, episode: int = 0) -> RngStreams:
    """Independent named streams, reproducible from (seed, episode)."""
    if seed < 0 or episode < 0:
        raise ValueError("seed and episode must be non-negative")

    def make(tag: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([seed, episode, tag]))

    return RngStreams(arrivals=make(0), travel=make(1), policy=make(2))


def generate_passengers(
    cfg: BusLineConfig, rng: np.random.Generator, horizon_s: float | None = None
) -> list[Passenger]:
    """Draw every passenger of the episode up front.

    Each stop sees at most one arrival per whole second, with
    probability rate/60; arrivals cover seconds [0, horizon). A
    passenger is slow with probability ratio/(1+ratio) and rides a
    series-weighted number of stops downstream.
    """
    horizon = int(horizon_s if horizon_s is not None else cfg.horizon_s)
    n_e = cfg.n_stops
    p_slow = cfg.passenger_types.p_slow
    out: list[Passenger] = []
    pid = 0
    for e in range(n_e):
        stop = cfg.stops[e]
        p = stop.rate_per_min / 60.0
        if p <= 0.0:
            continue
        ticks = np.flatnonzero(rng.random(horizon) < p)
        if len(ticks) == 0:
            continue
        slow = rng.random(len(ticks)) < p_slow
        probs = np.asarray(cfg.series_by_id(stop.series_id).probs)
        rides = rng.choice(len(probs), size=len(ticks), p=probs / probs.sum()) + 1
        for t, sl, k in zip(ticks, slow, rides):
            out.append(
                Passenger(
                    id=pid,
                    origin=e,
                    destination=(e + int(k)) % n_e,
                    slow=bool(sl),
                    arrive_s=float(t),
                )
            )
            pid += 1
    return out


def sample_piece_time(
    length_m: float,
    speed_ms: float,
    noise_s_per_km: float,
    rng: np.random.Generator,
) -> float:
    """Noisy travel time over one road piece, floored at half the mean."""
    mean = length_m / speed_ms
    sigma = noise_s_per_km * (length_m / 1000.0)
    t = rng.normal(mean, sigma) if sigma > 0.0 else mean
    return max(t, 0.5 * mean)


def signal_wait(
    red_s: float,
    green_s: float,
    initial_phase: str,
    initial_remaining_s: float,
    t: float,
) -> float:
    """Seconds a bus reaching the signal at time t stands still.

    At a phase boundary the new phase already shows, so arriving the
    instant a red ends means no wait, and arriving the instant a green
    ends means a full red.
    """
    cycle = red_s + green_s
    if initial_phase == "green":
        u = (t - initial_remaining_s) % cycle  # time since that green ended
    else:
        u = (t + (red_s - initial_remaining_s)) % cycle  # since this red began
    return red_s - u if u < red_s else 0.0


# ---------------------------------------------------------------------------
# Engine internals


class _StopState:
    __slots__ = ("future", "next_i", "waiting", "bus_queue")

    def __init__(self, future: list[Passenger]):
        self.future = future  # time-sorted arrivals not yet released
        self.next_i = 0
        self.waiting: list[Passenger] = []  # released, still on the kerb
        self.bus_queue: list[int] = []  # dwelling buses, head is served

    def release_until(self, t: float) -> None:
        """Move arrivals strictly before t onto the kerb."""
        i = self.next_i
        fut = self.future
        while i < len(fut) and fut[i].arrive_s < t:
            self.waiting.append(fut[i])
            i += 1
        self.next_i = i


class _BusState:
    __slots__ = (
        "idx",
        "capacity",
        "at_stop",
        "arrived_s",
        "service_start_s",
        "activation_s",
        "depart_s",
        "next_stop",
        "onboard",
        "n_onboard",
        "knots_t",
        "knots_pos",
        "knots_odo",
    )

    def __init__(self, idx: int, capacity: int, stop: int, pos: float):
        self.idx = idx
        self.capacity = capacity
        self.at_stop: int | None = stop
        self.arrived_s = 0.0
        self.service_start_s = 0.0
        self.activation_s: float | None = None
        self.depart_s: float | None = None
        self.next_stop = stop
        self.onboard: dict[int, list[Passenger]] = {}
        self.n_onboard = 0
        self.knots_t = [0.0]
        self.knots_pos = [pos]
        self.knots_odo = [0.0]

    def position_at(self, t: float, ring_m: float) -> float:
        """Ring position at time t, linear between movement knots."""
        ts = self.knots_t
        if t >= ts[-1]:
            return self.knots_pos[-1] % ring_m
        j = bisect_right(ts, t)
        t0, t1 = ts[j - 1], ts[j]
        o0, o1 = self.knots_odo[j - 1], self.knots_odo[j]
        frac = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        odo = o0 + frac * (o1 - o0)
        return (self.knots_pos[0] + odo) % ring_m


class _Engine:
    def __init__(
        self,
        cfg: BusLineConfig,
        controller: Controller,
        rngs: RngStreams,
        exp: LineExpectations,
        esh_s: float,
        horizon_s: float,
        seed: int,
        episode: int,
    ):
        self.cfg = cfg
        self.exp = exp
        self.controller = controller
        self.rngs = rngs
        self.horizon_s = horizon_s
        self.esh_s = esh_s
        self.bunch_threshold_s = cfg.bunching_fraction * esh_s
        self.pt = cfg.passenger_types

        passengers = generate_passengers(cfg, rngs.arrivals, horizon_s)
        by_stop: list[list[Passenger]] = [[] for _ in range(cfg.n_stops)]
        for p in passengers:
            by_stop[p.origin].append(p)
        self.stops = [_StopState(lst) for lst in by_stop]
        self.latest_arrival = np.zeros(cfg.n_stops)

        self.buses = []
        for b in cfg.buses:
            stop0 = b.initial_stop - 1
            self.buses.append(
                _BusState(b.id - 1, b.capacity, stop0, float(exp.stop_pos[stop0]))
            )

        self.log = EpisodeLog(
            config_name=cfg.name,
            controller_name=controller.name,
            seed=seed,
            episode=episode,
            horizon_s=horizon_s,
            esh_s=esh_s,
            bunching_threshold_s=self.bunch_threshold_s,
            n_buses=cfg.n_buses,
            n_stops=cfg.n_stops,
            ring_m=float(exp.ring_m),
            passengers=passengers,
        )

        self.events: list[tuple[float, int, int]] = []
        self._pending_stage: dict[int, StageRecord] = {}
        self._decision_count = 0

        # Every bus starts mid-dwell at its initial stop; its first
        # activation is the configured time-left value. Buses sharing
        # a stop queue in bus order.
        for spec, bus in zip(cfg.buses, self.buses):
            st = self.stops[bus.at_stop]
            st.bus_queue.append(bus.idx)
            bus.service_start_s = 0.0
            bus.activation_s = spec.trab_s
        for st in self.stops:
            # Only the queue head is activated on schedule; the rest
            # wait for it to leave.
            for rank, bidx in enumerate(st.bus_queue):
                if rank == 0:
                    heapq.heappush(
                        self.events,
                        (self.buses[bidx].activation_s, _ACTIVATE, bidx),
                    )
                else:
                    self.buses[bidx].activation_s = None

    # -- projections ------------------------------------------------------

    def _markers(self, now: float) -> tuple[BusMarker, ...]:
        out = []
        for bus in self.buses:
            if bus.at_stop is not None:
                rank = self.stops[bus.at_stop].bus_queue.index(bus.idx)
                out.append(
                    BusMarker(
                        ring_pos_m=float(self.exp.stop_pos[bus.at_stop]),
                        dwelling=True,
                        stop_idx=bus.at_stop,
                        queue_rank=rank,
                    )
                )
            else:
                pos = bus.position_at(now, self.exp.ring_m)
                out.append(BusMarker(ring_pos_m=pos, dwelling=False))
        return tuple(out)

    def _ring_view(self, now: float) -> RingView:
        return RingView(
            now_s=now,
            markers=self._markers(now),
            latest_arrival_s=self.latest_arrival.copy(),
        )

    def _decision_context(self, now: float, bus_idx: int) -> DecisionContext:
        n_b = self.cfg.n_buses
        act_time = np.zeros(n_b)
        arr_time = np.zeros(n_b)
        act_stop = np.zeros(n_b, dtype=np.int64)
        pending = np.zeros(n_b, dtype=bool)
        dwell_next = np.zeros(n_b)
        view = self._ring_view(now)
        for bus in self.buses:
            i = bus.idx
            if bus.at_stop is not None and bus.depart_s is None:
                # Still working through its forced dwell here (or
                # queued behind another bus).
                act_stop[i] = bus.at_stop
                act_time[i] = bus.activation_s if bus.activation_s is not None else now
                arr_time[i] = bus.arrived_s
                pending[i] = True
            else:
                if bus.at_stop is not None:
                    # Activated and holding: committed to depart.
                    frm = bus.at_stop
                    nxt = (frm + 1) % self.cfg.n_stops
                    arr = bus.depart_s + self.exp.seg_expected[frm]
                else:
                    nxt = bus.next_stop
                    pos = view.markers[i].ring_pos_m
                    at_signal = bool(np.any(self.exp.inter_pos == pos))
                    arr = now + self.exp.expected_transit_to_stop_s(
                        pos, nxt, at_signal=at_signal
                    )
                dw = self.exp.expected_dwell_s(nxt, arr - self.latest_arrival[nxt])
                act_stop[i] = nxt
                arr_time[i] = arr
                act_time[i] = arr + dw
                dwell_next[i] = dw
        stop = self.buses[bus_idx].at_stop
        return DecisionContext(
            now_s=now,
            bus=bus_idx,
            stop=stop,
            action_set=self.cfg.stop_action_set(stop + 1).holds_s,
            view=view,
            act_time_s=act_time,
            arr_time_s=arr_time,
            act_stop=act_stop,
            pending_here=pending,
            dwell_next_s=dwell_next,
            exp=self.exp,
            esh_s=self.esh_s,
        )

    # -- door work ---------------------------------------------------------

    def _begin_service(self, bus: _BusState, t0: float) -> None:
        """Open both doors at t0; schedule activation when both finish."""
        e = bus.at_stop
        stop = self.stops[e]
        stop.release_until(t0)

        alight_t = 0.0
        for pax in bus.onboard.pop(e, []):
            alight_t += (
                self.pt.alight_slow_s if pax.slow else self.pt.alight_quick_s
            )
            pax.alight_s = t0 + alight_t
            bus.n_onboard -= 1

        board_t = 0.0
        kept: list[Passenger] = []
        boarded = 0
        for pax in stop.waiting:
            if bus.n_onboard + 1 > bus.capacity:
                kept.append(pax)
                continue
            board_t += self.pt.board_slow_s if pax.slow else self.pt.board_quick_s
            pax.board_s = t0 + board_t
            pax.bus = bus.idx
            bus.onboard.setdefault(pax.destination, []).append(pax)
            bus.n_onboard += 1
            boarded += 1
        stop.waiting = kept

        bus.service_start_s = t0
        bus.activation_s = t0 + max(alight_t, board_t)
        heapq.heappush(self.events, (bus.activation_s, _ACTIVATE, bus.idx))

    def _hold_boarding(self, bus: _BusState, t_act: float, hold: float) -> tuple[float, float]:
        """Board late arrivals during the hold; returns (departure, idle)."""
        e = bus.at_stop
        stop = self.stops[e]
        scheduled = t_act + hold
        stop.release_until(scheduled)
        door_free = t_act
        busy = 0.0
        kept: list[Passenger] = []
        for pax in stop.waiting:
            if pax.arrive_s >= scheduled or bus.n_onboard + 1 > bus.capacity:
                kept.append(pax)
                continue
            dt = self.pt.board_slow_s if pax.slow else self.pt.board_quick_s
            start = max(door_free, pax.arrive_s)
            pax.board_s = start + dt
            pax.bus = bus.idx
            bus.onboard.setdefault(pax.destination, []).append(pax)
            bus.n_onboard += 1
            door_free = pax.board_s
            busy += dt
        stop.waiting = kept
        departure = max(scheduled, door_free)
        idle = (departure - t_act) - busy
        return departure, idle

    # -- movement ----------------------------------------------------------

    def _drive_segment(self, bus: _BusState, depart_s: float) -> float:
        """Append movement knots across the next segment; returns arrival."""
        e = bus.at_stop
        layout = self.exp.segment_layout[e]
        cfgv = self.cfg
        t = depart_s
        odo = bus.knots_odo[-1]
        pos = self.exp.stop_pos[e]
        bus.knots_t.append(t)
        bus.knots_pos.append(pos)
        bus.knots_odo.append(odo)
        n_pieces = len(layout.piece_lengths_m)
        for j, piece in enumerate(layout.piece_lengths_m):
            t += sample_piece_time(
                piece, self.exp.v_ms, cfgv.travel_noise_s_per_km, self.rngs.travel
            )
            odo += piece
            pos += piece
            bus.knots_t.append(t)
            bus.knots_pos.append(pos)
            bus.knots_odo.append(odo)
            if j < n_pieces - 1:
                spec = cfgv.intersections[layout.intersection_idx[j]]
                wait = signal_wait(
                    spec.red_s,
                    spec.green_s,
                    spec.initial_phase,
                    spec.initial_remaining_s,
                    t,
                )
                if wait > 0.0:
                    t += wait
                    bus.knots_t.append(t)
                    bus.knots_pos.append(pos)
                    bus.knots_odo.append(odo)
        return t

    # -- events ------------------------------------------------------------

    def _on_arrive(self, t: float, bus_idx: int) -> None:
        bus = self.buses[bus_idx]
        e = bus.next_stop
        bus.at_stop = e
        bus.arrived_s = t
        bus.activation_s = None
        bus.depart_s = None
        self.latest_arrival[e] = t
        stop = self.stops[e]
        stop.bus_queue.append(bus_idx)
        if stop.bus_queue[0] == bus_idx:
            self._begin_service(bus, t)

    def _on_activate(self, t: float, bus_idx: int) -> None:
        bus = self.buses[bus_idx]
        e = bus.at_stop
        ctx = self._decision_context(t, bus_idx)
        hold, controlled = self.controller.decide(ctx)
        if self.controller.bounded_to_action_set:
            if hold not in ctx.action_set:
                raise SimulationError(
                    f"controller {self.controller.name!r} returned hold {hold!r} "
                    f"outside the menu {ctx.action_set} at stop {e + 1}"
                )
        elif hold < 0.0:
            raise SimulationError("negative hold")

        departure, idle = self._hold_boarding(bus, t, float(hold))
        bus.depart_s = departure

        stage_idx = self._decision_count
        self._decision_count += 1
        if departure <= self.horizon_s:
            rec = StageRecord(
                stage=stage_idx,
                bus=bus_idx,
                stop=e,
                activation_s=t,
                departure_s=departure,
                hold_s=float(hold),
                idle_hold_s=idle,
                controlled=controlled,
            )
            self._pending_stage[stage_idx] = rec
            heapq.heappush(self.events, (departure, _SNAPSHOT, stage_idx))
        heapq.heappush(self.events, (departure, _DEPART, bus_idx))

    def _on_depart(self, t: float, bus_idx: int) -> None:
        bus = self.buses[bus_idx]
        e = bus.at_stop
        stop = self.stops[e]
        if stop.bus_queue[0] != bus_idx:
            raise SimulationError("departing bus is not at the head of its stop")
        stop.bus_queue.pop(0)
        arrival = self._drive_segment(bus, t)
        bus.at_stop = None
        bus.next_stop = (e + 1) % self.cfg.n_stops
        heapq.heappush(self.events, (arrival, _ARRIVE, bus_idx))
        if stop.bus_queue:
            self._begin_service(self.buses[stop.bus_queue[0]], t)

    def _on_snapshot(self, t: float, stage_idx: int) -> None:
        rec = self._pending_stage.pop(stage_idx)
        view = self._ring_view(t)
        h = all_headways(self.exp, view)
        rec.headways_s = h
        rec.mean_headway_s = float(h.mean())
        rec.sigma_headway_s = float(np.sqrt(((h - h.mean()) ** 2).mean()))
        rec.min_headway_s = float(h.min())
        if rec.min_headway_s < self.bunch_threshold_s:
            self.log.bunched = True
        self.log.stages.append(rec)
        self.controller.notify_stage(rec, stage_idx)

    def run(self) -> EpisodeLog:
        horizon = self.horizon_s
        events = self.events
        while events and events[0][0] <= horizon:
            t, kind, key = heapq.heappop(events)
            if kind == _ARRIVE:
                self._on_arrive(t, key)
            elif kind == _SNAPSHOT:
                self._on_snapshot(t, key)
            elif kind == _DEPART:
                self._on_depart(t, key)
            else:
                self._on_activate(t, key)
        self.log.stages.sort(key=lambda r: (r.departure_s, r.stage))
        for i, rec in enumerate(self.log.stages):
            rec.stage = i
        self.log.trajectory_knots = [
            list(zip(b.knots_t, b.knots_pos, b.knots_odo)) for b in self.buses
        ]
        return self.log


def run_episode(
    cfg: BusLineConfig,
    controller: Controller,
    seed: int,
    episode: int = 0,
    horizon_s: float | None = None,
    exp: LineExpectations | None = None,
    esh_s: float | None = None,
) -> EpisodeLog:
    """Simulate one full service period and return its log."""
    if exp is None:
        exp = LineExpectations(cfg)
    if esh_s is None:
        esh_s = esh(exp)
    rngs = rng_streams(seed, episode)
    controller.begin_episode(rngs.policy)
    engine = _Engine(
        cfg,
        controller,
        rngs,
        exp,
        esh_s,
        float(horizon_s if horizon_s is not None else cfg.horizon_s),
        seed,
        episode,
    )
    return engine.run()


# ---------------------------------------------------------------------------
# Exports


def _meta_lines(log: EpisodeLog) -> list[str]:
    return [
        f"# config: {log.config_name}",
        f"# controller: {log.controller_name}",
        f"# seed: {log.seed}",
        f"# episode: {log.episode}",
        f"# horizon_s: {log.horizon_s!r}",
        f"# esh_s: {log.esh_s!r}",
    ]


def write_episode_csv(log: EpisodeLog, out_dir, traj_step_s: float = 10.0) -> dict:
    """Write stages/passengers/trajectories CSV files; returns their paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    stages_path = os.path.join(out_dir, "stages.csv")
    with open(stages_path, "w", encoding="utf-8", newline="\n") as fh:
        for line in _meta_lines(log):
            fh.write(line + "\n")
        hcols = ",".join(f"h_bus{b + 1}_s" for b in range(log.n_buses))
        fh.write(
            "stage,bus,stop,activation_s,departure_s,hold_s,idle_hold_s,"
            f"controlled,mean_headway_s,sigma_headway_s,min_headway_s,{hcols}\n"
        )
        for r in log.stages:
            hs = ",".join(repr(float(x)) for x in r.headways_s)
            fh.write(
                f"{r.stage},{r.bus + 1},{r.stop + 1},{r.activation_s!r},"
                f"{r.departure_s!r},{r.hold_s!r},{r.idle_hold_s!r},"
                f"{int(r.controlled)},{r.mean_headway_s!r},"
                f"{r.sigma_headway_s!r},{r.min_headway_s!r},{hs}\n"
            )
    paths["stages"] = stages_path

    pax_path = os.path.join(out_dir, "passengers.csv")
    with open(pax_path, "w", encoding="utf-8", newline="\n") as fh:
        for line in _meta_lines(log):
            fh.write(line + "\n")
        fh.write("id,origin,destination,type,arrive_s,board_s,alight_s,bus\n")
        for p in log.passengers:
            board = "" if p.board_s is None else repr(p.board_s)
            alight = "" if p.alight_s is None else repr(p.alight_s)
            bus = "" if p.bus is None else str(p.bus + 1)
            kind = "slow" if p.slow else "quick"
            fh.write(
                f"{p.id},{p.origin + 1},{p.destination + 1},{kind},"
                f"{p.arrive_s!r},{board},{alight},{bus}\n"
            )
    paths["passengers"] = pax_path

    traj_path = os.path.join(out_dir, "trajectories.csv")
    with open(traj_path, "w", encoding="utf-8", newline="\n") as fh:
        for line in _meta_lines(log):
            fh.write(line + "\n")
        fh.write("time_s,bus,ring_pos_m,odometer_m\n")
        n_samples = int(log.horizon_s // traj_step_s) + 1
        for b, knots in enumerate(log.trajectory_knots):
            ts = np.array([k[0] for k in knots])
            odo = np.array([k[2] for k in knots])
            pos0 = knots[0][1]
            for i in range(n_samples):
                t = i * traj_step_s
                if t >= ts[-1]:
                    o = float(odo[-1])
                else:
                    o = float(np.interp(t, ts, odo))
                ring = (pos0 + o) % log.ring_m if log.ring_m > 0 else pos0 + o
                fh.write(f"{t!r},{b + 1},{ring!r},{o!r}\n")
    paths["trajectories"] = traj_path
    return paths

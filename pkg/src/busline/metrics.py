"""Scores computed from an episode log.

Three families:

* stability: how even the headways stayed. The per-stage headway
  spread (population sigma over the fleet) is averaged over stages to
  one number, and its stage-to-stage sample deviation says how wildly
  that spread moved.
* service: door-to-door passenger times split into waiting at the stop
  and riding in the vehicle.
* interference: how much holding actually stalled buses. Only the
  idle part of each hold counts, i.e. time the doors were shut (or
  serving nobody) past the forced dwell, and only stages where the
  controller actively decided are included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simulator import EpisodeLog

__all__ = [
    "StabilityReport",
    "ServiceReport",
    "InterferenceReport",
    "EpisodeSummary",
    "stability",
    "service",
    "interference",
    "summarize",
    "aggregate",
    "write_comparison_csv",
    "COMPARISON_COLUMNS",
]


@dataclass(frozen=True)
class StabilityReport:
    mean_sigma_s: float  # headway spread averaged over stages
    dev_sigma_s: float  # sample deviation of that spread across stages
    n_stages: int


@dataclass(frozen=True)
class ServiceReport:
    mean_wait_s: float | None
    mean_ride_s: float | None
    mean_journey_s: float | None
    n_boarded: int
    n_completed: int
    n_generated: int


@dataclass(frozen=True)
class InterferenceReport:
    mean_idle_s: float
    dev_idle_s: float
    total_idle_s: float
    n_controlled: int


@dataclass(frozen=True)
class EpisodeSummary:
    config_name: str
    controller_name: str
    seed: int
    stability: StabilityReport
    service: ServiceReport
    interference: InterferenceReport
    bunched: bool
    esh_s: float


def stability(log: EpisodeLog) -> StabilityReport:
    sig = np.array([s.sigma_headway_s for s in log.stages])
    if sig.size == 0:
        raise ValueError("episode recorded no stages")
    dev = float(sig.std(ddof=1)) if sig.size > 1 else 0.0
    return StabilityReport(
        mean_sigma_s=float(sig.mean()), dev_sigma_s=dev, n_stages=int(sig.size)
    )


def service(log: EpisodeLog) -> ServiceReport:
    waits = []
    rides = []
    journeys = []
    n_boarded = 0
    for p in log.passengers:
        if p.board_s is None:
            continue
        n_boarded += 1
        waits.append(p.board_s - p.arrive_s)
        if p.alight_s is not None:
            rides.append(p.alight_s - p.board_s)
            journeys.append(p.alight_s - p.arrive_s)

    def mean(xs: list[float]) -> float | None:
        return float(np.mean(xs)) if xs else None

    return ServiceReport(
        mean_wait_s=mean(waits),
        mean_ride_s=mean(rides),
        mean_journey_s=mean(journeys),
        n_boarded=n_boarded,
        n_completed=len(rides),
        n_generated=len(log.passengers),
    )


def interference(log: EpisodeLog) -> InterferenceReport:
    idles = np.array([s.idle_hold_s for s in log.stages if s.controlled])
    if idles.size == 0:
        return InterferenceReport(0.0, 0.0, 0.0, 0)
    dev = float(idles.std(ddof=1)) if idles.size > 1 else 0.0
    return InterferenceReport(
        mean_idle_s=float(idles.mean()),
        dev_idle_s=dev,
        total_idle_s=float(idles.sum()),
        n_controlled=int(idles.size),
    )


def summarize(log: EpisodeLog) -> EpisodeSummary:
    return EpisodeSummary(
        config_name=log.config_name,
        controller_name=log.controller_name,
        seed=log.seed,
        stability=stability(log),
        service=service(log),
        interference=interference(log),
        bunched=log.bunched,
        esh_s=log.esh_s,
    )


COMPARISON_COLUMNS = (
    "scheme",
    "runs",
    "mean_sigma_s",
    "dev_sigma_s",
    "mean_wait_s",
    "mean_ride_s",
    "mean_journey_s",
    "mean_idle_s",
    "dev_idle_s",
    "total_idle_s",
    "n_controlled",
    "bunched_share",
)


def aggregate(scheme: str, summaries: list[EpisodeSummary]) -> dict:
    """Average one scheme's episode summaries into a comparison row.

    Service fields missing in some runs are averaged over the runs
    that have them; a field absent everywhere stays None.
    """
    if not summaries:
        raise ValueError("nothing to aggregate")

    def avg(values: list[float | None]) -> float | None:
        have = [v for v in values if v is not None]
        return float(np.mean(have)) if have else None

    return {
        "scheme": scheme,
        "runs": len(summaries),
        "mean_sigma_s": float(np.mean([s.stability.mean_sigma_s for s in summaries])),
        "dev_sigma_s": float(np.mean([s.stability.dev_sigma_s for s in summaries])),
        "mean_wait_s": avg([s.service.mean_wait_s for s in summaries]),
        "mean_ride_s": avg([s.service.mean_ride_s for s in summaries]),
        "mean_journey_s": avg([s.service.mean_journey_s for s in summaries]),
        "mean_idle_s": float(np.mean([s.interference.mean_idle_s for s in summaries])),
        "dev_idle_s": float(np.mean([s.interference.dev_idle_s for s in summaries])),
        "total_idle_s": float(
            np.mean([s.interference.total_idle_s for s in summaries])
        ),
        "n_controlled": float(
            np.mean([s.interference.n_controlled for s in summaries])
        ),
        "bunched_share": float(np.mean([1.0 if s.bunched else 0.0 for s in summaries])),
    }


def write_comparison_csv(path, rows: list[dict]) -> None:
    """One row per scheme, stable column order, empty cell for None."""

    def cell(v) -> str:
        if v is None:
            return ""
        if isinstance(v, float):
            return "nan" if math.isnan(v) else repr(v)
        return str(v)

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(COMPARISON_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(cell(row.get(c)) for c in COMPARISON_COLUMNS) + "\n")

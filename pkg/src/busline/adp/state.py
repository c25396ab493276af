"""State encoding for the scorer and the idealized stage operator.

The controller sees the line as: how long ago each stop was last
visited (its age), how far each bus is from its next activation (its
timer), which stop that activation happens at, and the holding action
under consideration. Everything is normalized so the scorer's inputs
stay near the unit box: times by the equilibrium headway, stop indices
by the number of stops, the action by the largest allowed hold.
"""

from __future__ import annotations

import numpy as np

__all__ = ["n_features", "decision_features", "formal_stage_step"]


def n_features(n_stops: int, n_buses: int) -> int:
    return n_stops + 2 * n_buses + 1


def decision_features(
    now_s: float,
    latest_arrival_s: np.ndarray,
    act_time_s: np.ndarray,
    act_stop: np.ndarray,
    action_s: float,
    headway_scale_s: float,
    n_stops: int,
    max_hold_s: float,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Input vector for the scorer at one decision.

    Layout: stop ages, bus timers, bus activation stops, action.
    ``act_stop`` is 0-based; ages may go negative inside a rollout
    where a projected visit lies beyond the stage clock.
    """
    n_e = int(n_stops)
    n_b = len(act_time_s)
    if out is None:
        out = np.empty(n_e + 2 * n_b + 1)
    out[:n_e] = (now_s - latest_arrival_s) / headway_scale_s
    out[n_e : n_e + n_b] = (act_time_s - now_s) / headway_scale_s
    out[n_e + n_b : n_e + 2 * n_b] = (act_stop + 1) / n_e
    out[n_e + 2 * n_b] = action_s / max_hold_s
    return out


def formal_stage_step(
    timers_s: np.ndarray,
    stops: np.ndarray,
    ages_s: np.ndarray,
    action_s: float,
    travel_s: float,
    dwell_s: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, float]:
    """One stage of the idealized decision process, given its draws.

    A stage happens when some bus's timer hits zero. That bus is held
    for ``action_s``, crosses to the next stop in ``travel_s`` and is
    forced to dwell ``dwell_s`` there, so its timer renews to the sum
    of the three. The interval to the next stage is the new minimum
    over all timers; it is subtracted from every timer and added to
    every stop age, except that the stop the bus just reached gets age
    stage_interval - action - travel (negative while the visit is
    still pending at the next stage's clock).

    Returns (timers, stops, ages, acting_bus, stage_interval).
    """
    timers = np.asarray(timers_s, dtype=float).copy()
    stops_new = np.asarray(stops, dtype=np.int64).copy()
    ages = np.asarray(ages_s, dtype=float).copy()
    n_e = len(ages)
    if not np.isclose(timers.min(), 0.0, atol=1e-9):
        raise ValueError("no bus is due: minimum timer is not zero")
    bus = int(np.argmin(timers))
    if action_s < 0 or travel_s < 0 or dwell_s < 0:
        raise ValueError("action, travel and dwell must be non-negative")

    timers[bus] = action_s + travel_s + dwell_s
    reached = (stops_new[bus] + 1) % n_e
    stops_new[bus] = reached
    interval = float(timers.min())
    timers -= interval
    ages += interval
    ages[reached] = interval - (action_s + travel_s)
    return timers, stops_new, ages, bus, interval

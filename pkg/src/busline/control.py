"""Holding schemes that need no learning.

`NoControl` releases every bus as soon as its doors are done, which on
a busy ring quickly degenerates into platoons. `ThresholdHolding`
implements the classic countermeasure: at a few designated stops a bus
is held until its headway to the bus ahead is pulled back up to the
equilibrium value. One control stop and two diametrically opposite
control stops are the usual layouts.
"""

from __future__ import annotations

from .headways import instantaneous_headway
from .model import BusLineConfig
from .simulator import Controller, DecisionContext

__all__ = [
    "NoControl",
    "ThresholdHolding",
    "single_point_stops",
    "two_point_stops",
]


class NoControl(Controller):
    """Zero hold everywhere; no stage counts as controlled."""

    name = "nc"

    def decide(self, ctx: DecisionContext) -> tuple[float, bool]:
        return 0.0, False


def single_point_stops(cfg: BusLineConfig) -> tuple[int, ...]:
    """The first stop, 1-based."""
    return (1,)


def two_point_stops(cfg: BusLineConfig) -> tuple[int, ...]:
    """The first stop and the one half a ring away, 1-based."""
    return (1, 1 + cfg.n_stops // 2)


class ThresholdHolding(Controller):
    """Hold at fixed stops until the gap ahead reaches the target.

    The hold is continuous, not drawn from the stop's action menu:
    while the bus stands still the one ahead keeps moving, so holding
    for the shortfall restores the headway directly.
    """

    bounded_to_action_set = False

    def __init__(self, control_stops: tuple[int, ...], target_s: float | None = None):
        if not control_stops:
            raise ValueError("need at least one control stop")
        self.control_stops = frozenset(control_stops)  # 1-based
        self.target_s = target_s
        self.name = "sp" if len(self.control_stops) == 1 else "tp"

    def decide(self, ctx: DecisionContext) -> tuple[float, bool]:
        if ctx.stop + 1 not in self.control_stops:
            return 0.0, False
        target = self.target_s if self.target_s is not None else ctx.esh_s
        h = instantaneous_headway(ctx.exp, ctx.view, ctx.bus)
        return max(0.0, target - h), True

"""Q-learning of the holding policy, plus evaluation helpers.

Each activation is a stage: the controller encodes the line state,
explores or follows the rollout search, and the realized headway
spread at the departure snapshot prices the action. A stage's scorer
update waits until both its price and the following stage's state are
known, so updates trail decisions by one stage; stages left open when
the period ends are discarded. Exploration and the learning rate are
annealed per episode, and training aborts if any scorer parameter
runs away.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..headways import LineExpectations, esh
from ..metrics import EpisodeSummary, stability, summarize
from ..model import BusLineConfig, HyperParams
from ..simulator import Controller, DecisionContext, StageRecord, run_episode
from .lookahead import RolloutTables, root_q_min, rollout_from_context, search_best_action
from .qnet import QNet
from .state import decision_features, n_features

__all__ = [
    "TrainingDiverged",
    "stage_cost",
    "QLearningController",
    "TrainingResult",
    "train",
    "write_trace_csv",
    "save_checkpoint",
    "load_controller",
    "evaluate",
]

# Stream tag for drawing the scorer's initial weights; episode streams
# use tags 0..2 with episode >= 1, so (0, 3) is free.
_NET_INIT_TAG = 3


class TrainingDiverged(RuntimeError):
    """A scorer parameter exceeded the divergence bound."""


def stage_cost(
    headways_s: np.ndarray, coefficient: str, esh_s: float, scale: float
) -> float:
    """Squared headway deviation of the fleet, normalized by scale.

    ``coefficient`` picks the centre: the snapshot's own mean ("dch")
    or the line's equilibrium headway ("esh").
    """
    h = np.asarray(headways_s, dtype=float)
    centre = float(h.mean()) if coefficient == "dch" else esh_s
    return float(((h - centre) ** 2).sum() / scale)


@dataclass
class _OpenStage:
    x: np.ndarray
    cost: float | None = None
    min_q_next: float | None = None


@dataclass
class _EpisodeStats:
    td_updates: int = 0
    td_abs_sum: float = 0.0
    dropped: int = 0
    explored: int = 0
    decisions: int = 0
    min_q_sum: float = 0.0
    min_q_n: int = 0


class QLearningController(Controller):
    """Holds buses by the menu action the rollout search scores best."""

    name = "ql"
    bounded_to_action_set = True

    def __init__(
        self,
        cfg: BusLineConfig,
        net: QNet,
        lookahead: int,
        gamma: float,
        coefficient: str = "dch",
        cost_scale: float | None = None,
        exp: LineExpectations | None = None,
        esh_s: float | None = None,
        training: bool = False,
        divergence_bound: float = 1e3,
        engine: str = "numba",
    ):
        if coefficient not in ("dch", "esh"):
            raise ValueError("coefficient must be 'dch' or 'esh'")
        if lookahead < 0:
            raise ValueError("lookahead must be >= 0")
        self.cfg = cfg
        self.net = net
        self.depth = int(lookahead)
        self.gamma = float(gamma)
        self.coefficient = coefficient
        self.exp = exp if exp is not None else LineExpectations(cfg)
        self.esh_s = float(esh_s) if esh_s is not None else esh(self.exp)
        self.cost_scale = (
            float(cost_scale)
            if cost_scale is not None
            else cfg.n_buses * self.esh_s * self.esh_s
        )
        self.tables = RolloutTables.from_config(cfg, self.exp)
        self.training = training
        self.divergence_bound = float(divergence_bound)
        self.engine = engine
        expected = n_features(cfg.n_stops, cfg.n_buses)
        if net.n_inputs != expected:
            raise ValueError(
                f"scorer expects {net.n_inputs} inputs but this line needs {expected}"
            )
        # Annealed per episode by the trainer.
        self.epsilon = 0.0
        self.learn_rate = 0.0
        self._rng: np.random.Generator | None = None
        self._open: dict[int, _OpenStage] = {}
        self._decision_no = 0
        self._last_open: int | None = None
        self.stats = _EpisodeStats()

    def begin_episode(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self._open.clear()
        self._decision_no = 0
        self._last_open = None
        self.stats = _EpisodeStats()

    def decide(self, ctx: DecisionContext) -> tuple[float, bool]:
        roll = rollout_from_context(ctx)
        menu = ctx.action_set

        min_q = None
        best0 = 0
        if self.training or self.depth == 0:
            min_q, best0 = root_q_min(
                self.tables, self.net, roll, ctx.bus, self.esh_s, self.engine
            )
        if self.training and self._last_open is not None:
            prev = self._open.get(self._last_open)
            if prev is not None:
                prev.min_q_next = min_q
                self._settle(self._last_open)
            self._last_open = None

        if (
            self.training
            and self.epsilon > 0.0
            and self._rng.random() < self.epsilon
        ):
            idx = int(self._rng.integers(len(menu)))
            self.stats.explored += 1
        elif self.depth == 0:
            idx = best0
        else:
            idx, _ = search_best_action(
                self.tables,
                self.net,
                roll,
                ctx.bus,
                self.depth,
                self.gamma,
                self.coefficient,
                self.esh_s,
                cost_scale=self.cost_scale,
                engine=self.engine,
            )
        action = float(menu[idx])

        if self.training:
            x = decision_features(
                ctx.now_s,
                ctx.view.latest_arrival_s,
                ctx.act_time_s,
                ctx.act_stop,
                action,
                self.esh_s,
                self.cfg.n_stops,
                self.tables.max_hold_s,
            )
            self._open[self._decision_no] = _OpenStage(x=x)
            self._last_open = self._decision_no
        if min_q is not None:
            self.stats.min_q_sum += min_q
            self.stats.min_q_n += 1
        self.stats.decisions += 1
        self._decision_no += 1
        return action, True

    def notify_stage(self, record: StageRecord, ctx_stage: int) -> None:
        if not self.training:
            return
        st = self._open.get(ctx_stage)
        if st is None:
            return
        st.cost = stage_cost(
            record.headways_s, self.coefficient, self.esh_s, self.cost_scale
        )
        self._settle(ctx_stage)

    def _settle(self, key: int) -> None:
        st = self._open[key]
        if st.cost is None or st.min_q_next is None:
            return
        target = st.cost + self.gamma * st.min_q_next
        target = min(max(target, 0.0), 1.0)
        delta = self.net.sgd_step(st.x, target, self.learn_rate)
        del self._open[key]
        self.stats.td_updates += 1
        self.stats.td_abs_sum += abs(delta)
        worst = self.net.max_abs_param()
        if worst > self.divergence_bound:
            raise TrainingDiverged(
                f"scorer parameter magnitude {worst:.3g} exceeded "
                f"{self.divergence_bound:.3g}"
            )

    def end_episode(self) -> _EpisodeStats:
        """Discard stages still waiting on a price or a next state."""
        self.stats.dropped = len(self._open)
        self._open.clear()
        self._last_open = None
        return self.stats


@dataclass
class TrainingResult:
    net: QNet
    trace: list[dict] = field(default_factory=list)
    cfg_name: str = ""
    seed: int = 0
    episodes: int = 0
    esh_s: float = 0.0
    hp: HyperParams | None = None


TRACE_COLUMNS = (
    "episode",
    "epsilon",
    "learn_rate",
    "mean_sigma_s",
    "dev_sigma_s",
    "stages",
    "mean_hold_s",
    "td_updates",
    "td_mean_abs",
    "dropped",
    "explored",
    "max_param",
    "mean_min_q",
    "smooth_min_q",
    "bunched",
)


def train(
    cfg: BusLineConfig,
    hp: HyperParams,
    seed: int,
    engine: str = "numba",
    progress=None,
) -> TrainingResult:
    """Run the full annealed training schedule on one line."""
    hp.validate()
    exp = LineExpectations(cfg)
    esh_s = esh(exp)
    init_rng = np.random.default_rng(
        np.random.SeedSequence([seed, 0, _NET_INIT_TAG])
    )
    net = QNet(
        n_features(cfg.n_stops, cfg.n_buses),
        hidden1=hp.hidden1,
        hidden2=hp.hidden2,
        slope=hp.sigmoid_slope,
        init_half_range=hp.weight_init_half_range,
        rng=init_rng,
    )
    ctl = QLearningController(
        cfg,
        net,
        lookahead=hp.lookahead,
        gamma=hp.gamma,
        coefficient=hp.cost_coefficient,
        cost_scale=hp.cost_scale,
        exp=exp,
        esh_s=esh_s,
        training=True,
        divergence_bound=hp.divergence_bound,
        engine=engine,
    )
    result = TrainingResult(
        net=net, cfg_name=cfg.name, seed=seed, episodes=hp.episodes,
        esh_s=esh_s, hp=hp,
    )
    smooth = 0.0
    for k in range(1, hp.episodes + 1):
        ctl.epsilon = hp.epsilon_at(k)
        ctl.learn_rate = hp.learn_rate * hp.learn_rate_decay ** (k - 1)
        log = run_episode(cfg, ctl, seed=seed, episode=k, exp=exp, esh_s=esh_s)
        stats = ctl.end_episode()
        stab = stability(log)
        mean_min_q = (
            stats.min_q_sum / stats.min_q_n if stats.min_q_n else float("nan")
        )
        # Running average across episodes, stepsize 1/(k+1) on the
        # 0-based index, kept for the trace only.
        smooth += (mean_min_q - smooth) / k
        holds = [s.hold_s for s in log.stages]
        row = {
            "episode": k,
            "epsilon": ctl.epsilon,
            "learn_rate": ctl.learn_rate,
            "mean_sigma_s": stab.mean_sigma_s,
            "dev_sigma_s": stab.dev_sigma_s,
            "stages": stab.n_stages,
            "mean_hold_s": float(np.mean(holds)) if holds else 0.0,
            "td_updates": stats.td_updates,
            "td_mean_abs": (
                stats.td_abs_sum / stats.td_updates if stats.td_updates else 0.0
            ),
            "dropped": stats.dropped,
            "explored": stats.explored,
            "max_param": net.max_abs_param(),
            "mean_min_q": mean_min_q,
            "smooth_min_q": smooth,
            "bunched": int(log.bunched),
        }
        result.trace.append(row)
        if progress is not None:
            progress(row)
    return result


def write_trace_csv(path, trace: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in trace:
            cells = []
            for c in TRACE_COLUMNS:
                v = row[c]
                cells.append(repr(float(v)) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def save_checkpoint(path, result: TrainingResult) -> None:
    hp = result.hp if result.hp is not None else HyperParams()
    result.net.save(
        path,
        extra={
            "line": result.cfg_name,
            "seed": result.seed,
            "episodes": result.episodes,
            "esh_s": result.esh_s,
            "lookahead": hp.lookahead,
            "gamma": hp.gamma,
            "coefficient": hp.cost_coefficient,
            "epsilon0": hp.epsilon0,
            "xi": hp.xi,
            "learn_rate": hp.learn_rate,
            "learn_rate_decay": hp.learn_rate_decay,
        },
    )


def load_controller(
    path,
    cfg: BusLineConfig | None = None,
    lookahead: int | None = None,
    engine: str = "numba",
) -> QLearningController:
    """Rebuild an evaluation-mode controller from a checkpoint."""
    net, extra = QNet.load(path)
    if cfg is None:
        from ..lines import builtin_line

        cfg = builtin_line(str(extra["line"]))
    return QLearningController(
        cfg,
        net,
        lookahead=int(extra["lookahead"]) if lookahead is None else int(lookahead),
        gamma=float(extra["gamma"]),
        coefficient=str(extra["coefficient"]),
        training=False,
        engine=engine,
    )


def evaluate(
    cfg: BusLineConfig,
    controller: Controller,
    seeds,
    exp: LineExpectations | None = None,
    esh_s: float | None = None,
) -> list[EpisodeSummary]:
    """Fresh-demand episodes under a fixed policy, one per seed."""
    if exp is None:
        exp = LineExpectations(cfg)
    if esh_s is None:
        esh_s = esh(exp)
    out = []
    for s in seeds:
        log = run_episode(cfg, controller, seed=int(s), exp=exp, esh_s=esh_s)
        out.append(summarize(log))
    return out

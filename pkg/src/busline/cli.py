"""Command line front end.

Four subcommands cover the workflow:

* ``simulate``: one episode under a chosen scheme, CSV logs out.
* ``train``: learn a holding policy, checkpoint plus trace out.
* ``evaluate``: fixed policy over many fresh-demand runs.
* ``compare``: several schemes on the same runs, one summary table.

Lines are addressed either by a bundled name (L1..L5) or by a path to
a config file. Output lands in --out, defaulting to $BUSLINE_OUT or
./busline-out. Exit codes: 0 success, 1 internal error, 2 bad usage,
3 bad input (config, checkpoint, or scheme mismatch).
"""

from __future__ import annotations

import argparse
import os
import sys

from .control import NoControl, ThresholdHolding, single_point_stops, two_point_stops
from .headways import LineExpectations, esh
from .lines import BUILTIN_NAMES, builtin_line
from .metrics import aggregate, summarize, write_comparison_csv
from .model import (
    BusLineConfig,
    ConfigError,
    HyperParams,
    load_config,
    parse_action_notation,
)
from .simulator import run_episode, write_episode_csv

__all__ = ["main"]

_EXIT_BAD_INPUT = 3


class _InputError(Exception):
    """Bad line, checkpoint, or scheme combination."""


def _load_line(name: str) -> BusLineConfig:
    if name in BUILTIN_NAMES:
        return builtin_line(name)
    if os.path.exists(name):
        return load_config(name)
    raise _InputError(
        f"unknown line {name!r}: not a bundled name ({', '.join(BUILTIN_NAMES)}) "
        "and no such file"
    )


def _apply_action_set(cfg: BusLineConfig, spec: str | None) -> BusLineConfig:
    if spec is None:
        return cfg
    return cfg.with_action_set(parse_action_notation(spec))


def _parse_stops(spec: str | None) -> tuple[int, ...] | None:
    if spec is None:
        return None
    try:
        stops = tuple(int(tok) for tok in spec.split(","))
    except ValueError as exc:
        raise _InputError(f"bad control stop list {spec!r}") from exc
    if not stops:
        raise _InputError("empty control stop list")
    return stops


def _make_controller(args, cfg: BusLineConfig):
    scheme = args.scheme
    if scheme == "nc":
        return NoControl()
    if scheme in ("sp", "tp"):
        stops = _parse_stops(getattr(args, "stops", None))
        if stops is None:
            stops = single_point_stops(cfg) if scheme == "sp" else two_point_stops(cfg)
        bad = [s for s in stops if not 1 <= s <= cfg.n_stops]
        if bad:
            raise _InputError(f"control stops out of range: {bad}")
        ctl = ThresholdHolding(stops)
        ctl.name = scheme
        return ctl
    if scheme == "ql":
        if not getattr(args, "checkpoint", None):
            raise _InputError("scheme 'ql' needs --checkpoint")
        from .adp import load_controller

        try:
            return load_controller(
                args.checkpoint,
                cfg,
                lookahead=getattr(args, "lookahead", None),
                engine=args.engine,
            )
        except (OSError, ValueError) as exc:
            raise _InputError(f"cannot load checkpoint: {exc}") from exc
    raise _InputError(f"unknown scheme {scheme!r}")


def _out_dir(args) -> str:
    out = args.out or os.environ.get("BUSLINE_OUT") or "busline-out"
    os.makedirs(out, exist_ok=True)
    return out


def _print_summary(s) -> None:
    svc = s.service
    forever = "-"
    print(f"line {s.config_name}  scheme {s.controller_name}  seed {s.seed}")
    print(
        f"  headway spread: mean {s.stability.mean_sigma_s:.2f} s, "
        f"deviation {s.stability.dev_sigma_s:.2f} s over {s.stability.n_stages} stages"
    )
    print(
        "  passengers: wait "
        + (f"{svc.mean_wait_s:.1f} s" if svc.mean_wait_s is not None else forever)
        + ", ride "
        + (f"{svc.mean_ride_s:.1f} s" if svc.mean_ride_s is not None else forever)
        + f"  ({svc.n_boarded}/{svc.n_generated} boarded, {svc.n_completed} done)"
    )
    print(
        f"  holding: {s.interference.n_controlled} controlled stages, "
        f"idle mean {s.interference.mean_idle_s:.2f} s, "
        f"total {s.interference.total_idle_s:.1f} s"
    )
    print(f"  bunched: {'yes' if s.bunched else 'no'}  (equilibrium headway {s.esh_s:.2f} s)")


def _cmd_simulate(args) -> int:
    cfg = _apply_action_set(_load_line(args.line), args.action_set)
    ctl = _make_controller(args, cfg)
    log = run_episode(cfg, ctl, seed=args.seed, horizon_s=args.horizon)
    out = _out_dir(args)
    paths = write_episode_csv(log, out)
    _print_summary(summarize(log))
    for k, p in paths.items():
        print(f"  wrote {k}: {p}")
    return 0


def _cmd_train(args) -> int:
    from .adp import save_checkpoint, train, write_trace_csv
    from .adp.training import TRACE_COLUMNS  # noqa: F401  (stable order)

    cfg = _apply_action_set(_load_line(args.line), args.action_set)
    hp = HyperParams(
        epsilon0=args.epsilon0,
        xi=args.xi,
        gamma=args.gamma,
        learn_rate=args.lr,
        learn_rate_decay=args.lr_decay,
        episodes=args.episodes,
        lookahead=args.lookahead,
        cost_coefficient=args.coefficient,
    )
    try:
        hp.validate()
    except ValueError as exc:
        raise _InputError(str(exc)) from exc

    def progress(row):
        if args.quiet:
            return
        if row["episode"] % args.log_every == 0 or row["episode"] == 1:
            print(
                f"episode {row['episode']:4d}  eps {row['epsilon']:.3f}  "
                f"spread {row['mean_sigma_s']:8.2f} s  hold {row['mean_hold_s']:5.2f} s  "
                f"td {row['td_mean_abs']:.4f}",
                flush=True,
            )

    result = train(cfg, hp, seed=args.seed, engine=args.engine, progress=progress)
    out = _out_dir(args)
    ckpt = os.path.join(out, args.checkpoint_name)
    trace = os.path.join(out, "trace.csv")
    save_checkpoint(ckpt, result)
    write_trace_csv(trace, result.trace)
    last = result.trace[-1]
    print(
        f"trained {hp.episodes} episodes on {cfg.name}: final spread "
        f"{last['mean_sigma_s']:.2f} s, wrote {ckpt} and {trace}"
    )
    return 0


def _run_many(cfg, ctl, runs: int, seed0: int):
    from .adp.training import evaluate

    return evaluate(cfg, ctl, seeds=range(seed0, seed0 + runs))


def _write_runs_csv(path, summaries) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "seed,mean_sigma_s,dev_sigma_s,stages,mean_wait_s,mean_ride_s,"
            "mean_idle_s,n_controlled,total_idle_s,bunched\n"
        )
        for s in summaries:
            svc = s.service
            fh.write(
                f"{s.seed},{s.stability.mean_sigma_s!r},{s.stability.dev_sigma_s!r},"
                f"{s.stability.n_stages},"
                f"{'' if svc.mean_wait_s is None else repr(svc.mean_wait_s)},"
                f"{'' if svc.mean_ride_s is None else repr(svc.mean_ride_s)},"
                f"{s.interference.mean_idle_s!r},{s.interference.n_controlled},"
                f"{s.interference.total_idle_s!r},{int(s.bunched)}\n"
            )


def _cmd_evaluate(args) -> int:
    cfg = _apply_action_set(_load_line(args.line), args.action_set)
    ctl = _make_controller(args, cfg)
    summaries = _run_many(cfg, ctl, args.runs, args.seed)
    out = _out_dir(args)
    path = os.path.join(out, f"runs_{ctl.name}.csv")
    _write_runs_csv(path, summaries)
    row = aggregate(ctl.name, summaries)
    print(
        f"{ctl.name} on {cfg.name} over {args.runs} runs: "
        f"spread {row['mean_sigma_s']:.2f} s, deviation {row['dev_sigma_s']:.2f} s, "
        f"idle {row['mean_idle_s']:.2f} s, bunched share {row['bunched_share']:.2f}"
    )
    print(f"  wrote {path}")
    return 0


def _cmd_compare(args) -> int:
    cfg = _apply_action_set(_load_line(args.line), args.action_set)
    rows = []
    out = _out_dir(args)
    for token in args.schemes.split(","):
        token = token.strip()
        if not token:
            continue
        if token.startswith("ql"):
            _, _, ckpt = token.partition(":")
            if not ckpt:
                raise _InputError("compare needs ql:<checkpoint path>")
            ns = argparse.Namespace(
                scheme="ql", checkpoint=ckpt, lookahead=args.lookahead,
                engine=args.engine, stops=None,
            )
            ctl = _make_controller(ns, cfg)
            label = os.path.splitext(os.path.basename(ckpt))[0]
        else:
            ns = argparse.Namespace(scheme=token, stops=None, engine=args.engine)
            ctl = _make_controller(ns, cfg)
            label = token
        summaries = _run_many(cfg, ctl, args.runs, args.seed)
        _write_runs_csv(os.path.join(out, f"runs_{label}.csv"), summaries)
        rows.append(aggregate(label, summaries))
    path = os.path.join(out, "comparison.csv")
    write_comparison_csv(path, rows)
    print(f"{'scheme':>12}  {'spread':>8}  {'deviation':>9}  {'idle':>7}  bunched")
    for r in rows:
        print(
            f"{r['scheme']:>12}  {r['mean_sigma_s']:8.2f}  {r['dev_sigma_s']:9.2f}  "
            f"{r['mean_idle_s']:7.2f}  {r['bunched_share']:7.2f}"
        )
    print(f"  wrote {path}")
    return 0


def _cmd_headway(args) -> int:
    cfg = _load_line(args.line)
    exp = LineExpectations(cfg)
    h = esh(exp)
    print(f"line {cfg.name}: {cfg.n_stops} stops, {cfg.n_buses} buses")
    print(f"  ring {exp.ring_m / 1000:.2f} km, cruise {exp.cruise_total_s:.1f} s")
    print(f"  expected signal delay per lap {exp.signal_delay_total:.1f} s")
    print(f"  equilibrium headway {h:.2f} s")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="busline",
        description="Circular bus line simulator with adaptive holding control.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scheme=True):
        sp.add_argument("--line", default="L5", help="bundled name or config path")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument(
            "--action-set",
            default=None,
            help="replace every stop's hold menu, e.g. '2x5' or '0,3,6,9'",
        )
        sp.add_argument(
            "--engine",
            choices=("numba", "python"),
            default="numba",
            help="rollout search backend",
        )
        if scheme:
            sp.add_argument(
                "--scheme", choices=("nc", "sp", "tp", "ql"), default="nc"
            )
            sp.add_argument("--checkpoint", default=None, help="ql scorer file")
            sp.add_argument(
                "--stops", default=None, help="override control stops, e.g. '1,22'"
            )
            sp.add_argument(
                "--lookahead",
                type=int,
                default=None,
                help="override the checkpoint's rollout depth",
            )

    sp = sub.add_parser("simulate", help="run one episode and dump CSV logs")
    common(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=float, default=None, help="override period [s]")
    sp.set_defaults(fn=_cmd_simulate)

    sp = sub.add_parser("train", help="learn a holding policy")
    common(sp, scheme=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--episodes", type=int, default=300)
    sp.add_argument("--lookahead", type=int, default=3)
    sp.add_argument("--coefficient", choices=("dch", "esh"), default="dch")
    sp.add_argument("--epsilon0", type=float, default=0.6)
    sp.add_argument("--xi", type=float, default=1.0 / 600.0)
    sp.add_argument("--gamma", type=float, default=0.5)
    sp.add_argument("--lr", type=float, default=0.05)
    sp.add_argument("--lr-decay", type=float, default=0.995)
    sp.add_argument("--checkpoint-name", default="qnet.npz")
    sp.add_argument("--log-every", type=int, default=10)
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(fn=_cmd_train)

    sp = sub.add_parser("evaluate", help="score a fixed policy over many runs")
    common(sp)
    sp.add_argument("--seed", type=int, default=1000, help="first run seed")
    sp.add_argument("--runs", type=int, default=50)
    sp.set_defaults(fn=_cmd_evaluate)

    sp = sub.add_parser("compare", help="several schemes on the same runs")
    common(sp, scheme=False)
    sp.add_argument(
        "--schemes",
        default="nc,sp,tp",
        help="comma list of nc, sp, tp, ql:<checkpoint>",
    )
    sp.add_argument("--seed", type=int, default=1000, help="first run seed")
    sp.add_argument("--runs", type=int, default=50)
    sp.add_argument("--lookahead", type=int, default=None)
    sp.set_defaults(fn=_cmd_compare)

    sp = sub.add_parser("headway", help="print a line's equilibrium numbers")
    sp.add_argument("--line", default="L5")
    sp.set_defaults(fn=_cmd_headway)

    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (_InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())

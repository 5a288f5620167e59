"""Command-line front end.

Subcommands share one YAML config format.  Every run resolves the config
against built-in defaults, executes, then writes a manifest holding the
resolved config, the seed, and a sha256 of every artifact; feeding that
manifest back in as --config reproduces the run byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

import yaml

from .agents import DDQLConfig, LearnerState, MomentumConfig
from .book import Side
from .kernel import SimTime, seconds, time_from_str
from .lobster import SyntheticFlowConfig, generate_to_file
from .metrics import (
    FitRefusal,
    FlowSeries,
    InsufficientDataError,
    fit_deltas,
    interarrival_fit,
    intraday_profile,
    report_to_json,
    samples_to_csv,
    windowed_volume,
)
from .rl import ActionSpace
from .training import (
    DataSource,
    RunSetup,
    evaluate,
    latest_checkpoint,
    run_episode,
    train,
    write_action_trace,
)

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "out_dir": "runs/default",
    "data": {
        "kind": "synthetic",
        "paths": [],
        "synthetic": {
            "arrival_rate_per_side": 1.0,
            "size_gamma_shape": 2.0,
            "size_gamma_scale": 50.0,
            "placement_geometric_p": 0.5,
            "cancel_probability": 0.2,
            "initial_mid_ticks": 1_000_000,
            "session_start": "09:30:00",
            "session_end": "16:00:00",
        },
    },
    "kernel": {
        "latency_nanos": 1_000_000,
        "computation_delay_nanos": 0,
        "warmup_seconds": 60.0,
        "post_margin_seconds": 5.0,
    },
    "roster": {
        "momentum_count": 6,
        "momentum": {
            "short_window": 20,
            "long_window": 50,
            "order_size": 10,
            "poll_interval_seconds": 1.0,
        },
        "include_twap": True,
        "record_quotes": False,
    },
    "ddql": {
        "episodes": 9,
        "num_periods": 660,
        "period_seconds": 30.0,
        "session_start": "10:00:00",
        "session_end": "15:30:00",
        "gamma": 0.99,
        "epsilon_start": 1.0,
        "epsilon_min": 0.05,
        "epsilon_decay": 0.9,
        "train_every": 5,
        "target_sync_every": 5,
        "batch_size": 32,
        "min_experience": 200,
        "max_experience": 10_000,
        "side": "buy",
        "parent_quantity": 6600,
        "hidden_sizes": [64, 64],
        "dropout_rate": 0.2,
        "learning_rate": 0.01,
        "reward_scale": 1.0,
        "act_with_target_net": False,
        "multipliers": [0.1, 0.5, 1.0, 1.5, 2.0, 2.5],
    },
    "realism": {
        "window_seconds": 60.0,
        "bucket_minutes": 15.0,
        "paired": False,
    },
}


class ConfigError(Exception):
    pass


def deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path) -> dict:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    # a manifest is itself a valid config: unwrap the resolved copy inside
    if "artifacts" in raw and "config" in raw:
        raw = raw["config"]
    return raw


def resolve_config(user: dict, seed: Optional[int] = None,
                   out_dir: Optional[str] = None) -> dict:
    unknown = set(user) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = deep_merge(DEFAULT_CONFIG, user)
    if seed is not None:
        cfg["seed"] = seed
    if out_dir is not None:
        cfg["out_dir"] = str(out_dir)
    return cfg


def _as_time(value) -> SimTime:
    if isinstance(value, str):
        return time_from_str(value)
    return int(value)


def _side(name: str) -> Side:
    try:
        return {"buy": Side.BID, "sell": Side.ASK}[name]
    except KeyError:
        raise ConfigError(f"side must be 'buy' or 'sell', got {name!r}") from None


def build_ddql_config(section: dict) -> DDQLConfig:
    return DDQLConfig(
        episodes=int(section["episodes"]),
        num_periods=int(section["num_periods"]),
        period=seconds(float(section["period_seconds"])),
        session_start=_as_time(section["session_start"]),
        session_end=_as_time(section["session_end"]),
        gamma=float(section["gamma"]),
        epsilon_start=float(section["epsilon_start"]),
        epsilon_min=float(section["epsilon_min"]),
        epsilon_decay=float(section["epsilon_decay"]),
        train_every=int(section["train_every"]),
        target_sync_every=int(section["target_sync_every"]),
        batch_size=int(section["batch_size"]),
        min_experience=int(section["min_experience"]),
        max_experience=int(section["max_experience"]),
        side=_side(section["side"]),
        parent_quantity=int(section["parent_quantity"]),
        hidden_sizes=tuple(int(h) for h in section["hidden_sizes"]),
        dropout_rate=float(section["dropout_rate"]),
        learning_rate=float(section["learning_rate"]),
        reward_scale=float(section["reward_scale"]),
        act_with_target_net=bool(section["act_with_target_net"]),
        multipliers=tuple(float(m) for m in section["multipliers"]),
    )


def build_flow_config(section: dict, seed: int) -> SyntheticFlowConfig:
    return SyntheticFlowConfig(
        arrival_rate_per_side=float(section["arrival_rate_per_side"]),
        size_gamma_shape=float(section["size_gamma_shape"]),
        size_gamma_scale=float(section["size_gamma_scale"]),
        placement_geometric_p=float(section["placement_geometric_p"]),
        cancel_probability=float(section["cancel_probability"]),
        initial_mid_ticks=int(section["initial_mid_ticks"]),
        session_start_ns=_as_time(section["session_start"]),
        session_end_ns=_as_time(section["session_end"]),
        seed=seed,
    )


def build_data_source(cfg: dict) -> DataSource:
    section = cfg["data"]
    kind = section["kind"]
    if kind == "lobster":
        missing = [p for p in section["paths"] if not Path(p).is_file()]
        if missing:
            raise ConfigError(f"data files not found: {missing}")
        return DataSource(kind="lobster", paths=list(section["paths"]))
    if kind == "synthetic":
        return DataSource(kind="synthetic",
                          synthetic=build_flow_config(section["synthetic"], cfg["seed"]))
    if kind == "none":
        return DataSource(kind="none")
    raise ConfigError(f"unknown data kind {kind!r}")


def build_setup(cfg: dict, out_dir: Path) -> RunSetup:
    roster = cfg["roster"]
    momentum = MomentumConfig(
        short_window=int(roster["momentum"]["short_window"]),
        long_window=int(roster["momentum"]["long_window"]),
        order_size=int(roster["momentum"]["order_size"]),
        poll_interval=seconds(float(roster["momentum"]["poll_interval_seconds"])),
    )
    return RunSetup(
        ddql=build_ddql_config(cfg["ddql"]),
        data=build_data_source(cfg),
        seed=int(cfg["seed"]),
        out_dir=out_dir,
        warmup=seconds(float(cfg["kernel"]["warmup_seconds"])),
        post_margin=seconds(float(cfg["kernel"]["post_margin_seconds"])),
        latency_nanos=int(cfg["kernel"]["latency_nanos"]),
        computation_delay_nanos=int(cfg["kernel"]["computation_delay_nanos"]),
        momentum_count=int(roster["momentum_count"]),
        momentum=momentum,
        include_twap_twin=bool(roster["include_twap"]),
        record_quotes=bool(roster["record_quotes"]),
    )


# -- manifest ----------------------------------------------------------------


def hash_artifacts(out_dir: Path) -> dict:
    hashes = {}
    for path in sorted(Path(out_dir).rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            rel = path.relative_to(out_dir).as_posix()
            hashes[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
    return hashes


def write_manifest(mode: str, cfg: dict, out_dir: Path) -> Path:
    manifest = {
        "mode": mode,
        "seed": cfg["seed"],
        "config": cfg,
        "artifacts": hash_artifacts(out_dir),
    }
    path = Path(out_dir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# -- subcommands ---------------------------------------------------------------


def cmd_gen_data(cfg: dict, args: argparse.Namespace, out_dir: Path) -> int:
    flow = build_flow_config(cfg["data"]["synthetic"], cfg["seed"])
    path = out_dir / f"synthetic_{cfg['seed']}.csv"
    sidecar = generate_to_file(flow, path)
    print(f"wrote {sidecar['total_events']} events to {path}")
    return 0


def cmd_replay(cfg: dict, args: argparse.Namespace, out_dir: Path) -> int:
    setup = build_setup(cfg, out_dir)
    setup.momentum_count = 0
    setup.include_twap_twin = False
    outcome = run_episode(setup, 0, executor="none", include_twap_twin=False)
    outcome.log.to_jsonl(out_dir / "replay_log.jsonl")
    with open(out_dir / "book_final.csv", "w") as fh:
        fh.write(outcome.exchange.book.depth_csv())
    print(f"replayed {len(outcome.log.records)} deliveries; "
          f"book dump at {out_dir / 'book_final.csv'}")
    return 0


def cmd_train(cfg: dict, args: argparse.Namespace, out_dir: Path) -> int:
    setup = build_setup(cfg, out_dir)
    outcome = train(setup, resume=bool(args.resume))
    traces = out_dir / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    space = ActionSpace(setup.ddql.multipliers)
    for result in outcome.results:
        write_action_trace(result, traces / f"episode_{result.episode:04d}_actions.csv",
                           space)
    print(f"trained {len(outcome.results)} episodes; "
          f"learning curve at {outcome.learning_curve_path}")
    return 0


def cmd_evaluate(cfg: dict, args: argparse.Namespace, out_dir: Path) -> int:
    setup = build_setup(cfg, out_dir)
    checkpoint = Path(args.checkpoint) if args.checkpoint else latest_checkpoint(out_dir)
    if checkpoint is None or not checkpoint.is_file():
        print("no checkpoint found; pass --checkpoint or train first", file=sys.stderr)
        return 2
    outcome = evaluate(setup, checkpoint)
    report_to_json({"comparison": outcome.comparison}, out_dir / "evaluation.json")
    space = ActionSpace(setup.ddql.multipliers)
    write_action_trace(outcome.candidate.result, out_dir / "ddql_actions.csv", space)
    write_action_trace(outcome.baseline.result, out_dir / "twap_actions.csv", space)
    print(f"action-trace distance {outcome.comparison.action_trace_distance:.4f}; "
          f"report at {out_dir / 'evaluation.json'}")
    return 0


def _fit_sections(flow: FlowSeries, realism: dict) -> tuple[dict, dict]:
    """All stylized-fact fits for one flow; returns (report sections, flat
    fits).  A metric short on data is recorded as refused and the rest
    still run."""
    sections: dict = {}
    fits: dict = {}
    try:
        volume = windowed_volume(flow, float(realism["window_seconds"]))
        sections["windowed_volume"] = volume
        fits["volume_gamma"] = volume.gamma
        fits["volume_lognormal"] = volume.lognormal
    except InsufficientDataError as exc:
        print(f"warning: windowed volume skipped: {exc}", file=sys.stderr)
        sections["windowed_volume"] = {"refused": str(exc)}
        fits["volume_gamma"] = FitRefusal("gamma", str(exc), 0)
        fits["volume_lognormal"] = FitRefusal("lognormal", str(exc), 0)
    try:
        inter = interarrival_fit(flow)
        sections["interarrival"] = inter
        fits["interarrival_exponential"] = inter.exponential
        fits["interarrival_weibull"] = inter.weibull
    except InsufficientDataError as exc:
        print(f"warning: interarrival fit skipped: {exc}", file=sys.stderr)
        sections["interarrival"] = {"refused": str(exc)}
        fits["interarrival_exponential"] = FitRefusal("exponential", str(exc), 0)
        fits["interarrival_weibull"] = FitRefusal("weibull", str(exc), 0)
    try:
        sections["intraday"] = intraday_profile(flow, float(realism["bucket_minutes"]))
    except InsufficientDataError as exc:
        print(f"warning: intraday profile skipped: {exc}", file=sys.stderr)
        sections["intraday"] = {"refused": str(exc)}
    return sections, fits


def cmd_realism(cfg: dict, args: argparse.Namespace, out_dir: Path) -> int:
    realism = cfg["realism"]
    if not realism["paired"]:
        source = build_data_source(cfg)
        events = source.events_for_episode(0, cfg["seed"])
        if not events:
            print("no events to analyze", file=sys.stderr)
            return 2
        flow = FlowSeries.from_events(events)
        sections, _ = _fit_sections(flow, realism)
        report_to_json(sections, out_dir / "realism.json")
        volume = sections["windowed_volume"]
        if hasattr(volume, "samples"):
            samples_to_csv(volume.samples, out_dir / "volume_samples.csv", "volume")
        inter = sections["interarrival"]
        if hasattr(inter, "gaps_seconds"):
            samples_to_csv(inter.gaps_seconds,
                           out_dir / "interarrival_samples.csv", "gap_seconds")
        print(f"report at {out_dir / 'realism.json'}")
        return 0

    # paired mode: identical roster and seeds, with and without the learning
    # agent, then per-parameter deltas
    setup = build_setup(cfg, out_dir)
    if args.checkpoint:
        learner = LearnerState.load(Path(args.checkpoint), setup.ddql, setup.seed)
        epsilon = 0.0
    else:
        learner = LearnerState(setup.ddql, setup.seed)
        epsilon = setup.ddql.epsilon_start
    with_agent = run_episode(setup, 0, learner, executor="ddql",
                             train_enabled=False, epsilon=epsilon,
                             include_twap_twin=False)
    without_agent = run_episode(setup, 0, executor="none", include_twap_twin=False)
    session = (setup.ddql.session_start, setup.ddql.session_end)
    flow_with = FlowSeries.from_log(with_agent.log, session=session)
    flow_without = FlowSeries.from_log(without_agent.log, session=session)
    sections_with, fits_with = _fit_sections(flow_with, realism)
    sections_without, fits_without = _fit_sections(flow_without, realism)
    report_to_json(
        {
            "with_agent": {k: v.to_dict() for k, v in sections_with.items()},
            "without_agent": {k: v.to_dict() for k, v in sections_without.items()},
            "deltas": fit_deltas(fits_without, fits_with),
        },
        out_dir / "realism.json",
    )
    print(f"paired report at {out_dir / 'realism.json'}")
    return 0


COMMANDS = {
    "replay": cmd_replay,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "realism": cmd_realism,
    "gen-data": cmd_gen_data,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lobsim",
        description="Order book simulation and execution-agent experiments.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="YAML config or a manifest.json")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--out", default=None, help="override output directory")
        cmd.add_argument("--resume", action="store_true",
                         help="continue training from the latest checkpoint")
        cmd.add_argument("--checkpoint", default=None, help="checkpoint to load")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(load_config(args.config), args.seed, args.out)
    except (OSError, yaml.YAMLError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        status = COMMANDS[args.mode](cfg, args, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if status == 0:
        write_manifest(args.mode, cfg, out_dir)
    return status


if __name__ == "__main__":
    sys.exit(main())

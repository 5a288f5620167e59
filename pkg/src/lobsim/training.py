"""Experiment orchestration: rosters, episodes, the training loop, and
paired evaluation runs.

Reproducibility contract: every stochastic stream is derived from the run
seed with a fixed stream tag and the episode index, so episode k sees the
same data and kernel behavior whether the run got there directly or through
a checkpoint resume.
"""

from __future__ import annotations

import csv
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .agents import (
    DDQLConfig,
    DDQLExecutionAgent,
    ExchangeAgent,
    LearnerState,
    MarketReplayAgent,
    MomentumAgent,
    MomentumConfig,
    TWAPConfig,
    TWAPExecutionAgent,
)
from .kernel import Agent, KernelConfig, SimTime, SimulationLog, build_kernel, seconds
from .lobster import LobsterEvent, SyntheticFlowConfig, generate_synthetic, parse_message_file
from .metrics import ExecutionComparison, execution_report
from .rl import ActionSpace, EpisodeResult

# stream tags for per-episode seed derivation
KERNEL_STREAM = 1
FLOW_STREAM = 2


def derive_seed(base_seed: int, stream: int, episode: int) -> int:
    return int(np.random.SeedSequence([base_seed, stream, episode]).generate_state(1)[0])


@dataclass
class DataSource:
    """Where each episode's background order flow comes from."""

    kind: str = "synthetic"  # "synthetic" | "lobster" | "none"
    synthetic: Optional[SyntheticFlowConfig] = None
    paths: list = field(default_factory=list)

    def validate(self) -> None:
        if self.kind == "synthetic" and self.synthetic is None:
            raise ValueError("synthetic data source needs a flow config")
        if self.kind == "lobster" and not self.paths:
            raise ValueError("lobster data source needs at least one file")
        if self.kind not in ("synthetic", "lobster", "none"):
            raise ValueError(f"unknown data source kind {self.kind!r}")

    def events_for_episode(self, episode: int, base_seed: int) -> list:
        self.validate()
        if self.kind == "none":
            return []
        if self.kind == "lobster":
            path = self.paths[episode % len(self.paths)]
            return list(parse_message_file(path))
        flow = replace(self.synthetic, seed=derive_seed(base_seed, FLOW_STREAM, episode))
        return list(generate_synthetic(flow))


@dataclass
class RunSetup:
    """Everything one experiment run needs besides the learner itself."""

    ddql: DDQLConfig
    data: DataSource
    seed: int = 0
    out_dir: Path = Path("runs")
    warmup: SimTime = seconds(60)
    post_margin: SimTime = seconds(5)
    latency_nanos: int = 1_000_000
    computation_delay_nanos: int = 0
    momentum_count: int = 6
    momentum: MomentumConfig = field(default_factory=MomentumConfig)
    include_twap_twin: bool = True
    record_quotes: bool = False
    # test hook: build additional kernel agents per episode (e.g. scripted
    # liquidity); not reachable from the CLI config format
    extra_agent_factory: Optional[Callable[[int], list]] = None

    def kernel_config(self, episode: int) -> KernelConfig:
        return KernelConfig(
            start_time=self.ddql.session_start - self.warmup,
            stop_time=self.ddql.session_end + self.post_margin,
            latency_nanos=self.latency_nanos,
            computation_delay_nanos=self.computation_delay_nanos,
            rng_seed=derive_seed(self.seed, KERNEL_STREAM, episode),
        )

    def twap_config(self) -> TWAPConfig:
        return TWAPConfig(
            parent_quantity=self.ddql.parent_quantity,
            side=self.ddql.side,
            session_start=self.ddql.session_start,
            session_end=self.ddql.session_end,
            period=self.ddql.period,
        )


@dataclass
class EpisodeOutcome:
    result: Optional[EpisodeResult]
    log: SimulationLog
    exchange: ExchangeAgent
    executor: Optional[Agent]
    twap_twin: Optional[TWAPExecutionAgent] = None


def run_episode(
    setup: RunSetup,
    episode: int,
    learner: Optional[LearnerState] = None,
    *,
    executor: str = "ddql",
    train_enabled: bool = True,
    epsilon: Optional[float] = None,
    include_twap_twin: Optional[bool] = None,
) -> EpisodeOutcome:
    """One full kernel session with the configured roster.

    executor "ddql" needs a learner; "twap" swaps the learning agent for the
    benchmark in the same roster slot so paired runs stay seed-aligned;
    "none" runs only the background roster.
    """
    events = setup.data.events_for_episode(episode, setup.seed)
    agents: list[Agent] = [ExchangeAgent(record_quotes=setup.record_quotes)]
    if events:
        agents.append(MarketReplayAgent(events))
    stagger = setup.momentum.poll_interval // max(1, setup.momentum_count)
    for i in range(setup.momentum_count):
        agents.append(MomentumAgent(replace(setup.momentum), poll_offset=i * stagger,
                                    name=f"momentum-{i}"))
    if setup.extra_agent_factory is not None:
        agents.extend(setup.extra_agent_factory(episode))
    twin = None
    if include_twap_twin is None:
        include_twap_twin = setup.include_twap_twin and executor == "ddql"
    if include_twap_twin:
        twin = TWAPExecutionAgent(setup.twap_config(), name="twap-benchmark")
        agents.append(twin)
    if executor == "ddql":
        if learner is None:
            raise ValueError("ddql executor needs a LearnerState")
        agent = DDQLExecutionAgent(setup.ddql, learner, epsilon=epsilon,
                                   train_enabled=train_enabled)
    elif executor == "twap":
        agent = TWAPExecutionAgent(setup.twap_config())
    elif executor == "none":
        agent = None
    else:
        raise ValueError(f"unknown executor {executor!r}")
    if agent is not None:
        agents.append(agent)
    kernel = build_kernel(setup.kernel_config(episode), agents)
    log = kernel.run()
    result = None
    if agent is not None:
        result = agent.result
        result.episode = episode
    return EpisodeOutcome(result, log, agents[0], agent, twin)


LEARNING_CURVE_COLUMNS = ("episode", "total_reward", "filled_quantity",
                          "slippage", "epsilon", "loss_mean")


def _curve_row(result: EpisodeResult) -> list:
    loss_mean = float(np.mean(result.losses)) if result.losses else ""
    slippage = result.slippage if result.slippage is not None else ""
    return [result.episode, result.total_reward, result.filled_quantity,
            slippage, result.final_epsilon, loss_mean]


def write_learning_curve(rows: list, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LEARNING_CURVE_COLUMNS)
        writer.writerows(rows)


def checkpoint_path(out_dir: Path, episode: int) -> Path:
    return Path(out_dir) / "checkpoints" / f"episode_{episode:04d}.ckpt"


def latest_checkpoint(out_dir: Path) -> Optional[Path]:
    folder = Path(out_dir) / "checkpoints"
    candidates = sorted(folder.glob("episode_*.ckpt")) if folder.is_dir() else []
    return candidates[-1] if candidates else None


@dataclass
class TrainOutcome:
    results: list
    learning_curve_path: Path
    last_checkpoint: Optional[Path]


class CheckpointWriteError(Exception):
    def __init__(self, cause: BaseException, last_good: Optional[Path]):
        super().__init__(f"checkpoint write failed ({cause}); last good: {last_good}")
        self.last_good = last_good


def train(setup: RunSetup, resume: bool = False) -> TrainOutcome:
    """Run the configured number of episodes, checkpointing after each one.
    With resume=True, picks up from the newest checkpoint in out_dir."""
    out_dir = Path(setup.out_dir)
    (out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    curve_path = out_dir / "learning_curve.csv"
    learner = None
    rows: list = []
    if resume:
        existing = latest_checkpoint(out_dir)
        if existing is not None:
            learner = LearnerState.load(existing, setup.ddql, setup.seed)
            rows = _read_curve_rows(curve_path, learner.episode_index)
    if learner is None:
        learner = LearnerState(setup.ddql, setup.seed)
    results = []
    last_good = latest_checkpoint(out_dir) if resume else None
    for episode in range(learner.episode_index, setup.ddql.episodes):
        learner.epsilon = setup.ddql.epsilon_for_episode(episode)
        outcome = run_episode(setup, episode, learner, executor="ddql",
                              train_enabled=True, epsilon=learner.epsilon)
        learner.episode_index = episode + 1
        path = checkpoint_path(out_dir, episode)
        try:
            learner.save(path)
            shutil.copyfile(path, out_dir / "checkpoints" / "latest.ckpt")
        except OSError as exc:
            raise CheckpointWriteError(exc, last_good) from exc
        last_good = path
        results.append(outcome.result)
        rows.append(_curve_row(outcome.result))
        write_learning_curve(rows, curve_path)
    return TrainOutcome(results, curve_path, last_good)


def _read_curve_rows(path: Path, upto_episode: int) -> list:
    if not Path(path).is_file():
        return []
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            if row and int(row[0]) < upto_episode:
                rows.append(row)
    return rows


@dataclass
class EvaluationOutcome:
    comparison: ExecutionComparison
    candidate: EpisodeOutcome
    baseline: EpisodeOutcome


def evaluate(setup: RunSetup, checkpoint: Path,
             episode: Optional[int] = None) -> EvaluationOutcome:
    """Greedy DDQL run and a TWAP run on the same episode seeds, compared."""
    learner = LearnerState.load(checkpoint, setup.ddql, setup.seed)
    index = learner.episode_index if episode is None else episode
    candidate = run_episode(setup, index, learner, executor="ddql",
                            train_enabled=False, epsilon=0.0,
                            include_twap_twin=False)
    baseline = run_episode(setup, index, None, executor="twap",
                           include_twap_twin=False)
    comparison = execution_report(candidate.result, baseline.result,
                                  ActionSpace(setup.ddql.multipliers))
    return EvaluationOutcome(comparison, candidate, baseline)


def write_action_trace(result: EpisodeResult, path: Path,
                       action_space: Optional[ActionSpace] = None) -> None:
    space = action_space or ActionSpace()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "action_index", "multiplier", "placement"])
        for period, index in enumerate(result.action_trace):
            action = space.decode(index)
            writer.writerow([period, index, action.multiplier, action.placement])

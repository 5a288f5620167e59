import shutil
from pathlib import Path

from lobsim import (
    DataSource,
    DDQLConfig,
    RunSetup,
    Side,
    SyntheticFlowConfig,
    generate_synthetic,
    run_episode,
    seconds,
    time_from_str,
    train,
)
from lobsim.agents import LearnerState
from lobsim.training import evaluate

start = time_from_str("10:00:00")
flow = SyntheticFlowConfig(
    arrival_rate_per_side=2.0,
    session_start_ns=start - seconds(60),
    session_end_ns=start + seconds(120),
    initial_mid_ticks=10_000,
    seed=3,
)
events = list(generate_synthetic(flow))
print("synthetic events:", len(events))

ddql = DDQLConfig(
    episodes=2,
    num_periods=4,
    period=seconds(30),
    session_start=start,
    session_end=start + seconds(120),
    parent_quantity=40,
    side=Side.BID,
    hidden_sizes=(8,),
    min_experience=4,
    batch_size=4,
    train_every=2,
)
setup = RunSetup(
    ddql=ddql,
    data=DataSource(kind="synthetic", synthetic=flow),
    seed=7,
    out_dir=Path("/tmp/smoke_run"),
    warmup=seconds(60),
    momentum_count=2,
    include_twap_twin=True,
)

shutil.rmtree("/tmp/smoke_run", ignore_errors=True)

outcome = run_episode(setup, 0, executor="none", include_twap_twin=False)
print("background-only deliveries:", len(outcome.log.records))
print("book depth lines:", len(outcome.exchange.book.depth_csv().splitlines()))

result = train(setup)
for r in result.results:
    print(f"episode {r.episode}: reward={r.total_reward:.4f} filled={r.filled_quantity}/"
          f"{r.parent_quantity} partial={r.partial} trains={r.train_steps} "
          f"syncs={r.target_syncs} eps={r.final_epsilon}")
print("last checkpoint:", result.last_checkpoint)

ev = evaluate(setup, result.last_checkpoint)
print("trace distance:", ev.comparison.action_trace_distance)
print("candidate:", ev.comparison.candidate)
print("baseline:", ev.comparison.baseline)

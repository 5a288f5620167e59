import filecmp
import shutil
from pathlib import Path

from lobsim import DataSource, DDQLConfig, RunSetup, Side, SyntheticFlowConfig, seconds, time_from_str, train

start = time_from_str("10:00:00")
flow = SyntheticFlowConfig(
    arrival_rate_per_side=2.0,
    session_start_ns=start - seconds(60),
    session_end_ns=start + seconds(120),
    initial_mid_ticks=10_000,
    seed=3,
)
def make_setup(out):
    return RunSetup(
        ddql=DDQLConfig(
            episodes=3, num_periods=4, period=seconds(30),
            session_start=start, session_end=start + seconds(120),
            parent_quantity=40, side=Side.BID, hidden_sizes=(8,),
            min_experience=4, batch_size=4, train_every=2,
        ),
        data=DataSource(kind="synthetic", synthetic=flow),
        seed=7, out_dir=Path(out), warmup=seconds(60), momentum_count=2,
    )

for out in ("/tmp/repro_a", "/tmp/repro_b"):
    shutil.rmtree(out, ignore_errors=True)
    train(make_setup(out))

a, b = Path("/tmp/repro_a"), Path("/tmp/repro_b")
files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
all_same = True
for rel in files:
    same = filecmp.cmp(a / rel, b / rel, shallow=False)
    all_same &= same
    print(f"{'OK ' if same else 'DIFF'} {rel}")
print("byte-identical:", all_same)

# resume-equivalence: train 1 episode, resume for the rest, compare to full run
shutil.rmtree("/tmp/repro_c", ignore_errors=True)
setup_c = make_setup("/tmp/repro_c")
setup_c.ddql.episodes = 1
train(setup_c)
setup_c2 = make_setup("/tmp/repro_c")
train(setup_c2, resume=True)
c = Path("/tmp/repro_c")
resume_same = all(
    filecmp.cmp(a / rel, c / rel, shallow=False)
    for rel in files
    if (c / rel).is_file()
)
print("resume-equivalent:", resume_same,
      "(files compared:", sum(1 for rel in files if (c / rel).is_file()), ")")

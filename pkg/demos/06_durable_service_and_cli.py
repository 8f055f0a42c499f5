"""
Durable experiment store: crash recovery and the portfolio overview
===================================================================

The HTTP service persists every accepted event to an append-only log before
acknowledging it, so a crash loses nothing: reopening the data directory
replays the log into byte-identical state.  This script drives the store
in process (the HTTP layer adds nothing statistical), crashes it, recovers,
and prints the cross-experiment overview the dashboard polls.

The command-line equivalents are listed at the bottom.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from avstats.engine import BernoulliTwoStream, MixtureSpec
from avstats.service.store import ExperimentConfig, ExperimentStore

rng = np.random.default_rng(7)
root = Path(tempfile.mkdtemp(prefix="avstats-demo-"))

RATES = {"checkout-copy": (0.50, 0.50),    # A/A
         "new-ranker": (0.50, 0.56),       # real winner
         "onboarding-flow": (0.40, 0.40)}  # A/A

store = ExperimentStore(root, snapshot_every=64)
for name in RATES:
    store.create_experiment(ExperimentConfig(
        id=name, model=BernoulliTwoStream(), mixture=MixtureSpec(tau_sq=0.1),
        levels=(0.9, 0.95, 0.99), metadata={"owner": "growth"}))

# Stream five thousand events per experiment in uneven batches, tagging each
# row with a unit id the way an ingestion pipeline would.
unit = 0
for name, (p_c, p_t) in RATES.items():
    sent = 0
    while sent < 5000:
        size = int(rng.integers(1, 200))
        rows = []
        for _ in range(size):
            arm = "control" if rng.random() < 0.5 else "treatment"
            p = p_c if arm == "control" else p_t
            rows.append((f"u{unit}", arm, float(rng.random() < p)))
            unit += 1
        store.ingest_batch(name, rows)
        sent += size

snap_before = {name: store.get_snapshot(name) for name in RATES}
print("state before the crash:")
for name, s in snap_before.items():
    print(f"  {name:>16}: n={s['total_observations']:>5}  p={s['p_value']:.3e}"
          f"  95% CI={s['ci_by_level']['0.95']}")

# Simulate a crash: drop the object without any shutdown hook and reopen the
# directory.  Recovery replays the write-ahead log (plus the latest snapshot
# file if one exists) and must land on the identical state.
del store
recovered = ExperimentStore(root, snapshot_every=64)
identical = all(
    json.dumps(recovered.get_snapshot(n), sort_keys=True)
    == json.dumps(snap_before[n], sort_keys=True)
    for n in RATES
)
print(f"\nrecovered from {root}: snapshots byte-identical = {identical}")

# The overview joins every experiment's live p-value through a multiplicity
# correction and, with fcr=True, reports selection-adjusted interval levels.
view = recovered.overview(alpha=0.05, procedure="bh-independent", fcr=True)
print(f"\noverview at alpha=0.05 ({view['procedure']}):")
for row in view["rows"]:
    ci = row["ci"]
    print(f"  {row['id']:>16}: p={row['p_value']:.3e} q={row['q_value']:.3f}"
          f" rejected={str(row['rejected']):>5}"
          f" level={row['ci_level']:.4f} ci=[{ci[0]:+.4f}, {ci[1]:+.4f}]")

# Freeze the winner at its always-valid decision and verify the stop survives
# a second crash cycle.
stopped = recovered.stop_experiment("new-ranker", alpha=0.05, actor="demo")
del recovered
again = ExperimentStore(root)
print(f"\nstopped 'new-ranker': rejected={stopped['rejected']},"
      f" persisted status={again.get_snapshot('new-ranker')['status']}")

# The same store backs the CLI and the HTTP service:
#   avstats analyze obs.csv --tau-sq 0.1 --out inference.csv
#   avstats simulate always-valid --reps 2000
#   avstats serve --config service.conf
print("\nCLI analyze on a four-row CSV:")
csv_path = root / "obs.csv"
csv_path.write_text(
    "timestamp,variation,value\n"
    "1,control,0\n2,treatment,1\n3,control,1\n4,treatment,1\n"
)
out_path = root / "inference.csv"
subprocess.run(
    [sys.executable, "-m", "avstats.cli", "analyze", str(csv_path),
     "--tau-sq", "0.1", "--out", str(out_path)],
    capture_output=True, text=True, check=True)
print(out_path.read_text())

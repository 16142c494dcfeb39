"""Run a study from a config file and tabulate it by strategy and composition."""
import sys
from collections import defaultdict

import numpy as np

from groupteach.config import load_config
from groupteach.study import run_study

path = sys.argv[1] if len(sys.argv) > 1 else "configs/quick.toml"
config = load_config(path)
records = run_study(config)

cells = defaultdict(list)
for r in records:
    cells[r.strategy, r.composition].append(r)

print(f"{'strategy':16s} {'team':5s} {'N_i':>6s} {'knowledge':>10s} {'area':>7s}")
for (strat, comp), rs in cells.items():
    print(f"{strat:16s} {comp:5s} {np.mean([r.n_interactions for r in rs]):6.2f} "
          f"{np.mean([r.team_knowledge for r in rs]):10.3f} {np.nanmean([r.mean_demo_area for r in rs]):7.3f}")

base = [r.n_interactions for r in records if r.strategy == "baseline"]
group = [r.n_interactions for r in records if r.strategy != "baseline"]
if base and group:
    print(f"\nbaseline / group interactions: {np.mean(base) / np.mean(group):.2f}")

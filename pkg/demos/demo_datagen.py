"""Generate (erroneous, clean) map pairs with seeded error injection."""

from pathlib import Path

import numpy as np

from lidargrid import ErrorSpec, generate_dataset, render_pair
from lidargrid.datagen import plan_trajectory
from lidargrid.grid import OCCUPIED
from lidargrid.synthetic import floorplan_columns, floorplan_tiny

# one pair, dialed-up errors, to see each artefact class at work
fp = floorplan_columns()
traj = plan_trajectory(fp, seed=3)
arc = float(np.linalg.norm(np.diff(traj[:, :2], axis=0), axis=1).sum())
spec = ErrorSpec(angular_drift=1.5 / arc,     # 1.5 deg accumulated
                 linear_drift=0.1 / arc,      # 10 cm accumulated
                 speckle_rate=0.03, passthrough_rate=0.3,
                 dropout_arc=40.0, partial_coverage=0.9, seed=99)
pair = render_pair(fp, traj, spec)
n_clean = (pair.clean.codes == OCCUPIED).sum()
n_err = (pair.erroneous.codes == OCCUPIED).sum()
print(f"single pair: clean has {n_clean} occupied cells, "
      f"erroneous {n_err} ({n_err / n_clean:.2f}x)")

# a small dataset written to disk, reproducible per seed
out = generate_dataset([("tiny1", floorplan_tiny(variant=1)),
                        ("tiny2", floorplan_tiny(variant=2))],
                       count=6, out_dir="demo_dataset", seed=5)
files = sorted(p.name for p in (Path(out) / "pairs").glob("*.pgm"))
print(f"dataset under {out}: {len(files)} rasters")
print("manifest:")
print((Path(out) / "manifest.csv").read_text().strip())

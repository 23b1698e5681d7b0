"""Map cleaning stage: filtration, floating-point removal, morphological
cleaner, and the effect on IoU against the clean reference.

The error spec is deliberately heavy; the generator's sanity-band warning
firing is part of the show.
"""

import numpy as np

from lidargrid import ErrorSpec, iou, remove_floating_points
from lidargrid.cleaner import MorphologicalCleaner, clean_map
from lidargrid.datagen import ScanSim2D, plan_trajectory, render_pair
from lidargrid.synthetic import floorplan_columns

fp = floorplan_columns()
traj = plan_trajectory(fp, seed=11)
arc = float(np.linalg.norm(np.diff(traj[:, :2], axis=0), axis=1).sum())
spec = ErrorSpec(speckle_rate=0.03, dropout_arc=25.0,
                 angular_drift=0.4 / arc, seed=17)
pair = render_pair(fp, traj, spec, sim=ScanSim2D(n_rays=240, max_range=12.0))

base = iou(pair.erroneous, pair.clean, cls="unoccupied")
print(f"raw erroneous map:       unoccupied IoU {base:.3f}")

despeckled = remove_floating_points(pair.erroneous)
step1 = iou(despeckled, pair.clean, cls="unoccupied")
print(f"after floating-point removal:        {step1:.3f}")

cleaned = clean_map(despeckled, MorphologicalCleaner())
step2 = iou(cleaned, pair.clean, cls="unoccupied")
print(f"after morphological cleaning:        {step2:.3f}")

changed = int((cleaned.codes != pair.erroneous.codes).sum())
print(f"{changed} cells changed; every output value is in "
      f"{sorted(np.unique(cleaned.codes).tolist())}")

"""Seeded procedural generation of (erroneous, clean) occupancy map pairs.

The erroneous member of each pair reproduces the classic 2D SLAM failure
modes: accumulated linear/angular drift, speckle noise, rays that sail
through thin obstacles (glass/doorways), per-scan dropout sectors, and
partially executed trajectories. Measurement happens in the true world
frame; painting happens in the drifted frame, which is exactly how a
drifting odometry corrupts a map.
"""

import csv
import logging
from collections import deque
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np
from scipy import ndimage

log = logging.getLogger(__name__)

from . import raycast
from .grid import FREE, OCCUPIED, UNKNOWN, DiscreteMap, save_pgm

MIN_FREE_REGION = 100  # cells; smallest region that counts as traversable


class NonTraversableError(ValueError):
    pass


class PlanningError(RuntimeError):
    pass


@dataclass
class FloorplanRaster:
    occupied: np.ndarray  # bool (H, W)
    resolution: float     # meters per cell

    def __post_init__(self):
        self.occupied = np.asarray(self.occupied, dtype=bool)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def shape(self):
        return self.occupied.shape

    def free_regions(self):
        labels, count = ndimage.label(~self.occupied)
        return labels, count

    def largest_free_region(self):
        labels, count = self.free_regions()
        if count == 0:
            return np.zeros(self.shape, dtype=bool)
        sizes = ndimage.sum_labels(np.ones(self.shape), labels, np.arange(1, count + 1))
        return labels == (int(np.argmax(sizes)) + 1)

    def check_traversable(self):
        region = self.largest_free_region()
        if region.sum() < MIN_FREE_REGION:
            raise NonTraversableError(
                f"largest free region has {int(region.sum())} cells, "
                f"need >= {MIN_FREE_REGION}")
        return region


def load_floorplan(path, resolution=0.05):
    """Single-channel PNG/PGM -> FloorplanRaster; pixels < 128 are occupied."""
    from PIL import Image

    img = Image.open(path)
    if img.mode not in ("L", "1", "I", "I;16"):
        raise ValueError(f"{path}: expected a single-channel image, got mode {img.mode}")
    arr = np.asarray(img.convert("L"))
    fp = FloorplanRaster(arr < 128, resolution)
    fp.check_traversable()
    return fp


def _los_free(free, a, b):
    """Straight-segment visibility between cell centers over the free mask."""
    from .raycast import supercover_line
    for r, c in supercover_line(a[0], a[1], b[0], b[1]):
        if not free[r, c]:
            return False
    return True


def _bfs_path(free, start, goal):
    h, w = free.shape
    start, goal = tuple(start), tuple(goal)
    prev = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            path = []
            while cur is not None:
                path.append(cur)
                cur = prev[cur]
            return path[::-1]
        r, c = cur
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and free[nr, nc] and (nr, nc) not in prev:
                prev[(nr, nc)] = cur
                queue.append((nr, nc))
    return None


def _coverage(fp, poses, max_range_m=25.0, pose_stride=5, n_rays=120):
    """Fraction of reachable free cells visible from the trajectory."""
    occ = fp.occupied
    thin = np.zeros_like(occ)
    free_mask = np.zeros_like(occ)
    hit_mask = np.zeros_like(occ)
    angles = np.linspace(0.0, 2.0 * np.pi, n_rays, endpoint=False) + 0.003
    cos_a, sin_a = np.cos(angles), np.sin(angles)
    trans = np.zeros(n_rays, dtype=bool)
    max_t = max_range_m / fp.resolution
    for pose in poses[::pose_stride]:
        raycast.render_scan_rays(occ, thin, pose[0] / fp.resolution,
                                 pose[1] / fp.resolution, cos_a, sin_a,
                                 trans, max_t, free_mask, hit_mask)
    reachable = fp.largest_free_region()
    visible = int((free_mask & reachable).sum())
    return visible / max(int(reachable.sum()), 1)


def plan_trajectory(fp, seed, waypoint_spacing=1.5, step=0.25, min_coverage=0.6):
    """Collision-free waypoint tour of the floorplan's free space.

    Waypoints sit on a lattice over the (eroded) reachable free region,
    ordered greedily nearest-first from a seeded start, connected by
    line-of-sight segments with BFS fallback. Returns (N, 3) poses
    [x, y, yaw] in meters/radians, deterministic per seed.
    """
    fp.check_traversable()
    rng = np.random.default_rng(seed)
    reachable = fp.largest_free_region()
    interior = ndimage.binary_erosion(reachable, np.ones((3, 3)))
    if not interior.any():
        interior = reachable
    res = fp.resolution

    for spacing in (waypoint_spacing, waypoint_spacing / 2.0):
        sp = max(2, int(round(spacing / res)))
        lattice = np.zeros(fp.shape, dtype=bool)
        lattice[sp // 2::sp, sp // 2::sp] = True
        waypoints = np.argwhere(interior & lattice)
        if len(waypoints) < 2:
            waypoints = np.argwhere(interior)[::max(1, interior.sum() // 32)]
        if len(waypoints) < 2:
            raise PlanningError("not enough room for waypoints")

        order = [int(rng.integers(len(waypoints)))]
        remaining = set(range(len(waypoints))) - set(order)
        while remaining:
            last = waypoints[order[-1]]
            rest = np.array(sorted(remaining))
            d = np.abs(waypoints[rest] - last).sum(axis=1)
            nxt = int(rest[int(np.argmin(d))])
            order.append(nxt)
            remaining.discard(nxt)

        cells = [tuple(waypoints[order[0]])]
        ok = True
        for i in range(1, len(order)):
            a, b = cells[-1], tuple(waypoints[order[i]])
            if _los_free(reachable, a, b):
                # straight leg: sample the supercover cells
                leg = raycast.supercover_line(a[0], a[1], b[0], b[1])[1:]
            else:
                path = _bfs_path(reachable, a, b)
                if path is None:
                    ok = False
                    break
                leg = path[1:]
            cells.extend(leg)
        if not ok:
            continue

        stride = max(1, int(round(step / res)))
        sampled = cells[::stride]
        if sampled[-1] != cells[-1]:
            sampled.append(cells[-1])
        pts = (np.array(sampled, dtype=float)[:, ::-1] + 0.5) * res  # (x, y)
        yaw = np.zeros(len(pts))
        if len(pts) > 1:
            d = np.diff(pts, axis=0)
            yaw[:-1] = np.arctan2(d[:, 1], d[:, 0])
            yaw[-1] = yaw[-2]
        poses = np.column_stack([pts, yaw])
        if _coverage(fp, poses) >= min_coverage:
            return poses
    raise PlanningError(f"could not reach {min_coverage:.0%} sightline coverage")


@dataclass
class ErrorSpec:
    """Per-pair error injection magnitudes; rates in [0, 1], drifts >= 0."""

    linear_drift: float = 0.0    # meters of offset per meter traveled
    angular_drift: float = 0.0   # degrees of yaw per meter traveled
    speckle_rate: float = 0.0    # flip probability per observed cell
    passthrough_rate: float = 0.0  # probability per ray of ignoring thin walls
    dropout_arc: float = 0.0     # degrees of occluded sector per scan
    partial_coverage: float = 1.0  # fraction of the trajectory executed
    seed: int = 0

    def __post_init__(self):
        for name in ("speckle_rate", "passthrough_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.linear_drift < 0 or self.angular_drift < 0:
            raise ValueError("drift rates must be >= 0")
        if not 0.0 < self.partial_coverage <= 1.0:
            raise ValueError("partial_coverage must be in (0, 1]")
        if not 0.0 <= self.dropout_arc <= 360.0:
            raise ValueError("dropout_arc must be in [0, 360] degrees")

    def is_zero(self):
        return (self.linear_drift == 0 and self.angular_drift == 0
                and self.speckle_rate == 0 and self.passthrough_rate == 0
                and self.dropout_arc == 0 and self.partial_coverage == 1.0)


@dataclass
class ScanSim2D:
    n_rays: int = 240
    max_range: float = 15.0

    def __post_init__(self):
        # with the half-bin offset, ray counts of 8k+4 put rays exactly on
        # diagonals and 4k+2 exactly on axes; both make grid traversal
        # ambiguous at lattice corners
        if self.n_rays % 8 == 4 or self.n_rays % 4 == 2:
            raise ValueError("n_rays must not be 2 mod 4 or 4 mod 8")

    def ray_angles(self):
        # half-bin offset keeps rays off exact axis/diagonal directions
        return -np.pi + (np.arange(self.n_rays) + 0.5) * (2.0 * np.pi / self.n_rays)


@dataclass
class DatasetPair:
    erroneous: DiscreteMap
    clean: DiscreteMap
    provenance: dict


def _run_lengths(mask, axis):
    """Length of the contiguous run each True cell belongs to, along axis."""
    m = mask if axis == 1 else mask.T
    h, w = m.shape
    starts = m.copy()
    starts[:, 1:] &= ~m[:, :-1]
    rid = np.cumsum(starts.reshape(-1)).reshape(h, w)
    lengths = np.bincount(rid[m], minlength=int(rid.max()) + 1)
    out = np.zeros((h, w), dtype=np.int64)
    out[m] = lengths[rid[m]]
    return out if axis == 1 else out.T


def thin_obstacles(occupied):
    """Occupied cells belonging to a run of width <= 2 along x or y."""
    if not occupied.any():
        return np.zeros_like(occupied)
    along_x = _run_lengths(occupied, axis=1)
    along_y = _run_lengths(occupied, axis=0)
    return occupied & (((along_x > 0) & (along_x <= 2)) | ((along_y > 0) & (along_y <= 2)))


def drifted_poses(poses, spec, rng):
    """Apply accumulated drift: yaw error and along-heading offset grow
    linearly with arc length, signs seeded once per pair."""
    poses = np.asarray(poses, dtype=float)
    sign_a = rng.choice((-1.0, 1.0))
    sign_l = rng.choice((-1.0, 1.0))
    steps = np.linalg.norm(np.diff(poses[:, :2], axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(steps)])
    yaw_err = sign_a * np.radians(spec.angular_drift) * arc
    lin_err = sign_l * spec.linear_drift * arc
    out = poses.copy()
    out[:, 0] += lin_err * np.cos(poses[:, 2])
    out[:, 1] += lin_err * np.sin(poses[:, 2])
    out[:, 2] += yaw_err
    return out


def _paint_map(fp, true_poses, paint_poses, spec, rng, sim):
    """Measure rays in the true frame, paint them in the (possibly drifted)
    paint frame; returns a {0,100,255} code raster."""
    occ = fp.occupied
    thin = thin_obstacles(occ) if spec.passthrough_rate > 0 else np.zeros_like(occ)
    res = fp.resolution
    max_t = sim.max_range / res
    base_angles = sim.ray_angles()
    free_mask = np.zeros(fp.shape, dtype=bool)
    hit_mask = np.zeros(fp.shape, dtype=bool)
    for true_pose, paint_pose in zip(true_poses, paint_poses):
        keep = np.ones(sim.n_rays, dtype=bool)
        if spec.dropout_arc > 0:
            start = rng.uniform(0.0, 2.0 * np.pi)
            rel = np.mod(base_angles - start, 2.0 * np.pi)
            keep = rel >= np.radians(spec.dropout_arc)
        if spec.passthrough_rate > 0:
            trans = rng.uniform(size=sim.n_rays) < spec.passthrough_rate
        else:
            trans = np.zeros(sim.n_rays, dtype=bool)
        angles_true = base_angles[keep] + true_pose[2]
        t_hit = raycast.measure_ranges(
            occ, thin, true_pose[0] / res, true_pose[1] / res,
            np.cos(angles_true), np.sin(angles_true), trans[keep], max_t)
        angles_paint = base_angles[keep] + paint_pose[2]
        raycast.paint_rays(
            paint_pose[0] / res, paint_pose[1] / res,
            np.cos(angles_paint), np.sin(angles_paint), t_hit, max_t,
            free_mask, hit_mask)
    codes = np.full(fp.shape, UNKNOWN, dtype=np.uint8)
    codes[free_mask] = FREE
    codes[hit_mask] = OCCUPIED  # occupied wins over free
    return codes


def render_pair(fp, traj, spec, sim=None):
    """Render the (erroneous, clean) pair for one trajectory.

    The clean member is the exact ray-cast map from the drift-free
    trajectory; the erroneous member re-renders with drifted painting
    poses, passthrough, dropout, partial coverage, and speckle.
    Deterministic per spec.seed.
    """
    sim = sim or ScanSim2D()
    traj = np.asarray(traj, dtype=float)
    zero = ErrorSpec()
    clean_codes = _paint_map(fp, traj, traj, zero, None, sim)
    clean = DiscreteMap(clean_codes, fp.resolution)

    if spec.is_zero():
        err = DiscreteMap(clean_codes.copy(), fp.resolution)
    else:
        rng = np.random.default_rng(spec.seed)
        n_used = max(1, int(np.ceil(spec.partial_coverage * len(traj))))
        used = traj[:n_used]
        painted = drifted_poses(used, spec, rng)
        codes = _paint_map(fp, used, painted, spec, rng, sim)
        if spec.speckle_rate > 0:
            observed = codes != UNKNOWN
            flip = observed & (rng.uniform(size=codes.shape) < spec.speckle_rate)
            flipped = codes.copy()
            flipped[flip & (codes == FREE)] = OCCUPIED
            flipped[flip & (codes == OCCUPIED)] = FREE
            codes = flipped
        err = DiscreteMap(codes, fp.resolution)
    n_clean = int((clean.codes == OCCUPIED).sum())
    n_err = int((err.codes == OCCUPIED).sum())
    if n_clean and not 0.3 * n_clean <= n_err <= 3.0 * n_clean:
        log.warning("degenerate error spec: occupied count %d vs clean %d "
                    "outside the [0.3x, 3x] sanity band", n_err, n_clean)
    provenance = {"error_spec": spec}
    return DatasetPair(err, clean, provenance)


@dataclass
class ErrorSpecRanges:
    """Uniform sampling ranges for dataset generation. These defaults are
    artifact choices, not published values.

    Drift is sampled as a per-pair TOTAL budget (meters / degrees
    accumulated over the whole trajectory) and converted to the per-meter
    rates ErrorSpec carries; per-meter sampling would make degeneracy scale
    with tour length, and the occupied-count sanity band flags exactly that.
    """

    linear_drift_total: tuple = (0.0, 0.05)  # meters at the trajectory end
    angular_drift_total: tuple = (0.0, 0.4)  # degrees at the trajectory end
    speckle_rate: tuple = (0.0, 0.006)
    passthrough_rate: tuple = (0.0, 0.15)
    dropout_arc: tuple = (0.0, 45.0)
    partial_coverage: tuple = (0.85, 1.0)

    def sample(self, rng, arc_length):
        kwargs = {}
        arc = max(arc_length, 1e-6)
        for f in dc_fields(self):
            lo, hi = getattr(self, f.name)
            value = float(rng.uniform(lo, hi))
            if f.name.endswith("_total"):
                kwargs[f.name[:-len("_total")]] = value / arc
            else:
                kwargs[f.name] = value
        return kwargs


MANIFEST_COLUMNS = ("id", "floorplan", "seed", "linear_drift", "angular_drift",
                    "speckle_rate", "passthrough_rate", "dropout_arc",
                    "partial_coverage")


def generate_dataset(floorplans, count, out_dir, ranges=None, seed=0, sim=None,
                     resolution=0.05):
    """Write `count` map pairs plus a manifest under out_dir.

    floorplans: directory of PNG/PGM files, or a list of (name,
    FloorplanRaster). Each pair draws its own random stream from
    (seed, pair id), so output is reproducible and order-independent.
    """
    if isinstance(floorplans, (str, Path)):
        paths = sorted(p for p in Path(floorplans).iterdir()
                       if p.suffix.lower() in (".png", ".pgm"))
        if not paths:
            raise FileNotFoundError(f"no floorplans under {floorplans}")
        loaded = [(p.stem, load_floorplan(p, resolution)) for p in paths]
    else:
        loaded = list(floorplans)
        if not loaded:
            raise ValueError("need at least one floorplan")
    ranges = ranges or ErrorSpecRanges()
    out_dir = Path(out_dir)
    pairs_dir = out_dir / "pairs"
    pairs_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        name, fp = loaded[i % len(loaded)]
        traj = plan_trajectory(fp, seed=int(rng.integers(2 ** 62)))
        arc = float(np.linalg.norm(np.diff(traj[:, :2], axis=0), axis=1).sum())
        spec = ErrorSpec(**ranges.sample(rng, arc), seed=int(rng.integers(2 ** 62)))
        pair = render_pair(fp, traj, spec, sim=sim)
        pid = f"{i:05d}"
        save_pgm(pair.erroneous, pairs_dir / f"{pid}_err.pgm")
        save_pgm(pair.clean, pairs_dir / f"{pid}_clean.pgm")
        rows.append([pid, name, spec.seed,
                     f"{spec.linear_drift:.9g}", f"{spec.angular_drift:.9g}",
                     f"{spec.speckle_rate:.9g}", f"{spec.passthrough_rate:.9g}",
                     f"{spec.dropout_arc:.9g}", f"{spec.partial_coverage:.9g}"])
    with open(out_dir / "manifest.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)
    return out_dir

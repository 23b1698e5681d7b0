"""Evidence-based occupancy grid, filtration rules, trajectory record, PGM I/O.

Cell codes follow the 0/100/255 convention: 0 unoccupied, 100 occupied,
255 unexplored. The evidence grid accumulates log-odds; filtration maps
likelihoods onto the three codes and floating-point removal deletes cells
with too few same-valued 4-neighbors.
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import raycast
from .projection import scan2d_to_endpoints
from .se3 import PoseSE3

FREE = 0
OCCUPIED = 100
UNKNOWN = 255
CODES = (FREE, OCCUPIED, UNKNOWN)


class NotDiscretizedError(ValueError):
    pass


class OutOfOrderError(ValueError):
    pass


class CoverageGapError(ValueError):
    pass


@dataclass
class FiltrationConfig:
    """Thresholds for input/output filtration and floating-point removal.

    t1/t2/t3 drive the input case table, t1_out/t2_out the output one.
    """

    t1: float = 0.12
    t2: float = 0.93
    t3: float = 0.96
    t1_out: float = 0.21
    t2_out: float = 0.86
    neighbor_min: int = 3
    c1: int = FREE
    c2: int = OCCUPIED
    c3: int = UNKNOWN

    def __post_init__(self):
        if not (0.0 < self.t1 < self.t2 < self.t3 < 1.0):
            raise ValueError("need 0 < t1 < t2 < t3 < 1")
        if not (0.0 < self.t1_out < self.t2_out < 1.0):
            raise ValueError("need 0 < t1_out < t2_out < 1")
        if self.neighbor_min < 1:
            raise ValueError("neighbor_min must be >= 1")


@dataclass
class GridConfig:
    """Evidence grid geometry and inverse sensor model."""

    resolution: float = 0.05
    l_hit: float = 0.85
    l_miss: float = -0.4
    clamp_lo: float = -4.0
    clamp_hi: float = 4.0

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.l_hit <= 0 or self.l_miss >= 0:
            raise ValueError("l_hit must be positive and l_miss negative")
        if self.clamp_lo >= 0 or self.clamp_hi <= 0:
            raise ValueError("clamp range must straddle zero")


class OccupancyGrid:
    """Log-odds evidence grid. origin is the world position of cell (0, 0);
    col <-> x, row <-> y, both increasing with the world axis."""

    def __init__(self, config=None, origin=(0.0, 0.0), shape=(64, 64)):
        self.config = config or GridConfig()
        self.origin = (float(origin[0]), float(origin[1]))
        h, w = shape
        self.log_odds = np.zeros((h, w))
        self.observed = np.zeros((h, w), dtype=bool)
        self.intensity_sum = np.zeros((h, w))
        self.intensity_count = np.zeros((h, w), dtype=np.int64)

    @property
    def height(self):
        return self.log_odds.shape[0]

    @property
    def width(self):
        return self.log_odds.shape[1]

    @property
    def resolution(self):
        return self.config.resolution

    def likelihood(self):
        return 1.0 / (1.0 + np.exp(-self.log_odds))

    def mean_intensity(self):
        with np.errstate(invalid="ignore"):
            return np.where(self.intensity_count > 0,
                            self.intensity_sum / np.maximum(self.intensity_count, 1),
                            0.0)

    def world_to_cell(self, xy):
        """(x, y) world -> (row, col); vectorized for (N, 2) input."""
        xy = np.asarray(xy, dtype=float)
        col = np.floor((xy[..., 0] - self.origin[0]) / self.resolution).astype(np.int64)
        row = np.floor((xy[..., 1] - self.origin[1]) / self.resolution).astype(np.int64)
        return row, col

    def cell_to_world(self, row, col):
        """Center of cell (row, col) in world coordinates."""
        x = self.origin[0] + (np.asarray(col) + 0.5) * self.resolution
        y = self.origin[1] + (np.asarray(row) + 0.5) * self.resolution
        return x, y

    def _grow(self, pad_top, pad_bottom, pad_left, pad_right):
        def pad(a, fill=0):
            return np.pad(a, ((pad_top, pad_bottom), (pad_left, pad_right)),
                          constant_values=fill)

        self.log_odds = pad(self.log_odds)
        self.observed = pad(self.observed, False)
        self.intensity_sum = pad(self.intensity_sum)
        self.intensity_count = pad(self.intensity_count)
        self.origin = (self.origin[0] - pad_left * self.resolution,
                       self.origin[1] - pad_top * self.resolution)

    def expand_to_include(self, rows, cols):
        """Grow by doubling until every (row, col) index is inside bounds.
        Cell world coordinates are invariant across expansion."""
        rows = np.atleast_1d(rows)
        cols = np.atleast_1d(cols)
        rmin, rmax = int(rows.min()), int(rows.max())
        cmin, cmax = int(cols.min()), int(cols.max())
        pad_top = pad_bottom = pad_left = pad_right = 0
        h, w = self.height, self.width
        while rmin + pad_top < 0:
            pad_top += max(h, -(rmin + pad_top))
        while rmax >= h + pad_bottom:
            pad_bottom += max(h, rmax - (h + pad_bottom) + 1)
        while cmin + pad_left < 0:
            pad_left += max(w, -(cmin + pad_left))
        while cmax >= w + pad_right:
            pad_right += max(w, cmax - (w + pad_right) + 1)
        if pad_top or pad_bottom or pad_left or pad_right:
            self._grow(pad_top, pad_bottom, pad_left, pad_right)
        return pad_top, pad_left


def integrate_scan(grid, scan, pose):
    """Fold one projected scan into the evidence grid at the given pose.

    Every traversed cell gets l_miss, each endpoint cell l_hit (clamped);
    the grid auto-expands when an endpoint falls outside the current bounds.
    Returns the (mutated) grid.
    """
    if not pose.is_finite():
        raise ValueError("pose must be finite")
    endpoints = scan2d_to_endpoints(scan, pose)
    if endpoints.shape[0] == 0:
        return grid
    erow, ecol = grid.world_to_cell(endpoints[:, :2])
    srow, scol = grid.world_to_cell(pose.translation[:2])
    pad_top, pad_left = grid.expand_to_include(
        np.append(erow, srow), np.append(ecol, scol))
    erow += pad_top
    ecol += pad_left
    srow += pad_top
    scol += pad_left
    cfg = grid.config
    raycast.integrate_rays(
        grid.log_odds, grid.observed, grid.intensity_sum, grid.intensity_count,
        int(srow), int(scol),
        erow.astype(np.int64), ecol.astype(np.int64),
        np.ascontiguousarray(endpoints[:, 2]),
        cfg.l_hit, cfg.l_miss, cfg.clamp_lo, cfg.clamp_hi)
    return grid


@dataclass
class DiscreteMap:
    """Tri-valued raster {0, 100, 255} plus the metadata needed to place it."""

    codes: np.ndarray
    resolution: float
    origin: tuple = (0.0, 0.0, 0.0)  # x, y, yaw of cell (0, 0)
    thresholds: Optional[FiltrationConfig] = None

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.uint8)

    @property
    def shape(self):
        return self.codes.shape

    def copy(self):
        return DiscreteMap(self.codes.copy(), self.resolution,
                           self.origin, self.thresholds)

    def validate_discretized(self):
        if not np.isin(self.codes, CODES).all():
            bad = np.unique(self.codes[~np.isin(self.codes, CODES)])
            raise NotDiscretizedError(f"cell values outside {{0,100,255}}: {bad[:8]}")


def input_filter_values(likelihood, cfg):
    """Case table for evidence likelihoods: <t1 -> 0, [t2, t3] -> 100,
    everything else (the low-confidence band and >t3) -> 255."""
    like = np.asarray(likelihood, dtype=float)
    codes = np.full(like.shape, cfg.c3, dtype=np.uint8)
    codes[like < cfg.t1] = cfg.c1
    codes[(like >= cfg.t2) & (like <= cfg.t3)] = cfg.c2
    return codes


def output_filter_values(values, cfg):
    """Case table for cleaner output in [0, 1]: <t1' -> 0, [t1', t2'] -> 100,
    >t2' -> 255."""
    v = np.asarray(values, dtype=float)
    codes = np.full(v.shape, cfg.c3, dtype=np.uint8)
    codes[v < cfg.t1_out] = cfg.c1
    codes[(v >= cfg.t1_out) & (v <= cfg.t2_out)] = cfg.c2
    return codes


def input_filter(grid, cfg=None):
    """Discretize an evidence grid; unobserved cells render as 255.

    Applying it to an already-discretized map is the identity (the filter
    is a projection; its image is a fixed point).
    """
    cfg = cfg or FiltrationConfig()
    if isinstance(grid, DiscreteMap):
        grid.validate_discretized()
        out = grid.copy()
        out.thresholds = cfg
        return out
    codes = input_filter_values(grid.likelihood(), cfg)
    codes[~grid.observed] = cfg.c3
    return DiscreteMap(codes, grid.resolution,
                       (grid.origin[0], grid.origin[1], 0.0), cfg)


def output_filter(values_or_map, cfg=None, resolution=None, origin=(0.0, 0.0, 0.0)):
    """Discretize a cleaner-produced raster. Accepts a float array in [0, 1]
    (resolution/origin supplied separately) or a DiscreteMap, whose codes are
    re-fed as code/255 — a genuine fixed point for the default thresholds."""
    cfg = cfg or FiltrationConfig()
    if isinstance(values_or_map, DiscreteMap):
        codes = output_filter_values(values_or_map.codes.astype(float) / 255.0, cfg)
        return DiscreteMap(codes, values_or_map.resolution, values_or_map.origin, cfg)
    if resolution is None:
        raise ValueError("resolution required for a bare raster")
    codes = output_filter_values(values_or_map, cfg)
    return DiscreteMap(codes, resolution, origin, cfg)


def remove_floating_points(dmap, cfg=None):
    """Turn cells with fewer than neighbor_min same-valued 4-neighbors into
    255. One pass over a snapshot: decisions never cascade."""
    cfg = cfg or FiltrationConfig()
    dmap.validate_discretized()
    codes = dmap.codes
    out = codes.copy()
    for value in (cfg.c1, cfg.c2):  # changing 255 to 255 is a no-op
        mask = codes == value
        same = np.zeros(codes.shape, dtype=np.int8)
        same[1:, :] += mask[:-1, :]
        same[:-1, :] += mask[1:, :]
        same[:, 1:] += mask[:, :-1]
        same[:, :-1] += mask[:, 1:]
        out[mask & (same < cfg.neighbor_min)] = cfg.c3
    return DiscreteMap(out, dmap.resolution, dmap.origin, cfg)


class Trajectory:
    """Ordered (scan_index, pose) record of the odometry over time."""

    def __init__(self):
        self.entries = []

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def record_pose(traj, k, pose):
    if traj.entries and k <= traj.entries[-1][0]:
        raise OutOfOrderError(
            f"scan index {k} not greater than last recorded {traj.entries[-1][0]}")
    traj.entries.append((int(k), pose))
    return traj


def write_trajectory(traj, path):
    """TUM-style text: `k tx ty tz qw qx qy qz`, one line per scan."""
    with open(path, "w") as f:
        for k, pose in traj:
            t = pose.translation
            q = pose.quaternion
            f.write(f"{k} {t[0]:.9g} {t[1]:.9g} {t[2]:.9g} "
                    f"{q[0]:.9g} {q[1]:.9g} {q[2]:.9g} {q[3]:.9g}\n")


def save_pgm(dmap, path):
    """8-bit binary PGM with raw cell codes, plus a `<path>.meta` sidecar.

    Cell (i, j) sits at raster row i from the top, column j from the left;
    cell (0, 0) is at world origin_x/origin_y and y grows with the row index.
    """
    codes = dmap.codes
    h, w = codes.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(codes.tobytes())
    thr = dmap.thresholds or FiltrationConfig()
    meta = [
        f"resolution = {dmap.resolution:.9g}",
        f"origin_x = {dmap.origin[0]:.9g}",
        f"origin_y = {dmap.origin[1]:.9g}",
        f"origin_yaw = {dmap.origin[2]:.9g}",
        f"width = {w}",
        f"height = {h}",
        f"t1 = {thr.t1:.9g}",
        f"t2 = {thr.t2:.9g}",
        f"t3 = {thr.t3:.9g}",
        f"t1_out = {thr.t1_out:.9g}",
        f"t2_out = {thr.t2_out:.9g}",
        f"neighbor_min = {thr.neighbor_min}",
        "# cell (i, j): raster row i from top, column j from left;",
        "# world x = origin_x + (j + 0.5) * resolution,",
        "# world y = origin_y + (i + 0.5) * resolution.",
    ]
    with open(str(path) + ".meta", "w") as f:
        f.write("\n".join(meta) + "\n")


def _read_pgm(path):
    with open(path, "rb") as f:
        data = f.read()
    # header tokens: magic, width, height, maxval; comments start with '#'
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise ValueError(f"{path}: truncated PGM header")
        ch = data[i:i + 1]
        if ch == b"#":
            i = data.index(b"\n", i) + 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == b"P5":
        body = data[i + 1:i + 1 + w * h]
        if len(body) != w * h:
            raise ValueError(f"{path}: PGM body has {len(body)} bytes, expected {w * h}")
        return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()
    if magic == b"P2":
        values = data[i:].split()
        if len(values) != w * h:
            raise ValueError(f"{path}: PGM body has {len(values)} values, expected {w * h}")
        return np.array([int(v) for v in values], dtype=np.uint8).reshape(h, w)
    raise ValueError(f"{path}: unsupported PGM magic {magic!r}")


def parse_keyvalue_text(text):
    """Minimal TOML-style reader: [section] headers and key = value lines."""
    out = {}
    section = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out.setdefault(section, {})
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if value.startswith('"') and value.endswith('"'):
            parsed = value[1:-1]
        elif value.lower() in ("true", "false"):
            parsed = value.lower() == "true"
        else:
            try:
                parsed = int(value)
            except ValueError:
                try:
                    parsed = float(value)
                except ValueError:
                    parsed = value
        target = out[section] if section is not None else out
        target[key] = parsed
    return out


def load_pgm(path):
    """Read a PGM map and its sidecar metadata back into a DiscreteMap."""
    codes = _read_pgm(path)
    meta_path = str(path) + ".meta"
    try:
        with open(meta_path) as f:
            meta = parse_keyvalue_text(f.read())
    except FileNotFoundError:
        raise FileNotFoundError(f"missing metadata sidecar {meta_path}") from None
    thr = FiltrationConfig(
        t1=meta.get("t1", 0.12), t2=meta.get("t2", 0.93), t3=meta.get("t3", 0.96),
        t1_out=meta.get("t1_out", 0.21), t2_out=meta.get("t2_out", 0.86),
        neighbor_min=meta.get("neighbor_min", 3))
    return DiscreteMap(
        codes, float(meta["resolution"]),
        (float(meta.get("origin_x", 0.0)), float(meta.get("origin_y", 0.0)),
         float(meta.get("origin_yaw", 0.0))),
        thr)

"""Streaming mapping loop: filters -> scan matching -> projection -> grid.

Per scan: box filter, voxel filter, per-point covariances, scan-to-scan
alignment, scan-to-map refinement against the keyframe submap, keyframe
update, 2D projection, evidence integration, pose record. The cleaning
stage runs on snapshots every N scans; the internal evidence grid is never
overwritten by cleaner output (post-clean maps are for map consumers, the
evidence grid keeps serving localisation).
"""

import logging
import time
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

from .cleaner import clean_map, make_cleaner
from .grid import (DiscreteMap, FiltrationConfig, GridConfig, OccupancyGrid,
                   Trajectory, input_filter, parse_keyvalue_text, record_pose,
                   remove_floating_points, save_pgm, write_trajectory)
from .pointcloud import PreprocessConfig, box_filter, voxel_grid_filter
from .projection import translate_cloud
from .registration import (GicpConfig, KeyframeStore, estimate_covariances,
                           gicp_align, scan_to_map_align, update_keyframes)
from .grid import integrate_scan
from .se3 import PoseSE3

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    gicp: GicpConfig = field(default_factory=GicpConfig)
    filtration: FiltrationConfig = field(default_factory=FiltrationConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    cleaner: str = "identity"
    every_n: int = 10
    z_band: tuple = None
    seed: int = 0

    def __post_init__(self):
        if self.every_n < 1:
            raise ValueError("every_n must be >= 1")

    @classmethod
    def from_file(cls, path):
        """Load from TOML-style key=value text with [section] headers
        matching the nested config names."""
        with open(path) as f:
            data = parse_keyvalue_text(f.read())
        sections = {
            "preprocess": PreprocessConfig,
            "gicp": GicpConfig,
            "filtration": FiltrationConfig,
            "grid": GridConfig,
        }
        kwargs = {}
        for name, klass in sections.items():
            if name in data:
                valid = {f.name for f in dc_fields(klass)}
                bad = set(data[name]) - valid
                if bad:
                    raise ValueError(f"[{name}]: unknown keys {sorted(bad)}")
                kwargs[name] = klass(**data[name])
        top = data.get("pipeline", {k: v for k, v in data.items()
                                    if not isinstance(v, dict)})
        for key in ("cleaner", "every_n", "seed"):
            if key in top:
                kwargs[key] = top[key]
        if "z_min" in top and "z_max" in top:
            kwargs["z_band"] = (float(top["z_min"]), float(top["z_max"]))
        return cls(**kwargs)


class MappingPipeline:
    """Single-writer streaming mapper; call process_scan per incoming cloud."""

    def __init__(self, config=None):
        self.config = config or PipelineConfig()
        self.grid = OccupancyGrid(self.config.grid)
        self.trajectory = Trajectory()
        self.keyframes = KeyframeStore()
        self.submap = None
        self.world_pose = PoseSE3.identity()
        self._prev_cov = None
        self._scan_count = 0
        self._cleaner = None
        self.last_diverged = False
        self.published_map = None

    def _get_cleaner(self):
        if self._cleaner is None:
            self._cleaner = make_cleaner(self.config.cleaner)
        return self._cleaner

    def process_scan(self, cloud):
        """Run one scan through every stage; returns stage wall-times."""
        cfg = self.config
        timings = {}

        t0 = time.perf_counter()
        filtered = voxel_grid_filter(box_filter(cloud, cfg.preprocess),
                                     cfg.preprocess)
        timings["filtering"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        cov = estimate_covariances(filtered, cfg.gicp)
        if self._prev_cov is None:
            self.world_pose = PoseSE3.identity()
        else:
            s2s = gicp_align(cov, self._prev_cov, PoseSE3.identity(), cfg.gicp)
            prior = self.world_pose @ s2s.pose
            s2m = scan_to_map_align(cov, self.submap, prior, cfg.gicp)
            self.last_diverged = s2m.diverged
            if s2m.diverged:
                log.warning("scan %d: scan-to-map diverged, keeping prior",
                            cloud.scan_index)
            self.world_pose = s2m.pose
        self.keyframes, self.submap = update_keyframes(
            self.keyframes, self.world_pose, filtered, cfg.gicp, cov_points=cov)
        self._prev_cov = cov
        timings["registration"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        scan2d = translate_cloud(filtered, z_band=cfg.z_band)
        timings["translation"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        integrate_scan(self.grid, scan2d, self.world_pose)
        record_pose(self.trajectory, cloud.scan_index, self.world_pose)
        timings["integration"] = time.perf_counter() - t0

        self._scan_count += 1
        if self._scan_count % cfg.every_n == 0:
            t0 = time.perf_counter()
            self.published_map = self.clean_snapshot()
            timings["cleaning"] = time.perf_counter() - t0
        return timings

    def clean_snapshot(self):
        """Filter + floating-point removal + cleaner on a grid snapshot."""
        cfg = self.config
        dmap = input_filter(self.grid, cfg.filtration)
        dmap = remove_floating_points(dmap, cfg.filtration)
        return clean_map(dmap, self._get_cleaner(), cfg.filtration)

    def finalize(self, out_dir):
        """Final cleaning pass; write map + metadata + trajectory."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.published_map = self.clean_snapshot()
        save_pgm(self.published_map, out / "map.pgm")
        write_trajectory(self.trajectory, out / "trajectory.txt")
        return out / "map.pgm"

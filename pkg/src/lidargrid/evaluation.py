"""Map evaluation: class-wise IoU against ground truth and latency reports."""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import FREE, OCCUPIED, UNKNOWN


@dataclass
class Alignment2D:
    """Rigid(+scale) transform taking truth-frame coordinates into the map
    frame: p_map = scale * R(yaw) p_truth + (tx, ty)."""

    tx: float = 0.0
    ty: float = 0.0
    yaw_deg: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")


def _resample_truth(map_grid, truth, align):
    """Nearest-neighbor lookup of truth codes at every map cell center.

    Cells falling outside the truth raster read as unknown, which the IoU
    then excludes.
    """
    h, w = map_grid.shape
    rows, cols = np.mgrid[0:h, 0:w]
    x = map_grid.origin[0] + (cols + 0.5) * map_grid.resolution
    y = map_grid.origin[1] + (rows + 0.5) * map_grid.resolution
    # invert the alignment: map frame -> truth frame
    ang = np.radians(align.yaw_deg)
    ca, sa = np.cos(ang), np.sin(ang)
    ux = (x - align.tx) / align.scale
    uy = (y - align.ty) / align.scale
    tx = ca * ux + sa * uy
    ty = -sa * ux + ca * uy
    tc = np.floor((tx - truth.origin[0]) / truth.resolution).astype(np.int64)
    tr = np.floor((ty - truth.origin[1]) / truth.resolution).astype(np.int64)
    th, tw = truth.shape
    inside = (tr >= 0) & (tr < th) & (tc >= 0) & (tc < tw)
    out = np.full((h, w), UNKNOWN, dtype=np.uint8)
    out[inside] = truth.codes[tr[inside], tc[inside]]
    return out


_CLASS_CODES = {"occupied": OCCUPIED, "unoccupied": FREE}


def iou(map_grid, truth, align=None, cls="unoccupied"):
    """Intersection-over-union for one class, unknown cells excluded.

    Cells that are 255 in either raster drop out of both sets. When both
    class sets are empty the IoU is defined as 1.0 (vacuous agreement).
    """
    if cls not in _CLASS_CODES:
        raise ValueError(f"class must be one of {sorted(_CLASS_CODES)}")
    align = align or Alignment2D()
    map_grid.validate_discretized()
    truth.validate_discretized()
    if map_grid.codes.size == 0:
        raise ValueError("empty map")
    code = _CLASS_CODES[cls]
    truth_on_map = _resample_truth(map_grid, truth, align)
    known = (map_grid.codes != UNKNOWN) & (truth_on_map != UNKNOWN)
    a = known & (map_grid.codes == code)
    b = known & (truth_on_map == code)
    union = int((a | b).sum())
    if union == 0:
        warnings.warn(f"both {cls} sets empty; IoU defined as 1.0")
        return 1.0
    return float((a & b).sum() / union)


STAGES = ("filtering", "registration", "translation", "integration", "cleaning")


@dataclass
class LatencyReport:
    stage_samples: dict        # stage name -> list of seconds
    per_scan_totals: list      # seconds, one per scan

    def median(self, stage):
        s = self.stage_samples.get(stage, [])
        return float(np.median(s)) if s else 0.0

    def p95(self, stage):
        s = self.stage_samples.get(stage, [])
        return float(np.percentile(s, 95)) if s else 0.0

    def count(self, stage):
        return len(self.stage_samples.get(stage, []))

    def total_median(self):
        return float(np.median(self.per_scan_totals)) if self.per_scan_totals else 0.0

    def rows(self):
        rows = [(stage, self.count(stage), self.median(stage), self.p95(stage))
                for stage in STAGES]
        rows.append(("per-scan total", len(self.per_scan_totals),
                     self.total_median(),
                     float(np.percentile(self.per_scan_totals, 95))
                     if self.per_scan_totals else 0.0))
        return rows

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["stage", "samples", "median_s", "p95_s"])
            for name, n, med, p95 in self.rows():
                writer.writerow([name, n, f"{med:.6f}", f"{p95:.6f}"])

    def format_table(self):
        lines = [f"{'stage':<16} {'samples':>8} {'median [ms]':>12} {'p95 [ms]':>12}"]
        for name, n, med, p95 in self.rows():
            lines.append(f"{name:<16} {n:>8} {med * 1e3:>12.2f} {p95 * 1e3:>12.2f}")
        return "\n".join(lines)


def benchmark_pipeline(clouds, config=None):
    """Run the full mapping pipeline over a scan sequence, timing each stage.

    Cleaning is timed separately (it runs every config.every_n scans), so
    with-cleaner and without-cleaner costs stay distinguishable.
    """
    from .pipeline import MappingPipeline, PipelineConfig

    config = config or PipelineConfig()
    pipe = MappingPipeline(config)
    stage_samples = {stage: [] for stage in STAGES}
    totals = []
    for k, cloud in enumerate(clouds):
        try:
            timings = pipe.process_scan(cloud)
        except Exception as e:
            raise RuntimeError(f"pipeline failed at scan {k}: {e}") from e
        total = 0.0
        for stage in STAGES:
            if stage in timings:
                stage_samples[stage].append(timings[stage])
                total += timings[stage]
        totals.append(total)
    return LatencyReport(stage_samples, totals)

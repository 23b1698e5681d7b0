"""Azimuth-binned 2D projection of 3D point clouds."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class EmptyCloudError(ValueError):
    pass


@dataclass
class Scan2D:
    """Flattened azimuth-bin structure: entry i is (ranges[i], intensities[i])
    living in bin bin_indices[i]. Entries keep the input point order."""

    bin_count: int
    ranges: np.ndarray
    intensities: np.ndarray
    bin_indices: np.ndarray
    scan_index: int = 0

    def __len__(self):
        return self.ranges.shape[0]

    def bins(self):
        """Per-bin lists of (range, intensity), input order preserved."""
        out = [[] for _ in range(self.bin_count)]
        for b, r, it in zip(self.bin_indices, self.ranges, self.intensities):
            out[b].append((float(r), float(it)))
        return out

    def bin_centers(self):
        """Azimuth of each bin center, radians in (-pi, pi)."""
        width = 2.0 * np.pi / self.bin_count
        return -np.pi + (np.arange(self.bin_count) + 0.5) * width


def translate_cloud(cloud, z_band=None):
    """Project a 3D cloud to the azimuth-binned 2D structure.

    bin count = floor(sqrt(point count)); theta = atan2(y, x) in [-pi, pi];
    range = hypot(x, y); z is discarded. theta = +pi lands on the last bin
    (the raw bin formula yields an out-of-range index there). z_band, when
    given as (zmin, zmax), restricts which points project; off by default.
    """
    if len(cloud) == 0:
        raise EmptyCloudError("cannot project an empty cloud")
    xyz = cloud.xyz
    intensity = cloud.intensity
    if z_band is not None:
        zmin, zmax = z_band
        keep = (xyz[:, 2] >= zmin) & (xyz[:, 2] <= zmax)
        xyz = xyz[keep]
        intensity = intensity[keep]
        if xyz.shape[0] == 0:
            raise EmptyCloudError("z-band removed every point")
    n = xyz.shape[0]
    bin_count = max(1, int(np.floor(np.sqrt(n))))
    theta = np.arctan2(xyz[:, 1], xyz[:, 0])
    rng = np.hypot(xyz[:, 0], xyz[:, 1])
    idx = np.floor((theta + np.pi) / (2.0 * np.pi) * bin_count).astype(np.int64)
    idx = np.clip(idx, 0, bin_count - 1)
    return Scan2D(bin_count, rng, intensity.copy(), idx, cloud.scan_index)


def scan2d_to_endpoints(scan, pose):
    """World-frame (x, y, intensity) endpoints of every bin entry.

    The sensor-frame azimuth of an entry is its bin center (the binned
    structure stores only range and intensity); the pose contributes its
    planar projection, yaw plus x/y translation.
    """
    n = len(scan)
    out = np.empty((n, 3))
    if n == 0:
        return out
    width = 2.0 * np.pi / scan.bin_count
    centers = -np.pi + (scan.bin_indices + 0.5) * width
    yaw = pose.yaw()
    a = centers + yaw
    out[:, 0] = pose.translation[0] + scan.ranges * np.cos(a)
    out[:, 1] = pose.translation[1] + scan.ranges * np.sin(a)
    out[:, 2] = scan.intensities
    return out


def write_scan2d_csv(scan, path):
    """Debug dump: one `bin_index,range,intensity` row per entry."""
    with open(path, "w") as f:
        f.write("bin_index,range,intensity\n")
        for b, r, it in zip(scan.bin_indices, scan.ranges, scan.intensities):
            f.write(f"{b},{r:.9g},{it:.9g}\n")

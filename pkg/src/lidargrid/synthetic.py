"""Built-in fixture worlds and a 3D LiDAR simulator over extruded floorplans.

Used by the demos, the benchmark harness, and the test suite: floorplans
give 2D ground truth, and the simulator turns them into multi-ring 3D
point clouds (walls extruded to full height, optional floor/ceiling
planes) so the whole mapping pipeline can run end to end without sensor
hardware.
"""

from dataclasses import dataclass

import numpy as np

from . import raycast
from .datagen import FloorplanRaster
from .pointcloud import PointCloud


def _blank(width_m, height_m, res):
    w = int(round(width_m / res))
    h = int(round(height_m / res))
    occ = np.zeros((h, w), dtype=bool)
    occ[:2, :] = occ[-2:, :] = True
    occ[:, :2] = occ[:, -2:] = True
    return occ


def floorplan_square_room(size_m=8.0, res=0.05):
    """Empty walled room."""
    return FloorplanRaster(_blank(size_m, size_m, res), res)


def floorplan_columns(size_m=10.0, res=0.05):
    """Walled room with a 2x2 grid of square pillars."""
    occ = _blank(size_m, size_m, res)
    h, w = occ.shape
    side = max(2, int(round(0.6 / res)))
    for fr in (0.3, 0.7):
        for fc in (0.3, 0.7):
            r0 = int(fr * h) - side // 2
            c0 = int(fc * w) - side // 2
            occ[r0:r0 + side, c0:c0 + side] = True
    return FloorplanRaster(occ, res)


def floorplan_corridor_rooms(width_m=20.0, height_m=10.0, res=0.05):
    """Central corridor with two rooms on each side, joined by doorways."""
    occ = _blank(width_m, height_m, res)
    h, w = occ.shape
    t = 2  # wall thickness, cells
    corr_half = max(3, int(round(1.5 / res)) // 2)
    mid = h // 2
    door = max(4, int(round(1.0 / res)))
    # walls separating corridor from the rooms
    for row in (mid - corr_half, mid + corr_half):
        occ[row:row + t, :] = True
    # each side split into two rooms by a partition wall
    part = w // 2
    occ[:mid - corr_half, part:part + t] = True
    occ[mid + corr_half + t:, part:part + t] = True
    # doorways from corridor into each room
    for c0 in (w // 4, 3 * w // 4):
        occ[mid - corr_half:mid - corr_half + t, c0 - door // 2:c0 + door // 2] = False
        occ[mid + corr_half:mid + corr_half + t, c0 - door // 2:c0 + door // 2] = False
    return FloorplanRaster(occ, res)


def floorplan_corridor(length_m=16.0, width_m=3.0, res=0.05):
    """Plain straight corridor (used by drift-geometry fixtures)."""
    return FloorplanRaster(_blank(length_m, width_m, res), res)


def floorplan_corridor_room(width_m=20.0, height_m=10.0, res=0.1):
    """Corridor along the bottom edge plus one large room, two doorways."""
    occ = _blank(width_m, height_m, res)
    h, w = occ.shape
    row = int(3.0 / res)
    occ[row:row + 2, :] = True
    door = int(1.2 / res)
    for c0 in (w // 4, 3 * w // 4):
        occ[row:row + 2, c0 - door // 2:c0 + door // 2] = False
    return FloorplanRaster(occ, res)


def floorplan_warehouse(width_m=70.0, height_m=35.0, res=0.05):
    """Open hall with long storage racks (aisle gaps) and support pillars."""
    occ = _blank(width_m, height_m, res)
    h, w = occ.shape
    for frac in (0.25, 0.5, 0.75):
        r = int(frac * h)
        occ[r:r + 2, int(0.12 * w):int(0.88 * w)] = True
        for g in (0.3, 0.55, 0.8):  # aisle gaps through each rack
            occ[r:r + 2, int(g * w) - 8:int(g * w) + 8] = False
    for fr in (0.18, 0.62):
        for fc in (0.2, 0.45, 0.7):
            r0, c0 = int(fr * h), int(fc * w)
            occ[r0:r0 + 10, c0:c0 + 10] = True
    return FloorplanRaster(occ, res)


def floorplan_tiny(cells=64, res=0.1, variant=0):
    """Small room rasters sized for cleaner-training tiles."""
    occ = np.zeros((cells, cells), dtype=bool)
    occ[:2, :] = occ[-2:, :] = True
    occ[:, :2] = occ[:, -2:] = True
    if variant % 3 == 1:
        occ[: cells // 2, cells // 2: cells // 2 + 2] = True
        occ[cells // 2: cells // 2 + 2, : cells // 4] = True
    elif variant % 3 == 2:
        occ[cells // 3: cells // 3 + 2, cells // 4:] = True
        q = cells // 4
        occ[3 * q - 3: 3 * q, 3 * q - 3: 3 * q] = True
    return FloorplanRaster(occ, res)


BUILTIN_FLOORPLANS = {
    "square_room": floorplan_square_room,
    "columns": floorplan_columns,
    "corridor_rooms": floorplan_corridor_rooms,
    "corridor": floorplan_corridor,
    "corridor_room": floorplan_corridor_room,
    "warehouse": floorplan_warehouse,
    "tiny": floorplan_tiny,
}


@dataclass
class Lidar3D:
    """Multi-ring scanner over an extruded floorplan.

    Walls are full height; floor and (optionally) ceiling are planes.
    Intensity is a fixed reflectance per surface class.
    """

    n_azimuth: int = 900
    ring_elevations_deg: tuple = (-2.0, -1.0, 0.0, 1.0, 2.0)
    max_range: float = 25.0
    sensor_height: float = 1.0
    floor_z: float = 0.0
    ceiling_z: float = None  # None: no ceiling plane
    wall_intensity: float = 0.75
    floor_intensity: float = 0.35
    ceiling_intensity: float = 0.5

    def azimuths(self):
        return -np.pi + (np.arange(self.n_azimuth) + 0.5) * (2.0 * np.pi / self.n_azimuth)


def simulate_scan_3d(fp, pose, lidar=None, scan_index=0, rng=None, range_noise=0.0):
    """Render one 3D scan from planar pose (x, y, yaw) on a floorplan.

    Returns a PointCloud in the sensor frame (sensor at the origin,
    x forward along yaw). Rays with no return are dropped.
    """
    lidar = lidar or Lidar3D()
    x, y, yaw = float(pose[0]), float(pose[1]), float(pose[2])
    res = fp.resolution
    max_t = lidar.max_range / res
    az = lidar.azimuths()
    points = []
    intensities = []
    z0 = lidar.sensor_height
    for el_deg in lidar.ring_elevations_deg:
        el = np.radians(el_deg)
        cos_el, sin_el = np.cos(el), np.sin(el)
        world_a = az + yaw
        t_cells = raycast.measure_ranges(
            fp.occupied, np.zeros_like(fp.occupied), x / res, y / res,
            np.cos(world_a), np.sin(world_a),
            np.zeros(len(az), dtype=bool), max_t * 4)
        d_wall = np.where(t_cells >= 0, t_cells * res, np.inf)
        r_wall = d_wall / max(cos_el, 1e-9)
        r_best = r_wall
        surf = np.zeros(len(az), dtype=np.int8)  # 0 wall, 1 floor, 2 ceiling
        if sin_el < 0:
            r_floor = (lidar.floor_z - z0) / sin_el
            closer = r_floor < r_best
            r_best = np.where(closer, r_floor, r_best)
            surf = np.where(closer, 1, surf)
        elif sin_el > 0 and lidar.ceiling_z is not None:
            r_ceil = (lidar.ceiling_z - z0) / sin_el
            closer = r_ceil < r_best
            r_best = np.where(closer, r_ceil, r_best)
            surf = np.where(closer, 2, surf)
        valid = np.isfinite(r_best) & (r_best <= lidar.max_range)
        r = r_best[valid]
        if range_noise > 0 and rng is not None:
            r = r + rng.normal(0.0, range_noise, size=r.shape)
        a = az[valid]
        points.append(np.column_stack([
            r * cos_el * np.cos(a),
            r * cos_el * np.sin(a),
            r * sin_el * np.ones_like(a),
        ]))
        lut = np.array([lidar.wall_intensity, lidar.floor_intensity,
                        lidar.ceiling_intensity])
        intensities.append(lut[surf[valid]])
    xyz = np.concatenate(points) if points else np.zeros((0, 3))
    inten = np.concatenate(intensities) if intensities else np.zeros(0)
    return PointCloud(xyz, inten, scan_index=scan_index)


def simulate_sequence(fp, traj, lidar=None, rng=None, range_noise=0.0):
    """One PointCloud per trajectory pose, scan_index = position."""
    lidar = lidar or Lidar3D()
    return [simulate_scan_3d(fp, pose, lidar, scan_index=k, rng=rng,
                             range_noise=range_noise)
            for k, pose in enumerate(np.asarray(traj, dtype=float))]


def room_cloud(seed, n_points=1500, size_m=9.0):
    """Structured synthetic room scan for registration tests and benchmarks.

    A walled room with seeded pillars, scanned from a seeded interior pose;
    point count is approximate (no-return rays are dropped).
    """
    rng = np.random.default_rng(seed)
    res = 0.05
    occ = _blank(size_m, size_m, res)
    h, w = occ.shape
    side = max(2, int(round(0.5 / res)))
    for _ in range(4):
        r0 = int(rng.uniform(0.18, 0.78) * h)
        c0 = int(rng.uniform(0.18, 0.78) * w)
        occ[r0:r0 + side, c0:c0 + side] = True
    pose = (size_m / 2 + rng.uniform(-1, 1), size_m / 2 + rng.uniform(-1, 1),
            rng.uniform(-np.pi, np.pi))
    # keep the sensor out of any pillar it may have landed in
    pr, pc = int(pose[1] / res), int(pose[0] / res)
    clear = int(0.4 / res)
    occ[max(pr - clear, 2):pr + clear, max(pc - clear, 2):pc + clear] = False
    fp = FloorplanRaster(occ, res)
    rings = (-8.0, -4.0, 0.0, 4.0, 8.0)
    n_az = max(16, int(round(n_points / len(rings))))
    lidar = Lidar3D(n_azimuth=n_az, ring_elevations_deg=rings,
                    max_range=2.0 * size_m, sensor_height=1.2,
                    ceiling_z=3.0)
    return simulate_scan_3d(fp, pose, lidar, rng=rng)

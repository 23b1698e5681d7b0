"""Point cloud container, PCD/CSV I/O, and the two incoming-scan filters."""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

log = logging.getLogger(__name__)

PCD_ASCII = "pcd_ascii"
PCD_BINARY = "pcd_binary"
XYZI_CSV = "xyzi_csv"
FORMATS = (PCD_ASCII, PCD_BINARY, XYZI_CSV)

_PCD_FIELDS = ("x", "y", "z", "intensity")


class CloudHeaderError(ValueError):
    """File header missing, malformed, or declaring unsupported fields."""


class RecordCountError(ValueError):
    """Body disagrees with declared count or has wrong per-record field count."""


class Point3(NamedTuple):
    x: float
    y: float
    z: float
    intensity: float


@dataclass
class PointCloud:
    """One 360-degree scan: (N, 3) coordinates plus per-point reflectance."""

    xyz: np.ndarray
    intensity: np.ndarray
    scan_index: int = 0
    timestamp: Optional[float] = None

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=float).reshape(-1, 3)
        self.intensity = np.asarray(self.intensity, dtype=float).reshape(-1)
        if len(self.intensity) != len(self.xyz):
            raise ValueError("xyz and intensity lengths differ")
        if self.scan_index < 0:
            raise ValueError("scan_index must be non-negative")

    def __len__(self):
        return self.xyz.shape[0]

    def point(self, i) -> Point3:
        return Point3(*self.xyz[i], self.intensity[i])

    @classmethod
    def from_points(cls, points, scan_index=0, timestamp=None):
        pts = np.asarray(points, dtype=float).reshape(-1, 4)
        return cls(pts[:, :3], pts[:, 3], scan_index, timestamp)

    def with_mask(self, mask):
        return PointCloud(self.xyz[mask], self.intensity[mask],
                          self.scan_index, self.timestamp)


@dataclass
class PreprocessConfig:
    box_half_width: float = 1.0
    voxel_resolution: float = 0.25

    def __post_init__(self):
        if self.box_half_width <= 0 or self.voxel_resolution <= 0:
            raise ValueError("preprocess parameters must be strictly positive")


def sniff_format(path):
    """Guess one of FORMATS from the file extension / first bytes."""
    p = str(path).lower()
    if p.endswith(".csv"):
        return XYZI_CSV
    with open(path, "rb") as f:
        head = f.read(2048)
    if b"DATA binary" in head:
        return PCD_BINARY
    if b"DATA ascii" in head:
        return PCD_ASCII
    raise CloudHeaderError(f"{path}: cannot determine point cloud format")


def _parse_pcd_header(f, path):
    header = {}
    data_start = None
    while True:
        line = f.readline()
        if not line:
            raise CloudHeaderError(f"{path}: truncated header, no DATA line")
        text = line.decode("ascii", errors="replace").strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        header[parts[0].upper()] = parts[1:]
        if parts[0].upper() == "DATA":
            data_start = f.tell()
            break
    for key in ("FIELDS", "POINTS", "DATA"):
        if key not in header:
            raise CloudHeaderError(f"{path}: header missing {key}")
    fields = [s.lower() for s in header["FIELDS"]]
    if sorted(fields) != sorted(_PCD_FIELDS):
        raise CloudHeaderError(
            f"{path}: expected fields x y z intensity, got {fields}")
    try:
        n = int(header["POINTS"][0])
    except (ValueError, IndexError):
        raise CloudHeaderError(f"{path}: bad POINTS value") from None
    return fields, n, header["DATA"][0].lower(), data_start


def _normalize_intensity(raw, intensity_scale):
    if intensity_scale == "auto":
        # Files already in [0, 1] (e.g. our own writer's output) pass through;
        # raw sensor values get the conventional /255.
        divisor = 255.0 if raw.size and np.nanmax(raw) > 1.0 else 1.0
    else:
        divisor = float(intensity_scale)
        if divisor <= 0:
            raise ValueError("intensity scale must be positive")
    return np.clip(raw / divisor, 0.0, 1.0) if divisor != 1.0 else np.clip(raw, 0.0, 1.0)


def _drop_nonfinite(xyz, intensity, path):
    ok = np.all(np.isfinite(xyz), axis=1) & np.isfinite(intensity)
    dropped = int(len(ok) - ok.sum())
    if dropped:
        log.warning("%s: dropped %d non-finite points", path, dropped)
    return xyz[ok], intensity[ok]


def load_cloud(path, fmt=None, intensity_scale="auto", scan_index=0):
    """Read a point cloud; see FORMATS. Raises FileNotFoundError,
    CloudHeaderError, or RecordCountError (each condition distinct)."""
    if fmt is None:
        fmt = sniff_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")

    if fmt == XYZI_CSV:
        with open(path, "r") as f:
            lines = [ln.strip() for ln in f if ln.strip()]
        if not lines or [c.strip().lower() for c in lines[0].split(",")] != list(_PCD_FIELDS):
            raise CloudHeaderError(f"{path}: first line must be 'x,y,z,intensity'")
        rows = []
        for i, ln in enumerate(lines[1:], start=2):
            cells = ln.split(",")
            if len(cells) != 4:
                raise RecordCountError(f"{path}:{i}: expected 4 fields, got {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise RecordCountError(f"{path}:{i}: non-numeric field") from None
        data = np.array(rows, dtype=float).reshape(-1, 4)
    else:
        with open(path, "rb") as f:
            fields, n, data_kind, _ = _parse_pcd_header(f, path)
            if fmt == PCD_BINARY:
                if data_kind != "binary":
                    raise CloudHeaderError(f"{path}: DATA is {data_kind}, expected binary")
                body = f.read()
                expected = n * 4 * 4
                if len(body) != expected:
                    raise RecordCountError(
                        f"{path}: declared {n} points ({expected} bytes), body has {len(body)} bytes")
                flat = np.frombuffer(body, dtype="<f4").astype(float)
                data = flat.reshape(n, 4)
            else:
                if data_kind != "ascii":
                    raise CloudHeaderError(f"{path}: DATA is {data_kind}, expected ascii")
                lines = [ln for ln in f.read().decode("ascii").splitlines() if ln.strip()]
                if len(lines) != n:
                    raise RecordCountError(
                        f"{path}: declared {n} points, body has {len(lines)} records")
                rows = []
                for i, ln in enumerate(lines, start=1):
                    cells = ln.split()
                    if len(cells) != 4:
                        raise RecordCountError(
                            f"{path}: record {i} has {len(cells)} fields, expected 4")
                    rows.append([float(c) for c in cells])
                data = np.array(rows, dtype=float).reshape(-1, 4)
        # reorder columns to x y z intensity if the file declares another order
        order = [fields.index(name) for name in _PCD_FIELDS]
        data = data[:, order]

    xyz = data[:, :3]
    intensity = _normalize_intensity(data[:, 3], intensity_scale)
    xyz, intensity = _drop_nonfinite(xyz, intensity, path)
    return PointCloud(xyz, intensity, scan_index=scan_index)


def write_cloud(cloud, path, fmt=PCD_BINARY):
    """Write PCD v0.7 (ascii/binary, fields x y z intensity) or CSV."""
    n = len(cloud)
    if fmt == XYZI_CSV:
        with open(path, "w") as f:
            f.write("x,y,z,intensity\n")
            for i in range(n):
                x, y, z, it = cloud.xyz[i, 0], cloud.xyz[i, 1], cloud.xyz[i, 2], cloud.intensity[i]
                f.write(f"{x:.9g},{y:.9g},{z:.9g},{it:.9g}\n")
        return
    if fmt not in (PCD_ASCII, PCD_BINARY):
        raise ValueError(f"unknown format {fmt!r}")
    kind = "binary" if fmt == PCD_BINARY else "ascii"
    header = (
        "# .PCD v0.7 - Point Cloud Data file format\n"
        "VERSION 0.7\n"
        "FIELDS x y z intensity\n"
        "SIZE 4 4 4 4\n"
        "TYPE F F F F\n"
        "COUNT 1 1 1 1\n"
        f"WIDTH {n}\n"
        "HEIGHT 1\n"
        "VIEWPOINT 0 0 0 1 0 0 0\n"
        f"POINTS {n}\n"
        f"DATA {kind}\n"
    )
    data = np.column_stack([cloud.xyz, cloud.intensity]).astype("<f4")
    if fmt == PCD_BINARY:
        with open(path, "wb") as f:
            f.write(header.encode("ascii"))
            f.write(data.tobytes())
    else:
        with open(path, "w") as f:
            f.write(header)
            for row in data:
                f.write(" ".join(f"{v:.9g}" for v in row) + "\n")


def box_filter(cloud, cfg):
    """Drop every point inside the sensor box: max(|x|,|y|,|z|) <= half width."""
    if len(cloud) == 0:
        return cloud.with_mask(np.zeros(0, dtype=bool))
    keep = np.max(np.abs(cloud.xyz), axis=1) > cfg.box_half_width
    return cloud.with_mask(keep)


def voxel_grid_filter(cloud, cfg):
    """Downsample to one point per occupied voxel (centroid, mean intensity).

    Voxel of (x, y, z) is (floor(x/r), floor(y/r), floor(z/r)). Output is
    ordered by voxel index, so it is permutation-invariant on input order.
    """
    r = cfg.voxel_resolution
    n = len(cloud)
    if n == 0:
        return cloud.with_mask(np.zeros(0, dtype=bool))
    idx = np.floor(cloud.xyz / r).astype(np.int64)
    # linear keys sort lexicographically like the index triples but make
    # np.unique an order of magnitude faster than axis=0
    idx -= idx.min(axis=0)
    spans = idx.max(axis=0) + 1
    keys = (idx[:, 0] * spans[1] + idx[:, 1]) * spans[2] + idx[:, 2]
    _, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    k = len(counts)
    sums = np.zeros((k, 3))
    for axis in range(3):
        sums[:, axis] = np.bincount(inverse, weights=cloud.xyz[:, axis], minlength=k)
    isum = np.bincount(inverse, weights=cloud.intensity, minlength=k)
    return PointCloud(sums / counts[:, None], isum / counts,
                      cloud.scan_index, cloud.timestamp)

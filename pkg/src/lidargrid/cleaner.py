"""Map cleaning stage: tile the filtered grid, run a pluggable cleaner per
patch, stitch, and discretize through the output filtration.

Cleaners: identity (pass-through), morphological (closing on occupied then
free, occupied wins), or an external learned model. External models come in
two flavors: an .onnx file executed in-process by onnxruntime, or a
long-lived subprocess speaking a length-prefixed binary protocol on
stdin/stdout (magic 'TTOG', u32 tile size, u32 patch id, then tile^2
little-endian float32; the response mirrors the request).
"""

import logging
import os
import select
import shlex
import struct
import subprocess
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import (FREE, OCCUPIED, UNKNOWN, CoverageGapError, DiscreteMap,
                   FiltrationConfig, output_filter_values)

log = logging.getLogger(__name__)

MAGIC = b"TTOG"
HEADER = struct.Struct("<4sII")  # magic, tile_size, patch_id


class CleanerModelError(RuntimeError):
    """External model failed: launch, protocol, timeout, or shape mismatch."""


@dataclass
class TilePatch:
    pixels: np.ndarray   # (tile, tile) float in [0, 1]
    row0: int
    col0: int
    valid_rows: int
    valid_cols: int


def _lattice(dim, tile, stride):
    if dim <= tile:
        return [0]
    n = int(np.ceil((dim - tile) / stride)) + 1
    return [i * stride for i in range(n)]


def tile_map(dmap, tile_size=256, overlap=32):
    """Cut the map into a lattice of tiles; edge tiles padded with unknown.
    Codes map to [0, 1] exactly as value/255."""
    if not tile_size > overlap >= 0:
        raise ValueError("need tile_size > overlap >= 0")
    values = dmap.codes.astype(float) / 255.0 if isinstance(dmap, DiscreteMap) \
        else np.asarray(dmap, dtype=float)
    h, w = values.shape
    stride = tile_size - overlap
    patches = []
    for r0 in _lattice(h, tile_size, stride):
        for c0 in _lattice(w, tile_size, stride):
            vr = min(tile_size, h - r0)
            vc = min(tile_size, w - c0)
            pixels = np.full((tile_size, tile_size), 1.0)  # 255/255 = unknown
            pixels[:vr, :vc] = values[r0:r0 + vr, c0:c0 + vc]
            patches.append(TilePatch(pixels, r0, c0, vr, vc))
    return patches


def stitch_map(patches, shape):
    """Average overlapping valid regions back into a full raster."""
    acc = np.zeros(shape)
    cnt = np.zeros(shape)
    for p in patches:
        acc[p.row0:p.row0 + p.valid_rows, p.col0:p.col0 + p.valid_cols] += \
            p.pixels[:p.valid_rows, :p.valid_cols]
        cnt[p.row0:p.row0 + p.valid_rows, p.col0:p.col0 + p.valid_cols] += 1
    if (cnt == 0).any():
        raise CoverageGapError(f"{int((cnt == 0).sum())} cells not covered by any patch")
    return acc / cnt


class IdentityCleaner:
    name = "identity"

    def clean_patch(self, pixels):
        return pixels

    def close(self):
        pass


class MorphologicalCleaner:
    """Deterministic stand-in for a learned cleaner: 3x3 closing on the
    occupied class, then on the free class; occupied wins conflicts (a 3x3
    free closing would otherwise erase walls up to two cells thick)."""

    name = "morphological"
    _structure = np.ones((3, 3), dtype=bool)

    def clean_patch(self, pixels):
        occ = np.isclose(pixels, OCCUPIED / 255.0)
        free = np.isclose(pixels, FREE / 255.0)
        occ2 = ndimage.binary_closing(occ, structure=self._structure)
        free2 = ndimage.binary_closing(free, structure=self._structure) & ~occ2
        out = np.full(pixels.shape, UNKNOWN / 255.0)
        out[free2] = FREE / 255.0
        out[occ2] = OCCUPIED / 255.0
        return out

    def close(self):
        pass


class OnnxCleaner:
    """Runs an operator-graph model file in-process: float input `map_in`
    [1, 1, T, T] in [0, 1], output `map_out` of the same shape."""

    name = "onnx"

    def __init__(self, path):
        if not os.path.exists(path):
            raise CleanerModelError(f"model file not found: {path}")
        try:
            import onnxruntime
        except ImportError as e:
            raise CleanerModelError(
                "onnxruntime is not installed; install it or use the "
                "subprocess model protocol") from e
        self._session = onnxruntime.InferenceSession(
            path, providers=["CPUExecutionProvider"])

    def clean_patch(self, pixels):
        x = pixels.astype(np.float32)[None, None]
        try:
            (y,) = self._session.run(["map_out"], {"map_in": x})
        except Exception as e:
            raise CleanerModelError(f"model inference failed: {e}") from e
        if y.shape != x.shape:
            raise CleanerModelError(
                f"model returned shape {y.shape}, expected {x.shape}")
        return _clamp01(y[0, 0].astype(float))


def _clamp01(values):
    n_out = int(((values < 0) | (values > 1)).sum())
    if n_out:
        log.warning("cleaner output: clamped %d values outside [0, 1]", n_out)
        return np.clip(values, 0.0, 1.0)
    return values


class SubprocessCleaner:
    """Long-lived child process speaking the length-prefixed patch protocol."""

    name = "subprocess"

    def __init__(self, command, timeout=10.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise CleanerModelError("empty model command")
        self.timeout = timeout
        self._patch_id = 0
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.PIPE)
        except OSError as e:
            raise CleanerModelError(f"could not launch model {argv!r}: {e}") from e
        if self._proc.poll() is not None:
            raise CleanerModelError(
                f"model exited immediately: {self._stderr_tail()}")

    def _stderr_tail(self):
        try:
            os.set_blocking(self._proc.stderr.fileno(), False)
            data = self._proc.stderr.read() or b""
            return data.decode(errors="replace")[-2000:]
        except Exception:
            return "<no diagnostics>"

    def _read_exact(self, n):
        fd = self._proc.stdout.fileno()
        chunks = []
        got = 0
        while got < n:
            ready, _, _ = select.select([fd], [], [], self.timeout)
            if not ready:
                raise CleanerModelError(
                    f"model response timed out after {self.timeout}s; "
                    f"stderr: {self._stderr_tail()}")
            chunk = os.read(fd, n - got)
            if not chunk:
                raise CleanerModelError(
                    f"model closed its output; stderr: {self._stderr_tail()}")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def clean_patch(self, pixels):
        if self._proc.poll() is not None:
            raise CleanerModelError(
                f"model process died; stderr: {self._stderr_tail()}")
        tile = pixels.shape[0]
        if pixels.shape != (tile, tile):
            raise CleanerModelError(f"patch must be square, got {pixels.shape}")
        self._patch_id += 1
        payload = pixels.astype("<f4").tobytes()
        try:
            self._proc.stdin.write(HEADER.pack(MAGIC, tile, self._patch_id))
            self._proc.stdin.write(payload)
            self._proc.stdin.flush()
        except BrokenPipeError as e:
            raise CleanerModelError(
                f"model pipe broke; stderr: {self._stderr_tail()}") from e
        head = self._read_exact(HEADER.size)
        magic, rtile, rid = HEADER.unpack(head)
        if magic != MAGIC:
            raise CleanerModelError(f"bad response magic {magic!r}")
        if rtile != tile:
            raise CleanerModelError(
                f"model returned tile size {rtile}, expected {tile}")
        if rid != self._patch_id:
            raise CleanerModelError(
                f"response id {rid} does not match request {self._patch_id}")
        body = self._read_exact(tile * tile * 4)
        out = np.frombuffer(body, dtype="<f4").reshape(tile, tile).astype(float)
        return _clamp01(out)

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def make_cleaner(spec):
    """Parse a cleaner spec: 'identity', 'morph', or 'model:<path-or-command>'
    (.onnx files run in-process, anything else is a subprocess command)."""
    if spec in ("identity", "none"):
        return IdentityCleaner()
    if spec in ("morph", "morphological"):
        return MorphologicalCleaner()
    if spec.startswith("model:"):
        target = spec[len("model:"):]
        if target.endswith(".onnx"):
            return OnnxCleaner(target)
        argv = shlex.split(target)
        if argv and not argv[0].endswith(".onnx") and not os.path.exists(argv[0]):
            # allow bare executables on PATH, but catch obvious typos early
            import shutil
            if shutil.which(argv[0]) is None:
                raise CleanerModelError(f"model executable not found: {argv[0]}")
        return SubprocessCleaner(target)
    raise ValueError(f"unknown cleaner spec {spec!r}")


def run_external_model(patch, cleaner):
    """Run one TilePatch through an external cleaner, shape-checked."""
    out = cleaner.clean_patch(patch.pixels)
    if out.shape != patch.pixels.shape:
        raise CleanerModelError(
            f"cleaner returned shape {out.shape}, expected {patch.pixels.shape}")
    return TilePatch(out, patch.row0, patch.col0, patch.valid_rows, patch.valid_cols)


def clean_map(dmap, cleaner, cfg=None, tile_size=256, overlap=32):
    """Full stage: tile -> per-patch cleaner -> stitch -> output filtration.

    Input must be discretized (post input-filtration / floating-point
    removal); output is again {0, 100, 255} with unchanged geometry.
    """
    cfg = cfg or dmap.thresholds or FiltrationConfig()
    dmap.validate_discretized()
    if isinstance(cleaner, str):
        cleaner = make_cleaner(cleaner)
    patches = tile_map(dmap, tile_size, overlap)
    cleaned = [run_external_model(p, cleaner) for p in patches]
    raster = stitch_map(cleaned, dmap.shape)
    codes = output_filter_values(raster, cfg)
    return DiscreteMap(codes, dmap.resolution, dmap.origin, cfg)

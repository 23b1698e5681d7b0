"""Independent reference implementations the tests check production code
against. These deliberately use different algorithms (sorted-merge crossing
enumeration, per-cell slab tests) than the shipped traversal kernels."""

import numpy as np


def supercover_oracle(r0, c0, r1, c1):
    """Cells touched by the segment between cell centers, via enumeration of
    gridline crossings merged in exact integer arithmetic."""
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    cells = [(r0, c0)]
    r, c = r0, c0
    i = j = 1  # next column / row crossing index
    while i <= dc or j <= dr:
        # crossing params: col i at (2i-1)/(2dc), row j at (2j-1)/(2dr);
        # cross-multiplied comparison stays in exact integers
        col_key = (2 * i - 1) * dr if i <= dc else None
        row_key = (2 * j - 1) * dc if j <= dr else None
        if row_key is None or (col_key is not None and col_key < row_key):
            c += sc
            i += 1
            cells.append((r, c))
        elif col_key is None or row_key < col_key:
            r += sr
            j += 1
            cells.append((r, c))
        else:  # corner: both side cells, then the diagonal
            cells.append((r + sr, c))
            cells.append((r, c + sc))
            r += sr
            c += sc
            i += 1
            j += 1
            cells.append((r, c))
    return cells


def _slab_entries(px, py, dx, dy, shape):
    """Entry/exit parameters of the ray against every cell's AABB."""
    h, w = shape
    cols = np.arange(w)
    rows = np.arange(h)
    big = 1e30
    if dx != 0.0:
        tx0 = (cols - px) / dx
        tx1 = (cols + 1.0 - px) / dx
        tx_lo, tx_hi = np.minimum(tx0, tx1), np.maximum(tx0, tx1)
    else:
        inside = (px >= cols) & (px < cols + 1.0)
        tx_lo = np.where(inside, -big, big)
        tx_hi = np.where(inside, big, -big)
    if dy != 0.0:
        ty0 = (rows - py) / dy
        ty1 = (rows + 1.0 - py) / dy
        ty_lo, ty_hi = np.minimum(ty0, ty1), np.maximum(ty0, ty1)
    else:
        inside = (py >= rows) & (py < rows + 1.0)
        ty_lo = np.where(inside, -big, big)
        ty_hi = np.where(inside, big, -big)
    t_enter = np.maximum(ty_lo[:, None], tx_lo[None, :])
    t_exit = np.minimum(ty_hi[:, None], tx_hi[None, :])
    return t_enter, t_exit


def brute_force_paint(occupied, px, py, angles, max_t, free_mask, hit_mask):
    """Paint one scan the slow way: per ray, slab-test every cell.

    Hit = occupied cell with the smallest non-negative entry; free = cells
    entered strictly before the stop parameter.
    """
    occ = np.asarray(occupied, dtype=bool)
    for a in angles:
        dx, dy = np.cos(a), np.sin(a)
        t_enter, t_exit = _slab_entries(px, py, dx, dy, occ.shape)
        entry = np.maximum(t_enter, 0.0)
        entered = (t_exit > entry) & (t_exit > 0.0) & (entry < max_t)
        occ_entered = entered & occ
        if occ_entered.any():
            t_hit = entry[occ_entered].min()
            hit = True
        else:
            t_hit = max_t
            hit = False
        free = entered & ~occ & (entry < t_hit)
        free_mask |= free
        if hit:
            winners = occ_entered & (entry == t_hit)
            rr, cc = np.nonzero(winners)
            hit_mask[rr[0], cc[0]] = True


def brute_force_clean_map(fp, poses, sim):
    """Independent clean-map renderer used as the datagen oracle."""
    from lidargrid.grid import FREE, OCCUPIED, UNKNOWN

    free_mask = np.zeros(fp.shape, dtype=bool)
    hit_mask = np.zeros(fp.shape, dtype=bool)
    base = sim.ray_angles()
    max_t = sim.max_range / fp.resolution
    for pose in np.asarray(poses, dtype=float):
        brute_force_paint(fp.occupied, pose[0] / fp.resolution,
                          pose[1] / fp.resolution, base + pose[2], max_t,
                          free_mask, hit_mask)
    codes = np.full(fp.shape, UNKNOWN, dtype=np.uint8)
    codes[free_mask] = FREE
    codes[hit_mask] = OCCUPIED
    return codes


def input_case_table(value, t1=0.12, t2=0.93, t3=0.96):
    """Literal transcription of the input filtration case split."""
    if value < t1:
        return 0
    if t2 <= value <= t3:
        return 100
    return 255  # value > t3 or t1 <= value < t2


def output_case_table(value, t1=0.21, t2=0.86):
    if value < t1:
        return 0
    if t1 <= value <= t2:
        return 100
    return 255

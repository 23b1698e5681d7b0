"""Grid ray traversal: integer supercover lines and first-hit DDA casting.

The supercover walk visits every cell the segment between two cell centers
touches (at exact lattice-corner crossings both side cells are included),
so no traversed cell is skipped during evidence updates. The DDA kernels
march a continuous ray through a binary occupancy raster and stop at the
first occupied cell; they are shared by the synthetic data generator, the
scan simulator, and the trajectory coverage check.

Grid convention everywhere: row <-> y, col <-> x; positions in cell units.
"""

import numpy as np
from numba import njit


def supercover_line(r0, c0, r1, c1):
    """Cells touched by the segment between centers of (r0,c0) and (r1,c1).

    Pure-integer arithmetic; returns a list of (row, col) in traversal order.
    """
    cells = [(r0, c0)]
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    r, c = r0, c0
    ir = ic = 0
    while ir < dr or ic < dc:
        # compare next crossing fractions (ic+0.5)/dc vs (ir+0.5)/dr
        decision = (1 + 2 * ic) * dr - (1 + 2 * ir) * dc
        if decision == 0:  # exact corner: pass through both side cells
            cells.append((r + sr, c))
            cells.append((r, c + sc))
            r += sr
            c += sc
            ir += 1
            ic += 1
        elif decision < 0:
            c += sc
            ic += 1
        else:
            r += sr
            ir += 1
        cells.append((r, c))
    return cells


@njit(cache=True)
def integrate_rays(log_odds, observed, intensity_sum, intensity_count,
                   r0, c0, end_rows, end_cols, end_intensity,
                   l_hit, l_miss, clamp_lo, clamp_hi):
    """Apply one scan's rays to the evidence arrays, in place.

    Each ray runs the supercover walk from the sensor cell to its endpoint
    cell; traversed cells get l_miss, the endpoint cell gets l_hit, and
    log-odds are clamped to [clamp_lo, clamp_hi] at each write. All cells
    must already be inside the array bounds (the grid expands beforehand).
    """
    n = end_rows.shape[0]
    for k in range(n):
        r1 = end_rows[k]
        c1 = end_cols[k]
        dr = abs(r1 - r0)
        dc = abs(c1 - c0)
        sr = 1 if r1 >= r0 else -1
        sc = 1 if c1 >= c0 else -1
        r = r0
        c = c0
        ir = 0
        ic = 0
        while ir < dr or ic < dc:
            # current cell is traversed, not the endpoint
            v = log_odds[r, c] + l_miss
            log_odds[r, c] = min(max(v, clamp_lo), clamp_hi)
            observed[r, c] = True
            decision = (1 + 2 * ic) * dr - (1 + 2 * ir) * dc
            if decision == 0:
                v = log_odds[r + sr, c] + l_miss
                log_odds[r + sr, c] = min(max(v, clamp_lo), clamp_hi)
                observed[r + sr, c] = True
                v = log_odds[r, c + sc] + l_miss
                log_odds[r, c + sc] = min(max(v, clamp_lo), clamp_hi)
                observed[r, c + sc] = True
                r += sr
                c += sc
                ir += 1
                ic += 1
            elif decision < 0:
                c += sc
                ic += 1
            else:
                r += sr
                ir += 1
        v = log_odds[r1, c1] + l_hit
        log_odds[r1, c1] = min(max(v, clamp_lo), clamp_hi)
        observed[r1, c1] = True
        intensity_sum[r1, c1] += end_intensity[k]
        intensity_count[r1, c1] += 1


@njit(cache=True)
def first_hit(occupied, px, py, dx, dy, max_t):
    """Distance (cell units) along unit (dx, dy) from (px, py) to the entry
    of the first occupied cell, or -1.0 if none within max_t / the grid."""
    H, W = occupied.shape
    c = int(np.floor(px))
    r = int(np.floor(py))
    if r < 0 or r >= H or c < 0 or c >= W:
        return -1.0
    if occupied[r, c]:
        return 0.0
    big = 1e30
    if dx > 0:
        step_c, t_max_x, t_dx = 1, (c + 1.0 - px) / dx, 1.0 / dx
    elif dx < 0:
        step_c, t_max_x, t_dx = -1, (px - c) / -dx, -1.0 / dx
    else:
        step_c, t_max_x, t_dx = 0, big, big
    if dy > 0:
        step_r, t_max_y, t_dy = 1, (r + 1.0 - py) / dy, 1.0 / dy
    elif dy < 0:
        step_r, t_max_y, t_dy = -1, (py - r) / -dy, -1.0 / dy
    else:
        step_r, t_max_y, t_dy = 0, big, big
    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            c += step_c
            t_max_x += t_dx
        else:
            t = t_max_y
            r += step_r
            t_max_y += t_dy
        if t >= max_t:
            return -1.0
        if r < 0 or r >= H or c < 0 or c >= W:
            return -1.0
        if occupied[r, c]:
            return t
    return -1.0


@njit(cache=True)
def measure_ranges(occupied, thin, px, py, cos_a, sin_a, transmissive, max_t):
    """Range (cell units) to the first blocking cell for each ray, -1.0 when
    nothing blocks within max_t. A ray with transmissive[i] set ignores cells
    flagged in `thin` (it sails through thin obstacles)."""
    H, W = occupied.shape
    n = cos_a.shape[0]
    out = np.full(n, -1.0)
    big = 1e30
    for i in range(n):
        dx = cos_a[i]
        dy = sin_a[i]
        c = int(np.floor(px))
        r = int(np.floor(py))
        if r < 0 or r >= H or c < 0 or c >= W:
            continue
        if occupied[r, c] and not (transmissive[i] and thin[r, c]):
            out[i] = 0.0
            continue
        if dx > 0:
            step_c, t_max_x, t_dx = 1, (c + 1.0 - px) / dx, 1.0 / dx
        elif dx < 0:
            step_c, t_max_x, t_dx = -1, (px - c) / -dx, -1.0 / dx
        else:
            step_c, t_max_x, t_dx = 0, big, big
        if dy > 0:
            step_r, t_max_y, t_dy = 1, (r + 1.0 - py) / dy, 1.0 / dy
        elif dy < 0:
            step_r, t_max_y, t_dy = -1, (py - r) / -dy, -1.0 / dy
        else:
            step_r, t_max_y, t_dy = 0, big, big
        while True:
            if t_max_x < t_max_y:
                t = t_max_x
                c += step_c
                t_max_x += t_dx
            else:
                t = t_max_y
                r += step_r
                t_max_y += t_dy
            if t >= max_t:
                break
            if r < 0 or r >= H or c < 0 or c >= W:
                break
            if occupied[r, c] and not (transmissive[i] and thin[r, c]):
                out[i] = t
                break
    return out


@njit(cache=True)
def paint_rays(px, py, cos_a, sin_a, t_hit, max_t, free_mask, hit_mask):
    """Paint measured rays into masks, possibly in a different frame than the
    one they were measured in.

    Cells entered before the stop parameter (the measured range, or max_t for
    no-return rays) go to free_mask; for a hit ray the cell containing the
    ray point at t_hit[i] goes to hit_mask.

    Rays that pass exactly through lattice corners are ambiguous for this
    measure-then-paint split (the hit parameter coincides with two crossing
    events); callers keep ray angles off exact axis/diagonal directions,
    e.g. via ScanSim2D's half-bin offset.
    """
    H, W = free_mask.shape
    n = cos_a.shape[0]
    big = 1e30
    for i in range(n):
        dx = cos_a[i]
        dy = sin_a[i]
        hit = t_hit[i] >= 0.0
        # a surface return lies exactly on a cell face; the wall-side cell
        # owns it, so nudge the stop parameter forward past the face
        t_stop = t_hit[i] + 1e-6 if hit else max_t
        c = int(np.floor(px))
        r = int(np.floor(py))
        if r < 0 or r >= H or c < 0 or c >= W:
            continue
        if dx > 0:
            step_c, t_max_x, t_dx = 1, (c + 1.0 - px) / dx, 1.0 / dx
        elif dx < 0:
            step_c, t_max_x, t_dx = -1, (px - c) / -dx, -1.0 / dx
        else:
            step_c, t_max_x, t_dx = 0, big, big
        if dy > 0:
            step_r, t_max_y, t_dy = 1, (r + 1.0 - py) / dy, 1.0 / dy
        elif dy < 0:
            step_r, t_max_y, t_dy = -1, (py - r) / -dy, -1.0 / dy
        else:
            step_r, t_max_y, t_dy = 0, big, big
        out_of_bounds = False
        while True:
            t_next = t_max_x if t_max_x < t_max_y else t_max_y
            # a hit cell is entered at exactly t_stop; free marching stops
            # strictly before max_t for no-return rays
            if (t_next > t_stop) if hit else (t_next >= t_stop):
                break
            free_mask[r, c] = True
            if t_max_x < t_max_y:
                c += step_c
                t_max_x += t_dx
            else:
                r += step_r
                t_max_y += t_dy
            if r < 0 or r >= H or c < 0 or c >= W:
                out_of_bounds = True
                break
        if out_of_bounds:
            continue
        if hit:
            hit_mask[r, c] = True
        else:
            free_mask[r, c] = True


@njit(cache=True)
def render_scan_rays(occupied, thin, px, py, cos_a, sin_a, transmissive,
                     max_t, free_mask, hit_mask):
    """Cast one scan's rays over a binary floorplan, painting results.

    Cells entered before the first blocking cell are painted into free_mask;
    the blocking cell is painted into hit_mask. A ray with transmissive[i]
    set ignores cells flagged in `thin` (it sails through thin obstacles).
    """
    H, W = occupied.shape
    n = cos_a.shape[0]
    big = 1e30
    for i in range(n):
        dx = cos_a[i]
        dy = sin_a[i]
        c = int(np.floor(px))
        r = int(np.floor(py))
        if r < 0 or r >= H or c < 0 or c >= W:
            continue
        if dx > 0:
            step_c, t_max_x, t_dx = 1, (c + 1.0 - px) / dx, 1.0 / dx
        elif dx < 0:
            step_c, t_max_x, t_dx = -1, (px - c) / -dx, -1.0 / dx
        else:
            step_c, t_max_x, t_dx = 0, big, big
        if dy > 0:
            step_r, t_max_y, t_dy = 1, (r + 1.0 - py) / dy, 1.0 / dy
        elif dy < 0:
            step_r, t_max_y, t_dy = -1, (py - r) / -dy, -1.0 / dy
        else:
            step_r, t_max_y, t_dy = 0, big, big
        while True:
            if occupied[r, c] and not (transmissive[i] and thin[r, c]):
                hit_mask[r, c] = True
                break
            free_mask[r, c] = True
            if t_max_x < t_max_y:
                t = t_max_x
                c += step_c
                t_max_x += t_dx
            else:
                t = t_max_y
                r += step_r
                t_max_y += t_dy
            if t >= max_t:
                break
            if r < 0 or r >= H or c < 0 or c >= W:
                break

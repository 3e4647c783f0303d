"""Greedy image-to-strokes decomposition on a progressive grid schedule.

Each pass splits the canvas into a square grid and fits a budget of strokes
per cell. A stroke proposal takes its (uniform) color from the mean of a
random sub-rectangle of the cell, then coordinate descent on position, size
and orientation greedily shrinks the cell's L2 error against the reference.
"""

from __future__ import annotations

import math

import numpy as np

from ..render import _impl as _kernels
from ..render import affine_inverse, stroke_to_affine, _stroke_bbox
from ..strokes import BrushPrimitive, StrokeSequence, default_primitive
from .schedule import DecompositionSchedule

_DESCENT_ITERS = 3
_MIN_SIGMA_PIXELS = 2.0


def _clip_box(box, cell):
    y0 = max(box[0], cell[0])
    y1 = min(box[1], cell[1])
    x0 = max(box[2], cell[2])
    x1 = min(box[3], cell[3])
    return y0, y1, x0, x1


def _cell_delta(canvas, ref, tex, row, cell_box):
    """L2 change inside the cell if ``row`` were composited onto ``canvas``."""
    h, w = canvas.shape[:2]
    if row[5] <= 0.0 or row[6] <= 0.0:
        return 0.0
    m = stroke_to_affine(row, h, w)
    box = _clip_box(_stroke_bbox(m, h, w), cell_box)
    if box[0] >= box[1] or box[2] >= box[3]:
        return 0.0
    return _kernels.region_l2_delta(canvas, ref, tex, affine_inverse(m), np.ascontiguousarray(row[2:5]), *box)


def _fit_stroke(canvas, ref, tex, cell_unit, cell_box, sigma_lo, sigma_hi, rng):
    u0, v0, u1, v1 = cell_unit
    cw, ch = u1 - u0, v1 - v0
    h, w = ref.shape[:2]

    # proposal: color from a random sub-rectangle of the cell
    cx = rng.uniform(u0, u1)
    cy = rng.uniform(v0, v1)
    hw = rng.uniform(0.15, 0.5) * cw
    hh = rng.uniform(0.15, 0.5) * ch
    px0 = int(np.clip(math.floor((cx - hw) * w), 0, w - 1))
    px1 = int(np.clip(math.ceil((cx + hw) * w), px0 + 1, w))
    py0 = int(np.clip(math.floor((cy - hh) * h), 0, h - 1))
    py1 = int(np.clip(math.ceil((cy + hh) * h), py0 + 1, h))
    color = ref[py0:py1, px0:px1].reshape(-1, 3).mean(axis=0)

    row = np.empty(8, dtype=np.float64)
    row[0], row[1] = cx, cy
    row[2:5] = np.clip(color, 0.0, 1.0)
    row[5] = np.clip(2.0 * hh, sigma_lo, sigma_hi)
    row[6] = np.clip(2.0 * hw, sigma_lo, sigma_hi)
    row[7] = rng.uniform(0.0, 1.0)

    best = _cell_delta(canvas, ref, tex, row, cell_box)
    pos_step = 0.25 * min(cw, ch)
    sig_step = 0.25 * min(cw, ch)
    ang_step = 0.25
    for _ in range(_DESCENT_ITERS):
        for idx, step, lo, hi in (
            (0, pos_step, u0, u1),
            (1, pos_step, v0, v1),
            (5, sig_step, sigma_lo, sigma_hi),
            (6, sig_step, sigma_lo, sigma_hi),
            (7, ang_step, 0.0, 1.0),
        ):
            for sign in (1.0, -1.0):
                cand = float(np.clip(row[idx] + sign * step, lo, hi))
                if cand == row[idx]:
                    continue
                old = row[idx]
                row[idx] = cand
                delta = _cell_delta(canvas, ref, tex, row, cell_box)
                if delta < best:
                    best = delta
                else:
                    row[idx] = old
        pos_step *= 0.5
        sig_step *= 0.5
        ang_step *= 0.5
    return row


def decompose_image(
    image: np.ndarray,
    schedule: DecompositionSchedule | None = None,
    rng: np.random.Generator | None = None,
    primitive: BrushPrimitive | None = None,
) -> StrokeSequence:
    """Decompose an image into exactly ``schedule.total_strokes`` strokes.

    Strokes of pass p keep their centers inside their grid cell, carry a
    uniform color, and have both sigma components clamped to
    ``schedule.sigma_max``. Emission order is part of the contract: pass by
    pass, row-major over cells, the per-cell budget consecutively.
    """
    schedule = schedule or DecompositionSchedule()
    rng = rng if rng is not None else np.random.default_rng(0)
    primitive = primitive or default_primitive()
    ref = np.ascontiguousarray(image, dtype=np.float64)
    if ref.ndim != 3 or ref.shape[2] != 3:
        raise ValueError("reference image must be HxWx3")
    h, w = ref.shape[:2]
    if h < 32 or w < 32:
        raise ValueError("reference image must be at least 32x32")

    tex = primitive.texture
    canvas = np.ones_like(ref)
    sigma_lo = min(_MIN_SIGMA_PIXELS / min(h, w), schedule.sigma_max)
    rows = []
    for grid, budget in zip(schedule.grid_sizes, schedule.strokes_per_region):
        side = math.isqrt(grid)
        sigma_hi = min(schedule.sigma_max, 1.25 / side)
        sigma_hi = max(sigma_hi, sigma_lo)
        for gy in range(side):
            v0, v1 = gy / side, (gy + 1) / side
            cy0, cy1 = int(math.floor(v0 * h)), int(math.ceil(v1 * h))
            for gx in range(side):
                u0, u1 = gx / side, (gx + 1) / side
                cx0, cx1 = int(math.floor(u0 * w)), int(math.ceil(u1 * w))
                cell_box = (cy0, cy1, cx0, cx1)
                for _ in range(budget):
                    row = _fit_stroke(canvas, ref, tex, (u0, v0, u1, v1), cell_box, sigma_lo, sigma_hi, rng)
                    m = stroke_to_affine(row, h, w)
                    box = _stroke_bbox(m, h, w)
                    _kernels.composite(canvas, tex, affine_inverse(m), np.ascontiguousarray(row[2:5]), *box)
                    rows.append(row)
    return StrokeSequence(np.stack(rows))


def assign_subjects(seq: StrokeSequence, mask: np.ndarray) -> StrokeSequence:
    """Attach subject ids: the segmentation label at each stroke center pixel."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("segmentation mask must be 2-D integer labels")
    h, w = mask.shape
    cols = np.clip((seq.params[:, 0] * w).astype(np.int64), 0, w - 1)
    rows = np.clip((seq.params[:, 1] * h).astype(np.int64), 0, h - 1)
    return StrokeSequence(seq.params.copy(), mask[rows, cols].astype(np.int64))

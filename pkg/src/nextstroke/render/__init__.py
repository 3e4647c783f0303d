"""Parameter-free stroke renderer.

Strokes are rasterized by warping a fixed brush template with an affine
transform (scale, rotate, translate) and alpha-compositing it over the
canvas: ``out = alpha * color + (1 - alpha) * canvas``.

The hot per-pixel kernels live in two interchangeable backends: a
numba-jitted one (default) and a pure-numpy one. Set
``NEXTSTROKE_BACKEND=numpy`` to force the fallback; both produce
bit-identical output.
"""

from __future__ import annotations

import math
import os

import numpy as np

from ..strokes import (
    BrushPrimitive,
    Canvas,
    InvalidStrokeError,
    Stroke,
    StrokeSequence,
    default_primitive,
)

BACKEND_ENV_VAR = "NEXTSTROKE_BACKEND"

from . import _numpy_impl


def _load_backend():
    choice = os.environ.get(BACKEND_ENV_VAR, "numba").strip().lower()
    if choice in ("numpy", "fallback"):
        return _numpy_impl
    if choice not in ("", "numba", "auto"):
        raise ValueError(f"unknown {BACKEND_ENV_VAR} value {choice!r}; use 'numba' or 'numpy'")
    try:
        from . import _numba_impl

        return _numba_impl
    except ImportError:
        return _numpy_impl


_impl = _load_backend()


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return _impl.BACKEND_NAME


def get_backend(name: str):
    """Fetch a kernel module by name, regardless of the active default."""
    if name == "numpy":
        return _numpy_impl
    if name == "numba":
        from . import _numba_impl

        return _numba_impl
    raise ValueError(f"unknown backend {name!r}")


def _as_row(stroke) -> np.ndarray:
    row = stroke.as_array() if isinstance(stroke, Stroke) else np.asarray(stroke, dtype=np.float64)
    if row.shape != (8,):
        raise InvalidStrokeError(f"expected a single stroke row of 8 floats, got shape {row.shape}")
    if not np.isfinite(row).all():
        raise InvalidStrokeError("stroke parameters must be finite")
    return row


def stroke_to_affine(stroke, height, width) -> np.ndarray:
    """2x3 matrix mapping the centered unit brush frame [-0.5, 0.5]^2 to canvas pixels.

    Composition: scale by (sigma_w * W, sigma_h * H), rotate counter-clockwise
    by omega * pi, translate to (x_x * W, x_y * H). The brush frame's x axis is
    the stroke width axis and y the height axis.
    """
    row = _as_row(stroke)
    sw = row[6] * width
    sh = row[5] * height
    theta = row[7] * math.pi
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [c * sw, -s * sh, row[0] * width],
            [s * sw, c * sh, row[1] * height],
        ],
        dtype=np.float64,
    )


def affine_inverse(m: np.ndarray) -> np.ndarray:
    """Invert a 2x3 affine (requires a non-singular linear part)."""
    a, b, tx = m[0]
    c, d, ty = m[1]
    det = a * d - b * c
    if det == 0.0:
        raise ZeroDivisionError("affine transform is singular")
    ia, ib = d / det, -b / det
    ic, id_ = -c / det, a / det
    return np.array(
        [
            [ia, ib, -(ia * tx + ib * ty)],
            [ic, id_, -(ic * tx + id_ * ty)],
        ],
        dtype=np.float64,
    )


def _stroke_bbox(m, height, width):
    corners = np.array([[-0.5, -0.5], [-0.5, 0.5], [0.5, -0.5], [0.5, 0.5]])
    pts = corners @ m[:, :2].T + m[:, 2]
    x0 = max(0, int(math.floor(pts[:, 0].min())) - 1)
    x1 = min(width, int(math.ceil(pts[:, 0].max())) + 1)
    y0 = max(0, int(math.floor(pts[:, 1].min())) - 1)
    y1 = min(height, int(math.ceil(pts[:, 1].max())) + 1)
    return y0, y1, x0, x1


def _stroke_geometry(row, height, width):
    """(inverse transform, bbox) for a renderable stroke, or None for a zero-size no-op."""
    if row[5] <= 0.0 or row[6] <= 0.0:
        return None
    m = stroke_to_affine(row, height, width)
    inv = affine_inverse(m)
    return inv, _stroke_bbox(m, height, width)


def render_stroke(canvas: Canvas, stroke, primitive: BrushPrimitive | None = None) -> Canvas:
    """Composite one stroke over the canvas, returning a new canvas."""
    row = _as_row(stroke)
    out = canvas.copy()
    _composite_into(out.pixels, row, primitive)
    return out


def _composite_into(pixels: np.ndarray, row: np.ndarray, primitive: BrushPrimitive | None = None) -> None:
    primitive = primitive or default_primitive()
    geo = _stroke_geometry(row, pixels.shape[0], pixels.shape[1])
    if geo is None:
        return
    inv, (y0, y1, x0, x1) = geo
    _impl.composite(pixels, primitive.texture, inv, np.ascontiguousarray(row[2:5]), y0, y1, x0, x1)


def render_sequence(canvas: Canvas, seq: StrokeSequence, primitive: BrushPrimitive | None = None, emit_frames=False):
    """Fold render_stroke over the sequence.

    Returns the final canvas, or (canvas, frames) with one canvas per prefix
    when ``emit_frames`` is set.
    """
    primitive = primitive or default_primitive()
    out = canvas.copy()
    frames = [] if emit_frames else None
    for row in seq.params:
        _composite_into(out.pixels, _as_row(row), primitive)
        if emit_frames:
            frames.append(out.copy())
    if emit_frames:
        return out, frames
    return out


def stroke_alpha(stroke, height, width, primitive: BrushPrimitive | None = None, out=None) -> np.ndarray:
    """Rasterize one stroke's alpha matte on an H x W grid."""
    primitive = primitive or default_primitive()
    row = _as_row(stroke)
    if out is None:
        out = np.zeros((height, width), dtype=np.float64)
    else:
        out[:] = 0.0
    geo = _stroke_geometry(row, height, width)
    if geo is not None:
        inv, (y0, y1, x0, x1) = geo
        _impl.alpha_map(out, primitive.texture, inv, y0, y1, x0, x1)
    return out


def sequence_alpha(seq: StrokeSequence, height, width, primitive: BrushPrimitive | None = None) -> np.ndarray:
    """Union (max) of per-stroke alpha mattes."""
    acc = np.zeros((height, width), dtype=np.float64)
    buf = np.zeros_like(acc)
    for row in seq.params:
        stroke_alpha(row, height, width, primitive, out=buf)
        np.maximum(acc, buf, out=acc)
    return acc

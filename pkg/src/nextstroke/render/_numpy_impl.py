"""Pure-numpy rasterization kernels (fallback backend).

Every kernel mirrors the numba backend expression-for-expression so the two
paths produce bit-identical canvases.
"""

import numpy as np

BACKEND_NAME = "numpy"


def _sample_alpha(tex, inv, y0, y1, x0, x1):
    # Map pixel centers through the inverse stroke transform into texel space
    # and bilinearly sample the template with zero padding outside.
    n = tex.shape[0]
    xs = np.arange(x0, x1, dtype=np.float64) + 0.5
    ys = np.arange(y0, y1, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys, indexing="xy")
    u = inv[0, 0] * px + inv[0, 1] * py + inv[0, 2]
    v = inv[1, 0] * px + inv[1, 1] * py + inv[1, 2]
    tu = (u + 0.5) * n - 0.5
    tv = (v + 0.5) * n - 0.5
    u0 = np.floor(tu)
    v0 = np.floor(tv)
    fu = tu - u0
    fv = tv - v0
    iu = u0.astype(np.int64)
    iv = v0.astype(np.int64)

    def tap(ix, iy):
        valid = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
        vals = tex[np.clip(iy, 0, n - 1), np.clip(ix, 0, n - 1)]
        return np.where(valid, vals, 0.0)

    t00 = tap(iu, iv)
    t01 = tap(iu + 1, iv)
    t10 = tap(iu, iv + 1)
    t11 = tap(iu + 1, iv + 1)
    return (t00 * (1.0 - fu) + t01 * fu) * (1.0 - fv) + (t10 * (1.0 - fu) + t11 * fu) * fv


def composite(canvas, tex, inv, color, y0, y1, x0, x1):
    if y1 <= y0 or x1 <= x0:
        return
    alpha = _sample_alpha(tex, inv, y0, y1, x0, x1)
    region = canvas[y0:y1, x0:x1, :]
    canvas[y0:y1, x0:x1, :] = alpha[:, :, None] * color[None, None, :] + (1.0 - alpha[:, :, None]) * region


def alpha_map(out, tex, inv, y0, y1, x0, x1):
    if y1 <= y0 or x1 <= x0:
        return
    out[y0:y1, x0:x1] = _sample_alpha(tex, inv, y0, y1, x0, x1)


def region_l2_delta(canvas, ref, tex, inv, color, y0, y1, x0, x1):
    """Change in sum((canvas - ref)^2) over the box if the stroke were composited."""
    if y1 <= y0 or x1 <= x0:
        return 0.0
    alpha = _sample_alpha(tex, inv, y0, y1, x0, x1)[:, :, None]
    old = canvas[y0:y1, x0:x1, :]
    new = alpha * color[None, None, :] + (1.0 - alpha) * old
    r = ref[y0:y1, x0:x1, :]
    return float(np.sum((new - r) ** 2) - np.sum((old - r) ** 2))


def region_l2(canvas, ref, y0, y1, x0, x1):
    if y1 <= y0 or x1 <= x0:
        return 0.0
    diff = canvas[y0:y1, x0:x1, :] - ref[y0:y1, x0:x1, :]
    return float(np.sum(diff * diff))

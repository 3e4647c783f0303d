"""Numba-jitted rasterization kernels (default backend).

Keep these loops in lockstep with ``_numpy_impl``: same arithmetic, same
evaluation order, no fastmath, so both backends stay bit-identical.
"""

import numba
import numpy as np

BACKEND_NAME = "numba"

_jit = numba.njit(cache=True, nogil=True)


@_jit
def _texel(tex, ix, iy):
    n = tex.shape[0]
    if ix < 0 or ix >= n or iy < 0 or iy >= n:
        return 0.0
    return tex[iy, ix]


@_jit
def _alpha_at(tex, inv, px, py):
    n = tex.shape[0]
    u = inv[0, 0] * px + inv[0, 1] * py + inv[0, 2]
    v = inv[1, 0] * px + inv[1, 1] * py + inv[1, 2]
    tu = (u + 0.5) * n - 0.5
    tv = (v + 0.5) * n - 0.5
    u0 = np.floor(tu)
    v0 = np.floor(tv)
    fu = tu - u0
    fv = tv - v0
    iu = np.int64(u0)
    iv = np.int64(v0)
    t00 = _texel(tex, iu, iv)
    t01 = _texel(tex, iu + 1, iv)
    t10 = _texel(tex, iu, iv + 1)
    t11 = _texel(tex, iu + 1, iv + 1)
    return (t00 * (1.0 - fu) + t01 * fu) * (1.0 - fv) + (t10 * (1.0 - fu) + t11 * fu) * fv


@_jit
def composite(canvas, tex, inv, color, y0, y1, x0, x1):
    for y in range(y0, y1):
        py = y + 0.5
        for x in range(x0, x1):
            px = x + 0.5
            a = _alpha_at(tex, inv, px, py)
            for ch in range(3):
                canvas[y, x, ch] = a * color[ch] + (1.0 - a) * canvas[y, x, ch]


@_jit
def alpha_map(out, tex, inv, y0, y1, x0, x1):
    for y in range(y0, y1):
        py = y + 0.5
        for x in range(x0, x1):
            out[y, x] = _alpha_at(tex, inv, x + 0.5, py)


@_jit
def region_l2_delta(canvas, ref, tex, inv, color, y0, y1, x0, x1):
    acc = 0.0
    for y in range(y0, y1):
        py = y + 0.5
        for x in range(x0, x1):
            a = _alpha_at(tex, inv, x + 0.5, py)
            for ch in range(3):
                old = canvas[y, x, ch]
                new = a * color[ch] + (1.0 - a) * old
                r = ref[y, x, ch]
                acc += (new - r) * (new - r) - (old - r) * (old - r)
    return acc


@_jit
def region_l2(canvas, ref, y0, y1, x0, x1):
    acc = 0.0
    for y in range(y0, y1):
        for x in range(x0, x1):
            for ch in range(3):
                d = canvas[y, x, ch] - ref[y, x, ch]
                acc += d * d
    return acc

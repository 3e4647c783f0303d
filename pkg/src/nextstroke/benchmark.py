"""Benchmark the numba kernels against the pure-numpy fallback."""

import time

import numpy as np

from .render import affine_inverse, get_backend, stroke_to_affine, _stroke_bbox
from .strokes import default_primitive


def _random_strokes(n, rng):
    rows = rng.random((n, 8))
    rows[:, 5:7] = 0.05 + 0.3 * rows[:, 5:7]
    return rows


def run_render_benchmark(size=256, n_strokes=200, repeats=3, seed=0):
    """Time full-canvas stroke compositing on both backends; returns a result dict."""
    rng = np.random.default_rng(seed)
    rows = _random_strokes(n_strokes, rng)
    tex = default_primitive().texture
    results = {}
    outputs = {}
    for name in ("numpy", "numba"):
        try:
            impl = get_backend(name)
        except ImportError:
            continue
        canvas = np.ones((size, size, 3), dtype=np.float64)
        # warm-up pass also triggers JIT compilation for the numba backend
        m = stroke_to_affine(rows[0], size, size)
        impl.composite(canvas, tex, affine_inverse(m), np.ascontiguousarray(rows[0, 2:5]), *_stroke_bbox(m, size, size))
        best = np.inf
        for _ in range(repeats):
            canvas = np.ones((size, size, 3), dtype=np.float64)
            t0 = time.perf_counter()
            for row in rows:
                m = stroke_to_affine(row, size, size)
                impl.composite(canvas, tex, affine_inverse(m), np.ascontiguousarray(row[2:5]), *_stroke_bbox(m, size, size))
            best = min(best, time.perf_counter() - t0)
        results[name] = best
        outputs[name] = canvas
    if set(outputs) == {"numpy", "numba"}:
        results["bit_identical"] = bool((outputs["numpy"] == outputs["numba"]).all())
        results["speedup"] = results["numpy"] / results["numba"]
    results["size"] = size
    results["n_strokes"] = n_strokes
    return results


def format_benchmark(results) -> str:
    lines = [f"render benchmark: {results['n_strokes']} strokes on {results['size']}x{results['size']}"]
    for name in ("numpy", "numba"):
        if name in results:
            lines.append(f"  {name:>6}: {results[name] * 1e3:8.2f} ms")
    if "speedup" in results:
        lines.append(f"  speedup (numba vs numpy): {results['speedup']:.1f}x")
        lines.append(f"  outputs bit-identical: {results['bit_identical']}")
    return "\n".join(lines)

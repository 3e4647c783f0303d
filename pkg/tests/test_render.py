import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nextstroke import BrushPrimitive, Canvas, InvalidStrokeError, Stroke, StrokeSequence
from nextstroke.render import (
    affine_inverse,
    render_sequence,
    render_stroke,
    stroke_alpha,
    stroke_to_affine,
)

from conftest import random_strokes


def oracle_affine(stroke: Stroke, height, width):
    """Independent composition: translate @ rotate @ scale as explicit matrices."""
    sw, sh = stroke.sigma[1] * width, stroke.sigma[0] * height
    theta = stroke.omega * math.pi
    scale = np.array([[sw, 0.0], [0.0, sh]])
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    lin = rot @ scale
    t = np.array([stroke.x[0] * width, stroke.x[1] * height])
    return lin, t


class TestStrokeToAffine:
    def test_identity_scale_maps_corners_to_canvas_extent(self):
        s = Stroke(x=(0.5, 0.5), rho=(0, 0, 0), sigma=(1.0, 1.0), omega=0.0)
        m = stroke_to_affine(s, 100, 200)
        corners = np.array([[-0.5, -0.5], [0.5, 0.5]])
        mapped = corners @ m[:, :2].T + m[:, 2]
        np.testing.assert_allclose(mapped, [[0.0, 0.0], [200.0, 100.0]])

    def test_quarter_turn_swaps_axes(self):
        # omega=0.5 is a 90-degree CCW rotation: the width axis lands on the vertical
        s = Stroke(x=(0.5, 0.5), rho=(0, 0, 0), sigma=(0.2, 0.4), omega=0.5)
        m = stroke_to_affine(s, 100, 100)
        unit_w = m[:, :2] @ np.array([1.0, 0.0])
        assert abs(unit_w[0]) < 1e-12
        assert unit_w[1] == pytest.approx(0.4 * 100)

    def test_corners_match_matrix_multiply_oracle(self):
        s = Stroke(x=(0.25, 0.75), rho=(0, 0, 0), sigma=(0.1, 0.2), omega=0.25)
        m = stroke_to_affine(s, 256, 256)
        lin, t = oracle_affine(s, 256, 256)
        for corner in [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]:
            expected = lin @ np.array(corner) + t
            got = m[:, :2] @ np.array(corner) + m[:, 2]
            np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)

    def test_non_finite_parameter_rejected(self):
        with pytest.raises(InvalidStrokeError):
            stroke_to_affine(np.array([0.5, np.nan, 0, 0, 0, 0.1, 0.1, 0.0]), 64, 64)

    def test_invertible_for_positive_sigma(self, rng):
        for row in random_strokes(20, rng):
            m = stroke_to_affine(row, 64, 64)
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            assert det > 0
            inv = affine_inverse(m)
            eye = inv[:, :2] @ m[:, :2]
            np.testing.assert_allclose(eye, np.eye(2), atol=1e-9)


class TestRenderStroke:
    def test_zero_size_stroke_is_bitexact_noop(self, rng):
        canvas = Canvas(rng.random((32, 32, 3)))
        row = np.array([0.5, 0.5, 1.0, 0.2, 0.3, 0.0, 0.2, 0.1])
        out = render_stroke(canvas, row)
        assert (out.pixels == canvas.pixels).all()

    def test_opaque_full_cover_saturates_to_color(self):
        canvas = Canvas(np.random.default_rng(0).random((64, 64, 3)))
        s = Stroke(x=(0.5, 0.5), rho=(1.0, 0.0, 0.0), sigma=(1.0, 1.0), omega=0.0)
        out = render_stroke(canvas, s, BrushPrimitive.full_cover())
        assert (out.pixels == np.array([1.0, 0.0, 0.0])).all()

    def test_half_alpha_blends_midway(self):
        canvas = Canvas.blank(16, 16, value=0.0)
        s = Stroke(x=(0.5, 0.5), rho=(1.0, 1.0, 1.0), sigma=(1.0, 1.0), omega=0.0)
        half = BrushPrimitive(np.full((128, 128), 0.5))
        out = render_stroke(canvas, s, half)
        assert (out.pixels == 0.5).all()

    def test_deterministic(self, rng):
        canvas = Canvas(rng.random((48, 48, 3)))
        row = random_strokes(1, rng)[0]
        a = render_stroke(canvas, row)
        b = render_stroke(canvas, row)
        assert (a.pixels == b.pixels).all()

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_compositing_stays_within_convex_bounds(self, seed):
        rng = np.random.default_rng(seed)
        canvas = Canvas(rng.random((24, 24, 3)))
        row = random_strokes(1, rng)[0]
        out = render_stroke(canvas, row)
        lo = np.minimum(canvas.pixels, row[2:5])
        hi = np.maximum(canvas.pixels, row[2:5])
        assert (out.pixels >= lo - 1e-9).all()
        assert (out.pixels <= hi + 1e-9).all()
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0


class TestRenderSequence:
    def test_empty_sequence_unchanged(self, rng):
        canvas = Canvas(rng.random((16, 16, 3)))
        out = render_sequence(canvas, StrokeSequence.empty())
        assert (out.pixels == canvas.pixels).all()

    def test_disjoint_strokes_commute(self):
        canvas = Canvas.blank(64, 64)
        a = np.array([0.2, 0.2, 0.9, 0.1, 0.1, 0.1, 0.1, 0.0])
        b = np.array([0.8, 0.8, 0.1, 0.9, 0.1, 0.1, 0.1, 0.25])
        ab = render_sequence(canvas, StrokeSequence(np.stack([a, b])))
        ba = render_sequence(canvas, StrokeSequence(np.stack([b, a])))
        assert (ab.pixels == ba.pixels).all()

    def test_matches_fold_oracle_bitexact(self, rng):
        canvas = Canvas(rng.random((48, 48, 3)))
        rows = random_strokes(3, rng, sigma_range=(0.2, 0.5))
        rows[:, 0:2] = 0.5  # force overlap
        seq = StrokeSequence(rows)
        folded = canvas
        for row in rows:
            folded = render_stroke(folded, row)
        out = render_sequence(canvas, seq)
        assert (out.pixels == folded.pixels).all()

    def test_emits_one_frame_per_prefix(self, rng):
        canvas = Canvas.blank(32, 32)
        rows = random_strokes(4, rng)
        out, frames = render_sequence(canvas, StrokeSequence(rows), emit_frames=True)
        assert len(frames) == 4
        assert (frames[-1].pixels == out.pixels).all()
        for i, frame in enumerate(frames):
            expected = render_sequence(canvas, StrokeSequence(rows[: i + 1]))
            assert (frame.pixels == expected.pixels).all()

    def test_permuting_non_overlapping_strokes_is_invariant(self, rng):
        canvas = Canvas.blank(64, 64)
        centers = [(0.15, 0.15), (0.5, 0.15), (0.85, 0.15), (0.15, 0.6), (0.5, 0.6)]
        rows = np.stack(
            [np.array([cx, cy, *rng.random(3), 0.08, 0.08, rng.random()]) for cx, cy in centers]
        )
        base = render_sequence(canvas, StrokeSequence(rows))
        for _ in range(5):
            perm = rng.permutation(len(rows))
            out = render_sequence(canvas, StrokeSequence(rows[perm]))
            assert (out.pixels == base.pixels).all()


class TestStrokeAlpha:
    def test_alpha_in_unit_interval_and_zero_outside(self, rng):
        row = np.array([0.3, 0.3, 0.5, 0.5, 0.5, 0.2, 0.2, 0.0])
        alpha = stroke_alpha(row, 64, 64)
        assert alpha.min() >= 0.0 and alpha.max() <= 1.0
        assert alpha[60:, 60:].max() == 0.0

    def test_zero_size_stroke_has_empty_support(self):
        row = np.array([0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0])
        assert stroke_alpha(row, 32, 32).max() == 0.0

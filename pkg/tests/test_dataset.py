import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nextstroke import Canvas, StrokeSequence
from nextstroke.dataset import (
    DecompositionSchedule,
    MINI_SCHEDULE,
    PrecedenceGraph,
    ReorderWeights,
    StrokeDataset,
    assign_subjects,
    build_dataset,
    build_precedence,
    decompose_image,
    manifest_checksum,
    pair_cost_matrix,
    permutation_cost,
    render_checksum_for,
    reorder_cost,
    reorder_sequence,
    split_ids,
)
from nextstroke.png_io import save_canvas
from nextstroke.render import render_sequence, stroke_alpha

from conftest import random_strokes, smooth_image


def oracle_reorder_cost(seq, sids, w):
    """Direct term-by-term summation."""
    p = seq.params
    total = 0.0
    for t in range(1, len(seq)):
        total += w.lambda_ord_x * ((p[t, 0:2] - p[t - 1, 0:2]) ** 2).sum()
        total += w.lambda_ord_rho * ((p[t, 2:5] - p[t - 1, 2:5]) ** 2).sum()
        total += w.lambda_ord_sigma * ((p[t, 5:7] - p[t - 1, 5:7]) ** 2).sum()
        total += w.lambda_obj * float(sids[t] != sids[t - 1])
    return total


def oracle_precedence(seq):
    """O(n^2) pairwise alpha-support intersection, straight from full masks."""
    n = len(seq)
    masks = [stroke_alpha(seq.params[i], 128, 128) > 0 for i in range(n)]
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if np.logical_and(masks[i], masks[j]).any():
                edges.add((i, j))
    return edges


class TestDecompose:
    def test_default_schedule_emits_790_strokes_with_sigma_clamp(self):
        seq = decompose_image(smooth_image(64), DecompositionSchedule(), np.random.default_rng(0))
        assert len(seq) == 790
        assert seq.params[:, 5:7].max() <= 0.4
        seq.validate()

    def test_stroke_centers_stay_inside_their_cells(self):
        schedule = MINI_SCHEDULE
        seq = decompose_image(smooth_image(48, seed=3), schedule, np.random.default_rng(1))
        # emission order: pass by pass, row-major cells, budget strokes per cell
        idx = 0
        for grid, budget in zip(schedule.grid_sizes, schedule.strokes_per_region):
            side = math.isqrt(grid)
            for gy in range(side):
                for gx in range(side):
                    chunk = seq.params[idx : idx + budget]
                    idx += budget
                    assert (chunk[:, 0] >= gx / side).all() and (chunk[:, 0] <= (gx + 1) / side).all()
                    assert (chunk[:, 1] >= gy / side).all() and (chunk[:, 1] <= (gy + 1) / side).all()
        assert idx == len(seq)

    def test_uniform_image_yields_uniform_colors(self):
        img = np.full((48, 48, 3), 0.5)
        seq = decompose_image(img, MINI_SCHEDULE, np.random.default_rng(2))
        assert np.abs(seq.params[:, 2:5] - 0.5).max() < 1e-3

    def test_tiny_image_rejected(self):
        with pytest.raises(ValueError):
            decompose_image(np.zeros((16, 16, 3)), MINI_SCHEDULE, np.random.default_rng(0))

    def test_subject_assignment_reads_center_pixel(self):
        seq = StrokeSequence(np.array([[0.1, 0.1, 0, 0, 0, 0.1, 0.1, 0], [0.9, 0.9, 0, 0, 0, 0.1, 0.1, 0]]))
        mask = np.zeros((10, 10), dtype=np.int64)
        mask[5:, 5:] = 7
        tagged = assign_subjects(seq, mask)
        assert tagged.subject_ids.tolist() == [0, 7]


class TestReorderCost:
    def test_single_stroke_costs_zero(self, rng):
        seq = StrokeSequence(random_strokes(1, rng))
        assert reorder_cost(seq) == 0.0

    def test_identical_consecutive_strokes_cost_zero(self, rng):
        row = random_strokes(1, rng)[0]
        seq = StrokeSequence(np.stack([row, row]), np.array([3, 3]))
        assert reorder_cost(seq) == 0.0

    def test_four_stroke_case_matches_summation_oracle(self, rng):
        seq = StrokeSequence(random_strokes(4, rng), np.array([0, 0, 1, 1]))
        w = ReorderWeights(1.0, 1.0, 1.0, 1.0)
        got = reorder_cost(seq, weights=w)
        assert got == pytest.approx(oracle_reorder_cost(seq, seq.subject_ids, w), rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 9999))
    def test_chi_term_is_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        seq = StrokeSequence(random_strokes(2, rng), rng.integers(0, 3, size=2))
        w = ReorderWeights()
        m = pair_cost_matrix(seq, None, w)
        assert m[0, 1] == m[1, 0]


class TestPrecedence:
    def test_disjoint_strokes_have_no_edges(self):
        rows = np.array(
            [
                [0.1, 0.1, 0, 0, 0, 0.05, 0.05, 0.0],
                [0.9, 0.9, 0, 0, 0, 0.05, 0.05, 0.0],
            ]
        )
        graph = build_precedence(StrokeSequence(rows))
        assert graph.edges == []

    def test_coincident_strokes_have_single_edge(self):
        row = np.array([0.5, 0.5, 0, 0, 0, 0.2, 0.2, 0.0])
        graph = build_precedence(StrokeSequence(np.stack([row, row])))
        assert graph.edges == [(0, 1)]

    def test_five_stroke_case_matches_pairwise_oracle(self, rng):
        seq = StrokeSequence(random_strokes(5, rng, sigma_range=(0.05, 0.4)))
        graph = build_precedence(seq)
        assert set(graph.edges) == oracle_precedence(seq)

    def test_identity_is_always_feasible(self, rng):
        seq = StrokeSequence(random_strokes(8, rng))
        graph = build_precedence(seq)
        assert graph.is_feasible(np.arange(8))


class TestReorderSequence:
    def test_zero_weights_return_identity(self, rng):
        seq = StrokeSequence(random_strokes(10, rng))
        w = ReorderWeights(0.0, 0.0, 0.0, 0.0)
        perm = reorder_sequence(seq, weights=w, rng=np.random.default_rng(0))
        assert (perm == np.arange(10)).all()

    def test_small_instances_match_bruteforce_optimum(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            # spread-out tiny strokes: no precedence edges
            centers = rng.permutation(36)[:6]
            rows = np.stack(
                [
                    np.array([(c % 6) / 6 + 0.05, (c // 6) / 6 + 0.05, *rng.random(3), 0.02, 0.02, rng.random()])
                    for c in centers
                ]
            )
            seq = StrokeSequence(rows)
            graph = build_precedence(seq)
            assert not graph.edges
            w = ReorderWeights()
            matrix = pair_cost_matrix(seq, None, w)
            best = min(permutation_cost(matrix, p) for p in itertools.permutations(range(6)))
            perm = reorder_sequence(seq, weights=w, rng=np.random.default_rng(seed))
            assert permutation_cost(matrix, perm) == pytest.approx(best, rel=1e-12)

    def test_never_worse_than_identity_and_respects_precedence(self, rng):
        seq = StrokeSequence(random_strokes(30, rng, sigma_range=(0.1, 0.35)), rng.integers(0, 3, 30))
        graph = build_precedence(seq)
        w = ReorderWeights()
        perm = reorder_sequence(seq, weights=w, budget=800, rng=np.random.default_rng(7), precedence=graph)
        matrix = pair_cost_matrix(seq, None, w)
        assert permutation_cost(matrix, perm) <= permutation_cost(matrix, np.arange(30))
        assert graph.is_feasible(perm)

    def test_render_checksum_is_preserved(self, rng):
        seq = StrokeSequence(random_strokes(25, rng, sigma_range=(0.1, 0.4)))
        graph = build_precedence(seq, raster=64)
        perm = reorder_sequence(seq, budget=500, rng=np.random.default_rng(3), precedence=graph)
        assert render_checksum_for(seq.permuted(perm), 64) == render_checksum_for(seq, 64)

    def test_cost_is_permutation_sensitive_but_checksum_is_not(self, rng):
        seq = StrokeSequence(random_strokes(12, rng, sigma_range=(0.05, 0.2)), rng.integers(0, 4, 12))
        graph = build_precedence(seq, raster=64)
        matrix = pair_cost_matrix(seq, None, ReorderWeights())
        base_checksum = render_checksum_for(seq, 64)
        costs = set()
        tried = 0
        while tried < 100:
            perm = np.random.default_rng(tried).permutation(12)
            tried += 1
            if not graph.is_feasible(perm):
                continue
            costs.add(round(permutation_cost(matrix, perm), 9))
            assert render_checksum_for(seq.permuted(perm), 64) == base_checksum
        assert len(costs) > 1


class TestBuildDataset:
    @pytest.fixture
    def image_folders(self, tmp_path):
        img_dir = tmp_path / "images"
        mask_dir = tmp_path / "masks"
        img_dir.mkdir()
        mask_dir.mkdir()
        for i in range(10):
            save_canvas(Canvas(smooth_image(48, seed=i)), img_dir / f"img{i:02d}.png")
            mask = (np.mgrid[0:48, 0:48][0] > 24).astype(np.uint8) * (i % 3)
            from PIL import Image

            Image.fromarray(mask, mode="L").save(mask_dir / f"img{i:02d}.png")
        return img_dir, mask_dir

    def test_split_arithmetic(self):
        splits = split_ids([f"i{n}" for n in range(10)], 0.95, seed=0)
        assert sum(1 for v in splits.values() if v == "eval") == 1
        assert sum(1 for v in splits.values() if v == "train") == 9

    def test_ade_scale_split(self):
        splits = split_ids([f"i{n}" for n in range(5000)], 0.95, seed=0)
        assert sum(1 for v in splits.values() if v == "eval") == 250
        assert sum(1 for v in splits.values() if v == "train") == 4750

    def test_build_roundtrip_and_determinism(self, image_folders, tmp_path):
        img_dir, mask_dir = image_folders
        out_a = tmp_path / "out_a"
        out_b = tmp_path / "out_b"
        m_a = build_dataset(img_dir, mask_dir, out_a, schedule=MINI_SCHEDULE, seed=5, resolution=48, sop_budget=200)
        m_b = build_dataset(img_dir, mask_dir, out_b, schedule=MINI_SCHEDULE, seed=5, resolution=48, sop_budget=200)
        assert manifest_checksum(m_a) == manifest_checksum(m_b)
        ds = StrokeDataset(m_a)
        assert len(ds.records) == 10
        assert len(ds.eval_records) == 1 and len(ds.train_records) == 9
        for record in ds.records:
            assert record.T == MINI_SCHEDULE.total_strokes
            assert record.strokes.params[:, 5:7].max() <= MINI_SCHEDULE.sigma_max
            assert ds.verify_record(record)

    def test_missing_mask_skips_record_with_warning(self, image_folders, tmp_path, caplog):
        img_dir, mask_dir = image_folders
        (mask_dir / "img03.png").unlink()
        with caplog.at_level("WARNING"):
            manifest = build_dataset(
                img_dir, mask_dir, tmp_path / "out", schedule=MINI_SCHEDULE, seed=1, resolution=48, sop_budget=100
            )
        assert any("img03" in rec.message for rec in caplog.records)
        assert len(StrokeDataset(manifest).records) == 9

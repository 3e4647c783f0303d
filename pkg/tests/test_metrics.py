import functools

import numpy as np
import pytest
import scipy.linalg
import torch

from nextstroke import BrushPrimitive, Canvas, StrokeSequence
from nextstroke.dataset import MINI_SCHEDULE, StrokeDataset, build_dataset
from nextstroke.metrics import (
    EvalProtocol,
    MetricUnavailable,
    diversity,
    dtw,
    eval_windows,
    evaluate,
    fsd,
    heatmap,
    model_sampler,
    pyramid_pixel_distance,
    sample_predictions,
    stroke_color_l2,
    top1_eval,
    wd,
    write_report,
)
from nextstroke.png_io import save_canvas
from nextstroke.render import sequence_alpha, stroke_alpha
from nextstroke.strokes import default_primitive
from nextstroke.windows import Window

from conftest import random_strokes, smooth_image


def pool_sampler(pool):
    """Sampler returning the first n entries of a fixed pool (prefix property)."""

    def sampler(window, n, generator=None):
        assert n <= len(pool)
        return np.asarray(pool[:n], dtype=np.float64)

    return sampler


@pytest.fixture(scope="module")
def eval_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("eval_ds")
    img_dir, mask_dir = root / "img", root / "mask"
    img_dir.mkdir(), mask_dir.mkdir()
    from PIL import Image

    for i in range(3):
        save_canvas(Canvas(smooth_image(32, seed=10 + i)), img_dir / f"e{i}.png")
        Image.fromarray(np.zeros((32, 32), dtype=np.uint8), mode="L").save(mask_dir / f"e{i}.png")
    manifest = build_dataset(
        img_dir, mask_dir, root / "out", schedule=MINI_SCHEDULE, seed=3, resolution=32, sop_budget=50, split_ratio=0.5
    )
    return StrokeDataset(manifest)


class TestStrokeColorL2:
    def _mean_under_alpha(self, row, image):
        alpha = stroke_alpha(row, image.shape[0], image.shape[1])
        return (alpha[:, :, None] * image).sum((0, 1)) / alpha.sum(), alpha.sum() / alpha.size

    def test_region_mean_colors_score_zero(self, rng):
        image = smooth_image(48, seed=1)
        rows = random_strokes(4, rng)
        for row in rows:
            row[2:5], _ = self._mean_under_alpha(row, image)
        assert stroke_color_l2(rows, image) < 1e-12

    def test_uniform_offset_closed_form(self):
        image = np.full((48, 48, 3), 0.4)
        row = np.array([0.5, 0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.0])
        _, area = self._mean_under_alpha(row, image)
        got = stroke_color_l2(row, image)
        assert got == pytest.approx(0.03 / area, rel=1e-9)

    def test_matches_per_pixel_summation_oracle(self, rng):
        image = smooth_image(48, seed=2)
        rows = random_strokes(5, rng)
        values = []
        for row in rows:  # independent rasterized summation
            alpha = stroke_alpha(row, 48, 48)
            mass = 0.0
            color_sum = np.zeros(3)
            for y in range(48):
                for x in range(48):
                    mass += alpha[y, x]
                    color_sum += alpha[y, x] * image[y, x]
            mean = color_sum / mass
            values.append(((row[2:5] - mean) ** 2).sum() / (mass / (48 * 48)))
        assert stroke_color_l2(rows, image) == pytest.approx(np.mean(values), rel=1e-9)

    def test_zero_area_stroke_excluded_with_warning(self):
        image = np.full((32, 32, 3), 0.5)
        rows = np.array(
            [
                [0.5, 0.5, 0.5, 0.5, 0.5, 0.2, 0.2, 0.0],
                [0.5, 0.5, 0.9, 0.9, 0.9, 0.0, 0.0, 0.0],
            ]
        )
        with pytest.warns(UserWarning):
            value = stroke_color_l2(rows, image)
        assert value == pytest.approx(stroke_color_l2(rows[0], image))


class TestFSD:
    def test_identical_batches_are_zero(self, rng):
        batch = rng.random((20, 12))
        assert fsd(batch, batch.copy()) < 1e-9

    def test_pure_mean_shift_closed_form(self, rng):
        batch = rng.random((50, 6))
        delta = rng.normal(0, 0.5, 6)
        assert fsd(batch, batch + delta) == pytest.approx((delta**2).sum(), abs=1e-6)

    def test_matches_full_covariance_formula_on_diagonals(self, rng):
        a = rng.normal(0, 1.0, (200, 5))
        b = rng.normal(0.3, 1.4, (180, 5))
        mu1, v1 = a.mean(0), a.var(0)
        mu2, v2 = b.mean(0), b.var(0)
        c1, c2 = np.diag(v1), np.diag(v2)
        covmean = scipy.linalg.sqrtm(c1 @ c2)
        oracle = ((mu1 - mu2) ** 2).sum() + np.trace(c1 + c2 - 2 * np.real(covmean))
        assert fsd(a, b) == pytest.approx(oracle, rel=1e-9)

    def test_symmetry_and_nonnegativity(self, rng):
        a, b = rng.random((30, 4)), rng.random((25, 4))
        assert fsd(a, b) == pytest.approx(fsd(b, a), rel=1e-12)
        assert fsd(a, b) >= 0


class TestWD:
    def test_identical_sequences_zero(self, rng):
        seq = random_strokes(8, rng)
        assert wd(seq, seq.copy()) < 1e-9

    def test_pure_mean_shift_gives_delta_norm(self, rng):
        seq = random_strokes(8, rng)
        delta = rng.normal(0, 0.1, 8)
        assert wd(seq, seq + delta) == pytest.approx(np.linalg.norm(delta), rel=1e-9)

    def test_matches_monte_carlo_optimal_transport(self, rng):
        a = random_strokes(8, rng)
        b = random_strokes(8, rng)
        closed = wd(a, b)
        # product measures: W2^2 factorizes over dimensions; per-dimension
        # empirical OT on sorted samples
        mu1, v1 = a.mean(0), a.var(0)
        mu2, v2 = b.mean(0), b.var(0)
        n = 100_000
        total = 0.0
        for d in range(8):
            xs = np.sort(rng.normal(mu1[d], np.sqrt(v1[d]), n))
            ys = np.sort(rng.normal(mu2[d], np.sqrt(v2[d]), n))
            total += ((xs - ys) ** 2).mean()
        assert closed == pytest.approx(np.sqrt(total), rel=0.02)

    def test_symmetry(self, rng):
        a, b = random_strokes(8, rng), random_strokes(8, rng)
        assert wd(a, b) == pytest.approx(wd(b, a), rel=1e-12)


class TestDTW:
    def test_identical_sequences_zero(self, rng):
        seq = random_strokes(8, rng)
        assert dtw(seq, seq.copy()) == 0.0

    def test_two_vs_one_hand_case(self):
        assert dtw(np.array([[0.0], [0.0]]), np.array([[1.0]])) == pytest.approx(2.0)

    def test_matches_recursive_memoized_oracle(self, rng):
        a, b = random_strokes(8, rng), random_strokes(8, rng)

        @functools.lru_cache(maxsize=None)
        def solve(i, j):
            cost = float(np.linalg.norm(a[i] - b[j]))
            if i == 0 and j == 0:
                return cost
            best = np.inf
            if i > 0:
                best = min(best, solve(i - 1, j))
            if j > 0:
                best = min(best, solve(i, j - 1))
            if i > 0 and j > 0:
                best = min(best, solve(i - 1, j - 1))
            return cost + best

        assert dtw(a, b) == pytest.approx(solve(7, 7), rel=1e-12)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            dtw(np.zeros((0, 8)), np.zeros((1, 8)))


class TestSamplingProtocols:
    def _window(self, rng, size=32):
        return Window(
            i_ref=smooth_image(size, seed=5),
            i_c=np.ones((size, size, 3)),
            s_c=random_strokes(8, rng),
            valid=np.ones(8),
            s_t=random_strokes(8, rng),
        )

    def test_sample_predictions_shape_and_range(self, tiny_model, rng):
        window = self._window(rng)
        preds = sample_predictions(tiny_model, window, 7, torch.Generator().manual_seed(0))
        assert preds.shape == (7, 8, 8)
        assert preds.min() >= 0 and preds.max() <= 1

    def test_top1_with_deterministic_sampler(self, rng):
        window = self._window(rng)
        fixed = random_strokes(8, rng)
        sampler = pool_sampler([fixed] * 100)
        best, wd_value, dtw_value = top1_eval(sampler, window, EvalProtocol(top1_samples=100))
        assert (best == fixed).all()

    def test_top1_with_ground_truth_in_pool_is_zero(self, rng):
        window = self._window(rng)
        pool = [random_strokes(8, rng) for _ in range(9)] + [window.s_t]
        best, wd_value, dtw_value = top1_eval(sampler := pool_sampler(pool), window, EvalProtocol(top1_samples=10))
        assert wd_value < 1e-9 and dtw_value < 1e-9

    def test_top1_wd_monotone_in_sample_count(self, rng):
        window = self._window(rng)
        pool = [random_strokes(8, rng) for _ in range(100)]
        sampler = pool_sampler(pool)
        values = [
            top1_eval(sampler, window, EvalProtocol(top1_samples=n))[1] for n in (1, 10, 100)
        ]
        assert values[0] >= values[1] >= values[2]


class TestDiversity:
    def test_pyramid_distance_bounds(self):
        black = np.zeros((32, 32, 3))
        white = np.ones((32, 32, 3))
        assert pyramid_pixel_distance(black, black) == 0.0
        assert pyramid_pixel_distance(black, white) == pytest.approx(1.0)

    def test_deterministic_sampler_gives_zero(self, rng):
        window = TestSamplingProtocols._window(self, rng)
        sampler = pool_sampler([random_strokes(8, rng)] * 5)
        assert diversity(sampler, window, EvalProtocol()) == 0.0

    def test_black_white_hand_enumeration(self, rng):
        # renders: one all-white (zero-size strokes on white canvas), four
        # all-black (opaque full-cover stroke): 4 of 10 pairs at distance 1
        window = TestSamplingProtocols._window(self, rng)
        window.i_c = np.ones((32, 32, 3))
        noop = np.zeros((1, 8))
        black_cover = np.array([[0.5, 0.5, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0]])
        pool = [noop, black_cover, black_cover, black_cover, black_cover]
        got = diversity(
            pool_sampler(pool), window, EvalProtocol(), primitive=BrushPrimitive.full_cover()
        )
        assert got == pytest.approx(0.4)

    def test_plugin_failure_surfaces_as_metric_unavailable(self, rng):
        window = TestSamplingProtocols._window(self, rng)
        sampler = pool_sampler([random_strokes(8, rng) for _ in range(5)])

        def broken(a, b):
            raise RuntimeError("no backend")

        with pytest.raises(MetricUnavailable):
            diversity(sampler, window, EvalProtocol(), distance=broken)


class TestHeatmap:
    def test_values_are_exact_multiples_of_one_over_n(self, rng):
        window = TestSamplingProtocols._window(self, rng)
        pool = [random_strokes(8, rng) for _ in range(8)]
        probs = heatmap(pool_sampler(pool), window, EvalProtocol(heatmap_samples=8))
        scaled = probs * 8
        assert np.allclose(scaled, np.round(scaled), atol=0)
        assert probs.min() >= 0 and probs.max() <= 1

    def test_deterministic_sampler_gives_binary_map(self, rng):
        window = TestSamplingProtocols._window(self, rng)
        pool = [random_strokes(8, rng)] * 6
        probs = heatmap(pool_sampler(pool), window, EvalProtocol(heatmap_samples=6))
        assert set(np.unique(probs)) <= {0.0, 1.0}

    def test_counting_oracle(self, rng):
        window = TestSamplingProtocols._window(self, rng)
        pool = [random_strokes(8, rng) for _ in range(5)]
        protocol = EvalProtocol(heatmap_samples=5)
        probs = heatmap(pool_sampler(pool), window, protocol)
        counts = np.zeros((32, 32))
        for p in pool:
            counts += sequence_alpha(StrokeSequence(p), 32, 32) > protocol.heatmap_alpha_threshold
        np.testing.assert_array_equal(probs, counts / 5)


class TestEvaluate:
    def test_ground_truth_sampler_reproduces_dataset_statistics(self, eval_dataset):
        def gt_sampler(window, n, generator=None):
            return np.repeat(window.s_t[None], n, axis=0)

        protocol = EvalProtocol(windows_per_image=2, top1_samples=3, diversity_samples=2, heatmap_samples=2)
        report = evaluate(None, eval_dataset, protocol, seed=1, sampler=gt_sampler, include_diversity=False)
        assert report["WD"] < 1e-9
        assert report["DTW"] < 1e-9
        assert report["FSD"] < 1e-9
        # L2 equals the dataset's own stroke-color L2 on those windows
        rng = np.random.default_rng(1)
        expected = []
        for record in eval_dataset.eval_records:
            image = eval_dataset.load_image(record, eval_dataset.resolution)
            for w in eval_windows(record, image, 8, 2, rng):
                expected.append(stroke_color_l2(w.s_t, image))
        assert report["L2"] == pytest.approx(np.mean(expected), rel=1e-9)

    def test_same_seed_identical_reports(self, eval_dataset, tiny_model):
        protocol = EvalProtocol(windows_per_image=2, top1_samples=2, diversity_samples=2, heatmap_samples=2)
        a = evaluate(tiny_model, eval_dataset, protocol, seed=7)
        b = evaluate(tiny_model, eval_dataset, protocol, seed=7)
        assert a == b

    def test_report_aggregation_matches_per_window_dump(self, eval_dataset, tiny_model):
        protocol = EvalProtocol(windows_per_image=2, top1_samples=2, diversity_samples=2, heatmap_samples=2)
        report = evaluate(tiny_model, eval_dataset, protocol, seed=2)
        assert report["L2"] == pytest.approx(np.mean([r["L2"] for r in report["per_window"]]), rel=1e-12)
        assert report["WD"] == pytest.approx(np.mean([r["WD"] for r in report["per_window"]]), rel=1e-12)

    def test_write_report_flat_keys(self, eval_dataset, tiny_model, tmp_path):
        protocol = EvalProtocol(windows_per_image=2, top1_samples=2, diversity_samples=2, heatmap_samples=2)
        report = evaluate(tiny_model, eval_dataset, protocol, seed=0)
        path = tmp_path / "report.txt"
        write_report(path, report)
        text = path.read_text()
        for key in ("L2=", "FSD=", "WD=", "DTW=", "diversity=", "protocol.top1_samples="):
            assert key in text

    def test_empty_split_rejected(self, eval_dataset, tiny_model):
        with pytest.raises(ValueError):
            evaluate(tiny_model, eval_dataset, EvalProtocol(), seed=0, records=[])

import numpy as np
import pytest
import torch


def smooth_image(size=64, seed=0):
    """Low-frequency synthetic reference image in [0, 1]."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size, 3))
    for ch in range(3):
        a, b, c = rng.uniform(0.5, 2.0, 3)
        phase = rng.uniform(0, 2 * np.pi, 3)
        img[:, :, ch] = (
            0.5
            + 0.25 * np.sin(a * 2 * np.pi * xs + phase[0])
            + 0.25 * np.cos(b * 2 * np.pi * ys + phase[1]) * np.sin(c * np.pi * xs + phase[2])
        )
    return np.clip(img, 0.0, 1.0)


def random_strokes(n, rng, sigma_range=(0.05, 0.3)):
    rows = rng.random((n, 8))
    lo, hi = sigma_range
    rows[:, 5:7] = lo + (hi - lo) * rows[:, 5:7]
    return rows


@pytest.fixture(scope="session")
def tiny_model():
    from nextstroke.model import SuggestionModel, tiny_config

    torch.manual_seed(1234)
    model = SuggestionModel(tiny_config(d_emb=32, layers=1, image_size=32))
    model.eval()
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(42)

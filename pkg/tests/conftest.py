import numpy as np
import pytest
from PIL import Image

from spca import data


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def decaying_data():
    """d x n Gaussian data with a geometric spectrum, randomly rotated."""

    def build(d=20, n=50, decay=0.4, seed=0):
        gen = np.random.default_rng(seed)
        rotation, _ = np.linalg.qr(gen.standard_normal((d, d)))
        scales = decay ** np.arange(d)
        return rotation @ (scales[:, None] * gen.standard_normal((d, n)))

    return build


@pytest.fixture
def occluded_synthetic():
    """Normalized 4x5 rank-3 images, 18 of 60 with a black 2x2 block."""

    def build(seed=0, side_ratio=0.5):
        ds = data.make_low_rank(4, 5, 60, 3, seed=seed)
        ds = data.occlude(ds, fraction=0.3, side_ratio=side_ratio, fill="black", seed=seed + 1000)
        return data.normalize_samples(ds)

    return build


def _save_image(path, pixels):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(path, format="PPM")


@pytest.fixture
def save_image():
    return _save_image


@pytest.fixture
def image_dir(tmp_path):
    """Two classes of five 4x4 grayscale PGMs."""
    gen = np.random.default_rng(7)
    root = tmp_path / "faces"
    for label in ("alice", "bob"):
        for index in range(5):
            _save_image(root / label / f"img_{index}.pgm", gen.integers(16, 256, size=(4, 4)))
    return root

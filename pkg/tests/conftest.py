import numpy as np
import pytest

from vkf.descriptor import DESC_BYTES, FeatureSet, GrayImage, write_pgm


def random_desc(rng, n):
    return rng.integers(0, 256, size=(n, DESC_BYTES), dtype=np.uint8)


def random_features(rng, n, width=720, height=405):
    xy = np.stack([rng.uniform(16, width - 17, n), rng.uniform(16, height - 17, n)], axis=1)
    return FeatureSet(xy, rng.uniform(0, 100, n), random_desc(rng, n))


def block_scene(seed, width=400, height=240, cell=12, n_rects=70):
    """Random block grid with random rectangles on top: plenty of distinct corners."""
    rng = np.random.default_rng(seed)
    img = np.kron(rng.integers(0, 256, (height // cell + 1, width // cell + 1)), np.ones((cell, cell)))
    img = img[:height, :width].astype(np.uint8)
    for _ in range(n_rects):
        x0, y0 = rng.integers(0, width - 10), rng.integers(0, height - 10)
        img[y0:y0 + rng.integers(6, 40), x0:x0 + rng.integers(6, 40)] = rng.integers(0, 256)
    return img


def scene_frame(base, t, seed, width=320):
    """Frame ``t`` of a slow pan over ``base`` with a frame-unique noise patch."""
    rng = np.random.default_rng(seed)
    img = base[:, t:t + width].copy()
    img[200:224, 20:68] = rng.integers(0, 256, (24, 48))
    return GrayImage(img)


def write_scene_video(directory, scene_seed, n_frames):
    directory.mkdir(parents=True, exist_ok=True)
    base = block_scene(scene_seed)
    frames = []
    for t in range(n_frames):
        img = scene_frame(base, t, 1000 * scene_seed + t)
        write_pgm(directory / f"frame_{t:04d}.pgm", img)
        frames.append(img)
    return frames


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

"""Small natural-image corpus cut from scikit-image's bundled sample images.

Used by the demos and the ablation acceptance test when no real dataset
is at hand.  Training crops and held-out crops come from disjoint source
images, and crop positions are drawn from a fixed PCG64 stream.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .image import save_image

TRAIN_SOURCES = ("astronaut", "chelsea", "coffee", "rocket", "camera", "coins", "brick", "grass", "gravel", "page")
HELDOUT_SOURCES = ("immunohistochemistry", "motorcycle_left", "motorcycle_right", "moon", "clock")
MIN_CROP_STD = 0.06


def _load_source(name: str) -> np.ndarray:
    from skimage import data

    if name.startswith("motorcycle"):
        arr = data.stereo_motorcycle()[0 if name.endswith("left") else 1]
    else:
        arr = getattr(data, name)()
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise ValueError(f"sample image {name} is {arr.dtype}, expected uint8")
    if arr.ndim == 3:
        arr = arr[..., :3].transpose(2, 0, 1)
    else:
        arr = arr[None]
    return arr.astype(np.float32) / 255.0


def _crops(names, per_image: int, size: int, rng):
    for name in names:
        img = _load_source(name)
        h, w = img.shape[-2:]
        for k in range(per_image):
            # redraw until the crop has some texture; flat crops make ×4 trivially easy
            for _ in range(10_000):
                r = int(rng.integers(0, h - size + 1))
                c = int(rng.integers(0, w - size + 1))
                crop = img[..., r : r + size, c : c + size]
                if crop.mean(axis=0).std() >= MIN_CROP_STD:
                    break
            else:
                raise ValueError(f"no {size}px crop of {name} has std >= {MIN_CROP_STD}")
            yield f"{name}_{k}", crop


def build_toy_corpus(out_dir, size: int = 128, seed: int = 0, train_per_image: int = 2, heldout_per_image: int = 1):
    """Write ``train/`` (20 crops by default) and ``heldout/`` (5 crops) PNG folders.

    Returns ``(train_dir, heldout_dir)``.
    """
    out = Path(out_dir)
    train_dir, held_dir = out / "train", out / "heldout"
    train_dir.mkdir(parents=True, exist_ok=True)
    held_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    for sid, crop in _crops(TRAIN_SOURCES, train_per_image, size, rng):
        save_image(crop, train_dir / f"{sid}.png")
    for sid, crop in _crops(HELDOUT_SOURCES, heldout_per_image, size, rng):
        save_image(crop, held_dir / f"{sid}.png")
    return train_dir, held_dir

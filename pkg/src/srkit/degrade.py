"""Bicubic degradation, LR/HR pair generation, patch sampling and augmentation.

Random draws use numpy's ``Generator`` over the PCG64 bit generator.  An
integer seed (or a ``SeedSequence``) fully determines every draw, and
independent streams are obtained with ``SeedSequence.spawn``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PATCH_SIZE",
    "SamplePair",
    "PatchBatch",
    "keys_kernel",
    "resize_weights",
    "bicubic_resize",
    "make_pair",
    "extract_patches",
    "dihedral",
    "augment",
    "make_rng",
]

PATCH_SIZE = 48


def make_rng(seed) -> np.random.Generator:
    """PCG64-backed generator from an int, ``SeedSequence`` or existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def keys_kernel(x, a: float = -0.5) -> np.ndarray:
    """Keys cubic convolution kernel; ``a = -0.5`` reproduces quadratics."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def resize_weights(in_len: int, out_len: int) -> np.ndarray:
    """Dense ``(out_len, in_len)`` resampling matrix for one axis.

    Output sample ``d`` sits at source coordinate ``(d + 0.5) * in/out - 0.5``.
    When shrinking, the kernel is stretched by ``in/out`` (anti-aliasing).
    Out-of-range taps are clamped to the nearest edge sample, and each row
    is renormalized to sum to one.
    """
    if in_len < 1 or out_len < 1:
        raise ValueError(f"resize lengths must be positive, got {in_len} -> {out_len}")
    scale = out_len / in_len
    kscale = min(scale, 1.0)
    support = 2.0 / kscale
    centers = (np.arange(out_len) + 0.5) / scale - 0.5
    ntaps = int(math.ceil(2 * support)) + 2
    left = np.floor(centers - support).astype(np.int64)
    taps = left[:, None] + np.arange(ntaps)[None, :]
    w = kscale * keys_kernel((centers[:, None] - taps) * kscale)
    cols = np.clip(taps, 0, in_len - 1)
    W = np.zeros((out_len, in_len))
    rows = np.broadcast_to(np.arange(out_len)[:, None], taps.shape)
    np.add.at(W, (rows, cols), w)
    W /= W.sum(axis=1, keepdims=True)
    return W


def bicubic_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable anti-aliased bicubic resize of a ``(..., H, W)`` array."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    img = np.asarray(img)
    h, w = img.shape[-2:]
    Wy = resize_weights(h, out_h)
    Wx = resize_weights(w, out_w)
    out = Wy @ img.astype(np.float64) @ Wx.T
    return out.astype(np.result_type(img.dtype, np.float32))


@dataclass
class SamplePair:
    hr: np.ndarray
    lr: np.ndarray
    lr_up: np.ndarray
    scale: int
    source_id: str = ""


@dataclass
class PatchBatch:
    inputs: np.ndarray  # (count, C, P, P), cut from lr_up
    targets: np.ndarray  # (count, C, P, P), cut from hr
    offsets: np.ndarray  # (count, 2) top-left (row, col)

    @property
    def count(self) -> int:
        return int(self.inputs.shape[0])


def make_pair(hr_img: np.ndarray, scale: int, source_id: str = "", min_size: int = PATCH_SIZE) -> SamplePair:
    """Crop ``hr_img`` to a multiple of ``scale``, downscale, and upscale back."""
    if scale not in (2, 3, 4):
        raise ValueError(f"scale must be 2, 3 or 4, got {scale}")
    hr_img = np.asarray(hr_img)
    h, w = hr_img.shape[-2:]
    hc, wc = h - h % scale, w - w % scale
    if min(hc, wc) < max(min_size, scale):
        raise ValueError(
            f"image {source_id or ''} is {h}x{w}; need at least {min_size}x{min_size} "
            f"after cropping to a multiple of {scale}"
        )
    hr = np.ascontiguousarray(hr_img[..., :hc, :wc])
    lr = bicubic_resize(hr, hc // scale, wc // scale)
    lr_up = bicubic_resize(lr, hc, wc)
    return SamplePair(hr=hr, lr=lr, lr_up=lr_up, scale=scale, source_id=source_id)


def extract_patches(pair: SamplePair, count: int, rng_seed, patch_size: int = PATCH_SIZE) -> PatchBatch:
    """``count`` uniformly placed ``patch_size`` crops, identical for input and target."""
    h, w = pair.hr.shape[-2:]
    if h < patch_size or w < patch_size:
        raise ValueError(f"image {pair.source_id} is {h}x{w}, smaller than a {patch_size} patch")
    rng = make_rng(rng_seed)
    rows = rng.integers(0, h - patch_size + 1, size=count)
    cols = rng.integers(0, w - patch_size + 1, size=count)
    inputs = np.stack([pair.lr_up[..., r : r + patch_size, c : c + patch_size] for r, c in zip(rows, cols)])
    targets = np.stack([pair.hr[..., r : r + patch_size, c : c + patch_size] for r, c in zip(rows, cols)])
    return PatchBatch(inputs=inputs, targets=targets, offsets=np.stack([rows, cols], axis=1))


def dihedral(a: np.ndarray, k: int) -> np.ndarray:
    """Apply symmetry ``k`` in 0..7: ``k % 4`` quarter turns, then a left-right flip if ``k >= 4``."""
    out = np.rot90(a, k % 4, axes=(-2, -1))
    if k >= 4:
        out = out[..., ::-1]
    return np.ascontiguousarray(out)


def augment(inp: np.ndarray, target: np.ndarray, rng_seed):
    """Apply one uniformly drawn dihedral symmetry to both patches."""
    if inp.shape[-1] != inp.shape[-2] or target.shape[-1] != target.shape[-2]:
        raise ValueError(f"augment needs square patches, got {inp.shape} and {target.shape}")
    k = int(make_rng(rng_seed).integers(8))
    return dihedral(inp, k), dihedral(target, k)

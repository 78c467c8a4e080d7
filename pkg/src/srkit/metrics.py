"""PSNR and SSIM with the usual super-resolution benchmark conventions.

``benchmark_pair`` converts RGB to BT.601 luma, shaves ``scale`` pixels
from each border and then scores the remaining plane.  Single-channel
images are treated as gray RGB, so they go through the same luma map.  Identical inputs
give a PSNR of ``math.inf``, written as ``inf`` in CSV files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.ndimage import correlate1d

from .image import rgb_to_luma, shave_border

__all__ = [
    "MetricReport",
    "psnr",
    "ssim",
    "gaussian_window",
    "benchmark_pair",
    "write_reports",
    "read_reports",
    "summarize",
]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    dataset: str
    image_id: str
    scale: int
    psnr_db: float
    ssim: float


def psnr(a, b, peak: float = 1.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("psnr of empty images")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(peak * peak / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """1-D Gaussian taps centered on the middle sample, normalized to sum 1."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _plane(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 3:
        if a.shape[0] != 1:
            raise ValueError(f"ssim takes single-channel images, got {a.shape[0]} channels")
        a = a[0]
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {a.shape}")
    return a


def _filter_valid(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    r = len(w) // 2
    out = correlate1d(correlate1d(a, w, axis=0, mode="constant"), w, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean SSIM over the valid region of an 11x11, sigma 1.5 Gaussian window."""
    a, b = _plane(a), _plane(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    w = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a * mu_a
    var_b = _filter_valid(b * b, w) - mu_b * mu_b
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def benchmark_pair(hr, sr, scale: int, dataset: str = "", image_id: str = "") -> MetricReport:
    hr = np.asarray(hr, dtype=np.float64)
    sr = np.asarray(sr, dtype=np.float64)
    if hr.shape != sr.shape:
        raise ValueError(f"shape mismatch: hr {hr.shape} vs sr {sr.shape}")
    if hr.ndim == 3 and hr.shape[0] == 1:
        # gray counts as R = G = B, so it scores the same as its RGB copy
        hr, sr = np.repeat(hr, 3, axis=0), np.repeat(sr, 3, axis=0)
    if hr.ndim == 3 and hr.shape[0] == 3:
        hr, sr = rgb_to_luma(hr), rgb_to_luma(sr)
    hr = shave_border(hr, scale)
    sr = shave_border(sr, scale)
    return MetricReport(dataset, image_id, int(scale), psnr(hr, sr), ssim(hr, sr))


def summarize(reports, image_id: str = "mean") -> MetricReport:
    """Arithmetic means of PSNR and SSIM, as one report row."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to summarize")
    first = reports[0]
    return MetricReport(
        first.dataset,
        image_id,
        first.scale,
        float(np.mean([r.psnr_db for r in reports])),
        float(np.mean([r.ssim for r in reports])),
    )


_FIELDS = [f.name for f in fields(MetricReport)]


def write_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_FIELDS)
        w.writeheader()
        for r in reports:
            row = asdict(r)
            row["psnr_db"] = "inf" if math.isinf(r.psnr_db) else repr(r.psnr_db)
            row["ssim"] = repr(r.ssim)
            w.writerow(row)


def read_reports(path) -> list[MetricReport]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _FIELDS:
            raise ValueError(f"{path}: expected columns {_FIELDS}, got {reader.fieldnames}")
        return [
            MetricReport(row["dataset"], row["image_id"], int(row["scale"]), float(row["psnr_db"]), float(row["ssim"]))
            for row in reader
        ]

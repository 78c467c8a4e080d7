"""Training, evaluation and lambda-ablation drivers.

A run is fully determined by its :class:`TrainConfig`: ``seed`` drives patch
sampling and augmentation, ``net.seed`` drives weight initialization.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .degrade import PATCH_SIZE, augment, extract_patches, make_pair, make_rng
from .graph import build_grid_graph
from .image import image_id, list_images, load_image, rgb_to_luma, save_image
from .loss import total_loss, total_loss_grad
from .metrics import MetricReport, benchmark_pair, summarize, write_reports
from .net import NetConfig, backward, forward, forward_train, init_params, load_checkpoint, save_checkpoint
from .optim import init_optim, optim_step

__all__ = [
    "TrainConfig",
    "TrainingError",
    "TrainResult",
    "load_config",
    "save_config",
    "load_pairs",
    "sample_batch",
    "train",
    "evaluate",
    "ablate",
    "degrade_dir",
    "LOG_COLUMNS",
    "ABLATION_COLUMNS",
]

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.ckpt"
LOG_NAME = "train_log.csv"
LOG_COLUMNS = ["step", "epoch", "sse", "glrdn", "lambda", "total", "lr"]
ABLATION_COLUMNS = ["lambda", "dataset", "scale", "psnr", "ssim"]


class TrainingError(RuntimeError):
    pass


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("SRKIT_THREADS", "1")))
    except ValueError:
        raise ValueError(f"SRKIT_THREADS must be an integer, got {os.environ['SRKIT_THREADS']!r}") from None


@dataclass(frozen=True)
class TrainConfig:
    data_dir: str
    out_dir: str
    scale: int = 4
    lam: float = 1.0
    epochs: int = 300
    batch_size: int = 16
    patches_per_epoch: int = 1600
    net: NetConfig = field(default_factory=NetConfig)
    lr: float = 1e-4
    lr_halve_every: int = 200_000
    seed: int = 0
    connectivity: int = 4

    def __post_init__(self):
        if self.scale not in (2, 3, 4):
            raise ValueError(f"scale must be 2, 3 or 4, got {self.scale}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        for name in ("epochs", "batch_size", "patches_per_epoch", "lr_halve_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")

    @property
    def steps_per_epoch(self) -> int:
        return max(1, self.patches_per_epoch // self.batch_size)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)} - {"lam"} | {"lambda"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if "net" in d:
            net = dict(d["net"])
            bad = set(net) - {f.name for f in fields(NetConfig)}
            if bad:
                raise ValueError(f"unknown net config keys: {sorted(bad)}")
            d["net"] = NetConfig(**net)
        missing = {"data_dir", "out_dir"} - set(d)
        if missing:
            raise ValueError(f"missing config keys: {sorted(missing)}")
        return cls(**d)


def load_config(path) -> TrainConfig:
    with open(path) as fh:
        return TrainConfig.from_dict(json.load(fh))


def save_config(cfg: TrainConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def _match_channels(img: np.ndarray, channels: int) -> np.ndarray:
    if img.shape[0] == channels:
        return img
    if channels == 3:
        return np.repeat(img, 3, axis=0)
    return rgb_to_luma(img)


def load_pairs(directory, scale: int, channels: int, min_size: int = PATCH_SIZE):
    """LR/HR pairs for every usable image in ``directory``; too-small images are skipped."""
    pairs = []
    for path in list_images(directory):
        img = _match_channels(load_image(path), channels)
        try:
            pairs.append(make_pair(img, scale, source_id=image_id(path), min_size=min_size))
        except ValueError as exc:
            log.warning("skipping %s: %s", path, exc)
    if not pairs:
        raise TrainingError(f"{directory}: no usable images (need png/ppm/pgm of at least {min_size}px)")
    return pairs


def sample_batch(pairs, batch_size: int, rng: np.random.Generator):
    """Draw ``batch_size`` augmented patches; returns ``(inputs, targets, ids)``."""
    inputs, targets, ids = [], [], []
    for _ in range(batch_size):
        k = int(rng.integers(len(pairs)))
        patch = extract_patches(pairs[k], 1, rng)
        x, t = augment(patch.inputs[0], patch.targets[0], rng)
        inputs.append(x)
        targets.append(t)
        ids.append((pairs[k].source_id, *map(int, patch.offsets[0])))
    return np.stack(inputs), np.stack(targets), ids


@dataclass
class TrainResult:
    checkpoint: Path
    log_path: Path
    params: dict
    steps: int


def _fmt(v: float) -> str:
    return repr(float(v))


def train(cfg: TrainConfig, max_steps: int | None = None) -> TrainResult:
    """Minimize ``SSE + lam * S_G`` over random augmented patches with Adam.

    Writes ``checkpoint.ckpt`` after every epoch and ``train_log.csv`` with
    one row per optimizer step.  ``max_steps`` truncates the run early
    (useful for smoke tests); the checkpoint is still written.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    pairs = load_pairs(cfg.data_dir, cfg.scale, cfg.net.in_channels)
    graph = build_grid_graph(PATCH_SIZE, PATCH_SIZE, cfg.connectivity)
    rng = make_rng(cfg.seed)
    params = init_params(cfg.net)
    state = init_optim(params, lr=cfg.lr, halve_every=cfg.lr_halve_every)
    ckpt = out / CHECKPOINT_NAME
    log_path = out / LOG_NAME
    total_steps = cfg.epochs * cfg.steps_per_epoch
    if max_steps is not None:
        total_steps = min(total_steps, max_steps)

    with threadpool_limits(limits=thread_cap()), open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        step = 0
        for epoch in range(cfg.epochs):
            for _ in range(cfg.steps_per_epoch):
                if step >= total_steps:
                    break
                x, t, ids = sample_batch(pairs, cfg.batch_size, rng)
                y, cache = forward_train(params, x, cfg.net)
                loss = total_loss(t, y, cfg.lam, graph)
                if not math.isfinite(loss.total):
                    dump = out / "bad_batch.json"
                    dump.write_text(json.dumps({"step": step + 1, "batch": ids}))
                    raise TrainingError(f"non-finite loss at step {step + 1}; batch ids written to {dump}")
                g = total_loss_grad(t, y, cfg.lam, graph)
                grads, _ = backward(params, x, g, cfg.net, cache)
                lr_used = state.lr
                params, state = optim_step(params, grads, state)
                step += 1
                writer.writerow(
                    [step, epoch, _fmt(loss.sse), _fmt(loss.glrdn), _fmt(loss.lam), _fmt(loss.total), _fmt(lr_used)]
                )
            save_checkpoint(ckpt, params, cfg.net, step=step, lr=state.lr)
            if step >= total_steps:
                break
    log.info("trained %d steps, checkpoint %s", step, ckpt)
    return TrainResult(checkpoint=ckpt, log_path=log_path, params=params, steps=step)


def _score(args):
    params, net_cfg, pair, dataset = args
    sr = forward(params, pair.lr_up, net_cfg)
    return benchmark_pair(pair.hr, sr, pair.scale, dataset=dataset, image_id=pair.source_id)


def evaluate(checkpoint, hr_dir, scale: int, dataset: str | None = None):
    """Score a checkpoint on every image of ``hr_dir``.

    Returns ``(reports, summary)`` where ``summary`` holds the mean PSNR and
    SSIM under ``image_id == "mean"``.
    """
    params, net_cfg, _ = load_checkpoint(checkpoint)
    dataset = dataset or Path(hr_dir).name
    pairs = load_pairs(hr_dir, scale, net_cfg.in_channels, min_size=2 * scale + 11)
    jobs = [(params, net_cfg, p, dataset) for p in pairs]
    n = thread_cap()
    with threadpool_limits(limits=1 if n > 1 else None):
        if n > 1:
            with ThreadPoolExecutor(max_workers=n) as pool:
                reports = list(pool.map(_score, jobs))
        else:
            reports = [_score(j) for j in jobs]
    return reports, summarize(reports)


def format_summary(summary: MetricReport) -> str:
    return f"{summary.psnr_db:.2f} & {summary.ssim:.4f}"


def ablate(cfg: TrainConfig, lambdas, hr_dir=None, out_csv=None, max_steps: int | None = None):
    """Train one model per lambda (same seeds) and score each on ``hr_dir``.

    Returns the rows as dicts in input order; also written to ``out_csv``
    when given.  Without ``hr_dir`` the training images are scored.
    """
    lambdas = [float(v) for v in lambdas]
    if len(lambdas) < 2:
        raise ValueError("ablation needs at least two lambda values")
    if len(set(lambdas)) != len(lambdas):
        raise ValueError(f"duplicate lambda values in {lambdas}")
    if hr_dir is None:
        log.warning("no held-out directory given; scoring on the training images")
        hr_dir = cfg.data_dir
    rows = []
    for lam in lambdas:
        run_cfg = replace(cfg, lam=lam, out_dir=str(Path(cfg.out_dir) / f"lambda_{lam:g}"))
        result = train(run_cfg, max_steps=max_steps)
        _, summary = evaluate(result.checkpoint, hr_dir, cfg.scale)
        rows.append(
            {"lambda": lam, "dataset": summary.dataset, "scale": cfg.scale, "psnr": summary.psnr_db, "ssim": summary.ssim}
        )
    if out_csv is not None:
        write_ablation(out_csv, rows)
    return rows


def write_ablation(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ABLATION_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if k in ("lambda", "psnr", "ssim") else v) for k, v in r.items()})


def read_ablation(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ABLATION_COLUMNS:
            raise ValueError(f"{path}: expected columns {ABLATION_COLUMNS}, got {reader.fieldnames}")
        return [
            {"lambda": float(r["lambda"]), "dataset": r["dataset"], "scale": int(r["scale"]),
             "psnr": float(r["psnr"]), "ssim": float(r["ssim"])}
            for r in reader
        ]


def degrade_dir(in_dir, out_dir, scale: int) -> Path:
    """Write ``lr/`` and ``lr_up/`` PNG mirrors of ``in_dir`` plus ``manifest.csv``."""
    out = Path(out_dir)
    (out / "lr").mkdir(parents=True, exist_ok=True)
    (out / "lr_up").mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    paths = list_images(in_dir)
    if not paths:
        raise TrainingError(f"{in_dir}: no png/ppm/pgm images")
    with open(manifest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source_id", "hr_h", "hr_w", "scale"])
        for path in paths:
            sid = image_id(path)
            pair = make_pair(load_image(path), scale, source_id=sid, min_size=scale)
            save_image(pair.lr, out / "lr" / f"{sid}.png")
            save_image(pair.lr_up, out / "lr_up" / f"{sid}.png")
            w.writerow([sid, pair.hr.shape[-2], pair.hr.shape[-1], scale])
    return manifest

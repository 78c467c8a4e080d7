"""A small residual CNN operating on bicubic-upsampled inputs.

Architecture (all 3x3 convolutions, stride 1, zero padding)::

    x -> head (in -> F) -> B x [conv -> ReLU -> conv, + identity] -> tail (F -> in) -> + x

Parameters live in an ordered ``dict`` of arrays; the insertion order is
the checkpoint layer order::

    head.weight, head.bias,
    block{b}.conv1.weight, block{b}.conv1.bias,
    block{b}.conv2.weight, block{b}.conv2.bias,   for b = 0 .. B-1
    tail.weight, tail.bias

Weights are ``(out, in, 3, 3)`` and convolutions are cross-correlations.
Internally activations are kept as ``(C, N, H, W)`` so that each conv is a
single matrix product against an im2col buffer.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "NetConfig",
    "Cache",
    "StaleCacheError",
    "param_count",
    "param_shapes",
    "init_params",
    "zero_params",
    "forward",
    "forward_train",
    "backward",
    "save_checkpoint",
    "load_checkpoint",
]

KERNEL = 3
CHECKPOINT_MAGIC = b"SRKIT-CKPT\n"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    blocks: int = 4
    channels: int = 16
    kernel: int = KERNEL
    in_channels: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.blocks < 0 or self.channels < 1:
            raise ValueError(f"need blocks >= 0 and channels >= 1, got {self.blocks}/{self.channels}")
        if self.kernel != KERNEL:
            raise ValueError(f"only {KERNEL}x{KERNEL} kernels are supported, got {self.kernel}")
        if self.in_channels not in (1, 3):
            raise ValueError(f"in_channels must be 1 or 3, got {self.in_channels}")


class StaleCacheError(RuntimeError):
    pass


def param_shapes(cfg: NetConfig) -> dict[str, tuple[int, ...]]:
    F, C, k = cfg.channels, cfg.in_channels, cfg.kernel
    shapes = {"head.weight": (F, C, k, k), "head.bias": (F,)}
    for b in range(cfg.blocks):
        for conv in ("conv1", "conv2"):
            shapes[f"block{b}.{conv}.weight"] = (F, F, k, k)
            shapes[f"block{b}.{conv}.bias"] = (F,)
    shapes["tail.weight"] = (C, F, k, k)
    shapes["tail.bias"] = (C,)
    return shapes


def param_count(cfg: NetConfig) -> int:
    """``2 k^2 C F + F + C + B (2 k^2 F^2 + 2 F)``."""
    F, C, B, kk = cfg.channels, cfg.in_channels, cfg.blocks, cfg.kernel**2
    return 2 * kk * C * F + F + C + B * (2 * kk * F * F + 2 * F)


def init_params(cfg: NetConfig, dtype=np.float32, zero_tail: bool = True) -> dict[str, np.ndarray]:
    """He-normal weights (std ``sqrt(2 / fan_in)``), zero biases, seeded by ``cfg.seed``.

    With ``zero_tail`` (the default) the tail conv starts at zero, so the
    untrained network returns its input unchanged and training starts from
    the bicubic reconstruction.  The tail still receives gradient because
    the body activations are nonzero.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name == "tail.weight" and zero_tail:
            params[name] = np.zeros(shape, dtype=dtype)
        elif name.endswith(".weight"):
            fan_in = shape[1] * shape[2] * shape[3]
            params[name] = (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)
        else:
            params[name] = np.zeros(shape, dtype=dtype)
    return params


def zero_params(cfg: NetConfig, dtype=np.float32) -> dict[str, np.ndarray]:
    return {name: np.zeros(shape, dtype=dtype) for name, shape in param_shapes(cfg).items()}


# -- convolution primitives ---------------------------------------------------


def _im2col(x: np.ndarray) -> np.ndarray:
    C, N, H, W = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    col = np.empty((C, 9, N, H, W), dtype=x.dtype)
    for k in range(9):
        dy, dx = divmod(k, 3)
        col[:, k] = xp[:, :, dy : dy + H, dx : dx + W]
    return col.reshape(C * 9, N * H * W)


def _col2im(dcol: np.ndarray, shape) -> np.ndarray:
    C, N, H, W = shape
    dcol = dcol.reshape(C, 9, N, H, W)
    dxp = np.zeros((C, N, H + 2, W + 2), dtype=dcol.dtype)
    for k in range(9):
        dy, dx = divmod(k, 3)
        dxp[:, :, dy : dy + H, dx : dx + W] += dcol[:, k]
    return dxp[:, :, 1:-1, 1:-1]


def _conv(x, weight, bias, col=None):
    C, N, H, W = x.shape
    if col is None:
        col = _im2col(x)
    out = weight.reshape(weight.shape[0], -1) @ col
    out += bias[:, None]
    return out.reshape(weight.shape[0], N, H, W), col


def _conv_backward(g, weight, col, in_shape):
    F = weight.shape[0]
    g2 = g.reshape(F, -1)
    dw = (g2 @ col.T).reshape(weight.shape)
    db = g2.sum(axis=1)
    dx = _col2im(weight.reshape(F, -1).T @ g2, in_shape)
    return dw, db, dx


# -- network ------------------------------------------------------------------


def _batched(x, cfg: NetConfig, dtype):
    x = np.asarray(x)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4:
        raise ValueError(f"expected (C, H, W) or (N, C, H, W) input, got shape {x.shape}")
    if x.shape[1] != cfg.in_channels:
        raise ValueError(f"network expects {cfg.in_channels} channels, input has {x.shape[1]}")
    return np.ascontiguousarray(x.transpose(1, 0, 2, 3), dtype=dtype), single


def _unbatch(a, single):
    out = a.transpose(1, 0, 2, 3)
    return np.ascontiguousarray(out[0] if single else out)


@dataclass
class Cache:
    x: np.ndarray
    params: dict
    cols: dict
    pre_relu: list
    shapes: dict


def _run(params, xc, cfg: NetConfig, keep: bool):
    cols, pre_relu, shapes = {}, [], {}

    def conv(name, inp):
        out, col = _conv(inp, params[f"{name}.weight"], params[f"{name}.bias"])
        if keep:
            cols[name] = col
            shapes[name] = inp.shape
        return out

    h = conv("head", xc)
    for b in range(cfg.blocks):
        a = conv(f"block{b}.conv1", h)
        if keep:
            pre_relu.append(a)
        h = h + conv(f"block{b}.conv2", np.maximum(a, 0))
    out = conv("tail", h) + xc
    return out, cols, pre_relu, shapes


def forward(params: dict, x: np.ndarray, cfg: NetConfig) -> np.ndarray:
    """Network output for a ``(C, H, W)`` image or ``(N, C, H, W)`` batch."""
    dtype = params["head.weight"].dtype
    xc, single = _batched(x, cfg, dtype)
    out, *_ = _run(params, xc, cfg, keep=False)
    return _unbatch(out, single)


def forward_train(params: dict, x: np.ndarray, cfg: NetConfig) -> tuple[np.ndarray, Cache]:
    """Like :func:`forward` but also returns the activations needed by :func:`backward`."""
    dtype = params["head.weight"].dtype
    xc, single = _batched(x, cfg, dtype)
    out, cols, pre_relu, shapes = _run(params, xc, cfg, keep=True)
    return _unbatch(out, single), Cache(x=x, params=params, cols=cols, pre_relu=pre_relu, shapes=shapes)


def backward(params: dict, x: np.ndarray, grad_out: np.ndarray, cfg: NetConfig, cache: Cache | None):
    """Gradients of a scalar loss whose output gradient is ``grad_out``.

    Returns ``(param_grads, input_grad)``; ``cache`` must come from
    :func:`forward_train` on the same ``params`` and ``x``.
    """
    if cache is None:
        raise StaleCacheError("no activation cache; call forward_train first")
    if cache.params is not params:
        raise StaleCacheError("activation cache was built with different parameters")
    if cache.x is not x and not (np.shape(cache.x) == np.shape(x) and np.array_equal(cache.x, x)):
        raise StaleCacheError("activation cache was built from a different input")
    dtype = params["head.weight"].dtype
    g, single = _batched(grad_out, cfg, dtype)
    if g.shape != cache.shapes["head"]:
        raise ValueError(f"grad_out shape {np.shape(grad_out)} does not match the cached output")

    grads = {}

    def conv_back(name, gin):
        dw, db, dx = _conv_backward(gin, params[f"{name}.weight"], cache.cols[name], cache.shapes[name])
        grads[f"{name}.weight"] = dw
        grads[f"{name}.bias"] = db
        return dx

    dx_total = g.copy()
    dh = conv_back("tail", g)
    for b in reversed(range(cfg.blocks)):
        dr = conv_back(f"block{b}.conv2", dh)
        da = dr * (cache.pre_relu[b] > 0)
        dh = dh + conv_back(f"block{b}.conv1", da)
    dx_total += conv_back("head", dh)
    ordered = {name: grads[name] for name in params}
    return ordered, _unbatch(dx_total, single)


# -- checkpoints --------------------------------------------------------------


def save_checkpoint(path, params: dict, cfg: NetConfig, step: int = 0, lr: float = 0.0) -> None:
    """Write a checkpoint.

    Layout: the magic line ``SRKIT-CKPT\\n``, one line of JSON (sorted keys)
    holding ``format_version``, ``config``, ``step``, ``lr``, ``seed`` and
    the ``layers`` list of ``{name, shape}``, a newline, then every tensor
    as little-endian float32 in C order, concatenated in layer order.
    """
    shapes = param_shapes(cfg)
    if list(shapes) != list(params):
        raise ValueError("parameter names do not match the configuration")
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(cfg),
        "step": int(step),
        "lr": float(lr),
        "seed": cfg.seed,
        "layers": [{"name": n, "shape": list(s)} for n, s in shapes.items()],
    }
    chunks = [CHECKPOINT_MAGIC, json.dumps(header, sort_keys=True).encode(), b"\n"]
    for name, shape in shapes.items():
        arr = np.asarray(params[name])
        if arr.shape != shape:
            raise ValueError(f"{name}: shape {arr.shape} != {shape}")
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> tuple[dict, NetConfig, dict]:
    """Return ``(params, config, header)`` from a checkpoint file."""
    buf = Path(path).read_bytes()
    if not buf.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not an srkit checkpoint")
    end = buf.index(b"\n", len(CHECKPOINT_MAGIC))
    header = json.loads(buf[len(CHECKPOINT_MAGIC) : end])
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('format_version')}")
    cfg = NetConfig(**header["config"])
    pos = end + 1
    params = {}
    for layer in header["layers"]:
        shape = tuple(layer["shape"])
        n = int(np.prod(shape))
        arr = np.frombuffer(buf, dtype="<f4", count=n, offset=pos)
        params[layer["name"]] = arr.reshape(shape).astype(np.float32)
        pos += 4 * n
    if pos != len(buf):
        raise ValueError(f"{path}: {len(buf) - pos} trailing bytes after parameter data")
    if list(params) != list(param_shapes(cfg)):
        raise ValueError(f"{path}: layer list does not match its configuration")
    return params, cfg, header

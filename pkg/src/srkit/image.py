"""Planar float images, 8-bit file I/O, luma conversion and border cropping.

Images are numpy arrays of shape ``(channels, height, width)`` with
``channels`` in {1, 3} and samples nominally in [0, 1].  Arithmetic never
clamps; clamping and quantization happen only in :func:`save_image`.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "ImageIOError",
    "UnsupportedFormatError",
    "CorruptImageError",
    "as_image",
    "to_uint8",
    "load_image",
    "save_image",
    "rgb_to_luma",
    "shave_border",
]

_NETPBM_EXT = {".pgm": b"P5", ".ppm": b"P6"}
_PIL_EXT = {".png": "PNG"}


class ImageIOError(ValueError):
    """Base class for image reading/writing failures."""

    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


class UnsupportedFormatError(ImageIOError):
    pass


class CorruptImageError(ImageIOError):
    pass


def as_image(data, dtype=np.float32) -> np.ndarray:
    """Coerce ``data`` to a ``(C, H, W)`` floating array.

    A 2-D array is treated as a single-channel plane.
    """
    arr = np.asarray(data, dtype=dtype)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] not in (1, 3):
        raise ValueError(f"expected (1|3, H, W) image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite samples")
    return arr


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize with round-half-away-from-zero."""
    v = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0
    # all values are nonnegative here, so floor(v + 0.5) rounds half away from zero
    return np.floor(v + 0.5).astype(np.uint8)


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    return buf[start:pos], pos


def _load_netpbm(path: Path, buf: bytes) -> np.ndarray:
    magic = buf[:2]
    channels = {b"P5": 1, b"P6": 3}[magic]
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise CorruptImageError(path, f"bad header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise CorruptImageError(path, f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormatError(path, f"maxval {maxval} (only 255 is supported)")
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise CorruptImageError(path, "missing whitespace after header")
    pos += 1
    count = width * height * channels
    raw = np.frombuffer(buf, dtype=np.uint8, count=-1, offset=pos)
    if raw.size < count:
        raise CorruptImageError(path, f"expected {count} pixel bytes, found {raw.size}")
    interleaved = raw[:count].reshape(height, width, channels)
    return np.ascontiguousarray(interleaved.transpose(2, 0, 1))


def _load_pil(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("L", "LA", "1", "P") and not _palette_is_color(im):
                arr = np.asarray(im.convert("L"))[None]
            else:
                arr = np.asarray(im.convert("RGB")).transpose(2, 0, 1)
    except (OSError, SyntaxError) as exc:
        raise CorruptImageError(path, str(exc)) from exc
    if arr.dtype != np.uint8:
        raise UnsupportedFormatError(path, f"sample type {arr.dtype}")
    return np.ascontiguousarray(arr)


def _palette_is_color(im) -> bool:
    if im.mode != "P":
        return False
    rgb = np.asarray(im.convert("RGB"))
    return not (np.array_equal(rgb[..., 0], rgb[..., 1]) and np.array_equal(rgb[..., 1], rgb[..., 2]))


def load_image(path) -> np.ndarray:
    """Read an 8-bit PNG, binary PGM (P5) or PPM (P6) as a float32 image.

    Samples map to ``v / 255``.  Color inputs give 3 channels, grayscale 1;
    a PNG alpha channel is dropped.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path}: no such image file")
    buf = path.read_bytes()
    if buf[:2] in (b"P5", b"P6"):
        u8 = _load_netpbm(path, buf)
    elif buf[:8] == b"\x89PNG\r\n\x1a\n":
        u8 = _load_pil(path)
    else:
        raise UnsupportedFormatError(path, "not a PNG, P5 PGM or P6 PPM file")
    return u8.astype(np.float32) / np.float32(255.0)


def save_image(img: np.ndarray, path) -> None:
    """Write ``img`` with the format implied by the extension (.png, .pgm, .ppm)."""
    path = Path(path)
    ext = path.suffix.lower()
    img = as_image(img, dtype=np.float64)
    u8 = to_uint8(img)
    channels = u8.shape[0]
    if ext in _NETPBM_EXT:
        magic = _NETPBM_EXT[ext]
        if (magic == b"P5") != (channels == 1):
            raise UnsupportedFormatError(path, f"{ext} cannot hold {channels}-channel data")
        header = b"%s\n%d %d\n255\n" % (magic, u8.shape[2], u8.shape[1])
        payload = np.ascontiguousarray(u8.transpose(1, 2, 0)).tobytes()
        data = header + payload
    elif ext in _PIL_EXT:
        data = None
    else:
        raise UnsupportedFormatError(path, f"unsupported extension {ext!r}")
    try:
        if data is not None:
            path.write_bytes(data)
        else:
            mode = "L" if channels == 1 else "RGB"
            arr = u8[0] if channels == 1 else u8.transpose(1, 2, 0)
            Image.fromarray(np.ascontiguousarray(arr), mode=mode).save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(path, f"cannot write: {exc.strerror or exc}") from exc


def rgb_to_luma(img: np.ndarray) -> np.ndarray:
    """BT.601 studio-range luma, ``(65.481 R + 128.553 G + 24.966 B + 16) / 255``.

    Returns a single-channel image of the input's floating dtype.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"rgb_to_luma needs a 3-channel image, got shape {img.shape}")
    dtype = np.result_type(img.dtype, np.float32)
    r, g, b = img.astype(dtype, copy=False)
    y = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0
    return y[None].astype(dtype, copy=False)


def shave_border(img: np.ndarray, n: int) -> np.ndarray:
    """Drop ``n`` pixels from every side of the image (all channels)."""
    img = np.asarray(img)
    h, w = img.shape[-2:]
    if n < 0:
        raise ValueError(f"border must be nonnegative, got {n}")
    if 2 * n >= min(h, w):
        raise ValueError(f"shaving {n} px from a {h}x{w} image leaves nothing")
    if n == 0:
        return img
    return img[..., n : h - n, n : w - n]


def list_images(directory) -> list[Path]:
    """Sorted image files (png/ppm/pgm) directly inside ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    exts = {".png", ".ppm", ".pgm"}
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in exts and p.is_file())


def image_id(path) -> str:
    return os.path.splitext(os.path.basename(str(path)))[0]

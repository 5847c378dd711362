"""Image buffers, deterministic resampling, and seeded RNG plumbing.

An image buffer is a float64 array of shape (H, W, C) with C in {1, 3} and
all values in [0, 1]. Everything downstream assumes this layout.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DataError, ParameterError

_SEP = "\x1f"


def child_seed(*parts) -> int:
    """Stable 64-bit seed derived from a label path.

    Hash-based (not counter-based) so adding or removing one arm of a run
    never shifts the randomness of another.
    """
    payload = _SEP.join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(*parts) -> np.random.Generator:
    return np.random.default_rng(child_seed(*parts))


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def validate_image(img: np.ndarray, name: str = "image") -> None:
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ParameterError(f"{name}: expected (H, W, C) with C in {{1, 3}}, got {img.shape}")
    if not np.isfinite(img).all():
        raise ParameterError(f"{name}: non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ParameterError(f"{name}: values outside [0, 1]")


def luminance(img: np.ndarray) -> np.ndarray:
    """Channel mean, shape (H, W)."""
    return img.mean(axis=2)


def _axis_coords(n_in: int, n_out: int):
    # half-pixel center convention, edge-clamped
    x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    x = np.clip(x, 0.0, n_in - 1.0)
    lo = np.floor(x).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, x - lo


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resample of a 2-D field or an (H, W, C) image."""
    in_h, in_w = img.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return img.copy()
    ylo, yhi, wy = _axis_coords(in_h, out_h)
    xlo, xhi, wx = _axis_coords(in_w, out_w)
    wy = wy.reshape(-1, *([1] * (img.ndim - 1)))
    rows = img[ylo] * (1.0 - wy) + img[yhi] * wy
    wx = wx.reshape(1, -1, *([1] * (img.ndim - 2)))
    return rows[:, xlo] * (1.0 - wx) + rows[:, xhi] * wx


def block_mean(field: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping factor x factor box average of a 2-D field."""
    h, w = field.shape
    if h % factor or w % factor:
        raise ParameterError(f"block_mean: {field.shape} not divisible by {factor}")
    return field.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Per-channel Gaussian blur; 'radius' throughout the attack engine means sigma."""
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = ndimage.gaussian_filter(img[:, :, c], sigma, mode="nearest")
    return out


def load_png(path: str | Path) -> np.ndarray:
    """Decode an 8-bit PNG to a 3-channel [0, 1] buffer (v / 255)."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"undecodable image file: {path}") from exc
    return arr / 255.0


def save_png(img: np.ndarray, path: str | Path) -> None:
    from PIL import Image

    arr = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path)

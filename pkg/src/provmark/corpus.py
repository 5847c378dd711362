"""Cover image generation and ingestion.

Synthetic covers stand in for generated content: a smooth base (gradient plus
a few blob shapes) carrying band-limited texture, range-compressed so that
nothing clips hard. The recipe is deliberately fixed. Pure white noise would
make the structural fidelity metric meaningless and inpainting invisible,
while hard-clipped structure would leak wide-band energy into the spatial
codec's correlation channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ParameterError
from .imageops import child_seed, is_power_of_two, load_png, resize_bilinear, rng_for

# texture bands in pixel wavelengths; amplitudes are luminance std
MID_BAND = (32.0, 96.0, 0.22)
FINE_BAND = (14.0, 20.0, 0.05)
GRADIENT_AMP = 0.3
BUMP_AMP = 0.2


@dataclass(frozen=True)
class CorpusSpec:
    count: int
    size: int = 256
    master_seed: int = 0
    source: str = "synthetic"  # "synthetic" or a directory path

    def __post_init__(self):
        if self.count < 1:
            raise ParameterError(f"corpus count must be >= 1, got {self.count}")
        if self.size < 64 or not is_power_of_two(self.size):
            raise ParameterError(f"corpus size must be a power of two >= 64, got {self.size}")


def soft_clip(field: np.ndarray, lo: float = 0.02, hi: float = 0.98) -> np.ndarray:
    """Smooth range compressor: near-identity mid-range, asymptotes at lo/hi."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return mid + half * np.tanh((field - mid) / half)


def _band_noise(rng: np.random.Generator, size: int, lam_lo: float, lam_hi: float,
                std: float) -> np.ndarray:
    white = rng.standard_normal((size, size))
    f = np.fft.fftfreq(size)
    fr = np.sqrt(f[:, None] ** 2 + f[None, :] ** 2)
    band = (fr >= 1.0 / lam_hi) & (fr < 1.0 / lam_lo)
    tex = np.fft.ifft2(np.fft.fft2(white) * band).real
    s = tex.std()
    return tex * (std / s) if s > 0 else tex


def gen_cover(spec: CorpusSpec, index: int) -> np.ndarray:
    """Deterministic synthetic cover: pure function of (master_seed, index, size)."""
    if spec.source != "synthetic":
        raise ParameterError("gen_cover requires a synthetic corpus spec")
    if not 0 <= index < spec.count:
        raise ParameterError(f"cover index {index} out of range [0, {spec.count})")

    size = spec.size
    rng = rng_for(spec.master_seed, "cover", index)
    yy, xx = np.mgrid[0:size, 0:size] / size

    base = rng.uniform(0.4, 0.6)
    gx, gy = rng.uniform(-GRADIENT_AMP, GRADIENT_AMP, size=2)
    field = base + gx * (xx - 0.5) + gy * (yy - 0.5)

    n_blobs = int(rng.integers(2, 5))
    for _ in range(n_blobs):
        cx, cy = rng.uniform(0.15, 0.85, size=2)
        rad = rng.uniform(0.08, 0.25)
        amp = rng.uniform(0.5, 1.0) * BUMP_AMP * rng.choice([-1.0, 1.0])
        aniso = rng.uniform(0.6, 1.6)
        d2 = ((xx - cx) / rad) ** 2 * aniso + ((yy - cy) / rad) ** 2 / aniso
        field += amp * np.exp(-0.5 * d2)

    field += _band_noise(rng, size, MID_BAND[0], MID_BAND[1], MID_BAND[2])
    field += _band_noise(rng, size, FINE_BAND[0], FINE_BAND[1], FINE_BAND[2])

    gains = rng.uniform(0.92, 1.08, size=3)
    img = soft_clip(field)[:, :, None] * gains[None, None, :]
    return np.clip(img, 0.0, 1.0)


def load_images(path: str | Path, size: int) -> list[np.ndarray]:
    """Decode every image in a directory, 3-channel, resampled to size x size.

    Order is lexicographic by filename, independent of filesystem enumeration.
    """
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"not a directory: {root}")
    files = sorted(p for p in root.iterdir() if p.is_file())
    if not files:
        raise DataError(f"empty corpus directory: {root}")
    out = []
    for p in files:
        img = load_png(p)  # raises DataError naming the file
        if img.shape[0] != size or img.shape[1] != size:
            img = resize_bilinear(img, size, size)
        out.append(img)
    return out

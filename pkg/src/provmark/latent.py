"""Latent-domain codec: keyed concentric rings in the spectrum of a seed field.

The generation proxy is an affine bilinear upsample, and its inverse is a
deliberately lossy block-average downsample. The proxy keeps the two
properties the benchmark exercises: the latent and the image share one
frequency grid (so geometric rescaling desynchronizes the rings), and the
rings sit at low/mid frequency (so low-pass style laundering mostly spares
them). Detection variance-normalizes the inverted field, which makes the
detector invariant to unclipped global intensity scaling.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .imageops import (block_mean, child_seed, is_power_of_two, luminance,
                       resize_bilinear, rng_for, validate_image)

RENDER_GAIN = 0.125  # latent unit -> pixel contrast in the generation proxy
REF_VAR_SEEDS = 16
SIGMA_CALIB_FACTOR = 0.9


def ring_mask(side: int, r_min: int, r_max: int):
    """Half-plane annulus mask on the centered spectrum plus per-bin ring index.

    The included half-plane is rows below center, plus the right half of the
    center row; the conjugate-mirror half is implied by Hermitian symmetry.
    """
    c = side // 2
    yy, xx = np.mgrid[0:side, 0:side]
    radius = np.sqrt((yy - c) ** 2 + (xx - c) ** 2)
    half = (yy > c) | ((yy == c) & (xx > c))
    mask = (radius >= r_min) & (radius < r_max) & half
    ring_index = np.floor(radius).astype(np.int64) - r_min
    return mask, ring_index


@dataclass
class RingKey:
    seed: int
    side: int
    r_min: int
    r_max: int
    k_amp: float
    sigma_sq: float
    ref_var: float
    # derived, recomputed from the scalars above
    mask_yx: tuple = field(repr=False, default=None)
    mirror_yx: tuple = field(repr=False, default=None)
    ring_values: np.ndarray = field(repr=False, default=None)


def _derive_arrays(key: RingKey) -> None:
    mask, ring_index = ring_mask(key.side, key.r_min, key.r_max)
    ys, xs = np.nonzero(mask)
    key.mask_yx = (ys, xs)
    c = key.side // 2
    key.mirror_yx = ((2 * c - ys) % key.side, (2 * c - xs) % key.side)
    rg = rng_for(key.seed, "ring-values")
    n_rings = key.r_max - key.r_min
    per_ring = rg.standard_normal(n_rings) * key.k_amp + 1j * rg.standard_normal(n_rings) * key.k_amp
    key.ring_values = per_ring[ring_index[mask]]


def make_ring_key(seed: int, side: int = 64, r_min: int = 4, r_max: int = 12,
                  k_amp: float | None = None, sigma_sq: float | None = None,
                  calib_covers: int = 200, calib_size: int | None = None,
                  covers=None) -> RingKey:
    """Build a ring key; runs the variance calibration protocol when sigma_sq
    is not supplied (over `covers` if given, else 200 derived synthetic covers)."""
    if not is_power_of_two(side):
        raise ParameterError(f"latent side must be a power of two, got {side}")
    if not (0 < r_min < r_max <= side // 2):
        raise ParameterError(f"need 0 < r_min < r_max <= side/2, got r_min={r_min} r_max={r_max}")
    key = RingKey(seed=seed, side=side, r_min=r_min, r_max=r_max,
                  k_amp=float(side) if k_amp is None else float(k_amp),
                  sigma_sq=0.0, ref_var=0.0)
    _derive_arrays(key)
    key.ref_var = _reference_variance(key)
    if sigma_sq is None:
        if covers is None:
            covers = _calibration_covers(key, calib_covers, calib_size or 4 * side)
        key.sigma_sq = calibrate_sigma_sq(key, covers)
    else:
        if sigma_sq <= 0:
            raise ParameterError("sigma_sq must be > 0")
        key.sigma_sq = float(sigma_sq)
    return key


def _calibration_covers(key: RingKey, count: int, size: int):
    from .corpus import CorpusSpec, gen_cover

    spec = CorpusSpec(count=count, size=size, master_seed=child_seed(key.seed, "sigma-calib"))
    return (gen_cover(spec, i) for i in range(count))


def _reference_variance(key: RingKey) -> float:
    """Mean variance of the inverted latent over clean embed/render round trips.

    Detection rescales to this variance; computing it from key-derived seeds
    keeps the key reconstructible from its scalars alone.
    """
    out = []
    for i in range(REF_VAR_SEEDS):
        lat = embed(key, child_seed(key.seed, "ref-var", i))
        img = render(lat, 4 * key.side)
        out.append(invert(img, key.side).var())
    return float(np.mean(out))


def calibrate_sigma_sq(key: RingKey, covers) -> float:
    """Mean masked MSE over unwatermarked covers, scaled by 0.9.

    Pins unwatermarked scores near zero while the clean noise floor stays high.
    """
    mses = [masked_spectrum_mse(key, invert(img, key.side)) for img in covers]
    if not mses:
        raise ParameterError("sigma_sq calibration needs at least one cover")
    return SIGMA_CALIB_FACTOR * float(np.mean(mses))


def embed(key: RingKey, noise_seed: int) -> np.ndarray:
    """Seeded standard-normal latent with masked spectrum bins overwritten by
    the key (mirror bins conjugated, so the field stays real)."""
    g = rng_for(noise_seed, "latent-noise").standard_normal((key.side, key.side))
    spec = np.fft.fftshift(np.fft.fft2(g))
    spec[key.mask_yx] = key.ring_values
    spec[key.mirror_yx] = np.conj(key.ring_values)
    return np.fft.ifft2(np.fft.ifftshift(spec)).real


def render(latent: np.ndarray, out_size: int) -> np.ndarray:
    """Generation proxy: bilinear upsample, affine map to gray levels, 3 channels."""
    side = latent.shape[0]
    if latent.ndim != 2 or latent.shape[1] != side:
        raise ParameterError(f"latent must be square, got {latent.shape}")
    if out_size < side or not is_power_of_two(out_size) or not is_power_of_two(side):
        raise ParameterError(f"render: need power-of-two out_size >= latent side, got {out_size} vs {side}")
    up = resize_bilinear(latent, out_size, out_size)
    img = np.clip(0.5 + RENDER_GAIN * up, 0.0, 1.0)
    return np.repeat(img[:, :, None], 3, axis=2)


def invert(image: np.ndarray, latent_side: int) -> np.ndarray:
    """Approximate inverse of render: block-average the luminance back down.

    Lossy by design; the residual drift is what keeps clean scores below 1.
    """
    validate_image(image)
    h, w = image.shape[:2]
    if h != w:
        raise ParameterError(f"invert: image must be square, got {h}x{w}")
    if h % latent_side:
        raise ParameterError(f"invert: side {h} not divisible by latent side {latent_side}")
    lum = luminance(image)
    return (block_mean(lum, h // latent_side) - 0.5) / RENDER_GAIN


def masked_spectrum_mse(key: RingKey, latent: np.ndarray) -> float:
    """Masked-bin MSE against the key after zero-mean, reference-variance rescale."""
    v = latent.var()
    if v < 1e-12:
        # a flat field carries no signal; score it as maximally distant
        return float(np.mean(np.abs(key.ring_values) ** 2))
    z = (latent - latent.mean()) * np.sqrt(key.ref_var / v)
    spec = np.fft.fftshift(np.fft.fft2(z))
    return float(np.mean(np.abs(spec[key.mask_yx] - key.ring_values) ** 2))


def detect(image: np.ndarray, key: RingKey) -> float:
    """Provenance score max(0, 1 - MSE / sigma_sq), clamped to [0, 1]."""
    h = image.shape[0]
    if image.shape[1] != h or h % key.side:
        raise ParameterError(f"detect: image {image.shape[:2]} incompatible with latent side {key.side}")
    mse = masked_spectrum_mse(key, invert(image, key.side))
    return float(np.clip(1.0 - mse / key.sigma_sq, 0.0, 1.0))


def key_to_json(key: RingKey) -> str:
    return json.dumps({"seed": key.seed, "side": key.side, "r_min": key.r_min,
                       "r_max": key.r_max, "k_amp": key.k_amp, "sigma_sq": key.sigma_sq},
                      indent=2, sort_keys=True) + "\n"


def key_from_json(text: str) -> RingKey:
    d = json.loads(text)
    return make_ring_key(seed=int(d["seed"]), side=int(d["side"]), r_min=int(d["r_min"]),
                         r_max=int(d["r_max"]), k_amp=float(d["k_amp"]),
                         sigma_sq=float(d["sigma_sq"]))


def save_key(key: RingKey, path: str | Path) -> None:
    Path(path).write_text(key_to_json(key), encoding="utf-8")


def load_key(path: str | Path) -> RingKey:
    return key_from_json(Path(path).read_text(encoding="utf-8"))

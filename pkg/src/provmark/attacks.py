"""Attack simulation: four families on 30-step linear intensity schedules.

Every attack returns a canonical-size image (geometry normalization), so the
detectors never resample or crop anything themselves. For cropping that
normalization is exactly the grid rescale that desynchronizes frequency-grid
watermarks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ParameterError
from .imageops import child_seed, gaussian_blur, load_png, luminance, resize_bilinear, rng_for

ATTACK_KINDS = ("control", "crop", "brightness", "inpaint", "regen")

# kind -> (lo, hi) of the scheduled parameter
SCHEDULE_RANGES = {
    "crop": (0.05, 0.90),        # area fraction removed
    "brightness": (1.0, 3.0),    # intensity factor
    "inpaint": (0.05, 0.60),     # masked area ratio
    "regen": (0.01, 0.95),       # resampling strength
}


@dataclass(frozen=True)
class AttackTuning:
    """Proxy coefficients, exposed as configuration with these defaults."""
    regen_blur_base: float = 1.0
    regen_blur_span: float = 7.0
    regen_noise_base: float = 0.02
    regen_noise_span: float = 0.10
    inpaint_sweeps: int = 500
    inpaint_global_strength: float = 0.07


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    interval: int
    param: float
    trial_seed: int


def schedule(kind: str, interval: int, intervals: int = 30, ranges: dict | None = None) -> float:
    """Linear ramp hitting both endpoints exactly: interval 1 -> lo, last -> hi."""
    table = SCHEDULE_RANGES if ranges is None else ranges
    if kind not in table:
        raise ParameterError(f"unknown attack kind: {kind!r}")
    if not 1 <= interval <= intervals:
        raise ParameterError(f"interval {interval} outside [1, {intervals}]")
    lo, hi = table[kind]
    return lo + (interval - 1) * (hi - lo) / (intervals - 1)


def make_spec(kind: str, interval: int, trial_seed: int, intervals: int = 30,
              ranges: dict | None = None) -> AttackSpec:
    if kind == "control":
        if not 1 <= interval <= intervals:
            raise ParameterError(f"interval {interval} outside [1, {intervals}]")
        return AttackSpec("control", interval, 0.0, trial_seed)
    return AttackSpec(kind, interval, schedule(kind, interval, intervals, ranges), trial_seed)


def attack_crop(image: np.ndarray, area_removed: float) -> np.ndarray:
    """Center-crop the given area fraction away, then resample back up."""
    if not 0.0 <= area_removed < 1.0:
        raise ParameterError(f"area_removed must be in [0, 1), got {area_removed}")
    if area_removed == 0.0:
        return image.copy()
    side = image.shape[0]
    kept = int(np.rint(side * np.sqrt(1.0 - area_removed)))
    off = (side - kept) // 2
    window = image[off:off + kept, off:off + kept]
    return np.clip(resize_bilinear(window, side, side), 0.0, 1.0)


def attack_brightness(image: np.ndarray, factor: float) -> np.ndarray:
    if factor < 1.0:
        raise ParameterError(f"brightness factor must be >= 1.0, got {factor}")
    return np.clip(image * factor, 0.0, 1.0)


def attack_regen(image: np.ndarray, strength: float, trial_seed: int,
                 tuning: AttackTuning = AttackTuning()) -> np.ndarray:
    """Resampling proxy: strength-coupled low-pass blend plus seeded noise."""
    if not 0.0 < strength < 1.0:
        raise ParameterError(f"regen strength must be in (0, 1), got {strength}")
    blur = gaussian_blur(image, tuning.regen_blur_base + tuning.regen_blur_span * strength)
    noise_std = tuning.regen_noise_base + tuning.regen_noise_span * strength
    noise = rng_for(trial_seed, "regen-noise").standard_normal(image.shape) * noise_std
    return np.clip((1.0 - strength) * image + strength * blur + noise, 0.0, 1.0)


def attack_inpaint(image: np.ndarray, area_ratio: float, trial_seed: int,
                   tuning: AttackTuning = AttackTuning()) -> np.ndarray:
    """Centered box replaced by boundary-diffused infill plus matched noise,
    followed by a mild whole-frame re-encode pass."""
    if not 0.0 < area_ratio <= SCHEDULE_RANGES["inpaint"][1]:
        raise ParameterError(f"inpaint area ratio must be in (0, 0.60], got {area_ratio}")
    side = image.shape[0]
    box = int(np.rint(side * np.sqrt(area_ratio)))
    lo = (side - box) // 2
    hi = lo + box

    out = image.copy()
    region = out[lo - 1:hi + 1, lo - 1:hi + 1].copy()
    border = np.ones(region.shape[:2], dtype=bool)
    border[1:-1, 1:-1] = False
    work = region.copy()
    work[1:-1, 1:-1] = region[border].reshape(-1, region.shape[2]).mean(axis=0)
    for _ in range(tuning.inpaint_sweeps):
        work[1:-1, 1:-1] = 0.25 * (work[:-2, 1:-1] + work[2:, 1:-1]
                                   + work[1:-1, :-2] + work[1:-1, 2:])

    ring = np.concatenate([
        luminance(image[max(lo - 2, 0):lo, lo:hi]).ravel(),
        luminance(image[hi:hi + 2, lo:hi]).ravel(),
        luminance(image[lo:hi, max(lo - 2, 0):lo]).ravel(),
        luminance(image[lo:hi, hi:hi + 2]).ravel(),
    ])
    noise = rng_for(trial_seed, "inpaint-noise").standard_normal((box, box)) * float(ring.std())
    out[lo:hi, lo:hi] = np.clip(work[1:-1, 1:-1] + noise[:, :, None], 0.0, 1.0)
    return attack_regen(out, tuning.inpaint_global_strength,
                        child_seed(trial_seed, "inpaint-regen"), tuning)


def apply(image: np.ndarray, spec: AttackSpec, tuning: AttackTuning = AttackTuning()) -> np.ndarray:
    """Dispatch one isolated attack; output is always input-sized in [0, 1]."""
    if spec.kind == "control":
        return image.copy()
    if spec.kind == "crop":
        return attack_crop(image, spec.param)
    if spec.kind == "brightness":
        return attack_brightness(image, spec.param)
    if spec.kind == "regen":
        return attack_regen(image, spec.param, spec.trial_seed, tuning)
    if spec.kind == "inpaint":
        return attack_inpaint(image, spec.param, spec.trial_seed, tuning)
    raise ParameterError(f"unknown attack kind: {spec.kind!r}")


@dataclass
class ExternalEntry:
    original: np.ndarray
    attacked: np.ndarray
    codec: str
    attack: str
    interval: int
    fidelity_override: float | None


def ingest_external(manifest_path: str | Path, canonical_size: int) -> list[ExternalEntry]:
    """Read a JSON-lines manifest of externally attacked images.

    Each line: {"original": path, "attacked": path, "codec": "latent"|"spatial",
    "attack": str, "interval": int, "fidelity_external": optional number}.
    Paths are resolved relative to the manifest; images resample to canonical size.
    """
    path = Path(manifest_path)
    if not path.is_file():
        raise DataError(f"external manifest not found: {path}")
    entries = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            codec = obj["codec"]
            attack = obj["attack"]
            interval = int(obj["interval"])
            orig_path = path.parent / obj["original"]
            att_path = path.parent / obj["attacked"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: malformed manifest line ({exc})") from exc
        if codec not in ("latent", "spatial"):
            raise DataError(f"{path}:{lineno}: unknown codec {codec!r}")
        for p in (orig_path, att_path):
            if not p.is_file():
                raise DataError(f"{path}:{lineno}: missing image file {p}")
        original = _to_canonical(load_png(orig_path), canonical_size)
        attacked = _to_canonical(load_png(att_path), canonical_size)
        fid = obj.get("fidelity_external")
        entries.append(ExternalEntry(original, attacked, codec, attack, interval,
                                     None if fid is None else float(fid)))
    return entries


def _to_canonical(img: np.ndarray, size: int) -> np.ndarray:
    if img.shape[0] == size and img.shape[1] == size:
        return img
    return np.clip(resize_bilinear(img, size, size), 0.0, 1.0)

"""Run configuration: dotted key=value plain text, strict about unknown keys.

Grammar: one `section.key = value` per line, `#` starts a comment, blank
lines ignored. Values are typed per the schema below; lists are
comma-separated. Unknown keys are errors, not warnings.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import ConfigError

CODECS = ("latent", "spatial")
ATTACKS = ("control", "crop", "brightness", "inpaint", "regen")


@dataclass
class RunConfig:
    # corpus
    corpus_count: int = 200
    corpus_size: int = 256
    corpus_source: str = "synthetic"
    # run
    master_seed: int = 20260810
    out_dir: str = "bench_out"
    threads: int = 0  # 0 = available parallelism
    plots: bool = False
    codecs: tuple = CODECS
    attacks: tuple = ATTACKS
    # aer
    cet: float = 0.20
    fidelity_min: float = 75.0
    z: float = 1.96
    sigma_est: float = 0.20
    samples_per_interval: int = 100
    intervals: int = 30
    # latent codec
    latent_side: int = 64
    latent_r_min: int = 4
    latent_r_max: int = 12
    latent_k_amp: float = 64.0
    latent_calib_covers: int = 200
    # spatial codec
    spatial_block: int = 8
    spatial_payload_len: int = 32
    spatial_alpha: float = 0.02
    spatial_calib_margin: float = 1.15
    # attack tuning
    regen_blur_base: float = 1.0
    regen_blur_span: float = 7.0
    regen_noise_base: float = 0.02
    regen_noise_span: float = 0.10
    inpaint_sweeps: int = 500
    inpaint_global_strength: float = 0.07
    # schedule overrides
    crop_lo: float = 0.05
    crop_hi: float = 0.90
    brightness_lo: float = 1.0
    brightness_hi: float = 3.0
    inpaint_lo: float = 0.05
    inpaint_hi: float = 0.60
    regen_lo: float = 0.01
    regen_hi: float = 0.95
    # external scoring
    external_latent_key: str = ""
    external_spatial_key: str = ""
    external_manifest: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["codecs"] = list(self.codecs)
        d["attacks"] = list(self.attacks)
        return d


# dotted key -> (attribute, parser)
def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes", "on"):
        return True
    if s.lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_list(valid):
    def parse(s: str):
        items = tuple(x.strip() for x in s.split(",") if x.strip())
        for item in items:
            if item not in valid:
                raise ValueError(f"unknown entry {item!r} (valid: {', '.join(valid)})")
        if not items:
            raise ValueError("empty list")
        return items
    return parse


_SCHEMA = {
    "corpus.count": ("corpus_count", int),
    "corpus.size": ("corpus_size", int),
    "corpus.source": ("corpus_source", str),
    "run.master_seed": ("master_seed", int),
    "run.out": ("out_dir", str),
    "run.threads": ("threads", int),
    "run.plots": ("plots", _parse_bool),
    "run.codecs": ("codecs", _parse_list(CODECS)),
    "run.attacks": ("attacks", _parse_list(ATTACKS)),
    "aer.cet": ("cet", float),
    "aer.fidelity_min": ("fidelity_min", float),
    "aer.z": ("z", float),
    "aer.sigma_est": ("sigma_est", float),
    "aer.samples_per_interval": ("samples_per_interval", int),
    "aer.intervals": ("intervals", int),
    "latent.side": ("latent_side", int),
    "latent.r_min": ("latent_r_min", int),
    "latent.r_max": ("latent_r_max", int),
    "latent.k_amp": ("latent_k_amp", float),
    "latent.calib_covers": ("latent_calib_covers", int),
    "spatial.block": ("spatial_block", int),
    "spatial.payload_len": ("spatial_payload_len", int),
    "spatial.alpha": ("spatial_alpha", float),
    "spatial.calib_margin": ("spatial_calib_margin", float),
    "attack.regen_blur_base": ("regen_blur_base", float),
    "attack.regen_blur_span": ("regen_blur_span", float),
    "attack.regen_noise_base": ("regen_noise_base", float),
    "attack.regen_noise_span": ("regen_noise_span", float),
    "attack.inpaint_sweeps": ("inpaint_sweeps", int),
    "attack.inpaint_global_strength": ("inpaint_global_strength", float),
    "schedule.crop_lo": ("crop_lo", float),
    "schedule.crop_hi": ("crop_hi", float),
    "schedule.brightness_lo": ("brightness_lo", float),
    "schedule.brightness_hi": ("brightness_hi", float),
    "schedule.inpaint_lo": ("inpaint_lo", float),
    "schedule.inpaint_hi": ("inpaint_hi", float),
    "schedule.regen_lo": ("regen_lo", float),
    "schedule.regen_hi": ("regen_hi", float),
    "external.latent_key": ("external_latent_key", str),
    "external.spatial_key": ("external_spatial_key", str),
    "external.manifest": ("external_manifest", str),
}


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parser = _SCHEMA[key]
        try:
            setattr(cfg, attr, parser(value))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    _validate(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"))


def _validate(cfg: RunConfig) -> None:
    if not cfg.codecs:
        raise ConfigError("at least one codec required")
    if not cfg.attacks:
        raise ConfigError("at least one attack required")
    if cfg.intervals < 2:
        raise ConfigError("intervals must be >= 2")
    if cfg.corpus_size % cfg.latent_side:
        raise ConfigError("canonical size must be divisible by the latent side")
    if cfg.corpus_size % cfg.spatial_block:
        raise ConfigError("canonical size must be divisible by the spatial block")
    for lo_name, hi_name in (("crop_lo", "crop_hi"), ("brightness_lo", "brightness_hi"),
                             ("inpaint_lo", "inpaint_hi"), ("regen_lo", "regen_hi")):
        if getattr(cfg, lo_name) >= getattr(cfg, hi_name):
            raise ConfigError(f"schedule {lo_name} must be < {hi_name}")

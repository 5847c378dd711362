"""Fidelity scoring, evasion-region classification, and report aggregation."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DataError, ParameterError
from .imageops import luminance

SSIM_SIGMA = 1.5       # 11x11 Gaussian window
SSIM_TRUNCATE = 3.5    # int(3.5 * 1.5 + 0.5) = 5 taps each side
SSIM_C1 = 0.01 ** 2    # stabilizers for dynamic range 1.0
SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True)
class AerConfig:
    cet: float = 0.20
    fidelity_min: float = 75.0
    z: float = 1.96
    sigma_est: float = 0.20
    samples_per_interval: int = 100
    intervals: int = 30

    def __post_init__(self):
        if not 0.0 < self.cet < 1.0:
            raise ParameterError(f"cet must be in (0, 1), got {self.cet}")
        if not 0.0 < self.fidelity_min < 100.0:
            raise ParameterError(f"fidelity_min must be in (0, 100), got {self.fidelity_min}")
        if self.samples_per_interval < 30:
            raise ParameterError(f"samples_per_interval must be >= 30, got {self.samples_per_interval}")


@dataclass
class TrialRecord:
    codec: str
    attack: str
    interval: int
    sample: int
    provenance: float
    fidelity: float
    aer: bool
    extras: dict = field(default_factory=dict)


def fidelity(original: np.ndarray, attacked: np.ndarray) -> float:
    """Mean local structural similarity over luminance, scaled to [0, 100]."""
    if original.shape != attacked.shape:
        raise ParameterError(f"fidelity: shape mismatch {original.shape} vs {attacked.shape}")
    x, y = luminance(original), luminance(attacked)

    def smooth(z):
        return ndimage.gaussian_filter(z, SSIM_SIGMA, truncate=SSIM_TRUNCATE, mode="reflect")

    mx, my = smooth(x), smooth(y)
    vx = smooth(x * x) - mx * mx
    vy = smooth(y * y) - my * my
    vxy = smooth(x * y) - mx * my
    ssim_map = ((2 * mx * my + SSIM_C1) * (2 * vxy + SSIM_C2)) / (
        (mx ** 2 + my ** 2 + SSIM_C1) * (vx + vy + SSIM_C2))
    return 100.0 * max(0.0, float(ssim_map.mean()))


def classify_aer(provenance: float, fid: float, cfg: AerConfig) -> bool:
    """Strict on both sides: provenance below the threshold, fidelity above."""
    if not 0.0 <= provenance <= 1.0:
        raise ParameterError(f"provenance outside [0, 1]: {provenance}")
    if not 0.0 <= fid <= 100.0:
        raise ParameterError(f"fidelity outside [0, 100]: {fid}")
    return provenance < cfg.cet and fid > cfg.fidelity_min


def moe(cfg: AerConfig) -> float:
    """Half-width of the 95 percent interval: z * sigma / sqrt(n)."""
    return cfg.z * cfg.sigma_est / np.sqrt(cfg.samples_per_interval)


def _select(trials, codec: str, attack: str):
    return [t for t in trials if t.codec == codec and t.attack == attack]


def aer_rate(trials, codec: str, attack: str) -> float:
    """Flagged fraction pooled over every interval and sample of one cell."""
    sel = _select(trials, codec, attack)
    if not sel:
        raise DataError(f"no trials for ({codec}, {attack})")
    return float(np.mean([t.aer for t in sel]))


def interval_curves(trials, codec: str, attack: str):
    """Per-interval mean provenance and fidelity, ordered by interval."""
    sel = _select(trials, codec, attack)
    out = []
    for interval in sorted({t.interval for t in sel}):
        rows = [t for t in sel if t.interval == interval]
        out.append((interval,
                    float(np.mean([t.provenance for t in rows])),
                    float(np.mean([t.fidelity for t in rows]))))
    return out


def canonical_sort(trials):
    return sorted(trials, key=lambda t: (t.codec, t.attack, t.interval, t.sample))


@dataclass
class BenchmarkReport:
    aer_rates: dict            # (codec, attack) -> rate
    curves: dict               # (codec, attack) -> [(interval, mean_prov, mean_fid)]
    cell_std: dict             # (codec, attack) -> empirical provenance std
    moe: float
    manifest: dict
    warnings: list = field(default_factory=list)


def aggregate(trials, cfg: AerConfig, manifest: dict) -> BenchmarkReport:
    """Order-independent reduce: trials are sorted canonically first."""
    trials = canonical_sort(trials)
    cells = sorted({(t.codec, t.attack) for t in trials})
    rates, curves, stds = {}, {}, {}
    warnings = []
    for codec, attack in cells:
        rates[(codec, attack)] = aer_rate(trials, codec, attack)
        curve = interval_curves(trials, codec, attack)
        curves[(codec, attack)] = curve
        sel = _select(trials, codec, attack)
        stds[(codec, attack)] = float(np.std([t.provenance for t in sel]))
        if len(curve) < cfg.intervals:
            warnings.append(f"({codec}, {attack}): only {len(curve)} of "
                            f"{cfg.intervals} intervals populated")
    return BenchmarkReport(aer_rates=rates, curves=curves, cell_std=stds,
                           moe=float(moe(cfg)), manifest=manifest, warnings=warnings)


def trials_csv(trials) -> str:
    """Canonically sorted trial rows; acc_bits is blank for the latent codec."""
    buf = io.StringIO()
    buf.write("codec,attack,interval,sample,provenance,fidelity,aer,acc_bits\n")
    for t in canonical_sort(trials):
        acc = t.extras.get("acc_bits")
        acc_txt = "" if acc is None else f"{acc:.6f}"
        buf.write(f"{t.codec},{t.attack},{t.interval},{t.sample},"
                  f"{t.provenance:.6f},{t.fidelity:.6f},{int(t.aer)},{acc_txt}\n")
    return buf.getvalue()


def summary_csv(report: BenchmarkReport) -> str:
    buf = io.StringIO()
    buf.write("codec,attack,aer_rate_percent\n")
    for (codec, attack) in sorted(report.aer_rates):
        buf.write(f"{codec},{attack},{100.0 * report.aer_rates[(codec, attack)]:.2f}\n")
    return buf.getvalue()


def curves_csv(report: BenchmarkReport) -> str:
    buf = io.StringIO()
    buf.write("codec,attack,interval,mean_provenance,mean_fidelity\n")
    for (codec, attack) in sorted(report.curves):
        for interval, prov, fid in report.curves[(codec, attack)]:
            buf.write(f"{codec},{attack},{interval},{prov:.6f},{fid:.6f}\n")
    return buf.getvalue()

"""Benchmark orchestration: corpus -> keys -> plan -> score -> report.

The pipeline decomposes into five stages with file artifacts between them,
so each stage can run as its own subcommand; `run` chains them in-process.
Trials are pure functions of their seeds, which makes results independent of
worker count and execution order: the reduce step sorts canonically before
anything is written.
"""
from __future__ import annotations

import json
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from . import attacks, latent, metrics, spatial
from .attacks import AttackTuning, AttackSpec
from .config import RunConfig
from .corpus import CorpusSpec, gen_cover, load_images
from .errors import CalibrationError, ConfigError, DataError
from .imageops import child_seed, rng_for
from .metrics import AerConfig, TrialRecord, aggregate

CLEAN_LATENT_FLOOR = 0.90
UNWATERMARKED_CEILING = 0.35
FIDELITY_IMPACT_LIMIT = 2.0
CALIB_CHECK_COVERS = 100


# ------------------------------------------------------------------ helpers
def aer_config(cfg: RunConfig) -> AerConfig:
    return AerConfig(cet=cfg.cet, fidelity_min=cfg.fidelity_min, z=cfg.z,
                     sigma_est=cfg.sigma_est, samples_per_interval=cfg.samples_per_interval,
                     intervals=cfg.intervals)


def attack_tuning(cfg: RunConfig) -> AttackTuning:
    return AttackTuning(regen_blur_base=cfg.regen_blur_base, regen_blur_span=cfg.regen_blur_span,
                        regen_noise_base=cfg.regen_noise_base, regen_noise_span=cfg.regen_noise_span,
                        inpaint_sweeps=cfg.inpaint_sweeps,
                        inpaint_global_strength=cfg.inpaint_global_strength)


def schedule_ranges(cfg: RunConfig) -> dict:
    return {"crop": (cfg.crop_lo, cfg.crop_hi),
            "brightness": (cfg.brightness_lo, cfg.brightness_hi),
            "inpaint": (cfg.inpaint_lo, cfg.inpaint_hi),
            "regen": (cfg.regen_lo, cfg.regen_hi)}


class CoverProvider:
    """Covers by index: synthetic generator or an ingested directory."""

    def __init__(self, cfg: RunConfig):
        self.size = cfg.corpus_size
        if cfg.corpus_source == "synthetic":
            self.spec = CorpusSpec(count=cfg.corpus_count, size=cfg.corpus_size,
                                   master_seed=child_seed(cfg.master_seed, "corpus"))
            self._dir_images = None
            self.count = cfg.corpus_count
        else:
            self._dir_images = load_images(cfg.corpus_source, cfg.corpus_size)
            self.spec = None
            self.count = len(self._dir_images)
        self._get_synthetic = lru_cache(maxsize=32)(self._gen)

    def _gen(self, index: int):
        return gen_cover(self.spec, index)

    def get(self, index: int) -> np.ndarray:
        if self._dir_images is not None:
            return self._dir_images[index]
        return self._get_synthetic(index)


def resolve_threads(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads > 0 else (os.cpu_count() or 1)


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.out_dir)


# ------------------------------------------------------------------ stages
def stage_gen(cfg: RunConfig) -> dict:
    """Resolve the corpus and record its identity."""
    provider = CoverProvider(cfg)
    preview = min(4, provider.count)
    import hashlib
    digests = []
    for i in range(preview):
        digests.append(hashlib.sha256(provider.get(i).tobytes()).hexdigest())
    info = {"source": cfg.corpus_source, "count": provider.count, "size": provider.size,
            "master_seed": cfg.master_seed, "preview_sha256": digests}
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "corpus.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return info


def calibrate_keys(cfg: RunConfig, provider: CoverProvider):
    """Run both calibration protocols and verify their targets.

    Latent: sigma_sq from masked MSE over unwatermarked covers; fresh-cover
    clean floor and unwatermarked ceiling checked afterwards. Spatial: the
    smallest safe amplitude from the largest cover statistic; clean decoding
    then holds exactly on every calibration cover.
    """
    n_calib = min(provider.count, cfg.latent_calib_covers)
    ring = latent.make_ring_key(seed=child_seed(cfg.master_seed, "latent-key"),
                                side=cfg.latent_side, r_min=cfg.latent_r_min,
                                r_max=cfg.latent_r_max, k_amp=cfg.latent_k_amp,
                                covers=(provider.get(i) for i in range(n_calib)))

    spread0 = spatial.make_spread_key(seed=child_seed(cfg.master_seed, "spatial-key"),
                                      image_size=cfg.corpus_size, block=cfg.spatial_block,
                                      payload_len=cfg.spatial_payload_len,
                                      alpha=cfg.spatial_alpha)
    alpha, alpha_report = spatial.calibrate_alpha(
        spread0, (provider.get(i) for i in range(provider.count)),
        margin=cfg.spatial_calib_margin)
    spread = replace(spread0, alpha=alpha)

    # verification against the documented targets
    clean_accs, fid_impacts = [], []
    for i in range(provider.count):
        cov = provider.get(i)
        payload = spatial.random_payload(rng_for(cfg.master_seed, "calib-payload", i),
                                         spread.payload_len)
        wm = spatial.embed(cov, spread, payload)
        clean_accs.append(spatial.bit_accuracy(wm, spread, payload))
        if i < CALIB_CHECK_COVERS:
            fid_impacts.append(100.0 - metrics.fidelity(cov, wm))
    clean_spatial = float(np.min(clean_accs))

    clean_latents = []
    for i in range(CALIB_CHECK_COVERS):
        img = latent.render(latent.embed(ring, child_seed(cfg.master_seed, "calib-clean", i)),
                            cfg.corpus_size)
        clean_latents.append(latent.detect(img, ring))
    clean_latent = float(np.mean(clean_latents))

    unwm = [latent.detect(provider.get(i), ring)
            for i in range(min(provider.count, CALIB_CHECK_COVERS))]
    unwatermarked_latent = float(np.mean(unwm))

    report = {
        "sigma_sq": ring.sigma_sq,
        "ref_var": ring.ref_var,
        "alpha": alpha,
        "alpha_protocol": alpha_report,
        "clean_latent_mean": clean_latent,
        "clean_spatial_min_accuracy": clean_spatial,
        "unwatermarked_latent_mean": unwatermarked_latent,
        "fidelity_impact_max": float(np.max(fid_impacts)),
    }
    failures = []
    if clean_latent < CLEAN_LATENT_FLOOR:
        failures.append(f"clean latent mean {clean_latent:.3f} < {CLEAN_LATENT_FLOOR}")
    if clean_spatial < 1.0:
        failures.append(f"clean spatial accuracy {clean_spatial:.4f} < 1.0")
    if unwatermarked_latent > UNWATERMARKED_CEILING:
        failures.append(f"unwatermarked latent mean {unwatermarked_latent:.3f} > "
                        f"{UNWATERMARKED_CEILING}")
    if report["fidelity_impact_max"] > FIDELITY_IMPACT_LIMIT:
        failures.append(f"embedding fidelity impact {report['fidelity_impact_max']:.2f} > "
                        f"{FIDELITY_IMPACT_LIMIT} points")
    if failures:
        raise CalibrationError("; ".join(failures) + f" (report: {json.dumps(report)})")
    return ring, spread, report


def stage_embed(cfg: RunConfig) -> dict:
    provider = CoverProvider(cfg)
    ring, spread, report = calibrate_keys(cfg, provider)
    out = _out(cfg)
    keys_dir = out / "keys"
    keys_dir.mkdir(parents=True, exist_ok=True)
    latent.save_key(ring, keys_dir / "latent_key.json")
    spatial.save_key(spread, keys_dir / "spatial_key.json")
    (out / "calibration.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")
    return report


def _load_keys(cfg: RunConfig):
    keys_dir = _out(cfg) / "keys"
    ring_path = keys_dir / "latent_key.json"
    spread_path = keys_dir / "spatial_key.json"
    if not ring_path.is_file() or not spread_path.is_file():
        raise DataError(f"keys not found under {keys_dir}; run the embed stage first")
    ring = latent.load_key(ring_path)
    spread, _ = spatial.load_key(spread_path)
    return ring, spread


def plan_trials(cfg: RunConfig, cover_count: int) -> list[dict]:
    rows = []
    for codec in cfg.codecs:
        for attack in cfg.attacks:
            for interval in range(1, cfg.intervals + 1):
                for sample in range(cfg.samples_per_interval):
                    row = {"codec": codec, "attack": attack, "interval": interval,
                           "sample": sample,
                           "trial_seed": child_seed(cfg.master_seed, "trial", codec,
                                                    attack, interval, sample)}
                    if codec == "latent":
                        row["noise_seed"] = child_seed(cfg.master_seed, "latent-base",
                                                       attack, interval, sample)
                    else:
                        row["cover_index"] = child_seed(cfg.master_seed, "cover-draw",
                                                        attack, interval, sample) % cover_count
                        payload = spatial.random_payload(
                            rng_for(cfg.master_seed, "payload", attack, interval, sample),
                            cfg.spatial_payload_len)
                        row["payload"] = spatial.payload_to_hex(payload)
                    rows.append(row)
    return rows


def stage_attack(cfg: RunConfig) -> list[dict]:
    provider_count = CoverProvider(cfg).count if "spatial" in cfg.codecs else 0
    rows = plan_trials(cfg, max(provider_count, 1))
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "plan.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return rows


# worker-side state, set once per process
_WORKER = {}


def _init_worker(cfg: RunConfig, ring: latent.RingKey, spread: spatial.SpreadKey):
    _WORKER["cfg"] = cfg
    _WORKER["ring"] = ring
    _WORKER["spread"] = spread
    _WORKER["provider"] = CoverProvider(cfg) if "spatial" in cfg.codecs else None
    _WORKER["tuning"] = attack_tuning(cfg)
    _WORKER["ranges"] = schedule_ranges(cfg)
    _WORKER["aer"] = aer_config(cfg)


def _score_chunk(chunk: list[dict]) -> list[tuple]:
    cfg: RunConfig = _WORKER["cfg"]
    ring, spread = _WORKER["ring"], _WORKER["spread"]
    tuning, ranges = _WORKER["tuning"], _WORKER["ranges"]
    aer_cfg = _WORKER["aer"]
    out = []
    for row in chunk:
        codec, attack, interval = row["codec"], row["attack"], row["interval"]
        if codec == "latent":
            base = latent.render(latent.embed(ring, row["noise_seed"]), cfg.corpus_size)
        else:
            cover = _WORKER["provider"].get(row["cover_index"])
            payload = spatial.payload_from_hex(row["payload"], spread.payload_len)
            base = spatial.embed(cover, spread, payload)
        spec = attacks.make_spec(attack, interval, row["trial_seed"], cfg.intervals, ranges)
        attacked = attacks.apply(base, spec, tuning)
        fid = metrics.fidelity(base, attacked)
        extras = {}
        if codec == "latent":
            prov = latent.detect(attacked, ring)
        else:
            acc = spatial.bit_accuracy(attacked, spread, payload)
            prov = max(0.0, 2.0 * acc - 1.0)
            extras["acc_bits"] = acc
            extras["acc_bytes"] = spatial.byte_accuracy(attacked, spread, payload)
        flag = metrics.classify_aer(prov, fid, aer_cfg)
        out.append((codec, attack, interval, row["sample"], prov, fid, flag, extras))
    return out


def _chunks(rows: list[dict]):
    groups = {}
    for row in rows:
        groups.setdefault((row["codec"], row["attack"], row["interval"]), []).append(row)
    return [groups[k] for k in sorted(groups)]


def stage_score(cfg: RunConfig, rows: list[dict] | None = None) -> list[TrialRecord]:
    out = _out(cfg)
    if rows is None:
        plan_path = out / "plan.jsonl"
        if not plan_path.is_file():
            raise DataError(f"{plan_path} not found; run the attack stage first")
        rows = [json.loads(line) for line in plan_path.read_text(encoding="utf-8").splitlines()
                if line.strip()]
    ring, spread = _load_keys(cfg)
    threads = resolve_threads(cfg)
    chunks = _chunks(rows)
    results = []
    if threads <= 1:
        _init_worker(cfg, ring, spread)
        for chunk in chunks:
            results.extend(_score_chunk(chunk))
    else:
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker,
                                 initargs=(cfg, ring, spread)) as pool:
            for part in pool.map(_score_chunk, chunks):
                results.extend(part)
    trials = [TrialRecord(codec=r[0], attack=r[1], interval=r[2], sample=r[3],
                          provenance=r[4], fidelity=r[5], aer=r[6], extras=r[7])
              for r in results]
    trials = metrics.canonical_sort(trials)
    (out / "trials.csv").write_text(metrics.trials_csv(trials), encoding="utf-8")
    return trials


def stage_report(cfg: RunConfig, trials: list[TrialRecord] | None = None,
                 timings: dict | None = None, source: str = "internal"):
    out = _out(cfg)
    if trials is None:
        trials = read_trials_csv(out / "trials.csv")
    calib = {}
    calib_path = out / "calibration.json"
    if calib_path.is_file():
        calib = json.loads(calib_path.read_text(encoding="utf-8"))
    manifest = {
        "tool": f"provmark {__version__}",
        "source": source,
        "config": cfg.to_dict(),
        "calibration": calib,
        "cover_draw_policy": "hash(master_seed, attack, interval, sample) with replacement",
        "trial_count": len(trials),
        "timings_sec": timings or {},
    }
    report = aggregate(trials, aer_config(cfg), manifest)
    (out / "summary.csv").write_text(metrics.summary_csv(report), encoding="utf-8")
    (out / "curves.csv").write_text(metrics.curves_csv(report), encoding="utf-8")
    manifest["moe"] = report.moe
    manifest["warnings"] = report.warnings
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    if cfg.plots:
        from .plots import degradation_svg
        plot_dir = out / "plots"
        plot_dir.mkdir(exist_ok=True)
        attacks_seen = sorted({a for (_, a) in report.curves})
        for attack in attacks_seen:
            by_codec = {c: crv for (c, a), crv in report.curves.items() if a == attack}
            (plot_dir / f"{attack}.svg").write_text(
                degradation_svg(attack, by_codec, cfg.intervals), encoding="utf-8")
    return report


def read_trials_csv(path: Path) -> list[TrialRecord]:
    if not Path(path).is_file():
        raise DataError(f"{path} not found; run the score stage first")
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    trials = []
    for line in lines[1:]:
        codec, attack, interval, sample, prov, fid, aer, acc = line.split(",")
        extras = {} if acc == "" else {"acc_bits": float(acc)}
        trials.append(TrialRecord(codec=codec, attack=attack, interval=int(interval),
                                  sample=int(sample), provenance=float(prov),
                                  fidelity=float(fid), aer=bool(int(aer)), extras=extras))
    return trials


def _quarantine(cfg: RunConfig, stage: str) -> None:
    out = _out(cfg)
    if not out.is_dir():
        return
    qdir = out / f"quarantine-{stage}"
    qdir.mkdir(exist_ok=True)
    for item in list(out.iterdir()):
        if item.name.startswith("quarantine-"):
            continue
        shutil.move(str(item), str(qdir / item.name))


def run(cfg: RunConfig):
    """One-shot benchmark; equals the chained stage subcommands bit for bit."""
    timings = {}
    stage_fns = [("gen", lambda: stage_gen(cfg)),
                 ("embed", lambda: stage_embed(cfg)),
                 ("attack", lambda: stage_attack(cfg)),
                 ("score", lambda: stage_score(cfg)),
                 ("report", None)]
    for name, fn in stage_fns:
        t0 = time.monotonic()
        try:
            if name == "report":
                # reread trials.csv so one-shot and staged runs aggregate the
                # exact same (formatted) values
                report = stage_report(cfg, trials=None, timings=timings)
            else:
                fn()
        except Exception as exc:
            _quarantine(cfg, name)
            raise type(exc)(f"[stage {name}] {exc}") from exc
        timings[name] = round(time.monotonic() - t0, 3)
    return report


def calibrate(cfg: RunConfig) -> dict:
    """Standalone calibration: writes key files and the calibration report."""
    return stage_embed(cfg)


def score_external(manifest_path: str, cfg: RunConfig):
    """Score externally attacked images through the same classification path."""
    ring = spread = spread_payload = None
    entries = attacks.ingest_external(manifest_path, cfg.corpus_size)
    needed = {e.codec for e in entries}
    if "latent" in needed:
        if not cfg.external_latent_key:
            raise ConfigError("external.latent_key not configured")
        ring = latent.load_key(cfg.external_latent_key)
    if "spatial" in needed:
        if not cfg.external_spatial_key:
            raise ConfigError("external.spatial_key not configured")
        spread, spread_payload = spatial.load_key(cfg.external_spatial_key)
        if spread_payload is None:
            raise ConfigError("spatial key file carries no payload; external spatial "
                              "scoring needs the expected payload")
    aer_cfg = aer_config(cfg)
    counters = {}
    trials = []
    for entry in entries:
        extras = {}
        if entry.codec == "latent":
            prov = latent.detect(entry.attacked, ring)
        else:
            acc = spatial.bit_accuracy(entry.attacked, spread, spread_payload)
            prov = max(0.0, 2.0 * acc - 1.0)
            extras["acc_bits"] = acc
        fid = entry.fidelity_override
        if fid is None:
            fid = metrics.fidelity(entry.original, entry.attacked)
        else:
            fid = float(np.clip(fid, 0.0, 100.0))
        key = (entry.codec, entry.attack, entry.interval)
        sample = counters.get(key, 0)
        counters[key] = sample + 1
        trials.append(TrialRecord(codec=entry.codec, attack=entry.attack,
                                  interval=entry.interval, sample=sample, provenance=prov,
                                  fidelity=fid, aer=metrics.classify_aer(prov, fid, aer_cfg),
                                  extras=extras))
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    trials = metrics.canonical_sort(trials)
    (out / "trials.csv").write_text(metrics.trials_csv(trials), encoding="utf-8")
    return stage_report(cfg, trials=trials, source="external")

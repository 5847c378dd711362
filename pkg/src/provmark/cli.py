"""Command line entry points.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 calibration
failure.
"""
from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import RunConfig, load_config
from .errors import CalibrationError, ConfigError, DataError, ParameterError

STAGES = ("gen", "embed", "attack", "score", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="provmark",
                                     description="Invisible-watermark robustness benchmark")
    parser.add_argument("--version", action="version", version=f"provmark {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", *STAGES, "calibrate", "score-external"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="plain-text key=value configuration file")
        p.add_argument("--out", help="output directory (overrides run.out)")
        p.add_argument("--seed", type=int, help="master seed (overrides run.master_seed)")
        p.add_argument("--threads", type=int, help="worker count; 1 for bisection runs")
        p.add_argument("--plots", action="store_true", help="emit SVG degradation plots")
        if name == "score-external":
            p.add_argument("--external-manifest", help="JSONL manifest of attacked images")
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.out:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.plots:
        cfg.plots = True
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from . import runner

    try:
        cfg = _config_from_args(args)
        if args.command == "run":
            report = runner.run(cfg)
            _print_summary(report)
        elif args.command == "gen":
            runner.stage_gen(cfg)
        elif args.command == "embed":
            runner.stage_embed(cfg)
        elif args.command == "attack":
            runner.stage_attack(cfg)
        elif args.command == "score":
            runner.stage_score(cfg)
        elif args.command == "report":
            report = runner.stage_report(cfg)
            _print_summary(report)
        elif args.command == "calibrate":
            report = runner.calibrate(cfg)
            for k in ("alpha", "sigma_sq", "clean_latent_mean",
                      "clean_spatial_min_accuracy", "unwatermarked_latent_mean"):
                print(f"{k} = {report[k]}")
        elif args.command == "score-external":
            manifest = args.external_manifest or cfg.external_manifest
            if not manifest:
                raise ConfigError("score-external needs --external-manifest or external.manifest")
            report = runner.score_external(manifest, cfg)
            _print_summary(report)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except CalibrationError as exc:
        print(f"calibration failure: {exc}", file=sys.stderr)
        return 4
    return 0


def _print_summary(report) -> None:
    print("codec,attack,aer_rate_percent")
    for (codec, attack), rate in sorted(report.aer_rates.items()):
        print(f"{codec},{attack},{100.0 * rate:.2f}")


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``learnedreg <command> --config cfg.json --out dir``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .errors import CapacityError, ConfigError, DimensionError, FormatError, TrainingError
from .phantoms import generate_dataset, save_dataset

EXIT_CODES = {ConfigError: 2, FormatError: 2, DimensionError: 2, CapacityError: 3,
              TrainingError: 4}


def _read_json(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _config(args, raw=None) -> ex.ExperimentConfig:
    raw = _read_json(args.config) if raw is None else raw
    cfg = ex.ExperimentConfig.from_dict(raw)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _summary(payload):
    print(json.dumps(ex._jsonable(payload), sort_keys=True))


def cmd_dataset_gen(args):
    cfg = _config(args)
    dataset = generate_dataset(cfg.manifest)
    save_dataset(dataset, args.out)
    _summary({"out": str(args.out), "split_sizes": cfg.manifest.split_sizes()})


def cmd_compare(args):
    table = ex.run_comparison(_config(args), args.out)
    _summary({"out": str(args.out),
              "mse": {a: {s: v["mse"] for s, v in rows.items()}
                      for a, rows in table["results"].items()}})


def cmd_sweep(args):
    cfg = _config(args)
    report = ex.run_noise_sweep(cfg, out_dir=args.out)
    _summary({"out": str(args.out), "max_abs_z": report["max_abs_z"],
              "strictly_decreasing": report["closed_form_strictly_decreasing"]})


def cmd_oversmoothing(args):
    report = ex.run_oversmoothing_report(_config(args), out_dir=args.out)
    _summary({"out": str(args.out), "ratios_in_unit_interval": report["ratios_in_unit_interval"],
              "tail_bound_holds": report["tail_bound_holds"], "c": report["c"]})


def cmd_transfer(args):
    raw = _read_json(args.config)
    low_raw = raw.get("low", {})
    low = _config(args, low_raw)
    if "high" in raw:
        high = _config(args, raw["high"])
    else:
        high = replace(low, geometry=low.geometry.scaled(int(raw.get("scale", 2))))
    report = ex.run_resolution_transfer(low, high, variance=float(raw.get("variance", 0.005)),
                                        out_dir=args.out,
                                        include_fft=bool(raw.get("include_fft", True)))
    report.pop("_curves")
    _summary({"out": str(args.out), "svd": report["svd"], "fft": report.get("fft")})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="learnedreg",
                                     description="Learned spectral and Fourier reconstruction experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, handler):
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the configuration seed")
        p.set_defaults(handler=handler)

    dataset = sub.add_parser("dataset", help="dataset utilities")
    dsub = dataset.add_subparsers(dest="action", required=True)
    common(dsub.add_parser("gen", help="generate and save a phantom dataset"), cmd_dataset_gen)
    common(sub.add_parser("compare", help="four-approach comparison"), cmd_compare)
    common(sub.add_parser("sweep", help="noise-level convergence sweep"), cmd_sweep)
    common(sub.add_parser("oversmoothing", help="per-mode smoothness diagnostics"),
           cmd_oversmoothing)
    common(sub.add_parser("transfer", help="resolution transfer of coefficients and filters"),
           cmd_transfer)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.handler(args)
    except Exception as exc:  # reported as JSON for machine consumption
        code = next((c for t, c in EXIT_CODES.items() if isinstance(exc, t)), 1)
        error = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        if getattr(exc, "field", None) is not None:
            error["field"] = exc.field
        print(json.dumps(error), file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Subcommands cover the full workflow: generate a synthetic dataset, train the
denoiser, run a single task sweep, or run the whole three-task benchmark.
All knobs live in a `key = value` config file; --seed and --out override the
corresponding config keys.
"""

from __future__ import annotations

import argparse
import sys

from .bench import ExperimentConfig, run_experiment, write_rows_csv
from .channel_model import DatasetConfig, gen_dataset
from .config import get_bool, get_float, get_int, get_str, load_config
from .denoiser import DenoiserSpec, TrainConfig, train_denoiser
from .fileformats import save_dataset_split


def _cmd_gen_data(cfg: dict) -> int:
    dc = DatasetConfig(
        n_subcarriers=get_int(cfg, "n_subcarriers", 64),
        n_antennas=get_int(cfg, "n_antennas", 32),
        crop_rows=get_int(cfg, "crop_rows", 32),
        n_paths=get_int(cfg, "n_paths", 5),
        n_train=get_int(cfg, "n_train", 2000),
        n_val=get_int(cfg, "n_val", 500),
        n_test=get_int(cfg, "n_test", 500),
        snr_db_min=get_float(cfg, "snr_db_min", 0.0),
        snr_db_max=get_float(cfg, "snr_db_max", 40.0))
    seed = get_int(cfg, "seed", 0)
    prefix = get_str(cfg, "out")
    data = gen_dataset(dc, seed)
    for name, split in (("train", data.train), ("val", data.val),
                        ("test", data.test)):
        path = f"{prefix}.{name}.pnpd"
        save_dataset_split(path, split.h_clean, split.h_noisy, split.sigma2,
                           dc.crop_rows)
        print(f"wrote {path} ({len(split)} samples)")
    return 0


def _cmd_train(cfg: dict) -> int:
    from .bench import load_split

    prefix = get_str(cfg, "dataset")
    train = load_split(f"{prefix}.train.pnpd")
    val = load_split(f"{prefix}.val.pnpd")
    tc = TrainConfig(epochs=get_int(cfg, "epochs", 150),
                     batch_size=get_int(cfg, "batch_size", 128),
                     lr=get_float(cfg, "lr", 1e-4),
                     lr_floor=get_float(cfg, "lr_floor", 1e-7),
                     lr_patience=get_int(cfg, "lr_patience", 20),
                     seed=get_int(cfg, "seed", 0))
    spec = DenoiserSpec(width=get_int(cfg, "width", 48),
                        n_mid=get_int(cfg, "n_mid", 8),
                        residual=get_bool(cfg, "residual", False))
    den, history = train_denoiser(train, val, tc, spec=spec)
    out = get_str(cfg, "out", "denoiser.pnpw")
    den.save(out)
    print(f"trained {tc.epochs} epochs on {len(train.hbar_clean)} samples; "
          f"best val loss {min(history['val_loss']):.6g}; wrote {out}")
    return 0


def _cmd_run(cfg: dict, task: str) -> int:
    exp = ExperimentConfig.from_dict(cfg, task=task)
    rows = run_experiment(exp)
    print(f"wrote {exp.out} ({len(rows)} rows)")
    return 0


def _cmd_bench(cfg: dict) -> int:
    rows = []
    out = None
    for task in ("ce", "ae", "cf"):
        exp = ExperimentConfig.from_dict(cfg, task=task)
        out = exp.out
        rows.extend(run_experiment(exp, write=False))
    write_rows_csv(out, rows)
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pnp-csi",
        description="Plug-and-play channel reconstruction: dataset "
                    "generation, denoiser training, and task benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("gen-data", "generate and save a synthetic dataset"),
            ("train", "train the denoiser on a saved dataset"),
            ("run-ce", "run the channel estimation sweep"),
            ("run-ae", "run the antenna extrapolation sweep"),
            ("run-cf", "run the compressed feedback sweep"),
            ("bench", "run all three task sweeps into one CSV")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="path to a 'key = value' config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None,
                       help="override the config output path")
    args = parser.parse_args(argv)
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    try:
        if args.command == "gen-data":
            return _cmd_gen_data(cfg)
        if args.command == "train":
            return _cmd_train(cfg)
        if args.command == "bench":
            return _cmd_bench(cfg)
        return _cmd_run(cfg, args.command.removeprefix("run-"))
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

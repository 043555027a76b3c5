"""Command-line entry point: generate / train / evaluate / sweep / ablate.

Configs are flat key=value files with [model], [train], and [data] sections
(plus [sweep] or [ablate] for the grid commands). Exit codes: 0 success,
1 runtime failure, 2 configuration failure.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import MultiSeries, load_csv, save_csv, synth_squat
from .errors import ConfigurationError
from .model import ModelSpec, VARIANTS, build, load_checkpoint, save_checkpoint
from .reports import (
    ExperimentReport,
    write_aggregate_csv,
    write_long_csv,
    write_report,
    write_reports_jsonl,
)
from .training import (
    TrainConfig,
    default_run_id,
    mae,
    predict_batched,
    prepare_dataset,
    rmse,
    run_experiment,
    train,
)

_MODEL_FIELDS = {"variant": str, "n": int, "T": int, "tau": int, "k": int,
                 "N": int, "H": int, "dropout": float, "seed": int}
_TRAIN_FIELDS = {"batch_size": int, "learning_rate": float, "epochs": int,
                 "seed": int, "beta1": float, "beta2": float, "eps_adam": float}


def _parse_section(parser: configparser.ConfigParser, section: str, fields: dict) -> dict:
    out = {}
    if not parser.has_section(section):
        return out
    for key, raw in parser.items(section):
        if key not in fields:
            raise ConfigurationError(f"[{section}] has unknown key {key!r}")
        caster = fields[key]
        try:
            out[key] = caster(raw) if caster is not bool else _parse_bool(raw)
        except ValueError as exc:
            raise ConfigurationError(f"[{section}] {key} = {raw!r}: {exc}") from exc
    return out


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


class RunConfig:
    """Parsed config file: model fields, train fields, and one data source."""

    def __init__(self, path):
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.optionxform = str  # keys like T and N are case-sensitive
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"config file not found: {path}")
        self.model_kwargs = _parse_section(parser, "model", _MODEL_FIELDS)
        self.train_kwargs = _parse_section(parser, "train", _TRAIN_FIELDS)
        data_fields = {"csv": str, "target": str, "synth": bool, "sensors": int,
                       "length": int, "noise": float, "data_seed": int}
        self.data_kwargs = _parse_section(parser, "data", data_fields)
        has_csv = "csv" in self.data_kwargs
        has_synth = self.data_kwargs.get("synth", False)
        if has_csv == bool(has_synth):
            raise ConfigurationError(
                "[data] must specify exactly one source: csv = <path> or synth = true"
            )
        self.sweep_values = self._parse_grid(parser, "sweep")
        self.ablate_values = self._parse_grid(parser, "ablate")

    @staticmethod
    def _parse_grid(parser: configparser.ConfigParser, section: str) -> dict[str, list[str]]:
        if not parser.has_section(section):
            return {}
        return {
            key: [cell.strip() for cell in raw.split(",") if cell.strip()]
            for key, raw in parser.items(section)
        }

    def load_series(self) -> MultiSeries:
        if "csv" in self.data_kwargs:
            return load_csv(self.data_kwargs["csv"],
                            target_column=self.data_kwargs.get("target", "target"))
        return synth_squat(
            n_sensors=self.data_kwargs.get("sensors", 4),
            length=self.data_kwargs.get("length", 20000),
            noise_std=self.data_kwargs.get("noise", 0.05),
            seed=self.data_kwargs.get("data_seed", 1111),
        )

    def model_spec(self, series: MultiSeries, **overrides) -> ModelSpec:
        kwargs = dict(self.model_kwargs)
        kwargs.update(overrides)
        derived_n = series.n_channels - 1
        if kwargs.setdefault("n", derived_n) != derived_n:
            raise ConfigurationError(
                f"[model] n = {kwargs['n']} but the data has {series.n_channels} channels "
                f"(n must be {derived_n})"
            )
        return ModelSpec(**kwargs)

    def train_config(self, **overrides) -> TrainConfig:
        kwargs = dict(self.train_kwargs)
        kwargs.update(overrides)
        return TrainConfig(**kwargs)


def cmd_generate(args) -> int:
    if args.length < 1:
        raise ConfigurationError(f"--length must be >= 1, got {args.length}")
    series = synth_squat(n_sensors=args.sensors, length=args.length,
                         noise_std=args.noise, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(series, out)
    sidecar = Path(str(out) + ".config")
    with open(sidecar, "w", encoding="utf-8") as fh:
        fh.write("[data]\n")
        fh.write(f"csv = {out}\n")
        fh.write(f"target = {series.names[series.target_index]}\n")
        fh.write(f"# synth parameters: sensors={args.sensors} length={args.length} "
                 f"noise={args.noise} seed={args.seed}\n")
    print(f"wrote {out} ({series.n_channels} channels x {series.length} steps) and {sidecar}")
    return 0


def _seed_overrides(config: RunConfig, cli_seed: int | None) -> tuple[dict, dict]:
    model_over, train_over = {}, {}
    if cli_seed is not None:
        model_over["seed"] = cli_seed
        train_over["seed"] = cli_seed
    return model_over, train_over


def cmd_train(args) -> int:
    config = RunConfig(args.config)
    series = config.load_series()
    model_over, train_over = _seed_overrides(config, args.seed)
    spec = config.model_spec(series, **model_over)
    train_cfg = config.train_config(**train_over)
    prepared = prepare_dataset(series, spec.T, spec.tau, train_cfg.seed)
    model = build(spec)
    report = ExperimentReport(
        run_id=default_run_id(spec, train_cfg),
        model_spec=asdict(spec),
        train_config=asdict(train_cfg),
        data_meta=prepared.meta,
    )
    train(model, prepared.train_samples, train_cfg, prepared.test_samples, report)
    target_std = float(prepared.stats.std[series.target_index])
    report.test_rmse_denorm = report.test_rmse * target_std
    report.test_mae_denorm = report.test_mae * target_std
    if args.dump_attention and prepared.test_samples:
        window = prepared.test_samples[0].input
        report.attention = {
            key: value.tolist() for key, value in model.attention_weights(window).items()
        }
    run_dir = Path(args.out) / report.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, run_dir / "checkpoint.ckpt")
    write_report(report, run_dir / "report.json")
    print(f"run {report.run_id}: final train loss {report.train_loss[-1]:.6f}, "
          f"test RMSE={report.test_rmse:.4f} MAE={report.test_mae:.4f}")
    print(f"artifacts in {run_dir}")
    return 0


def cmd_evaluate(args) -> int:
    model = load_checkpoint(args.checkpoint)
    spec = model.spec
    series = load_csv(args.data, target_column=args.target)
    if series.n_channels != spec.channels:
        raise ConfigurationError(
            f"checkpoint expects {spec.channels} channels, data has {series.n_channels}"
        )
    prepared = prepare_dataset(series, spec.T, spec.tau, shuffle_seed=spec.seed)
    if args.split == "train":
        samples = sorted(prepared.train_samples, key=lambda s: s.origin)
    elif args.split == "test":
        samples = prepared.test_samples
    else:
        samples = sorted(prepared.train_samples, key=lambda s: s.origin) + prepared.test_samples
    inputs = np.stack([s.input for s in samples])
    targets = np.stack([s.target for s in samples])
    preds = predict_batched(model, inputs)
    split_rmse = rmse(preds, targets)
    split_mae = mae(preds, targets)
    print(f"RMSE={split_rmse:.4f} MAE={split_mae:.4f}")
    report = ExperimentReport(
        run_id=f"evaluate_{args.split}_{default_run_id(spec, TrainConfig(seed=spec.seed))}",
        model_spec=asdict(spec),
        train_config={"seed": spec.seed},
        data_meta={"source": str(args.data), "split": args.split, "windows": len(samples)},
        test_rmse=split_rmse,
        test_mae=split_mae,
    )
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(report, out_dir / f"evaluate_{args.split}.json")
    return 0


_GRID_MODEL_KEYS = {"variant", "T", "tau", "k", "N", "H", "dropout"}
_GRID_TRAIN_KEYS = {"batch_size", "learning_rate", "epochs"}


def _build_grid(config: RunConfig, values: dict[str, list[str]], series: MultiSeries,
                model_over: dict, train_over: dict) -> list[tuple[ModelSpec, TrainConfig]]:
    if not values or not all(values.values()):
        raise ConfigurationError("grid section is missing or empty")
    axes: list[tuple[str, list[str]]] = list(values.items())
    cells: list[dict[str, str]] = [{}]
    for key, options in axes:
        cells = [dict(cell, **{key: option}) for cell in cells for option in options]
    grid = []
    for cell in cells:
        m_over, t_over = dict(model_over), dict(train_over)
        for key, raw in cell.items():
            if key == "seeds":
                m_over["seed"] = int(raw)
                t_over["seed"] = int(raw)
            elif key in _GRID_MODEL_KEYS:
                caster = _MODEL_FIELDS[key]
                m_over[key] = caster(raw)
            elif key in _GRID_TRAIN_KEYS:
                caster = _TRAIN_FIELDS[key]
                t_over[key] = caster(raw)
            else:
                raise ConfigurationError(f"grid key {key!r} is not sweepable")
        grid.append((config.model_spec(series, **m_over), config.train_config(**t_over)))
    return grid


def _run_grid(args, values_attr: str) -> int:
    config = RunConfig(args.config)
    series = config.load_series()
    model_over, train_over = _seed_overrides(config, args.seed)
    values = getattr(config, values_attr)
    if values_attr == "ablate_values":
        values = dict(values)
        values.setdefault("variant", list(VARIANTS))
    grid = _build_grid(config, values, series, model_over, train_over)
    reports = run_experiment(grid, series, jobs=args.jobs, dump_attention=args.dump_attention)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for report in reports:
        run_dir = out / report.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        write_report(report, run_dir / "report.json")
    write_reports_jsonl(reports, out / "reports.jsonl")
    write_aggregate_csv(reports, out / "aggregate.csv")
    write_long_csv(reports, out / "long.csv")
    for report in reports:
        status = f"ERROR: {report.error.splitlines()[0]}" if report.error else (
            f"test RMSE={report.test_rmse:.4f} MAE={report.test_mae:.4f}")
        print(f"{report.run_id}: {status}")
    print(f"{len(reports)} runs -> {out}/aggregate.csv")
    return 0


def cmd_sweep(args) -> int:
    return _run_grid(args, "sweep_values")


def cmd_ablate(args) -> int:
    return _run_grid(args, "ablate_values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pstatcn",
        description="Train and evaluate parallel spatio-temporal attention TCN forecasters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic sensor CSV")
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.add_argument("--sensors", type=int, default=4)
    gen.add_argument("--length", type=int, default=20000)
    gen.add_argument("--noise", type=float, default=0.05)
    gen.add_argument("--seed", type=int, default=1111)
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", help="train one model from a config file")
    tr.add_argument("--config", required=True)
    tr.add_argument("--out", required=True, help="output directory")
    tr.add_argument("--seed", type=int, default=None, help="override model and train seeds")
    tr.add_argument("--dump-attention", action="store_true",
                    help="store one test window's attention weights in the report")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="evaluate a checkpoint on a CSV")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True, help="CSV path")
    ev.add_argument("--target", default="target", help="target column name")
    ev.add_argument("--split", choices=("train", "test", "all"), default="test")
    ev.add_argument("--out", default=None, help="report directory (default: beside checkpoint)")
    ev.set_defaults(func=cmd_evaluate)

    for name, func in (("sweep", cmd_sweep), ("ablate", cmd_ablate)):
        sp = sub.add_parser(name, help=f"run the {name} grid from a config file")
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--dump-attention", action="store_true")
        sp.set_defaults(func=func)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure contract
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

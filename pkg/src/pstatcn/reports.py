"""Per-run experiment reports and their serialized forms.

A report is one JSON object per run. All wall-clock measurements live under
the "timing" key so deterministic content can be compared or hashed by
dropping that single key. The line-delimited report file holds one run per
line; the long-format CSV (run_id, metric, step, value) is the plot-ready
export and carries only deterministic values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class ExperimentReport:
    run_id: str
    model_spec: dict
    train_config: dict
    data_meta: dict = field(default_factory=dict)
    train_loss: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    train_rmse: float | None = None
    train_mae: float | None = None
    test_rmse: float | None = None
    test_mae: float | None = None
    test_rmse_denorm: float | None = None
    test_mae_denorm: float | None = None
    attention: dict | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        out = {
            "run_id": self.run_id,
            "model_spec": self.model_spec,
            "train_config": self.train_config,
            "data_meta": self.data_meta,
            "train_loss": self.train_loss,
            "train_rmse": self.train_rmse,
            "train_mae": self.train_mae,
            "test_rmse": self.test_rmse,
            "test_mae": self.test_mae,
            "test_rmse_denorm": self.test_rmse_denorm,
            "test_mae_denorm": self.test_mae_denorm,
            "timing": {"epoch_seconds": self.epoch_seconds},
            "error": self.error,
        }
        if self.attention is not None:
            out["attention"] = self.attention
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentReport":
        return cls(
            run_id=raw["run_id"],
            model_spec=raw["model_spec"],
            train_config=raw["train_config"],
            data_meta=raw.get("data_meta", {}),
            train_loss=raw.get("train_loss", []),
            epoch_seconds=raw.get("timing", {}).get("epoch_seconds", []),
            train_rmse=raw.get("train_rmse"),
            train_mae=raw.get("train_mae"),
            test_rmse=raw.get("test_rmse"),
            test_mae=raw.get("test_mae"),
            test_rmse_denorm=raw.get("test_rmse_denorm"),
            test_mae_denorm=raw.get("test_mae_denorm"),
            attention=raw.get("attention"),
            error=raw.get("error"),
        )


def deterministic_content(report_dict: dict) -> dict:
    """The report minus its timing section (the hashable content)."""
    return {k: v for k, v in report_dict.items() if k != "timing"}


def write_report(report: ExperimentReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")


def read_report(path) -> ExperimentReport:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentReport.from_dict(json.loads(fh.read()))


def write_reports_jsonl(reports: list[ExperimentReport], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")


def write_aggregate_csv(reports: list[ExperimentReport], path) -> None:
    """One summary row per run (no timing so reruns are byte-identical)."""
    columns = ["run_id", "variant", "T", "tau", "k", "N", "H", "seed", "epochs",
               "final_train_loss", "test_rmse", "test_mae", "error"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for r in reports:
            spec, cfg = r.model_spec, r.train_config
            row = [
                r.run_id,
                str(spec.get("variant")),
                str(spec.get("T")),
                str(spec.get("tau")),
                str(spec.get("k")),
                str(spec.get("N")),
                str(spec.get("H")),
                str(cfg.get("seed")),
                str(cfg.get("epochs")),
                _fmt(r.train_loss[-1] if r.train_loss else None),
                _fmt(r.test_rmse),
                _fmt(r.test_mae),
                r.error.replace(",", ";").replace("\n", " ") if r.error else "",
            ]
            fh.write(",".join(row) + "\n")


def write_long_csv(reports: list[ExperimentReport], path) -> None:
    """Plot-ready long format: run_id, metric, step, value."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("run_id,metric,step,value\n")
        for r in reports:
            for step, loss in enumerate(r.train_loss):
                fh.write(f"{r.run_id},train_loss,{step},{_fmt(loss)}\n")
            for metric in ("train_rmse", "train_mae", "test_rmse", "test_mae",
                           "test_rmse_denorm", "test_mae_denorm"):
                value = getattr(r, metric)
                if value is not None:
                    fh.write(f"{r.run_id},{metric},{len(r.train_loss)},{_fmt(value)}\n")


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))

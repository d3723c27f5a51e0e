"""Corruption-robustness evaluation: error rates per corruption and severity.

Every prediction lands in a flat log of records; the report (clean error
rate, per-(kind, severity) cells, per-kind means, and the overall mean over
kinds) is a pure recomputation from that log, so aggregates can always be
audited from the raw predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corruption import ALL_KINDS, CorruptionSpec, apply_corruption, subseed
from .data import derive_seed
from .sampling import SampleSpec
from .train import predict

CLEAN = "clean"


@dataclass(frozen=True)
class PredictionRecord:
    cloud_index: int
    kind: str  # "clean" or a corruption kind
    severity: int  # 0 for clean
    eval_seed: int
    label: int
    predicted: int


@dataclass(frozen=True)
class EvalReport:
    er_clean: float
    per_cell: dict  # (kind, severity) -> error rate
    per_kind: dict  # kind -> mean over its severities
    er_cor: float

    def to_dict(self) -> dict:
        corruptions = {}
        for kind in sorted(self.per_kind):
            severities = {
                str(s): self.per_cell[(kind, s)]
                for (k, s) in sorted(self.per_cell)
                if k == kind
            }
            corruptions[kind] = {"severities": severities, "er": self.per_kind[kind]}
        return {
            "er_clean": self.er_clean,
            "corruptions": corruptions,
            "er_cor": self.er_cor,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def report_from_log(records) -> EvalReport:
    """Aggregate a prediction log into the error-rate report.

    The per-kind value is the arithmetic mean of that kind's severity
    cells; the overall corruption value is the arithmetic mean over kinds.
    """
    by_cell = {}
    for rec in records:
        key = (rec.kind, rec.severity)
        by_cell.setdefault(key, []).append(float(rec.predicted != rec.label))

    clean = by_cell.pop((CLEAN, 0), None)
    er_clean = float(np.mean(clean)) if clean else float("nan")

    per_cell = {key: float(np.mean(v)) for key, v in by_cell.items()}
    kinds = sorted({kind for kind, _ in per_cell})
    per_kind = {}
    for kind in kinds:
        cells = [per_cell[key] for key in per_cell if key[0] == kind]
        per_kind[kind] = float(np.mean(cells))
    er_cor = float(np.mean([per_kind[k] for k in kinds])) if kinds else float("nan")
    return EvalReport(er_clean, per_cell, per_kind, er_cor)


def evaluate(
    params,
    dataset,
    sampler: SampleSpec | None = None,
    kinds=ALL_KINDS,
    severities=(1, 2, 3, 4, 5),
    eval_seeds=(0,),
    corruption_seed: int = 0,
):
    """Error rates of a trained model on clean and corrupted copies of a set.

    With a stochastic sampler each cloud is predicted once per eval seed and
    the 0/1 errors are averaged. Corrupted inputs derive deterministic
    per-(cloud, kind, severity) substreams from ``corruption_seed``.
    Returns (EvalReport, prediction log).
    """
    records = []
    for i, cloud in enumerate(dataset):
        variants = [(CLEAN, 0, cloud)]
        for kind in kinds:
            master = derive_seed(corruption_seed, "cloud", i)
            for severity in severities:
                spec = CorruptionSpec(kind, severity, subseed(master, kind, severity))
                variants.append((kind, severity, apply_corruption(cloud, spec)))
        for kind, severity, variant in variants:
            for seed in eval_seeds:
                rng = np.random.default_rng(
                    derive_seed(seed, "pred", i, kind, severity)
                )
                pred = predict(variant, params, sampler, rng)
                records.append(
                    PredictionRecord(i, kind, severity, seed, cloud.label, pred)
                )
    return report_from_log(records), records


def write_log_csv(records, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["cloud_index", "kind", "severity", "eval_seed", "label", "predicted"]
        )
        for rec in records:
            writer.writerow(
                [rec.cloud_index, rec.kind, rec.severity, rec.eval_seed,
                 rec.label, rec.predicted]
            )


def write_severity_curves_csv(report: EvalReport, path) -> None:
    """Per-severity error-rate rows for external plotting."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "severity", "error_rate"])
        for (kind, severity) in sorted(report.per_cell):
            writer.writerow([kind, severity, report.per_cell[(kind, severity)]])


def write_report_json(report: EvalReport, path) -> None:
    Path(path).write_text(report.to_json() + "\n")

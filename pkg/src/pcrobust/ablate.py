"""Ablation driver: train + evaluate one config per grid cell, emit a table."""

from __future__ import annotations

import csv

from .config import build_train_config
from .corruption import ALL_KINDS
from .evaluate import evaluate
from .train import train

GRID_COLUMNS = ("sampler", "sampler_k", "lambda", "tau", "sem_layers", "seed")


def run_grid(
    train_set,
    test_set,
    configs,
    kinds=ALL_KINDS,
    eval_seeds=(0, 1, 2, 3, 4),
    corruption_seed: int = 0,
):
    """One row per flat config dict: the config's grid columns plus metrics."""
    rows = []
    for cfg in configs:
        tc = build_train_config(cfg)
        result = train(train_set, tc)
        report, _ = evaluate(
            result.params,
            test_set,
            sampler=result.sampler,
            kinds=kinds,
            eval_seeds=eval_seeds if _is_stochastic(result.sampler) else (0,),
            corruption_seed=corruption_seed,
        )
        row = {key: cfg.get(key, "") for key in GRID_COLUMNS}
        row["er_clean"] = report.er_clean
        row["er_cor"] = report.er_cor
        rows.append(row)
    return rows


def _is_stochastic(sampler) -> bool:
    return sampler.variant != "fps"


def write_table_csv(rows, path) -> None:
    columns = list(GRID_COLUMNS) + ["er_clean", "er_cor"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)

"""CSV and JSON interchange: dataset loading, trace export, reports, manifests.

Every numeric file carries a header row naming its columns.  Floats are
written with ``repr``, which round-trips exactly, so rerunning a seeded
command reproduces each output byte for byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bagging import ResampleTrace
from .errors import DataError
from .learners import Dataset
from .studies import AnovaOracle, RatioCurves, SpikeProfile, StudyReport


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_csv(path, response: str | None = None, weight: str | None = None) -> Dataset:
    """Load a regression dataset from a headed CSV file.

    ``response`` names the response column (default: the last column);
    ``weight`` optionally names a per-row weight column.  All remaining
    columns are features.  Missing or non-numeric cells are rejected with
    their row and column coordinates (1-based, header is row 1).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for col, cell in zip(header, row):
                cell = cell.strip()
                if cell == "":
                    raise DataError(f"{path}: missing value at row {lineno}, column {col!r}")
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell {cell!r} at row {lineno}, column {col!r}"
                    ) from None
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")

    response = response if response is not None else header[-1]
    if response not in header:
        raise DataError(f"{path}: response column {response!r} not in header {header}")
    if weight is not None and weight not in header:
        raise DataError(f"{path}: weight column {weight!r} not in header {header}")
    if weight == response:
        raise DataError(f"{path}: weight and response columns must differ")

    matrix = np.asarray(rows, dtype=float)
    y_idx = header.index(response)
    w_idx = header.index(weight) if weight is not None else None
    feat_idx = [j for j in range(len(header)) if j != y_idx and j != w_idx]
    if not feat_idx:
        raise DataError(f"{path}: no feature columns left")
    return Dataset(
        features=matrix[:, feat_idx],
        responses=matrix[:, y_idx],
        weights=matrix[:, w_idx] if w_idx is not None else None,
        feature_names=tuple(header[j] for j in feat_idx),
        response_name=response,
    )


def write_dataset_csv(path, data: Dataset) -> None:
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.p))
    header = list(names) + [data.response_name]
    cols = [data.features[:, j] for j in range(data.p)] + [data.responses]
    if data.weights is not None:
        header.append("weight")
        cols.append(data.weights)
    write_csv(path, header, zip(*cols))


def load_queries(path, data: Dataset) -> np.ndarray:
    """Load query rows whose columns match the dataset's feature columns.

    The query header must contain every feature column of the training data
    (extra columns, including the response, are ignored).
    """
    probe = load_csv(path, response=None)
    names = probe.feature_names + (probe.response_name,)
    matrix = np.column_stack([probe.features, probe.responses])
    want = data.feature_names or tuple(f"x{j + 1}" for j in range(data.p))
    missing = [c for c in want if c not in names]
    if missing:
        raise DataError(f"{path}: query file lacks feature columns {missing}")
    return matrix[:, [names.index(c) for c in want]]


def write_trace(out_dir, trace: ResampleTrace, prefix: str = "trace") -> tuple[Path, Path]:
    """Export a trace as two CSVs: counts (B x n ints) and predictions (B x q)."""
    out_dir = Path(out_dir)
    counts_path = out_dir / f"{prefix}_counts.csv"
    preds_path = out_dir / f"{prefix}_predictions.csv"
    write_csv(
        counts_path,
        [f"count_{i}" for i in range(trace.n)],
        trace.counts,
    )
    write_csv(
        preds_path,
        [f"prediction_q{k}" for k in range(trace.q)],
        trace.predictions,
    )
    return counts_path, preds_path


def study_report_rows(report: StudyReport):
    header = ["generator", "estimator", "metric", "value", "half_width_95",
              "n", "p", "B", "m_sub", "n_test", "n_reps"]
    rows = []
    for name in report.estimator_names:
        for metric in ("bias", "variance", "mse"):
            value, hw = report.cells[(name, metric)]
            rows.append([
                report.generator, name, metric, value, hw,
                report.n, report.p, report.B, report.m_sub,
                report.n_test, report.n_reps,
            ])
    return header, rows


def study_summary(report: StudyReport) -> dict:
    return {
        "generator": report.generator,
        "n": report.n,
        "p": report.p,
        "B": report.B,
        "m_sub": report.m_sub,
        "n_test": report.n_test,
        "n_reps": report.n_reps,
        "estimators": list(report.estimator_names),
        "cells": {
            f"{name}.{metric}": {"value": value, "half_width_95": hw}
            for (name, metric), (value, hw) in report.cells.items()
        },
        "mean_truth": float(report.truth.mean()),
        "degenerate_truth": report.degenerate_truth,
        "truth_mc_inflation": report.truth_mc_inflation,
        "truth_reliable": report.truth_reliable,
        "estimator_mc_bias_fraction": report.estimator_mc_bias_fraction,
        "mean_v_hat": report.mean_v_hat,
    }


def ratio_curve_rows(curves: RatioCurves):
    header = [
        "B", "bias_ij", "bias_j", "var_ij", "var_j",
        "bias_ratio", "var_ratio", "bias_ratio_theory", "var_ratio_theory",
        "se_bias_ij", "se_bias_j",
    ]
    rows = []
    for gi, B in enumerate(curves.B_grid):
        rows.append([
            int(B), curves.bias_ij[gi], curves.bias_j[gi],
            curves.var_ij[gi], curves.var_j[gi],
            curves.bias_ratio[gi], curves.var_ratio[gi],
            curves.bias_ratio_theory, curves.var_ratio_theory[gi],
            curves.se_bias_ij[gi], curves.se_bias_j[gi],
        ])
    return header, rows


def spike_profile_rows(profile: SpikeProfile):
    header = ["x", "mean_estimate", "se_estimate", "truth", "se_truth", "covered_95"]
    covered = profile.covered()
    rows = [
        [profile.grid[k], profile.mean_estimate[k], profile.se_estimate[k],
         profile.truth[k], profile.se_truth[k], bool(covered[k])]
        for k in range(profile.grid.size)
    ]
    return header, rows


def anova_oracle_summary(oracle: AnovaOracle) -> dict:
    return {
        "support": list(oracle.support),
        "probabilities": list(oracle.probabilities),
        "n": oracle.n,
        "learner": oracle.learner_name,
        "interaction_variances": [float(v) for v in oracle.v_terms],
        "total_variance": oracle.total_variance,
        "mean_statistic": oracle.mean_statistic,
        "e_jackknife": oracle.e_jackknife,
        "e_ij": oracle.e_ij,
        "e_avg": oracle.e_avg,
        "jackknife_weighted_sum": oracle.jackknife_weighted_sum,
        "avg_weighted_sum": oracle.avg_weighted_sum,
        "first_order_ratio": oracle.first_order_ratio,
        "decomposition_gap": float(oracle.v_terms.sum() - oracle.total_variance),
    }

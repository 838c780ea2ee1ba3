"""Figure rendering for the report commands.

Each function draws one figure and writes it to a file next to the CSV it
illustrates.  All rendering uses the Agg backend so the CLI works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .studies import AnovaOracle, RatioCurves, SpikeProfile, StudyReport


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_study_report(report: StudyReport, path) -> Path:
    """Bias / variance / MSE cells with 95% half-width error bars."""
    metrics = ("bias", "variance", "mse")
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2), sharex=True)
    xs = np.arange(len(report.estimator_names))
    for ax, metric in zip(axes, metrics):
        vals = [report.cells[(name, metric)][0] for name in report.estimator_names]
        errs = [report.cells[(name, metric)][1] for name in report.estimator_names]
        ax.errorbar(xs, vals, yerr=errs, fmt="o", capsize=4)
        ax.axhline(0.0, color="grey", lw=0.8)
        ax.set_xticks(xs)
        ax.set_xticklabels(report.estimator_names)
        ax.set_title(metric)
    fig.suptitle(
        f"{report.generator}: n={report.n}, p={report.p}, B={report.B}, "
        f"{report.n_reps} training sets"
    )
    return _save(fig, path)


def plot_ratio_curves(curves: RatioCurves, path) -> Path:
    """Empirical vs predicted jackknife/IJ Monte Carlo error ratios."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    B = curves.B_grid
    ax1.plot(B, curves.bias_ratio, "o", label="observed")
    ax1.axhline(curves.bias_ratio_theory, color="C1", label="predicted (e-1)")
    ax1.set_xscale("log")
    ax1.set_xlabel("bootstrap replicates B")
    ax1.set_ylabel("bias ratio  J / IJ")
    ax1.legend()
    ax2.plot(B, curves.var_ratio, "o", label="observed")
    ax2.plot(B, curves.var_ratio_theory, "-", color="C1", label="predicted")
    ax2.set_xscale("log")
    ax2.set_xlabel("bootstrap replicates B")
    ax2.set_ylabel("variance ratio  J / IJ")
    ax2.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_spike_profile(profile: SpikeProfile, path) -> Path:
    """Mean variance estimate with bands vs empirical truth over the grid."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    band = 1.96 * profile.se_estimate
    ax.plot(profile.grid, profile.truth, color="C0", label="variance across trainings")
    ax.plot(profile.grid, profile.mean_estimate, color="C1", label="mean estimate")
    ax.fill_between(
        profile.grid,
        profile.mean_estimate - band,
        profile.mean_estimate + band,
        color="C1",
        alpha=0.25,
        lw=0,
    )
    for x in profile.jump_locations:
        ax.axvline(x, color="grey", lw=0.8, ls=":")
    ax.set_xlabel("query point x")
    ax.set_ylabel("variance of bagged prediction")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_anova_terms(oracle: AnovaOracle, path) -> Path:
    """Interaction-order variance terms with the estimator expectations."""
    fig, ax = plt.subplots(figsize=(6, 3.8))
    ks = np.arange(1, oracle.n + 1)
    ax.bar(ks, oracle.v_terms, width=0.6, label="order-k variance")
    for value, label, color in (
        (oracle.total_variance, "total variance", "C0"),
        (oracle.e_jackknife, "E[jackknife]", "C1"),
        (oracle.e_ij, "E[IJ]", "C2"),
        (oracle.e_avg, "E[average]", "C3"),
    ):
        ax.axhline(value, color=color, lw=1.0, ls="--", label=label)
    ax.set_xticks(ks)
    ax.set_xlabel("interaction order k")
    ax.set_ylabel("variance")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_predictions(ids, predictions, se, path, z: float = 1.96) -> Path:
    """Point predictions with z * SE error bars, by query id."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    xs = np.arange(len(ids))
    ax.errorbar(xs, predictions, yerr=z * np.asarray(se), fmt="o", capsize=3)
    ax.set_xticks(xs)
    ax.set_xticklabels([str(i) for i in ids], rotation=90, fontsize=7)
    ax.set_xlabel("query")
    ax.set_ylabel("prediction")
    fig.tight_layout()
    return _save(fig, path)

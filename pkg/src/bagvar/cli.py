"""Command-line interface.

Subcommands
-----------
train         bag a learner on a CSV dataset, export the trace and a manifest
predict       per-query predictions with standard errors, written as CSV
simulate      bias/variance/MSE study of the estimators on a generator
mc-ratio      Monte Carlo error ratios of jackknife vs IJ as a function of B
spike         variance profile of a bagged tree on the four-jump step signal
anova-oracle  exhaustive interaction decomposition on a tiny discrete problem

Flags mirror the run configuration; ``--config FILE`` supplies the same
settings as a JSON object (explicit flags win).  ``BAGVAR_JOBS`` overrides
the worker count for replicate fitting; it never changes any output.
Exit codes: 0 success, 2 config error, 3 data error, 4 estimation error,
5 capacity error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bagging import bag_predict, oob_error
from .errors import BagvarError, ConfigError
from .estimators import (
    METHODS,
    averaged_estimator,
    bootstrap_base_variance,
    ij_unbiased,
    ij_variance,
    jackknife_unbiased,
    jackknife_variance,
    tree_decomposition,
)
from .generators import GENERATOR_NAMES, GeneratorSpec, generate, sample_features
from .learners import LearnerSpec
from .resampling import ResamplePlan, stream_rng
from .studies import (
    anova_oracle,
    run_mc_ratio_experiment,
    run_spike_study,
    run_table_study,
)
from . import io as bio

_ORACLE_STATS = ("mean", "mean-squared", "max")


@dataclass
class RunConfig:
    """Validated settings of one CLI invocation."""

    command: str
    data: str | None = None
    response: str | None = None
    weight: str | None = None
    queries: str | None = None
    generator: str | None = None
    n: int | None = None
    p: int | None = None
    noise_sd: float | None = None
    learner: str = "tree"
    mtry: int | None = None
    min_leaf: int = 1
    max_leaves: int | None = None
    d_max: int = 6
    B: int = 1000
    m_sub: int | None = None
    seed: int = 0
    estimators: tuple[str, ...] | None = None
    z_quantile: float | None = None
    out_dir: str = "."
    reps: int = 100
    n_test: int = 50
    draws: int = 100
    B_ref: int = 50000
    B_grid: tuple[int, ...] = (25, 50, 100, 250, 500)
    grid_size: int = 101
    support: tuple[float, ...] = (0.0, 1.0)
    probs: tuple[float, ...] = (0.5, 0.5)
    learner_stat: str = "mean-squared"
    jobs: int = 1
    plots: bool = True

    def __post_init__(self):
        if self.command not in ("train", "predict", "simulate", "mc-ratio", "spike", "anova-oracle"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.B < 2:
            raise ConfigError(f"B must be >= 2, got {self.B}")
        if self.estimators is not None:
            if not self.estimators:
                raise ConfigError("estimator selection must be non-empty")
            for name in self.estimators:
                if name not in METHODS:
                    raise ConfigError(f"unknown estimator {name!r}; choose from {METHODS}")
        if self.learner not in ("tree", "poly", "mean"):
            raise ConfigError(f"unknown learner {self.learner!r}")
        if self.learner_stat not in _ORACLE_STATS:
            raise ConfigError(f"unknown oracle statistic {self.learner_stat!r}")

    def learner_spec(self) -> LearnerSpec:
        if self.learner == "tree":
            return LearnerSpec(
                kind="tree", mtry=self.mtry, min_leaf=self.min_leaf,
                max_leaves=self.max_leaves,
            )
        if self.learner == "poly":
            return LearnerSpec(kind="poly", d_max=self.d_max)
        return LearnerSpec(kind="mean")

    def generator_spec(self) -> GeneratorSpec:
        if self.generator is None:
            raise ConfigError("this command needs --generator")
        if self.n is None:
            raise ConfigError("this command needs --n (training-set size)")
        return GeneratorSpec(
            name=self.generator, n=self.n, p=self.p, noise_sd=self.noise_sd,
            seed=self.seed,
        )


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bagvar",
        description="Standard errors for bagged ensembles and random forests.",
    )
    parser.add_argument("--version", action="version", version=f"bagvar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, data=False, gen=False, plan=True, learner=True, outputs="dir"):
        p.add_argument("--config", help="JSON file with these settings (flags win)")
        if data:
            p.add_argument("--data", help="training CSV (header row required)")
            p.add_argument("--response", help="response column (default: last)")
            p.add_argument("--weight", help="weight column (optional)")
        if gen:
            p.add_argument("--generator", choices=GENERATOR_NAMES)
            p.add_argument("--n", type=int, help="training-set size")
            p.add_argument("--p", type=int, help="feature count override")
            p.add_argument("--noise-sd", type=float, dest="noise_sd")
        if plan:
            p.add_argument("-B", "--B", type=int, dest="B", help="bootstrap replicates")
            p.add_argument("--m-sub", type=int, dest="m_sub", help="resample size (sub-bagging)")
            p.add_argument("--seed", type=int, help="reproducibility seed")
        if learner:
            p.add_argument("--learner", choices=("tree", "poly", "mean"))
            p.add_argument("--mtry", type=int, help="features per split (default: p)")
            p.add_argument("--min-leaf", type=int, dest="min_leaf")
            p.add_argument("--max-leaves", type=int, dest="max_leaves")
            p.add_argument("--d-max", type=int, dest="d_max", help="polynomial degree cap")
        if outputs == "dir":
            p.add_argument("--out-dir", dest="out_dir", help="output directory")
        p.add_argument("--no-plots", action="store_false", dest="plots", default=None,
                       help="skip figure rendering")

    p = sub.add_parser("train", help="bag a learner and export its trace")
    add_common(p, data=True)
    p.add_argument("--jobs", type=int, help="parallel workers for replicate fits")

    p = sub.add_parser("predict", help="predictions with standard errors")
    add_common(p, data=True)
    p.add_argument("--queries", help="CSV of query rows (feature columns)")
    p.add_argument("--estimators", type=str,
                   help="comma list from IJ,J,IJ_U,J_U,AVG (default IJ_U)")
    p.add_argument("--z-quantile", type=float, dest="z_quantile",
                   help="emit lo/hi interval columns at this normal quantile")
    p.add_argument("--jobs", type=int, help="parallel workers for replicate fits")

    p = sub.add_parser("simulate", help="bias/variance/MSE table study")
    add_common(p, gen=True)
    p.add_argument("--reps", type=int, help="training sets to draw")
    p.add_argument("--n-test", type=int, dest="n_test", help="fixed test-set size")
    p.add_argument("--estimators", type=str, help="comma list of estimators")

    p = sub.add_parser("mc-ratio", help="jackknife vs IJ Monte Carlo error ratios")
    add_common(p, gen=True)
    p.add_argument("--draws", type=int, help="independent traces per grid point")
    p.add_argument("--B-ref", type=int, dest="B_ref", help="reference replicate count")
    p.add_argument("--B-grid", type=_int_list, dest="B_grid", help="comma list of B values")

    p = sub.add_parser("spike", help="variance profile on the step signal")
    add_common(p, gen=False)
    p.add_argument("--n", type=int, help="training-set size")
    p.add_argument("--reps", type=int, help="repeated trainings")
    p.add_argument("--grid-size", type=int, dest="grid_size", help="query-grid resolution")

    p = sub.add_parser("anova-oracle", help="exact interaction decomposition, tiny n")
    add_common(p, plan=False, learner=False)
    p.add_argument("--support", type=_float_list, help="comma list of support values")
    p.add_argument("--probs", type=_float_list, help="comma list of probabilities")
    p.add_argument("--n", type=int, help="dataset size (<= 5)")
    p.add_argument("--learner-stat", dest="learner_stat", choices=_ORACLE_STATS)
    return parser


def parse_config(argv) -> RunConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    raw = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                from_file = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config}: {exc}") from None
        if not isinstance(from_file, dict):
            raise ConfigError(f"config file {args.config} must hold a JSON object")
        for key, value in from_file.items():
            if key == "command":
                continue
            if isinstance(value, list):
                value = tuple(value)
            raw.setdefault(key, value)
    if isinstance(raw.get("estimators"), str):
        raw["estimators"] = tuple(tok.strip() for tok in raw["estimators"].split(",") if tok.strip())
    env_jobs = os.environ.get("BAGVAR_JOBS")
    if env_jobs:
        try:
            raw["jobs"] = int(env_jobs)
        except ValueError:
            raise ConfigError(f"BAGVAR_JOBS must be an integer, got {env_jobs!r}") from None
    allowed = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**raw)


def _require_data(config: RunConfig):
    if not config.data:
        raise ConfigError("this command needs --data")
    data = bio.load_csv(config.data, response=config.response, weight=config.weight)
    if data.weights is not None:
        raise ConfigError(
            "bagging resamples unweighted rows; drop --weight for train/predict"
        )
    return data


def _plan_for(config: RunConfig, n: int) -> ResamplePlan:
    return ResamplePlan(n=n, B=config.B, m_sub=config.m_sub, seed=config.seed)


def _manifest(config: RunConfig, plan: ResamplePlan, learner: LearnerSpec, extra: dict) -> dict:
    payload = {
        "package_version": __version__,
        "command": config.command,
        "plan": {"n": plan.n, "B": plan.B, "m_sub": plan.resample_size, "seed": plan.seed},
        "learner": learner.describe(),
    }
    payload.update(extra)
    return payload


def _cmd_train(config: RunConfig) -> None:
    data = _require_data(config)
    learner = config.learner_spec()
    plan = _plan_for(config, data.n)
    trace, bagged = bag_predict(data, learner, plan, data.features, n_jobs=config.jobs)
    out = Path(config.out_dir)
    counts_path, preds_path = bio.write_trace(out, trace)
    manifest = _manifest(config, plan, learner, {
        "data": str(config.data),
        "response": data.response_name,
        "oob_error": oob_error(trace, data),
        "outputs": {
            "trace_counts": counts_path.name,
            "trace_predictions": preds_path.name,
        },
    })
    bio.write_json(out / "manifest.json", manifest)
    print(f"trained: B={plan.B} replicates on n={data.n} rows; "
          f"oob_error={manifest['oob_error']:.6g}")
    print(f"wrote {counts_path}, {preds_path}, {out / 'manifest.json'}")


_ESTIMATE_FNS = {
    "IJ": ij_variance,
    "J": jackknife_variance,
    "IJ_U": ij_unbiased,
    "J_U": jackknife_unbiased,
}


def _cmd_predict(config: RunConfig) -> None:
    data = _require_data(config)
    if not config.queries:
        raise ConfigError("predict needs --queries")
    Q = bio.load_queries(config.queries, data)
    learner = config.learner_spec()
    plan = _plan_for(config, data.n)
    trace, bagged = bag_predict(data, learner, plan, Q, n_jobs=config.jobs)

    names = config.estimators if config.estimators is not None else ("IJ_U",)
    header = ["query_id", "prediction"]
    header += [f"se_{m}" for m in names]
    header += [f"var_raw_{m}" for m in names]
    header += [f"truncated_{m}" for m in names]
    header += ["v_hat", "rho_hat", "B"]
    if config.z_quantile is not None:
        for m in names:
            header += [f"lo_{m}", f"hi_{m}"]

    rows = []
    for k in range(Q.shape[0]):
        ests = {}
        for m in names:
            if m == "AVG":
                ests[m] = averaged_estimator(ij_unbiased(trace, k), jackknife_unbiased(trace, k))
            else:
                ests[m] = _ESTIMATE_FNS[m](trace, k)
        v_hat = bootstrap_base_variance(trace, k)
        lead = ests[names[0]]
        rho = tree_decomposition(trace, k, lead).rho_hat if v_hat > 0 else float("nan")
        row = [k, bagged[k]]
        row += [float(np.sqrt(ests[m].value)) for m in names]
        row += [ests[m].raw_value for m in names]
        row += [ests[m].truncated for m in names]
        row += [v_hat, rho, trace.B]
        if config.z_quantile is not None:
            z = config.z_quantile
            for m in names:
                se = float(np.sqrt(ests[m].value))
                row += [bagged[k] - z * se, bagged[k] + z * se]
        rows.append(row)

    out = Path(config.out_dir)
    pred_path = out / "predictions.csv"
    bio.write_csv(pred_path, header, rows)
    print(f"wrote {pred_path} ({Q.shape[0]} queries, estimators: {', '.join(names)})")
    if config.plots:
        from .plots import plot_predictions

        # Column 2 is the standard error of the first selected estimator.
        fig_path = plot_predictions(
            [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
            out / "predictions.png",
            z=config.z_quantile if config.z_quantile is not None else 1.96,
        )
        print(f"wrote {fig_path}")


def _cmd_simulate(config: RunConfig) -> None:
    gen = config.generator_spec()
    learner = config.learner_spec()
    plan = _plan_for(config, gen.n)
    from .studies import standard_estimators

    names = config.estimators if config.estimators is not None else ("IJ_U", "J_U", "AVG")
    report = run_table_study(
        gen, learner, plan, n_test=config.n_test, n_reps=config.reps,
        estimators=standard_estimators(names),
    )
    out = Path(config.out_dir)
    header, rows = bio.study_report_rows(report)
    bio.write_csv(out / "study_report.csv", header, rows)
    bio.write_json(out / "study_summary.json", bio.study_summary(report))
    print(f"study: {gen.name} n={gen.n} p={gen.n_features} B={plan.B} reps={config.reps}")
    for name in report.estimator_names:
        b, bh = report.cells[(name, "bias")]
        v, vh = report.cells[(name, "variance")]
        m, mh = report.cells[(name, "mse")]
        print(f"  {name:5s} bias {b:+.4g} (±{bh:.2g})  var {v:.4g} (±{vh:.2g})  "
              f"mse {m:.4g} (±{mh:.2g})")
    if report.degenerate_truth:
        print("  warning: ground truth is degenerate (zero variance everywhere)")
    print(f"wrote {out / 'study_report.csv'}, {out / 'study_summary.json'}")
    if config.plots:
        from .plots import plot_study_report

        print(f"wrote {plot_study_report(report, out / 'study_report.png')}")


def _cmd_mc_ratio(config: RunConfig) -> None:
    if config.data:
        data = _require_data(config)
        query = data.features[:1]
    else:
        gen = config.generator_spec()
        data = generate(gen)
        query = sample_features(gen, 1, stream_rng(config.seed, 9001))
    learner = config.learner_spec()
    curves = run_mc_ratio_experiment(
        data, learner, config.B_grid, n_draws=config.draws, query=query,
        B_ref=config.B_ref, seed=config.seed,
    )
    out = Path(config.out_dir)
    header, rows = bio.ratio_curve_rows(curves)
    bio.write_csv(out / "ratio_curves.csv", header, rows)
    bio.write_json(out / "ratio_summary.json", {
        "n": curves.n,
        "B_grid": [int(b) for b in curves.B_grid],
        "n_draws": curves.n_draws,
        "B_ref": curves.B_ref,
        "v_hat_ref": curves.v_hat_ref,
        "ij_ref": curves.ij_ref,
        "j_ref": curves.j_ref,
        "bias_ratio_theory": curves.bias_ratio_theory,
    })
    for gi, B in enumerate(curves.B_grid):
        print(f"  B={int(B):5d}  bias ratio {curves.bias_ratio[gi]:.3f} "
              f"(predicted {curves.bias_ratio_theory:.3f})  "
              f"var ratio {curves.var_ratio[gi]:.3f} "
              f"(predicted {curves.var_ratio_theory[gi]:.3f})")
    print(f"wrote {out / 'ratio_curves.csv'}, {out / 'ratio_summary.json'}")
    if config.plots:
        from .plots import plot_ratio_curves

        print(f"wrote {plot_ratio_curves(curves, out / 'ratio_curves.png')}")


def _cmd_spike(config: RunConfig) -> None:
    if config.n is None:
        raise ConfigError("spike needs --n (training-set size)")
    plan = ResamplePlan(n=config.n, B=config.B, m_sub=config.m_sub, seed=config.seed)
    # Default learner is the study's 5-leaf tree; explicit flags override it.
    customized = (
        config.learner != "tree"
        or config.mtry is not None
        or config.max_leaves is not None
        or config.min_leaf != 1
    )
    profile = run_spike_study(
        plan,
        n_reps=config.reps,
        learner=config.learner_spec() if customized else None,
        grid_size=config.grid_size,
    )
    out = Path(config.out_dir)
    header, rows = bio.spike_profile_rows(profile)
    bio.write_csv(out / "spike_profile.csv", header, rows)
    from .studies import local_maxima

    peaks = local_maxima(profile.mean_estimate)
    top = peaks[np.argsort(profile.mean_estimate[peaks])[::-1][:4]]
    bio.write_json(out / "spike_summary.json", {
        "n": profile.n,
        "B": profile.B,
        "n_reps": profile.n_reps,
        "jump_locations": list(profile.jump_locations),
        "top_peaks": sorted(float(profile.grid[k]) for k in top),
        "coverage_fraction": float(profile.covered().mean()),
    })
    print(f"spike study: n={profile.n} B={profile.B} reps={profile.n_reps}")
    print(f"  peaks near {sorted(round(float(profile.grid[k]), 3) for k in top)}; "
          f"jumps at {list(profile.jump_locations)}")
    print(f"wrote {out / 'spike_profile.csv'}, {out / 'spike_summary.json'}")
    if config.plots:
        from .plots import plot_spike_profile

        print(f"wrote {plot_spike_profile(profile, out / 'spike_profile.png')}")


def _oracle_stat(name: str):
    if name == "mean":
        return lambda y, w: float(np.average(y, weights=w))
    if name == "mean-squared":
        return lambda y, w: float(np.average(y, weights=w)) ** 2
    return lambda y, w: float(y[w > 0].max())


def _cmd_anova(config: RunConfig) -> None:
    if config.n is None:
        raise ConfigError("anova-oracle needs --n (dataset size <= 5)")
    oracle = anova_oracle(
        config.support, config.probs, config.n,
        _oracle_stat(config.learner_stat), learner_name=config.learner_stat,
    )
    out = Path(config.out_dir)
    bio.write_json(out / "anova_oracle.json", bio.anova_oracle_summary(oracle))
    bio.write_csv(
        out / "anova_terms.csv",
        ["order", "variance"],
        [(k + 1, v) for k, v in enumerate(oracle.v_terms)],
    )
    print(f"anova oracle: n={oracle.n}, learner={oracle.learner_name}")
    print(f"  total variance {oracle.total_variance:.6g} = sum of terms "
          f"{oracle.v_terms.sum():.6g}")
    print(f"  E[jackknife] {oracle.e_jackknife:.6g}  E[IJ] {oracle.e_ij:.6g}  "
          f"E[average] {oracle.e_avg:.6g}")
    print(f"wrote {out / 'anova_oracle.json'}, {out / 'anova_terms.csv'}")
    if config.plots:
        from .plots import plot_anova_terms

        print(f"wrote {plot_anova_terms(oracle, out / 'anova_terms.png')}")


_COMMANDS = {
    "train": _cmd_train,
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "mc-ratio": _cmd_mc_ratio,
    "spike": _cmd_spike,
    "anova-oracle": _cmd_anova,
}

_ERROR_KINDS = {2: "config", 3: "data", 4: "estimation", 5: "capacity"}


def run(config: RunConfig) -> int:
    """Execute a validated configuration; returns the process exit code."""
    try:
        _COMMANDS[config.command](config)
    except BagvarError as exc:
        kind = _ERROR_KINDS.get(exc.exit_code, "internal")
        print(f"error: {kind}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: config: output path not writable: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    try:
        config = parse_config(argv if argv is not None else sys.argv[1:])
    except BagvarError as exc:
        kind = _ERROR_KINDS.get(exc.exit_code, "internal")
        print(f"error: {kind}: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(config)


if __name__ == "__main__":
    sys.exit(main())

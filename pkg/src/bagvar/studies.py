"""Simulation studies: bias/variance tables, Monte Carlo ratio curves,
variance-spike profiles, and an exhaustive ANOVA oracle for tiny problems.

Every study fixes all of its randomness from the seeds it is given, derives
per-replication child seeds, and aggregates with order-independent
reductions, so repeated runs are identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product
from math import comb
from typing import Callable, Mapping

import numpy as np

from .bagging import ResampleTrace, bag_predict
from .errors import CapacityError, ConfigError, EstimationError
from .estimators import (
    averaged_estimator,
    bootstrap_base_variance,
    ij_unbiased,
    ij_variance,
    jackknife_unbiased,
    jackknife_variance,
    predict_mc_moments,
)
from .generators import STEP_JUMPS, GeneratorSpec, generate, sample_features
from .learners import Dataset, LearnerSpec
from .resampling import ResamplePlan, stream_rng, stream_seed

_Z95 = 1.959963984540054

EstimatorFn = Callable[[ResampleTrace, int], float]


def standard_estimators(names=("IJ_U", "J_U", "AVG")) -> dict[str, EstimatorFn]:
    """Name -> callable map for the built-in estimators (truncated values)."""

    def make(name: str) -> EstimatorFn:
        if name == "IJ":
            return lambda tr, q: ij_variance(tr, q).value
        if name == "J":
            return lambda tr, q: jackknife_variance(tr, q).value
        if name == "IJ_U":
            return lambda tr, q: ij_unbiased(tr, q).value
        if name == "J_U":
            return lambda tr, q: jackknife_unbiased(tr, q).value
        if name == "AVG":
            return lambda tr, q: averaged_estimator(
                ij_unbiased(tr, q), jackknife_unbiased(tr, q)
            ).value
        raise ConfigError(f"unknown estimator {name!r}")

    return {name: make(name) for name in names}


def _mean_hw(values: np.ndarray) -> tuple[float, float]:
    """Mean and 95% sampling half-width over the leading axis."""
    values = np.asarray(values, dtype=float)
    m = float(values.mean())
    if values.size < 2:
        return m, float("nan")
    return m, float(_Z95 * values.std(ddof=1) / np.sqrt(values.size))


@dataclass
class StudyReport:
    """Bias / variance / MSE of variance estimators against a simulated truth.

    Per-test-point arrays are kept alongside the aggregated cells so callers
    can build paired comparisons; ``cells[(estimator, metric)]`` maps to
    ``(mean over test points, 95% half-width)``.
    """

    generator: str
    estimator_names: tuple[str, ...]
    n: int
    p: int
    B: int
    m_sub: int
    n_test: int
    n_reps: int
    truth: np.ndarray
    estimates: dict[str, np.ndarray]
    bias: dict[str, np.ndarray]
    variance: dict[str, np.ndarray]
    mse: dict[str, np.ndarray]
    cells: dict[tuple[str, str], tuple[float, float]]
    degenerate_truth: bool
    truth_mc_inflation: float
    estimator_mc_bias_fraction: float
    mean_v_hat: float

    @property
    def truth_reliable(self) -> bool:
        """Whether the Monte Carlo part of the measured truth is below 5%.

        The ground truth is the across-training variance of the B-replicate
        bagged prediction, which exceeds the B -> infinity variance by about
        v_hat / B; this flags runs where that inflation is material.
        """
        return self.truth_mc_inflation < 0.05


def run_table_study(
    gen: GeneratorSpec,
    learner: LearnerSpec,
    plan: ResamplePlan,
    n_test: int,
    n_reps: int,
    estimators: Mapping[str, EstimatorFn] | None = None,
) -> StudyReport:
    """Repeated-training evaluation of variance estimators on one generator.

    A test set is fixed once; each of ``n_reps`` replications draws a fresh
    training set, bags the learner, and evaluates every estimator at every
    test point.  The ground-truth variance at a test point is the empirical
    variance of the bagged prediction across replications, so each
    estimator's bias, variance, and MSE are measured against the observable
    target.
    """
    if n_reps < 2:
        raise ConfigError(f"run_table_study needs n_reps >= 2, got {n_reps}")
    if n_test < 1:
        raise ConfigError(f"run_table_study needs n_test >= 1, got {n_test}")
    fns = dict(estimators) if estimators is not None else standard_estimators()
    names = tuple(fns)

    X_test = sample_features(gen, n_test, stream_rng(gen.seed, 7001))
    theta = np.empty((n_reps, n_test))
    v_hats = np.empty((n_reps, n_test))
    est = {name: np.empty((n_reps, n_test)) for name in names}
    for r in range(n_reps):
        data = generate(replace(gen, seed=stream_seed(gen.seed, 7002, r)))
        plan_r = replace(plan, seed=stream_seed(plan.seed, 7003, r))
        trace, bagged = bag_predict(data, learner, plan_r, X_test)
        theta[r] = bagged
        for k in range(n_test):
            v_hats[r, k] = bootstrap_base_variance(trace, k)
            for name in names:
                est[name][r, k] = fns[name](trace, k)

    truth = theta.var(axis=0, ddof=1)
    degenerate = bool(np.all(truth <= 0.0))
    # Population (1/n_reps) moments keep the exact identity mse = bias^2 + var.
    bias = {name: est[name].mean(axis=0) - truth for name in names}
    variance = {name: est[name].var(axis=0, ddof=0) for name in names}
    mse = {name: ((est[name] - truth) ** 2).mean(axis=0) for name in names}

    cells: dict[tuple[str, str], tuple[float, float]] = {}
    for name in names:
        cells[(name, "bias")] = _mean_hw(bias[name])
        cells[(name, "variance")] = _mean_hw(variance[name])
        cells[(name, "mse")] = _mean_hw(mse[name])

    mean_truth = float(truth.mean())
    mean_v_hat = float(v_hats.mean())
    inflation = mean_v_hat / plan.B / mean_truth if mean_truth > 0 else float("inf")
    est_bias = plan.resample_size * mean_v_hat / plan.B
    est_fraction = est_bias / mean_truth if mean_truth > 0 else float("inf")

    return StudyReport(
        generator=gen.name,
        estimator_names=names,
        n=gen.n,
        p=gen.n_features,
        B=plan.B,
        m_sub=plan.resample_size,
        n_test=n_test,
        n_reps=n_reps,
        truth=truth,
        estimates=est,
        bias=bias,
        variance=variance,
        mse=mse,
        cells=cells,
        degenerate_truth=degenerate,
        truth_mc_inflation=float(inflation),
        estimator_mc_bias_fraction=float(est_fraction),
        mean_v_hat=mean_v_hat,
    )


@dataclass
class RatioCurves:
    """Empirical vs predicted Monte Carlo error ratios of J to IJ, per B."""

    B_grid: np.ndarray
    n: int
    n_draws: int
    B_ref: int
    v_hat_ref: float
    ij_ref: float
    j_ref: float
    bias_ij: np.ndarray
    bias_j: np.ndarray
    var_ij: np.ndarray
    var_j: np.ndarray
    bias_ratio: np.ndarray
    var_ratio: np.ndarray
    bias_ratio_theory: float
    var_ratio_theory: np.ndarray
    se_bias_ij: np.ndarray
    se_bias_j: np.ndarray


def run_mc_ratio_experiment(
    data: Dataset,
    learner: LearnerSpec,
    B_grid,
    n_draws: int,
    query,
    B_ref: int = 50000,
    seed: int = 0,
) -> RatioCurves:
    """Measure how Monte Carlo bias and variance of the jackknife compare to
    the IJ estimator as a function of B, against the theoretical curves.

    For each B in the grid, ``n_draws`` independent traces are generated on
    the fixed dataset; empirical bias is measured against bias-corrected
    estimates from a single large ``B_ref`` reference trace.
    """
    B_grid = np.asarray(list(B_grid), dtype=int)
    if B_grid.size == 0 or np.any(np.diff(B_grid) <= 0):
        raise ConfigError("B_grid must be strictly ascending and non-empty")
    if n_draws < 50:
        raise ConfigError(f"run_mc_ratio_experiment needs n_draws >= 50, got {n_draws}")

    n = data.n
    ref_plan = ResamplePlan(n=n, B=B_ref, seed=stream_seed(seed, 8001))
    ref_trace, _ = bag_predict(data, learner, ref_plan, query)
    v_hat_ref = bootstrap_base_variance(ref_trace)
    ij_ref = ij_unbiased(ref_trace).value
    j_ref = jackknife_unbiased(ref_trace).value
    if v_hat_ref <= 0 or ij_ref <= 0 or j_ref <= 0:
        raise EstimationError(
            f"reference variance non-positive (v_hat={v_hat_ref}, ij={ij_ref}, j={j_ref})"
        )

    shape = (B_grid.size,)
    bias_ij = np.empty(shape)
    bias_j = np.empty(shape)
    var_ij = np.empty(shape)
    var_j = np.empty(shape)
    se_bias_ij = np.empty(shape)
    se_bias_j = np.empty(shape)
    var_ratio_theory = np.empty(shape)
    for gi, B in enumerate(B_grid):
        draws_ij = np.empty(n_draws)
        draws_j = np.empty(n_draws)
        for d in range(n_draws):
            plan = ResamplePlan(n=n, B=int(B), seed=stream_seed(seed, 8002, gi, d))
            trace, _ = bag_predict(data, learner, plan, query)
            draws_ij[d] = ij_variance(trace).value
            draws_j[d] = jackknife_variance(trace).value
        bias_ij[gi] = draws_ij.mean() - ij_ref
        bias_j[gi] = draws_j.mean() - j_ref
        var_ij[gi] = draws_ij.var(ddof=1)
        var_j[gi] = draws_j.var(ddof=1)
        se_bias_ij[gi] = draws_ij.std(ddof=1) / np.sqrt(n_draws)
        se_bias_j[gi] = draws_j.std(ddof=1) / np.sqrt(n_draws)
        mom_ij = predict_mc_moments("IJ", n, int(B), n, v_hat_ref, ij_ref)
        mom_j = predict_mc_moments("J", n, int(B), n, v_hat_ref, j_ref)
        var_ratio_theory[gi] = mom_j.variance / mom_ij.variance

    return RatioCurves(
        B_grid=B_grid,
        n=n,
        n_draws=n_draws,
        B_ref=B_ref,
        v_hat_ref=v_hat_ref,
        ij_ref=ij_ref,
        j_ref=j_ref,
        bias_ij=bias_ij,
        bias_j=bias_j,
        var_ij=var_ij,
        var_j=var_j,
        bias_ratio=bias_j / bias_ij,
        var_ratio=var_j / var_ij,
        bias_ratio_theory=float(np.e - 1.0),
        var_ratio_theory=var_ratio_theory,
        se_bias_ij=se_bias_ij,
        se_bias_j=se_bias_j,
    )


@dataclass
class SpikeProfile:
    """Mean variance estimate vs empirical truth over a query grid."""

    grid: np.ndarray
    mean_estimate: np.ndarray
    se_estimate: np.ndarray
    truth: np.ndarray
    se_truth: np.ndarray
    jump_locations: tuple[float, ...]
    n: int
    B: int
    n_reps: int

    def covered(self, z: float = _Z95) -> np.ndarray:
        """Grid points where the mean estimate is within z combined standard
        errors of the empirical truth."""
        band = z * np.sqrt(self.se_estimate**2 + self.se_truth**2)
        return np.abs(self.mean_estimate - self.truth) <= band


def run_spike_study(
    plan: ResamplePlan,
    n_reps: int,
    learner: LearnerSpec | None = None,
    grid_size: int = 101,
) -> SpikeProfile:
    """Average the bias-corrected IJ profile of a bagged tree on step data.

    The step signal has four jumps; each jump destabilizes the fitted trees
    nearby, so the sampling variance of the bagged prediction spikes there.
    The profile pairs the mean variance estimate over ``n_reps`` repeated
    trainings with the across-training variance of the bagged prediction.
    """
    if n_reps < 20:
        raise ConfigError(f"run_spike_study needs n_reps >= 20, got {n_reps}")
    if learner is None:
        learner = LearnerSpec(kind="tree", mtry=1, max_leaves=5)
    gen = GeneratorSpec(name="step_function", n=plan.n, seed=stream_seed(plan.seed, 8101))
    grid = np.linspace(0.0, 1.0, grid_size)
    queries = grid[:, None]

    theta = np.empty((n_reps, grid_size))
    est = np.empty((n_reps, grid_size))
    for r in range(n_reps):
        data = generate(replace(gen, seed=stream_seed(plan.seed, 8102, r)))
        plan_r = replace(plan, seed=stream_seed(plan.seed, 8103, r))
        trace, bagged = bag_predict(data, learner, plan_r, queries)
        theta[r] = bagged
        for k in range(grid_size):
            est[r, k] = ij_unbiased(trace, k).value

    truth = theta.var(axis=0, ddof=1)
    return SpikeProfile(
        grid=grid,
        mean_estimate=est.mean(axis=0),
        se_estimate=est.std(axis=0, ddof=1) / np.sqrt(n_reps),
        truth=truth,
        se_truth=truth * np.sqrt(2.0 / (n_reps - 1)),
        jump_locations=STEP_JUMPS,
        n=plan.n,
        B=plan.B,
        n_reps=n_reps,
    )


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of local maxima (boundaries count against their one neighbor)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return np.arange(v.size)
    up = np.empty(v.size, dtype=bool)
    up[0] = True
    up[1:] = v[1:] > v[:-1]
    down = np.empty(v.size, dtype=bool)
    down[-1] = True
    down[:-1] = v[:-1] >= v[1:]
    return np.nonzero(up & down)[0]


ScalarLearner = Callable[[np.ndarray, np.ndarray], float]


@dataclass
class AnovaOracle:
    """Exact interaction decomposition of the variance of an exactly bagged
    statistic on a tiny discrete problem, with exact estimator expectations.

    ``v_terms[k-1]`` is the variance contributed by order-k interactions;
    their sum is the exact sampling variance of the bagged statistic.
    ``e_jackknife`` and ``e_ij`` are the exact expectations of the
    B -> infinity jackknife and IJ variance estimates over the data
    distribution.
    """

    support: tuple[float, ...]
    probabilities: tuple[float, ...]
    n: int
    learner_name: str
    v_terms: np.ndarray
    total_variance: float
    mean_statistic: float
    e_jackknife: float
    e_ij: float
    e_avg: float
    jackknife_weighted_sum: float
    avg_weighted_sum: float
    first_order_ratio: float


def anova_oracle(
    support, probabilities, n: int, learner: ScalarLearner, learner_name: str = "custom"
) -> AnovaOracle:
    """Enumerate a tiny discrete problem exhaustively.

    Every dataset in support^n is visited with its product probability; the
    exactly bagged statistic, the exact limiting jackknife and IJ variance
    estimates, and the full interaction decomposition are all computed by
    enumeration, with no sampling anywhere.
    """
    support = tuple(float(s) for s in support)
    probs = np.asarray(probabilities, dtype=float)
    if len(support) > 3:
        raise CapacityError(f"oracle supports <= 3 support points, got {len(support)}")
    if n > 5:
        raise CapacityError(f"oracle supports n <= 5, got n={n}")
    if n < 2:
        raise ConfigError(f"oracle needs n >= 2, got n={n}")
    if probs.shape != (len(support),) or (probs <= 0).any() or abs(probs.sum() - 1) > 1e-12:
        raise ConfigError("probabilities must be positive and sum to 1")

    from .resampling import enumerate_exact_resamples

    exact = enumerate_exact_resamples(n)
    counts = exact.counts.astype(float)
    r_probs = exact.probabilities
    zero = exact.counts == 0
    p_zero = r_probs @ zero

    s = len(support)
    support_arr = np.asarray(support)
    theta_cache: dict[tuple[int, ...], float] = {}

    def theta_of(idx: tuple[int, ...]) -> float:
        key = tuple(sorted(idx))
        if key not in theta_cache:
            y = support_arr[list(key)]
            t = np.array([learner(y, c) for c in counts])
            theta_cache[key] = float(r_probs @ t)
        return theta_cache[key]

    index_sets = list(product(range(s), repeat=n))
    ds_probs = np.array([float(np.prod(probs[list(idx)])) for idx in index_sets])
    thetas = np.array([theta_of(idx) for idx in index_sets])

    e_j = 0.0
    e_ij = 0.0
    for idx, pi in zip(index_sets, ds_probs):
        y = support_arr[list(idx)]
        t = np.array([learner(y, c) for c in counts])
        theta = float(r_probs @ t)
        dt = t - theta
        covs = (counts - 1.0).T @ (r_probs * dt)
        deltas = ((r_probs * t) @ zero) / p_zero - theta
        e_ij += pi * float(covs @ covs)
        e_j += pi * float((n - 1) / n * (deltas @ deltas))

    mean_stat = float(ds_probs @ thetas)
    total_var = float(ds_probs @ (thetas - mean_stat) ** 2)

    # Conditional-variance ladder: W_k = Var of E[statistic | first k values].
    w = np.empty(n)
    for k in range(1, n + 1):
        cond = np.zeros(s**k)
        cond_p = np.zeros(s**k)
        for j, prefix in enumerate(product(range(s), repeat=k)):
            p_prefix = float(np.prod(probs[list(prefix)]))
            e = 0.0
            for suffix in product(range(s), repeat=n - k):
                e += float(np.prod(probs[list(suffix)])) * theta_of(prefix + suffix)
            cond[j] = e
            cond_p[j] = p_prefix
        w[k - 1] = float(cond_p @ (cond - mean_stat) ** 2)

    sigma2 = np.empty(n)
    for k in range(1, n + 1):
        acc = w[k - 1] - sum(comb(k, j) * sigma2[j - 1] for j in range(1, k))
        if acc < -1e-12:
            raise EstimationError(f"order-{k} interaction variance is negative: {acc}")
        sigma2[k - 1] = max(acc, 0.0)
    v_terms = np.array([comb(n, k) * sigma2[k - 1] for k in range(1, n + 1)])

    weights_avg = np.array([(k + (1 if k == 1 else 0)) / 2 for k in range(1, n + 1)])
    return AnovaOracle(
        support=support,
        probabilities=tuple(float(p) for p in probs),
        n=n,
        learner_name=learner_name,
        v_terms=v_terms,
        total_variance=total_var,
        mean_statistic=mean_stat,
        e_jackknife=e_j,
        e_ij=e_ij,
        e_avg=0.5 * (e_j + e_ij),
        jackknife_weighted_sum=float(np.arange(1, n + 1) @ v_terms),
        avg_weighted_sum=float(weights_avg @ v_terms),
        first_order_ratio=float(e_j / v_terms[0]) if v_terms[0] > 0 else float("nan"),
    )

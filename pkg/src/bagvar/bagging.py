"""Bagged prediction and the resample trace every variance estimator consumes.

``bag_predict`` trains one learner per bootstrap replicate and records both
the count matrix and the replicate predictions at the query points.  That
pair (the trace) is all the downstream estimators need; the bagged
prediction itself is just the per-query mean of the replicate predictions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError, EstimationError, ReplicateError
from .learners import Dataset, LearnerSpec, fit_weighted_learner
from .resampling import (
    ResamplePlan,
    draw_resample_counts,
    enumerate_exact_resamples,
    learner_seed,
    validate_counts,
)


@dataclass(frozen=True)
class ResampleTrace:
    """Counts and replicate predictions of one bagging run.

    Attributes
    ----------
    counts : ndarray of int64, shape (B, n)
        Bootstrap count matrix; row b holds how often each training row
        appeared in replicate b.
    predictions : ndarray, shape (B, q)
        Replicate predictions at the q query points.
    m_sub : int
        Resample size (row sum of ``counts``).
    learner : mapping
        Serializable description of the base learner.
    """

    counts: np.ndarray
    predictions: np.ndarray
    m_sub: int
    learner: Mapping[str, Any]

    def __post_init__(self):
        validate_counts(self.counts, self.m_sub)
        preds = np.asarray(self.predictions, dtype=float)
        if preds.ndim != 2 or preds.shape[0] != self.counts.shape[0]:
            raise ConfigError(
                f"predictions must have shape ({self.counts.shape[0]}, q), got {preds.shape}"
            )
        if not np.isfinite(preds).all():
            raise ConfigError("trace predictions must be finite")
        object.__setattr__(self, "predictions", preds)

    @property
    def B(self) -> int:
        return self.counts.shape[0]

    @property
    def n(self) -> int:
        return self.counts.shape[1]

    @property
    def q(self) -> int:
        return self.predictions.shape[1]


def _as_query_matrix(queries, p: int) -> np.ndarray:
    Q = np.asarray(queries, dtype=float)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.ndim != 2 or Q.shape[1] != p:
        raise ConfigError(f"queries must have shape (q, {p}), got {Q.shape}")
    return Q


def _fit_predict_rows(data, learner, plan, counts, Q, rows):
    out = np.empty((len(rows), Q.shape[0]))
    for k, b in enumerate(rows):
        try:
            predict = fit_weighted_learner(learner, data, counts[b], learner_seed(plan.seed, b))
            out[k] = predict(Q)
        except ReplicateError:
            raise
        except Exception as exc:  # surfaced with the replicate index, no silent skipping
            raise ReplicateError(b, str(exc)) from exc
    return out


def bag_predict(
    data: Dataset,
    learner: LearnerSpec,
    plan: ResamplePlan,
    queries,
    n_jobs: int = 1,
) -> tuple[ResampleTrace, np.ndarray]:
    """Bag a learner over a resample plan and predict at query points.

    Replicate b trains on ``data`` weighted by row b of the count matrix,
    with auxiliary noise seeded from ``(plan.seed, b)``; results are
    identical for any ``n_jobs``.

    Returns
    -------
    trace : ResampleTrace
    bagged : ndarray, shape (q,)
        Per-query mean of the replicate predictions.
    """
    if plan.n != data.n:
        raise ConfigError(f"plan.n={plan.n} does not match dataset size {data.n}")
    if data.weights is not None:
        raise ConfigError(
            "bag_predict requires unweighted data; the weighted-observation "
            "bootstrap is not supported"
        )
    Q = _as_query_matrix(queries, data.p)
    counts = draw_resample_counts(plan)

    if learner.kind == "mean":
        # Weighted mean per replicate is a single matrix product.
        t = counts @ data.responses / plan.resample_size
        preds = np.repeat(t[:, None], Q.shape[0], axis=1)
    elif n_jobs != 1 and learner.kind != "custom":
        from joblib import Parallel, delayed

        chunks = np.array_split(np.arange(plan.B), max(n_jobs, 1) * 4)
        chunks = [c for c in chunks if c.size]
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_fit_predict_rows)(data, learner, plan, counts, Q, c) for c in chunks
        )
        preds = np.vstack(parts)
    else:
        preds = _fit_predict_rows(data, learner, plan, counts, Q, range(plan.B))

    trace = ResampleTrace(
        counts=counts, predictions=preds, m_sub=plan.resample_size,
        learner=learner.describe(),
    )
    return trace, preds.mean(axis=0)


def exact_bag_predict(
    data: Dataset, learner: LearnerSpec, queries, noise_seed: int = 0
) -> np.ndarray:
    """Exactly bagged prediction for tiny n: the probability-weighted mean
    of the learner over every possible bootstrap resample.

    The learner must be deterministic given the weights; randomized learners
    are fit with the fixed ``noise_seed`` on every resample.
    """
    if data.weights is not None:
        raise ConfigError("exact_bag_predict requires unweighted data")
    Q = _as_query_matrix(queries, data.p)
    exact = enumerate_exact_resamples(data.n)
    acc = np.zeros(Q.shape[0])
    for counts, prob in zip(exact.counts, exact.probabilities):
        predict = fit_weighted_learner(learner, data, counts, noise_seed)
        acc += prob * np.asarray(predict(Q), dtype=float)
    return acc


def oob_error(trace: ResampleTrace, data: Dataset) -> float:
    """Out-of-bag mean squared error.

    Requires the trace queries to be the training rows.  For each row i the
    replicate predictions with count zero are averaged; rows that appear in
    every replicate are excluded from the mean.
    """
    if trace.q != data.n or trace.n != data.n:
        raise ConfigError(
            "oob_error needs a trace whose queries are the training rows "
            f"(counts {trace.counts.shape}, predictions {trace.predictions.shape}, n={data.n})"
        )
    out = trace.counts == 0
    n_out = out.sum(axis=0)
    included = n_out > 0
    if not included.any():
        raise EstimationError("no training row has an out-of-bag replicate")
    sums = np.einsum("bi,bi->i", out, trace.predictions)
    oob_pred = sums[included] / n_out[included]
    resid = oob_pred - data.responses[included]
    return float(np.mean(resid**2))

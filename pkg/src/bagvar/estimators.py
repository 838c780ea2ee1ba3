"""Variance estimators for bagged predictions, from a resample trace.

Two families are implemented, both computed from the same B bootstrap
replicates that produced the bagged prediction:

* the infinitesimal-jackknife (IJ) estimator: the squared covariances
  between resample counts and replicate predictions, summed over training
  rows;
* the jackknife-after-bootstrap (J) estimator: scaled squared deviations of
  the leave-one-out replicate means.

Both are biased upward by Monte Carlo noise when B is finite.  The bias is
predictable from the bootstrap variance of the base learner, which gives
the bias-corrected IJ-U and J-U variants, their arithmetic mean, and
closed-form predictions for the Monte Carlo error of either family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bagging import ResampleTrace
from .errors import ConfigError, EstimationError

_E_MINUS_1 = math.e - 1.0

#: Estimator method tags.
METHODS = ("IJ", "J", "IJ_U", "J_U", "AVG")


@dataclass(frozen=True)
class VarianceEstimate:
    """A method-tagged variance estimate.

    Attributes
    ----------
    method : str
        One of ``METHODS``.
    raw_value : float
        The estimator value before truncation; bias-corrected methods can be
        negative.
    value : float
        ``max(raw_value, 0)``; standard errors derive from this.
    components : ndarray or None
        Per-observation kernel, length n: covariances for the IJ family,
        leave-one-out deviations for the J family; None for AVG.
    """

    method: str
    raw_value: float
    value: float
    components: np.ndarray | None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown estimator method {self.method!r}")

    @property
    def truncated(self) -> bool:
        return self.raw_value < 0


@dataclass(frozen=True)
class MCErrorPrediction:
    """Predicted Monte Carlo bias and variance of a finite-B estimator."""

    estimator: str
    bias: float
    variance: float
    n: int
    B: int
    m_sub: int
    v_hat: float
    v_ref: float


@dataclass(frozen=True)
class DecompositionEstimate:
    """Ensemble variance split into base-learner variance times correlation."""

    v_hat: float
    rho_hat: float


@dataclass(frozen=True)
class VarOfVarEstimate:
    """Plug-in estimate of the sampling variance of the IJ estimator."""

    value: float
    components: np.ndarray


def _query_column(trace: ResampleTrace, query: int) -> np.ndarray:
    if not 0 <= query < trace.q:
        raise ConfigError(f"query index {query} out of range for q={trace.q}")
    return trace.predictions[:, query]


def _require_b2(trace: ResampleTrace) -> None:
    if trace.B < 2:
        raise ConfigError(f"variance estimation needs B >= 2, got B={trace.B}")


def bootstrap_base_variance(trace: ResampleTrace, query: int = 0) -> float:
    """Bootstrap estimate of the base learner's variance:
    the mean squared deviation of the replicate predictions (1/B norm)."""
    _require_b2(trace)
    t = _query_column(trace, query)
    d = t - t.mean()
    return float(d @ d / trace.B)


def _ij_components(trace: ResampleTrace, query: int) -> np.ndarray:
    # Counts are centered at their theoretical mean m_sub/n (exactly 1 for
    # full bootstrap), not at the empirical column mean.
    t = _query_column(trace, query)
    dt = t - t.mean()
    n_bar = trace.m_sub / trace.n
    return (trace.counts - n_bar).T @ dt / trace.B


def ij_variance(trace: ResampleTrace, query: int = 0) -> VarianceEstimate:
    """Infinitesimal-jackknife variance estimate (finite-B, uncorrected).

    The per-observation component is the Monte Carlo covariance between the
    resample count of that observation and the replicate prediction; the
    estimate is the sum of squared components.
    """
    _require_b2(trace)
    covs = _ij_components(trace, query)
    raw = float(covs @ covs)
    return VarianceEstimate("IJ", raw, max(raw, 0.0), covs)


def jackknife_variance(trace: ResampleTrace, query: int = 0) -> VarianceEstimate:
    """Jackknife-after-bootstrap variance estimate (finite-B, uncorrected).

    The component for observation i is the mean prediction over replicates
    that exclude i, minus the overall mean; it is set to 0 when i is
    excluded by no replicate or by all of them.
    """
    _require_b2(trace)
    t = _query_column(trace, query)
    t_bar = t.mean()
    out = trace.counts == 0
    n_out = out.sum(axis=0)
    defined = (n_out > 0) & (n_out < trace.B)
    sums = np.einsum("bi,b->i", out[:, defined].astype(float), t)
    deltas = np.zeros(trace.n)
    deltas[defined] = sums / n_out[defined] - t_bar
    raw = float((trace.n - 1) / trace.n * (deltas @ deltas))
    return VarianceEstimate("J", raw, max(raw, 0.0), deltas)


def ij_unbiased(trace: ResampleTrace, query: int = 0) -> VarianceEstimate:
    """Monte-Carlo-bias-corrected IJ estimate.

    Subtracts m_sub * v_hat / B (= n * v_hat / B for the full bootstrap)
    from the uncorrected estimate; the raw value may be negative.
    """
    base = ij_variance(trace, query)
    v_hat = bootstrap_base_variance(trace, query)
    raw = base.raw_value - trace.m_sub * v_hat / trace.B
    return VarianceEstimate("IJ_U", raw, max(raw, 0.0), base.components)


def jackknife_unbiased(trace: ResampleTrace, query: int = 0) -> VarianceEstimate:
    """Monte-Carlo-bias-corrected jackknife estimate.

    The jackknife Monte Carlo bias exceeds the IJ one by the factor e - 1,
    so the subtracted term is (e - 1) * n * v_hat / B.
    """
    base = jackknife_variance(trace, query)
    v_hat = bootstrap_base_variance(trace, query)
    raw = base.raw_value - _E_MINUS_1 * trace.n * v_hat / trace.B
    return VarianceEstimate("J_U", raw, max(raw, 0.0), base.components)


def averaged_estimator(ij_u: VarianceEstimate, j_u: VarianceEstimate) -> VarianceEstimate:
    """Arithmetic mean of the two bias-corrected estimates.

    The corrected jackknife tends to overshoot the B -> infinity sampling
    variance while the corrected IJ tends to undershoot it, so their
    midpoint is often closer to unbiased than either alone.
    """
    if ij_u.method != "IJ_U" or j_u.method != "J_U":
        raise ValueError(
            f"averaged_estimator needs (IJ_U, J_U) inputs, got ({ij_u.method}, {j_u.method})"
        )
    raw = 0.5 * (ij_u.raw_value + j_u.raw_value)
    return VarianceEstimate("AVG", raw, max(raw, 0.0), None)


def predict_mc_moments(
    estimator: str, n: int, B: int, m_sub: int, v_hat: float, v_ref: float
) -> MCErrorPrediction:
    """Theoretical Monte Carlo bias and variance of a finite-B estimator.

    ``v_hat`` is the bootstrap base-learner variance; ``v_ref`` the
    B -> infinity value of the estimator whose Monte Carlo error is being
    predicted (0 gives the leading small-B behaviour).
    """
    if estimator not in ("IJ", "J"):
        raise ConfigError(f"MC moments are defined for IJ and J, got {estimator!r}")
    if B < 1 or n < 1 or m_sub < 1:
        raise ConfigError("predict_mc_moments needs n, B, m_sub >= 1")
    if v_hat < 0 or v_ref < 0:
        raise ConfigError("v_hat and v_ref must be non-negative")
    if estimator == "IJ":
        if m_sub == n:
            bias = n * v_hat / B
            variance = 2 * n * v_hat**2 / B**2 + 4 * v_ref * v_hat / B
        else:
            bias = m_sub * v_hat / B
            variance = (
                2 * m_sub**2 * v_hat**2 / (n * B**2) + 4 * m_sub * v_ref * v_hat / (n * B)
            )
    else:
        bias = _E_MINUS_1 * n * v_hat / B
        variance = (
            2 * _E_MINUS_1**2 * n * v_hat**2 / B**2 + 4 * _E_MINUS_1 * v_ref * v_hat / B
        )
    return MCErrorPrediction(
        estimator=estimator, bias=bias, variance=variance,
        n=n, B=B, m_sub=m_sub, v_hat=v_hat, v_ref=v_ref,
    )


def conditional_prediction_variances(
    trace: ResampleTrace, query: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Per-observation replicate-prediction variances, split by membership.

    Returns ``(v_out, v_in)`` of length n: the variance of the replicate
    predictions over resamples that exclude observation i, and over those
    that include it (1/B-style normalization, NaN where a group is empty).
    The jackknife bias correction approximates both by the pooled ``v_hat``;
    these diagnostics let that approximation be checked on a real trace.
    """
    _require_b2(trace)
    t = _query_column(trace, query)
    out = trace.counts == 0
    v_out = np.full(trace.n, np.nan)
    v_in = np.full(trace.n, np.nan)
    for dest, mask in ((v_out, out), (v_in, ~out)):
        sizes = mask.sum(axis=0)
        ok = sizes > 0
        sums = np.einsum("bi,b->i", mask[:, ok].astype(float), t)
        sq = np.einsum("bi,b->i", mask[:, ok].astype(float), t * t)
        means = sums / sizes[ok]
        dest[ok] = np.maximum(sq / sizes[ok] - means**2, 0.0)
    return v_out, v_in


def var_of_var(trace: ResampleTrace, query: int = 0) -> VarOfVarEstimate:
    """Plug-in estimate of the sampling variance of the IJ estimate itself:
    the summed squared deviations of the squared covariance components."""
    _require_b2(trace)
    c = _ij_components(trace, query)
    c2 = c * c
    dev = c2 - c2.mean()
    return VarOfVarEstimate(value=float(dev @ dev), components=c)


def tree_decomposition(
    trace: ResampleTrace, query: int, variance_estimate: VarianceEstimate
) -> DecompositionEstimate:
    """Split an ensemble variance estimate into base-learner variance times
    correlation: rho_hat = estimate / v_hat."""
    v_hat = bootstrap_base_variance(trace, query)
    if v_hat == 0.0:
        raise EstimationError("base-learner variance is zero; correlation undefined")
    return DecompositionEstimate(v_hat=v_hat, rho_hat=variance_estimate.value / v_hat)

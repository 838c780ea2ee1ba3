"""Base learners trained on weighted data.

Every learner accepts per-row weights so a bootstrap replicate can be fit
without materializing the resampled dataset: the weights are the bootstrap
counts, and zero-weight rows are excluded everywhere (an observation absent
from the resample must not influence the replicate).

Learners:

* a greedy CART regression tree with per-split feature sub-sampling
  (``mtry`` < p turns a bagged tree into a random forest),
* a polynomial of adaptively chosen degree (Mallows' Cp),
* the weighted sample mean of the responses,
* arbitrary user-supplied weighted learners (``kind="custom"``).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ConfigError, FitError

PredictFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Dataset:
    """A fixed regression dataset: n x p features, n responses, optional weights.

    Feature/response names are kept for reporting only.
    """

    features: np.ndarray
    responses: np.ndarray
    weights: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None
    response_name: str = "y"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.responses, dtype=float)
        if X.ndim != 2:
            raise ConfigError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ConfigError(f"dataset needs n >= 1 and p >= 1, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ConfigError(
                f"responses must have shape ({X.shape[0]},), got {y.shape}"
            )
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ConfigError("dataset contains non-finite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "responses", y)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != y.shape:
                raise ConfigError(f"weights must have shape {y.shape}, got {w.shape}")
            if not np.isfinite(w).all() or (w < 0).any():
                raise ConfigError("weights must be finite and non-negative")
            if not (w > 0).any():
                raise ConfigError("weights must not all be zero")
            object.__setattr__(self, "weights", w)
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise ConfigError("feature_names length does not match p")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class TreeParams:
    """Hyperparameters of the regression tree.

    ``mtry`` features are drawn without replacement at every split from the
    noise stream seeded by ``split_noise_seed``; with ``mtry == p`` the tree
    is deterministic given the data (no noise draw is consumed).
    ``max_leaves=None`` means no leaf budget.
    """

    mtry: int
    min_leaf: int = 1
    max_leaves: int | None = None
    split_noise_seed: int = 0

    def __post_init__(self):
        if self.mtry < 1:
            raise ConfigError(f"mtry must be >= 1, got {self.mtry}")
        if self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.max_leaves is not None and self.max_leaves < 2:
            raise ConfigError(f"max_leaves must be >= 2, got {self.max_leaves}")


@dataclass
class TreeModel:
    """A fitted binary regression tree in flat-array form.

    ``feature[k] == -1`` marks node k as a leaf with prediction ``value[k]``;
    internal nodes route ``x[feature] <= threshold`` to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int
    n_leaves: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predict each row of an (q, p) query matrix."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"query matrix must have shape (q, {self.n_features}), got {X.shape}"
            )
        idx = np.zeros(X.shape[0], dtype=np.intp)
        while True:
            feat = self.feature[idx]
            active = np.nonzero(feat >= 0)[0]
            if active.size == 0:
                break
            cur = idx[active]
            go_left = X[active, feat[active]] <= self.threshold[cur]
            idx[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[idx]


def predict_tree(model: TreeModel, x) -> float:
    """Prediction of a fitted tree at a single feature vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {x.shape[0]}")
    return float(model.predict(x[None, :])[0])


def _best_split(X, y, w, feats, min_leaf, node_sse, min_gain):
    """Best (reduction, feature, threshold) over the given features, or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    feature values; ties break toward the lowest feature index (caller passes
    features ascending), then the lowest threshold (first argmax position).
    """
    m = y.shape[0]
    best = None
    for j in feats:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        ws = w[order]
        cw = np.cumsum(ws)
        cs = np.cumsum(ws * ys)
        cq = np.cumsum(ws * ys * ys)
        total_w, total_s, total_q = cw[-1], cs[-1], cq[-1]

        pos = np.nonzero(xs[:-1] < xs[1:])[0]
        if min_leaf > 1:
            pos = pos[(pos + 1 >= min_leaf) & (m - pos - 1 >= min_leaf)]
        if pos.size == 0:
            continue
        wl, sl, ql = cw[pos], cs[pos], cq[pos]
        sse_left = np.maximum(ql - sl * sl / wl, 0.0)
        sse_right = np.maximum((total_q - ql) - (total_s - sl) ** 2 / (total_w - wl), 0.0)
        reduction = node_sse - sse_left - sse_right
        k = int(np.argmax(reduction))
        red = float(reduction[k])
        if red > min_gain and (best is None or red > best[0]):
            thr = 0.5 * (xs[pos[k]] + xs[pos[k] + 1])
            best = (red, int(j), float(thr))
    return best


def fit_regression_tree(data: Dataset, params: TreeParams) -> TreeModel:
    """Grow a weighted CART regression tree.

    Growth is best-first under the ``max_leaves`` budget: among all current
    leaves, the split with the largest weighted-SSE reduction is applied
    next; growth stops when the budget is reached, no split reduces the SSE,
    or children would fall below ``min_leaf`` positive-weight rows.
    """
    if params.mtry > data.p:
        raise ConfigError(f"mtry={params.mtry} exceeds p={data.p}")
    w_all = data.weights if data.weights is not None else np.ones(data.n)
    keep = w_all > 0
    X = data.features[keep]
    y = data.responses[keep]
    w = w_all[keep]
    if y.shape[0] == 0:
        raise FitError("no rows with positive weight")

    rng = np.random.default_rng(np.random.PCG64(params.split_noise_seed))
    all_feats = np.arange(data.p)

    def draw_feats():
        if params.mtry == data.p:
            return all_feats
        return np.sort(rng.choice(data.p, size=params.mtry, replace=False))

    def node_stats(rows):
        ws = w[rows]
        mean = float(np.average(y[rows], weights=ws))
        sse = float(np.sum(ws * (y[rows] - mean) ** 2))
        return mean, sse

    root_rows = np.arange(y.shape[0])
    root_mean, root_sse = node_stats(root_rows)
    min_gain = 1e-12 * max(1.0, root_sse)

    # Builder arrays; children appended as nodes split.
    feature = [-1]
    threshold = [np.nan]
    left = [-1]
    right = [-1]
    value = [root_mean]
    node_rows = {0: root_rows}
    node_sse = {0: root_sse}

    heap: list[tuple[float, int, tuple[float, int, float]]] = []

    def push_candidate(node_id):
        rows = node_rows[node_id]
        if rows.shape[0] < 2 * params.min_leaf or node_sse[node_id] <= min_gain:
            return
        cand = _best_split(
            X[rows], y[rows], w[rows], draw_feats(), params.min_leaf,
            node_sse[node_id], min_gain,
        )
        if cand is not None:
            heapq.heappush(heap, (-cand[0], node_id, cand))

    push_candidate(0)
    n_leaves = 1
    budget = params.max_leaves if params.max_leaves is not None else data.n + 1
    while heap and n_leaves < budget:
        neg_red, node_id, (red, j, thr) = heapq.heappop(heap)
        rows = node_rows.pop(node_id)
        go_left = X[rows, j] <= thr
        children_sse = 0.0
        for side, child_rows in ((0, rows[go_left]), (1, rows[~go_left])):
            child_id = len(feature)
            mean, sse = node_stats(child_rows)
            children_sse += sse
            feature.append(-1)
            threshold.append(np.nan)
            left.append(-1)
            right.append(-1)
            value.append(mean)
            node_rows[child_id] = child_rows
            node_sse[child_id] = sse
            if side == 0:
                left[node_id] = child_id
            else:
                right[node_id] = child_id
        # Accepted splits must not increase the training SSE.
        assert children_sse <= node_sse[node_id] + 1e-9 * max(1.0, root_sse)
        feature[node_id] = j
        threshold[node_id] = thr
        n_leaves += 1
        push_candidate(left[node_id])
        push_candidate(right[node_id])

    return TreeModel(
        feature=np.array(feature, dtype=np.intp),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.intp),
        right=np.array(right, dtype=np.intp),
        value=np.array(value, dtype=float),
        n_features=data.p,
        n_leaves=n_leaves,
    )


@dataclass(frozen=True)
class AdaptivePolyModel:
    """Polynomial with degree selected by Mallows' Cp; coefficients ascending."""

    degree: int
    coefficients: np.ndarray


def fit_adaptive_poly(data: Dataset, d_max: int = 6) -> AdaptivePolyModel:
    """Weighted polynomial fit with degree in 1..d_max chosen by Cp.

    Cp(d) = RSS(d)/sigma2 - n_eff + 2(d+1) with sigma2 = RSS(d_max) /
    (n_eff - d_max - 1) and n_eff the total weight; ties break toward the
    smaller degree.  When the largest model already fits exactly (sigma2
    degenerate), the smallest degree with a perfect fit is selected.
    """
    if data.p != 1:
        raise ConfigError(f"adaptive polynomial needs p=1, got p={data.p}")
    if d_max < 1:
        raise ConfigError(f"d_max must be >= 1, got {d_max}")
    if data.n <= d_max + 1:
        raise ConfigError(f"need n > d_max + 1 = {d_max + 1}, got n={data.n}")
    w_all = data.weights if data.weights is not None else np.ones(data.n)
    keep = w_all > 0
    x = data.features[keep, 0]
    y = data.responses[keep]
    w = w_all[keep]
    n_eff = float(w.sum())
    if n_eff <= d_max + 1:
        raise FitError(f"effective sample size {n_eff} too small for d_max={d_max}")

    sw = np.sqrt(w)
    basis = np.vander(x, d_max + 1, increasing=True) * sw[:, None]
    target = y * sw

    coefs: list[np.ndarray] = []
    rss = np.empty(d_max + 1)
    rank_max = 0
    for d in range(1, d_max + 1):
        A = basis[:, : d + 1]
        coef, _, rank, _ = np.linalg.lstsq(A, target, rcond=None)
        coefs.append(coef)
        rss[d] = float(np.sum((A @ coef - target) ** 2))
        if d == d_max:
            rank_max = rank
    if rank_max < d_max + 1:
        raise FitError(
            f"rank-deficient design after weighting (rank {rank_max} < {d_max + 1})"
        )

    mean_y = float(np.average(y, weights=w))
    var_y = float(np.average((y - mean_y) ** 2, weights=w))
    perfect = n_eff * (1e-9 * var_y + 1e-12 * (1.0 + mean_y**2))
    if rss[d_max] <= perfect:
        selected = next(d for d in range(1, d_max + 1) if rss[d] <= perfect)
    else:
        sigma2 = rss[d_max] / (n_eff - d_max - 1)
        cp = [rss[d] / sigma2 - n_eff + 2 * (d + 1) for d in range(1, d_max + 1)]
        selected = 1 + min(range(len(cp)), key=lambda i: (cp[i], i))
    return AdaptivePolyModel(degree=selected, coefficients=coefs[selected - 1])


def predict_poly(model: AdaptivePolyModel, x) -> float | np.ndarray:
    """Evaluate the fitted polynomial at a scalar or array of abscissae."""
    out = np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), model.coefficients)
    return float(out) if np.ndim(x) == 0 else out


def sample_mean_learner(data: Dataset) -> float:
    """Weighted mean of the responses (weights default to 1)."""
    w = data.weights if data.weights is not None else np.ones(data.n)
    return float(np.average(data.responses, weights=w))


# A custom learner maps (features, responses, weights, rng) to a predictor.
CustomFit = Callable[[np.ndarray, np.ndarray, np.ndarray, np.random.Generator], PredictFn]


@dataclass(frozen=True)
class LearnerSpec:
    """Description of a base learner with all hyperparameters.

    kind:
        "tree"   -- regression tree; ``mtry`` defaults to p at fit time.
        "poly"   -- adaptive polynomial of degree 1..d_max (requires p=1).
        "mean"   -- weighted sample mean of the responses.
        "custom" -- ``fit_fn`` supplies the weighted fit (library use only;
        not expressible in CLI configs or manifests).
    """

    kind: str
    mtry: int | None = None
    min_leaf: int = 1
    max_leaves: int | None = None
    d_max: int = 6
    fit_fn: CustomFit | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("tree", "poly", "mean", "custom"):
            raise ConfigError(f"unknown learner kind {self.kind!r}")
        if self.kind == "custom" and self.fit_fn is None:
            raise ConfigError("custom learner needs fit_fn")

    def describe(self) -> dict[str, Any]:
        """JSON-serializable description for manifests and traces."""
        if self.kind == "tree":
            return {
                "kind": "tree",
                "mtry": self.mtry,
                "min_leaf": self.min_leaf,
                "max_leaves": self.max_leaves,
            }
        if self.kind == "poly":
            return {"kind": "poly", "d_max": self.d_max}
        if self.kind == "mean":
            return {"kind": "mean"}
        return {"kind": "custom", "name": self.name or getattr(self.fit_fn, "__name__", "?")}


def scalar_learner(fn: Callable[[np.ndarray, np.ndarray], float], name: str = "") -> LearnerSpec:
    """Wrap a statistic of (responses, weights) as a query-independent learner."""

    def fit(X, y, w, rng):
        keep = w > 0
        c = float(fn(y[keep], w[keep]))

        def predict(Q):
            return np.full(np.asarray(Q).shape[0], c)

        return predict

    return LearnerSpec(kind="custom", fit_fn=fit, name=name or getattr(fn, "__name__", "scalar"))


def fit_weighted_learner(
    spec: LearnerSpec, data: Dataset, weights: np.ndarray, seed: int
) -> PredictFn:
    """Fit one replicate: train ``spec`` on ``data`` reweighted by ``weights``.

    ``seed`` feeds the learner's auxiliary noise stream (tree feature
    sub-sampling); learners without auxiliary noise ignore it.
    """
    if spec.kind == "tree":
        params = TreeParams(
            mtry=spec.mtry if spec.mtry is not None else data.p,
            min_leaf=spec.min_leaf,
            max_leaves=spec.max_leaves,
            split_noise_seed=seed,
        )
        model = fit_regression_tree(_reweight(data, weights), params)
        return model.predict
    if spec.kind == "poly":
        model = fit_adaptive_poly(_reweight(data, weights), d_max=spec.d_max)
        return lambda Q: predict_poly(model, np.asarray(Q, dtype=float)[:, 0])
    if spec.kind == "mean":
        c = sample_mean_learner(_reweight(data, weights))
        return lambda Q: np.full(np.asarray(Q).shape[0], c)
    rng = np.random.default_rng(np.random.PCG64(seed))
    return spec.fit_fn(data.features, data.responses, np.asarray(weights, dtype=float), rng)


def _reweight(data: Dataset, weights: np.ndarray) -> Dataset:
    return Dataset(
        features=data.features,
        responses=data.responses,
        weights=weights,
        feature_names=data.feature_names,
        response_name=data.response_name,
    )

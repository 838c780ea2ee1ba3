"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; the whole suite takes several minutes at desk scale.  Every test
uses frozen seeds, so reruns are deterministic.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from bagvar import (
    Dataset,
    GeneratorSpec,
    LearnerSpec,
    ResamplePlan,
    ResampleTrace,
    anova_oracle,
    bag_predict,
    bootstrap_base_variance,
    generate,
    ij_unbiased,
    ij_variance,
    jackknife_unbiased,
    jackknife_variance,
    local_maxima,
    run_mc_ratio_experiment,
    run_spike_study,
    run_table_study,
    sample_features,
    var_of_var,
)

E1 = math.e - 1.0
Z95 = 1.959963984540054
REPO = Path(__file__).resolve().parent.parent


def report(criterion, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {criterion}: {status} ({detail})")
    assert ok, f"criterion {criterion}: {detail}"


# ──────────────────────────────────────────────────────────────────────
# 1. Formula-transcription equivalence on random tiny traces
# ──────────────────────────────────────────────────────────────────────

def naive_ij(counts, t, m_sub):
    B, n = counts.shape
    t_bar = sum(t) / B
    total = 0.0
    for i in range(n):
        cov = sum((counts[b, i] - m_sub / n) * (t[b] - t_bar) for b in range(B)) / B
        total += cov**2
    return total


def naive_jackknife(counts, t):
    B, n = counts.shape
    t_bar = sum(t) / B
    total = 0.0
    for i in range(n):
        outs = [t[b] for b in range(B) if counts[b, i] == 0]
        delta = sum(outs) / len(outs) - t_bar if 0 < len(outs) < B else 0.0
        total += delta**2
    return (n - 1) / n * total


def test_criterion_1_brute_force_equivalence():
    start = time.time()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        B = int(rng.integers(2, 9))
        counts = rng.multinomial(n, np.full(n, 1.0 / n), size=B)
        t = rng.normal(size=(B, 1)) * rng.lognormal()
        trace = ResampleTrace(counts=counts, predictions=t, m_sub=n, learner={})
        tv = t[:, 0]
        worst = max(
            worst,
            abs(ij_variance(trace).raw_value - naive_ij(counts, tv, n)),
            abs(jackknife_variance(trace).raw_value - naive_jackknife(counts, tv)),
        )
    elapsed = time.time() - start
    report(1, worst <= 1e-12 and elapsed < 5.0,
           f"max |difference| {worst:.2e} over 1000 traces in {elapsed:.1f}s")


# ──────────────────────────────────────────────────────────────────────
# 2. Delta-method oracle for the sample mean
# ──────────────────────────────────────────────────────────────────────

def test_criterion_2_delta_method_oracle():
    start = time.time()
    n, B = 100, 20000
    rng = np.random.default_rng(21)
    values = np.empty(20)
    targets = np.empty(20)
    for s in range(20):
        y = rng.normal(size=n)
        data = Dataset(features=np.zeros((n, 1)), responses=y)
        plan = ResamplePlan(n=n, B=B, seed=37_000 + s)
        trace, _ = bag_predict(data, LearnerSpec(kind="mean"), plan, [[0.0]])
        values[s] = ij_unbiased(trace).value
        targets[s] = ((y - y.mean()) ** 2).sum() / n**2
    rel = abs(values.mean() - targets.mean()) / targets.mean()
    elapsed = time.time() - start
    report(2, rel <= 0.10 and elapsed < 60.0,
           f"mean estimate {values.mean():.5f} vs oracle {targets.mean():.5f}, "
           f"rel err {rel:.3%}, {elapsed:.0f}s")


# ──────────────────────────────────────────────────────────────────────
# 3. Monte Carlo bias law for bagged trees
# ──────────────────────────────────────────────────────────────────────

@pytest.fixture(scope="module")
def cosine_tree_setup():
    gen = GeneratorSpec(name="cosine", n=50, seed=202)
    data = generate(gen)
    learner = LearnerSpec(kind="tree", mtry=2, max_leaves=5)
    query = sample_features(gen, 1, np.random.default_rng(55))
    ref_plan = ResamplePlan(n=50, B=50000, seed=1)
    ref_trace, _ = bag_predict(data, learner, ref_plan, query)
    return gen, data, learner, query, ref_trace


def test_criterion_3_mc_bias_law(cosine_tree_setup):
    start = time.time()
    _, data, learner, query, ref_trace = cosine_tree_setup
    v_ref = bootstrap_base_variance(ref_trace)
    ij_ref = ij_unbiased(ref_trace).value
    j_ref = jackknife_unbiased(ref_trace).value

    B, n_traces = 100, 200
    ij_draws = np.empty(n_traces)
    j_draws = np.empty(n_traces)
    for d in range(n_traces):
        plan = ResamplePlan(n=50, B=B, seed=10_000 + d)
        trace, _ = bag_predict(data, learner, plan, query)
        ij_draws[d] = ij_variance(trace).value
        j_draws[d] = jackknife_variance(trace).value

    obs_ij = ij_draws.mean() - ij_ref
    obs_j = j_draws.mean() - j_ref
    pred_ij = 50 * v_ref / B
    pred_j = E1 * 50 * v_ref / B
    rel_ij = abs(obs_ij - pred_ij) / pred_ij
    rel_j = abs(obs_j - pred_j) / pred_j
    elapsed = time.time() - start
    report(3, rel_ij <= 0.25 and rel_j <= 0.25 and elapsed < 600.0,
           f"IJ bias {obs_ij:.4f} vs {pred_ij:.4f} ({rel_ij:.1%}), "
           f"J bias {obs_j:.4f} vs {pred_j:.4f} ({rel_j:.1%}), {elapsed:.0f}s")


# ──────────────────────────────────────────────────────────────────────
# 4. Monte Carlo error-ratio reproduction (bagged adaptive polynomial)
# ──────────────────────────────────────────────────────────────────────

def test_criterion_4_mc_ratio_windows():
    start = time.time()
    rng = np.random.default_rng(1234)
    n = 120
    x = np.sort(rng.uniform(-2.5, 2.5, size=n))
    y = 2.0 + x - 0.3 * x**3 + rng.normal(size=n)
    data = Dataset(features=x[:, None], responses=y)
    curves = run_mc_ratio_experiment(
        data, LearnerSpec(kind="poly", d_max=4), [n // 2, n, 3 * n, 10 * n],
        n_draws=250, query=[[0.5]], B_ref=50000, seed=424242,
    )
    pooled_bias_ratio = curves.bias_j.sum() / curves.bias_ij.sum()
    var_small = curves.var_ratio[0]           # B = n/2
    var_large = curves.var_ratio[-1]          # B = 10n
    elapsed = time.time() - start
    ok = (1.4 <= pooled_bias_ratio <= 2.1
          and 2.0 <= var_small <= 4.5
          and 1.3 <= var_large <= 2.3
          and elapsed < 600.0)
    report(4, ok,
           f"bias ratio {pooled_bias_ratio:.3f} in [1.4, 2.1]; "
           f"var ratio {var_small:.3f} at B=n/2 in [2.0, 4.5], "
           f"{var_large:.3f} at B=10n in [1.3, 2.3]; {elapsed:.0f}s")


# ──────────────────────────────────────────────────────────────────────
# 5. Directional reproduction of the cosine bias/variance table row
# ──────────────────────────────────────────────────────────────────────

def paired_gap(a, b):
    """95%-confident lower bound on mean(a - b) over paired test points."""
    d = a - b
    return d.mean() - Z95 * d.std(ddof=1) / np.sqrt(d.size)


def test_criterion_5_table_row_orderings():
    start = time.time()
    gen = GeneratorSpec(name="cosine", n=50, seed=42)
    learner = LearnerSpec(kind="tree", mtry=1, min_leaf=5)
    plan = ResamplePlan(n=50, B=200, seed=7)
    rep = run_table_study(gen, learner, plan, n_test=50, n_reps=100)

    bias_ij, hw_ij = rep.cells[("IJ_U", "bias")]
    bias_j, hw_j = rep.cells[("J_U", "bias")]
    bias_avg, hw_avg = rep.cells[("AVG", "bias")]

    checks = {
        "bias(IJ_U) < 0": bias_ij + hw_ij < 0,
        "bias(J_U) > 0": bias_j - hw_j > 0,
        "|bias(AVG)| < max": abs(bias_avg) + hw_avg
            < max(abs(bias_ij) - hw_ij, abs(bias_j) - hw_j),
        "Var(IJ_U) < Var(J_U)": paired_gap(rep.variance["J_U"], rep.variance["IJ_U"]) > 0,
        "MSE(IJ_U) < MSE(J_U)": paired_gap(rep.mse["J_U"], rep.mse["IJ_U"]) > 0,
    }
    elapsed = time.time() - start
    failed = [k for k, v in checks.items() if not v]
    report(5, not failed and elapsed < 900.0,
           f"bias {bias_ij:+.3f}/{bias_j:+.3f}/{bias_avg:+.3f}, "
           f"var {rep.cells[('IJ_U', 'variance')][0]:.3f} vs "
           f"{rep.cells[('J_U', 'variance')][0]:.3f}; "
           f"failed: {failed or 'none'}; {elapsed:.0f}s")


# ──────────────────────────────────────────────────────────────────────
# 6. Variance-spike profile on the step signal
# ──────────────────────────────────────────────────────────────────────

def test_criterion_6_spike_profile():
    start = time.time()
    plan = ResamplePlan(n=400, B=1000, seed=606)
    profile = run_spike_study(plan, n_reps=50, grid_size=101)

    peaks = local_maxima(profile.mean_estimate)
    order = peaks[np.argsort(profile.mean_estimate[peaks])[::-1]]
    top4 = sorted(float(profile.grid[k]) for k in order[:4])
    dists = [min(abs(t - j) for j in profile.jump_locations) for t in top4]
    coverage = float(profile.covered().mean())
    elapsed = time.time() - start
    ok = max(dists) <= 0.05 and coverage >= 0.80 and elapsed < 600.0
    report(6, ok,
           f"top-4 peaks {top4} (max dist {max(dists):.3f}), "
           f"truth within bands at {coverage:.1%} of grid points; {elapsed:.0f}s")


# ──────────────────────────────────────────────────────────────────────
# 7. ANOVA oracle on a two-point-support problem
# ──────────────────────────────────────────────────────────────────────

def test_criterion_7_anova_oracle():
    start = time.time()

    def squared_mean(y, w):
        return float(np.average(y, weights=w)) ** 2

    oracle = anova_oracle([0.0, 1.0], [0.5, 0.5], 4, squared_mean, "squared_mean")
    total = oracle.v_terms.sum()
    gap = abs(total - oracle.total_variance)
    upward = oracle.e_jackknife >= total
    avg_better = abs(oracle.e_avg - total) <= abs(oracle.e_jackknife - total)
    elapsed = time.time() - start
    ok = gap <= 1e-10 and upward and avg_better and elapsed < 60.0
    report(7, ok,
           f"sum(V_k)={total:.6f} vs Var={oracle.total_variance:.6f} "
           f"(gap {gap:.1e}); E[J]={oracle.e_jackknife:.6f} >= sum: {upward}; "
           f"|E[avg]-sum|={abs(oracle.e_avg - total):.6f} <= "
           f"|E[J]-sum|={abs(oracle.e_jackknife - total):.6f}: {avg_better}; "
           f"{elapsed:.1f}s")


# ──────────────────────────────────────────────────────────────────────
# 8. Sampling variance of the IJ estimate (plug-in plausibility)
# ──────────────────────────────────────────────────────────────────────

def test_criterion_8_var_of_var_factor_of_two():
    start = time.time()
    n, B, n_datasets = 50, 10000, 200
    master = np.random.default_rng(515151)
    vov = np.empty(n_datasets)
    ij_vals = np.empty(n_datasets)
    for d in range(n_datasets):
        y = master.normal(size=n)
        data = Dataset(features=np.zeros((n, 1)), responses=y)
        plan = ResamplePlan(n=n, B=B, seed=600_000 + d)
        trace, _ = bag_predict(data, LearnerSpec(kind="mean"), plan, [[0.0]])
        vov[d] = var_of_var(trace).value
        ij_vals[d] = ij_variance(trace).value
    empirical = ij_vals.var(ddof=1)
    median_est = float(np.median(vov))
    ratio = median_est / empirical
    elapsed = time.time() - start
    report(8, 0.5 <= ratio <= 2.0 and elapsed < 300.0,
           f"median plug-in {median_est:.3e} vs empirical {empirical:.3e}, "
           f"ratio {ratio:.3f}; {elapsed:.0f}s")


# ──────────────────────────────────────────────────────────────────────
# 9. End-to-end CSV pipeline on the bundled synthetic file
# ──────────────────────────────────────────────────────────────────────

def test_criterion_9_csv_pipeline_end_to_end(tmp_path):
    start = time.time()
    data_file = REPO / "data" / "synthetic_regression.csv"
    query_file = REPO / "data" / "synthetic_queries.csv"
    assert data_file.exists() and query_file.exists()

    def run(outdir):
        cmd = [
            sys.executable, "-m", "bagvar.cli",
            "predict", "--data", str(data_file), "--queries", str(query_file),
            "--learner", "tree", "--max-leaves", "6", "-B", "120", "--seed", "99",
            "--estimators", "IJ_U,J_U,AVG", "--out-dir", str(outdir), "--no-plots",
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True, cwd=REPO)
        assert proc.returncode == 0, proc.stderr
        return (outdir / "predictions.csv").read_bytes()

    first = run(tmp_path / "run1")
    second = run(tmp_path / "run2")
    byte_identical = first == second

    lines = first.decode().splitlines()
    header = lines[0].split(",")
    se_cols = [c for c in header if c.startswith("se_")]
    contract = (
        se_cols == ["se_IJ_U", "se_J_U", "se_AVG"]
        and {"query_id", "prediction", "v_hat", "rho_hat", "B"} <= set(header)
        and len(lines) == 9
    )

    train_out = tmp_path / "train"
    proc = subprocess.run(
        [sys.executable, "-m", "bagvar.cli", "train", "--data", str(data_file),
         "--learner", "tree", "--max-leaves", "6", "-B", "120", "--seed", "99",
         "--out-dir", str(train_out), "--no-plots"],
        capture_output=True, text=True, cwd=REPO,
    )
    manifest_ok = proc.returncode == 0
    if manifest_ok:
        manifest = json.loads((train_out / "manifest.json").read_text())
        manifest_ok = (
            manifest["plan"]["seed"] == 99
            and (train_out / "trace_counts.csv").exists()
            and (train_out / "trace_predictions.csv").exists()
        )
    elapsed = time.time() - start
    ok = byte_identical and contract and manifest_ok
    report(9, ok,
           f"byte-identical reruns: {byte_identical}; column contract: {contract}; "
           f"train manifest+trace: {manifest_ok}; {elapsed:.0f}s "
           f"(real-data results are out of desk scale; bundled synthetic file used)")

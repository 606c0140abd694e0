"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Tolerances are fixed here and never tuned to the observed numbers. The
recorded lines are printed together in the terminal summary.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
import statsmodels.api as sm

from graspcause.cli import main as cli_main
from graspcause.effects import ESTIMATORS, EstimatorConfig, estimate, estimate_all
from graspcause.events import DesignMatrix, encode, median_split, simulate_reversal_rate
from graspcause.explain import fit_cate_tree
from graspcause.graph import CONFOUNDERS, backdoor_sets, build_default_graph, identify
from graspcause.refute import refute_placebo, refute_random_common_cause, refute_subset
from graspcause.synth import Step, generate, known_effect, linear_gaussian, preset

from conftest import ACCEPTANCE_LINES, random_dag
from test_graph import oracle_backdoor

ROOT = Path(__file__).resolve().parents[1]
SEEDS = range(20)
SUITE_START = time.perf_counter()
GRAPH = build_default_graph()
ESTIMAND = identify(GRAPH, "D", "H", zero_variance=["DO"])


def record(number, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


@pytest.fixture(scope="module")
def known_effect_runs():
    """Criterion-2 estimates for every seed, plus seed 0's design for the refutation checks."""
    runs, designs = [], {}
    t0 = time.perf_counter()
    for s in SEEDS:
        table, truth = generate(known_effect(400, 0.15, seed=s))
        dm = encode(table, ESTIMAND)
        designs[s] = dm
        runs.append((truth.cate_mean, estimate_all(dm, EstimatorConfig(seed=s))))
    return runs, designs, time.perf_counter() - t0


def test_criterion_1_null_effect_coverage():
    t0 = time.perf_counter()
    hits = {k: 0 for k in ESTIMATORS}
    for s in SEEDS:
        table, _ = generate(preset("dsv", 137, noise_seed=s))
        res = estimate_all(encode(table, ESTIMAND), EstimatorConfig(seed=s, alpha=0.1))
        for k in ESTIMATORS:
            hits[k] += res[k].covers(0.0)
    elapsed = time.perf_counter() - t0
    ok = all(h >= 17 for h in hits.values()) and elapsed <= 300
    detail = ", ".join(f"{k} {h}/20" for k, h in hits.items())
    record(1, ok, f"90% CI contains 0: {detail} (need >= 17/20 each); {elapsed:.0f}s (limit 300s)")
    assert ok, detail


def test_criterion_2_known_effect_recovery(known_effect_runs):
    runs, _, elapsed = known_effect_runs
    tol = {"LDML": 0.05, "LDRL": 0.05, "FDML": 0.08, "FDRL": 0.08}
    parts, ok = [], True
    for k in ESTIMATORS:
        mean = float(np.mean([r[k].effect for _, r in runs]))
        cover = sum(r[k].covers(truth) for truth, r in runs)
        good = abs(mean - 0.15) <= tol[k] and cover >= 14
        ok &= good
        parts.append(f"{k} mean {mean:.3f} cover {cover}/20")
    record(2, ok, "; ".join(parts) + f" (tau 0.15, tol 0.05/0.08, need >= 14/20); {elapsed:.0f}s")
    assert ok


def test_criterion_3_oracle_equivalence():
    def fw(dm):
        Z = sm.add_constant(np.column_stack([dm.x, dm.w]))
        ry = dm.y - sm.OLS(dm.y, Z).fit().fittedvalues
        rt = dm.t - sm.OLS(dm.t, Z).fit().fittedvalues
        return float(sm.OLS(ry, rt).fit().params[0])

    noisy = DesignMatrix(*linear_gaussian(2000, 0.15, 1.0, seed=0))
    clean = DesignMatrix(*linear_gaussian(2000, 0.15, 0.0, seed=0))
    cfg = EstimatorConfig.linear(seed=0)
    d_noisy = abs(estimate(noisy, "LDML", cfg).effect - fw(noisy))
    d_clean = abs(estimate(clean, "LDML", cfg).effect - fw(clean))
    ok = d_noisy <= 1e-2 and d_clean <= 1e-6
    record(3, ok, f"|LDML - partialling-out OLS| = {d_noisy:.2e} (noise, tol 1e-2), {d_clean:.2e} (no noise, tol 1e-6)")
    assert ok


def test_criterion_4_identification():
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(100):
        g = random_dag(rng, int(rng.integers(2, 7)), p=float(rng.uniform(0.2, 0.7)))
        t, y = rng.choice(g.names, 2, replace=False)
        mismatches += backdoor_sets(g, t, y) != oracle_backdoor(g, t, y)
    full = backdoor_sets(GRAPH, "D", "H")
    reduced = ESTIMAND.ordered_adjustment(GRAPH)
    ok = mismatches == 0 and full == [frozenset(CONFOUNDERS)] and reduced == ["O", "OV", "S", "SS", "SC"]
    record(4, ok, f"{100 - mismatches}/100 random DAGs match the exhaustive oracle; default graph "
                  f"{{{','.join(n for n in GRAPH.names if n in full[0])}}} -> {{{','.join(reduced)}}} with DO constant")
    assert ok


def test_criterion_5_refutation_behaviour(known_effect_runs):
    _, designs, _ = known_effect_runs
    dm = designs[0]
    cfg = EstimatorConfig(seed=0)
    original = {k: v.effect for k, v in estimate_all(dm, cfg).items()}
    placebo = {r.estimator: r for r in refute_placebo(dm, ESTIMATORS, cfg, 10, 0, original)}
    cc = {r.estimator: r for r in refute_random_common_cause(dm, ESTIMATORS, cfg, 0.02, 0, original)}
    sub = {r.estimator: r for r in refute_subset(dm, ESTIMATORS, cfg, 0.9, 10, 0, original)}
    cc0 = refute_random_common_cause(dm, ESTIMATORS, cfg, 0.0, 0, original)
    sub1 = refute_subset(dm, ESTIMATORS, cfg, 1.0, 1, 0, original)

    placebo_ok = all(abs(placebo[k].recomputed_effect) <= 0.05 for k in ESTIMATORS)
    exact_ok = all(r.delta_abs == 0.0 for r in cc0 + sub1)
    stable_ok = all(cc[k].delta_abs <= 0.05 and sub[k].delta_abs <= 0.05 for k in ("LDML", "FDML"))
    ok = placebo_ok and exact_ok and stable_ok
    detail = (
        "placebo |recomputed| " + ", ".join(f"{k} {abs(placebo[k].recomputed_effect):.3f} (delta {placebo[k].delta_abs:.3f})"
                                           for k in ESTIMATORS)
        + f"; strength 0 / fraction 1 delta exactly 0: {exact_ok}"
        + "; check-2/check-3 delta " + ", ".join(f"{k} {cc[k].delta_abs:.3f}/{sub[k].delta_abs:.3f}" for k in ESTIMATORS)
        + " (limit 0.05 for LDML, FDML; FDRL reported only)"
    )
    record(5, ok, detail)
    assert ok


def test_criterion_6_interpretation_recovery():
    hits = negative = 0
    for s in SEEDS:
        cfg = preset("dsv", 300, noise_seed=s, link="linear", effect=Step(0.003, -0.2, 0.2), volume_jitter=0.3)
        table, truth = generate(cfg)
        dm = encode(table, ESTIMAND)
        cate = truth.per_sample_cate + 0.1 * np.random.default_rng([s, 1]).standard_normal(dm.n)
        tree = fit_cate_tree(dm.x, cate, 2, dm.x_names)
        root = tree.root
        hits += root.feature == "object_volume" and abs(root.threshold - 0.003) <= 0.0005
        negative += not root.is_leaf and tree.nodes[root.left].color.direction == "negative"
    ok = hits >= 15 and negative == 20
    record(6, ok, f"root split on object_volume within 0.0005 of 0.003 in {hits}/20 (need >= 15); "
                  f"small-volume side negative in {negative}/20")
    assert ok


def test_criterion_7_simpson_frequency():
    rate = simulate_reversal_rate(100_000, seed=0)
    ok = abs(rate - 0.0167) <= 0.005
    record(7, ok, f"reversal rate {rate:.4f} over 1e5 tables (target 0.0167 +/- 0.005)")
    assert ok


def test_criterion_8_median_split():
    rng = np.random.default_rng(8)
    worst = 0
    for _ in range(1000):
        d = rng.permutation(rng.uniform(0.3, 1.2, int(rng.integers(2, 500))))
        s = median_split(d)
        worst = max(worst, abs(s.n_close - s.n_far))
    s137 = median_split(rng.uniform(0.56, 0.85, 137))
    ok = worst <= 1 and (s137.n_close, s137.n_far) == (69, 68)
    record(8, ok, f"max |n_close - n_far| = {worst} over 1000 vectors; 137 values -> {s137.n_close}/{s137.n_far}")
    assert ok


def test_criterion_9_determinism(tmp_path):
    raw = json.loads((ROOT / "configs" / "dsv_quick.json").read_text())
    raw["data"] = str(ROOT / "data" / "dsv_synthetic.csv")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(raw))
    codes = [cli_main(["run", "--config", str(cfg), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    stripped = [
        b"\n".join(line for line in (tmp_path / d / "report.json").read_bytes().split(b"\n")
                   if not line.lstrip().startswith(b'"generated_at"'))
        for d in ("a", "b")
    ]
    same = stripped[0] == stripped[1] and len(stripped[0]) > 0
    elapsed = time.perf_counter() - SUITE_START
    ok = codes == [0, 0] and same and elapsed <= 900
    record(9, ok, f"two runs byte-identical apart from the timestamp: {same}; "
                  f"acceptance suite {elapsed:.0f}s (limit 900s)")
    assert ok

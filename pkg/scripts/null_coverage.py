"""Null-effect validation: how often does each 90% interval contain zero?

Randomized treatment with no effect on the Ds-v preset. With the default
20 seeds this is the small-sample check reported next to the source table;
with a few hundred seeds it is a calibration study of the intervals.
"""

from __future__ import annotations

import argparse
import time

import numpy as np
from scipy.stats import binomtest

from graspcause.effects import ESTIMATORS, EstimatorConfig, estimate_all
from graspcause.synth import generate, preset

from _common import design, dump, parse_seeds


def run(seeds, n=137):
    rows = []
    for s in seeds:
        table, _ = generate(preset("dsv", n, noise_seed=s))
        res = estimate_all(design(table), EstimatorConfig(seed=s))
        rows.append({k: {"effect": v.effect, "ci_low": v.ci_low, "ci_high": v.ci_high, "covers": v.covers(0.0)}
                     for k, v in res.items()})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="0:20")
    ap.add_argument("--n", type=int, default=137)
    ap.add_argument("--json", help="write per-seed rows here")
    args = ap.parse_args()
    seeds = parse_seeds(args.seeds)
    t0 = time.perf_counter()
    rows = run(seeds, args.n)
    elapsed = time.perf_counter() - t0
    print(f"{len(seeds)} seeds, n={args.n}, {elapsed:.0f}s")
    print(f"{'estimator':<10}{'covers 0':>10}{'rate':>8}{'95% CI of rate':>18}{'mean effect':>13}{'mean width':>12}")
    summary = {}
    for k in ESTIMATORS:
        hits = sum(r[k]["covers"] for r in rows)
        ci = binomtest(hits, len(rows), 0.9).proportion_ci(0.95)
        eff = np.mean([r[k]["effect"] for r in rows])
        width = np.mean([r[k]["ci_high"] - r[k]["ci_low"] for r in rows])
        summary[k] = {"hits": hits, "rate": hits / len(rows), "rate_ci": [ci.low, ci.high],
                      "mean_effect": eff, "mean_width": width}
        print(f"{k:<10}{hits:>6}/{len(rows):<3}{hits / len(rows):>8.3f}   [{ci.low:.3f}, {ci.high:.3f}]"
              f"{eff:>13.4f}{width:>12.3f}")
    dump(args.json, {"seeds": seeds, "n": args.n, "summary": summary, "rows": rows})


if __name__ == "__main__":
    main()

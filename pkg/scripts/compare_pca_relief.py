#!/usr/bin/env python3
"""Compare PCA against RELIEF ranking as the reduction step.

Runs the same 5x2 cross-validation twice on one synthetic recording set and
applies the paired signed-rank test to the ten per-fold accuracies. Scaled
down by default (fewer trials, smaller RELIEF sample count) so it finishes
in a few minutes; raise --trials-per-class and --relief-m for a longer run.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from emgrasp.crossval import (
    ClassifierConfig,
    PipelineConfig,
    compute_feature_cache,
    five_by_two_cv,
    wilcoxon_signed_rank,
)
from emgrasp.dataio import SynthConfig, generate_synthetic


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--synth-seed", type=int, default=7)
    parser.add_argument("--cv-seed", type=int, default=3)
    parser.add_argument("--trials-per-class", type=int, default=10)
    parser.add_argument("--relief-m", type=int, default=400)
    parser.add_argument("--grid", type=int, nargs="+", default=[8, 24, 48, 90])
    parser.add_argument("--alpha", type=float, default=0.05)
    args = parser.parse_args()

    trials = generate_synthetic(
        SynthConfig(seed=args.synth_seed, trials_per_class=args.trials_per_class)
    )
    base = dict(
        schema_id="part_a",
        classifier=ClassifierConfig(kind="ldc"),
        seed=args.cv_seed,
        grid=tuple(args.grid),
        relief_m=args.relief_m,
    )
    cache = compute_feature_cache(trials, PipelineConfig(reduction="pca", **base))

    results = {}
    for reduction in ("pca", "relief"):
        t0 = time.perf_counter()
        report = five_by_two_cv(trials, PipelineConfig(reduction=reduction, **base), cache=cache)
        results[reduction] = report
        print(
            f"{reduction:>6}: overall {report.overall_accuracy:.2f}%  "
            f"folds {[round(f.accuracy, 1) for f in report.fold_results]}  "
            f"({time.perf_counter() - t0:.0f}s)"
        )

    a = np.array([f.accuracy for f in results["pca"].fold_results])
    b = np.array([f.accuracy for f in results["relief"].fold_results])
    test = wilcoxon_signed_rank(a, b, alpha=args.alpha)
    if test.reject is None:
        print("signed-rank test: no decision (all paired differences are zero)")
    else:
        verdict = "differ" if test.reject else "do not differ"
        print(
            f"signed-rank test: W={test.statistic:.1f} over n={test.n} pairs, "
            f"p={test.p_value:.4f} -> the two reductions {verdict} at alpha={args.alpha}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())

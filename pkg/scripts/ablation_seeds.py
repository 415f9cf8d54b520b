"""Ablation grid repeated over several seeds; prints mean test accuracy per variant.

    python scripts/ablation_seeds.py --seeds 10 --out ablation.csv
"""

import argparse
import statistics
from collections import defaultdict

from sdp_sim.core import TrainingConfig
from sdp_sim.harness import emit_report, run_ablation_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--sigma0", type=float, default=1.0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    results = []
    for seed in range(args.seeds):
        results += run_ablation_grid(TrainingConfig(seed=seed, sigma0=args.sigma0))

    by_variant = defaultdict(list)
    for r in results:
        by_variant[r.variant].append(r.final_test_accuracy)
    print(f"{'variant':16s} {'mean test acc':>14s} {'stdev':>8s}")
    for variant, accs in by_variant.items():
        sd = statistics.stdev(accs) if len(accs) > 1 else 0.0
        print(f"{variant:16s} {statistics.mean(accs):14.4f} {sd:8.4f}")
    if args.out:
        emit_report(results, "csv", args.out)


if __name__ == "__main__":
    main()

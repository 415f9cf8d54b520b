"""Empirical gradient sensitivity of the trained model vs the clipping bound.

The estimate is a max over sampled adjacent pairs, so it is a lower bound on
the true sensitivity; the mechanism itself relies on ``clip_norm``.
"""

import argparse

from sdp_sim.core import ModelParams, SeededRng, TrainingConfig, generate_synthetic_dataset
from sdp_sim.harness import run_experiment
from sdp_sim.mechanism import estimate_sensitivity


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-pairs", type=int, default=2000)
    ap.add_argument("--n", type=int, default=300)
    args = ap.parse_args()

    cfg = TrainingConfig(n_samples=args.n, batch_size=32)
    data = generate_synthetic_dataset(cfg.n_features, cfg.n_samples, cfg.separation, SeededRng(cfg.seed).derive(2))
    trained = ModelParams.from_vector(run_experiment(cfg).final_params)
    for label, params in [("init", ModelParams.zeros(cfg.n_features)), ("trained", trained)]:
        for mode in ("remove_one", "replace_one"):
            est = estimate_sensitivity(params, data, mode, SeededRng(1), args.max_pairs)
            print(f"{label:8s} {mode:12s} S={est.value:.6f} over {est.pairs_examined} pairs (clip_norm={cfg.clip_norm})")


if __name__ == "__main__":
    main()

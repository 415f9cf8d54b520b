"""Final accuracy and bytes sent as the base noise level and compression ratio vary."""

import argparse

from sdp_sim.core import TrainingConfig
from sdp_sim.harness import run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--sigmas", default="0,0.5,1,2,4")
    ap.add_argument("--ratios", default="0.3,0.7,1.0")
    args = ap.parse_args()

    print("sigma0,ratio,train_acc,test_acc,bytes_total")
    for sigma0 in map(float, args.sigmas.split(",")):
        for ratio in map(float, args.ratios.split(",")):
            cfg = TrainingConfig(seed=args.seed, sigma0=sigma0, compression_ratio=ratio)
            r = run_experiment(cfg)
            print(f"{sigma0:g},{ratio:g},{r.final_train_accuracy:.4f},{r.final_test_accuracy:.4f},{r.bytes_transmitted_total}")


if __name__ == "__main__":
    main()

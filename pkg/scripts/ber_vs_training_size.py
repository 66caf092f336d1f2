"""Held-out BER as a function of training-set size, averaged over repetitions.

Each repetition draws one list of training DAGs and evaluates its prefixes,
so larger training sets contain the smaller ones.
"""

import argparse
import csv
import logging
from pathlib import Path

import numpy as np

from d2c.bench import run_experiment
from d2c.config import ExperimentConfig, ForestConfig, PairSetConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[400, 800, 3000])
    parser.add_argument("--reps", type=int, default=10)
    parser.add_argument("--dep-type", default="linear")
    parser.add_argument("--test-dags", type=int, default=50)
    parser.add_argument("--trees", type=int, default=500)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default="results/ber_vs_training_size.csv")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    per = 8
    bers = {s: [] for s in args.sizes}
    for seed in range(args.reps):
        cfg = ExperimentConfig(
            train=PairSetConfig(n_dags=min(args.sizes) // per, dep_type=args.dep_type),
            test=PairSetConfig(n_dags=args.test_dags, dep_type=args.dep_type, neg_per_dag=6),
            forest=ForestConfig(n_trees=args.trees),
            training_sizes=args.sizes,
            seed=seed,
        )
        for row in run_experiment(cfg, n_jobs=args.threads).report.curve:
            bers[row["train_pairs"]].append(row["ber"])
        logging.info("rep %d done", seed)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["train_pairs", "mean_ber", "sd_ber", "reps"])
        for s in args.sizes:
            v = np.array(bers[s])
            w.writerow([s, v.mean(), v.std(ddof=1) if len(v) > 1 else 0.0, len(v)])
    print(out)


if __name__ == "__main__":
    main()

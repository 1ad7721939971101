"""Rank vs uniform price quantization, and the effect of the number of levels.

Prints level occupancy on a log-normal catalog, then trains PUP on synthetic
data quantized both ways at several level counts.
"""

import argparse

import numpy as np

from pup.dataset import build_dataset, quantize_catalog
from pup.evaluation import evaluate
from pup.synthetic import generate_world
from pup.training import TrainConfig, train


def occupancy(prices, levels, mode):
    counts = np.bincount(quantize_catalog(prices, np.zeros(len(prices), int), levels, mode), minlength=levels)
    return counts, counts.max() / max(counts.min(), 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[2, 5, 10, 20])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--epochs", type=int, default=100)
    args = ap.parse_args()

    prices = np.random.default_rng(args.seed).lognormal(4.0, 1.0, size=2000)
    for mode in ("uniform", "rank"):
        counts, ratio = occupancy(prices, 10, mode)
        print(f"{mode:<8} occupancy {counts.tolist()}  max/min {ratio:.1f}")

    world = generate_world(200, 500, 5, 10, seed=42)
    for levels in args.levels:
        for mode in ("uniform", "rank"):
            ds = build_dataset(world.interactions, world.catalog, levels=levels, quantizer=mode)
            model = train(ds, TrainConfig(seed=args.seed, epochs=args.epochs)).model
            rep = evaluate(model, ds, (50,))
            print(f"levels {levels:>3}  {mode:<8} recall@50 {rep.recall[50]:.4f}  ndcg@50 {rep.ndcg[50]:.4f}")


if __name__ == "__main__":
    main()

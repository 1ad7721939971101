"""Sweep the global/category embedding split at a fixed total dimension."""

import argparse

from pup.evaluation import evaluate
from pup.synthetic import generate_synthetic_dataset
from pup.training import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--total-dim", type=int, default=64)
    ap.add_argument("--category-dims", type=int, nargs="+", default=[8, 16, 24, 32])
    ap.add_argument("--alpha", type=float, nargs="+", default=[1.0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--epochs", type=int, default=100)
    args = ap.parse_args()

    ds = generate_synthetic_dataset(200, 500, 5, 10, seed=42)
    for d_c in args.category_dims:
        for alpha in args.alpha:
            cfg = TrainConfig(
                total_dim=args.total_dim,
                dim_split=(args.total_dim - d_c, d_c),
                alpha=alpha,
                seed=args.seed,
                epochs=args.epochs,
            )
            rep = evaluate(train(ds, cfg).model, ds, (50,))
            print(f"split {args.total_dim - d_c}/{d_c}  alpha {alpha:g}  recall@50 {rep.recall[50]:.4f}  ndcg@50 {rep.ndcg[50]:.4f}")


if __name__ == "__main__":
    main()

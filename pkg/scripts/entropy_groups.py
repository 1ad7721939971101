"""Compare models on price-consistent vs price-inconsistent users.

Users are split by the entropy of their per-category willingness-to-pay levels.
"""

import argparse

import numpy as np

from pup.baselines import fit_variant
from pup.dataset import cwtp_profile
from pup.evaluation import evaluate_by_entropy_group
from pup.synthetic import generate_synthetic_dataset
from pup.training import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--threshold", type=float, default=None, help="default: median entropy")
    ap.add_argument("--variants", nargs="+", default=["pup", "bprmf", "fm", "itempop"])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--epochs", type=int, default=200)
    args = ap.parse_args()

    ds = generate_synthetic_dataset(200, 500, 5, 10, seed=42)
    entropies = np.array(list(cwtp_profile(ds).entropy.values()))
    threshold = float(np.median(entropies)) if args.threshold is None else args.threshold
    print(f"entropy threshold {threshold:.3f} over {len(entropies)} users")
    for variant in args.variants:
        model = fit_variant(variant, ds, TrainConfig(seed=args.seed, epochs=args.epochs)).model
        cons, incons = evaluate_by_entropy_group(model, ds, threshold, ks=(50,))
        print(
            f"{variant:<10} consistent recall@50 {cons.recall[50]:.4f} (n={cons.users_evaluated})"
            f"  inconsistent recall@50 {incons.recall[50]:.4f} (n={incons.users_evaluated})"
        )


if __name__ == "__main__":
    main()

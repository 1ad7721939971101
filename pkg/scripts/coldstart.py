"""Cold-start category recommendation (CIR and UCIR pools) for several models."""

import argparse

from pup.baselines import fit_variant
from pup.evaluation import evaluate
from pup.synthetic import generate_synthetic_dataset
from pup.training import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--variants", nargs="+", default=["pup", "pup-minus-price", "bprmf", "fm", "itempop"])
    ap.add_argument("--k", type=int, nargs="+", default=[10, 50])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--epochs", type=int, default=200)
    args = ap.parse_args()

    # more categories than preferred ones so test purchases reach unexplored categories
    ds = generate_synthetic_dataset(300, 600, 12, 10, seed=42, max_preferred=6)
    for variant in args.variants:
        model = fit_variant(variant, ds, TrainConfig(seed=args.seed, epochs=args.epochs)).model
        for protocol in ("cir", "ucir"):
            rep = evaluate(model, ds, args.k, protocol=protocol)
            cells = "  ".join(f"recall@{k} {rep.recall[k]:.4f} ndcg@{k} {rep.ndcg[k]:.4f}" for k in rep.ks)
            print(f"{variant:<16} {protocol:<5} users {rep.users_evaluated:>4}  {cells}")


if __name__ == "__main__":
    main()

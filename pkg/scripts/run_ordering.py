"""Recall@K / NDCG@K of every model variant on the planted-band synthetic data.

    python3 scripts/run_ordering.py --seeds 1 2 3 4 5 --out runs/ordering.jsonl
"""

import argparse
import json
import time

from pup.baselines import VARIANTS, fit_variant
from pup.evaluation import evaluate
from pup.synthetic import generate_synthetic_dataset
from pup.training import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--variants", nargs="+", default=list(VARIANTS), choices=VARIANTS)
    ap.add_argument("--data-seed", type=int, default=42)
    ap.add_argument("--users", type=int, default=200)
    ap.add_argument("--items", type=int, default=500)
    ap.add_argument("--categories", type=int, default=5)
    ap.add_argument("--levels", type=int, default=10)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--k", type=int, nargs="+", default=[50, 100])
    ap.add_argument("--out", default=None, help="optional JSON-lines output")
    args = ap.parse_args()

    ds = generate_synthetic_dataset(args.users, args.items, args.categories, args.levels, seed=args.data_seed)
    rows = []
    for seed in args.seeds:
        cfg = TrainConfig(seed=seed, epochs=args.epochs)
        for variant in args.variants:
            t0 = time.perf_counter()
            result = fit_variant(variant, ds, cfg)
            rep = evaluate(result.model, ds, args.k)
            row = {"seed": seed, "variant": variant, "seconds": round(time.perf_counter() - t0, 2)}
            for k in rep.ks:
                row[f"recall@{k}"] = rep.recall[k]
                row[f"ndcg@{k}"] = rep.ndcg[k]
            rows.append(row)
            print(f"seed {seed}  {variant:<20} " + "  ".join(f"{key} {row[key]:.4f}" for key in row if "@" in key))
    if args.out:
        with open(args.out, "w") as fh:
            fh.writelines(json.dumps(r) + "\n" for r in rows)


if __name__ == "__main__":
    main()

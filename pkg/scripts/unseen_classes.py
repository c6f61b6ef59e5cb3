"""Hold out half of each leaf family at training time and compare seen against unseen test examples.

Unseen examples are labelled with their nearest retained ancestor, so the
best achievable prediction for them is an internal node.

    python scripts/unseen_classes.py --method cond_softmax --loss cond_softmax_nll
"""
import argparse

import numpy as np

from hierclass.cli import build_report, drop_half_leaves
from hierclass.hierarchy import induced_subtree, subtree_projection
from hierclass.losses import make_loss
from hierclass.metrics import MetricKind
from hierclass.train import Dataset, SyntheticSpec, TrainConfig, generate_synthetic, train_linear

KEYS = ("AP", "AC", "R@90C", "F1_majority", "F1_leaf")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--method", default="cond_softmax")
    ap.add_argument("--loss", default="cond_softmax_nll")
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--lr", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    h, train, test = generate_synthetic(SyntheticSpec(depth=3, branching=(2, 4), seed=args.seed))
    keep = drop_half_leaves(h, np.random.default_rng(args.seed))
    h_sub = induced_subtree(h, keep)
    proj = subtree_projection(h, h_sub)
    seen_train = np.isin(train.labels, keep)
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    x, y = train.features[seen_train], proj[train.labels[seen_train]]
    model = train_linear(h_sub, Dataset(x, y), args.method, make_loss(args.loss), cfg)

    p = model.likelihoods(test.features)
    labels = proj[test.labels]
    seen = np.isin(test.labels, keep)
    print(f"kept {len(keep)}/{h.num_leaves} leaves; test seen={seen.sum()} unseen={(~seen).sum()}")
    print(f"{'split':<10}" + "".join(f"{k:>12}" for k in KEYS))
    for name, sel in (("all", np.ones_like(seen)), ("seen", seen), ("unseen", ~seen)):
        _, s = build_report(h_sub, labels[sel], p[sel], [MetricKind.CORRECT], 0.0, args.method)
        print(f"{name:<10}" + "".join(f"{s[k]:>12.4f}" for k in KEYS))


if __name__ == "__main__":
    main()

"""Train several (method, loss) pairs on one synthetic dataset and tabulate curve summaries.

    python scripts/compare_methods.py --epochs 20 --seed 0
"""
import argparse

from hierclass.cli import build_report
from hierclass.losses import make_loss
from hierclass.metrics import MetricKind
from hierclass.train import SyntheticSpec, TrainConfig, generate_synthetic, train_linear

PAIRS = [
    ("flat_softmax", "flat_nll", {}),
    ("flat_softmax", "hxe", {"alpha": 0.5}),
    ("multilabel_sigmoid", "multilabel_focal", {}),
    ("cond_softmax", "cond_softmax_nll", {}),
    ("cond_sigmoid", "cond_sigmoid_bce", {}),
    ("deeprtc", "deeprtc", {"p_cut": 0.2}),
    ("exclusive_softmax", "soft_max_descendant", {}),
    ("exclusive_softmax", "soft_max_margin", {"alpha": 5.0}),
]
KEYS = ("AP", "AC", "R@90C", "R@95C", "F1_majority", "F1_leaf")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--lr", type=float, default=0.01)
    ap.add_argument("--depth", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    h, train, test = generate_synthetic(SyntheticSpec(depth=args.depth, branching=(2, 4), seed=args.seed))
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    print(f"|Y|={h.num_nodes} |L|={h.num_leaves} train={len(train)} test={len(test)}")
    print(f"{'method':<20}{'loss':<22}" + "".join(f"{k:>12}" for k in KEYS))
    for method, loss_name, params in PAIRS:
        model = train_linear(h, train, method, make_loss(loss_name, **params), cfg)
        _, s = build_report(h, test.labels, model.likelihoods(test.features), [MetricKind.CORRECT], 0.0, method)
        print(f"{method:<20}{loss_name:<22}" + "".join(f"{s[k]:>12.4f}" for k in KEYS))


if __name__ == "__main__":
    main()

"""Accuracy at each depth for a full-depth flat softmax against models trained on truncated trees.

    python scripts/level_table.py --depth 3
"""
import argparse

from hierclass.losses import FlatNLL
from hierclass.train import (SyntheticSpec, TrainConfig, generate_synthetic, level_accuracy,
                             train_level_truncated, train_linear)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--lr", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    h, train, test = generate_synthetic(SyntheticSpec(depth=args.depth, branching=(2, 4), seed=args.seed))
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    full = train_linear(h, train, "flat_softmax", FlatNLL(), cfg)
    print(f"{'trained at':<12}" + "".join(f"{'level ' + str(k):>10}" for k in range(1, h.max_depth + 1)))
    for level in range(1, h.max_depth):
        model = train_level_truncated(h, train, level, cfg)
        accs = [level_accuracy(model, h, test, k) for k in range(1, level + 1)]
        print(f"{'depth ' + str(level):<12}" + "".join(f"{a:>10.4f}" for a in accs))
    accs = [level_accuracy(full, h, test, k) for k in range(1, h.max_depth + 1)]
    print(f"{'full':<12}" + "".join(f"{a:>10.4f}" for a in accs))


if __name__ == "__main__":
    main()

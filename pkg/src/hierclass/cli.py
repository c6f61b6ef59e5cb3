"""Command-line interface.

    hierclass validate --hierarchy tree.csv
    hierclass eval     --hierarchy tree.csv --labels y.txt --scores theta.csv --method flat_softmax --output out/
    hierclass infer    --hierarchy tree.csv --scores theta.csv --method flat_softmax --rule majority
    hierclass synth    --output data/
    hierclass train    --data data/ --method cond_softmax --loss cond_softmax_nll --output run/
    hierclass plot     --report run/ --output curve.svg

Exit codes: 0 ok, 1 usage, 2 data or validation error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .curves import construct_dataset_curves, f1_at_rule, pair_curve, summary_metrics
from .hierarchy import HierarchyError, induced_subtree, subtree_projection
from .inference import InferenceSpec, Rule
from .likelihoods import Method, likelihood, param_dim
from .losses import LOSSES, make_loss
from .metrics import MetricKind
from .train import (Dataset, SyntheticSpec, TrainConfig, train_linear, generate_synthetic)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_METRICS = "correct,exact,precision,recall"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse(enum_cls, name):
    """Enum lookup whose failure is a usage error rather than a data error."""
    try:
        return enum_cls.parse(name)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _metric_list(text: str) -> list:
    kinds = [_parse(MetricKind, t.strip()) for t in text.split(",") if t.strip()]
    if not kinds:
        raise UsageError("--metrics must name at least one metric")
    return list(dict.fromkeys(kinds))


def _likelihoods(h, method: str, scores: np.ndarray) -> tuple:
    """Per-node likelihoods from a score matrix, plus the resolved method name."""
    if method == "raw":
        if scores.shape[1] != h.num_nodes:
            raise ValueError(f"raw likelihoods need {h.num_nodes} columns, got {scores.shape[1]}")
        return scores, "raw"
    m = _parse(Method, method)
    dim = param_dim(h, m)
    if scores.shape[1] != dim:
        raise ValueError(f"method {m.value} needs {dim} score columns, got {scores.shape[1]}")
    p = likelihood(h, m, scores)
    if not np.isfinite(p).all():
        raise FloatingPointError("likelihoods contain non-finite values")
    return p, m.value


def build_report(h, labels, p, kinds, tau_min: float, method: str, extra_rules=(), aggregate="harmonic_of_means"):
    """Curves for ``kinds`` and the summary dictionary written next to them."""
    needed = list(dict.fromkeys(list(kinds) + [MetricKind.CORRECT, MetricKind.PRECISION, MetricKind.RECALL]))
    all_curves = construct_dataset_curves(h, labels, p, needed, tau_min)
    summary = summary_metrics(all_curves[MetricKind.PRECISION], all_curves[MetricKind.RECALL],
                              correct=all_curves[MetricKind.CORRECT])
    summary["F1_majority"] = f1_at_rule(h, labels, p, InferenceSpec(Rule.MAJORITY), aggregate)
    summary["F1_leaf"] = f1_at_rule(h, labels, p, InferenceSpec(Rule.LEAF), aggregate)
    for spec in extra_rules:
        summary[f"F1_{spec.rule.value}"] = f1_at_rule(h, labels, p, spec, aggregate)
    summary["n_examples"] = int(len(labels))
    summary["method"] = method
    summary["metric_names"] = [k.value for k in kinds]
    summary["tau_min"] = float(tau_min)
    return {k: all_curves[k] for k in kinds}, summary


def _rule_spec(args) -> InferenceSpec:
    return InferenceSpec(_parse(Rule, args.rule), tau=args.tau, zeta=args.zeta, lam=args.lam, over=args.over)


def cmd_validate(args) -> int:
    h = io.read_hierarchy(args.hierarchy, allow_unary_chains=args.allow_unary)
    info = h.info
    print(f"|Y|={h.num_nodes} |L|={h.num_leaves} depth={h.max_depth}")
    print(f"info range [{info.min():.6g}, {info.max():.6g}] nats")
    return EXIT_OK


def cmd_eval(args) -> int:
    h = io.read_hierarchy(args.hierarchy, allow_unary_chains=args.allow_unary)
    labels = io.read_labels(args.labels, h)
    scores = io.read_matrix(args.scores)
    if len(scores) != len(labels):
        raise ValueError(f"{len(labels)} labels but {len(scores)} score rows")
    p, method = _likelihoods(h, args.method, scores)
    extra = [InferenceSpec(_parse(Rule, r), tau=args.tau, zeta=args.zeta, lam=args.lam, over=args.over)
             for r in (args.rule or [])]
    curves, summary = build_report(h, labels, p, _metric_list(args.metrics), args.tau_min, method,
                                   extra, args.f1_aggregate)
    io.write_curve_report(args.output, curves, summary)
    print(json.dumps({k: summary[k] for k in ("AP", "AC", "R@90C", "R@95C", "F1_majority", "F1_leaf")}))
    return EXIT_OK


def cmd_infer(args) -> int:
    h = io.read_hierarchy(args.hierarchy, allow_unary_chains=args.allow_unary)
    p, _ = _likelihoods(h, args.method, io.read_matrix(args.scores))
    pred = np.atleast_1d(_rule_spec(args)(h, p))
    if args.output:
        io.write_labels(args.output, h, pred)
    else:
        sys.stdout.write("".join(h.names[int(v)] + "\n" for v in pred))
    return EXIT_OK


def _write_split(out: Path, prefix: str, h, data: Dataset, binary: bool):
    io.write_matrix(out / f"{prefix}_features.{'bin' if binary else 'csv'}", data.features, binary=binary)
    io.write_labels(out / f"{prefix}_labels.txt", h, data.labels)


def cmd_synth(args) -> int:
    spec = SyntheticSpec(depth=args.depth, branching=(args.branching_min, args.branching_max),
                         feature_dim=args.feature_dim, train_per_class=args.train_per_class,
                         test_per_class=args.test_per_class, sigma_tree=args.sigma_tree,
                         sigma_obs=args.sigma_obs, seed=args.seed)
    h, train, test = generate_synthetic(spec)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    io.write_hierarchy(out / "hierarchy.csv", h)
    _write_split(out, "train", h, train, args.binary)
    _write_split(out, "test", h, test, args.binary)
    spec_d = asdict(spec)
    spec_d["branching"] = list(spec.branching)
    (out / "spec.json").write_text(json.dumps(spec_d, indent=2) + "\n")
    print(f"|Y|={h.num_nodes} |L|={h.num_leaves} train={len(train)} test={len(test)}")
    return EXIT_OK


def _read_split(data_dir: Path, prefix: str, h) -> Dataset:
    path = data_dir / f"{prefix}_features.csv"
    if not path.exists():
        path = data_dir / f"{prefix}_features.bin"
    return Dataset(features=io.read_matrix(path), labels=io.read_labels(data_dir / f"{prefix}_labels.txt", h))


def drop_half_leaves(h, rng) -> np.ndarray:
    """Leaves to keep: in every sibling group of leaves, drop half (rounded down)."""
    keep = []
    for v in range(h.num_nodes):
        kids = [c for c in h.children[v] if h.leaf_mask[c]]
        if kids:
            kids = rng.permutation(kids)
            keep.extend(kids[len(kids) // 2:].tolist())
    return np.sort(np.array(keep, dtype=np.intp))


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    h = io.read_hierarchy(data_dir / "hierarchy.csv")
    train = _read_split(data_dir, "train", h)
    test = _read_split(data_dir, "test", h)
    loss_params = {k: v for k, v in (("alpha", args.alpha), ("gamma", args.gamma), ("p_cut", args.p_cut),
                                     ("num_samples", args.num_samples)) if v is not None}
    loss_cls = LOSSES.get(args.loss)
    if loss_cls is None:
        raise UsageError(f"unknown loss {args.loss!r}; valid: {', '.join(LOSSES)}")
    accepted = set(loss_cls.__dataclass_fields__)
    stray = set(loss_params) - accepted
    if stray:
        raise UsageError(f"loss {args.loss} does not take {', '.join('--' + s.replace('_', '-') for s in sorted(stray))}")
    if "p_cut" in accepted and "seed" in accepted:
        loss_params["seed"] = args.seed
    loss = make_loss(args.loss, **loss_params)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
                      momentum=args.momentum, weight_decay=args.weight_decay,
                      cosine_schedule=not args.no_cosine, seed=args.seed)
    method = _parse(Method, args.method)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    kinds = _metric_list(args.metrics)

    if args.drop_leaves:
        keep = drop_half_leaves(h, np.random.default_rng(args.seed))
        h_sub = induced_subtree(h, keep)
        proj = subtree_projection(h, h_sub)
        seen = np.isin(train.labels, keep)
        model = train_linear(h_sub, Dataset(train.features[seen], train.labels[seen]), method, loss, cfg,
                             labels=proj[train.labels[seen]])
        h_eval, test_labels = h_sub, proj[test.labels]
        is_seen = np.isin(test.labels, keep)
    else:
        model = train_linear(h, train, method, loss, cfg)
        h_eval, test_labels = h, test.labels
        is_seen = None

    theta = model.scores(test.features)
    ext = "bin" if args.binary else "csv"
    io.write_matrix(out / f"test_scores.{ext}", theta, binary=args.binary)
    io.write_labels(out / "test_labels.txt", h_eval, test_labels)
    io.write_hierarchy(out / "hierarchy.csv", h_eval)
    p = likelihood(h_eval, method, theta)
    curves, summary = build_report(h_eval, test_labels, p, kinds, args.tau_min, method.value)
    summary["loss"] = loss.name
    summary["train_loss_history"] = [float(v) for v in model.history]
    io.write_curve_report(out, curves, summary)
    if is_seen is not None:
        for name, sel in (("seen", is_seen), ("unseen", ~is_seen)):
            if sel.any():
                c, s = build_report(h_eval, test_labels[sel], p[sel], kinds, args.tau_min, method.value)
                io.write_curve_report(out / name, c, s)
    print(f"loss {model.history[0]:.4f} -> {model.history[-1]:.4f}  AP={summary['AP']:.4f} AC={summary['AC']:.4f}")
    return EXIT_OK


def cmd_plot(args) -> int:
    if len(args.report) > 4:
        raise UsageError("at most four reports per plot")
    if args.label and len(args.label) != len(args.report):
        raise UsageError("give one --label per --report")
    series = []
    for i, path in enumerate(args.report):
        curves, summary = io.read_curve_report(path)
        for m in (args.x, args.y):
            if m not in curves:
                raise ValueError(f"{path}: no {m!r} column (have {', '.join(curves)})")
        label = args.label[i] if args.label else summary.get("method", Path(path).name)
        series.append((label, pair_curve(curves[args.x], curves[args.y])))
    Path(args.output).write_text(io.render_svg(series, args.x, args.y), encoding="utf-8")
    return EXIT_OK


def _add_hierarchy(p):
    p.add_argument("--hierarchy", required=True, help="CSV with header name,parent")
    p.add_argument("--allow-unary", action="store_true", help="accept nodes with a single child")


def _add_rule_params(p):
    p.add_argument("--tau", type=float, default=0.5, help="confidence threshold")
    p.add_argument("--zeta", type=float, default=0.0, help="information threshold (nats)")
    p.add_argument("--lam", type=float, default=0.0, help="expected-information offset")
    p.add_argument("--over", choices=["all", "leaves"], default="all", help="CRM candidate set")


def make_parser() -> argparse.ArgumentParser:
    methods = ", ".join(m.value for m in Method)
    parser = _Parser(prog="hierclass", description="Hierarchical classification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a hierarchy file")
    _add_hierarchy(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", help="operating curves and summary metrics")
    _add_hierarchy(p)
    p.add_argument("--labels", required=True, help="one node name per line")
    p.add_argument("--scores", required=True, help="CSV or HSC1 binary score matrix")
    p.add_argument("--method", required=True, help=f"parametrisation ({methods}) or raw")
    p.add_argument("--metrics", default=DEFAULT_METRICS)
    p.add_argument("--tau-min", type=float, default=0.0)
    p.add_argument("--output", required=True, help="report directory")
    p.add_argument("--rule", action="append", help="extra rule to report F1 for (repeatable)")
    p.add_argument("--f1-aggregate", choices=["harmonic_of_means", "mean_of_harmonics"],
                   default="harmonic_of_means")
    _add_rule_params(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="predict one node per example")
    _add_hierarchy(p)
    p.add_argument("--scores", required=True)
    p.add_argument("--method", required=True, help=f"parametrisation ({methods}) or raw")
    p.add_argument("--rule", required=True, help=", ".join(r.value for r in Rule))
    p.add_argument("--output", help="predictions file (default: stdout)")
    _add_rule_params(p)
    p.set_defaults(func=cmd_infer)

    d = SyntheticSpec()
    p = sub.add_parser("synth", help="write a synthetic hierarchical dataset")
    p.add_argument("--output", required=True)
    p.add_argument("--depth", type=int, default=d.depth)
    p.add_argument("--branching-min", type=int, default=d.branching[0])
    p.add_argument("--branching-max", type=int, default=d.branching[1])
    p.add_argument("--feature-dim", type=int, default=d.feature_dim)
    p.add_argument("--train-per-class", type=int, default=d.train_per_class)
    p.add_argument("--test-per-class", type=int, default=d.test_per_class)
    p.add_argument("--sigma-tree", type=float, default=d.sigma_tree)
    p.add_argument("--sigma-obs", type=float, default=d.sigma_obs)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--binary", action="store_true", help="write features as HSC1 binary")
    p.set_defaults(func=cmd_synth)

    c = TrainConfig()
    p = sub.add_parser("train", help="fit a linear model and evaluate it on the test split")
    p.add_argument("--data", required=True, help="directory written by synth")
    p.add_argument("--method", required=True, help=methods)
    p.add_argument("--loss", required=True, help=", ".join(LOSSES))
    p.add_argument("--output", required=True)
    p.add_argument("--alpha", type=float, help="loss hyper-parameter (hxe, focal, margin)")
    p.add_argument("--gamma", type=float, help="focal exponent")
    p.add_argument("--p-cut", type=float, help="deeprtc truncation probability")
    p.add_argument("--num-samples", type=int, help="deeprtc cuts per example")
    p.add_argument("--epochs", type=int, default=c.epochs)
    p.add_argument("--batch-size", type=int, default=c.batch_size)
    p.add_argument("--lr", type=float, default=c.learning_rate)
    p.add_argument("--momentum", type=float, default=c.momentum)
    p.add_argument("--weight-decay", type=float, default=c.weight_decay)
    p.add_argument("--no-cosine", action="store_true", help="constant learning rate")
    p.add_argument("--seed", type=int, default=c.seed)
    p.add_argument("--metrics", default=DEFAULT_METRICS)
    p.add_argument("--tau-min", type=float, default=0.0)
    p.add_argument("--drop-leaves", action="store_true",
                   help="train without half of each leaf family, evaluate with projected labels")
    p.add_argument("--binary", action="store_true", help="write scores as HSC1 binary")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("plot", help="SVG of one or more curve reports")
    p.add_argument("--report", action="append", required=True, help="report directory or curves.csv")
    p.add_argument("--label", action="append")
    p.add_argument("--x", default="recall")
    p.add_argument("--y", default="correct")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"hierclass: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, ArithmeticError) as e:
        print(f"hierclass: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (HierarchyError, ValueError, KeyError, IndexError, OSError, UnicodeDecodeError) as e:
        print(f"hierclass: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

import hashlib
import json
import re
import subprocess
import sys

import numpy as np
import pytest

from hierclass import io
from hierclass.cli import main
from helpers import T1_EDGES, t1

REC = np.log(1.5) / np.log(3)


def run(*argv):
    return main([str(a) for a in argv])


def usage_code(*argv):
    with pytest.raises(SystemExit) as e:
        run(*argv)
    return e.value.code


@pytest.fixture
def t1_files(tmp_path):
    tree = tmp_path / "tree.csv"
    tree.write_text("name,parent\n" + "".join(f"{n},{p}\n" for n, p in T1_EDGES))
    (tmp_path / "y.txt").write_text("a1\n")
    io.write_matrix(tmp_path / "theta.csv", np.zeros((1, 3)))
    return tmp_path


def test_validate(t1_files, tmp_path, capsys):
    assert run("validate", "--hierarchy", t1_files / "tree.csv") == 0
    out = capsys.readouterr().out
    assert "|Y|=5 |L|=3 depth=2" in out
    cyc = tmp_path / "cycle.csv"
    cyc.write_text("name,parent\nroot,\na,b\nb,a\n")
    assert run("validate", "--hierarchy", cyc) == 2
    unary = tmp_path / "unary.csv"
    unary.write_text("name,parent\nroot,\na,root\nb,root\nc,a\n")
    assert run("validate", "--hierarchy", unary) == 2
    assert run("validate", "--hierarchy", unary, "--allow-unary") == 0
    bad = tmp_path / "noheader.csv"
    bad.write_text("root,\n")
    assert run("validate", "--hierarchy", bad) == 2
    assert "header" in capsys.readouterr().err


def eval_args(d, out, scores="theta.csv", method="flat_softmax", *extra):
    return ("eval", "--hierarchy", d / "tree.csv", "--labels", d / "y.txt", "--scores", d / scores,
            "--method", method, "--output", out, *extra)


def test_eval_hand_trace(t1_files, capsys):
    out = t1_files / "rep"
    assert run(*eval_args(t1_files, out)) == 0
    lines = (out / "curves.csv").read_text().splitlines()
    assert lines[0] == "threshold,correct,exact,precision,recall"
    assert len(lines) == 4
    curves, summary = io.read_curve_report(out)
    np.testing.assert_allclose(curves["correct"].levels, [1, 1, 0])
    np.testing.assert_allclose(curves["recall"].levels, [0, REC, 0], rtol=1e-12)
    assert summary["AC"] == pytest.approx(REC) and summary["AP"] == pytest.approx(REC)
    assert summary["R@90C"] == pytest.approx(REC)
    assert summary["F1_majority"] == pytest.approx(2 * REC / (1 + REC))
    assert summary["n_examples"] == 1 and summary["method"] == "flat_softmax"
    printed = json.loads(capsys.readouterr().out)
    assert printed["AC"] == pytest.approx(REC)


def test_report_round_trip(t1_files):
    out = t1_files / "rep"
    assert run(*eval_args(t1_files, out, "theta.csv", "flat_softmax", "--metrics", "correct,recall")) == 0
    curves, _ = io.read_curve_report(out / "curves.csv")
    io.write_curve_report(t1_files / "again", curves, json.loads((out / "summary.json").read_text()))
    assert (t1_files / "again" / "curves.csv").read_bytes() == (out / "curves.csv").read_bytes()


def test_binary_and_csv_reports_identical(tmp_path):
    rng = np.random.default_rng(0)
    h = t1()
    tree = tmp_path / "tree.csv"
    io.write_hierarchy(tree, h)
    labels = rng.choice(h.leaves, 40)
    io.write_labels(tmp_path / "y.txt", h, labels)
    theta = rng.normal(size=(40, 4)).astype(np.float32).astype(float)
    io.write_matrix(tmp_path / "s.csv", theta)
    io.write_matrix(tmp_path / "s.bin", theta)
    assert (tmp_path / "s.bin").read_bytes()[:4] == b"HSC1"
    for name in ("s.csv", "s.bin"):
        assert run("eval", "--hierarchy", tree, "--labels", tmp_path / "y.txt", "--scores", tmp_path / name,
                   "--method", "cond_softmax", "--output", tmp_path / name.replace(".", "_")) == 0
    for f in ("curves.csv", "summary.json"):
        assert (tmp_path / "s_csv" / f).read_bytes() == (tmp_path / "s_bin" / f).read_bytes()


def test_eval_errors(t1_files):
    io.write_matrix(t1_files / "p.csv", np.array([[1, .5, .5, .6, .6]]))
    out = t1_files / "bad"
    assert run(*eval_args(t1_files, out, "p.csv", "raw")) == 0
    assert run(*eval_args(t1_files, out, "p.csv", "raw", "--rule", "crm")) == 2
    assert run(*eval_args(t1_files, out, "theta.csv", "softmax")) == 1
    assert run(*eval_args(t1_files, out, "theta.csv", "cond_softmax")) == 2
    assert run(*eval_args(t1_files, out, "theta.csv", "flat_softmax", "--metrics", "f1")) == 1
    (t1_files / "y.txt").write_text("zzz\n")
    assert run(*eval_args(t1_files, out)) == 2
    assert usage_code("eval", "--hierarchy", t1_files / "tree.csv") == 1
    assert usage_code("frobnicate") == 1


def test_infer(t1_files, capsys):
    io.write_matrix(t1_files / "u.csv", np.zeros((3, 3)))
    base = ("infer", "--hierarchy", t1_files / "tree.csv", "--scores", t1_files / "u.csv",
            "--method", "flat_softmax", "--rule")
    assert run(*base, "majority") == 0
    assert capsys.readouterr().out == "a\na\na\n"
    assert run(*base, "leaf") == 0
    assert capsys.readouterr().out == "b\nb\nb\n"
    assert run(*base, "threshold", "--tau", 0.9) == 0
    assert capsys.readouterr().out == "root\nroot\nroot\n"
    assert run(*base, "info_threshold", "--zeta", 0.4, "--output", t1_files / "pred.txt") == 0
    assert (t1_files / "pred.txt").read_text() == "a\na\na\n"
    assert run(*base, "median") == 1


def digest(d):
    return {f.name: hashlib.sha256(f.read_bytes()).hexdigest() for f in sorted(d.iterdir())}


SYNTH = ("--depth", 2, "--branching-min", 2, "--branching-max", 3, "--feature-dim", 6,
         "--train-per-class", 20, "--test-per-class", 8, "--seed", 3)


def test_synth_train_plot(tmp_path, capsys):
    assert run("synth", "--output", tmp_path / "d1", *SYNTH) == 0
    assert run("synth", "--output", tmp_path / "d2", *SYNTH) == 0
    assert digest(tmp_path / "d1") == digest(tmp_path / "d2")
    assert set(digest(tmp_path / "d1")) == {"hierarchy.csv", "spec.json", "train_features.csv", "train_labels.txt",
                                             "test_features.csv", "test_labels.txt"}
    run_dir = tmp_path / "run"
    assert run("train", "--data", tmp_path / "d1", "--method", "cond_softmax", "--loss", "cond_softmax_nll",
               "--epochs", 3, "--lr", 0.05, "--output", run_dir) == 0
    summary = json.loads((run_dir / "summary.json").read_text())
    for k in ("AP", "AC", "R@90C", "R@95C", "F1_majority", "F1_leaf"):
        assert 0 <= summary[k] <= 1
    assert len(summary["train_loss_history"]) == 3
    # the written scores re-evaluate to the same report
    assert run("eval", "--hierarchy", run_dir / "hierarchy.csv", "--labels", run_dir / "test_labels.txt",
               "--scores", run_dir / "test_scores.csv", "--method", "cond_softmax", "--output", tmp_path / "re") == 0
    assert (tmp_path / "re" / "curves.csv").read_bytes() == (run_dir / "curves.csv").read_bytes()
    assert run("train", "--data", tmp_path / "d1", "--method", "flat_softmax", "--loss", "hxe", "--gamma", 1,
               "--epochs", 1, "--output", tmp_path / "x") == 1
    assert run("train", "--data", tmp_path / "d1", "--method", "flat_softmax", "--loss", "cond_softmax_nll",
               "--epochs", 1, "--output", tmp_path / "x") == 2
    svg = tmp_path / "c.svg"
    assert run("plot", "--report", run_dir, "--report", tmp_path / "re", "--label", "a", "--label", "b",
               "--output", svg) == 0
    assert svg.read_text().startswith("<svg")


def test_train_drop_leaves(tmp_path):
    assert run("synth", "--output", tmp_path / "d", *SYNTH) == 0
    out = tmp_path / "run"
    assert run("train", "--data", tmp_path / "d", "--method", "flat_softmax", "--loss", "flat_nll",
               "--epochs", 2, "--drop-leaves", "--output", out) == 0
    for sub in ("seen", "unseen"):
        assert (out / sub / "curves.csv").exists()
    seen = json.loads((out / "seen" / "summary.json").read_text())
    unseen = json.loads((out / "unseen" / "summary.json").read_text())
    total = json.loads((out / "summary.json").read_text())
    assert seen["n_examples"] + unseen["n_examples"] == total["n_examples"]


def test_plot_hand_trace(t1_files):
    out = t1_files / "rep"
    assert run(*eval_args(t1_files, out)) == 0
    svg = (t1_files / "hand.svg")
    assert run("plot", "--report", out, "--output", svg) == 0
    text = svg.read_text()
    steps = re.findall(r'<polyline class="step"[^>]*>', text)
    assert len(steps) == 3
    assert sum("stroke-dasharray" in s for s in steps) == 2
    assert run("plot", "--report", out, "--y", "f1", "--output", svg) == 2
    assert run("plot", *(["--report", out] * 5), "--output", svg) == 1


def test_module_entry_point(t1_files):
    r = subprocess.run([sys.executable, "-m", "hierclass", "validate", "--hierarchy", str(t1_files / "tree.csv")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "|L|=3" in r.stdout
    r = subprocess.run([sys.executable, "-m", "hierclass"], capture_output=True, text=True)
    assert r.returncode == 1

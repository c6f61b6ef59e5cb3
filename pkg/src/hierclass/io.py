"""File formats: hierarchy CSV, score matrices, label lists, curve reports, SVG plots.

Score matrices are either headerless CSV or a little-endian binary blob::

    b"HSC1" | rows:u32 | cols:u32 | rows*cols float32, row-major

Numbers are written with shortest round-trip formatting so that reading a
file back reproduces the in-memory values exactly.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .curves import Curve, PairedCurve, tabulate
from .hierarchy import Hierarchy, HierarchyError, build_hierarchy

MAGIC = b"HSC1"


def fmt(x) -> str:
    return repr(float(x))


def read_hierarchy(path, allow_unary_chains: bool = False) -> Hierarchy:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or [c.strip() for c in rows[0]] != ["name", "parent"]:
        raise HierarchyError(f"{path}: expected header 'name,parent'")
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise HierarchyError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        edges.append((row[0].strip(), row[1].strip()))
    return build_hierarchy(edges, allow_unary_chains=allow_unary_chains)


def write_hierarchy(path, h: Hierarchy):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["name", "parent"])
        for v in range(h.num_nodes):
            p = h.parent[v]
            w.writerow([h.names[v], "" if p < 0 else h.names[p]])


def read_matrix(path) -> np.ndarray:
    """Read a CSV or ``HSC1`` binary score file as a float64 ``(N, D)`` array."""
    data = Path(path).read_bytes()
    if data[:4] == MAGIC:
        if len(data) < 12:
            raise ValueError(f"{path}: truncated header")
        rows, cols = struct.unpack("<II", data[4:12])
        expect = 12 + 4 * rows * cols
        if len(data) != expect:
            raise ValueError(f"{path}: expected {expect} bytes for {rows}x{cols}, got {len(data)}")
        out = np.frombuffer(data, dtype="<f4", offset=12).reshape(rows, cols).astype(np.float64)
    else:
        text = data.decode("utf-8")
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty score file")
        try:
            out = np.array([[float(v) for v in ln.split(",")] for ln in lines], dtype=np.float64)
        except ValueError as e:
            raise ValueError(f"{path}: {e}") from None
    if not np.isfinite(out).all():
        raise ValueError(f"{path}: non-finite values")
    return out


def write_matrix(path, x, binary: bool | None = None):
    """Write ``x``; binary when ``binary`` is set or the suffix is ``.bin``."""
    x = np.atleast_2d(np.asarray(x))
    if binary is None:
        binary = Path(path).suffix == ".bin"
    if binary:
        rows, cols = x.shape
        body = np.ascontiguousarray(x, dtype="<f4").tobytes()
        Path(path).write_bytes(MAGIC + struct.pack("<II", rows, cols) + body)
    else:
        with open(path, "w", encoding="utf-8") as f:
            for row in x:
                f.write(",".join(fmt(v) for v in row) + "\n")


def read_labels(path, h: Hierarchy) -> np.ndarray:
    names = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    names = [n for n in names if n]
    out = np.empty(len(names), dtype=np.intp)
    for i, n in enumerate(names):
        if not h.has_name(n):
            raise ValueError(f"{path}:{i + 1}: unknown label {n!r}")
        out[i] = h.index(n)
    return out


def write_labels(path, h: Hierarchy, labels):
    with open(path, "w", encoding="utf-8") as f:
        for v in np.atleast_1d(labels):
            f.write(h.names[int(v)] + "\n")


def write_curve_report(out_dir, curves: dict, summary: dict):
    """``curves.csv`` (one row per constant piece, threshold descending) and ``summary.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [getattr(k, "value", str(k)) for k in curves]
    lower, vals = tabulate(curves.values())
    with open(out_dir / "curves.csv", "w", encoding="utf-8") as f:
        f.write(",".join(["threshold"] + names) + "\n")
        for j, tau in enumerate(lower):
            f.write(",".join([fmt(tau)] + [fmt(np.atleast_1d(v)[j]) for v in vals]) + "\n")
    with open(out_dir / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")


def read_curve_report(path) -> tuple:
    """Inverse of :func:`write_curve_report`: ``({metric: Curve}, summary)``."""
    path = Path(path)
    csv_path = path / "curves.csv" if path.is_dir() else path
    summary_path = csv_path.with_name("summary.json")
    summary = json.loads(summary_path.read_text()) if summary_path.exists() else {}
    lines = [ln for ln in csv_path.read_text(encoding="utf-8").splitlines() if ln]
    header = lines[0].split(",")
    if header[0] != "threshold":
        raise ValueError(f"{csv_path}: expected a 'threshold' column first")
    table = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    lower = table[:, 0]
    n = int(summary.get("n_examples", 0))
    curves = {}
    for j, name in enumerate(header[1:], start=1):
        col = table[:, j]
        curves[name] = Curve(base=float(col[0]), thresholds=lower[:-1].copy(), values=col[1:].copy(),
                             n=n, tau_min=float(lower[-1]), metric=name)
    return curves, summary


def _xy(v, lo, hi, size, flip=False):
    t = (v - lo) / (hi - lo) if hi > lo else 0.0
    return (1.0 - t) * size if flip else t * size


def render_svg(series, x_label: str, y_label: str, width: int = 480, height: int = 360) -> str:
    """Standalone SVG of one or more parametric curves.

    ``series`` is a list of ``(label, PairedCurve)`` with ``a`` on the x axis
    and ``b`` on the y axis. Each operating point is drawn as one step
    segment from the previous point (the first from recall zero); segments
    whose threshold is below 0.5 are dashed.
    """
    pad = 48
    pw, ph = width - 2 * pad, height - 2 * pad
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<g transform="translate({pad},{pad})">',
           f'<rect x="0" y="0" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
           f'<text x="{pw / 2}" y="{ph + 32}" text-anchor="middle" font-size="12">{x_label}</text>',
           f'<text x="-32" y="{ph / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 -32 {ph / 2})">{y_label}</text>']
    for si, (label, pc) in enumerate(series):
        color = colors[si % len(colors)]
        out.append(f'<g class="series" data-label="{label}" stroke="{color}" fill="none">')
        px, py = 0.0, float(pc.b[0]) if len(pc) else 0.0
        for x, y, tau in zip(pc.a, pc.b, pc.tau):
            pts = [(px, py), (float(x), py), (float(x), float(y))]
            coords = " ".join(f"{_xy(a, 0, 1, pw):.2f},{_xy(b, 0, 1, ph, flip=True):.2f}" for a, b in pts)
            dash = ' stroke-dasharray="4,3"' if tau < 0.5 else ""
            out.append(f'<polyline class="step" data-threshold="{fmt(tau)}" points="{coords}"{dash}/>')
            px, py = float(x), float(y)
        out.append("</g>")
        out.append(f'<text x="{pw - 4}" y="{14 + 14 * si}" text-anchor="end" font-size="11" '
                   f'fill="{color}">{label}</text>')
    out.append("</g></svg>")
    return "\n".join(out) + "\n"


__all__ = ["read_hierarchy", "write_hierarchy", "read_matrix", "write_matrix", "read_labels",
           "write_labels", "write_curve_report", "read_curve_report", "render_svg", "PairedCurve"]

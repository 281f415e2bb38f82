#!/usr/bin/env python3
"""Render plot.txt from a run directory into plot.png (needs matplotlib)."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_kv(path):
    kv = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()
    return kv


def read_rows(path, filt):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    if filt:
        col, val = filt.split("=", 1)
        rows = [r for r in rows if r[col] == val]
    return rows


def num(v):
    try:
        return float(v)
    except ValueError:
        return float("nan")


def marks(spec):
    out = []
    for item in filter(None, spec.split(";")):
        value, _, label = item.partition(":")
        out.append((float(value), label))
    return out


def draw(ax, p, run_dir):
    rows = read_rows(os.path.join(run_dir, p["source"]), p.get("filter"))
    x, y = p["x"], p["y"]
    groups = {}
    for r in rows:
        groups.setdefault(r.get(p["group"], "") if p.get("group") else "", []).append(r)
    for name, rs in sorted(groups.items()):
        xs = [num(r[x]) for r in rs]
        ys = [num(r[y]) for r in rs]
        if p["kind"] == "line":
            ax.plot(xs, ys, label=name or y)
        elif p["kind"] == "stem":
            ax.stem(xs, ys, linefmt="C0-", markerfmt="C0o", basefmt=" ", label=y)
        else:
            ax.scatter(xs, ys, s=8, label=f"{p.get('group', y)}={name}" if name else y)
    if p.get("overlay"):
        xs = [num(r[x]) for r in rows]
        ys = [num(r[p["overlay"]]) for r in rows]
        ax.stem(xs, ys, linefmt="C3:", markerfmt="C3x", basefmt=" ", label=p["overlay"])
    for col in filter(None, p.get("curves", "").split(",")):
        pts = sorted((num(r[x]), num(r[col])) for r in rows if r[col])
        ax.plot([a for a, _ in pts], [b for _, b in pts], "k-", label=col)
    for value, label in marks(p.get("hlines", "")):
        ax.axhline(value, color="k", linestyle="--", label=label)
    for value, label in marks(p.get("vlines", "")):
        ax.axvline(value, color="r", linestyle="--", label=label)
    ax.set_xscale(p.get("x_scale", "linear"))
    ax.set_yscale(p.get("y_scale", "linear"))
    ax.set_xlabel(p.get("x_label", x))
    ax.set_ylabel(p.get("y_label", y))
    ax.set_title(p.get("title", ""))
    ax.legend(fontsize="small")


def main():
    run_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
    kv = read_kv(os.path.join(run_dir, "plot.txt"))
    count = int(kv["panels"])
    fig, axes = plt.subplots(count, 1, figsize=(7, 4 * count), squeeze=False)
    for i in range(count):
        prefix = f"panel.{i}."
        p = {k[len(prefix):]: v for k, v in kv.items() if k.startswith(prefix)}
        draw(axes[i][0], p, run_dir)
    fig.tight_layout()
    out = os.path.join(run_dir, "plot.png")
    fig.savefig(out, dpi=120)
    print(out)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Render the CSV outputs of cfnmle as PNG figures.

Usage: plot_results.py <kind> <csv path> [out.png]
Kinds: error-scaling, convergence, landscape, steel-slice, bernstein
"""
import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_csv(path):
    rows, header = [], None
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                continue
            rows.append(cells)
    return header, rows


def plot_error_scaling(header, rows, ax):
    per_m = {}
    for r in rows:
        if r[3] != "1":
            continue
        per_m.setdefault(int(r[0]), []).append(float(r[2]))
    ms = sorted(per_m)
    med = [sorted(v)[len(v) // 2] for v in (per_m[m] for m in ms)]
    for m, errs in per_m.items():
        ax.scatter([m] * len(errs), errs, s=4, alpha=0.25, color="gray")
    ax.plot(ms, med, "o-", color="tab:blue", label="median")
    ref = [med[0] * math.sqrt(ms[0] / m) for m in ms]
    ax.plot(ms, ref, "--", color="tab:red", label="1/sqrt(m) reference")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("m")
    ax.set_ylabel("L2 estimation error")
    ax.legend()


def plot_convergence(header, rows, ax):
    per_trial = {}
    for r in rows:
        per_trial.setdefault(r[0], []).append((int(r[1]), float(r[2])))
    for trial, pts in per_trial.items():
        pts.sort()
        xs = [k for k, g in pts if g > 1e-14]
        ys = [g for _, g in pts if g > 1e-14]
        ax.semilogy(xs, ys, "o-", label=f"trial {trial}")
    ax.set_xlabel("sweep")
    ax.set_ylabel("objective gap")
    ax.legend()


def plot_landscape(header, rows, ax):
    modes = {}
    for r in rows:
        modes.setdefault(r[0], []).append((float(r[-2]), float(r[-1])))
    for mode, vals in modes.items():
        idx = range(len(vals))
        ax.plot(idx, [v[0] for v in vals], ".", label=f"{mode} lambda_min")
        ax.plot(idx, [v[1] for v in vals], ".", label=f"{mode} lambda_max")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("scanned point index")
    ax.set_ylabel("eigenvalue")
    ax.legend(fontsize=7)


def plot_steel_slice(header, rows, ax):
    xs = sorted({float(r[0]) for r in rows})
    ys = sorted({float(r[1]) for r in rows})
    grid = [[math.nan] * len(xs) for _ in ys]
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    for r in rows:
        grid[yi[float(r[1])]][xi[float(r[0])]] = float(r[2])
    art = ax.contourf(xs, ys, grid, levels=30)
    plt.colorbar(art, ax=ax, label="log-likelihood")
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])


def plot_bernstein(header, rows, ax):
    sups = sorted({(int(r[0]), float(r[2])) for r in rows})
    ax.plot([t for t, _ in sups], [s for _, s in sups], "o", label="observed sup deviation")
    ax.set_xlabel("trial")
    ax.set_ylabel("sup ||H_hat - H||_2")
    ax.legend()


KINDS = {
    "error-scaling": plot_error_scaling,
    "convergence": plot_convergence,
    "landscape": plot_landscape,
    "steel-slice": plot_steel_slice,
    "bernstein": plot_bernstein,
}


def main():
    if len(sys.argv) < 3 or sys.argv[1] not in KINDS:
        sys.stderr.write(__doc__)
        return 2
    kind, path = sys.argv[1], sys.argv[2]
    out = sys.argv[3] if len(sys.argv) > 3 else path.rsplit(".", 1)[0] + ".png"
    header, rows = read_csv(path)
    fig, ax = plt.subplots(figsize=(7, 5))
    KINDS[kind](header, rows, ax)
    ax.set_title(f"{kind}: {path}")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

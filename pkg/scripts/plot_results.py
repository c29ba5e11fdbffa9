"""Plot phase MSE and BER curves from a ``pnlab run`` CSV.

Usage::

    python scripts/plot_results.py results.csv --outdir figs

Writes ``mse_vs_snr.png`` (one line per receiver and selected iteration)
and ``ber_vs_snr.png`` (last iteration of every receiver).  Not part of the
library; it only reads the CSV.
"""
import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    table = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["receiver"], int(row["iteration"]))
            table[key].append((float(row["snr_db"]), float(row["ber"]),
                               float(row["pn_mse_mean"])))
    for v in table.values():
        v.sort()
    return table


def plot_mse(table, iterations, out):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for (rx, it), pts in sorted(table.items()):
        if rx == "known_pn" or it not in iterations:
            continue
        snr, _, mse = zip(*pts)
        ax.semilogy(snr, mse, marker="o", ms=3, label=f"{rx}, it {it}")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("phase MSE (rad$^2$)")
    ax.grid(True, which="both", lw=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)


def plot_ber(table, out):
    last = defaultdict(int)
    for rx, it in table:
        last[rx] = max(last[rx], it)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for rx, it in sorted(last.items()):
        snr, ber, _ = zip(*table[(rx, it)])
        # zero-error points cannot go on a log axis
        pts = [(s, b) for s, b in zip(snr, ber) if b > 0]
        if pts:
            ax.semilogy(*zip(*pts), marker="s", ms=3, label=f"{rx}, it {it}")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", lw=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    p.add_argument("--outdir", default=".")
    p.add_argument("--iterations", type=int, nargs="+", default=[1, 3, 5])
    args = p.parse_args()
    table = load(args.csv)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    plot_mse(table, set(args.iterations), outdir / "mse_vs_snr.png")
    plot_ber(table, outdir / "ber_vs_snr.png")
    print(f"figures written to {outdir}")


if __name__ == "__main__":
    main()

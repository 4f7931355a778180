#!/usr/bin/env python3
"""Plot snapshots, inversion and spectra from stored runs (needs matplotlib).

Usage: python scripts/plot_figures.py runs/fig2 [--out fig2.png]
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from gapsoliton import analysis as an  # noqa: E402
from gapsoliton.pipeline import load_run  # noqa: E402


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("run_dir")
    p.add_argument("--out", default=None)
    args = p.parse_args()
    _, rec, _ = load_run(args.run_dir)
    snaps = [s for s in rec.snapshots if s.t_ps > 0]
    fig, axes = plt.subplots(len(snaps) + 1, 1, figsize=(8, 2.2 * (len(snaps) + 1)))
    xi = rec.grid.xi
    for ax, s in zip(axes, snaps):
        ax.plot(xi, s.E, lw=0.6, label="E")
        ax.plot(xi, s.w, lw=0.6, color="tab:red", label="w")
        ax.set_ylabel(f"t = {s.t_ps:.2f} ps")
        ax.set_xlim(xi[0], xi[-1])
    axes[0].legend(loc="upper right")
    ax = axes[-1]
    for probe in rec.probes:
        if len(probe.E) >= 1024:
            sp = an.spectrum(rec, probe_xi=probe.xi)
            keep = sp.frequencies < 3
            ax.plot(sp.frequencies[keep], sp.power[keep], label=f"probe xi={probe.xi:g}")
    ax.set_xlabel("omega / omega0")
    ax.legend()
    fig.tight_layout()
    out = args.out or f"{args.run_dir.rstrip('/')}.png"
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()

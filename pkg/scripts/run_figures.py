#!/usr/bin/env python3
"""Run the shipped figure configs and print the headline numbers.

Usage: python scripts/run_figures.py [--out runs] [name ...]

Runs that already exist with matching checksums are reused.
"""

import argparse
import logging
import math
from pathlib import Path

from gapsoliton import analysis as an
from gapsoliton.config import parse_config
from gapsoliton.pipeline import ensure_run, load_run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
NAMES = ["fig2", "fig5_delta01", "fig5_delta025", "continuous_L108"]


def summarize(name, rec):
    L = rec.profile.spec.xi_end
    probe = L + 5
    print(f"== {name}")
    print(f"   transmitted cycle number (probe xi={probe:g}): {an.cycle_number(an.envelope(rec, 'time', probe)):.3f}")
    print(f"   transmitted spectral peak: {an.spectrum(rec, probe_xi=probe).peak_frequency():.3f} omega0")
    if name == "fig2":
        print(f"   group velocity 0.1->0.5 ps: {an.group_velocity(rec, 0.1, 0.5):.3f}")
        fx = an.fit_soliton(rec, snapshot_t=0.1)
        ft = an.fit_soliton(rec, probe_xi=30.0)
        print(f"   space fit: xi_m={fx.center:.2f} phi={fx.phase_over_pi:.3f}pi v_g={fx.v_g:.3f} tau={fx.tau:.2f}")
        print(f"   time fit:  T_m={ft.center:.1f} phi={ft.phase_over_pi:.3f}pi tau={ft.tau:.2f}")
        area = an.pulse_area(an.envelope(rec, "space", 0.0), rec.pulse.Omega0, rec.pulse.omega0)
        print(f"   input area: {area / math.pi:.3f} pi")
    if name.startswith("fig5"):
        env = an.envelope(rec, "space", 0.1, window=(0.0, L))
        print(f"   lobes at 0.1 ps: {[(round(lb.position, 2), round(lb.peak, 3)) for lb in an.detect_lobes(env)]}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", default=NAMES)
    p.add_argument("--out", default="runs")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    for name in args.names:
        cfg = parse_config(CONFIGS / f"{name}.json")
        reused, _ = ensure_run(cfg, Path(args.out) / name)
        if reused:
            print(f"(reusing {Path(args.out) / name})")
        _, rec, _ = load_run(Path(args.out) / name)
        summarize(name, rec)


if __name__ == "__main__":
    main()

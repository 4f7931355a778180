#!/usr/bin/env python3
"""Grid-refinement study: vacuum advection against the exact translate and a
short layered slab against the finest grid.

Usage: python scripts/convergence.py
"""

import math

import numpy as np

from gapsoliton.engine import GridSpec, RecorderSchedule, SimulationConfig, StepperConfig, run, step
from gapsoliton.model import (TWO_PI, MediumSpec, PulseSpec, RelaxationSpec, SimState, build_grid,
                              build_medium_profile)


def vacuum_error(dxi, travel=5.0):
    g = build_grid(dxi, 0.5, -25.0, 25.0)
    prof = build_medium_profile(g, MediumSpec(d=0.0, delta=0.25, L=1.0, xi_start=20.0))
    pulse = PulseSpec(xi0=-5.0)
    n = g.n_cells
    s = SimState(pulse.waveform(g.xi, -5.0), pulse.waveform(g.xi_half + g.dT / (4 * math.pi), -5.0),
                 np.zeros(n), np.zeros(n), -np.ones(n))
    k = int(round(travel * TWO_PI / g.dT))
    out = step(s, g, prof, pulse, RelaxationSpec(), StepperConfig(), n=k)
    exact = pulse.waveform(g.xi - k * g.dT / TWO_PI, -5.0)
    return math.sqrt(dxi * np.sum((out.E - exact) ** 2))


def slab_field(dxi, scheme, t_ps):
    cfg = SimulationConfig(grid=GridSpec(dxi=dxi, xi_min=-35.0, xi_max=6.0),
                           medium=MediumSpec(d=0.2, delta=0.25, L=2.0), pulse=PulseSpec(xi0=-16.0),
                           stepper=StepperConfig(scheme=scheme),
                           recorders=RecorderSchedule(snapshot_times_ps=(t_ps,)), t_end_ps=t_ps)
    return run(cfg).snapshots[0].E[:: int(round(1 / (100 * dxi)))]


def main():
    print("vacuum advection, L2 error against the exact translate")
    prev = None
    for dxi in (1 / 100, 1 / 200, 1 / 400, 1 / 800):
        e = vacuum_error(dxi)
        order = "" if prev is None else f"  order {math.log2(prev / e):.3f}"
        print(f"  dxi=1/{round(1 / dxi):<4d} error {e:.3e}{order}")
        prev = e
    t = 8000 * (math.pi / 200) / 2300.0
    for scheme in ("bloch-rk4", "bloch-cn"):
        print(f"layered slab ({scheme}), RMS difference to dxi=1/800")
        fields = {dxi: slab_field(dxi, scheme, t) for dxi in (1 / 100, 1 / 200, 1 / 400, 1 / 800)}
        ref = fields[1 / 800]
        for dxi in (1 / 100, 1 / 200, 1 / 400):
            print(f"  dxi=1/{round(1 / dxi):<4d} {np.sqrt(np.mean((fields[dxi] - ref) ** 2)):.3e}")


if __name__ == "__main__":
    main()

import json
import math
from pathlib import Path

import numpy as np
import pytest

from gapsoliton.engine import GridSpec, RecorderSchedule, SimulationConfig, run
from gapsoliton.model import MediumSpec, PulseSpec, RelaxationSpec

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"

# Lines added here are printed in the terminal summary (one per acceptance criterion).
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def small_sim(t_end_ps=0.04, d=0.2, delta=0.25, L=2.0, layered=True, snapshots=(0.0,), probes=(),
              dxi=1 / 100, xi_min=-35.0, xi_max=6.0, xi0=-16.0, relax=(math.inf, math.inf), **stepper):
    from gapsoliton.engine import StepperConfig

    return SimulationConfig(
        grid=GridSpec(dxi=dxi, xi_min=xi_min, xi_max=xi_max),
        medium=MediumSpec(d=d, delta=delta, L=L, layered=layered),
        pulse=PulseSpec(xi0=xi0),
        relaxation=RelaxationSpec(*relax),
        stepper=StepperConfig(**stepper),
        recorders=RecorderSchedule(snapshot_times_ps=tuple(snapshots), probe_positions_xi=tuple(probes)),
        t_end_ps=t_end_ps,
    )


TINY_CONFIG = {
    "grid": {"dxi": "1/100", "xi_min": -35.0, "xi_max": 8.0},
    "medium": {"d": 0.2, "delta": 0.25, "L": 2.0},
    "pulse": {"xi0": -16.0},
    "relaxation": {"T1_fs": 1000.0, "T2_fs": 500.0},
    "recorders": {"snapshot_times_ps": [0.0, 0.03], "probe_positions_xi": [-30.0, 4.0]},
    "t_end_ps": 0.06,
    "analyses": [
        {"name": "incident_cycles", "op": "cycle_number", "snapshot_t": 0.0},
        {"name": "probe_spectrum", "op": "spectrum", "probe_xi": 4.0},
        {"name": "inversion", "op": "inversion_stats", "snapshot_t": 0.03},
    ],
}


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_CONFIG), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def incident_record():
    """Record holding only the initial state of the default pulse."""
    return run(small_sim(t_end_ps=0.0, xi_min=-40.0, xi0=-18.5))


def carrier_sech(x, center=0.0, width=3.0, k=2 * np.pi, amp=1.0, phase=0.0):
    return amp * np.cos(k * (x - center) + phase) / np.cosh((x - center) / width)

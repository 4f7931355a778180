"""Few-cycle pulse propagation through periodic resonant two-level media.

Full Maxwell-Bloch FDTD solver (no slowly-varying-envelope or rotating-wave
approximation) plus the analysis needed to characterise gap solitons.
"""

from gapsoliton.model import (
    ConfigError,
    Grid,
    MediumProfile,
    MediumSpec,
    PulseSpec,
    RelaxationSpec,
    SimState,
    build_grid,
    build_medium_profile,
    init_bloch,
    init_pulse,
    initial_state,
)
from gapsoliton.engine import (
    DivergedError,
    RecorderSchedule,
    RunRecord,
    StepperConfig,
    apply_boundary,
    courant_check,
    run,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DivergedError",
    "Grid",
    "MediumProfile",
    "MediumSpec",
    "PulseSpec",
    "RecorderSchedule",
    "RelaxationSpec",
    "RunRecord",
    "SimState",
    "StepperConfig",
    "apply_boundary",
    "build_grid",
    "build_medium_profile",
    "courant_check",
    "init_bloch",
    "init_pulse",
    "initial_state",
    "run",
    "step",
]

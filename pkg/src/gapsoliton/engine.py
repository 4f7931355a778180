"""Leapfrog Maxwell-Bloch stepper and run driver.

One step takes ``(E^n, H^{n-1/2}, u^n, v^n, w^n)`` to level ``n + 1``:

1. ``H^{n+1/2} = H^{n-1/2} - C (E_{i+1} - E_i)``;
2. the Bloch vector of every medium node is advanced a full step with E
   frozen at a half-level predictor;
3. ``E^{n+1} = E^n - C (H_{i+1/2} - H_{i-1/2}) - (omega_c / Omega0) du``
   where ``du`` is the Bloch increment from step 2;
4. edge nodes are set by the boundary condition.

``C = dT / (2 pi dxi)`` is the Courant number.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from gapsoliton import _kernels
from gapsoliton.model import (
    TWO_PI,
    ConfigError,
    Grid,
    MediumProfile,
    MediumSpec,
    PulseSpec,
    RelaxationSpec,
    SimState,
    build_grid,
    build_medium_profile,
    initial_state,
    resolve_xi0,
)

log = logging.getLogger(__name__)

SCHEMES = {"bloch-rk4": _kernels.SCHEME_RK4, "bloch-cn": _kernels.SCHEME_CN}
BOUNDARIES = {"mur1": _kernels.BOUNDARY_MUR1, "pec": _kernels.BOUNDARY_PEC}
DIVERGENCE_CHECK_EVERY = 100


class DivergedError(RuntimeError):
    """A NaN or Inf appeared in the state."""

    def __init__(self, step_index: int):
        super().__init__(f"simulation diverged (non-finite values) at step {step_index}")
        self.step_index = step_index


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "bloch-rk4"
    boundary: str = "mur1"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {sorted(SCHEMES)} (got {self.scheme!r})")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {sorted(BOUNDARIES)} (got {self.boundary!r})")


@dataclass(frozen=True)
class RecorderSchedule:
    """What to record during a run.

    Probes are sampled every ``spectrum_probe_stride`` steps; conserved
    quantities every ``trace_stride`` steps when ``trace_conserved`` is set.
    """

    snapshot_times_ps: tuple[float, ...] = ()
    probe_positions_xi: tuple[float, ...] = ()
    trace_conserved: bool = False
    spectrum_probe_stride: int = 4
    trace_stride: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times_ps", tuple(float(t) for t in self.snapshot_times_ps))
        object.__setattr__(self, "probe_positions_xi", tuple(float(x) for x in self.probe_positions_xi))
        if self.spectrum_probe_stride < 1 or self.trace_stride < 1:
            raise ConfigError("recorder strides must be >= 1")
        if list(self.snapshot_times_ps) != sorted(self.snapshot_times_ps):
            raise ConfigError("snapshot_times_ps must be ascending")


@dataclass(frozen=True)
class GridSpec:
    dxi: float = 1.0 / 400
    courant: float = 0.5
    xi_min: float = -40.0
    xi_max: float = 220.0

    def build(self) -> Grid:
        return build_grid(self.dxi, self.courant, self.xi_min, self.xi_max)


@dataclass(frozen=True)
class SimulationConfig:
    """Everything a single run needs."""

    grid: GridSpec
    medium: MediumSpec
    pulse: PulseSpec = field(default_factory=PulseSpec)
    relaxation: RelaxationSpec = field(default_factory=RelaxationSpec)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    recorders: RecorderSchedule = field(default_factory=RecorderSchedule)
    t_end_ps: float = 0.0

    def __post_init__(self):
        if not self.t_end_ps >= 0:
            raise ConfigError(f"t_end_ps must be >= 0 (got {self.t_end_ps})")


@dataclass
class Snapshot:
    t_ps: float
    step: int
    E: np.ndarray
    w: np.ndarray

    def T(self, omega0: float) -> float:
        return self.t_ps * 1000.0 * omega0


@dataclass
class Probe:
    xi: float
    index: int
    T: np.ndarray
    E: np.ndarray


@dataclass
class ConservedTrace:
    T: np.ndarray
    energy: np.ndarray
    norm_deviation: np.ndarray


@dataclass
class RunRecord:
    """Output of :func:`run`."""

    grid: Grid
    profile: MediumProfile
    pulse: PulseSpec
    xi0: float
    snapshots: list[Snapshot]
    probes: list[Probe]
    conserved: ConservedTrace | None
    manifest: dict[str, Any]
    n_steps: int = 0

    def snapshot(self, t_ps: float) -> Snapshot:
        """Snapshot whose requested or actual time is closest to ``t_ps``."""
        if not self.snapshots:
            raise KeyError("record has no snapshots")
        best = min(self.snapshots, key=lambda s: abs(s.t_ps - t_ps))
        tol = 0.5 * self.grid.dT / (1000.0 * self.pulse.omega0) + 1e-12
        if abs(best.t_ps - t_ps) > tol:
            raise KeyError(f"no snapshot at t={t_ps} ps (available: {[s.t_ps for s in self.snapshots]})")
        return best

    def probe(self, xi: float) -> Probe:
        for p in self.probes:
            if abs(p.xi - xi) <= 0.5 * self.grid.dxi + 1e-12:
                return p
        raise KeyError(f"no probe at xi={xi} (available: {[p.xi for p in self.probes]})")


@dataclass(frozen=True)
class _Coefficients:
    coupling: np.ndarray
    medium_idx: np.ndarray
    drive: float
    g1: float
    g2: float


def _coefficients(profile: MediumProfile, pulse: PulseSpec, relax: RelaxationSpec) -> _Coefficients:
    g1, g2 = relax.rates(pulse.omega0)
    coupling = np.ascontiguousarray(profile.omega_c / pulse.Omega0, dtype=np.float64)
    idx = np.flatnonzero(profile.omega_c > 0).astype(np.int64)
    return _Coefficients(coupling, idx, 2.0 * pulse.Omega0 / pulse.omega0, g1, g2)


def courant_check(grid: Grid) -> float:
    """Return ``dT / (2 pi dxi)``; raises above 1 and warns above 0.9."""
    ratio = grid.dT / (TWO_PI * grid.dxi)
    if ratio > 1.0 + 1e-12:
        raise ConfigError(f"Courant number {ratio:.6g} exceeds the stability limit 1")
    if ratio > 0.9:
        log.warning("Courant number %.4g is close to the stability limit", ratio)
    return ratio


def _check_edges(profile: MediumProfile) -> None:
    oc = profile.omega_c
    if oc.shape[0] < 4 or np.any(oc[:2] != 0) or np.any(oc[-2:] != 0):
        raise ConfigError("medium extends to the grid boundary; pad both ends with vacuum")


def bloch_update(u, v, w, E, dT, drive, g1=0.0, g2=0.0, scheme="bloch-rk4"):
    """Advance Bloch vectors one step of size ``dT`` with the field frozen at ``E``."""
    arrs = [np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in (u, v, w)]
    e = np.broadcast_to(np.asarray(E, dtype=np.float64), arrs[0].shape).copy()
    return _kernels.bloch_update_array(*arrs, e, float(dT), float(drive), float(g1), float(g2), SCHEMES[scheme])


def apply_boundary(state: SimState, grid: Grid, cfg: StepperConfig, previous: SimState | None = None) -> SimState:
    """Set the two edge E nodes of ``state`` from the boundary condition.

    ``state`` must already carry the interior update for its time level;
    ``previous`` is the state one step earlier, which first-order Mur needs.
    """
    E = np.array(state.E)
    if cfg.boundary == "pec":
        E[0] = E[-1] = 0.0
    else:
        if previous is None:
            raise ValueError("mur1 boundary needs the previous state")
        m = (grid.courant - 1.0) / (grid.courant + 1.0)
        Ep = previous.E
        E[0] = Ep[1] + m * (E[1] - Ep[0])
        E[-1] = Ep[-2] + m * (E[-2] - Ep[-1])
    return SimState(E=E, H=np.array(state.H), u=np.array(state.u), v=np.array(state.v),
                    w=np.array(state.w), t_index=state.t_index)


_EMPTY_IDX = np.zeros(0, dtype=np.int64)
_EMPTY_BUF = np.zeros((1, 1))


def _advance(arrays, grid, coef, cfg, nsteps, step0, probe_idx=_EMPTY_IDX, probe_buf=_EMPTY_BUF, stride=1):
    E, H, u, v, w = arrays
    _kernels.advance(E, H, u, v, w, coef.coupling, coef.medium_idx, grid.courant, grid.dT,
                     coef.drive, coef.g1, coef.g2, SCHEMES[cfg.scheme], BOUNDARIES[cfg.boundary],
                     nsteps, step0, probe_idx, probe_buf, stride)


def step(state: SimState, grid: Grid, profile: MediumProfile, pulse: PulseSpec,
         relax: RelaxationSpec, cfg: StepperConfig, n: int = 1) -> SimState:
    """Return the state ``n`` leapfrog steps later (default one)."""
    courant_check(grid)
    _check_edges(profile)
    if state.E.shape[0] != grid.n_cells:
        raise ConfigError("state does not match grid")
    arrays = state.copy_arrays()
    _advance(arrays, grid, _coefficients(profile, pulse, relax), cfg, n, state.t_index)
    _check_finite(arrays, state.t_index + n)
    E, H, u, v, w = arrays
    return SimState(E=E, H=H, u=u, v=v, w=w, t_index=state.t_index + n)


def _check_finite(arrays, step_index):
    for a in arrays:
        if not np.isfinite(a).all():
            raise DivergedError(step_index)


def em_energy(E: np.ndarray, H: np.ndarray, courant: float, dxi: float) -> float:
    """Discrete field energy ``dxi * (|E^n|^2 + <H^{n-1/2}, H^{n+1/2}>)``.

    This is the quadratic form the vacuum leapfrog conserves exactly under PEC
    walls; ``H^{n+1/2}`` is obtained from the curl-E update alone.
    """
    H_next = H - courant * np.diff(E)
    return float(dxi * (np.dot(E, E) + np.dot(H, H_next)))


def bloch_norm_deviation(u, v, w, mask) -> float:
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(u[mask] ** 2 + v[mask] ** 2 + w[mask] ** 2 - 1.0)))


def _steps_for(t_ps: float, grid: Grid, omega0: float) -> int:
    return int(round(t_ps * 1000.0 * omega0 / grid.dT))


def run(config: SimulationConfig, manifest: dict[str, Any] | None = None) -> RunRecord:
    """Simulate from ``T = 0`` to ``t_end_ps`` firing the configured recorders.

    Snapshots land on the nearest step; the actual time is stored.
    """
    grid = config.grid.build()
    courant_check(grid)
    profile = build_medium_profile(grid, config.medium)
    _check_edges(profile)
    pulse = config.pulse
    sched = config.recorders
    omega0 = pulse.omega0
    for t in sched.snapshot_times_ps:
        if t < 0 or t > config.t_end_ps + 1e-12:
            raise ConfigError(f"snapshot time {t} ps outside run duration [0, {config.t_end_ps}]")
    probe_idx = np.array([grid.index_of(x) for x in sched.probe_positions_xi], dtype=np.int64)

    state = initial_state(grid, pulse, config.medium.xi_start)
    xi0 = resolve_xi0(grid, pulse, config.medium.xi_start)
    arrays = state.copy_arrays()
    coef = _coefficients(profile, pulse, config.relaxation)
    mask = profile.mask

    n_total = _steps_for(config.t_end_ps, grid, omega0)
    times = list(sched.snapshot_times_ps)
    if not times and n_total == 0:
        times = [0.0]
    snap_steps = [_steps_for(t, grid, omega0) for t in times]

    stride = sched.spectrum_probe_stride
    if len(probe_idx):
        probe_buf = np.zeros((n_total // stride + 1, len(probe_idx)))
        probe_buf[0] = arrays[0][probe_idx]
    else:
        probe_buf = _EMPTY_BUF

    trace_T, trace_energy, trace_norm = [], [], []

    def record_trace(s):
        trace_T.append(s * grid.dT)
        trace_energy.append(em_energy(arrays[0], arrays[1], grid.courant, grid.dxi))
        trace_norm.append(bloch_norm_deviation(arrays[2], arrays[3], arrays[4], mask))

    captured: dict[int, Snapshot] = {}
    pending = sorted(set(snap_steps))
    t_wall = time.perf_counter()

    def handle_events(s):
        if pending and pending[0] == s:
            pending.pop(0)
            captured[s] = Snapshot(t_ps=s * grid.dT / omega0 / 1000.0, step=s,
                                   E=arrays[0].copy(), w=arrays[4].copy())
        if sched.trace_conserved and s % sched.trace_stride == 0:
            record_trace(s)

    s = 0
    handle_events(0)
    while s < n_total:
        stop = min(n_total, (s // DIVERGENCE_CHECK_EVERY + 1) * DIVERGENCE_CHECK_EVERY)
        if pending:
            stop = min(stop, pending[0])
        if sched.trace_conserved:
            stop = min(stop, (s // sched.trace_stride + 1) * sched.trace_stride)
        _advance(arrays, grid, coef, config.stepper, stop - s, s,
                 probe_idx if len(probe_idx) else _EMPTY_IDX, probe_buf, stride)
        s = stop
        if s % DIVERGENCE_CHECK_EVERY == 0 or s == n_total:
            _check_finite(arrays, s)
        handle_events(s)
    if sched.trace_conserved and (not trace_T or trace_T[-1] != n_total * grid.dT):
        record_trace(n_total)

    snapshots = [captured[ss] for ss in snap_steps]

    probes = []
    n_samples = n_total // stride + 1
    for k, (x, idx) in enumerate(zip(sched.probe_positions_xi, probe_idx)):
        probes.append(Probe(xi=x, index=int(idx), T=np.arange(n_samples) * (stride * grid.dT),
                            E=probe_buf[:n_samples, k].copy()))
    conserved = None
    if sched.trace_conserved:
        conserved = ConservedTrace(np.array(trace_T), np.array(trace_energy), np.array(trace_norm))
    log.info("run finished: %d steps on %d cells in %.1f s", n_total, grid.n_cells,
             time.perf_counter() - t_wall)
    return RunRecord(grid=grid, profile=profile, pulse=pulse, xi0=xi0, snapshots=snapshots,
                     probes=probes, conserved=conserved, n_steps=n_total,
                     manifest={**(manifest or {}), "snapshot_times_ps": times, "spectrum_probe_stride": stride})

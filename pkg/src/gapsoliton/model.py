"""Problem setup in dimensionless units.

Time is ``T = t * omega0`` and space is ``xi = z / lambda0``.  Light travels
``dxi = dT / (2 pi)`` in these units, so the Courant number of the grid is
``dT / (2 pi dxi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
# sech(SECH_FWHM * x / tau) has an intensity FWHM of ~tau
SECH_FWHM = 1.76
_ALIGN_TOL = 1e-9


class ConfigError(ValueError):
    """Raised when a physical or numerical parameter is invalid."""


def _integer_ratio(num: float, den: float, what: str) -> int:
    ratio = num / den
    k = round(ratio)
    if abs(ratio - k) > _ALIGN_TOL * max(1.0, abs(ratio)):
        raise ConfigError(f"{what} is not an integer (got {ratio!r})")
    return int(k)


@dataclass(frozen=True)
class Grid:
    """Uniform staggered grid.

    E lives on the nodes ``xi_min + i*dxi`` (``n_cells`` of them), H on the
    ``n_cells - 1`` interior half nodes.
    """

    dxi: float
    n_cells: int
    xi_min: float
    dT: float
    courant: float

    def __post_init__(self):
        if not (self.dxi > 0 and self.dT > 0):
            raise ConfigError("dxi and dT must be positive")
        if self.n_cells < 2:
            raise ConfigError(f"n_cells must be >= 2 (got {self.n_cells})")
        if self.courant > 1.0 + 1e-12:
            raise ConfigError(f"courant number {self.courant} exceeds 1")

    @property
    def xi(self) -> np.ndarray:
        return self.xi_min + self.dxi * np.arange(self.n_cells)

    @property
    def xi_half(self) -> np.ndarray:
        return self.xi_min + self.dxi * (np.arange(self.n_cells - 1) + 0.5)

    @property
    def xi_max(self) -> float:
        return self.xi_min + self.dxi * (self.n_cells - 1)

    def index_of(self, xi: float) -> int:
        """Nearest E node to ``xi``; raises if outside the grid."""
        if xi < self.xi_min - 0.5 * self.dxi or xi > self.xi_max + 0.5 * self.dxi:
            raise ConfigError(f"position xi={xi} outside grid [{self.xi_min}, {self.xi_max}]")
        return int(round((xi - self.xi_min) / self.dxi))


def build_grid(dxi: float, courant: float, xi_min: float, xi_max: float) -> Grid:
    """Grid covering ``[xi_min, xi_max]`` with time step ``courant * 2 pi * dxi``."""
    if not dxi > 0:
        raise ConfigError(f"dxi must be positive (got {dxi})")
    if not 0 < courant <= 1:
        raise ConfigError(f"courant must lie in (0, 1] (got {courant})")
    if not xi_max > xi_min:
        raise ConfigError(f"xi_max ({xi_max}) must exceed xi_min ({xi_min})")
    cells = _integer_ratio(xi_max - xi_min, dxi, "grid extent (xi_max - xi_min) / dxi")
    return Grid(dxi=dxi, n_cells=cells + 1, xi_min=xi_min, dT=courant * TWO_PI * dxi, courant=courant)


@dataclass(frozen=True)
class MediumSpec:
    """Layered two-level medium.

    ``d`` is the coupling ``omega_c`` inside a layer (fs^-1), ``delta`` the
    layer thickness and ``L`` the structure length (both in wavelengths).
    ``layered=False`` fills the whole of ``[xi_start, xi_start + L)``, the
    continuous-medium control case.
    """

    d: float
    delta: float
    L: float
    xi_start: float = 0.0
    layered: bool = True

    def __post_init__(self):
        if self.d < 0:
            raise ConfigError(f"d must be >= 0 (got {self.d})")
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive (got {self.delta})")
        if not self.L > 0:
            raise ConfigError(f"L must be positive (got {self.L})")
        if self.layered:
            _integer_ratio(self.L, 2 * self.delta, "structure length L / (2 delta)")

    @property
    def n_periods(self) -> int:
        return round(self.L / (2 * self.delta))

    @property
    def xi_end(self) -> float:
        return self.xi_start + self.L


@dataclass(frozen=True)
class MediumProfile:
    """Per-node coupling ``omega_c`` (fs^-1) sampled at E nodes."""

    omega_c: np.ndarray
    spec: MediumSpec

    def __post_init__(self):
        self.omega_c.setflags(write=False)

    @property
    def mask(self) -> np.ndarray:
        return self.omega_c > 0

    def layers(self) -> list[tuple[int, int]]:
        """Contiguous runs of medium nodes as half-open ``(start, stop)`` index pairs."""
        m = self.mask.astype(np.int8)
        edges = np.diff(np.concatenate(([0], m, [0])))
        starts = np.flatnonzero(edges == 1)
        stops = np.flatnonzero(edges == -1)
        return list(zip(starts.tolist(), stops.tolist()))


def build_medium_profile(grid: Grid, spec: MediumSpec) -> MediumProfile:
    """Sample the layered coupling on the E nodes.

    A node at ``xi`` is inside a layer iff ``xi - xi_start`` lies in
    ``[2n delta, 2n delta + delta)`` for ``0 <= n < L / (2 delta)``.
    Coincident boundaries are resolved left-closed.
    """
    if spec.layered:
        _integer_ratio(spec.delta, grid.dxi, "layer thickness delta / dxi")
    rel = (grid.xi - spec.xi_start) / spec.delta
    # Nudge so a node exactly on a boundary falls into the layer to its right.
    slot = np.floor(rel + _ALIGN_TOL)
    inside = (slot >= 0) & (slot < round(spec.L / spec.delta))
    if spec.layered:
        inside &= (slot % 2) == 0
    omega_c = np.where(inside, spec.d, 0.0)
    return MediumProfile(omega_c=omega_c, spec=spec)


@dataclass(frozen=True)
class PulseSpec:
    """Incident sech pulse.

    ``omega0`` and ``Omega0`` are in fs^-1, ``tau_p_fs`` is the intensity FWHM
    in fs.  ``xi0`` is the initial centre; ``None`` picks a default clear of
    the structure (see :func:`default_xi0`).
    """

    omega0: float = 2.3
    Omega0: float = 1.4
    tau_p_fs: float = 5.0
    xi0: float | None = None
    truncation_tol: float = 1e-6

    def __post_init__(self):
        for name in ("omega0", "Omega0", "tau_p_fs", "truncation_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive (got {getattr(self, name)})")

    @property
    def tau(self) -> float:
        """Intensity FWHM in units of 1/omega0."""
        return self.tau_p_fs * self.omega0

    @property
    def area(self) -> float:
        """Envelope area of the incident pulse, ``Omega0 * tau_p * pi / 1.76``."""
        return self.Omega0 * self.tau_p_fs * math.pi / SECH_FWHM

    def waveform(self, xi: np.ndarray, xi0: float) -> np.ndarray:
        return np.cos(TWO_PI * (xi - xi0)) * self.envelope(xi, xi0)

    def envelope(self, xi: np.ndarray, xi0: float) -> np.ndarray:
        arg = SECH_FWHM * TWO_PI * (np.asarray(xi) - xi0) / self.tau
        return 1.0 / np.cosh(np.clip(arg, -700, 700))

    def clearance(self) -> float:
        """Distance from the centre at which the envelope drops to ``truncation_tol``."""
        return math.acosh(1.0 / self.truncation_tol) * self.tau / (SECH_FWHM * TWO_PI)


def default_xi0(grid: Grid, pulse: PulseSpec, xi_start: float = 0.0) -> float:
    """Closest centre to the structure at which the pulse tail is below ``truncation_tol`` at the face."""
    return xi_start - pulse.clearance()


def resolve_xi0(grid: Grid, pulse: PulseSpec, xi_start: float = 0.0) -> float:
    return default_xi0(grid, pulse, xi_start) if pulse.xi0 is None else pulse.xi0


@dataclass(frozen=True)
class RelaxationSpec:
    """Lifetime ``T1_fs`` and dephasing time ``T2_fs``; ``inf`` disables either."""

    T1_fs: float = math.inf
    T2_fs: float = math.inf

    def __post_init__(self):
        if not (self.T1_fs > 0 and self.T2_fs > 0):
            raise ConfigError("T1_fs and T2_fs must be positive")

    def rates(self, omega0: float) -> tuple[float, float]:
        """Dimensionless decay rates ``(1/(T1 omega0), 1/(T2 omega0))``."""
        return 1.0 / (self.T1_fs * omega0), 1.0 / (self.T2_fs * omega0)


@dataclass(frozen=True)
class SimState:
    """Fields and Bloch vector at one time level.

    ``E`` is at time level ``t_index`` and ``H`` half a step earlier, which is
    what the leapfrog update consumes next.
    """

    E: np.ndarray
    H: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    t_index: int = 0

    def __post_init__(self):
        n = self.E.shape[0]
        if self.H.shape[0] != n - 1:
            raise ConfigError(f"H must have {n - 1} entries (got {self.H.shape[0]})")
        for name in ("u", "v", "w"):
            if getattr(self, name).shape[0] != n:
                raise ConfigError(f"{name} must have {n} entries")
        for arr in (self.E, self.H, self.u, self.v, self.w):
            arr.setflags(write=False)

    def copy_arrays(self):
        return tuple(np.array(a, dtype=np.float64) for a in (self.E, self.H, self.u, self.v, self.w))


def init_pulse(grid: Grid, pulse: PulseSpec, xi_start: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Incident pulse at ``T = 0`` with H set for rightward propagation.

    H sits half a step before E, so it samples the same waveform advanced
    back along the forward characteristic: ``f(xi + dT/(4 pi))``.
    """
    xi0 = resolve_xi0(grid, pulse, xi_start)
    tol = pulse.truncation_tol * (1 + 1e-9)
    if xi0 >= xi_start or pulse.envelope(xi_start, xi0) > tol:
        raise ConfigError(
            f"pulse centred at xi0={xi0} overlaps the structure face at {xi_start} "
            f"beyond tolerance {pulse.truncation_tol}"
        )
    if xi0 <= grid.xi_min or pulse.envelope(grid.xi_min, xi0) > tol:
        raise ConfigError(
            f"pulse centred at xi0={xi0} is clipped by the grid edge at {grid.xi_min}; "
            f"needs xi_min <= {xi0 - pulse.clearance():.4f}"
        )
    E = pulse.waveform(grid.xi, xi0)
    H = pulse.waveform(grid.xi_half + grid.dT / (2 * TWO_PI), xi0)
    return E, H


def init_bloch(grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All atoms in the ground state: ``u = v = 0``, ``w = -1``."""
    n = grid.n_cells
    return np.zeros(n), np.zeros(n), -np.ones(n)


def initial_state(grid: Grid, pulse: PulseSpec, xi_start: float = 0.0) -> SimState:
    E, H = init_pulse(grid, pulse, xi_start)
    u, v, w = init_bloch(grid)
    return SimState(E=E, H=H, u=u, v=v, w=w, t_index=0)

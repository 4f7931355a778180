"""Observables extracted from run records.

Coordinates follow the engine: ``xi`` in wavelengths on the space axis,
dimensionless ``T = t * omega0`` on the time axis.  The carrier period is 1 in
``xi`` and ``2 pi`` in ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft
from scipy import optimize, signal

from gapsoliton.engine import RunRecord
from gapsoliton.model import SECH_FWHM, TWO_PI

SPACE = "space-at-fixed-t"
TIME = "time-at-fixed-xi"
_AXES = {"space": SPACE, SPACE: SPACE, "time": TIME, TIME: TIME}
_MIN_CARRIER_PERIODS = 4


class AnalysisError(ValueError):
    """Raised when requested data are missing or unsuitable."""


class FitError(AnalysisError):
    """Soliton fit did not converge; ``best`` holds the best parameters found."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


def _axis(axis: str) -> str:
    try:
        return _AXES[axis]
    except KeyError:
        raise AnalysisError(f"unknown axis {axis!r}; use 'space' or 'time'") from None


def _carrier_period(axis: str) -> float:
    return 1.0 if _axis(axis) == SPACE else TWO_PI


@dataclass
class Envelope:
    axis: str
    samples: np.ndarray
    coordinates: np.ndarray
    location: float | None = None

    def __post_init__(self):
        self.axis = _axis(self.axis)
        if self.samples.shape != self.coordinates.shape:
            raise AnalysisError("envelope samples and coordinates differ in length")

    @property
    def step(self) -> float:
        return float(self.coordinates[1] - self.coordinates[0])

    def peak(self) -> tuple[float, float]:
        """Sub-sample (position, value) of the global maximum."""
        k = int(np.argmax(self.samples))
        return _parabolic_peak(self.samples, self.coordinates, k)


@dataclass
class Spectrum:
    frequencies: np.ndarray
    power: np.ndarray
    source: str
    location: float
    window: str = "hann"
    gate: tuple[float, float] | None = None

    def peak_frequency(self, min_frequency: float = 0.25) -> float:
        """Frequency of the strongest component above ``min_frequency``, refined parabolically."""
        sel = np.flatnonzero(self.frequencies >= min_frequency)
        if sel.size == 0:
            raise AnalysisError("no spectral content above min_frequency")
        k = sel[np.argmax(self.power[sel])]
        return _parabolic_peak(self.power, self.frequencies, int(k))[0]


@dataclass
class SolitonFit:
    v_g: float
    tau: float
    center: float
    phase: float
    amplitude_scale: float
    rms_residual: float
    axis: str = SPACE
    route: str = "free"
    converged: bool = True

    @property
    def phase_over_pi(self) -> float:
        return self.phase / math.pi


@dataclass
class Lobe:
    position: float
    peak: float
    fwhm: float


@dataclass
class LayerStat:
    layer: int
    xi_start: float
    xi_end: float
    mean_w: float
    max_w: float


@dataclass
class InversionStats:
    t_ps: float
    layers: list[LayerStat] = field(default_factory=list)

    @property
    def inverted(self) -> list[LayerStat]:
        return [s for s in self.layers if s.max_w > 0]


def _parabolic_peak(y: np.ndarray, x: np.ndarray, k: int) -> tuple[float, float]:
    if 0 < k < len(y) - 1:
        a, b, c = y[k - 1], y[k], y[k + 1]
        den = a - 2 * b + c
        if den < 0:
            p = 0.5 * (a - c) / den
            return float(x[k] + p * (x[1] - x[0])), float(b - 0.25 * (a - c) * p)
    return float(x[k]), float(y[k])


def _window_slice(coords: np.ndarray, window: tuple[float, float] | None) -> slice:
    if window is None:
        return slice(0, len(coords))
    lo, hi = window
    i0 = int(np.searchsorted(coords, lo, side="left"))
    i1 = int(np.searchsorted(coords, hi, side="right"))
    return slice(i0, i1)


def analytic_envelope(samples: np.ndarray, coordinates: np.ndarray, axis: str = "space",
                      location: float | None = None) -> Envelope:
    """Magnitude of the analytic signal of a real, uniformly sampled field.

    The series is zero padded to twice its length before the transform so the
    periodic wrap does not couple the two ends.
    """
    samples = np.asarray(samples, dtype=np.float64)
    coordinates = np.asarray(coordinates, dtype=np.float64)
    if len(samples) < 2:
        raise AnalysisError("envelope needs at least two samples")
    span = coordinates[-1] - coordinates[0]
    if span < _MIN_CARRIER_PERIODS * _carrier_period(axis):
        raise AnalysisError(
            f"window spans {span:.3g}, shorter than {_MIN_CARRIER_PERIODS} carrier periods"
        )
    n = len(samples)
    env = np.abs(signal.hilbert(samples, sfft.next_fast_len(2 * n))[:n])
    return Envelope(axis=axis, samples=env, coordinates=coordinates, location=location)


def _field(record: RunRecord, axis: str, location: float):
    axis = _axis(axis)
    try:
        if axis == SPACE:
            snap = record.snapshot(location)
            return snap.E, record.grid.xi, snap.t_ps
        probe = record.probe(location)
        return probe.E, probe.T, probe.xi
    except KeyError as exc:
        raise AnalysisError(str(exc)) from None


def envelope(record: RunRecord, axis: str, location: float,
             window: tuple[float, float] | None = None) -> Envelope:
    """Envelope of a snapshot (``axis='space'``, ``location`` in ps) or a probe
    series (``axis='time'``, ``location`` in xi).

    ``window`` restricts the data: a xi range on the space axis, a ``T`` range
    on the time axis.
    """
    data, coords, loc = _field(record, axis, location)
    sl = _window_slice(coords, window)
    return analytic_envelope(data[sl], coords[sl], axis, loc)


def _half_max_width(intensity: np.ndarray, coords: np.ndarray, k: int) -> float:
    half = 0.5 * intensity[k]
    step = coords[1] - coords[0]
    i = k
    while i > 0 and intensity[i] > half:
        i -= 1
    if intensity[i] > half:
        raise AnalysisError("pulse is clipped by the window (left half maximum not reached)")
    left = coords[i] + step * (intensity[i] - half) / (intensity[i] - intensity[i + 1])
    j = k
    n = len(intensity)
    while j < n - 1 and intensity[j] > half:
        j += 1
    if intensity[j] > half:
        raise AnalysisError("pulse is clipped by the window (right half maximum not reached)")
    right = coords[j] - step * (intensity[j] - half) / (intensity[j] - intensity[j - 1])
    return float(right - left)


def _dominant_peak(env: Envelope) -> int:
    y = env.samples
    k = int(np.argmax(y))
    if y[k] <= 0:
        raise AnalysisError("envelope is identically zero; no peak")
    peaks, _ = signal.find_peaks(y)
    ties = [int(p) for p in peaks if p != k and y[p] >= y[k] * (1 - 1e-9)]
    if ties:
        candidates = [float(env.coordinates[p]) for p in [k, *ties]]
        raise AnalysisError(f"ambiguous peak: equal maxima at {candidates}")
    return k


def fwhm(env: Envelope) -> float:
    """Intensity (envelope squared) FWHM of the dominant peak, in envelope coordinates."""
    k = _dominant_peak(env)
    return _half_max_width(env.samples ** 2, env.coordinates, k)


def _to_time(width: float, axis: str, v_g: float | None) -> float:
    if _axis(axis) == SPACE:
        return TWO_PI * width / (1.0 if v_g is None else v_g)
    return width


def cycle_number(env: Envelope, carrier_omega: float = 1.0, v_g: float | None = None) -> float:
    """Intensity FWHM in units of the carrier period.

    On the space axis the width is mapped to time along the characteristic
    (``T = 2 pi xi / v_g``, ``v_g = 1`` unless given).  ``carrier_omega`` is in
    units of omega0.
    """
    width_T = _to_time(fwhm(env), env.axis, v_g)
    return width_T * carrier_omega / TWO_PI


def spectrum(record: RunRecord, probe_xi: float | None = None, snapshot_t: float | None = None,
             window: str = "hann", gate: tuple[float, float] | None = None,
             pad_factor: int = 4) -> Spectrum:
    """Power spectrum of a probe series (or a spatial snapshot), peak normalised to 1.

    Frequencies are in units of omega0; on a spatial snapshot the carrier
    wavenumber maps to 1.  ``gate`` selects a sub-range (``T`` for probes, xi
    for snapshots) before windowing.
    """
    if (probe_xi is None) == (snapshot_t is None):
        raise AnalysisError("give exactly one of probe_xi or snapshot_t")
    if probe_xi is not None:
        data, coords, loc = _field(record, TIME, probe_xi)
        source = "probe"
    else:
        data, coords, loc = _field(record, SPACE, snapshot_t)
        source = "snapshot"
    sl = _window_slice(coords, gate)
    return spectrum_of(data[sl], coords[1] - coords[0], source, loc, window, gate, pad_factor)


def spectrum_of(data: np.ndarray, spacing: float, source: str = "probe", location: float = float("nan"),
                window: str = "hann", gate=None, pad_factor: int = 4) -> Spectrum:
    n = len(data)
    if n < 2 ** 10:
        raise AnalysisError(f"series has {n} samples; at least 1024 are required")
    if window == "hann":
        taper = signal.get_window("hann", n, fftbins=False)
    elif window == "rectangular":
        taper = np.ones(n)
    else:
        raise AnalysisError(f"unknown window {window!r}; use 'hann' or 'rectangular'")
    nfft = sfft.next_fast_len(pad_factor * n)
    amp = sfft.rfft(np.asarray(data) * taper, nfft)
    power = np.abs(amp) ** 2
    peak = power.max()
    if peak > 0:
        power = power / peak
    freq = sfft.rfftfreq(nfft, spacing)
    if source == "probe":
        freq = TWO_PI * freq
    return Spectrum(frequencies=freq, power=power, source=source, location=float(location),
                    window=window, gate=None if gate is None else tuple(gate))


def detect_lobes(env: Envelope, threshold_frac: float = 0.1) -> list[Lobe]:
    """Separate pulses in an envelope, sorted by position.

    A lobe is a local maximum above ``threshold_frac`` of the global peak that
    also rises by that fraction above the saddle separating it from its
    neighbours, which keeps carrier-scale ripple from counting.
    """
    if not 0 < threshold_frac < 1:
        raise AnalysisError("threshold_frac must lie in (0, 1)")
    y = env.samples
    top = float(y.max()) if y.size else 0.0
    if top <= 0:
        return []
    peaks, _ = signal.find_peaks(y, height=threshold_frac * top, prominence=threshold_frac * top)
    lobes = []
    intensity = y ** 2
    for k in peaks:
        pos, val = _parabolic_peak(y, env.coordinates, int(k))
        try:
            width = _half_max_width(intensity, env.coordinates, int(k))
        except AnalysisError:
            width = float("nan")
        lobes.append(Lobe(position=pos, peak=val, fwhm=width))
    return lobes


def _structure_window(record: RunRecord) -> tuple[float, float]:
    spec = record.profile.spec
    return spec.xi_start, spec.xi_end


def group_velocity(record: RunRecord, t1: float, t2: float, region: tuple[float, float] | None = None,
                   threshold_frac: float = 0.3):
    """Envelope-peak velocity between snapshots ``t1`` and ``t2`` (ps), in units of c.

    Peaks are searched inside ``region`` (default: the structure).  When the
    pulse has split, a dict of per-lobe velocities keyed ``lobe0, lobe1, ...``
    (ordered by position) is returned instead of a float.
    """
    region = region or _structure_window(record)
    omega0 = record.pulse.omega0
    found = []
    for t in (t1, t2):
        env = envelope(record, SPACE, t, window=region)
        lobes = detect_lobes(env, threshold_frac)
        if not lobes:
            raise AnalysisError(f"no pulse peak in region {region} at t={t} ps")
        found.append((record.snapshot(t).t_ps * 1000.0 * omega0, lobes))
    (T1, l1), (T2, l2) = found
    if T2 == T1:
        raise AnalysisError("t1 and t2 map to the same step")
    if len(l1) == 1 and len(l2) == 1:
        return TWO_PI * (l2[0].position - l1[0].position) / (T2 - T1)
    n = min(len(l1), len(l2))
    return {f"lobe{i}": TWO_PI * (l2[i].position - l1[i].position) / (T2 - T1) for i in range(n)}


def pulse_area(env: Envelope, Omega0: float, omega0: float, v_g: float | None = None) -> float:
    """Rabi-weighted time integral of the envelope, ``(Omega0/omega0) * int env dT``.

    On the space axis ``dT = 2 pi dxi / v_g`` (``v_g = 1`` unless given).
    """
    y = env.samples
    top = y.max()
    if top <= 0:
        return 0.0
    if y[0] > 0.01 * top or y[-1] > 0.01 * top:
        raise AnalysisError("envelope clipped by the window (edge above 1% of peak)")
    integral = np.trapezoid(y, env.coordinates) if hasattr(np, "trapezoid") else np.trapz(y, env.coordinates)
    return float(Omega0 / omega0 * _to_time(integral, env.axis, v_g))


def soliton_amplitude(v_g: float, tau: float, omega0: float, direction: int = +1) -> float:
    """Peak Rabi frequency ``omega0 (1 +/- 1/v_g) / tau`` of the forward (+1) or backward (-1) wave."""
    return omega0 * (1.0 + direction / v_g) / tau


def soliton_area(v_g: float, direction: int = +1) -> float:
    """Envelope area ``pi (1 +/- 1/v_g)``."""
    return math.pi * (1.0 + direction / v_g)


def analytic_soliton(coords, v_g: float, tau: float, phi: float, center: float, omega0: float,
                     Omega0: float, axis: str = "space", scale: float = 1.0) -> np.ndarray:
    """Forward-wave gap soliton on one axis, in units of the incident peak field.

    Fixed time: ``sech(2 pi (xi - xi_m) / (v_g tau)) cos(2 pi (xi - xi_m) + phi)``;
    fixed position: ``sech(-(T - T_m) / tau) cos(-(T - T_m) + phi)``; both scaled
    by ``omega0 (1 + 1/v_g) / (tau Omega0)``.
    """
    if not 0 < v_g <= 1:
        raise AnalysisError(f"v_g must lie in (0, 1] (got {v_g})")
    if not tau > 0:
        raise AnalysisError(f"tau must be positive (got {tau})")
    x = np.asarray(coords, dtype=np.float64) - center
    amp = scale * soliton_amplitude(v_g, tau, omega0) / Omega0
    if _axis(axis) == SPACE:
        arg, carrier = TWO_PI * x / (v_g * tau), TWO_PI * x
    else:
        arg, carrier = -x / tau, -x
    return amp * np.cos(carrier + phi) / np.cosh(np.clip(arg, -700, 700))


def fit_soliton_data(coords, field_data, axis: str, omega0: float, Omega0: float,
                     v_g: float, tau: float, center: float, phase: float,
                     route: str = "free", max_nfev: int = 2000) -> SolitonFit:
    """Least-squares fit of :func:`analytic_soliton` to sampled field data.

    ``route='free'`` refines ``(v_g, tau, center, phase)`` with the amplitude
    tied to ``(v_g, tau)``; ``route='measured'`` freezes ``v_g`` and ``tau`` at
    the given values and refines ``(scale, center, phase)`` instead.  The
    residual is evaluated on ``+/- 4 tau`` (in sech argument) around the centre
    seed.
    """
    axis = _axis(axis)
    coords = np.asarray(coords, dtype=np.float64)
    field_data = np.asarray(field_data, dtype=np.float64)
    half = 4.0 * (v_g * tau / TWO_PI if axis == SPACE else tau)
    sel = (coords >= center - half) & (coords <= center + half)
    if sel.sum() < 8:
        raise AnalysisError("fit window holds fewer than 8 samples")
    x, y = coords[sel], field_data[sel]
    # scale the centre parameter to order one in units of a carrier period
    period = _carrier_period(axis)

    if route == "free":
        def unpack(p):
            return p[0], p[1], center + p[2] * period, p[3], 1.0
        p0 = np.array([v_g, tau, 0.0, phase])
        lower = [1e-3, 1e-3, -np.inf, -np.inf]
        upper = [1.0, np.inf, np.inf, np.inf]
    elif route == "measured":
        def unpack(p):
            return v_g, tau, center + p[1] * period, p[2], p[0]
        p0 = np.array([1.0, 0.0, phase])
        lower = [0.0, -np.inf, -np.inf]
        upper = [np.inf, np.inf, np.inf]
    else:
        raise AnalysisError(f"unknown fit route {route!r}")
    p0 = np.clip(p0, np.array(lower) + 1e-12, np.array(upper))

    def residual(p):
        vg, ta, c, ph, sc = unpack(p)
        return analytic_soliton(x, vg, ta, ph, c, omega0, Omega0, axis, sc) - y

    res = optimize.least_squares(residual, p0, bounds=(lower, upper), method="trf",
                                 x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    vg, ta, c, ph, sc = unpack(res.x)
    rms = float(np.sqrt(np.mean(res.fun ** 2)))
    fit = SolitonFit(v_g=float(vg), tau=float(ta), center=float(c), phase=float(ph % TWO_PI),
                     amplitude_scale=float(sc), rms_residual=rms, axis=axis, route=route,
                     converged=bool(res.status > 0))
    if res.status <= 0:
        raise FitError(f"soliton fit did not converge: {res.message}", best=replace(fit, converged=False))
    return fit


def _seed_velocity(record: RunRecord) -> float:
    lo, hi = _structure_window(record)
    inside = []
    for snap in record.snapshots:
        try:
            env = envelope(record, SPACE, snap.t_ps, window=(lo, hi))
        except AnalysisError:
            continue
        lobes = detect_lobes(env, 0.3)
        if len(lobes) == 1 and lo + 2 < lobes[0].position < hi - 2:
            inside.append(snap.t_ps)
    if len(inside) >= 2:
        v = group_velocity(record, inside[0], inside[-1])
        if isinstance(v, float) and 0 < v <= 1:
            return v
    return 1.0


def fit_soliton(record: RunRecord, snapshot_t: float | None = None, probe_xi: float | None = None,
                v_g: float | None = None, route: str = "free",
                region: tuple[float, float] | None = None) -> SolitonFit:
    """Fit the forward-wave soliton to a snapshot (space axis) or a probe series (time axis).

    Seeds: ``v_g`` from the snapshots (unless given), ``tau`` from the intensity
    FWHM divided by 1.76, centre from the envelope peak and phase from the
    analytic-signal phase there.
    """
    if (snapshot_t is None) == (probe_xi is None):
        raise AnalysisError("give exactly one of snapshot_t or probe_xi")
    if snapshot_t is not None:
        axis, loc = SPACE, snapshot_t
        region = region or _structure_window(record)
    else:
        axis, loc = TIME, probe_xi
    data, coords, _ = _field(record, axis, loc)
    sl = _window_slice(coords, region)
    data, coords = data[sl], coords[sl]
    v_seed = _seed_velocity(record) if v_g is None else v_g
    env = analytic_envelope(data, coords, axis)
    k = _dominant_peak(env)
    center, _ = _parabolic_peak(env.samples, coords, k)
    tau = _to_time(_half_max_width(env.samples ** 2, coords, k), axis, v_seed) / SECH_FWHM
    n = len(data)
    analytic = signal.hilbert(data, sfft.next_fast_len(2 * n))[:n]
    theta = float(np.angle(np.interp(center, coords, analytic.real) + 1j * np.interp(center, coords, analytic.imag)))
    # cos(-(T - T_m) + phi) = cos((T - T_m) - phi): the analytic phase at T_m is -phi
    phase = theta if axis == SPACE else -theta
    return fit_soliton_data(coords, data, axis, record.pulse.omega0, record.pulse.Omega0,
                            min(v_seed, 1.0), tau, center, phase, route=route)


def inversion_stats(record: RunRecord, snapshot_t: float) -> InversionStats:
    """Mean and maximum inversion per medium layer at one snapshot."""
    try:
        snap = record.snapshot(snapshot_t)
    except KeyError as exc:
        raise AnalysisError(str(exc)) from None
    xi = record.grid.xi
    stats = []
    for n, (a, b) in enumerate(record.profile.layers()):
        w = snap.w[a:b]
        stats.append(LayerStat(layer=n, xi_start=float(xi[a]), xi_end=float(xi[b - 1] + record.grid.dxi),
                               mean_w=float(w.mean()), max_w=float(w.max())))
    return InversionStats(t_ps=snap.t_ps, layers=stats)


def envelope_correlation(a: Envelope, b: Envelope, half_width: float) -> float:
    """Normalised overlap of two envelopes after aligning their peaks.

    Both are cut to ``+/- half_width`` around their peak and compared on a's
    sample positions; 1 means identical shape.
    """
    pa, _ = a.peak()
    pb, _ = b.peak()
    rel = np.arange(-half_width, half_width + 0.5 * a.step, a.step)
    ya = np.interp(pa + rel, a.coordinates, a.samples, left=0.0, right=0.0)
    yb = np.interp(pb + rel, b.coordinates, b.samples, left=0.0, right=0.0)
    den = math.sqrt(float(np.dot(ya, ya) * np.dot(yb, yb)))
    if den == 0:
        raise AnalysisError("cannot correlate a zero envelope")
    return float(np.dot(ya, yb) / den)


def energy_fraction(record: RunRecord, snapshot_t: float, region: tuple[float, float]) -> float:
    """Share of the incident field energy found in ``region`` at a snapshot.

    Uses ``E^2`` only, which equals half the energy density of a free
    travelling wave; intended for pulses that have left the medium.
    """
    snap = record.snapshot(snapshot_t)
    xi = record.grid.xi
    E0 = record.pulse.waveform(xi, record.xi0)
    sel = (xi >= region[0]) & (xi <= region[1])
    return float(np.sum(snap.E[sel] ** 2) / np.sum(E0 ** 2))

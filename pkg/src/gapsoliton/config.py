"""JSON experiment configuration.

Every section is optional except ``medium``; missing keys take the defaults
of the corresponding dataclass and unknown keys are rejected.  Lengths may be
written as fractions (``"1/400"``) and infinite lifetimes as ``"inf"`` or
``null``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from gapsoliton.engine import GridSpec, RecorderSchedule, SimulationConfig, StepperConfig
from gapsoliton.model import ConfigError, MediumSpec, PulseSpec, RelaxationSpec, build_medium_profile

DEFAULT_MARGIN = 20.0
_TOP_LEVEL = {"grid", "medium", "pulse", "relaxation", "stepper", "recorders", "t_end_ps",
              "analyses", "output_dir", "binary_snapshots", "deterministic"}
_SECTIONS = {
    "grid": GridSpec,
    "medium": MediumSpec,
    "pulse": PulseSpec,
    "relaxation": RelaxationSpec,
    "stepper": StepperConfig,
    "recorders": RecorderSchedule,
}
_ANALYSIS_KEYS = {"name", "op"}


class ConfigParseError(ConfigError):
    """The file is not valid JSON; carries line and column."""

    def __init__(self, path, line, column, msg):
        super().__init__(f"{path}:{line}:{column}: {msg}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class AnalysisRequest:
    """One named analysis, e.g. ``{"name": "out_cycles", "op": "cycle_number", "probe_xi": 205}``."""

    name: str
    op: str
    args: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "op": self.op, **self.args}


@dataclass(frozen=True)
class ExperimentConfig:
    simulation: SimulationConfig
    analyses: tuple[AnalysisRequest, ...] = ()
    output_dir: str = "runs/default"
    binary_snapshots: bool = False
    deterministic: bool = True


def _number(value, where):
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if value is None:
        return math.inf
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        s = value.strip().lower()
        if s in ("inf", "infinity"):
            return math.inf
        try:
            return float(Fraction(s))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"{where}: expected a number, got {value!r}")


_FLOAT_FIELDS = {
    "grid": {"dxi", "courant", "xi_min", "xi_max"},
    "medium": {"d", "delta", "L", "xi_start"},
    "pulse": {"omega0", "Omega0", "tau_p_fs", "truncation_tol"},
    "relaxation": {"T1_fs", "T2_fs"},
}


def _build_section(name: str, raw: dict[str, Any]):
    cls = _SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")
    kwargs = {}
    for key, value in raw.items():
        where = f"{name}.{key}"
        if key in _FLOAT_FIELDS.get(name, ()):
            kwargs[key] = _number(value, where)
        elif name == "pulse" and key == "xi0":
            kwargs[key] = None if value is None else _number(value, where)
        elif name == "recorders" and key in ("snapshot_times_ps", "probe_positions_xi"):
            if not isinstance(value, list):
                raise ConfigError(f"{where}: expected a list")
            kwargs[key] = tuple(_number(v, where) for v in value)
        elif name == "recorders" and key in ("spectrum_probe_stride", "trace_stride"):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{where}: expected an integer")
            kwargs[key] = value
        elif key in ("layered", "trace_conserved"):
            if not isinstance(value, bool):
                raise ConfigError(f"{where}: expected true or false")
            kwargs[key] = value
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    """Validate a decoded JSON document and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(raw) - _TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {unknown}; allowed: {sorted(_TOP_LEVEL)}")
    if "medium" not in raw:
        raise ConfigError("medium: section is required")
    medium = _build_section("medium", raw["medium"])
    grid_raw = dict(raw.get("grid", {}))
    if "xi_max" not in grid_raw:
        # structure end plus a vacuum margin, rounded up to a whole number of cells
        dxi = _number(grid_raw.get("dxi", GridSpec.dxi), "grid.dxi")
        xi_min = _number(grid_raw.get("xi_min", GridSpec.xi_min), "grid.xi_min")
        cells = math.ceil((medium.xi_end + DEFAULT_MARGIN - xi_min) / dxi - 1e-9)
        grid_raw["xi_max"] = xi_min + cells * dxi
    grid = _build_section("grid", grid_raw)
    sim = SimulationConfig(
        grid=grid,
        medium=medium,
        pulse=_build_section("pulse", raw.get("pulse", {})),
        relaxation=_build_section("relaxation", raw.get("relaxation", {})),
        stepper=_build_section("stepper", raw.get("stepper", {})),
        recorders=_build_section("recorders", raw.get("recorders", {})),
        t_end_ps=_number(raw.get("t_end_ps", 0.0), "t_end_ps"),
    )
    if not math.isfinite(sim.t_end_ps):
        raise ConfigError("t_end_ps must be finite")
    # surface alignment errors before any run starts
    built = grid.build()
    build_medium_profile(built, medium)
    for x in sim.recorders.probe_positions_xi:
        built.index_of(x)
    for t in sim.recorders.snapshot_times_ps:
        if t < 0 or t > sim.t_end_ps + 1e-12:
            raise ConfigError(f"recorders.snapshot_times_ps: {t} outside [0, {sim.t_end_ps}]")

    analyses = []
    names = set()
    for k, item in enumerate(raw.get("analyses", [])):
        if not isinstance(item, dict) or not _ANALYSIS_KEYS <= set(item):
            raise ConfigError(f"analyses[{k}]: needs 'name' and 'op'")
        if item["name"] in names:
            raise ConfigError(f"analyses[{k}]: duplicate name {item['name']!r}")
        names.add(item["name"])
        args = {key: val for key, val in item.items() if key not in _ANALYSIS_KEYS}
        analyses.append(AnalysisRequest(name=item["name"], op=item["op"], args=args))

    deterministic = raw.get("deterministic", True)
    if deterministic is not True:
        raise ConfigError("deterministic: runs have no stochastic elements; only true is accepted")
    binary = raw.get("binary_snapshots", False)
    if not isinstance(binary, bool):
        raise ConfigError("binary_snapshots: expected true or false")
    out = raw.get("output_dir", "runs/default")
    if not isinstance(out, str):
        raise ConfigError("output_dir: expected a string")
    cfg = ExperimentConfig(simulation=sim, analyses=tuple(analyses), output_dir=out,
                           binary_snapshots=binary)
    from gapsoliton.pipeline import validate_analyses

    validate_analyses(cfg)
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read and validate a JSON configuration file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(path, exc.lineno, exc.colno, exc.msg) from None
    return config_from_dict(raw)


def _plain(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    sim = cfg.simulation
    out: dict[str, Any] = {}
    for name in ("grid", "medium", "pulse", "relaxation", "stepper", "recorders"):
        section = getattr(sim, name)
        out[name] = {f.name: _plain(getattr(section, f.name)) for f in dataclasses.fields(section)}
    out["t_end_ps"] = sim.t_end_ps
    out["analyses"] = [a.to_dict() for a in cfg.analyses]
    out["output_dir"] = cfg.output_dir
    out["binary_snapshots"] = cfg.binary_snapshots
    out["deterministic"] = cfg.deterministic
    return out


def serialize_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=False) + "\n"


def set_field(raw: dict[str, Any], dotted: str, value) -> dict[str, Any]:
    """Copy of ``raw`` with ``a.b.c`` set to ``value``."""
    out = json.loads(json.dumps(raw))
    keys = dotted.split(".")
    node = out
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted!r}: {key!r} is not a section")
    node[keys[-1]] = value
    return out

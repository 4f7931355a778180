"""Batch execution: run, sweep and re-analyse experiments."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from gapsoliton import analysis as an
from gapsoliton import records
from gapsoliton.config import ExperimentConfig, AnalysisRequest, config_from_dict, config_to_dict, set_field
from gapsoliton.engine import RunRecord, run
from gapsoliton.model import ConfigError, build_medium_profile

log = logging.getLogger(__name__)

SPECTRUM_FMAX = 6.0


def _version() -> str:
    from gapsoliton import __version__

    return __version__


def _source(args):
    if ("snapshot_t" in args) == ("probe_xi" in args):
        raise ConfigError("give exactly one of snapshot_t or probe_xi")


def _gate_T(record: RunRecord, args) -> tuple[float, float] | None:
    gate = args.get("gate_fs")
    if gate is None:
        return None
    return gate[0] * record.pulse.omega0, gate[1] * record.pulse.omega0


def _envelope(record: RunRecord, args) -> an.Envelope:
    if "snapshot_t" in args:
        return an.envelope(record, "space", args["snapshot_t"], window=args.get("window_xi"))
    return an.envelope(record, "time", args["probe_xi"], window=_gate_T(record, args))


def _op_cycle_number(record, args, ctx):
    env = _envelope(record, args)
    return an.cycle_number(env, carrier_omega=args.get("carrier_omega", 1.0), v_g=args.get("v_g"))


def _op_pulse_area(record, args, ctx):
    env = _envelope(record, args)
    area = an.pulse_area(env, record.pulse.Omega0, record.pulse.omega0, v_g=args.get("v_g"))
    return {"area": area, "area_over_pi": area / math.pi}


def _op_group_velocity(record, args, ctx):
    return an.group_velocity(record, args["t1"], args["t2"], region=args.get("window_xi"))


def _op_spectrum(record, args, ctx):
    if "snapshot_t" in args:
        spec = an.spectrum(record, snapshot_t=args["snapshot_t"], window=args.get("window", "hann"),
                           gate=args.get("window_xi"))
    else:
        spec = an.spectrum(record, probe_xi=args["probe_xi"], window=args.get("window", "hann"),
                           gate=_gate_T(record, args))
    fname = f"spectrum_{ctx['name']}.csv"
    keep = spec.frequencies <= args.get("max_frequency", SPECTRUM_FMAX)
    if ctx["out"] is not None:
        records.write_csv(ctx["out"] / fname, ["omega_over_omega0", "power"],
                          [spec.frequencies[keep], spec.power[keep]])
        ctx["files"].append(fname)
    return {"peak_frequency": spec.peak_frequency(args.get("min_frequency", 0.25)),
            "window": spec.window, "gate_fs": args.get("gate_fs"), "window_xi": args.get("window_xi"),
            "file": fname}


def _op_fit_soliton(record, args, ctx):
    kw = {"route": args.get("route", "free"), "v_g": args.get("v_g")}
    if "snapshot_t" in args:
        fit = an.fit_soliton(record, snapshot_t=args["snapshot_t"], region=args.get("window_xi"), **kw)
    else:
        fit = an.fit_soliton(record, probe_xi=args["probe_xi"], region=_gate_T(record, args), **kw)
    out = dataclasses.asdict(fit)
    out["phase_over_pi"] = fit.phase_over_pi
    return out


def _op_detect_lobes(record, args, ctx):
    env = _envelope(record, args)
    lobes = an.detect_lobes(env, args.get("threshold_frac", 0.1))
    strongest = max(range(len(lobes)), key=lambda k: lobes[k].peak) if lobes else None
    return {"count": len(lobes), "lobes": [dataclasses.asdict(lb) for lb in lobes],
            "leading_is_strongest": bool(lobes) and strongest == len(lobes) - 1}


def _op_inversion_stats(record, args, ctx):
    st = an.inversion_stats(record, args["snapshot_t"])
    return {"n_layers": len(st.layers), "n_inverted": len(st.inverted),
            "max_w": max((s.max_w for s in st.layers), default=None),
            "inverted_layers": [dataclasses.asdict(s) for s in st.inverted]}


def _op_energy_fraction(record, args, ctx):
    region = args.get("window_xi") or (record.profile.spec.xi_end, record.grid.xi_max)
    return an.energy_fraction(record, args["snapshot_t"], tuple(region))


def _op_envelope_correlation(record, args, ctx):
    window = args.get("window_xi") or (record.profile.spec.xi_start, record.profile.spec.xi_end)
    a = an.envelope(record, "space", args["t_a"], window=window)
    b = an.envelope(record, "space", args["t_b"], window=window)
    return an.envelope_correlation(a, b, args.get("half_width", 3.0))


_SOURCE = {"snapshot_t", "probe_xi", "window_xi", "gate_fs"}
OPS: dict[str, tuple[Callable, set[str], set[str]]] = {
    # op: (handler, required args, optional args)
    "cycle_number": (_op_cycle_number, set(), _SOURCE | {"carrier_omega", "v_g"}),
    "pulse_area": (_op_pulse_area, set(), _SOURCE | {"v_g"}),
    "group_velocity": (_op_group_velocity, {"t1", "t2"}, {"window_xi"}),
    "spectrum": (_op_spectrum, set(), _SOURCE | {"window", "min_frequency", "max_frequency"}),
    "fit_soliton": (_op_fit_soliton, set(), _SOURCE | {"route", "v_g"}),
    "detect_lobes": (_op_detect_lobes, set(), _SOURCE | {"threshold_frac"}),
    "inversion_stats": (_op_inversion_stats, {"snapshot_t"}, set()),
    "energy_fraction": (_op_energy_fraction, {"snapshot_t"}, {"window_xi"}),
    "envelope_correlation": (_op_envelope_correlation, {"t_a", "t_b"}, {"half_width", "window_xi"}),
}
_NEEDS_SOURCE = {"cycle_number", "pulse_area", "spectrum", "fit_soliton", "detect_lobes"}


def validate_request(req: AnalysisRequest) -> None:
    if req.op not in OPS:
        raise ConfigError(f"analysis {req.name!r}: unknown op {req.op!r}; known: {sorted(OPS)}")
    _, required, optional = OPS[req.op]
    missing = required - set(req.args)
    if missing:
        raise ConfigError(f"analysis {req.name!r}: missing argument(s) {sorted(missing)}")
    unknown = set(req.args) - required - optional
    if unknown:
        raise ConfigError(f"analysis {req.name!r}: unknown argument(s) {sorted(unknown)}")
    if req.op in _NEEDS_SOURCE:
        try:
            _source(req.args)
        except ConfigError as exc:
            raise ConfigError(f"analysis {req.name!r}: {exc}") from None


def validate_analyses(cfg: ExperimentConfig) -> None:
    for req in cfg.analyses:
        validate_request(req)


def run_analyses(record: RunRecord, requests, out: Path | None) -> tuple[dict[str, Any], list[str]]:
    """Evaluate requests in order; returns results keyed by name and files written."""
    results: dict[str, Any] = {}
    ctx = {"out": out, "files": []}
    for req in requests:
        validate_request(req)
        handler = OPS[req.op][0]
        ctx["name"] = req.name
        try:
            results[req.name] = _jsonable(handler(record, req.args, ctx))
        except (an.AnalysisError, KeyError) as exc:
            raise an.AnalysisError(f"analysis {req.name!r} ({req.op}): {exc}") from exc
    return results, ctx["files"]


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def scalar_metrics(results: dict[str, Any]) -> dict[str, Any]:
    """Flatten results to scalars: ``name`` or ``name.key`` (one level deep)."""
    flat: dict[str, Any] = {}
    for name, value in results.items():
        if isinstance(value, (int, float, bool)) or value is None:
            flat[name] = value
        elif isinstance(value, dict):
            for k, v in value.items():
                if isinstance(v, (int, float, bool)) and not isinstance(v, str):
                    flat[f"{name}.{k}"] = v
    return flat


def _record_skeleton(cfg: ExperimentConfig) -> RunRecord:
    sim = cfg.simulation
    grid = sim.grid.build()
    return RunRecord(grid=grid, profile=build_medium_profile(grid, sim.medium), pulse=sim.pulse, xi0=math.nan,
                     snapshots=[], probes=[], conserved=None, manifest={})


def cmd_run(cfg: ExperimentConfig, out: Path | str | None = None) -> tuple[Path, dict[str, Any]]:
    """Simulate, write the record, evaluate the requested analyses and write the manifest."""
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    sim = cfg.simulation
    record = run(sim)
    files = records.write_record(record, out, binary=cfg.binary_snapshots)
    results, extra = run_analyses(record, cfg.analyses, out)
    _dump(out / "results.json", {"analyses": results, "metrics": scalar_metrics(results)})
    files += extra + ["results.json"]
    records.write_manifest(out, files, {
        "config": config_to_dict(cfg),
        "code_version": _version(),
        "n_cells": record.grid.n_cells,
        "n_steps": record.n_steps,
        "wall_clock_s": round(time.perf_counter() - t0, 3),
    })
    return out, results


def load_run(run_dir: Path | str) -> tuple[ExperimentConfig, RunRecord, dict[str, Any]]:
    """Verify a run directory and rebuild its record without simulating."""
    run_dir = Path(run_dir)
    manifest = records.verify_manifest(run_dir)
    cfg = config_from_dict(manifest["config"])
    record = records.load_record(run_dir, _record_skeleton(cfg))
    return cfg, record, manifest


def cmd_analyze(run_dir: Path | str, spec: list[dict[str, Any]] | dict[str, Any] | Path | str,
                results_name: str | None = None) -> dict[str, Any]:
    """Re-run analyses on a stored record; results go to ``results_<name>.json``."""
    run_dir = Path(run_dir)
    if isinstance(spec, (str, Path)):
        spec_path = Path(spec)
        spec = json.loads(spec_path.read_text(encoding="utf-8"))
        results_name = results_name or spec_path.stem
    items = spec["analyses"] if isinstance(spec, dict) else spec
    requests = []
    for k, item in enumerate(items):
        if "name" not in item or "op" not in item:
            raise ConfigError(f"analyses[{k}]: needs 'name' and 'op'")
        requests.append(AnalysisRequest(item["name"], item["op"],
                                        {a: b for a, b in item.items() if a not in ("name", "op")}))
    _, record, manifest = load_run(run_dir)
    try:
        results, files = run_analyses(record, requests, run_dir)
    except FileNotFoundError as exc:
        raise an.AnalysisError(str(exc)) from None
    name = f"results_{results_name or 'analyze'}.json"
    _dump(run_dir / name, {"analyses": results, "metrics": scalar_metrics(results)})
    checks = set(manifest["checksums"]) | set(files) | {name}
    extra = {k: v for k, v in manifest.items() if k != "checksums"}
    records.write_manifest(run_dir, sorted(checks), extra)
    return results


def parse_axis(spec: str) -> tuple[str, list[Any]]:
    """``'medium.d=0.1,0.2'`` -> ``('medium.d', [0.1, 0.2])``."""
    if "=" not in spec:
        raise ConfigError(f"axis {spec!r} must look like field=v1,v2,...")
    key, vals = spec.split("=", 1)
    values = []
    for tok in vals.split(","):
        tok = tok.strip()
        try:
            values.append(json.loads(tok))
        except json.JSONDecodeError:
            values.append(tok)
    if not key or not values:
        raise ConfigError(f"axis {spec!r} names no field or values")
    return key.strip(), values


def _point_done(point_dir: Path, cfg_dict: dict[str, Any]) -> dict[str, Any] | None:
    try:
        manifest = records.verify_manifest(point_dir)
    except (FileNotFoundError, records.IntegrityError):
        return None
    if manifest.get("config") != cfg_dict:
        return None
    return json.loads((point_dir / "results.json").read_text(encoding="utf-8"))["analyses"]


def ensure_run(cfg: ExperimentConfig, out: Path | str) -> tuple[bool, dict[str, Any]]:
    """Run ``cfg`` into ``out`` unless a verified run of the same config is already there.

    Returns ``(reused, results)``.
    """
    done = _point_done(Path(out), config_to_dict(cfg))
    if done is not None:
        return True, done
    return False, cmd_run(cfg, out)[1]


def _run_point(raw: dict[str, Any], point_dir: str) -> tuple[str, dict[str, Any] | str]:
    try:
        reused, results = ensure_run(config_from_dict(raw), point_dir)
        return ("skipped" if reused else "ok"), results
    except Exception as exc:  # noqa: BLE001 - a failed point must not abort the sweep
        return "failed", f"{type(exc).__name__}: {exc}"


def cmd_sweep(template: dict[str, Any] | Path | str, axes: list[tuple[str, list[Any]]],
              out: Path | str | None = None, threads: int = 1) -> Path:
    """Run every point of the axis product and aggregate scalar metrics into ``sweep.csv``.

    Rows follow the axis order (first axis outermost).  Points whose directory
    already holds a verified run of the same configuration are not re-run.
    """
    if isinstance(template, (str, Path)):
        template = json.loads(Path(template).read_text(encoding="utf-8"))
    if not 1 <= len(axes) <= 2:
        raise ConfigError("a sweep takes one or two axes")
    out = Path(out or template.get("output_dir", "runs/sweep"))
    out.mkdir(parents=True, exist_ok=True)
    names = [a for a, _ in axes]
    points = list(itertools.product(*[v for _, v in axes]))
    jobs = []
    for k, values in enumerate(points):
        raw = template
        for key, val in zip(names, values):
            raw = set_field(raw, key, val)
        raw = set_field(raw, "output_dir", str(out / f"point_{k:03d}"))
        jobs.append((raw, str(out / f"point_{k:03d}")))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_point, *zip(*jobs)))
    else:
        outcomes = [_run_point(*job) for job in jobs]

    rows = []
    columns: list[str] = []
    for values, (status, payload) in zip(points, outcomes):
        row: dict[str, Any] = dict(zip(names, values))
        row["status"] = "ok" if status == "skipped" else status
        if status == "failed":
            row["error"] = payload
            log.warning("sweep point %s failed: %s", values, payload)
        else:
            metrics = scalar_metrics(payload)
            row.update(metrics)
            columns += [c for c in metrics if c not in columns]
        rows.append(row)
    header = names + ["status"] + columns + ["error"]
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row.get(h)) for h in header])
    return out / "sweep.csv"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return records.format_float(v)
    return v

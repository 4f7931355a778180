"""On-disk layout of a run directory.

::

    run-dir/
      manifest.json         config echo, code version, counts, checksums
      record.json           index of the files below with actual times
      snapshot_<t>ps.csv    xi, E, w
      probe_xi<x>.csv       t_fs, E
      conserved.csv         t_fs, energy, norm_deviation (when traced)
      results.json          analysis results
      spectrum_<name>.csv   omega_over_omega0, power

Floats are written with ``repr`` (shortest round-trip form), so re-reading a
CSV gives back the exact doubles and rewriting it gives identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from gapsoliton.engine import ConservedTrace, Probe, RunRecord, Snapshot

BINARY_MAGIC = b"GSF1"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


class IntegrityError(RuntimeError):
    """A run directory's files do not match its manifest."""


def format_float(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = zip(*[map(format_float, c) for c in columns])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        fh.writelines(",".join(r) + "\n" for r in rows)


def read_csv(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing record file: {path.name}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        cols: list[list[float]] = [[] for _ in header]
        for line in fh:
            for c, tok in zip(cols, line.rstrip("\n").split(",")):
                c.append(float(tok))
    return {h: np.array(c, dtype=np.float64) for h, c in zip(header, cols)}


def write_binary(path: Path, data: np.ndarray) -> None:
    """Flat little-endian float64 file with a 16-byte header (magic, version, length)."""
    arr = np.ascontiguousarray(data, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, arr.size))
        fh.write(arr.tobytes())


def read_binary(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise IntegrityError(f"{path}: truncated header")
    magic, version, n = _HEADER.unpack_from(raw)
    if magic != BINARY_MAGIC or version != BINARY_VERSION:
        raise IntegrityError(f"{path}: not a gapsoliton binary file (magic {magic!r}, version {version})")
    body = raw[_HEADER.size:]
    if len(body) != 8 * n:
        raise IntegrityError(f"{path}: expected {n} values, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").astype(np.float64)


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _tag(x: float) -> str:
    return f"{x:.4f}".replace("-", "m")


def write_record(record: RunRecord, out: Path, binary: bool = False) -> list[str]:
    """Write snapshots, probes and traces; returns the file names written."""
    out.mkdir(parents=True, exist_ok=True)
    omega0 = record.pulse.omega0
    xi = record.grid.xi
    files: list[str] = []
    index: dict[str, Any] = {"snapshots": [], "probes": [], "conserved": None}
    requested = record.manifest.get("snapshot_times_ps") or [s.t_ps for s in record.snapshots]
    for t_req, snap in zip(requested, record.snapshots):
        name = f"snapshot_{_tag(t_req)}ps.csv"
        write_csv(out / name, ["xi", "E", "w"], [xi, snap.E, snap.w])
        entry = {"t_ps_requested": t_req, "t_ps": snap.t_ps, "step": snap.step, "file": name}
        files.append(name)
        if binary:
            for comp in ("E", "w"):
                bname = f"snapshot_{_tag(t_req)}ps.{comp}.f64"
                write_binary(out / bname, getattr(snap, comp))
                files.append(bname)
                entry[f"binary_{comp}"] = bname
        index["snapshots"].append(entry)
    stride = record.manifest.get("spectrum_probe_stride", 1)
    for probe in record.probes:
        name = f"probe_xi{_tag(probe.xi)}.csv"
        write_csv(out / name, ["t_fs", "E"], [probe.T / omega0, probe.E])
        index["probes"].append({"xi": probe.xi, "index": probe.index, "stride": stride, "file": name})
        files.append(name)
    if record.conserved is not None:
        c = record.conserved
        write_csv(out / "conserved.csv", ["t_fs", "energy", "norm_deviation"],
                  [c.T / omega0, c.energy, c.norm_deviation])
        index["conserved"] = "conserved.csv"
        files.append("conserved.csv")
    index["xi0"] = record.xi0
    index["n_steps"] = record.n_steps
    (out / "record.json").write_text(json.dumps(index, indent=2) + "\n", encoding="utf-8")
    files.append("record.json")
    return files


def write_manifest(out: Path, files: list[str], extra: dict[str, Any]) -> dict[str, Any]:
    manifest = dict(extra)
    manifest["checksums"] = {name: sha256(out / name) for name in sorted(set(files))}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def read_manifest(run_dir: Path) -> dict[str, Any]:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no manifest.json in {run_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def verify_manifest(run_dir: Path, manifest: dict[str, Any] | None = None) -> dict[str, Any]:
    """Raise :class:`IntegrityError` unless every listed file matches its checksum."""
    run_dir = Path(run_dir)
    manifest = manifest or read_manifest(run_dir)
    for name, digest in manifest.get("checksums", {}).items():
        path = run_dir / name
        if not path.exists():
            raise IntegrityError(f"{name}: listed in manifest but missing")
        if sha256(path) != digest:
            raise IntegrityError(f"{name}: checksum mismatch")
    return manifest


def load_record(run_dir: Path, record_base: RunRecord) -> RunRecord:
    """Re-read arrays from ``run_dir`` into a record skeleton (grid, profile, pulse).

    Probe sample ``k`` is placed at ``T = k * stride * dT``, exactly as the
    engine stored it.
    """
    run_dir = Path(run_dir)
    index = json.loads((run_dir / "record.json").read_text(encoding="utf-8"))
    grid = record_base.grid
    snapshots = []
    for entry in index["snapshots"]:
        data = read_csv(run_dir / entry["file"])
        snapshots.append(Snapshot(t_ps=entry["t_ps"], step=entry["step"], E=data["E"], w=data["w"]))
    probes = []
    for entry in index["probes"]:
        data = read_csv(run_dir / entry["file"])
        n = len(data["E"])
        probes.append(Probe(xi=entry["xi"], index=entry["index"],
                            T=np.arange(n) * (entry["stride"] * grid.dT), E=data["E"]))
    conserved = None
    if index.get("conserved"):
        data = read_csv(run_dir / index["conserved"])
        conserved = ConservedTrace(T=data["t_fs"] * record_base.pulse.omega0, energy=data["energy"],
                                   norm_deviation=data["norm_deviation"])
    return RunRecord(grid=grid, profile=record_base.profile, pulse=record_base.pulse, xi0=index["xi0"],
                     snapshots=snapshots, probes=probes, conserved=conserved,
                     manifest=record_base.manifest, n_steps=index["n_steps"])

"""Binary snapshot files and model-bundle directories.

Matrix file layout (little-endian)::

    b"PMK1" | u32 version | u32 rows | u32 cols | f64 payload, column-major

A snapshot file carries a JSON sidecar ``<path>.meta.json`` with the
parameter, ``t0``, ``dt`` and QoI names.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import ObservableLift, ParameterPoint, SnapshotSet
from .errors import FormatError

MAGIC = b"PMK1"
VERSION = 1
BUNDLE_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_matrix(path, m: np.ndarray) -> None:
    m = np.asarray(m, dtype="<f8")
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise FormatError(f"only 2-D matrices can be written, got shape {m.shape}")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(m.tobytes(order="F"))


def read_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    payload = raw[_HEADER.size :]
    if len(payload) != 8 * rows * cols:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, expected {8 * rows * cols}")
    return np.frombuffer(payload, dtype="<f8").reshape((rows, cols), order="F").astype(float)


def _meta_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def write_snapshot_file(path, s: SnapshotSet, extra: dict | None = None) -> None:
    write_matrix(path, s.data)
    meta = {
        "parameter": list(s.parameter.values),
        "t0": s.t0,
        "dt": s.dt,
        "qoi_names": list(s.qoi_names),
    }
    if extra:
        meta.update(extra)
    _meta_path(path).write_text(json.dumps(meta, indent=2))


def read_snapshot_file(path) -> SnapshotSet:
    data = read_matrix(path)
    meta_path = _meta_path(path)
    if not meta_path.exists():
        raise FormatError(f"{path}: missing sidecar {meta_path.name}")
    meta = json.loads(meta_path.read_text())
    return SnapshotSet(data, meta["t0"], meta["dt"], ParameterPoint(meta["parameter"]), meta.get("qoi_names", ()))


def save_bundle(path, ensemble) -> None:
    """Write a :class:`~promkit.dmd.TrainedEnsemble` as a bundle directory.

    Only the upper triangle ``i <= j`` of the Gram table is stored; the
    lower blocks are transposes.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n_mc = len(ensemble.roms)
    for i, rom in enumerate(ensemble.roms):
        write_matrix(path / f"V_{i}.pmk", rom.V)
        write_matrix(path / f"K_{i}.pmk", rom.K)
        write_matrix(path / f"sigma_{i}.pmk", rom.singular_values)
    for i in range(n_mc):
        for j in range(i, n_mc):
            write_matrix(path / f"gram_{i}_{j}.pmk", ensemble.gram[i, j])
    manifest = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "lift": ensemble.lift.to_dict(),
        "rank": ensemble.rank,
        "observable_dim": ensemble.observable_dim,
        "parameters": [list(r.parameter.values) for r in ensemble.roms],
        "storage_count": ensemble.storage_count(),
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_bundle(path):
    from .dmd import LocalROM, TrainedEnsemble

    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise FormatError(f"{path}: no manifest.json")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != BUNDLE_FORMAT_VERSION:
        raise FormatError(f"unsupported bundle version {manifest.get('format_version')}")
    lift = ObservableLift.from_dict(manifest["lift"])
    roms = []
    for i, p in enumerate(manifest["parameters"]):
        roms.append(
            LocalROM(
                parameter=ParameterPoint(p),
                V=read_matrix(path / f"V_{i}.pmk"),
                K=read_matrix(path / f"K_{i}.pmk"),
                singular_values=read_matrix(path / f"sigma_{i}.pmk")[:, 0],
                lift=lift,
            )
        )
    n_mc, r = len(roms), manifest["rank"]
    gram = np.empty((n_mc, n_mc, r, r))
    for i in range(n_mc):
        for j in range(i, n_mc):
            g = read_matrix(path / f"gram_{i}_{j}.pmk")
            gram[i, j] = g
            gram[j, i] = g.T
    return TrainedEnsemble(roms, gram)

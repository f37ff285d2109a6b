"""Snapshot binary format, ensemble manifests and CSV emission.

Snapshot layout (little-endian): magic b"EUST", u32 version = 1, u32 n,
f64 box_half_width, f64 time, f64 nu, f64 m, then n*n f64 kinetic-vorticity
values row-major.  Roundtrips are bit-exact.
"""

import struct
from pathlib import Path

import numpy as np

from eustat.errors import CorruptFieldError, FormatError
from eustat.grid import Grid, ScalarField
from eustat.radial import VorticityState

MAGIC = b"EUST"
VERSION = 1
_HEADER = struct.Struct("<4sIIdddd")


def fmt(x) -> str:
    """Shortest-roundtrip-safe float formatting (17 significant digits)."""
    return f"{float(x):.17g}"


def write_snapshot(path, state: VorticityState, time: float, nu: float) -> None:
    payload = np.ascontiguousarray(state.omega_kin.values, dtype="<f8")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        state.grid.n,
        float(state.grid.box_half_width),
        float(time),
        float(nu),
        float(state.m),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_snapshot(path):
    """-> (VorticityState, {"time": t, "nu": nu})."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n, box_half_width, time, nu, m = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * n * n
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, n)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise CorruptFieldError(f"{path}: non-finite value at flat index {idx}")
    grid = Grid(int(n), float(box_half_width))
    state = VorticityState(float(m), ScalarField(grid, values.astype(np.float64)))
    return state, {"time": float(time), "nu": float(nu)}


def write_manifest(path, sections) -> None:
    """Plain-text manifest: [section] headers, KEY=VALUE lines."""
    lines = []
    for name, entries in sections:
        lines.append(f"[{name}]")
        for key, value in entries:
            lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path):
    sections = {}
    current = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = {}
        elif "=" in line and current is not None:
            key, _, value = line.partition("=")
            sections[current][key] = value
        else:
            raise FormatError(f"{path}: unparseable manifest line {line!r}")
    return sections


def emit_plot_data(series, path) -> None:
    """Tidy long-format CSV: series_id,t,value.

    `series` maps a series id to a (times, values) pair.
    """
    lines = ["series_id,t,value"]
    for name, (ts, vals) in series.items():
        for t, v in zip(ts, vals):
            lines.append(f"{name},{fmt(t)},{fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_verdicts(reports, path) -> None:
    """Verdict CSV: law_id,time,lhs,rhs,margin,pass."""
    lines = ["law_id,time,lhs,rhs,margin,pass"]
    for report in reports:
        for law_id, t, lhs, rhs, margin, ok in report.rows():
            lines.append(f"{law_id},{fmt(t)},{fmt(lhs)},{fmt(rhs)},{fmt(margin)},{str(bool(ok)).lower()}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

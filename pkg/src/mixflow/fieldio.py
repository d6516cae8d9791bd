"""Bit-exact snapshot files (``.fld``) and trajectory directories.

A snapshot is one ASCII header line::

    MIXFLD1 nx=16 ny=16 lx=6.283185307179586 ly=6.283185307179586 time=0.0 kind=scalar name=rho

followed by little-endian float64 samples, y-index outer, x-index inner.
Vector snapshots store the x block then the y block.  A trajectory is a
directory of snapshots plus ``manifest.txt`` with one ``time filename`` pair
per line in increasing time order.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import FormatError
from .field import Grid, ScalarField, VectorField

MAGIC = "MIXFLD1"
MANIFEST = "manifest.txt"
_KEYS = ("nx", "ny", "lx", "ly", "time", "kind", "name")


def _header(field, time: float, name: str) -> bytes:
    if not name or any(c.isspace() or c == "=" for c in name):
        raise FormatError(f"invalid field name {name!r}")
    g = field.grid
    kind = "vector" if isinstance(field, VectorField) else "scalar"
    t = float(time)
    line = (f"{MAGIC} nx={g.nx} ny={g.ny} lx={g.lx!r} ly={g.ly!r} "
            f"time={t!r} kind={kind} name={name}\n")
    return line.encode("ascii")


def write_field(path, field, time: float = 0.0, name: str = "field") -> Path:
    path = Path(path)
    blocks = [field.x, field.y] if isinstance(field, VectorField) else [field.values]
    payload = b"".join(np.ascontiguousarray(b, dtype="<f8").tobytes() for b in blocks)
    with open(path, "wb") as fh:
        fh.write(_header(field, time, name))
        fh.write(payload)
    return path


def _parse_header(line: bytes) -> dict:
    try:
        text = line.decode("ascii").rstrip("\n")
    except UnicodeDecodeError as exc:
        raise FormatError("header is not ASCII") from exc
    parts = text.split(" ")
    if not parts or parts[0] != MAGIC:
        raise FormatError(f"bad magic string (expected {MAGIC})")
    meta = {}
    for item in parts[1:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise FormatError(f"malformed header token {item!r}")
        meta[key] = value
    missing = [k for k in _KEYS if k not in meta]
    if missing:
        raise FormatError(f"header missing keys {missing}")
    try:
        out = {
            "nx": int(meta["nx"]), "ny": int(meta["ny"]),
            "lx": float(meta["lx"]), "ly": float(meta["ly"]),
            "time": float(meta["time"]), "kind": meta["kind"], "name": meta["name"],
        }
    except ValueError as exc:
        raise FormatError(f"unparseable header value: {exc}") from exc
    if out["kind"] not in ("scalar", "vector"):
        raise FormatError(f"unknown kind {out['kind']!r}")
    return out


def read_field(path):
    """Return ``(field, meta)``; ``meta`` holds ``time`` and ``name``."""
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("missing header terminator")
    meta = _parse_header(data[: nl + 1])
    try:
        grid = Grid(meta["nx"], meta["ny"], meta["lx"], meta["ly"])
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    ncomp = 2 if meta["kind"] == "vector" else 1
    payload = data[nl + 1:]
    expected = 8 * ncomp * grid.size
    if len(payload) != expected:
        raise FormatError(f"payload has {len(payload) // 8} values, header declares "
                          f"{expected // 8}")
    arr = np.frombuffer(payload, dtype="<f8").astype(float)
    if not np.all(np.isfinite(arr)):
        raise FormatError("non-finite values in payload")
    if ncomp == 1:
        field = ScalarField(grid, arr)
    else:
        field = VectorField(grid, arr[: grid.size], arr[grid.size:])
    return field, {"time": meta["time"], "name": meta["name"]}


def write_trajectory(directory, times, fields, name: str = "field") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    times = [float(t) for t in times]
    if len(times) != len(fields):
        raise FormatError("times and fields differ in length")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise FormatError("trajectory times must be strictly increasing")
    lines = []
    for k, (t, f) in enumerate(zip(times, fields)):
        fname = f"{name}_{k:05d}.fld"
        write_field(directory / fname, f, time=t, name=name)
        lines.append(f"{t!r} {fname}\n")
    with open(directory / MANIFEST, "w", encoding="ascii") as fh:
        fh.writelines(lines)
    return directory


def read_trajectory(directory):
    """Return ``(times, fields)`` from a trajectory directory."""
    directory = Path(directory)
    try:
        text = (directory / MANIFEST).read_text(encoding="ascii")
    except FileNotFoundError as exc:
        raise FormatError(f"no {MANIFEST} in {directory}") from exc
    times, fields = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        t_str, _, fname = line.partition(" ")
        if os.sep in fname or fname.startswith(".."):
            raise FormatError(f"manifest entry escapes directory: {fname!r}")
        field, _ = read_field(directory / fname)
        times.append(float(t_str))
        fields.append(field)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise FormatError("manifest times are not increasing")
    return np.array(times), fields

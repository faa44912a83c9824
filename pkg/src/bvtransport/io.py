"""File formats: CSV logs, flat config files, PPM rasters, report text.

Everything here is deterministic: floats are written with Python's
shortest round-trip repr, rows follow the array iteration order, and no
timestamps or environment details enter the byte stream, so identical
inputs produce byte-identical files regardless of worker count.

Raster color map (documented contract): negative values are black
(0 0 0), exact zeros are white (255 255 255), positive values are brick
(200 60 60). This renders the three-state patterns (jets against
background, and material of either sign) without any scaling decisions.
"""

from __future__ import annotations

import os
from typing import Iterable

import numpy as np

from .errors import ConfigurationError
from .geometry import CellScalarField
from .solver import CONSERVED_COLUMNS, Trajectory
from .traces import TraceProfile

__all__ = [
    "fmt",
    "write_rows_csv",
    "write_snapshot_csv",
    "write_conserved_csv",
    "write_profile_csv",
    "parse_config",
    "emit_heatmap",
    "format_report",
    "write_report",
]


def fmt(x) -> str:
    """Shortest round-trip decimal form of a float; integers stay bare."""
    xf = float(x)
    if xf == int(xf) and abs(xf) < 1e15:
        return str(int(xf))
    return repr(xf)


def _ensure_dir(path: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


def write_rows_csv(path: str, header: Iterable[str], rows: Iterable) -> str:
    _ensure_dir(path)
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(c if isinstance(c, str) else fmt(c) for c in row) + "\n")
    return path


def write_snapshot_csv(path: str, snapshot: CellScalarField) -> str:
    """Cell values as t, r, y1, y2, u rows (r fastest axis last)."""
    if snapshot.time is None:
        raise ConfigurationError("snapshot has no time stamp")
    g = snapshot.grid
    t = snapshot.time

    def rows():
        rc, y1c, y2c = g.r_centers, g.y1_centers, g.y2_centers
        v = snapshot.values
        for i in range(g.nr):
            for j in range(g.n1):
                for l in range(g.n2):
                    yield (t, rc[i], y1c[j], y2c[l], v[i, j, l])

    return write_rows_csv(path, ("t", "r", "y1", "y2", "u"), rows())


def write_conserved_csv(path: str, trajectory: Trajectory) -> str:
    return write_rows_csv(path, CONSERVED_COLUMNS, trajectory.conserved)


def write_profile_csv(path: str, profile: TraceProfile) -> str:
    return write_rows_csv(
        path, ("t", "y1", "y2", "value", "source_tag", "orientation"), profile.to_rows()
    )


# ---------------------------------------------------------------------------
# config files


def parse_config(path: str) -> dict:
    """Flat key=value file; '#' starts a comment, blank lines are skipped.

    Values come back as strings; consumers coerce. Duplicate keys keep the
    last occurrence, which lets include-style layering work with plain
    concatenation.
    """
    out = {}
    with open(path) as f:
        for ln, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{ln}: expected key=value, got {raw.rstrip()!r}")
            key, val = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigurationError(f"{path}:{ln}: empty key")
            out[key] = val.strip()
    return out


# ---------------------------------------------------------------------------
# rasters


def _as_image_array(obj) -> np.ndarray:
    if isinstance(obj, TraceProfile):
        if obj.values is None:
            raise ConfigurationError("profile has no sampled grid to rasterize")
        v = obj.values
        if v.ndim == 3:
            if v.shape[0] != 1:
                raise ConfigurationError(
                    "profile spans several times; slice it to one before rasterizing"
                )
            v = v[0]
        return np.asarray(v, dtype=float)
    if isinstance(obj, CellScalarField):
        v = np.squeeze(obj.values)
        if v.ndim != 2:
            raise ConfigurationError(f"need a 2d slice, got shape {obj.values.shape}")
        return np.asarray(v, dtype=float)
    v = np.asarray(obj, dtype=float)
    if v.ndim != 2:
        raise ConfigurationError(f"need a 2d array, got shape {v.shape}")
    return v


def emit_heatmap(obj, path: str) -> str:
    """Write a plain (P3) portable pixmap of a 2d slice.

    Rows scan the first axis from index 0 at the top, columns the second
    axis from the left. Colors follow the sign map in the module docstring.
    """
    v = _as_image_array(obj)
    _ensure_dir(path)
    neg = v < 0.0
    pos = v > 0.0
    r = np.where(neg, 0, np.where(pos, 200, 255))
    gch = np.where(neg, 0, np.where(pos, 60, 255))
    b = np.where(neg, 0, np.where(pos, 60, 255))
    h, w = v.shape
    with open(path, "w", newline="\n") as f:
        f.write(f"P3\n{w} {h}\n255\n")
        for i in range(h):
            f.write(" ".join(f"{r[i, j]} {gch[i, j]} {b[i, j]}" for j in range(w)) + "\n")
    return path


# ---------------------------------------------------------------------------
# reports


def format_report(report) -> str:
    """Plain-text serialization of a suite report (duck-typed).

    One ``check`` line per record: name, status, measured value, bound,
    runtime. The global verdict goes first so a reader can stop there.
    """
    lines = [f"suite {report.suite}", f"verdict {report.verdict}"]
    for rec in report.checks:
        bound = "-" if rec.bound is None else fmt(rec.bound)
        lines.append(
            f"check {rec.name} status={rec.status} measured={fmt(rec.measured)} "
            f"bound={bound} runtime={rec.runtime:.3f}"
        )
    return "\n".join(lines) + "\n"


def write_report(path: str, report) -> str:
    _ensure_dir(path)
    with open(path, "w", newline="\n") as f:
        f.write(format_report(report))
    return path

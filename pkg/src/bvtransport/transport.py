"""Lagrangian side of the rotor blocks: flows, turns, evolved chessboards.

Everything here is exact. The square rotor moves each max-norm ring along
its own perimeter at constant speed, so trajectories are closed-form
perimeter walks; a quarter turn of the whole block is a rigid rotation. The
chessboard evolution is pure index bookkeeping on a 4x4 integer grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, ScheduleError
from .geometry import VelocityField

__all__ = [
    "FlowEvent",
    "ChessboardState",
    "flow_map",
    "quarter_turn",
    "evolve_chessboard",
    "pushforward_density",
]


@dataclass(frozen=True)
class FlowEvent:
    """Something the event-driven integrator stepped over."""

    kind: str  # "stage" | "corner"
    coord: float  # schedule coordinate at which it happened
    index: int = -1  # point index, -1 for collective events
    location: tuple = ()


@dataclass
class ChessboardState:
    """A 4x4 block of signed cells; grid[i, j] covers
    [i*cell, (i+1)*cell) x [j*cell, (j+1)*cell)."""

    grid: np.ndarray
    cell: float
    stage: str
    sigma: float = 1.0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.int8)
        if self.grid.shape != (4, 4):
            raise ConfigurationError("chessboard states live on a 4x4 cell grid")

    @property
    def tile(self) -> float:
        return 4.0 * self.cell

    def evaluate(self, y1, y2) -> np.ndarray:
        """Periodic lookup of the state's values."""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        i = np.floor((y1 % self.tile) / self.cell).astype(np.int64) % 4
        j = np.floor((y2 % self.tile) / self.cell).astype(np.int64) % 4
        return self.grid[i, j].astype(float)

    def is_coarse_chessboard(self) -> bool:
        """True when the state is the doubled-cell chessboard -sigma*parity."""
        ii, jj = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
        coarse = np.where((ii // 2 + jj // 2) % 2 == 0, 1, -1)
        return bool(np.array_equal(self.grid, (-self.sigma * coarse).astype(np.int8)))


def quarter_turn(y1, y2, center=(0.0, 0.0), sense: str = "cw"):
    """Rigid quarter turn about a block center; the net effect of one full
    side-time of the square rotor on every ring at once."""
    if sense not in ("cw", "ccw"):
        raise ConfigurationError(f"sense must be 'cw' or 'ccw', got {sense!r}")
    c1, c2 = center
    d1 = np.asarray(y1, dtype=float) - c1
    d2 = np.asarray(y2, dtype=float) - c2
    if sense == "cw":
        return c1 + d2, c2 - d1
    return c1 - d2, c2 + d1


def _perimeter_pos(v1, v2, c):
    """Position along the max-norm-c square in side units, in [0, 4).

    Counted counterclockwise from the bottom-right corner (c, -c): right
    side first, then top, left, bottom.
    """
    if v1 == c and v2 > -c:
        return (v2 + c) / (2.0 * c)
    if v2 == c:
        return 1.0 + (c - v1) / (2.0 * c)
    if v1 == -c:
        return 2.0 + (c - v2) / (2.0 * c)
    return 3.0 + (v1 + c) / (2.0 * c)


_CORNERS = ((1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0))  # at p = 0,1,2,3


def _corner_events(v1, v2, dtau, ccw, center, lam, c_start, index):
    """Enumerate corner passages of one point's perimeter walk.

    The walk starts at schedule coordinate c_start and covers dtau sides;
    backward (ccw) walks move toward smaller coordinates.
    """
    c = max(abs(v1), abs(v2))
    if c == 0.0 or dtau <= 0.0:
        return []
    p0 = _perimeter_pos(v1, v2, c)
    events = []
    if ccw:
        m = math.floor(p0) + 1
        while m <= p0 + dtau:
            cx, cy = _CORNERS[int(m) % 4]
            events.append(
                FlowEvent("corner", c_start - (m - p0) / lam, index, (center[0] + cx * c, center[1] + cy * c))
            )
            m += 1
    else:
        m = math.ceil(p0) - 1
        while m >= p0 - dtau:
            cx, cy = _CORNERS[int(m) % 4]
            events.append(
                FlowEvent("corner", c_start + (p0 - m) / lam, index, (center[0] + cx * c, center[1] + cy * c))
            )
            m -= 1
    return events


def _advance_about(y1, y2, center, mask, tau_units, ccw, lam, c_start, record, events):
    """Perimeter-advance the masked points about a block center, in place."""
    if not mask.any():
        return
    v1 = y1[mask] - center[0]
    v2 = y2[mask] - center[1]
    if record:
        idx = np.nonzero(mask)[0]
        for j in range(v1.size):
            events.extend(_corner_events(v1[j], v2[j], tau_units, ccw, center, lam, c_start, int(idx[j])))
    moved = kernels.eval_square_advance(v1, v2, tau_units, ccw=ccw)
    y1[mask] = center[0] + moved[:, 0]
    y2[mask] = center[1] + moved[:, 1]


def _mixing_stages(q):
    """(start, end, kind) triples of the block schedule, in schedule units."""
    return (
        (0.0, q, "quarter"),
        (q, 3.0 * q, "half"),
        (3.0 * q, 4.0 * q, "quarter"),
    )


def flow_map(field: VelocityField, y1, y2, c_from: float, c_to: float, record_events: bool = False):
    """Exact trajectories of a planar block field between schedule coords.

    Returns (y1, y2, events). Supports the single rotor block (no schedule)
    and the scheduled mixing tile; reversed coordinates integrate backward.
    """
    if field.ncomp != 2:
        raise ConfigurationError("flow_map integrates the planar block fields")
    y1 = np.array(y1, dtype=float, copy=True).reshape(-1)
    y2 = np.array(y2, dtype=float, copy=True).reshape(-1)
    events: list = []

    if "halfwidth" in field.meta:  # single rotor block
        lam = field.meta["lam"]
        w = field.meta["halfwidth"]
        span = c_to - c_from
        ccw = span < 0.0
        tau = abs(span) * lam
        inside = np.maximum(np.abs(y1), np.abs(y2)) < w
        _advance_about(y1, y2, (0.0, 0.0), inside, tau, ccw, lam, c_from, record_events, events)
        events.sort(key=lambda e: e.coord, reverse=ccw)
        return y1, y2, events

    if "cell" not in field.meta:
        raise ConfigurationError(f"flow_map does not know the field {field.name!r}")

    q = field.meta["cell"]
    s = field.meta["scale"]
    lam = 1.0 / q
    lo, hi = min(c_from, c_to), max(c_from, c_to)
    if lo < -1e-15 * s or hi > s * (1.0 + 1e-15):
        raise ScheduleError(f"schedule coordinates [{lo}, {hi}] leave the block span [0, {s}]")
    backward = c_to < c_from
    if record_events:
        for bp in (q, 3.0 * q):
            if lo < bp < hi:
                events.append(FlowEvent("stage", bp))

    stages = _mixing_stages(q)
    order = reversed(stages) if backward else stages
    for a, b, kind in order:
        seg_lo, seg_hi = max(a, lo), min(b, hi)
        if seg_hi <= seg_lo:
            continue
        tau = (seg_hi - seg_lo) * lam
        c_start = seg_hi if backward else seg_lo
        if kind == "quarter":
            v1 = y1 - 2.0 * q
            v2 = y2 - 2.0 * q
            inside = np.maximum(np.abs(v1), np.abs(v2)) < q
            _advance_about(y1, y2, (2.0 * q, 2.0 * q), inside, tau, backward, lam, c_start, record_events, events)
        else:
            left = y1 < 2.0 * q
            low = y2 < 2.0 * q
            for lmask, cx in ((left, q), (~left, 3.0 * q)):
                for bmask, cy in ((low, q), (~low, 3.0 * q)):
                    _advance_about(
                        y1, y2, (cx, cy), lmask & bmask, tau, backward, lam, c_start, record_events, events
                    )
    events.sort(key=lambda e: e.coord, reverse=backward)
    return y1, y2, events


def evolve_chessboard(k: int, sigma: float | None = None) -> list:
    """Push the aligned cell chessboard through one mixing-block schedule.

    Returns the four states (datum, after each stage). The central quarter
    turn only permutes the four central cells; the half-turn stage rotates
    each 2x2 quadrant by 180 degrees; the final state is the doubled-cell
    chessboard with flipped sign.
    """
    if k < 1:
        raise ConfigurationError(f"datum level must be >= 1, got {k}")
    if sigma is None:
        sigma = 1.0
    if sigma not in (1.0, -1.0):
        raise ConfigurationError("sigma must be +1 or -1")
    q = 2.0 ** -(2 + k)
    ii, jj = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    grid = (sigma * np.where((ii + jj) % 2 == 0, 1, -1)).astype(np.int8)
    states = [ChessboardState(grid, q, "datum", sigma)]

    def quarter_cw(g):
        out = g.copy()
        for i in (1, 2):
            for j in (1, 2):
                a, b = i - 1.5, j - 1.5
                out[int(1.5 + b), int(1.5 - a)] = g[i, j]
        return out

    def half_turns(g):
        out = g.copy()
        for bi in (0, 2):
            for bj in (0, 2):
                out[bi : bi + 2, bj : bj + 2] = g[bi : bi + 2, bj : bj + 2][::-1, ::-1]
        return out

    g1 = quarter_cw(states[0].grid)
    states.append(ChessboardState(g1, q, "after_quarter", sigma))
    g2 = half_turns(g1)
    states.append(ChessboardState(g2, q, "after_half_turns", sigma))
    g3 = quarter_cw(g2)
    states.append(ChessboardState(g3, q, "after_final_quarter", sigma))
    return states


def pushforward_density(field: VelocityField, datum, c_from: float, c_to: float, y1, y2) -> np.ndarray:
    """Density transported by a planar block flow, sampled at (y1, y2).

    The value at schedule coordinate c_to is the datum read at the
    backward-flowed position (the flow is measure preserving).
    """
    back1, back2, _ = flow_map(field, y1, y2, c_to, c_from)
    return np.asarray(datum(back1, back2))

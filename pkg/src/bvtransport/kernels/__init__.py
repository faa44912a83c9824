"""Kernel lane selection.

Two interchangeable implementations of the hot loops exist: a jitted scalar
lane (numba) and a vectorized numpy lane. ``BVT_NUMBA`` picks one at import;
``set_lane`` switches at runtime (used by the tests and the benchmark to
compare the lanes on identical inputs).

All functions take and return float64 arrays; scalar time arguments are
broadcast. See ``_numba`` for the semantics of each kernel.
"""

import numpy as np

from .._env import numba_preference
from ._common import (
    FAM_INWARD,
    FAM_OUTWARD,
    FAM_OUTWARD_MIXING,
    FAM_TANGENT,
    FAM_TANGENT_MIXING,
    FAMILY_CODES,
    VARIANT_TAGS,
    neg_value,
)
from . import _numpy as _np_lane

__all__ = [
    "FAM_INWARD",
    "FAM_OUTWARD",
    "FAM_OUTWARD_MIXING",
    "FAM_TANGENT",
    "FAM_TANGENT_MIXING",
    "FAMILY_CODES",
    "VARIANT_TAGS",
    "neg_value",
    "active_lane",
    "available_lanes",
    "set_lane",
    "eval_assembled_b",
    "eval_assembled_br",
    "eval_assembled_u",
    "eval_pattern_b",
    "eval_alpha",
    "eval_rotor",
    "eval_square_advance",
    "eval_z_state",
    "upwind_update",
    "oracle_plain_midpoint",
    "oracle_event_midpoint",
]


def _as1d(x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64).ravel())


def _pair(t, r):
    t = _as1d(t)
    r = _as1d(r)
    if t.shape != r.shape:
        t = np.ascontiguousarray(np.broadcast_to(t, r.shape))
    return t, r


class _NumbaLane:
    """Out-parameter jitted kernels wrapped to the common array-returning API."""

    name = "numba"

    def __init__(self):
        from . import _numba as nb

        self._nb = nb

    def eval_assembled_b(self, t, r, y1, y2, fam, kmax):
        t, r = _pair(t, r)
        y1 = _as1d(y1)
        y2 = _as1d(y2)
        out = np.empty((r.shape[0], 3))
        self._nb.eval_assembled_b(t, r, y1, y2, fam, kmax, out)
        return out

    def eval_assembled_br(self, t, r, y1, y2, fam, kmax):
        t, r = _pair(t, r)
        y1 = _as1d(y1)
        y2 = _as1d(y2)
        out = np.empty(r.shape[0])
        self._nb.eval_assembled_br(t, r, y1, y2, fam, kmax, out)
        return out

    def eval_assembled_u(self, t, r, y1, y2, fam, kmax):
        t, r = _pair(t, r)
        y1 = _as1d(y1)
        y2 = _as1d(y2)
        out = np.empty(r.shape[0])
        self._nb.eval_assembled_u(t, r, y1, y2, fam, kmax, out)
        return out

    def eval_pattern_b(self, s, rhat, y1, y2, neg, mixing):
        rhat = _as1d(rhat)
        y1 = _as1d(y1)
        y2 = _as1d(y2)
        out = np.empty((rhat.shape[0], 3))
        self._nb.eval_pattern_b(s, rhat, y1, y2, neg, mixing, out)
        return out

    def eval_alpha(self, s, rhat, y1, y2):
        rhat = _as1d(rhat)
        y1 = _as1d(y1)
        y2 = _as1d(y2)
        out = np.empty((rhat.shape[0], 2))
        self._nb.eval_alpha(s, rhat, y1, y2, out)
        return out

    def eval_rotor(self, lam, halfwidth, x1, x2):
        x1 = _as1d(x1)
        x2 = _as1d(x2)
        out = np.empty((x1.shape[0], 2))
        self._nb.eval_rotor(lam, halfwidth, x1, x2, out)
        return out

    def eval_square_advance(self, v1, v2, tau, ccw):
        v1 = _as1d(v1)
        v2 = _as1d(v2)
        tau = np.broadcast_to(np.asarray(tau, dtype=float), v1.shape)
        out = np.empty((v1.shape[0], 2))
        self._nb.eval_square_advance(v1, v2, tau, ccw, out)
        return out

    def eval_z_state(self, s, rhat, u, v):
        rhat = _as1d(rhat)
        u = _as1d(u)
        v = _as1d(v)
        out = np.empty(u.shape[0])
        self._nb.eval_z_state(s, rhat, u, v, out)
        return out

    def upwind_update(self, u, fr, f1, f2, dtoh, g0, g1, src, dt):
        out = np.empty_like(u)
        self._nb.upwind_update(u, fr, f1, f2, dtoh, g0, g1, src, dt, out)
        return out

    def oracle_plain_midpoint(self, x0, y0, lam, span, nsteps):
        x0 = _as1d(x0)
        y0 = _as1d(y0)
        out = np.empty((x0.shape[0], 2))
        self._nb.oracle_plain_midpoint(x0, y0, lam, span, nsteps, out)
        return out

    def oracle_event_midpoint(self, x0, y0, lam, span, nsteps):
        x0 = _as1d(x0)
        y0 = _as1d(y0)
        out = np.empty((x0.shape[0], 2))
        self._nb.oracle_event_midpoint(x0, y0, lam, span, nsteps, out)
        return out


class _NumpyLane:
    name = "numpy"

    def __getattr__(self, item):
        return getattr(_np_lane, item)


_LANES = {}


def _get_lane(name):
    if name not in _LANES:
        _LANES[name] = _NumbaLane() if name == "numba" else _NumpyLane()
    return _LANES[name]


def available_lanes():
    lanes = ["numpy"]
    try:
        import numba  # noqa: F401

        lanes.insert(0, "numba")
    except ImportError:
        pass
    return lanes


def _initial_lane():
    pref = numba_preference()
    if pref == "numpy":
        return "numpy"
    if pref == "numba":
        return "numba"
    return "numba" if "numba" in available_lanes() else "numpy"


_active = _get_lane(_initial_lane())


def active_lane() -> str:
    return _active.name


def set_lane(name: str) -> str:
    """Switch kernel lanes; returns the previous lane name."""
    global _active
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel lane {name!r}")
    prev = _active.name
    _active = _get_lane(name)
    return prev


def eval_assembled_b(t, r, y1, y2, fam, kmax):
    return _active.eval_assembled_b(t, r, y1, y2, fam, kmax)


def eval_assembled_br(t, r, y1, y2, fam, kmax):
    return _active.eval_assembled_br(t, r, y1, y2, fam, kmax)


def eval_assembled_u(t, r, y1, y2, fam, kmax):
    return _active.eval_assembled_u(t, r, y1, y2, fam, kmax)


def eval_pattern_b(s, rhat, y1, y2, neg, mixing):
    return _active.eval_pattern_b(s, rhat, y1, y2, neg, mixing)


def eval_alpha(s, rhat, y1, y2):
    return _active.eval_alpha(s, rhat, y1, y2)


def eval_rotor(lam, halfwidth, x1, x2):
    return _active.eval_rotor(lam, halfwidth, x1, x2)


def eval_square_advance(v1, v2, tau, ccw=False):
    return _active.eval_square_advance(v1, v2, tau, ccw)


def eval_z_state(s, rhat, u, v):
    return _active.eval_z_state(s, rhat, u, v)


def upwind_update(u, fr, f1, f2, dtoh, g0, g1, src, dt):
    return _active.upwind_update(u, fr, f1, f2, dtoh, g0, g1, src, dt)


def oracle_plain_midpoint(x0, y0, lam, span, nsteps):
    return _active.oracle_plain_midpoint(x0, y0, lam, span, nsteps)


def oracle_event_midpoint(x0, y0, lam, span, nsteps):
    return _active.oracle_event_midpoint(x0, y0, lam, span, nsteps)

"""Normal traces on the lateral planes and their weak/strong limits.

The planes Sigma_r = {(t, r, y): 0 < t < T} are oriented by the constant
four-vector (0, -1, 0, 0), so the trace of a field B = (u, u b) is
-u b_r evaluated on the chosen side. Profiles are stored twice over: as
honest grid samples (the payload written to CSV) and, where the slice is a
finite union of axis-aligned rectangles, as an exact rectangle closure that
the pairing and distance routines integrate with no quadrature error in the
lateral variables. Time integrals split at the branch switches and use a
fixed Simpson rule per smooth piece.

Test functions are tensor products of the unit bump exp(1 - 1/(1 - s^2)).
The battery used by the checks is a fixed list of twenty such bumps at
dyadic centers and widths 1/4, 1/8, 1/16, covering both admissibility
classes (vanishing at t = 0 or not, crossing the wall r = 0 or not).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .catalog import (
    DEFAULT_DOMAIN,
    ConstructionVariant,
    ScalarSolution,
    _cycle_rects,
    pattern_rects,
)
from .errors import ConfigurationError, ResolutionError
from .geometry import CellScalarField, DomainBox, DyadicGrid, FaceFluxField, VelocityField
from . import kernels

__all__ = [
    "ORIENTATION",
    "TestFunction",
    "battery",
    "gradient_check",
    "TraceProfile",
    "one_sided_trace",
    "slice_profile",
    "trace_jump",
    "pair_constant",
    "l1_distance",
    "slab_variation_bound",
    "WeakStarReport",
    "weak_star_check",
    "StrongL1Report",
    "strong_l1_check",
    "RenormalizationReport",
    "renormalization_trace_check",
    "BoundaryReport",
    "boundary_condition_check",
    "initial_trace",
    "trace_pairing",
]

ORIENTATION = (0.0, -1.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# the unit bump and its reference tables


def _g(s):
    """exp(1 - 1/(1 - s^2)) inside ]-1, 1[, zero outside; handles complex
    arguments (membership judged by the real part) so the gradient can be
    cross-checked by a complex step."""
    s = np.asarray(s)
    inside = np.abs(np.real(s)) < 1.0
    safe = np.where(inside, s, 0.0)
    with np.errstate(all="ignore"):
        val = np.exp(1.0 - 1.0 / (1.0 - safe * safe))
    return np.where(inside, val, np.zeros_like(val))


def _g_prime(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    safe = np.where(inside, s, 0.0)
    with np.errstate(all="ignore"):
        val = np.exp(1.0 - 1.0 / (1.0 - safe * safe))
        val = val * (-2.0 * safe) / (1.0 - safe * safe) ** 2
    return np.where(inside, val, 0.0)


_GREF_NODES = np.linspace(-1.0, 1.0, 2**17 + 1)
_gv = _g(_GREF_NODES)
_GREF_CUM = np.concatenate(
    [[0.0], np.cumsum(0.5 * (_gv[:-1] + _gv[1:]) * (_GREF_NODES[1] - _GREF_NODES[0]))]
)
del _gv
G_MASS = float(_GREF_CUM[-1])
G_SLOPE_MAX = float(np.max(np.abs(_g_prime(np.linspace(-1.0, 1.0, 2**18 + 1)))))


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Tensor bump A * prod_i g((x_i - c_i) / w_i) with named axes."""

    __test__ = False  # keep pytest from collecting this as a test class

    axes: tuple
    centers: tuple
    widths: tuple
    amplitude: float = 1.0

    def __post_init__(self):
        if not (len(self.axes) == len(self.centers) == len(self.widths)):
            raise ConfigurationError("axes, centers and widths must align")
        if any(w <= 0 for w in self.widths):
            raise ConfigurationError(f"bump widths must be positive: {self.widths}")

    # -- pointwise evaluation ------------------------------------------------

    def axis(self, name: str) -> int:
        try:
            return self.axes.index(name)
        except ValueError:
            raise ConfigurationError(f"no axis {name!r} in {self.axes}") from None

    def support(self, i: int):
        return (self.centers[i] - self.widths[i], self.centers[i] + self.widths[i])

    def raw_axis(self, i: int, x):
        """The i-th factor g((x - c_i)/w_i), amplitude not applied."""
        return _g((np.asarray(x) - self.centers[i]) / self.widths[i])

    def __call__(self, *coords):
        if len(coords) != len(self.axes):
            raise ConfigurationError(f"expected {len(self.axes)} coordinates")
        out = self.amplitude
        for i, x in enumerate(coords):
            out = out * self.raw_axis(i, x)
        return out

    def partial(self, i: int, *coords):
        out = self.amplitude / self.widths[i]
        for j, x in enumerate(coords):
            s = (np.asarray(x, dtype=float) - self.centers[j]) / self.widths[j]
            out = out * (_g_prime(s) if j == i else _g(s))
        return out

    def gradient(self, *coords) -> np.ndarray:
        cols = [self.partial(i, *coords) for i in range(len(self.axes))]
        return np.stack([np.broadcast_to(c, np.broadcast(*coords).shape) for c in cols], axis=-1)

    # -- exact one-dimensional integrals ------------------------------------

    def cum(self, i: int, x):
        """Antiderivative of the raw i-th factor, from the left edge."""
        s = np.clip((np.asarray(x, dtype=float) - self.centers[i]) / self.widths[i], -1.0, 1.0)
        return self.widths[i] * np.interp(s, _GREF_NODES, _GREF_CUM)

    @property
    def axis_masses(self) -> tuple:
        return tuple(w * G_MASS for w in self.widths)

    @property
    def integral(self) -> float:
        out = self.amplitude
        for m in self.axis_masses:
            out *= m
        return out

    # -- norms and admissibility classes -------------------------------------

    @property
    def lip(self) -> float:
        return self.amplitude * G_SLOPE_MAX / min(self.widths)

    @property
    def c1_norm(self) -> float:
        return self.amplitude * max(1.0, G_SLOPE_MAX / min(self.widths))

    @property
    def vanishes_at_t0(self) -> bool:
        i = self.axis("t")
        return self.support(i)[0] >= 0.0

    @property
    def crosses_wall(self) -> bool:
        if "r" not in self.axes:
            return False
        return self.support(self.axis("r"))[0] < 0.0

    def describe(self) -> str:
        parts = [f"{a}~{c}+-{w}" for a, c, w in zip(self.axes, self.centers, self.widths)]
        return " ".join(parts)


_T_ENTRIES = (
    (0.5, 0.25), (0.25, 0.125), (0.625, 0.25), (0.375, 0.0625), (0.0, 0.125),
    (0.75, 0.125), (0.125, 0.125), (0.5625, 0.0625), (0.3125, 0.25), (0.6875, 0.25),
)
_LAT_ENTRIES = (
    (0.25, 0.25, 0.25, 0.25), (0.25, 0.125, 0.25, 0.125), (0.125, 0.125, 0.375, 0.125),
    (0.375, 0.125, 0.125, 0.125), (0.25, 0.0625, 0.25, 0.0625),
    (0.3125, 0.0625, 0.1875, 0.0625), (0.125, 0.0625, 0.125, 0.0625),
    (0.375, 0.0625, 0.375, 0.0625), (0.1875, 0.125, 0.3125, 0.125),
    (0.25, 0.25, 0.25, 0.125),
)
_R_ENTRIES = (
    (0.25, 0.25), (0.0, 0.125), (0.125, 0.125), (0.5, 0.25), (0.0, 0.0625),
    (0.375, 0.125), (0.25, 0.125), (0.625, 0.25), (0.0625, 0.0625), (0.75, 0.125),
)


def battery(axes=("t", "y1", "y2")) -> list:
    """The fixed twenty-bump battery on the given axes.

    Centers are dyadic, widths cycle through 1/4, 1/8, 1/16. Lateral
    supports stay inside one torus period; time supports stay below
    t = 15/16 while some reach t = 0 with a nonzero value there, and the
    four-axis form includes bumps crossing the wall r = 0.
    """
    axes = tuple(axes)
    out = []
    for i in range(20):
        ti = i % 10
        li = ti if i < 10 else (ti + 3) % 10
        tc, tw = _T_ENTRIES[ti]
        c1, w1, c2, w2 = _LAT_ENTRIES[li]
        if axes == ("t", "y1", "y2"):
            out.append(TestFunction(axes, (tc, c1, c2), (tw, w1, w2)))
        elif axes == ("t", "r", "y1", "y2"):
            rc, rw = _R_ENTRIES[(ti + (0 if i < 10 else 5)) % 10]
            out.append(TestFunction(axes, (tc, rc, c1, c2), (tw, rw, w1, w2)))
        else:
            raise ConfigurationError(f"no battery for axes {axes}")
    return out


def gradient_check(phi: TestFunction, n: int = 100, seed: int = 7) -> float:
    """Largest relative gradient deviation, complex step vs the closed form.

    The complex-step derivative Im(phi(x + i h e_j)) / h is exact to
    roundoff for analytic factors, giving an independent reference.
    """
    rng = np.random.default_rng(seed)
    dim = len(phi.axes)
    lo = np.array([c - 1.25 * w for c, w in zip(phi.centers, phi.widths)])
    hi = np.array([c + 1.25 * w for c, w in zip(phi.centers, phi.widths)])
    pts = rng.uniform(lo, hi, size=(n, dim))
    h = 1e-200
    worst = 0.0
    scale = max(phi.lip, 1e-300)
    for j in range(dim):
        coords = [pts[:, m].astype(complex) for m in range(dim)]
        coords[j] = coords[j] + 1j * h
        cs = np.imag(np.asarray(phi(*coords))) / h
        an = np.asarray(phi.partial(j, *[pts[:, m] for m in range(dim)]))
        worst = max(worst, float(np.max(np.abs(cs - an))) / scale)
    return worst


# ---------------------------------------------------------------------------
# trace profiles


def _oriented(rects):
    return [(-v, x0, x1, y0, y1) for (v, x0, x1, y0, y1) in rects]


def _tiled_delta(phi: TestFunction, i: int, a: np.ndarray, b: np.ndarray, period: float):
    """sum_m [G_i(b + m p) - G_i(a + m p)] over every period copy meeting
    the support of the i-th factor."""
    lo, hi = phi.support(i)
    n0 = math.floor((lo - float(np.max(b))) / period)
    n1 = math.ceil((hi - float(np.min(a))) / period)
    if n1 < n0:
        return np.zeros_like(a)
    off = (np.arange(n0, n1 + 1) * period)[:, None]
    return (phi.cum(i, b[None, :] + off) - phi.cum(i, a[None, :] + off)).sum(axis=0)


def _rect_lateral_sum(phi: TestFunction, rects, period: float, ax1: int, ax2: int) -> float:
    """sum over rects of value * int phi_1 * int phi_2, amplitude excluded."""
    if not rects:
        return 0.0
    arr = np.asarray(rects, dtype=float)
    d1 = _tiled_delta(phi, ax1, arr[:, 1], arr[:, 2], period)
    d2 = _tiled_delta(phi, ax2, arr[:, 3], arr[:, 4], period)
    return float(np.sum(arr[:, 0] * d1 * d2))


def _simpson(y: np.ndarray, h: float) -> float:
    n = len(y) - 1
    if n % 2 != 0:
        raise ConfigurationError("simpson needs an even panel count")
    return h / 3.0 * float(y[0] + y[-1] + 4.0 * np.sum(y[1:-1:2]) + 2.0 * np.sum(y[2:-1:2]))


def _rect_eval(rects, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Additive rectangle-list evaluation at points (overlaps sum)."""
    out = np.zeros_like(X, dtype=float)
    for (v, x0, x1, y0, y1) in rects:
        out += v * ((X >= x0) & (X < x1) & (Y >= y0) & (Y < y1))
    return out


def _tile_rects(rects, period_from: float, period_to: float):
    """Replicate a rect list so it covers one period of a coarser torus."""
    ratio = period_to / period_from
    n = round(ratio)
    if abs(n - ratio) > 1e-12 or n < 1:
        raise ConfigurationError(
            f"periods {period_from} and {period_to} are not commensurate"
        )
    if n == 1:
        return list(rects)
    out = []
    for i in range(n):
        for j in range(n):
            dx, dy = i * period_from, j * period_from
            out.extend((v, x0 + dx, x1 + dx, y0 + dy, y1 + dy) for (v, x0, x1, y0, y1) in rects)
    return out


def _rect_l1_mean(rects_a, period_a: float, rects_b, period_b: float) -> float:
    """Mean of |A - B| per unit lateral area, exact.

    Both inputs are additive rectangle lists on their stated periods; the
    common refinement of all edge coordinates gives cells on which both
    functions are constant, so midpoint evaluation is exact.
    """
    period = max(period_a, period_b)
    ra = _tile_rects(rects_a, period_a, period) if rects_a else []
    rb = _tile_rects(rects_b, period_b, period) if rects_b else []
    xs = {0.0, period}
    ys = {0.0, period}
    for (v, x0, x1, y0, y1) in ra + rb:
        xs.update((x0, x1))
        ys.update((y0, y1))
    xs = np.array(sorted(c for c in xs if 0.0 <= c <= period))
    ys = np.array(sorted(c for c in ys if 0.0 <= c <= period))
    xm = 0.5 * (xs[:-1] + xs[1:])
    ym = 0.5 * (ys[:-1] + ys[1:])
    X, Y = np.meshgrid(xm, ym, indexing="ij")
    diff = np.abs(_rect_eval(ra, X, Y) - _rect_eval(rb, X, Y))
    wx = np.diff(xs)[:, None]
    wy = np.diff(ys)[None, :]
    return float(np.sum(diff * wx * wy)) / period**2


@dataclass
class TraceProfile:
    """A one-sided trace on a plane Sigma_{r0}, oriented by (0, -1, 0, 0).

    ``values`` holds grid samples on times x y1 x y2 midpoint grids. When
    the slice is a rectangle union the exact closure is carried along:
    ``static_rects`` for t >= static_from (period ``period``) and
    ``moving_rects(t) -> (rects, period)`` for 0 < t < static_from, with
    ``breaks`` the branch switches of the moving part. Rect values are
    already oriented.
    """

    name: str
    r0: float
    quantity: str
    times: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    values: np.ndarray
    side: str = "-"
    source_tag: str = ""
    orientation: tuple = ORIENTATION
    period: float = 0.5
    t_range: tuple = (0.0, 1.0)
    static_rects: Optional[list] = None
    static_from: float = 0.0
    moving_rects: Optional[Callable[[float], tuple]] = None
    breaks: tuple = ()
    linf_bound: Optional[float] = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def has_rects(self) -> bool:
        return self.static_rects is not None

    def linf(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def lateral_mean(self) -> np.ndarray:
        """Mean over the torus at each stored time (exact for rect slices,
        the grid being a uniform sample of one period)."""
        return self.values.mean(axis=(1, 2))

    def static_mean(self) -> float:
        if not self.has_rects:
            return float(self.values[-1].mean())
        s = sum(v * (x1 - x0) * (y1 - y0) for (v, x0, x1, y0, y1) in self.static_rects)
        return s / self.period**2

    # -- pairing --------------------------------------------------------------

    def pair(self, phi: TestFunction) -> float:
        """Space-time pairing with a (t, y1, y2) bump over ]0, T[ x R^2."""
        if tuple(phi.axes) != ("t", "y1", "y2"):
            raise ConfigurationError(f"profile pairing needs (t, y1, y2) axes, got {phi.axes}")
        if self.has_rects:
            return self._pair_exact(phi)
        return self._pair_grid(phi)

    def _pair_exact(self, phi: TestFunction) -> float:
        t_lo, t_hi = self.t_range
        sf = min(max(self.static_from, t_lo), t_hi)
        total = 0.0
        if self.static_rects:
            dgt = float(phi.cum(0, t_hi) - phi.cum(0, sf))
            total += dgt * _rect_lateral_sum(phi, self.static_rects, self.period, 1, 2)
        if self.moving_rects is not None and sf > t_lo:
            lo_s, hi_s = phi.support(0)
            a0, b0 = max(t_lo, lo_s), min(sf, hi_s)
            if b0 > a0:
                cuts = sorted({a0, b0} | {c for c in self.breaks if a0 < c < b0})
                for a, b in zip(cuts, cuts[1:]):
                    nodes = np.linspace(a, b, 65)
                    gt = np.asarray(phi.raw_axis(0, nodes), dtype=float)
                    sv = np.empty_like(nodes)
                    for m, t in enumerate(nodes):
                        rects, per = self.moving_rects(t)
                        sv[m] = _rect_lateral_sum(phi, rects, per, 1, 2)
                    total += _simpson(gt * sv, nodes[1] - nodes[0])
        return total * phi.amplitude

    def _pair_grid(self, phi: TestFunction) -> float:
        t = self.times
        nt = len(t)
        dt = (self.t_range[1] - self.t_range[0]) / nt
        d1 = self.y1[1] - self.y1[0] if len(self.y1) > 1 else self.period
        d2 = self.y2[1] - self.y2[0] if len(self.y2) > 1 else self.period
        cover1 = d1 * len(self.y1)  # the sampled torus extent per axis
        cover2 = d2 * len(self.y2)
        lo1, hi1 = phi.support(1)
        lo2, hi2 = phi.support(2)
        n1 = np.arange(math.floor((lo1 - self.y1[-1]) / cover1),
                       math.ceil((hi1 - self.y1[0]) / cover1) + 1)
        n2 = np.arange(math.floor((lo2 - self.y2[-1]) / cover2),
                       math.ceil((hi2 - self.y2[0]) / cover2) + 1)
        f1 = np.zeros((nt, len(self.y1)))
        for m in n1:
            f1 += np.asarray(phi.raw_axis(1, self.y1 + m * cover1))[None, :]
        # time factor folded into f1 to keep the contraction cheap
        f1 *= np.asarray(phi.raw_axis(0, t), dtype=float)[:, None]
        f2 = np.zeros(len(self.y2))
        for m in n2:
            f2 += np.asarray(phi.raw_axis(2, self.y2 + m * cover2))
        return phi.amplitude * dt * d1 * d2 * float(
            np.einsum("tij,ti,j->", self.values, f1, f2)
        )

    # -- serialization ---------------------------------------------------------

    def to_rows(self):
        """Rows (t, y1, y2, value, source_tag, orientation) for the CSV form."""
        tag = self.source_tag or self.name
        ori = "(0,-1,0,0)"
        for i, t in enumerate(self.times):
            for j, a in enumerate(self.y1):
                for k, b in enumerate(self.y2):
                    yield (float(t), float(a), float(b), float(self.values[i, j, k]), tag, ori)

    def minus(self, other: "TraceProfile") -> "TraceProfile":
        """Pointwise difference on matching grids; rect closures combine
        when both sides carry them with equal break structure."""
        if self.values.shape != other.values.shape:
            raise ConfigurationError("profile grids differ; cannot subtract")
        static = None
        moving = None
        if (
            self.has_rects
            and other.has_rects
            and self.period == other.period
            and self.static_from == other.static_from
        ):
            neg = [(-v, x0, x1, y0, y1) for (v, x0, x1, y0, y1) in other.static_rects]
            static = list(self.static_rects) + neg
            if self.moving_rects is not None and other.moving_rects is not None:
                mine, theirs = self.moving_rects, other.moving_rects

                def moving(t):
                    ra, pa = mine(t)
                    rb, pb = theirs(t)
                    if pa != pb:
                        raise ConfigurationError("moving periods diverge")
                    return list(ra) + [(-v, *rest) for (v, *rest) in rb], pa

        return TraceProfile(
            name=f"({self.name})-({other.name})",
            r0=self.r0,
            quantity=self.quantity,
            times=self.times,
            y1=self.y1,
            y2=self.y2,
            values=self.values - other.values,
            side=f"{self.side}{other.side}",
            source_tag=f"jump[{self.source_tag or self.name}]",
            period=self.period,
            t_range=self.t_range,
            static_rects=static,
            static_from=self.static_from if static is not None else 0.0,
            moving_rects=moving,
            breaks=tuple(sorted(set(self.breaks) | set(other.breaks))),
            linf_bound=None,
            meta={"difference": True},
        )


def pair_constant(value: float, phi: TestFunction, t_range=(0.0, 1.0)) -> float:
    """Pairing of the constant profile against a (t, y1, y2) bump."""
    if tuple(phi.axes) != ("t", "y1", "y2"):
        raise ConfigurationError("constant pairing needs (t, y1, y2) axes")
    dgt = float(phi.cum(0, t_range[1]) - phi.cum(0, t_range[0]))
    m = phi.axis_masses
    return value * phi.amplitude * dgt * m[1] * m[2]


# ---------------------------------------------------------------------------
# trace extraction


_QUANTITY_MAP = {"b": "br", "ub": "ubr", "u2b": "u2br"}


def _junction_level(variant: ConstructionVariant, r0: float) -> Optional[int]:
    sched = variant.schedule
    if r0 <= sched.freeze_radius:
        return variant.k_max
    k = round(2.0 - math.log2(r0))
    if 3 <= k <= variant.k_max and 2.0 ** (2 - k) == r0:
        return k
    return None


def _power_for(quantity: str) -> int:
    return {"b": 0, "ub": 1, "u2b": 2}[quantity]


def one_sided_trace(
    source,
    r0: float,
    side: str = "-",
    quantity: str = "b",
    nt: int = 64,
    nlat: int = 128,
    domain: DomainBox = DEFAULT_DOMAIN,
    solution: Optional[ScalarSolution] = None,
) -> TraceProfile:
    """Trace of b (or u b, u^2 b) on Sigma_{r0} from one side.

    ``source`` is an assembled velocity field, any 3-component field, or a
    FaceFluxField (whose faces are single-valued, so both sides agree by
    construction). The values returned are oriented: -[u^p b_r](t, r0^side).
    """
    if quantity not in _QUANTITY_MAP:
        raise ConfigurationError(f"unknown trace quantity {quantity!r}")
    if side not in ("-", "+"):
        raise ConfigurationError(f"side must be '-' or '+', got {side!r}")

    if isinstance(source, FaceFluxField):
        return _flux_trace(source, r0, side, quantity)

    if not isinstance(source, VelocityField):
        raise ConfigurationError(f"cannot trace a {type(source).__name__}")

    if r0 <= 0.0 and side == "-":
        raise ConfigurationError("no interior on the inner side of the wall r = 0")

    T = domain.T
    times = (np.arange(nt) + 0.5) * (T / nt)
    period = source.lateral_period
    yy1 = (np.arange(nlat) + 0.5) * (period / nlat)
    yy2 = yy1.copy()
    r_eval = np.nextafter(r0, -math.inf if side == "-" else math.inf)

    variant = source.meta.get("variant")
    p = _power_for(quantity)

    tt, a1, a2 = np.meshgrid(times, yy1, yy2, indexing="ij")
    shape = tt.shape
    tt, a1, a2 = tt.ravel(), a1.ravel(), a2.ravel()
    rr = np.full_like(tt, r_eval)

    if variant is not None:
        fam, kmax = variant.family, variant.k_max
        br = kernels.eval_assembled_br(tt, rr, a1, a2, fam, kmax)
        if p:
            u = kernels.eval_assembled_u(tt, rr, a1, a2, fam, kmax)
            br = br * u**p
    else:
        if source.schedule_coord == "r":
            # steady block: the schedule argument is the plane offset itself
            br = source(r_eval, rr, a1, a2)[:, 0]
        else:
            br = source(tt, rr, a1, a2)[:, 0]
        if p:
            if solution is None:
                raise ConfigurationError(
                    f"quantity {quantity!r} needs the transported solution"
                )
            br = br * np.asarray(solution(tt, rr, a1, a2)) ** p

    values = (-br).reshape(shape)

    static_rects = None
    static_from = 0.0
    moving = None
    breaks = ()
    if variant is not None:
        qname = _QUANTITY_MAP[quantity]
        try:
            rects, rper = pattern_rects(variant, r0, qname)
            static_rects = _oriented(rects)
            rect_period = rper
        except ConfigurationError:
            rect_period = period
        if static_rects is not None:
            if variant.tag == "inward" and quantity == "b":
                # steady unit inflow: one rect for all times
                static_from = 0.0
            else:
                static_from = min(r0, T)
                sched = variant.schedule
                breaks = tuple(bp for bp in sched.breakpoints() if bp < static_from)
                if quantity == "b":

                    def moving(t, _v=variant):
                        rc, pc = pattern_rects(_v, min(max(t, 1e-300), r0), "br")
                        return _oriented(rc), pc

                else:
                    # nothing has crossed the plane yet: u = 0 ahead of the front
                    def moving(t):
                        return [], rect_period

            period = rect_period

    return TraceProfile(
        name=f"Tr[{quantity}]@r={r0:g}{side}",
        r0=r0,
        quantity=quantity,
        times=times,
        y1=yy1,
        y2=yy2,
        values=values,
        side=side,
        source_tag=source.name,
        period=period,
        t_range=(0.0, T),
        static_rects=static_rects,
        static_from=static_from,
        moving_rects=moving,
        breaks=breaks,
        linf_bound=source.linf_bound,
        meta={
            "k": None if variant is None else _junction_level(variant, r0),
            "scale": r0,
            "variant": None if variant is None else variant.tag,
        },
    )


def _flux_trace(flux: FaceFluxField, r0: float, side: str, quantity: str) -> TraceProfile:
    if quantity != "b":
        raise ConfigurationError("face fluxes only carry the velocity trace")
    h = flux.grid.h
    i_face = round(r0 / h)
    if abs(i_face * h - r0) > 1e-12 * max(1.0, r0):
        raise ResolutionError(f"plane r = {r0} is not a face of the level-{flux.grid.level} grid")
    if not (flux.i_lo <= i_face <= flux.i_hi):
        raise ResolutionError(f"face {i_face} outside the sampled window")
    vals = -flux.fr[i_face - flux.i_lo][None, :, :]
    mid = 0.5 * (flux.slab[0] + flux.slab[1])
    return TraceProfile(
        name=f"Tr[b]@r={r0:g}{side} (faces)",
        r0=r0,
        quantity="b",
        times=np.array([mid]),
        y1=flux.grid.y1_centers,
        y2=flux.grid.y2_centers,
        values=vals,
        side=side,
        source_tag=flux.field_name,
        period=flux.grid.domain.y_period,
        t_range=flux.slab,
        meta={"from_faces": True},
    )


def slice_profile(field: VelocityField, rhat: float, nlat: int = 128) -> TraceProfile:
    """Lateral slice of a steady cycle block at window offset rhat, as an
    oriented trace profile (static in time, exact rect closure)."""
    meta = field.meta
    if field.schedule_coord != "r" or "span" not in meta:
        raise ConfigurationError("slice_profile expects a steady windowed block")
    lo, hi = meta["span"]
    if not (lo <= rhat <= hi):
        raise ConfigurationError(f"offset {rhat} outside the block window {meta['span']}")
    k, neg = meta["k"], meta.get("neg", -1.0)
    period = field.lateral_period
    ys = (np.arange(nlat) + 0.5) * (period / nlat)
    A1, A2 = np.meshgrid(ys, ys, indexing="ij")
    rr = np.full(A1.size, rhat)
    br = field(rhat, rr, A1.ravel(), A2.ravel())[:, 0]
    rects = _oriented(_cycle_rects(k, rhat, neg))
    return TraceProfile(
        name=f"slice@{rhat:g} of {field.name}",
        r0=rhat,
        quantity="b",
        times=np.array([0.5]),
        y1=ys,
        y2=ys,
        values=(-br).reshape(1, nlat, nlat),
        source_tag=field.name,
        period=period,
        t_range=(0.0, 1.0),
        static_rects=rects,
        static_from=0.0,
        moving_rects=None,
        linf_bound=field.linf_bound,
        meta={"k": k, "rhat": rhat, "scale": 2.0**-k},
    )


def trace_jump(source, r0: float, quantity: str = "b", **kw) -> TraceProfile:
    """Two-sided trace mismatch across Sigma_{r0} (identically zero for the
    catalog fields: the normal component never jumps)."""
    above = one_sided_trace(source, r0, side="+", quantity=quantity, **kw)
    below = one_sided_trace(source, r0, side="-", quantity=quantity, **kw)
    return above.minus(below)


# ---------------------------------------------------------------------------
# distances and variation bounds


def l1_distance(profile: TraceProfile, limit, t_weight: bool = True) -> float:
    """L1(]0,T[ x D) distance to a limit (a constant or another profile),
    per unit lateral area. Exact whenever rect closures are available."""
    T0, T1 = profile.t_range
    if isinstance(limit, TraceProfile):
        if not (profile.has_rects and limit.has_rects):
            return _l1_grid(profile, limit.values)
        if profile.moving_rects is None and limit.moving_rects is None:
            span = (T1 - T0) if t_weight else 1.0
            return span * _rect_l1_mean(
                profile.static_rects, profile.period, limit.static_rects, limit.period
            )
        raise ConfigurationError("profile-profile distances need static closures")
    c = float(limit)
    if not profile.has_rects:
        return _l1_grid(profile, c)
    const = [(c, 0.0, profile.period, 0.0, profile.period)]
    total = (T1 - max(profile.static_from, T0)) * _rect_l1_mean(
        profile.static_rects, profile.period, const, profile.period
    )
    sf = min(max(profile.static_from, T0), T1)
    if sf > T0:
        cuts = sorted({T0, sf} | {b for b in profile.breaks if T0 < b < sf})
        for a, b in zip(cuts, cuts[1:]):
            nodes = np.linspace(a, b, 9)
            vals = np.empty_like(nodes)
            for m, t in enumerate(nodes):
                if profile.moving_rects is None:
                    rects, per = [], profile.period
                else:
                    rects, per = profile.moving_rects(t)
                cc = [(c, 0.0, per, 0.0, per)]
                vals[m] = _rect_l1_mean(rects, per, cc, per)
            total += _simpson(vals, nodes[1] - nodes[0])
    return total


def _l1_grid(profile: TraceProfile, other) -> float:
    diff = np.abs(profile.values - other)
    T0, T1 = profile.t_range
    return float(diff.mean()) * (T1 - T0)


def slab_variation_bound(field: VelocityField, r_lo: float, r_hi: float) -> Optional[float]:
    """Total variation of the normal component over the slab ]r_lo, r_hi[,
    per unit lateral area: the sharp stability constant for trace profiles.

    Returns None when the slab touches the wall r = 0, where the assembled
    fields stop being BV and no finite bound exists.
    """
    if not (0.0 <= r_lo < r_hi):
        raise ConfigurationError(f"bad slab ({r_lo}, {r_hi})")
    meta = field.meta

    def window_density(k: int, neg: float):
        # the jet edges sweep at unit speed through branches 2 and 3; per
        # period 16 s^2 four rows of length s move, with jumps 1 and |neg|
        s = 2.0**-k
        return (1.0 + abs(neg)) / (4.0 * s), s

    if field.schedule_coord == "r" and "span" in meta:
        dens, s = window_density(meta["k"], meta.get("neg", -1.0))
        lo = max(r_lo, s)
        hi = min(r_hi, 3.0 * s)
        return dens * max(0.0, hi - lo)

    variant = meta.get("variant")
    if variant is None:
        raise ConfigurationError(f"no variation model for field {field.name!r}")
    if r_lo <= 0.0:
        return None
    if variant.tag == "inward":
        return 0.0
    sched = variant.schedule
    total = 0.0
    freeze = sched.freeze_radius
    for k in range(3, variant.k_max + 1):
        w_lo, w_hi = sched.window(k)
        s = 2.0**-k
        dens, _ = window_density(k, variant.neg)
        a = max(r_lo, max(w_lo + s, freeze))
        b = min(r_hi, w_lo + 3.0 * s)
        total += dens * max(0.0, b - a)
    return total


# ---------------------------------------------------------------------------
# reports


@dataclass
class WeakStarReport:
    scales: list
    phis: list
    errors: np.ndarray  # (n_profiles, n_phis)
    bounds: np.ndarray
    rates: list
    passed: bool
    message: str = ""


def weak_star_check(profiles: Sequence[TraceProfile], limit, tests: Sequence[TestFunction]) -> WeakStarReport:
    """Weak-star convergence of profiles toward a limit, bump by bump.

    The error of the profile with structural scale 2^(2-k) must sit below
    4 Lip(phi) 2^(2-k), and the fitted decay rate (log2 error against k)
    should be about -1.
    """
    scales = [p.meta.get("scale", p.r0) for p in profiles]
    n, m = len(profiles), len(tests)
    errors = np.zeros((n, m))
    bounds = np.zeros((n, m))
    for j, phi in enumerate(tests):
        if isinstance(limit, TraceProfile):
            target = limit.pair(phi)
        else:
            target = pair_constant(float(limit), phi, t_range=profiles[0].t_range)
        for i, prof in enumerate(profiles):
            errors[i, j] = abs(prof.pair(phi) - target)
            bounds[i, j] = 4.0 * phi.lip * scales[i]
    rates = []
    ks = np.array([math.log2(1.0 / s) for s in scales])
    for j in range(m):
        e = np.maximum(errors[:, j], 1e-300)
        if len(ks) >= 2 and np.max(e) > 1e-13:
            rates.append(float(np.polyfit(ks, np.log2(e), 1)[0]))
        else:
            rates.append(0.0)
    ok = bool(np.all(errors <= bounds + 1e-12))
    return WeakStarReport(
        scales=list(scales),
        phis=[phi.describe() for phi in tests],
        errors=errors,
        bounds=bounds,
        rates=rates,
        passed=ok,
        message="errors within 4*Lip*scale" if ok else "a pairing exceeded its bound",
    )


@dataclass
class StrongL1Report:
    offsets: list
    distances: list
    bounds: list  # entries None where no finite bound exists
    bound_available: bool
    converges: bool
    passed: bool
    message: str = ""


def strong_l1_check(
    profiles: Sequence[TraceProfile],
    limit,
    field: Optional[VelocityField] = None,
    base_offset: Optional[float] = None,
    expect: str = "converge",
) -> StrongL1Report:
    """Strong L1 behaviour of trace profiles against a limit.

    With ``expect="converge"`` the distances must fall below their slab
    variation bounds and decrease to zero; with ``expect="separate"`` the
    distances must stay above 0.3 (the strong-trace failure witness). When
    the comparison slab touches r = 0 the bound is reported unavailable.
    """
    dists = [l1_distance(p, limit) for p in profiles]
    bounds: list = []
    available = True
    if field is None:
        bounds = [None] * len(profiles)
        available = False
    else:
        ref = base_offset
        if ref is None:
            ref = limit.r0 if isinstance(limit, TraceProfile) else 0.0
        for p in profiles:
            lo, hi = sorted((ref, p.meta.get("rhat", p.r0)))
            b = slab_variation_bound(field, lo, hi)
            bounds.append(b)
            if b is None:
                available = False

    if expect == "converge":
        within = all(
            b is None or d <= b + 1e-10 for d, b in zip(dists, bounds)
        )
        down = all(d2 <= d1 + 1e-12 for d1, d2 in zip(dists, dists[1:]))
        tail = dists[-1] <= max(1e-10, 0.51 * dists[0]) if len(dists) >= 2 else True
        ok = within and down and tail and available
        msg = "distances match their variation bounds" if ok else "strong convergence not observed"
    elif expect == "separate":
        ok = all(d >= 0.3 for d in dists)
        msg = (
            "distances stay above 0.3: no strong trace at the wall"
            if ok
            else "profiles approached the weak limit strongly"
        )
        if available:
            ok = False
            msg = "a finite variation bound appeared on a slab touching the wall"
    else:
        raise ConfigurationError(f"unknown expectation {expect!r}")
    return StrongL1Report(
        offsets=[p.meta.get("rhat", p.r0) for p in profiles],
        distances=dists,
        bounds=bounds,
        bound_available=available,
        converges=(expect == "converge" and ok),
        passed=bool(ok),
        message=msg,
    )


@dataclass
class RenormalizationReport:
    max_defect: float
    max_offband: float
    active_fraction: float
    passed: bool


def renormalization_trace_check(
    tr_b: TraceProfile,
    tr_ub: TraceProfile,
    tr_u2b: TraceProfile,
    threshold: float = 1e-6,
    tol: float = 1e-12,
) -> RenormalizationReport:
    """Chain-rule compatibility of the trace triple.

    Where the velocity trace is active the square trace must equal
    (Tr(ub)/Tr b)^2 Tr b; where it vanishes, Tr(u^2 b) must vanish too.
    """
    b, ub, u2b = tr_b.values, tr_ub.values, tr_u2b.values
    if not (b.shape == ub.shape == u2b.shape):
        raise ConfigurationError("trace grids differ")
    active = np.abs(b) > threshold
    defect = 0.0
    if active.any():
        ratio = ub[active] / b[active]
        defect = float(np.max(np.abs(u2b[active] - ratio**2 * b[active])))
    offband = float(np.max(np.abs(u2b[~active]))) if (~active).any() else 0.0
    return RenormalizationReport(
        max_defect=defect,
        max_offband=offband,
        active_fraction=float(active.mean()),
        passed=bool(defect <= tol and offband <= tol),
    )


@dataclass
class BoundaryReport:
    gamma_fractions: dict  # area fractions of the inflow/outflow/inactive parts
    inflow_everywhere: bool
    discrepancies: list  # per test bump, |<(Tr(ub) - g Tr b) 1_{inflow}, phi>|
    bound_scale: float
    passed: bool
    message: str = ""


def boundary_condition_check(
    b_profile: TraceProfile,
    ub_profile: TraceProfile,
    g_bar: float,
    tests: Sequence[TestFunction],
    threshold: float = 1e-6,
    tol: Optional[float] = None,
) -> BoundaryReport:
    """Weak attainment of the inflow datum on the plane of the profiles.

    The boundary splits by the sign of the oriented velocity trace: the
    inflow part is where Tr b < -threshold. On it the datum discrepancy
    Tr(ub) - g_bar Tr b is paired against the battery; for the catalog
    planes the rect closures make the pairing exact.
    """
    if not (b_profile.has_rects and ub_profile.has_rects):
        raise ConfigurationError("boundary check needs rect closures on both profiles")
    per = max(b_profile.period, ub_profile.period)
    b_static = _tile_rects(b_profile.static_rects, b_profile.period, per)
    ub_static = _tile_rects(ub_profile.static_rects, ub_profile.period, per)

    def area(rects):
        return sum((x1 - x0) * (y1 - y0) for (_, x0, x1, y0, y1) in rects) / per**2

    inflow_static = [r for r in b_static if r[0] < -threshold]
    outflow_static = [r for r in b_static if r[0] > threshold]
    fr_in = area(inflow_static)
    fr_out = area(outflow_static)
    fractions = {"inflow": fr_in, "outflow": fr_out, "inactive": 1.0 - fr_in - fr_out}

    # discrepancy rect lists: Tr(ub) minus g_bar * Tr(b), inflow part only
    disc_static = list(ub_static) + [
        (-g_bar * v, x0, x1, y0, y1) for (v, x0, x1, y0, y1) in inflow_static
    ]

    ub_moving = ub_profile.moving_rects
    b_moving = b_profile.moving_rects

    def disc_moving(t):
        parts = []
        if ub_moving is not None:
            parts.append(ub_moving(t))
        if g_bar != 0.0:
            if b_moving is not None:
                rb, pb = b_moving(t)
            elif b_profile.static_from <= 0.0:
                # velocity trace already static for all times
                rb, pb = inflow_static, per
            else:
                rb, pb = [], per
            parts.append(([(-g_bar * v, *rest) for (v, *rest) in rb if v < -threshold], pb))
        if not parts:
            return [], per
        per_t = max(p for _, p in parts)
        out = []
        for rects, p in parts:
            out.extend(_tile_rects(rects, p, per_t) if rects else [])
        return out, per_t

    disc = TraceProfile(
        name=f"inflow discrepancy @r={b_profile.r0:g}",
        r0=b_profile.r0,
        quantity="ub",
        times=b_profile.times,
        y1=b_profile.y1,
        y2=b_profile.y2,
        values=np.zeros_like(b_profile.values),
        period=per,
        t_range=b_profile.t_range,
        static_rects=disc_static,
        static_from=max(b_profile.static_from, ub_profile.static_from),
        moving_rects=disc_moving,
        breaks=tuple(sorted(set(b_profile.breaks) | set(ub_profile.breaks))),
    )
    pairs = [abs(disc.pair(phi)) for phi in tests]
    scale = b_profile.meta.get("scale", b_profile.r0)
    if tol is None:
        checks = [e <= 4.0 * phi.lip * scale + 1e-12 for e, phi in zip(pairs, tests)]
    else:
        checks = [e <= tol for e in pairs]
    ok = all(checks)
    return BoundaryReport(
        gamma_fractions=fractions,
        inflow_everywhere=fractions["inflow"] >= 1.0 - 1e-12,
        discrepancies=pairs,
        bound_scale=scale,
        passed=bool(ok),
        message="inflow datum attained weakly" if ok else "datum discrepancy above its scale bound",
    )


# ---------------------------------------------------------------------------
# initial trace


def initial_trace(
    solution,
    grid: DyadicGrid,
    subsample: int = 2,
    tol: float = 1e-9,
) -> CellScalarField:
    """Essential-limit initial trace by box averages at t = h, h/2, h/4.

    The averages are Richardson-extrapolated linearly in t when they are
    Cauchy; otherwise the field is returned as sampled with the status
    flag "no trace at tested resolution" in ``meta``.
    """
    h = grid.h
    times = (h, 0.5 * h, 0.25 * h)

    def box_avg(t):
        m = subsample
        off = (np.arange(m) + 0.5) / m * h
        acc = np.zeros((grid.nr, grid.n1, grid.n2))
        for oa in off:
            for ob in off:
                for oc in off:
                    R, A, B = np.meshgrid(
                        np.arange(grid.nr) * h + oa,
                        np.arange(grid.n1) * h + ob,
                        np.arange(grid.n2) * h + oc,
                        indexing="ij",
                    )
                    tt = np.full(R.size, t)
                    acc += np.asarray(
                        solution(tt, R.ravel(), A.ravel(), B.ravel())
                    ).reshape(R.shape)
        return acc / subsample**3

    w1, w2, w3 = (box_avg(t) for t in times)
    d1 = float(np.mean(np.abs(w2 - w1)))
    d2 = float(np.mean(np.abs(w3 - w2)))
    cauchy = d2 <= 0.75 * d1 + tol
    values = 2.0 * w3 - w2 if cauchy else w3
    status = "ok" if cauchy else "no trace at tested resolution"
    return CellScalarField(
        grid=grid,
        values=values,
        time=0.0,
        meta={
            "status": status,
            "cauchy": cauchy,
            "times": times,
            "increments": (d1, d2),
        },
    )


# ---------------------------------------------------------------------------
# distributional pairing of the space-time extension


def trace_pairing(field: VelocityField, phi: TestFunction, method: str = "auto", level: int = 8, nodes: int = 32) -> float:
    """Outward flux functional int_dLambda (B . n) phi of a zero extension.

    Computed as int_Lambda B . grad phi, which equals the boundary term
    because the extensions are divergence free inside. Smooth fields use
    tensor Gauss-Legendre on the clipped support; the piecewise-constant
    catalog fields use a staggered midpoint lattice whose r nodes sit at
    (i + 3/4) q, off every axis wall and off the light cone diagonals of
    the front. The lattice error decays linearly in the spacing.
    """
    if field.ncomp != 4:
        raise ConfigurationError("trace_pairing expects a 4-component space-time field")
    if tuple(phi.axes) != ("t", "r", "y1", "y2"):
        raise ConfigurationError("trace_pairing needs a (t, r, y1, y2) bump")
    if method == "auto":
        method = "gauss" if field.meta.get("smooth") else "lattice"

    sup = [phi.support(i) for i in range(4)]
    if method == "gauss":
        glx, glw = np.polynomial.legendre.leggauss(nodes)
        axes_nodes = []
        axes_weights = []
        for lo, hi in sup:
            axes_nodes.append(0.5 * (hi - lo) * glx + 0.5 * (lo + hi))
            axes_weights.append(0.5 * (hi - lo) * glw)
        T, R, A, B = np.meshgrid(*axes_nodes, indexing="ij")
        W = (
            axes_weights[0][:, None, None, None]
            * axes_weights[1][None, :, None, None]
            * axes_weights[2][None, None, :, None]
            * axes_weights[3][None, None, None, :]
        )
        pts = (T.ravel(), R.ravel(), A.ravel(), B.ravel())
        Bv = field(*pts)
        G = phi.gradient(*pts)
        return float(np.sum(np.sum(Bv * G, axis=1) * W.ravel()))

    if method != "lattice":
        raise ConfigurationError(f"unknown pairing method {method!r}")
    q = 2.0**-level
    grids = []
    for i, (lo, hi) in enumerate(sup):
        n0 = math.floor(lo / q)
        n1 = math.ceil(hi / q)
        offset = 0.75 if i == 1 else 0.5
        grids.append((np.arange(n0, n1) + offset) * q)
    # the bump factorizes, so the contraction against B uses per-axis
    # weight vectors; only the field evaluation touches every node
    fac = [np.asarray(phi.raw_axis(i, grids[i]), dtype=float) for i in range(4)]
    dfac = [
        np.asarray(_g_prime((grids[i] - phi.centers[i]) / phi.widths[i]), dtype=float)
        / phi.widths[i]
        for i in range(4)
    ]
    R, A, B = np.meshgrid(grids[1], grids[2], grids[3], indexing="ij")
    rr, aa, bb = R.ravel(), A.ravel(), B.ravel()
    shape = R.shape
    total = 0.0
    for i, t in enumerate(grids[0]):
        tt = np.full_like(rr, t)
        Bv = field(tt, rr, aa, bb).reshape(shape + (4,))
        st = np.einsum("rab,r,a,b->", Bv[..., 0], fac[1], fac[2], fac[3])
        sr = np.einsum("rab,r,a,b->", Bv[..., 1], dfac[1], fac[2], fac[3])
        s1 = np.einsum("rab,r,a,b->", Bv[..., 2], fac[1], dfac[2], fac[3])
        s2 = np.einsum("rab,r,a,b->", Bv[..., 3], fac[1], fac[2], dfac[3])
        total += dfac[0][i] * st + fac[0][i] * (sr + s1 + s2)
    return total * q**4 * phi.amplitude

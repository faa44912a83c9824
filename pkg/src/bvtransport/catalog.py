"""The construction catalog: dyadic schedules, jet blocks, assembled fields.

The laboratory's velocity fields are built from one periodic pattern per
dyadic window I_k = ]2**(2-k), 2**(3-k)[. Inside a window of scale
s = 2**-k the pattern runs through four branches of equal radial length:
an alternating chessboard of radial jets, two sliding-band branches that
merge the jets pairwise (columns, then rows), and the merged coarse
chessboard, which continues the next window's fine chessboard exactly.

Two decorations exist: the "mixing" cycles replace the first branch by an
in-square rotor schedule (quarter turn, four half turns, quarter turn) that
coarsens a transported chessboard datum by one level per window, and the
"tangent" variants scale the inward jets from -5 to -1, making the
period-averaged radial flux vanish.

The "inward" variant is a different animal: its radial component is
identically one and the rotor schedule alone (periodized at window size)
does the mixing, one level per window, moving inward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .geometry import DomainBox, VelocityField
from .kernels import FAMILY_CODES, VARIANT_TAGS, neg_value

__all__ = [
    "DyadicSchedule",
    "ConstructionVariant",
    "RegionPredicate",
    "ScalarSolution",
    "chessboard_cycle",
    "mixing_chessboard_cycle",
    "rotation_block",
    "mixing_block",
    "periodic_extend",
    "assemble_field",
    "chessboard_datum",
    "exact_solution",
    "pattern_rects",
    "region_lambda_minus",
    "region_lambda_plus",
    "region_front",
    "region_dashed",
    "region_dark",
    "region_band",
    "sigma_of",
    "DEFAULT_DOMAIN",
]

DEFAULT_DOMAIN = DomainBox(r_max=1.0, y_period=0.5, T=1.0)


def sigma_of(k: int) -> float:
    """Alternating datum sign carried by window k."""
    return 1.0 if ((k - 3) % 2) == 0 else -1.0


@dataclass(frozen=True)
class DyadicSchedule:
    """Radial window bookkeeping for a truncated assembly."""

    k_max: int
    k_min: int = 3

    def __post_init__(self):
        if self.k_min != 3:
            raise ConfigurationError("the outermost window is fixed at k_min = 3")
        if self.k_max < 4:
            raise ConfigurationError(f"k_max must be at least 4, got {self.k_max}")

    def window(self, k: int) -> tuple:
        """The open window I_k = ]2**(2-k), 2**(3-k)[."""
        if not (self.k_min <= k <= self.k_max):
            raise ConfigurationError(f"window index {k} outside [{self.k_min}, {self.k_max}]")
        return (2.0 ** (2 - k), 2.0 ** (3 - k))

    @property
    def freeze_radius(self) -> float:
        """Below this radius the deepest pattern continues unchanged."""
        return 2.0 ** (2 - self.k_max)

    def level_of(self, r: float) -> int:
        """Window index k with r in ]2**(2-k), 2**(3-k)], clamped to the range."""
        if r <= self.freeze_radius:
            return self.k_max
        m, e = math.frexp(r)
        return max(3, 3 - e)

    def breakpoints(self) -> tuple:
        """Sorted branch boundaries (junctions and quarter-window marks)."""
        pts = {self.freeze_radius}
        for k in range(self.k_min, self.k_max + 1):
            s = 2.0**-k
            for j in range(5):
                pts.add(4.0 * s + j * s)
        return tuple(sorted(pts))


@dataclass(frozen=True)
class ConstructionVariant:
    """A named assembly: which decoration, and how deep it runs."""

    tag: str
    k_max: int = 8

    def __post_init__(self):
        if self.tag not in VARIANT_TAGS:
            raise ConfigurationError(f"unknown variant tag {self.tag!r}; choose from {VARIANT_TAGS}")
        if self.k_max < 4:
            raise ConfigurationError(f"k_max must be at least 4, got {self.k_max}")

    @property
    def family(self) -> int:
        return FAMILY_CODES[self.tag]

    @property
    def mixing(self) -> bool:
        return self.tag in ("outward_mixing", "tangent_mixing", "inward")

    @property
    def neg(self) -> float:
        return neg_value(self.family)

    @property
    def schedule(self) -> DyadicSchedule:
        return DyadicSchedule(k_max=self.k_max)

    @property
    def trace_mean(self) -> float:
        """Lateral mean of the boundary trace -b_r (orientation (0,-1,0,0))."""
        if self.tag == "inward":
            return -1.0
        if self.tag.startswith("tangent"):
            return 0.0
        return 1.0


@dataclass
class ScalarSolution:
    """A scalar density with batched evaluator u(t, r, y1, y2)."""

    name: str
    evaluator: Callable[..., np.ndarray]
    values_linf: float = 1.0
    front_profile: bool = False
    variant: Optional[ConstructionVariant] = None
    profile: Optional[Callable[..., np.ndarray]] = None  # U(x) when front_profile
    initial_datum: Optional[Callable[..., np.ndarray]] = None
    boundary_datum: Optional[Callable[..., np.ndarray]] = None
    meta: dict = dc_field(default_factory=dict)

    def __call__(self, t, r, y1, y2):
        return self.evaluator(t, r, y1, y2)


@dataclass(frozen=True)
class RegionPredicate:
    """A named boolean region of the branch tables, with set algebra.

    Every predicate consumes the full coordinate tuple (t, r, y1, y2) so
    that arbitrary combinations stay well typed; factories that only look
    at some coordinates ignore the rest.
    """

    name: str
    fn: Callable[..., np.ndarray]

    def __call__(self, t, r, y1, y2) -> np.ndarray:
        return np.asarray(self.fn(t, r, y1, y2), dtype=bool)

    def __and__(self, other: "RegionPredicate") -> "RegionPredicate":
        return RegionPredicate(f"({self.name} & {other.name})", lambda *c: self(*c) & other(*c))

    def __or__(self, other: "RegionPredicate") -> "RegionPredicate":
        return RegionPredicate(f"({self.name} | {other.name})", lambda *c: self(*c) | other(*c))

    def __invert__(self) -> "RegionPredicate":
        return RegionPredicate(f"~{self.name}", lambda *c: ~self(*c))


def region_lambda_minus() -> RegionPredicate:
    """Behind or on the front: r <= t (the null surface joins this side)."""
    return RegionPredicate("lambda_minus", lambda t, r, y1, y2: np.asarray(r) <= np.asarray(t))


def region_lambda_plus() -> RegionPredicate:
    return RegionPredicate("lambda_plus", lambda t, r, y1, y2: np.asarray(r) > np.asarray(t))


def region_front() -> RegionPredicate:
    return RegionPredicate("front", lambda t, r, y1, y2: np.asarray(r) == np.asarray(t))


def _cell_parity(y, s):
    return np.floor(np.asarray(y, dtype=float) / s).astype(np.int64) % 2


def region_dashed(k: int) -> RegionPredicate:
    """The (even, even) cells of the scale-2**-k chessboard."""
    s = 2.0**-k
    return RegionPredicate(
        f"dashed(k={k})",
        lambda t, r, y1, y2: (_cell_parity(y1, s) == 0) & (_cell_parity(y2, s) == 0),
    )


def region_dark(k: int) -> RegionPredicate:
    s = 2.0**-k
    return RegionPredicate(
        f"dark(k={k})",
        lambda t, r, y1, y2: (_cell_parity(y1, s) == 1) & (_cell_parity(y2, s) == 1),
    )


def region_band(k: int, family: str) -> RegionPredicate:
    """The sliding merge bands; ``r`` is read as the branch-local offset
    into the window, e.g. dashed columns live on
    3*2**-k - rhat < y1 < 4*2**-k - rhat during the second branch."""
    s = 2.0**-k
    p = 4.0 * s

    def cols(dashed):
        def fn(t, r, y1, y2):
            rhat = np.asarray(r, dtype=float)
            u = np.asarray(y1, dtype=float) % p
            v = np.asarray(y2, dtype=float) % p
            rowpar = _cell_parity(v, s)
            if dashed:
                band = (3.0 * s - rhat < u) & (u < 4.0 * s - rhat)
            else:
                band = (rhat < u) & (u < rhat + s)
            return band & (rowpar == (0 if dashed else 1))

        return fn

    def rows(dashed):
        def fn(t, r, y1, y2):
            rhat = np.asarray(r, dtype=float)
            u = np.asarray(y1, dtype=float) % p
            v = np.asarray(y2, dtype=float) % p
            if dashed:
                return (4.0 * s - rhat < v) & (v < 5.0 * s - rhat) & (u < 2.0 * s)
            return (rhat - s < v) & (v < rhat) & (u >= 2.0 * s)

        return fn

    table = {
        "dashed_cols": cols(True),
        "dark_cols": cols(False),
        "dashed_rows": rows(True),
        "dark_rows": rows(False),
    }
    if family not in table:
        raise ConfigurationError(f"unknown band family {family!r}; choose from {sorted(table)}")
    return RegionPredicate(f"band(k={k}, {family})", table[family])


# ---------------------------------------------------------------------------
# standalone blocks


def chessboard_cycle(k: int, tangent: bool = False) -> VelocityField:
    """One radial merge cycle at scale s = 2**-k, as a steady field of r.

    The field lives on r in ]0, 4s[ laterally periodic with period 4s; the
    radial coordinate doubles as the schedule argument.
    """
    if k < 3:
        raise ConfigurationError(f"cycle level must be >= 3, got {k}")
    s = 2.0**-k
    neg = -1.0 if tangent else -5.0

    def ev(_c, r, y1, y2):
        return kernels.eval_pattern_b(s, r, y1, y2, neg, False)

    return VelocityField(
        name=f"chessboard_cycle(k={k}{', tangent' if tangent else ''})",
        evaluator=ev,
        ncomp=3,
        linf_bound=abs(neg),
        euclid_bound=math.sqrt(2.0) * abs(neg),
        finest_scale=s,
        lateral_period=4.0 * s,
        schedule_coord="r",
        breakpoints=(s, 2.0 * s, 3.0 * s),
        meta={"k": k, "scale": s, "neg": neg, "span": (0.0, 4.0 * s)},
    )


def mixing_chessboard_cycle(k: int, tangent: bool = False) -> VelocityField:
    """The merge cycle whose first branch stirs each dashed square."""
    if k < 3:
        raise ConfigurationError(f"cycle level must be >= 3, got {k}")
    s = 2.0**-k
    q = 0.25 * s
    neg = -1.0 if tangent else -5.0

    def ev(_c, r, y1, y2):
        return kernels.eval_pattern_b(s, r, y1, y2, neg, True)

    return VelocityField(
        name=f"mixing_chessboard_cycle(k={k}{', tangent' if tangent else ''})",
        evaluator=ev,
        ncomp=3,
        linf_bound=abs(neg),
        euclid_bound=max(math.sqrt(2.0) * abs(neg), math.sqrt(5.0)),
        finest_scale=s,
        lateral_period=4.0 * s,
        schedule_coord="r",
        breakpoints=(q, 3.0 * q, s, 2.0 * s, 3.0 * s),
        meta={"k": k, "scale": s, "neg": neg, "span": (0.0, 4.0 * s)},
    )


def rotation_block(k: int) -> VelocityField:
    """A single steady rotor block of halfwidth 2**-(2+k) centered at 0.

    The planar velocity is lam * a(x) with a the clockwise square rotor and
    lam = 2**(2+k); every max-norm square completes a quarter turn in
    2**-(2+k) units of the evolution coordinate.
    """
    if k < 1:
        raise ConfigurationError(f"block level must be >= 1, got {k}")
    w = 2.0 ** -(2 + k)
    lam = 2.0 ** (2 + k)

    def ev(_c, x1, x2):
        return kernels.eval_rotor(lam, w, x1, x2)

    return VelocityField(
        name=f"rotation_block(k={k})",
        evaluator=ev,
        ncomp=2,
        linf_bound=2.0,
        euclid_bound=2.0,
        finest_scale=w,
        lateral_period=4.0 * w,
        meta={"k": k, "halfwidth": w, "lam": lam, "side_time": 1.0 / lam},
    )


def mixing_block(k: int) -> VelocityField:
    """The scheduled rotor tile on the square of side s = 2**-k.

    Over one schedule pass of length s: central quarter turn on [0, s/4],
    four half turns tiling the square on [s/4, 3s/4], central quarter turn
    on [3s/4, s]. Applied to the aligned chessboard of cell s/4 this
    composition doubles the chessboard scale exactly. Accepts k >= 1; the
    inward assembly uses levels k-2 down to 1.
    """
    if k < 1:
        raise ConfigurationError(f"block level must be >= 1, got {k}")
    s = 2.0**-k
    q = 0.25 * s

    def ev(c, y1, y2):
        return kernels.eval_alpha(s, c, y1, y2)

    return VelocityField(
        name=f"mixing_block(k={k})",
        evaluator=ev,
        ncomp=2,
        linf_bound=2.0,
        euclid_bound=2.0 * math.sqrt(2.0),
        finest_scale=q,
        lateral_period=s,
        schedule_coord="r",
        breakpoints=(q, 3.0 * q),
        meta={"k": k, "scale": s, "cell": q, "span": (0.0, s)},
    )


def periodic_extend(field: VelocityField, period: float) -> VelocityField:
    """Wrap a field's lateral coordinates onto a torus of the given period."""
    base = field.evaluator
    nlat = field.ncomp if field.ncomp == 2 else 2

    if field.ncomp == 2:

        def ev(c, y1, y2):
            return base(c, np.asarray(y1) % period, np.asarray(y2) % period)

    else:

        def ev(c, r, y1, y2):
            return base(c, r, np.asarray(y1) % period, np.asarray(y2) % period)

    return VelocityField(
        name=f"{field.name}^per({period})",
        evaluator=ev,
        ncomp=field.ncomp,
        linf_bound=field.linf_bound,
        euclid_bound=field.euclid_bound,
        finest_scale=field.finest_scale,
        lateral_period=period,
        schedule_coord=field.schedule_coord,
        breakpoints=field.breakpoints,
        meta=dict(field.meta),
    )


# ---------------------------------------------------------------------------
# assembled variants


def assemble_field(variant: ConstructionVariant, domain: DomainBox = DEFAULT_DOMAIN) -> VelocityField:
    """The space-time velocity of a variant on the truncated domain.

    Behind the front (r <= t) window k(r) acts; ahead of it only the radial
    jet profile carried by the front at time t survives. Breakpoints are the
    branch switches of the front pattern, in time.
    """
    fam = variant.family
    kmax = variant.k_max
    sched = variant.schedule

    def ev(t, r, y1, y2):
        return kernels.eval_assembled_b(t, r, y1, y2, fam, kmax)

    # componentwise and euclidean speed bounds by branch enumeration:
    # jets reach |neg|, the sliding bands pair components, the rotor speed
    # peaks at 2 in a single component
    if variant.tag in ("outward", "outward_mixing"):
        linf, euclid = 5.0, math.sqrt(50.0)
    elif variant.tag == "tangent":
        linf, euclid = 1.0, math.sqrt(2.0)
    else:  # tangent_mixing, inward
        linf, euclid = 2.0, math.sqrt(5.0)

    return VelocityField(
        name=f"b[{variant.tag}, k_max={kmax}]",
        evaluator=ev,
        ncomp=3,
        linf_bound=linf,
        euclid_bound=euclid,
        finest_scale=2.0**-kmax,
        lateral_period=domain.y_period,
        schedule_coord="t",
        breakpoints=sched.breakpoints(),
        meta={
            "variant": variant,
            "family": fam,
            "k_max": kmax,
            "trace_mean": variant.trace_mean,
            "schedule_exponent": kmax,
            "inflow_everywhere": variant.tag == "inward",
        },
    )


def exact_solution(variant: ConstructionVariant, domain: DomainBox = DEFAULT_DOMAIN) -> ScalarSolution:
    """The transported front-profile solution of a variant.

    The value is U(x) behind the front and 0 ahead of it, with U the dashed
    indicator (plain variants), the transported square datum (mixing
    variants), or the inward-mixed plane chessboard (inward variant). It
    solves the zero-data initial-boundary value problem of the variant's
    field together with u = 0.
    """
    fam = variant.family
    kmax = variant.k_max

    def ev(t, r, y1, y2):
        return kernels.eval_assembled_u(t, r, y1, y2, fam, kmax)

    def profile(r, y1, y2):
        # any t above the outer junction puts the whole slice behind the front
        return kernels.eval_assembled_u(2.0, r, y1, y2, fam, kmax)

    return ScalarSolution(
        name=f"u[{variant.tag}, k_max={kmax}]",
        evaluator=ev,
        values_linf=1.0,
        front_profile=True,
        variant=variant,
        profile=profile,
        initial_datum=None,
        boundary_datum=None,
        meta={"family": fam, "k_max": kmax, "values": (-1.0, 0.0, 1.0)},
    )


def chessboard_datum(k: int):
    """The aligned plane chessboard of cell 2**-(2+k), +1 on the origin cell.

    Returned as a batched callable of (y1, y2) with attributes ``cell`` and
    ``k``; this is the datum the level-k mixing block coarsens.
    """
    if k < 1:
        raise ConfigurationError(f"datum level must be >= 1, got {k}")
    q = 2.0 ** -(2 + k)

    def datum(y1, y2):
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        i = np.floor(y1 / q).astype(np.int64)
        j = np.floor(y2 / q).astype(np.int64)
        return np.where((i + j) % 2 == 0, 1.0, -1.0)

    datum.cell = q
    datum.k = k
    return datum


# ---------------------------------------------------------------------------
# rectangle decompositions (exact integration of profiles)


def _cycle_rects(k: int, rhat: float, neg: float):
    """Axis-aligned rectangles (value, x0, x1, y0, y1) of the radial jet
    pattern at window position rhat, on one lateral period [0, 4s)^2."""
    s = 2.0**-k
    rects = []
    if rhat <= s:
        for i in range(4):
            for j in range(4):
                if i % 2 == 0 and j % 2 == 0:
                    rects.append((1.0, i * s, (i + 1) * s, j * s, (j + 1) * s))
                elif i % 2 == 1 and j % 2 == 1:
                    rects.append((neg, i * s, (i + 1) * s, j * s, (j + 1) * s))
        return rects
    if rhat <= 2.0 * s:
        for j in (0, 2):
            rects.append((1.0, 0.0, s, j * s, (j + 1) * s))
            rects.append((1.0, 3.0 * s - rhat, 4.0 * s - rhat, j * s, (j + 1) * s))
        for j in (1, 3):
            rects.append((neg, 3.0 * s, 4.0 * s, j * s, (j + 1) * s))
            rects.append((neg, rhat, rhat + s, j * s, (j + 1) * s))
        return rects
    if rhat <= 3.0 * s:
        rects.append((1.0, 0.0, 2.0 * s, 0.0, s))
        rects.append((1.0, 0.0, 2.0 * s, 4.0 * s - rhat, 5.0 * s - rhat))
        rects.append((neg, 2.0 * s, 4.0 * s, 3.0 * s, 4.0 * s))
        rects.append((neg, 2.0 * s, 4.0 * s, rhat - s, rhat))
        return rects
    rects.append((1.0, 0.0, 2.0 * s, 0.0, 2.0 * s))
    rects.append((neg, 2.0 * s, 4.0 * s, 2.0 * s, 4.0 * s))
    return rects


def _datum_rects(k: int, cell: float, origin: tuple, sign: float):
    """16 signed cells of one aligned chessboard tile with corner at origin."""
    x0, y0 = origin
    out = []
    for i in range(4):
        for j in range(4):
            val = sign * (1.0 if (i + j) % 2 == 0 else -1.0)
            out.append((val, x0 + i * cell, x0 + (i + 1) * cell, y0 + j * cell, y0 + (j + 1) * cell))
    return out


def pattern_rects(variant: ConstructionVariant, r: float, quantity: str):
    """Rectangle decomposition of a lateral slice of the assembled fields.

    quantity: "br" (radial velocity), "u" (solution), "ubr" (their product)
    or "u2br". Returns (rects, period) with rects a list of
    (value, x0, x1, y0, y1) on one lateral period. Solution quantities are
    only available where the slice is a union of rectangles: at window
    junctions (fresh chessboards), anywhere for the non-mixing families, and
    everywhere in the frozen zone.
    """
    if quantity not in ("br", "u", "ubr", "u2br"):
        raise ConfigurationError(f"unknown slice quantity {quantity!r}")
    fam = variant.family
    kmax = variant.k_max
    sched = variant.schedule
    freeze = sched.freeze_radius
    neg = variant.neg

    if variant.tag == "inward":
        if quantity == "br":
            return [(1.0, 0.0, 0.5, 0.0, 0.5)], 0.5
        k = sched.level_of(r)
        sp = 2.0 ** (2 - k)
        if r > freeze and r - sp != 0.0:
            raise ConfigurationError(
                "inward solution slices are rectangle unions only at window junctions"
            )
        # fresh (or frozen) datum: signed chessboard at cells sp/4 on one tile
        return _datum_rects(k, 0.25 * sp, (0.0, 0.0), sigma_of(k)), sp

    k = sched.level_of(r)
    s = 2.0**-k
    period = 4.0 * s
    if r <= freeze:
        rhat = 0.0
    else:
        rhat = r - period

    br = _cycle_rects(k, rhat, neg)
    if quantity == "br":
        return br, period

    mixing = fam in (2, 3)
    if not mixing:
        dashed = [(1.0, *rc[1:]) for rc in br if rc[0] == 1.0]
        if quantity == "u":
            return dashed, period
        # u is the dashed indicator, so u*br = u = u^2*br on its support
        return dashed, period

    if rhat != 0.0:
        raise ConfigurationError(
            "mixing solution slices are rectangle unions only at window junctions"
        )
    sign = sigma_of(k)
    cell = 0.25 * s
    rects = []
    for ci in (0.0, 2.0 * s):
        for cj in (0.0, 2.0 * s):
            rects.extend(_datum_rects(k, cell, (ci, cj), sign))
    # br = 1 on the dashed squares, so u and u*br share these cells while
    # u^2*br drops the sign
    if quantity == "u2br":
        rects = [(abs(v), x0, x1, y0, y1) for (v, x0, x1, y0, y1) in rects]
    return rects, period

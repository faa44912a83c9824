"""Domain geometry, dyadic grids, face-flux sampling, and mollifiers.

The computational domain is the half-space r > 0 with a square torus cross
section in (y1, y2) and a finite time horizon. All grids are dyadic: cell
width ``h = 2**-level`` divides every structural scale exactly, so the
discrete divergence of the catalog fields cancels in exact arithmetic.

Face sampling convention: every face value is read a quarter cell off the
face along its own normal, toward the lexicographically smaller side; the
two domain boundary faces at r = 0 and r = r_max are read a quarter cell
into the domain instead. Offsets of h/4 keep samples away from every jump
surface of the catalog fields (cell walls and the 45-degree band edges all
pass through quarter-cell lattices only at integer multiples of h, never at
odd multiples of h/4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ResolutionError, ScheduleError

__all__ = [
    "DomainBox",
    "DyadicGrid",
    "VelocityField",
    "FaceFluxField",
    "CellScalarField",
    "Mollifier",
    "MollifiedDivergenceReport",
    "make_grid",
    "sample_face_fluxes",
    "discrete_divergence",
    "mollified_divergence_l1",
    "zero_extend",
]


def _is_dyadic(x: float) -> bool:
    """True when x is an exact binary rational (always true for floats) with
    a reasonable exponent; used only to reject NaN/inf."""
    return math.isfinite(x)


@dataclass(frozen=True)
class DomainBox:
    """Truncated domain ]0, r_max[ x torus(y_period)^2, time horizon T."""

    r_max: float = 1.0
    y_period: float = 0.5
    T: float = 1.0

    def __post_init__(self):
        if not (_is_dyadic(self.r_max) and self.r_max > 0):
            raise ConfigurationError(f"r_max must be positive and finite, got {self.r_max}")
        if not (_is_dyadic(self.y_period) and self.y_period > 0):
            raise ConfigurationError(f"y_period must be positive, got {self.y_period}")
        if not (0 < self.T <= 1.0):
            raise ConfigurationError(f"horizon T must lie in ]0, 1], got {self.T}")


@dataclass(frozen=True)
class DyadicGrid:
    """Uniform grid of width h = 2**-level covering a DomainBox exactly."""

    domain: DomainBox
    level: int
    h: float
    nr: int
    n1: int
    n2: int

    @property
    def r_faces(self) -> np.ndarray:
        return np.arange(self.nr + 1) * self.h

    @property
    def r_centers(self) -> np.ndarray:
        return (np.arange(self.nr) + 0.5) * self.h

    @property
    def y1_centers(self) -> np.ndarray:
        return (np.arange(self.n1) + 0.5) * self.h

    @property
    def y2_centers(self) -> np.ndarray:
        return (np.arange(self.n2) + 0.5) * self.h

    def cell_volume(self) -> float:
        return self.h**3


def make_grid(domain: DomainBox, level: int) -> DyadicGrid:
    """Build the level grid; refuses extents that h does not divide exactly."""
    if not (0 < level <= 24):
        raise ConfigurationError(f"grid level out of range: {level}")
    h = 2.0**-level
    counts = []
    for name, extent in (("r_max", domain.r_max), ("y_period", domain.y_period)):
        n = round(extent / h)
        if n < 1 or n * h != extent:
            raise ConfigurationError(
                f"h = 2**-{level} does not divide {name} = {extent} exactly"
            )
        counts.append(n)
    return DyadicGrid(domain=domain, level=level, h=h, nr=counts[0], n1=counts[1], n2=counts[1])


@dataclass
class VelocityField:
    """A velocity field with the metadata the discrete operators need.

    ``evaluator(c, x1, ..., xncomp)`` consumes batched float64 arrays and
    returns an (n, ncomp) array; ``c`` is the schedule coordinate (time for
    assembled fields, ignored for steady ones). ``breakpoints`` are the
    schedule positions (in ``schedule_coord``) across which the pattern
    switches branches; sampling slabs must not straddle them.

    ``linf_bound`` bounds each component separately; ``euclid_bound`` bounds
    the euclidean norm. ``finest_scale`` is the smallest structural length,
    so grids must satisfy h <= finest_scale / 4 to align with every cell.
    """

    name: str
    evaluator: Callable[..., np.ndarray]
    ncomp: int
    linf_bound: float
    euclid_bound: float
    finest_scale: float
    lateral_period: float = 0.5
    schedule_coord: str = ""
    breakpoints: tuple = ()
    div_linf_bound: float = 0.0
    is_measure_divergence: bool = False
    meta: dict = dc_field(default_factory=dict)

    def __call__(self, c, *coords):
        return self.evaluator(c, *coords)


@dataclass
class FaceFluxField:
    """Normal velocity samples on the faces of a (sub)grid.

    fr[i] holds the faces r = (i_lo + i) h; f1 and f2 hold the lateral
    left-face values with periodic wrap, one per cell.
    """

    grid: DyadicGrid
    slab: tuple
    i_lo: int
    i_hi: int
    fr: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    field_name: str = ""

    @property
    def n_cells(self) -> int:
        return (self.i_hi - self.i_lo) * self.grid.n1 * self.grid.n2


@dataclass
class CellScalarField:
    """Cell-averaged (or cell-sampled) scalar on a (sub)grid."""

    grid: DyadicGrid
    values: np.ndarray
    i_lo: int = 0
    time: Optional[float] = None
    source_bound: Optional[float] = None
    meta: dict = dc_field(default_factory=dict)

    def linf(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def l1(self) -> float:
        return float(np.sum(np.abs(self.values))) * self.grid.cell_volume()


def _validate_slab(slab, breakpoints, what):
    a, b = slab
    if not (a < b):
        raise ScheduleError(f"empty slab {slab} for {what}")
    for bp in breakpoints:
        if a < bp < b:
            raise ScheduleError(
                f"slab {slab} straddles the {what} breakpoint at {bp}; "
                f"sample each schedule interval separately"
            )


def sample_face_fluxes(field: VelocityField, grid: DyadicGrid, slab=None) -> FaceFluxField:
    """Sample a 3-component field's normal components on grid faces.

    For time-scheduled fields ``slab`` is a time interval contained in one
    schedule step; values are taken at its midpoint. For radially scheduled
    (steady) fields ``slab`` is an r-window aligned with grid faces and the
    result covers only that window. ``slab=None`` samples the whole grid,
    splitting at breakpoints internally where needed.
    """
    if field.ncomp != 3:
        raise ConfigurationError(
            f"face fluxes need a 3-component spatial field, got {field.ncomp}"
        )
    h = grid.h
    if field.finest_scale < 4.0 * h * 0.999999:
        raise ResolutionError(
            f"grid h = {h} too coarse for field {field.name!r} with finest scale "
            f"{field.finest_scale}; need h <= finest_scale / 4"
        )

    if field.schedule_coord == "t":
        if slab is None:
            slab = (0.0, grid.domain.T)
        _validate_slab(slab, field.breakpoints, field.name)
        return _sample_window(field, grid, slab, 0, grid.nr, 0.5 * (slab[0] + slab[1]))

    # steady field, schedule (if any) lives in r
    if slab is None:
        bps = sorted(b for b in field.breakpoints if 0.0 < b < grid.domain.r_max)
        edges = [0.0] + bps + [grid.domain.r_max]
        parts = [
            sample_face_fluxes(field, grid, (lo, hi)) for lo, hi in zip(edges, edges[1:])
        ]
        return _stitch_windows(parts, grid, (0.0, grid.domain.r_max), field.name)
    _validate_slab(slab, field.breakpoints, field.name)
    a, b = slab
    i_lo = round(a / h)
    i_hi = round(b / h)
    if i_lo * h != a or i_hi * h != b or not (0 <= i_lo < i_hi <= grid.nr):
        raise ResolutionError(f"slab {slab} does not align with grid faces at h = {h}")
    return _sample_window(field, grid, slab, i_lo, i_hi, 0.0)


def _sample_window(field, grid, slab, i_lo, i_hi, c_val) -> FaceFluxField:
    h = grid.h
    n1, n2 = grid.n1, grid.n2
    nwin = i_hi - i_lo

    # radial faces: sample h/4 below the face (h/4 above for the r=0 face)
    r_f = (np.arange(i_lo, i_hi + 1)) * h
    r_eval = np.where(r_f == 0.0, r_f + 0.25 * h, r_f - 0.25 * h)
    y1m = grid.y1_centers
    y2m = grid.y2_centers
    R, Y1, Y2 = np.meshgrid(r_eval, y1m, y2m, indexing="ij")
    vals = field(c_val, R.ravel(), Y1.ravel(), Y2.ravel())
    fr = vals[:, 0].reshape(nwin + 1, n1, n2)

    # lateral faces: h/4 toward the smaller side, wrapped on the torus
    rc = grid.r_centers[i_lo:i_hi]
    y1f = (np.arange(n1) * h - 0.25 * h) % field.lateral_period
    R, Y1, Y2 = np.meshgrid(rc, y1f, y2m, indexing="ij")
    vals = field(c_val, R.ravel(), Y1.ravel(), Y2.ravel())
    f1 = vals[:, 1].reshape(nwin, n1, n2)

    y2f = (np.arange(n2) * h - 0.25 * h) % field.lateral_period
    R, Y1, Y2 = np.meshgrid(rc, y1m, y2f, indexing="ij")
    vals = field(c_val, R.ravel(), Y1.ravel(), Y2.ravel())
    f2 = vals[:, 2].reshape(nwin, n1, n2)

    return FaceFluxField(
        grid=grid, slab=tuple(slab), i_lo=i_lo, i_hi=i_hi, fr=fr, f1=f1, f2=f2,
        field_name=field.name,
    )


def _stitch_windows(parts: Sequence[FaceFluxField], grid, slab, name) -> FaceFluxField:
    parts = sorted(parts, key=lambda p: p.i_lo)
    fr = np.concatenate([p.fr[:-1] for p in parts] + [parts[-1].fr[-1:]], axis=0)
    f1 = np.concatenate([p.f1 for p in parts], axis=0)
    f2 = np.concatenate([p.f2 for p in parts], axis=0)
    return FaceFluxField(
        grid=grid, slab=slab, i_lo=parts[0].i_lo, i_hi=parts[-1].i_hi,
        fr=fr, f1=f1, f2=f2, field_name=name,
    )


def discrete_divergence(flux: FaceFluxField) -> CellScalarField:
    """Per-cell divergence of sampled fluxes; exact for aligned catalog fields."""
    h = flux.grid.h
    div = (
        flux.fr[1:] - flux.fr[:-1]
        + np.roll(flux.f1, -1, axis=1) - flux.f1
        + np.roll(flux.f2, -1, axis=2) - flux.f2
    ) / h
    return CellScalarField(grid=flux.grid, values=div, i_lo=flux.i_lo)


# ---------------------------------------------------------------------------
# mollifiers


def _bump(s):
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2))
    return out


def _bump_deriv(s):
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    sm = s[m]
    out[m] = -2.0 * sm / (1.0 - sm**2) ** 2 * np.exp(-1.0 / (1.0 - sm**2))
    return out


def _sphere_area(dim: int) -> float:
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def _radial_simpson(f, n=100001):
    """Simpson rule on [0, 1]; n odd node count."""
    x = np.linspace(0.0, 1.0, n)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(np.sum(w * f(x)) * (x[1] - x[0]) / 3.0)


@dataclass
class Mollifier:
    """Radial C^infty mollifier rho_eps(w) = amp * g(|w|/eps) of unit mass."""

    dim: int
    eps: float
    amp: float = 0.0
    grad_l1_const: float = 0.0  # eps * int |grad rho_eps|, scale free

    def __post_init__(self):
        if self.dim < 1 or self.eps <= 0:
            raise ConfigurationError(f"bad mollifier parameters dim={self.dim} eps={self.eps}")
        if self.amp == 0.0:
            mass = _sphere_area(self.dim) * _radial_simpson(
                lambda s: _bump(s) * s ** (self.dim - 1)
            )
            a_unit = 1.0 / mass
            self.amp = a_unit / self.eps**self.dim
            self.grad_l1_const = a_unit * _sphere_area(self.dim) * _radial_simpson(
                lambda s: np.abs(_bump_deriv(s)) * s ** (self.dim - 1)
            )

    def rho(self, w: np.ndarray) -> np.ndarray:
        """Density at points w of shape (n, dim)."""
        rr = np.sqrt(np.sum(np.asarray(w, dtype=float) ** 2, axis=-1))
        return self.amp * _bump(rr / self.eps)

    def grad(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        rr = np.sqrt(np.sum(w**2, axis=-1))
        mag = np.zeros_like(rr)
        m = rr > 0.0
        mag[m] = self.amp / self.eps * _bump_deriv(rr[m] / self.eps) / rr[m]
        return w * mag[..., None]

    def grad_l1(self) -> float:
        """Integral of |grad rho_eps| over the ball, computed radially."""
        return self.grad_l1_const / self.eps

    def mass_quadrature(self, n: int = 200001) -> float:
        """Independent radial quadrature of the total mass (test oracle)."""
        return (
            self.amp
            * self.eps**self.dim
            * _sphere_area(self.dim)
            * _radial_simpson(lambda s: _bump(s) * s ** (self.dim - 1), n)
        )


@dataclass
class MollifiedDivergenceReport:
    """Outcome of a lattice mollified-divergence scan over a window."""

    field_name: str
    eps: float
    spacing: float
    value_l1: float
    value_linf: float
    boundary_flag: bool
    layer_volume: float  # measured window volume within eps of the r=0 wall
    c_star: float  # layer_volume / eps
    c_dstar: float  # eps * int |grad rho|
    linf_bound: float

    @property
    def bound_product(self) -> float:
        return self.linf_bound * self.c_star * self.c_dstar

    @property
    def ratio(self) -> float:
        bp = self.bound_product
        return self.value_l1 / bp if bp > 0 else 0.0


def mollified_divergence_l1(
    field: VelocityField,
    eps: float,
    window,
    spacing: Optional[float] = None,
    boundary_axis: Optional[int] = None,
) -> MollifiedDivergenceReport:
    """L1 norm of div(B * rho_eps) over a window, by midpoint lattice sums.

    ``window`` is a sequence of (lo, hi) pairs, one per field coordinate.
    Interior windows of divergence-free fields cancel exactly (the lattice
    is symmetric and the jump surfaces are axis-aligned or 45-degree
    tangent). When the window comes within eps of the domain wall r = 0 the
    result is flagged and reported against the boundary-layer product
    |B|_inf * (layer volume / eps) * (eps |grad rho|_1).
    """
    dim = field.ncomp
    if len(window) != dim:
        raise ConfigurationError(f"window has {len(window)} axes, field has {dim}")
    if spacing is None:
        spacing = eps / 8.0 if dim <= 3 else eps / 4.0
    if boundary_axis is None:
        boundary_axis = 1 if dim == 4 else 0

    axes = [np.arange(lo + 0.5 * spacing, hi, spacing) for lo, hi in window]
    mesh = np.meshgrid(*axes, indexing="ij")
    z = np.stack([m.ravel() for m in mesh], axis=1)

    half = int(math.ceil(eps / spacing - 0.5))
    # midpoint lattice, symmetric about the origin
    wax = (np.arange(-half, half) + 0.5) * spacing
    wmesh = np.meshgrid(*([wax] * dim), indexing="ij")
    w = np.stack([m.ravel() for m in wmesh], axis=1)
    moll = Mollifier(dim=dim, eps=eps)
    gw = moll.grad(w)
    keep = np.any(gw != 0.0, axis=1)
    w = w[keep]
    gw = gw[keep]

    cellw = spacing**dim
    total_l1 = 0.0
    max_abs = 0.0
    # process z in batches to keep the pairwise arrays modest
    batch = max(1, int(2e6 // max(len(w), 1)))
    for start in range(0, len(z), batch):
        zb = z[start : start + batch]
        pts = zb[:, None, :] - w[None, :, :]
        flat = pts.reshape(-1, dim)
        vals = field(0.0, *[flat[:, d] for d in range(dim)])
        vals = vals.reshape(len(zb), len(w), dim)
        conv = np.einsum("zwd,wd->z", vals, gw) * cellw
        total_l1 += float(np.sum(np.abs(conv)))
        max_abs = max(max_abs, float(np.max(np.abs(conv))) if conv.size else 0.0)
    value_l1 = total_l1 * cellw

    lo_b, hi_b = window[boundary_axis]
    clearance = lo_b  # distance of the window to the wall at coordinate 0
    flagged = clearance < eps
    if flagged:
        depth = min(eps - clearance, hi_b - lo_b)
        layer = depth
        for d, (lo, hi) in enumerate(window):
            if d != boundary_axis:
                layer *= hi - lo
    else:
        layer = 0.0

    return MollifiedDivergenceReport(
        field_name=field.name,
        eps=eps,
        spacing=spacing,
        value_l1=value_l1,
        value_linf=max_abs,
        boundary_flag=flagged,
        layer_volume=layer,
        c_star=layer / eps if eps > 0 else 0.0,
        c_dstar=eps * moll.grad_l1(),
        linf_bound=field.linf_bound,
    )


def zero_extend(field: VelocityField, domain: DomainBox, spacetime: bool = True) -> VelocityField:
    """Extend a spatial field by zero outside the open domain.

    With ``spacetime=True`` the result is the 4-component space-time field
    (1, b) on ]0, T[ x Omega and 0 elsewhere, whose distributional
    divergence is the boundary measure. With ``spacetime=False`` only the
    wall r = 0 is crossed (3 components), which is what the boundary-layer
    mollifier scan exercises.
    """
    if field.ncomp != 3:
        raise ConfigurationError("zero_extend expects a 3-component spatial field")
    T = domain.T
    base = field.evaluator

    if spacetime:

        def ev4(t, r, y1, y2):
            t = np.asarray(t, dtype=float).ravel()
            r = np.asarray(r, dtype=float).ravel()
            y1 = np.asarray(y1, dtype=float).ravel()
            y2 = np.asarray(y2, dtype=float).ravel()
            inside = (t > 0.0) & (t < T) & (r > 0.0)
            out = np.zeros((r.shape[0], 4))
            if inside.any():
                sub = base(t[inside] if field.schedule_coord == "t" else 0.0,
                           r[inside], y1[inside], y2[inside])
                out[inside, 0] = 1.0
                out[inside, 1:] = sub
            return out

        return VelocityField(
            name=f"{field.name}+zero_extended",
            evaluator=ev4,
            ncomp=4,
            linf_bound=max(1.0, field.linf_bound),
            euclid_bound=math.hypot(1.0, field.euclid_bound),
            finest_scale=field.finest_scale,
            lateral_period=field.lateral_period,
            schedule_coord="",
            breakpoints=(),
            is_measure_divergence=True,
            meta={"base": field.name},
        )

    def ev3(c, r, y1, y2):
        r = np.asarray(r, dtype=float).ravel()
        y1 = np.asarray(y1, dtype=float).ravel()
        y2 = np.asarray(y2, dtype=float).ravel()
        inside = r > 0.0
        out = np.zeros((r.shape[0], 3))
        if inside.any():
            out[inside] = base(c, r[inside], y1[inside], y2[inside])
        return out

    return VelocityField(
        name=f"{field.name}+wall_extended",
        evaluator=ev3,
        ncomp=3,
        linf_bound=field.linf_bound,
        euclid_bound=field.euclid_bound,
        finest_scale=field.finest_scale,
        lateral_period=field.lateral_period,
        schedule_coord=field.schedule_coord,
        breakpoints=field.breakpoints,
        is_measure_divergence=True,
        meta={"base": field.name},
    )

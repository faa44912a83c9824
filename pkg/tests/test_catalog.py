"""Schedules, variants, cycle fields, assembled fields, exact solutions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bvtransport import (
    ConfigurationError,
    ConstructionVariant,
    DyadicSchedule,
    assemble_field,
    chessboard_cycle,
    chessboard_datum,
    exact_solution,
    mixing_chessboard_cycle,
    pattern_rects,
    sigma_of,
)
from bvtransport.catalog import (
    region_front,
    region_lambda_minus,
    region_lambda_plus,
)
from conftest import staggered

TAGS = ("outward", "outward_mixing", "tangent", "tangent_mixing", "inward")


# ---------------------------------------------------------------------------
# schedule bookkeeping


def test_schedule_windows_and_freeze():
    s = DyadicSchedule(6)
    assert s.window(3) == (0.5, 1.0)
    assert s.window(6) == (2.0**-4, 2.0**-3)
    assert s.freeze_radius == 2.0**-4
    with pytest.raises(ConfigurationError):
        s.window(7)
    with pytest.raises(ConfigurationError):
        DyadicSchedule(3)


def test_schedule_level_of():
    s = DyadicSchedule(6)
    assert s.level_of(0.75) == 3
    assert s.level_of(0.3) == 4
    assert s.level_of(2.0**-4) == 6       # at and below the freeze radius
    assert s.level_of(2.0**-9) == 6


def test_schedule_breakpoints_sorted_and_complete():
    s = DyadicSchedule(5)
    pts = s.breakpoints()
    assert list(pts) == sorted(pts)
    assert s.freeze_radius in pts
    for k in range(3, 6):
        for j in range(5):
            assert 4.0 * 2.0**-k + j * 2.0**-k in pts


# ---------------------------------------------------------------------------
# variants


def test_variant_rejects_unknown_tag():
    with pytest.raises(ConfigurationError):
        ConstructionVariant("sideways", 5)
    with pytest.raises(ConfigurationError):
        ConstructionVariant("outward", 3)


@pytest.mark.parametrize(
    "tag,mean", [("outward", 1.0), ("outward_mixing", 1.0), ("tangent", 0.0),
                 ("tangent_mixing", 0.0), ("inward", -1.0)]
)
def test_variant_trace_mean(tag, mean):
    assert ConstructionVariant(tag, 5).trace_mean == mean


def test_variant_bounds():
    assert assemble_field(ConstructionVariant("outward", 4)).linf_bound == 5.0
    assert assemble_field(ConstructionVariant("outward", 4)).euclid_bound == math.sqrt(50.0)
    assert assemble_field(ConstructionVariant("tangent", 4)).linf_bound == 1.0


def test_assembled_meta_contract(outward4):
    m = outward4.meta
    assert m["variant"].tag == "outward" and m["k_max"] == 4
    assert m["trace_mean"] == 1.0
    assert m["inflow_everywhere"] is False
    assert assemble_field(ConstructionVariant("inward", 4)).meta["inflow_everywhere"] is True


# ---------------------------------------------------------------------------
# regions


def test_front_belongs_to_lambda_minus():
    t = np.array([0.25, 0.25, 0.25])
    r = np.array([0.2, 0.25, 0.3])
    minus = region_lambda_minus()(t, r, 0, 0)
    plus = region_lambda_plus()(t, r, 0, 0)
    front = region_front()(t, r, 0, 0)
    np.testing.assert_array_equal(minus, [True, True, False])
    np.testing.assert_array_equal(plus, ~minus)
    np.testing.assert_array_equal(front, [False, True, False])
    both = region_lambda_minus() | region_lambda_plus()
    assert both(t, r, 0, 0).all()


# ---------------------------------------------------------------------------
# cycle fields


@pytest.mark.parametrize("build,extra_breaks", [(chessboard_cycle, 0), (mixing_chessboard_cycle, 2)])
def test_cycle_metadata(build, extra_breaks):
    k = 4
    s = 2.0**-k
    f = build(k)
    assert f.schedule_coord == "r"
    assert f.lateral_period == 4.0 * s
    assert f.meta["span"] == (0.0, 4.0 * s)
    base = (s, 2.0 * s, 3.0 * s)
    assert tuple(sorted(base)) == tuple(sorted(set(base) & set(f.breakpoints)))
    assert len(f.breakpoints) == 3 + extra_breaks
    with pytest.raises(ConfigurationError):
        build(2)


def test_cycle_first_branch_is_plain_chessboard():
    k = 3
    s = 2.0**-k
    f = chessboard_cycle(k)
    ax = staggered(0.0, 32, 4.0 * s)
    A, B = np.meshgrid(ax, ax, indexing="ij")
    r = np.full(A.size, 0.5 * s)  # inside the first branch ]0, s[
    out = f(r, r, A.ravel(), B.ravel())
    i = np.floor(A.ravel() / s).astype(int) % 2
    j = np.floor(B.ravel() / s).astype(int) % 2
    br = out[:, 0]
    # dashed (even, even) carries -5 jets merged later; dark (odd, odd) +1 cells
    assert set(np.unique(br)) <= {-5.0, 0.0, 1.0, -1.0, 5.0}
    np.testing.assert_array_equal(out[(i == 1) & (j == 0), 0], 0.0)
    # pure radial pattern in the first branch
    np.testing.assert_array_equal(out[:, 1], 0.0)
    np.testing.assert_array_equal(out[:, 2], 0.0)


# ---------------------------------------------------------------------------
# assembled field structure (rect oracle, junction continuity)


def test_junctions_are_continuous():
    f = assemble_field(ConstructionVariant("outward", 5))
    d = 2.0**-30
    ax = staggered(0.0, 64, 0.5)
    A, B = np.meshgrid(ax, ax, indexing="ij")
    t = np.full(A.size, 0.9)
    for k in (4, 5):
        rk = 2.0 ** (2 - k)
        lo = f(t, np.full(A.size, rk - d), A.ravel(), B.ravel())
        hi = f(t, np.full(A.size, rk + d), A.ravel(), B.ravel())
        np.testing.assert_array_equal(lo, hi)


@pytest.mark.parametrize("r", [0.25, 0.125, 0.03125])
def test_pattern_rects_match_field(r):
    var = ConstructionVariant("outward", 5)
    f = assemble_field(var)
    rects, period = pattern_rects(var, r, "br")
    assert len(rects) == 8
    ax = staggered(0.0, 128, period)
    A, B = np.meshgrid(ax, ax, indexing="ij")
    t = np.full(A.size, 0.9)
    br = f(t, np.full(A.size, r), A.ravel(), B.ravel())[:, 0]
    ref = np.zeros(A.size)
    a, b = A.ravel() % period, B.ravel() % period
    for (v, x0, x1, y0, y1) in rects:
        ref[(a >= x0) & (a < x1) & (b >= y0) & (b < y1)] = v
    np.testing.assert_array_equal(br, ref)


def test_pattern_rects_rejects_unknown_quantity():
    with pytest.raises(ConfigurationError):
        pattern_rects(ConstructionVariant("outward", 4), 0.25, "b2")


# ---------------------------------------------------------------------------
# exact solutions


def test_exact_solution_front_inclusive(outward4_solution):
    sol = outward4_solution
    # a dashed-cell point: behind and on the front the profile value is 1
    on = sol(np.array([0.25]), np.array([0.25]), np.array([0.01]), np.array([0.01]))
    ahead = sol(np.array([0.2]), np.array([0.25]), np.array([0.01]), np.array([0.01]))
    assert on[0] == 1.0 and ahead[0] == 0.0
    assert sol.front_profile and sol.variant.tag == "outward"


def test_exact_solution_bounded_by_one(outward4_solution):
    rng = np.random.default_rng(11)
    t = rng.uniform(0.05, 1.0, 4000)
    r = rng.uniform(0.0, 1.0, 4000)
    y1 = rng.uniform(0.0, 0.5, 4000)
    y2 = rng.uniform(0.0, 0.5, 4000)
    u = outward4_solution(t, r, y1, y2)
    assert np.max(np.abs(u)) <= 1.0
    assert set(np.unique(u)) <= {-1.0, 0.0, 1.0}


def test_exact_solution_r_independent_below_freeze():
    var = ConstructionVariant("inward", 5)
    sol = exact_solution(var)
    freeze = var.schedule.freeze_radius
    ax = staggered(0.0, 16, 0.5)
    A, B = np.meshgrid(ax, ax, indexing="ij")
    t = np.full(A.size, 0.9)
    u1 = sol(t, np.full(A.size, freeze / 2), A.ravel(), B.ravel())
    u2 = sol(t, np.full(A.size, freeze / 8), A.ravel(), B.ravel())
    np.testing.assert_array_equal(u1, u2)


# ---------------------------------------------------------------------------
# data


def test_chessboard_datum():
    d = chessboard_datum(3)
    assert d.cell == 2.0**-5
    assert d(0.5 * d.cell, 0.5 * d.cell) == 1.0
    assert d(1.5 * d.cell, 0.5 * d.cell) == -1.0
    ax = staggered(0.0, 64, 4 * d.cell)
    A, B = np.meshgrid(ax, ax, indexing="ij")
    assert abs(np.mean(d(A, B))) == 0.0
    with pytest.raises(ConfigurationError):
        chessboard_datum(0)


def test_sigma_alternates():
    assert [sigma_of(k) for k in range(3, 8)] == [1.0, -1.0, 1.0, -1.0, 1.0]


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=30, deadline=None)
@given(
    t=st.floats(0.01, 1.0),
    r=st.floats(0.001, 1.0),
    y1=st.floats(0.0, 0.5),
    y2=st.floats(0.0, 0.5),
)
def test_solution_vanishes_ahead_of_front_property(t, r, y1, y2):
    sol = exact_solution(ConstructionVariant("outward", 4))
    u = sol(np.array([t]), np.array([r]), np.array([y1]), np.array([y2]))
    if r > t:
        assert u[0] == 0.0
    else:
        assert abs(u[0]) <= 1.0

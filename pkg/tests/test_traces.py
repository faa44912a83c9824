"""Trace profiles, pairings, and the weak/strong convergence checks."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bvtransport import (
    ConfigurationError,
    ConstructionVariant,
    DomainBox,
    TestFunction,
    assemble_field,
    battery,
    boundary_condition_check,
    chessboard_cycle,
    exact_solution,
    initial_trace,
    l1_distance,
    make_grid,
    one_sided_trace,
    renormalization_trace_check,
    slab_variation_bound,
    smooth_field,
    strong_l1_check,
    trace_jump,
    trace_pairing,
    weak_star_check,
    zero_extend,
)
from bvtransport.traces import gradient_check, pair_constant


# ---------------------------------------------------------------------------
# test functions


def test_battery_shapes():
    assert len(battery()) == 20
    assert len(battery(("t", "r", "y1", "y2"))) == 20
    with pytest.raises(ConfigurationError):
        battery(("x", "y"))
    for phi in battery():
        lo, hi = phi.support(0)
        assert hi < 1.0  # admissible: vanishes before the horizon


def test_bump_gradient_exact():
    worst = max(gradient_check(phi) for phi in battery(("t", "r", "y1", "y2"))[:6])
    assert worst <= 1e-12


def test_testfunction_validation():
    with pytest.raises(ConfigurationError):
        TestFunction(("t", "y1"), (0.5,), (0.25, 0.25))
    with pytest.raises(ConfigurationError):
        TestFunction(("t",), (0.5,), (0.0,))
    phi = TestFunction(("t", "y1", "y2"), (0.5, 0.25, 0.25), (0.25, 0.125, 0.125))
    assert phi.axis("y2") == 2
    with pytest.raises(ConfigurationError):
        phi.axis("r")


def test_pair_constant_matches_simpson():
    phi = TestFunction(("t", "y1", "y2"), (0.5, 0.25, 0.25), (0.25, 0.125, 0.125))
    exact = pair_constant(2.0, phi)
    # independent midpoint quadrature over the support and the torus
    n = 400
    t = np.linspace(0.25, 0.75, n, endpoint=False) + 0.25 / n
    y = np.linspace(0.0, 0.5, n, endpoint=False) + 0.25 / n
    T, A, B = np.meshgrid(t, y, y, indexing="ij")
    approx = 2.0 * np.sum(phi(T, A, B)) * (0.5 / n) * (0.5 / n) ** 2
    assert exact == pytest.approx(approx, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(amp=st.floats(-4.0, 4.0), val=st.floats(-2.0, 2.0))
def test_pair_constant_is_bilinear(amp, val):
    base = TestFunction(("t", "y1", "y2"), (0.5, 0.25, 0.25), (0.25, 0.125, 0.125))
    scaled = TestFunction(base.axes, base.centers, base.widths, amplitude=amp)
    assert pair_constant(val, scaled) == pytest.approx(
        amp * val * pair_constant(1.0, base), abs=1e-12
    )


# ---------------------------------------------------------------------------
# one-sided traces of the catalog fields


def test_outward_junction_profile(outward4):
    p = one_sided_trace(outward4, 0.25, "-", "b")
    assert p.has_rects
    assert p.static_from == 0.25      # static once the front has passed r0
    assert p.static_mean() == 1.0
    assert p.linf() == 5.0
    assert p.orientation == (0, -1, 0, 0)


def test_inward_trace_is_exactly_minus_one():
    var = ConstructionVariant("inward", 4)
    f = assemble_field(var)
    p = one_sided_trace(f, var.schedule.freeze_radius, "-", "b")
    assert p.static_mean() == -1.0
    assert l1_distance(p, -1.0) == 0.0


def test_trace_jump_vanishes_at_junction(outward4):
    assert trace_jump(outward4, 0.25, "b").linf() == 0.0


def test_weak_star_convergence_frozen():
    f = assemble_field(ConstructionVariant("outward", 5))
    profs = [one_sided_trace(f, 2.0 ** (2 - k), "-", "b") for k in (3, 4, 5)]
    rep = weak_star_check(profs, 1.0, battery()[:4])
    assert rep.passed
    assert rep.errors.max() == pytest.approx(1.2014640968024959e-04, rel=1e-9)
    assert float((rep.errors / rep.bounds).max()) <= 7e-6


def test_weak_star_wrong_limit_stalls():
    # the junction bound 4*Lip*2^(2-k) is loose at coarse k, so a wrong
    # constant can slip under it; what gives it away is that the errors
    # stop decaying (they stick near 2*integral(phi))
    f = assemble_field(ConstructionVariant("outward", 5))
    profs = [one_sided_trace(f, 2.0 ** (2 - k), "-", "b") for k in (3, 4, 5)]
    rep = weak_star_check(profs, -1.0, battery()[:2])
    assert rep.errors.min() > 0.005
    assert max(abs(r) for r in rep.rates) < 0.1


# ---------------------------------------------------------------------------
# variation bounds and strong L1


def test_slab_variation_bounds_frozen(outward4):
    s = 2.0**-4
    cyc = chessboard_cycle(4)
    assert slab_variation_bound(cyc, s, 3 * s) == 3.0
    assert slab_variation_bound(cyc, 0.0, 2 * s) == 1.5
    # assembled outward: infinitely many cycles accumulate at the wall
    assert slab_variation_bound(outward4, 0.0, 0.25) is None
    # below the sweep band of window 4 the pattern is radially constant
    assert slab_variation_bound(outward4, 0.25, 0.3) == 0.0
    fin = assemble_field(ConstructionVariant("inward", 4))
    assert slab_variation_bound(fin, 0.01, 0.3) == 0.0


def test_strong_l1_interior_meets_bounds_exactly():
    k = 4
    f = chessboard_cycle(k)
    s = 2.0**-k
    r0 = 2.0 * s
    offs = [r0 + s * x for x in (0.5, 0.25, 0.125)]
    limit = one_sided_trace(f, r0, "+", "b")
    profs = [one_sided_trace(f, r, "-", "b") for r in offs]
    for p, r in zip(profs, offs):
        p.meta["rhat"] = r
    rep = strong_l1_check(profs, limit, field=f, base_offset=r0, expect="converge")
    assert rep.passed and rep.converges
    assert rep.distances == [0.75, 0.375, 0.1875]
    # the jet edges sweep at unit rate: distance equals the variation bound
    assert rep.distances == rep.bounds


def test_strong_l1_separation_needs_unbounded_variation(outward4):
    # moving toward the wall the profiles stay far from the weak limit
    prof = one_sided_trace(outward4, 2.0**-6, "-", "b")
    prof.meta["rhat"] = 2.0**-6
    rep = strong_l1_check([prof], 1.0, field=outward4, base_offset=0.0, expect="separate")
    assert rep.passed
    assert rep.bounds == [None] and not rep.bound_available


def test_strong_l1_unknown_expectation(outward4):
    prof = one_sided_trace(outward4, 0.25, "-", "b")
    with pytest.raises(ConfigurationError):
        strong_l1_check([prof], 1.0, expect="diverge")


# ---------------------------------------------------------------------------
# renormalization and boundary data


def test_renormalization_triple_exact(outward4, outward4_solution):
    var = ConstructionVariant("outward", 4)
    fr = var.schedule.freeze_radius
    tb = one_sided_trace(outward4, fr, "-", "b", solution=outward4_solution)
    tub = one_sided_trace(outward4, fr, "-", "ub", solution=outward4_solution)
    tu2b = one_sided_trace(outward4, fr, "-", "u2b", solution=outward4_solution)
    rep = renormalization_trace_check(tb, tub, tu2b)
    assert rep.passed
    assert rep.max_defect == 0.0 and rep.max_offband == 0.0
    assert rep.active_fraction == 0.5


def test_boundary_classification_fractions(outward4, outward4_solution):
    var = ConstructionVariant("outward", 4)
    fr = var.schedule.freeze_radius
    tb = one_sided_trace(outward4, fr, "-", "b", solution=outward4_solution)
    tub = one_sided_trace(outward4, fr, "-", "ub", solution=outward4_solution)
    rep = boundary_condition_check(tb, tub, 0.0, battery()[:4])
    assert rep.gamma_fractions == {"inflow": 0.25, "outflow": 0.25, "inactive": 0.5}
    assert not rep.inflow_everywhere
    assert rep.passed
    assert max(rep.discrepancies) == pytest.approx(0.006867113802756567, rel=1e-9)


# ---------------------------------------------------------------------------
# initial trace


def test_initial_trace_of_pattern_solution_is_zero(outward4_solution):
    grid = make_grid(DomainBox(r_max=1.0, y_period=0.5, T=1.0), 5)
    tr = initial_trace(outward4_solution.evaluator, grid, subsample=4)
    assert tr.meta["cauchy"]
    assert float(np.max(np.abs(tr.values))) == 0.0


def test_initial_trace_reports_non_cauchy():
    # box averages of 1/sqrt(t) never settle: the status must say so
    def rough(t, r, y1, y2):
        return 1.0 / np.sqrt(np.asarray(t, dtype=float))

    grid = make_grid(DomainBox(r_max=0.25, y_period=0.25, T=1.0), 2)
    tr = initial_trace(rough, grid, subsample=2)
    assert not tr.meta["cauchy"]
    assert tr.meta["status"] == "no trace at tested resolution"


# ---------------------------------------------------------------------------
# distributional pairings of zero extensions


def test_trace_pairing_gauss_on_smooth_interior_bump():
    ext = zero_extend(smooth_field("shear"), DomainBox())
    ext.meta["smooth"] = True
    phi = TestFunction(("t", "r", "y1", "y2"), (0.4, 0.5, 0.25, 0.25),
                       (0.15, 0.2, 0.12, 0.12))
    assert abs(trace_pairing(ext, phi)) <= 1e-12


def test_trace_pairing_lattice_decays_linearly(outward4):
    ext = zero_extend(outward4, DomainBox())
    phi = TestFunction(("t", "r", "y1", "y2"), (0.4, 0.5, 0.25, 0.25),
                       (0.15, 0.2, 0.12, 0.12))
    v5 = trace_pairing(ext, phi, level=5)
    v6 = trace_pairing(ext, phi, level=6)
    assert v5 == pytest.approx(-0.0006395935271036519, rel=1e-9)
    # interior bump of a divergence-free extension: true value 0, the
    # lattice error halves per level
    assert abs(v6) <= 0.6 * abs(v5)


def test_trace_pairing_guards(outward4):
    phi3 = TestFunction(("t", "y1", "y2"), (0.5, 0.25, 0.25), (0.25, 0.1, 0.1))
    ext = zero_extend(outward4, DomainBox())
    with pytest.raises(ConfigurationError):
        trace_pairing(ext, phi3)
    with pytest.raises(ConfigurationError):
        trace_pairing(outward4, battery(("t", "r", "y1", "y2"))[0])

"""Donor-cell solver: stability guards, balances, convergence, cone energy."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bvtransport import (
    CFLError,
    ConeWeight,
    ConfigurationError,
    ConstructionVariant,
    DomainBox,
    FaceFluxField,
    Scenario,
    ScalarSolution,
    assemble_field,
    cone_energy,
    cone_energy_check,
    exact_solution,
    fill_scenario,
    l2_balance_report,
    make_grid,
    sample_face_fluxes,
    smooth_field,
    smooth_scenario,
    solve_ibvp,
    upwind_step,
    weak_residual,
)
from bvtransport.geometry import CellScalarField
from bvtransport.traces import TestFunction


def _grid(level=3, r_max=0.5, y_period=0.5):
    return make_grid(DomainBox(r_max=r_max, y_period=y_period, T=1.0), level)


def _l1_error(traj, sol):
    g = traj.grid
    R, Y1, Y2 = np.meshgrid(g.r_centers, g.y1_centers, g.y2_centers, indexing="ij")
    t = traj.final().time
    ex = np.asarray(sol.evaluator(t, R.ravel(), Y1.ravel(), Y2.ravel())).reshape(R.shape)
    return float(np.sum(np.abs(traj.final().values - ex))) * g.cell_volume()


# ---------------------------------------------------------------------------
# scenario and step guards


def test_scenario_validation():
    f = smooth_field("constant")
    with pytest.raises(ConfigurationError):
        Scenario(name="bad", field=f, cfl=0.6)
    with pytest.raises(ConfigurationError):
        Scenario(name="bad", field=f, T=1.5)
    scn = Scenario(name="ok", field=f, T=0.5)
    assert scn.with_(level=4).level == 4 and scn.level == 6


def test_cfl_component_guard():
    grid = _grid()
    flux = sample_face_fluxes(smooth_field("constant"), grid)
    state = CellScalarField(grid=grid, values=np.zeros((grid.nr, grid.n1, grid.n2)), time=0.0)
    with pytest.raises(CFLError, match="exceeds"):
        upwind_step(state, flux, 0.5 * grid.h, cfl=0.45)


def test_cfl_positivity_guard_fires_below_component_target():
    # faces alternating -1/+1 in every direction: each cell sheds mass
    # through all six faces, so the sharp outflow sum is 6 while
    # max|component| is only 1
    grid = _grid()
    sgn_r = np.where(np.arange(grid.nr + 1)[:, None, None] % 2 == 0, -1.0, 1.0)
    fr = np.broadcast_to(sgn_r, (grid.nr + 1, grid.n1, grid.n2)).copy()
    sgn_l = np.where(np.arange(grid.n1)[None, :, None] % 2 == 0, -1.0, 1.0)
    f1 = np.broadcast_to(sgn_l, (grid.nr, grid.n1, grid.n2)).copy()
    f2 = np.swapaxes(f1, 1, 2).copy()
    flux = FaceFluxField(grid=grid, slab=(0.0, 1.0), i_lo=0, i_hi=grid.nr,
                         fr=fr, f1=f1, f2=f2)
    state = CellScalarField(grid=grid, values=np.ones((grid.nr, grid.n1, grid.n2)), time=0.0)
    dt = 0.25 * grid.h  # passes dt <= 0.45 h / max|b|
    with pytest.raises(CFLError, match="positivity"):
        upwind_step(state, flux, dt, g_bar=0.0, g_outer=0.0, cfl=0.45)
    # the same faces are fine at a positivity-respecting step
    out = upwind_step(state, flux, grid.h / 8.0, g_bar=0.0, g_outer=0.0, cfl=0.45)
    assert out.meta["cfl"] <= 1.0


def test_wall_inflow_requires_datum():
    scn = Scenario(name="nog", field=smooth_field("constant"), u_bar=1.0,
                   g_bar=None, T=0.25, level=3)
    with pytest.raises(ConfigurationError, match="no datum"):
        solve_ibvp(scn)


def test_snapshot_times_must_sit_on_steps():
    scn, _ = smooth_scenario("constant", level=3, T=0.25)
    with pytest.raises(ConfigurationError):
        solve_ibvp(scn, snapshot_times=[0.3])
    traj = solve_ibvp(scn, snapshot_times=[0.125, 0.25])
    assert [s.time for s in traj.snapshots] == [0.125, 0.25]
    with pytest.raises(ConfigurationError):
        traj.snapshot_at(0.2)


# ---------------------------------------------------------------------------
# exact discrete identities


def test_zero_data_fast_path_equals_full_loop():
    # a callable that happens to return zeros is opaque to the zero-data
    # detection, forcing the stepped loop; both paths must agree exactly
    def zeros(r, y1, y2):
        return np.zeros(np.shape(r))

    base = Scenario(name="z", field=smooth_field("shear"), u_bar=0.0,
                    g_bar=0.0, T=0.25, level=3)
    fast = solve_ibvp(base)
    slow = solve_ibvp(base.with_(u_bar=zeros))
    assert fast.meta.get("zero_data") is True
    assert "zero_data" not in slow.meta
    assert fast.dt == slow.dt and fast.n_steps == slow.n_steps
    assert np.array_equal(fast.conserved, slow.conserved)
    assert np.array_equal(fast.final().values, slow.final().values)
    assert not slow.final().values.any()


def test_mass_column_telescopes_bitwise():
    scn, _ = smooth_scenario("shear", level=4, T=0.25)
    traj = solve_ibvp(scn)
    mass = traj.conserved[0, 2]
    for n in range(traj.n_steps):
        mass = mass + traj.conserved[n + 1, 5] + traj.source_mass[n]
        assert mass == traj.conserved[n + 1, 2]
    assert traj.mass_defect <= 1e-15


def test_fill_scenario_mass_and_max_principle():
    traj = solve_ibvp(fill_scenario(level=4, T=0.5))
    assert traj.max_principle_defect == 0.0
    u = traj.final().values
    assert u.min() >= 0.0 and u.max() <= 1.0
    # inflow injects 0.25 per unit time; a whiff of mass has already left
    # through the outer face (numerical signal speed h/dt > 1)
    assert traj.conserved[-1, 2] == pytest.approx(0.12495696359929685, rel=1e-12)
    assert traj.conserved[-1, 2] < 0.5 * 0.25


def test_l2_balance_is_dissipative():
    scn, _ = smooth_scenario("shear", level=5, T=0.25)
    rep = l2_balance_report(solve_ibvp(scn))
    assert rep.dissipative
    assert rep.max_defect == 0.0
    assert rep.total_dissipation == pytest.approx(0.0006754168951356855, rel=1e-9)
    assert np.all(rep.defects <= 0.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_upwind_step_commutes_with_doubling(seed):
    # scaling by 2 is exact in binary floats, and the donor-cell update is
    # linear in the state when the data are zero, so the two paths must
    # agree bit for bit
    grid = _grid(level=3)
    flux = sample_face_fluxes(smooth_field("shear"), grid)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, (grid.nr, grid.n1, grid.n2))
    s1 = CellScalarField(grid=grid, values=u, time=0.0)
    s2 = CellScalarField(grid=grid, values=2.0 * u, time=0.0)
    dt = 0.25 * grid.h
    out1 = upwind_step(s1, flux, dt, g_bar=0.0, g_outer=0.0)
    out2 = upwind_step(s2, flux, dt, g_bar=0.0, g_outer=0.0)
    assert np.array_equal(2.0 * out1.values, out2.values)


# ---------------------------------------------------------------------------
# convergence on the smooth reference problems


def test_smooth_convergence_frozen():
    errs = {}
    for lev in (4, 5):
        scn, sol = smooth_scenario("constant", level=lev, T=0.25)
        errs[lev] = _l1_error(solve_ibvp(scn), sol)
    assert errs[4] == pytest.approx(0.00206212071195324, rel=1e-9)
    assert errs[5] == pytest.approx(0.0016511986715187622, rel=1e-9)
    assert errs[5] < errs[4]


def test_shear_error_frozen():
    scn, sol = smooth_scenario("shear", level=5, T=0.25)
    assert _l1_error(solve_ibvp(scn), sol) == pytest.approx(
        0.0016882533283558957, rel=1e-9
    )


# ---------------------------------------------------------------------------
# cone weights


def test_cone_weight_profile():
    w = ConeWeight(speed=2.0)
    s = np.linspace(-0.5, 1.0, 601)
    hv = w.h(s)
    assert np.all(hv[s <= w.plateau] == 1.0)
    assert np.all(hv[s >= w.plateau + w.width] == 0.0)
    assert np.all(np.diff(hv) <= 1e-15)          # nonincreasing
    assert np.all(w.h_prime(s) <= 1e-15)
    with pytest.raises(ConfigurationError):
        ConeWeight(speed=0.0)
    with pytest.raises(ConfigurationError):
        ConeWeight(speed=1.0, width=0.0)


def test_cone_weight_transport_identity():
    # d_t nu + speed |grad nu| = 0 off the center line, any speed
    for speed in (0.5, 1.0, np.sqrt(50.0)):
        assert ConeWeight(speed=speed).eikonal_defect(n=100_000) <= 1e-12


def test_cone_cutoff_brackets_apex():
    w = ConeWeight(speed=1.0, apex_time=0.5)
    assert w.chi(8, 0.5) == 1.0
    assert w.chi(8, 0.49) == 1.0
    assert w.chi(8, 0.5 + 2.0 / 8) == 0.0
    with pytest.raises(ConfigurationError):
        w.chi(0, 0.5)


def test_cone_energy_of_unit_state_frozen():
    w = ConeWeight(speed=1.0)

    def one(t, r, y1, y2):
        return np.ones(np.shape(r))

    e5 = cone_energy(one, w, 0.5, make_grid(DomainBox(), 5))
    e6 = cone_energy(one, w, 0.5, make_grid(DomainBox(), 6))
    assert e5 == pytest.approx(0.056722855246715095, rel=1e-12)
    assert e6 == pytest.approx(0.05662404872388539, rel=1e-12)
    assert abs(e5 - e6) < 2e-3  # midpoint rule is already settled


def test_cone_energy_check_verdicts(outward4):
    def zero(t, r, y1, y2):
        return np.zeros(np.shape(r))

    def one(t, r, y1, y2):
        return np.ones(np.shape(r))

    ok = cone_energy_check(zero, outward4, level=5)
    assert ok.verdict == "PASS" and ok.gronwall_bound == 0.0
    bad = cone_energy_check(one, outward4, level=5)
    assert bad.verdict == "WITNESS" and bad.energy >= bad.witness


# ---------------------------------------------------------------------------
# weak residual


def test_weak_residual_zero_solution_is_exactly_zero():
    def zf(t, r, y1, y2):
        return np.zeros(np.shape(r))

    zero = ScalarSolution(name="zero", evaluator=zf, values_linf=0.0)
    phi = TestFunction(("t", "r", "y1", "y2"), (0.5, 0.4, 0.25, 0.25),
                       (0.2, 0.2, 0.2, 0.2))
    assert weak_residual(zero, smooth_field("shear"), phi,
                         g_bar=0.0, u_bar=0.0, q=2.0**-6) == 0.0


def test_weak_residual_pattern_decays_linearly(outward4, outward4_solution):
    phi = TestFunction(("t", "r", "y1", "y2"), (0.5, 0.4, 0.25, 0.25),
                       (0.2, 0.2, 0.2, 0.2))
    r8 = weak_residual(outward4_solution, outward4, phi, g_bar=0.0, u_bar=0.0,
                       q=2.0**-8)
    r9 = weak_residual(outward4_solution, outward4, phi, g_bar=0.0, u_bar=0.0,
                       q=2.0**-9)
    assert r8 == pytest.approx(-2.9812231146827527e-05, rel=1e-9)
    assert r9 == pytest.approx(-1.488869973115641e-05, rel=1e-9)
    assert 1.8 <= r8 / r9 <= 2.2


def test_weak_residual_guards(outward4, outward4_solution):
    late = TestFunction(("t", "r", "y1", "y2"), (0.9, 0.4, 0.25, 0.25),
                        (0.2, 0.2, 0.2, 0.2))
    with pytest.raises(ConfigurationError, match="horizon"):
        weak_residual(outward4_solution, outward4, late)
    spatial = TestFunction(("t", "y1", "y2"), (0.5, 0.25, 0.25), (0.2, 0.2, 0.2))
    with pytest.raises(ConfigurationError):
        weak_residual(outward4_solution, outward4, spatial)
    phi = TestFunction(("t", "r", "y1", "y2"), (0.5, 0.4, 0.25, 0.25),
                       (0.2, 0.2, 0.2, 0.2))
    with pytest.raises(ConfigurationError, match="source-free"):
        weak_residual(outward4_solution, outward4, phi, f=1.0)

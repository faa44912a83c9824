"""Grids, face sampling, exact discrete divergence, extensions."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bvtransport import (
    ConfigurationError,
    ConstructionVariant,
    DomainBox,
    Mollifier,
    ResolutionError,
    ScheduleError,
    VelocityField,
    assemble_field,
    chessboard_cycle,
    discrete_divergence,
    make_grid,
    mixing_chessboard_cycle,
    mollified_divergence_l1,
    sample_face_fluxes,
    smooth_field,
    zero_extend,
)


# ---------------------------------------------------------------------------
# grids


def test_grid_spacing_and_counts():
    g = make_grid(DomainBox(r_max=1.0, y_period=0.5), 4)
    assert g.h == 2.0**-4
    assert g.nr == 16 and g.n1 == 8 and g.n2 == 8
    np.testing.assert_array_equal(g.r_faces, np.arange(17) * g.h)
    np.testing.assert_array_equal(g.r_centers, (np.arange(16) + 0.5) * g.h)
    assert g.cell_volume() == g.h**3


def test_grid_refuses_non_dividing_extent():
    # r_max = 0.375 is not a multiple of h = 1/4 at level 2
    with pytest.raises(ConfigurationError):
        make_grid(DomainBox(r_max=0.375, y_period=0.5), 2)


def test_domain_validation():
    with pytest.raises(ConfigurationError):
        DomainBox(r_max=-1.0)
    with pytest.raises(ConfigurationError):
        DomainBox(T=1.5)
    # a period h cannot divide is caught at grid construction
    with pytest.raises(ConfigurationError):
        make_grid(DomainBox(r_max=1.0, y_period=0.3), 3)


def test_grid_refuses_too_coarse_for_field():
    f = chessboard_cycle(4)
    g = make_grid(DomainBox(r_max=4.0 * 2.0**-4, y_period=4.0 * 2.0**-4), 4)
    # h = 2^-4 equals the structural scale; faces would sit on pattern edges
    with pytest.raises(ResolutionError):
        sample_face_fluxes(f, g)


# ---------------------------------------------------------------------------
# face sampling semantics


def test_constant_field_face_values():
    f = smooth_field("constant", rate=0.5)
    g = make_grid(DomainBox(r_max=0.5, y_period=0.5), 4)
    flux = sample_face_fluxes(f, g, slab=None)
    np.testing.assert_array_equal(flux.fr, 1.0)
    np.testing.assert_array_equal(flux.f1, 0.25)
    np.testing.assert_array_equal(flux.f2, 0.0)


def test_radial_faces_sample_from_below():
    # b_r jumps at r = 0.25; the face on the jump takes the value h/4 below
    def ev(c, r, y1, y2):
        r = np.asarray(r, dtype=float).ravel()
        out = np.zeros((r.size, 3))
        out[:, 0] = np.where(r < 0.25, -1.0, 1.0)
        return out

    f = VelocityField(
        name="step", evaluator=ev, ncomp=3, linf_bound=1.0, euclid_bound=1.0,
        finest_scale=0.25,
    )
    g = make_grid(DomainBox(r_max=0.5, y_period=0.5), 4)
    flux = sample_face_fluxes(f, g)
    i_jump = round(0.25 / g.h)
    assert flux.fr[i_jump, 0, 0] == -1.0       # sampled at 0.25 - h/4
    assert flux.fr[i_jump + 1, 0, 0] == 1.0
    # the wall face samples h/4 above r = 0 (inside the domain)
    assert flux.fr[0, 0, 0] == -1.0


def test_slab_straddling_breakpoint_rejected():
    f = chessboard_cycle(3)
    g = make_grid(DomainBox(r_max=0.5, y_period=0.5), 5)
    with pytest.raises(ScheduleError):
        sample_face_fluxes(f, g, slab=(0.0, 2.0**-2))


def test_t_scheduled_field_needs_a_slab(outward4):
    g = make_grid(DomainBox(r_max=1.0, y_period=0.5), 6)
    with pytest.raises(ScheduleError):
        sample_face_fluxes(outward4, g, slab=None)


# ---------------------------------------------------------------------------
# exact discrete divergence


def _cycle_grid(k, level):
    span = 4.0 * 2.0**-k
    return make_grid(DomainBox(r_max=span, y_period=span), level)


@pytest.mark.parametrize("k", [3, 4, 5])
@pytest.mark.parametrize("build", [chessboard_cycle, mixing_chessboard_cycle])
def test_cycle_divergence_is_exactly_zero(k, build):
    f = build(k)
    g = _cycle_grid(k, k + 2)
    div = discrete_divergence(sample_face_fluxes(f, g))
    assert div.linf() == 0.0


def test_assembled_divergence_is_exactly_zero(outward4):
    g = make_grid(DomainBox(r_max=1.0, y_period=0.5), 6)
    div = discrete_divergence(sample_face_fluxes(outward4, g, slab=(0.5, 0.5 + 2.0**-4)))
    assert div.linf() == 0.0


@settings(max_examples=12, deadline=None)
@given(
    k=st.integers(min_value=3, max_value=5),
    extra=st.integers(min_value=2, max_value=3),
    tangent=st.booleans(),
)
def test_divergence_exactness_property(k, extra, tangent):
    f = chessboard_cycle(k, tangent=tangent)
    g = _cycle_grid(k, k + extra)
    div = discrete_divergence(sample_face_fluxes(f, g))
    assert div.linf() == 0.0


# ---------------------------------------------------------------------------
# zero extension


def test_zero_extend_values(outward4):
    dom = DomainBox(r_max=1.0, y_period=0.5)
    ext = zero_extend(outward4, dom)
    assert ext.ncomp == 4
    assert ext.meta["base"] == outward4.name
    assert ext.linf_bound == max(1.0, outward4.linf_bound)

    inside = ext(np.array([0.5]), np.array([0.125]), np.array([0.1]), np.array([0.1]))
    assert inside[0, 0] == 1.0  # time component of (1, b)
    # only the wall r = 0 and the time slab are crossed by the extension
    behind_wall = ext(np.array([0.5]), np.array([-0.125]), np.array([0.1]), np.array([0.1]))
    np.testing.assert_array_equal(behind_wall, 0.0)
    before = ext(np.array([-0.25]), np.array([0.125]), np.array([0.1]), np.array([0.1]))
    np.testing.assert_array_equal(before, 0.0)
    after = ext(np.array([1.25]), np.array([0.125]), np.array([0.1]), np.array([0.1]))
    np.testing.assert_array_equal(after, 0.0)


# ---------------------------------------------------------------------------
# mollified divergence


def test_mollifier_mass_is_one():
    m = Mollifier(dim=3, eps=2.0**-6)
    assert abs(m.mass_quadrature() - 1.0) <= 1e-9
    assert m.grad_l1() > 0.0


def test_mollified_divergence_interior_window_cancels():
    # window inside the pure-radial branch: every jump is axis aligned, the
    # symmetric midpoint lattice cancels to rounding
    f = chessboard_cycle(3)
    eps = 2.0**-7
    window = ((2.0**-5, 2.0**-4),) * 3
    rep = mollified_divergence_l1(f, eps, window)
    assert not rep.boundary_flag
    assert rep.value_l1 <= 1e-8
    assert rep.value_l1 == pytest.approx(4.490366014601739e-19, rel=1e-9)


def test_mollified_divergence_sweep_window_first_order():
    # the 45-degree band interfaces cut lattice cells, so the scan carries
    # an O(spacing) quadrature error toward the true value 0: halving the
    # spacing halves the measurement
    f = chessboard_cycle(3)
    eps = 2.0**-7
    window = ((0.25, 0.25 + 2.0**-7),) * 3
    coarse = mollified_divergence_l1(f, eps, window, spacing=eps / 4).value_l1
    fine = mollified_divergence_l1(f, eps, window, spacing=eps / 8).value_l1
    assert coarse == pytest.approx(1.0940131064906363e-05, rel=1e-9)
    assert fine == pytest.approx(5.9275150967101254e-06, rel=1e-9)
    assert 1.7 <= coarse / fine <= 2.2


def test_mollified_divergence_wall_window_flagged():
    f = chessboard_cycle(3)
    eps = 2.0**-7
    window = ((0.0, 2.0**-5), (0.25, 0.25 + 2.0**-5), (0.25, 0.25 + 2.0**-5))
    rep = mollified_divergence_l1(f, eps, window, boundary_axis=0)
    assert rep.boundary_flag
    assert rep.value_l1 > 0.0
    assert rep.ratio <= 1.0

"""Closed-form square rotations, mixing stages, marker transport."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bvtransport import (
    ConfigurationError,
    evolve_chessboard,
    flow_map,
    pushforward_density,
    quarter_turn,
)
from bvtransport.catalog import mixing_block, rotation_block
from bvtransport.kernels import oracle_event_midpoint
from conftest import staggered

DATUM = np.array(
    [[1, -1, 1, -1], [-1, 1, -1, 1], [1, -1, 1, -1], [-1, 1, -1, 1]], dtype=np.int8
)
AFTER_QUARTER = np.array(
    [[1, -1, 1, -1], [-1, -1, 1, 1], [1, 1, -1, -1], [-1, 1, -1, 1]], dtype=np.int8
)
AFTER_HALF = np.array(
    [[-1, -1, 1, 1], [-1, 1, -1, 1], [1, -1, 1, -1], [1, 1, -1, -1]], dtype=np.int8
)
FINAL = np.array(
    [[-1, -1, 1, 1], [-1, -1, 1, 1], [1, 1, -1, -1], [1, 1, -1, -1]], dtype=np.int8
)


# ---------------------------------------------------------------------------
# quarter turns


def test_quarter_turn_known_points():
    assert quarter_turn(0.3, 0.1, center=(0.25, 0.25)) == (0.1, 0.2)
    assert quarter_turn(0.3, 0.1) == (0.1, -0.3)
    y1, y2 = quarter_turn(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    np.testing.assert_array_equal(y1, [0.0, 1.0])
    np.testing.assert_array_equal(y2, [-1.0, 0.0])


def test_four_quarter_turns_are_identity_bitwise():
    rng = np.random.default_rng(907)
    y1 = rng.uniform(-1, 1, 512)
    y2 = rng.uniform(-1, 1, 512)
    a, b = y1, y2
    for _ in range(4):
        a, b = quarter_turn(a, b, center=(0.25, -0.5))
    np.testing.assert_array_equal(a, y1)
    np.testing.assert_array_equal(b, y2)


@settings(max_examples=60, deadline=None)
@given(
    y1=st.floats(-2, 2), y2=st.floats(-2, 2),
    c1=st.floats(-1, 1), c2=st.floats(-1, 1),
)
def test_quarter_turn_preserves_sup_distance(y1, y2, c1, c2):
    a, b = quarter_turn(y1, y2, center=(c1, c2))
    before = max(abs(y1 - c1), abs(y2 - c2))
    after = max(abs(a - c1), abs(b - c2))
    assert after == pytest.approx(before, rel=0, abs=1e-12)


# ---------------------------------------------------------------------------
# the four-stage mixing schedule


def test_evolve_chessboard_stage_patterns():
    states = evolve_chessboard(3)
    assert [s.stage for s in states] == [
        "datum", "after_quarter", "after_half_turns", "after_final_quarter",
    ]
    np.testing.assert_array_equal(states[0].grid, DATUM)
    np.testing.assert_array_equal(states[1].grid, AFTER_QUARTER)
    np.testing.assert_array_equal(states[2].grid, AFTER_HALF)
    np.testing.assert_array_equal(states[3].grid, FINAL)
    assert not states[0].is_coarse_chessboard()
    assert states[3].is_coarse_chessboard()


def test_final_state_is_doubled_flipped_datum():
    # the end state is the cell-doubled chessboard with the origin block
    # sign flipped: the coarsening step the junctions rely on
    states = evolve_chessboard(4, sigma=-1.0)
    final = states[-1].grid
    assert final[0, 0] == 1  # sigma = -1 datum starts at -1, flips to +1
    assert states[-1].is_coarse_chessboard()
    assert final[0, 0] == final[0, 1] == final[1, 0] == final[1, 1]


def test_state_evaluate_is_periodic():
    s = evolve_chessboard(3)[-1]
    pts = staggered(0.0, 8, s.tile)
    A, B = np.meshgrid(pts, pts, indexing="ij")
    v = s.evaluate(A, B)
    np.testing.assert_array_equal(v, s.evaluate(A + 3 * s.tile, B - 2 * s.tile))
    assert set(np.unique(v)) == {-1.0, 1.0}


# ---------------------------------------------------------------------------
# flow maps


def test_flow_map_composes_and_inverts():
    f = mixing_block(3)
    rng = np.random.default_rng(5)
    y1 = rng.uniform(0, 0.125, 200)
    y2 = rng.uniform(0, 0.125, 200)
    c0, cm, c2 = 0.0, 2.0**-7, 2.0**-5
    a1, a2, _ = flow_map(f, y1, y2, c0, c2)
    m1, m2, _ = flow_map(f, y1, y2, c0, cm)
    b1, b2, _ = flow_map(f, m1, m2, cm, c2)
    np.testing.assert_allclose(a1, b1, rtol=0, atol=1e-15)
    np.testing.assert_allclose(a2, b2, rtol=0, atol=1e-15)
    r1, r2, _ = flow_map(f, a1, a2, c2, c0)
    np.testing.assert_allclose(r1, y1, rtol=0, atol=1e-15)
    np.testing.assert_allclose(r2, y2, rtol=0, atol=1e-15)


def test_flow_map_records_events():
    f = mixing_block(3)
    _, _, events = flow_map(f, [0.01, 0.05], [0.02, 0.11], 0.0, 0.125, record_events=True)
    kinds = {e.kind for e in events}
    assert "stage" in kinds and "corner" in kinds


def test_flow_map_guards():
    f = mixing_block(3)
    with pytest.raises(Exception):
        flow_map(f, [0.0], [0.0], 0.0, 1.0)  # beyond the schedule span
    from bvtransport import smooth_field

    with pytest.raises(ConfigurationError):
        flow_map(smooth_field("shear"), [0.0], [0.0], 0.0, 0.1)


def test_rotor_flow_against_quarter_turn():
    # advancing the rotor by tau = span * lam = 1 is one quarter turn for
    # every marker inside the square
    f = rotation_block(3)
    lam = f.meta["lam"]
    w = f.meta["halfwidth"]
    rng = np.random.default_rng(17)
    y1 = rng.uniform(-w, w, 300) * 0.98
    y2 = rng.uniform(-w, w, 300) * 0.98
    a1, a2, _ = flow_map(f, y1, y2, 0.0, 1.0 / lam)
    e1, e2 = quarter_turn(y1, y2, sense="cw")
    np.testing.assert_allclose(a1, e1, rtol=0, atol=1e-13)
    np.testing.assert_allclose(a2, e2, rtol=0, atol=1e-13)


# ---------------------------------------------------------------------------
# marker pushforward against the state permutations


@pytest.mark.parametrize("k", [3, 4])
def test_pushforward_matches_block_permutation(k):
    f = mixing_block(k)
    q = f.meta["cell"]
    states = evolve_chessboard(k)
    off = (np.arange(3) + 0.5) / 3.0 * q
    base = np.arange(4) * q
    a = (base[:, None] + off[None, :]).ravel()
    A, B = np.meshgrid(a, a, indexing="ij")
    y1, y2 = A.ravel(), B.ravel()
    for j, c_end in enumerate((q, 3.0 * q, 4.0 * q), start=1):
        got = pushforward_density(f, states[0].evaluate, 0.0, c_end, y1, y2)
        want = states[j].evaluate(y1, y2)
        np.testing.assert_array_equal(got, want)


# ---------------------------------------------------------------------------
# the jitted ODE oracle agrees with the closed form


def test_event_midpoint_oracle_matches_quarter_turn():
    w = 2.0**-5
    lam = 2.0**5
    span = 1.0 / lam
    rng = np.random.default_rng(2209)
    x0 = rng.uniform(-w, w, 1000) * 0.95
    y0 = rng.uniform(-w, w, 1000) * 0.95
    nsteps = math.ceil(span / 1e-6)
    got = oracle_event_midpoint(x0, y0, lam, span, nsteps)
    e1, e2 = quarter_turn(x0, y0, sense="cw")
    err = max(np.max(np.abs(got[:, 0] - e1)), np.max(np.abs(got[:, 1] - e2)))
    assert err <= 1e-8
    assert err == pytest.approx(2.6315755130568164e-14, rel=1e-6)

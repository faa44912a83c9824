"""Vectorized kernels (numpy lane).

Mirrors the scalar branch tables of the numba lane with array masks. The two
lanes are tested for exact (bitwise) agreement on random point clouds; any
arithmetic here must therefore follow the scalar lane operation by
operation on the branch that applies to a point.
"""

import numpy as np


def _as1d(x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64).ravel())


def k_of_vec(r):
    """Dyadic level of each radius, clamped at 3 (see the scalar lane)."""
    _, e = np.frexp(r)
    k = (3 - e).astype(np.int32)
    return np.maximum(k, np.int32(3))


def sigma_of_vec(k):
    return np.where((k - 3) % 2 == 0, 1.0, -1.0)


def rotor_vec(lam, vx, vy):
    vert = np.abs(vx) >= np.abs(vy)
    a1 = np.where(vert, 0.0, 2.0 * lam * vy)
    a2 = np.where(vert, -2.0 * lam * vx, 0.0)
    return a1, a2


def alpha_vel_vec(s, rhat, u, v):
    """Mixing velocity inside one dashed square, local coords; s may be an array."""
    q = 0.25 * s
    lam = 4.0 / s
    central = (rhat <= q) | (rhat >= 3.0 * q)
    vxc = u - 2.0 * q
    vyc = v - 2.0 * q
    inside = (np.abs(vxc) < q) & (np.abs(vyc) < q)
    cx = np.where(u < 2.0 * q, q, 3.0 * q)
    cy = np.where(v < 2.0 * q, q, 3.0 * q)
    vx = np.where(central, vxc, u - cx)
    vy = np.where(central, vyc, v - cy)
    a1, a2 = rotor_vec(lam, vx, vy)
    dead = central & ~inside
    a1 = np.where(dead, 0.0, a1)
    a2 = np.where(dead, 0.0, a2)
    return a1, a2


def pattern_b_vec(s, rhat, u, v, neg):
    """Velocity of the level cycle, one lateral period (see the scalar lane)."""
    i = (u / s).astype(np.int64)
    j = (v / s).astype(np.int64)
    iev = (i % 2) == 0
    jev = (j % 2) == 0
    st1 = rhat <= s
    st2 = ~st1 & (rhat <= 2.0 * s)
    st3 = ~st1 & ~st2 & (rhat <= 3.0 * s)
    st4 = ~st1 & ~st2 & ~st3

    dash1 = st1 & iev & jev
    dark1 = st1 & ~iev & ~jev

    s2_stat_dash = st2 & jev & (u < s)
    s2_band_dash = st2 & jev & (3.0 * s - rhat < u) & (u < 4.0 * s - rhat)
    s2_stat_dark = st2 & ~jev & (u >= 3.0 * s)
    s2_band_dark = st2 & ~jev & (rhat < u) & (u < rhat + s)

    left = u < 2.0 * s
    s3_stat_dash = st3 & left & (v < s)
    s3_band_dash = st3 & left & (4.0 * s - rhat < v) & (v < 5.0 * s - rhat)
    s3_stat_dark = st3 & ~left & (v >= 3.0 * s)
    s3_band_dark = st3 & ~left & (rhat - s < v) & (v < rhat)

    s4_dash = st4 & (u < 2.0 * s) & (v < 2.0 * s)
    s4_dark = st4 & (u >= 2.0 * s) & (v >= 2.0 * s)

    dash = dash1 | s2_stat_dash | s2_band_dash | s3_stat_dash | s3_band_dash | s4_dash
    dark = dark1 | s2_stat_dark | s2_band_dark | s3_stat_dark | s3_band_dark | s4_dark
    negf = neg if np.isscalar(neg) else neg
    br = np.where(dash, 1.0, np.where(dark, negf, 0.0))
    b1 = np.where(s2_band_dash, -1.0, np.where(s2_band_dark, negf, 0.0))
    b2 = np.where(s3_band_dash, -1.0, np.where(s3_band_dark, negf, 0.0))
    return br, b1, b2


def square_advance_cw_vec(v1, v2, tau):
    """Vector clockwise perimeter walk; identical arithmetic to the scalar lane."""
    v1 = np.array(v1, dtype=np.float64, copy=True)
    v2 = np.array(v2, dtype=np.float64, copy=True)
    c = np.maximum(np.abs(v1), np.abs(v2))
    rem = np.where(c > 0.0, np.broadcast_to(np.asarray(tau, dtype=np.float64), v1.shape), 0.0)
    rem = np.array(rem, dtype=np.float64, copy=True)
    cc = np.where(c > 0.0, c, 1.0)
    for _ in range(8):
        act = rem > 0.0
        if not act.any():
            break
        on_r = (v1 == c) & (v2 > -c)
        on_b = ~on_r & (v2 == -c) & (v1 > -c)
        on_l = ~on_r & ~on_b & (v1 == -c) & (v2 < c)
        on_t = ~(on_r | on_b | on_l)
        d = np.where(
            on_r, v2 + c, np.where(on_b, v1 + c, np.where(on_l, c - v2, c - v1))
        ) / (2.0 * cc)
        partial = act & (rem < d)
        full = act & ~partial
        move = rem * 2.0 * cc
        v2 = np.where(partial & on_r, v2 - move, v2)
        v1 = np.where(partial & on_b, v1 - move, v1)
        v2 = np.where(partial & on_l, v2 + move, v2)
        v1 = np.where(partial & on_t, v1 + move, v1)
        v1 = np.where(full & on_r, c, v1)
        v2 = np.where(full & on_r, -c, v2)
        v1 = np.where(full & on_b, -c, v1)
        v2 = np.where(full & on_b, -c, v2)
        v1 = np.where(full & on_l, -c, v1)
        v2 = np.where(full & on_l, c, v2)
        v1 = np.where(full & on_t, c, v1)
        v2 = np.where(full & on_t, c, v2)
        rem = np.where(partial, 0.0, np.where(full, rem - d, rem))
    return v1, v2


def square_advance_ccw_vec(v1, v2, tau):
    a, b = square_advance_cw_vec(v2, v1, tau)
    return b, a


def datum_parity_vec(q, u, v):
    i = (u / q).astype(np.int64)
    j = (v / q).astype(np.int64)
    return np.where((i + j) % 2 == 0, 1.0, -1.0)


def z_state_vec(s, rhat, u, v):
    """Vector backward trace through the three mixing stages."""
    q = 0.25 * s
    t1 = np.minimum(rhat, q) / q
    t2 = np.clip(rhat - q, 0.0, 2.0 * q) / q
    t3 = np.clip(rhat - 3.0 * q, 0.0, q) / q
    x = np.array(u, dtype=np.float64, copy=True)
    y = np.array(v, dtype=np.float64, copy=True)

    vx = x - 2.0 * q
    vy = y - 2.0 * q
    inside = (np.abs(vx) < q) & (np.abs(vy) < q)
    a, b = square_advance_ccw_vec(vx, vy, np.where(inside, t3, 0.0))
    x = np.where(inside, a + 2.0 * q, x)
    y = np.where(inside, b + 2.0 * q, y)

    cx = np.where(x < 2.0 * q, q, 3.0 * q)
    cy = np.where(y < 2.0 * q, q, 3.0 * q)
    a, b = square_advance_ccw_vec(x - cx, y - cy, t2)
    x = a + cx
    y = b + cy

    vx = x - 2.0 * q
    vy = y - 2.0 * q
    inside = (np.abs(vx) < q) & (np.abs(vy) < q)
    a, b = square_advance_ccw_vec(vx, vy, np.where(inside, t1, 0.0))
    x = np.where(inside, a + 2.0 * q, x)
    y = np.where(inside, b + 2.0 * q, y)

    x = np.maximum(x, 0.0)
    y = np.maximum(y, 0.0)
    i = np.minimum((x / q).astype(np.int64), 3)
    j = np.minimum((y / q).astype(np.int64), 3)
    return np.where((i + j) % 2 == 0, 1.0, -1.0)


def z_end_vec(s, lu, lv):
    hq = 0.5 * s
    i = (lu / hq).astype(np.int64)
    j = (lv / hq).astype(np.int64)
    par = np.where((i + j) % 2 == 0, 1.0, -1.0)
    return -par


def pattern_u_mixing_vec(s, rhat, u, v):
    """Transported mixing datum, one lateral period, sign-free."""
    i = (u / s).astype(np.int64)
    j = (v / s).astype(np.int64)
    st1 = rhat <= s
    st2 = ~st1 & (rhat <= 2.0 * s)
    st3 = ~st1 & ~st2 & (rhat <= 3.0 * s)
    st4 = ~st1 & ~st2 & ~st3
    out = np.zeros_like(np.asarray(u, dtype=np.float64))

    on_dash = (i % 2 == 0) & (j % 2 == 0)
    m = st1 & on_dash
    if m.any():
        out = np.where(m, z_state_vec(s, rhat, u - i * s, v - j * s), out)

    jev = (j % 2) == 0
    lo2 = 3.0 * s - rhat
    m_stat = st2 & jev & (u < s)
    m_band = st2 & jev & (lo2 < u) & (u < lo2 + s)
    if m_stat.any():
        out = np.where(m_stat, z_end_vec(s, u, v - j * s), out)
    if m_band.any():
        out = np.where(m_band, z_end_vec(s, u - lo2, v - j * s), out)

    left = u < 2.0 * s
    lo3 = 4.0 * s - rhat
    m_stat = st3 & left & (v < s)
    m_band = st3 & left & (lo3 < v) & (v < lo3 + s)
    if m_stat.any():
        out = np.where(m_stat, z_end_vec(s, u % s, v), out)
    if m_band.any():
        out = np.where(m_band, z_end_vec(s, u % s, v - lo3), out)

    m4 = st4 & (u < 2.0 * s) & (v < 2.0 * s)
    if m4.any():
        out = np.where(m4, z_end_vec(s, u % s, v % s), out)
    return out


# ---------------------------------------------------------------------------
# assembled fields


def _frozen_pattern_br(s, y1, y2, neg):
    p = 4.0 * s
    u = y1 % p
    v = y2 % p
    i = (u / s).astype(np.int64)
    j = (v / s).astype(np.int64)
    return np.where(
        (i % 2 == 0) & (j % 2 == 0), 1.0, np.where((i % 2 == 1) & (j % 2 == 1), neg, 0.0)
    )


def eval_assembled_b(t, r, y1, y2, fam, kmax):
    t = _as1d(t)
    r = _as1d(r)
    y1 = _as1d(y1)
    y2 = _as1d(y2)
    if t.shape != r.shape:
        t = np.broadcast_to(t, r.shape)
    n = r.shape[0]
    out = np.zeros((n, 3), dtype=np.float64)
    neg = -5.0 if fam in (0, 2) else -1.0
    rfreeze = 2.0 ** (2 - kmax)

    if fam == 4:
        out[:, 0] = 1.0
        behind = (r <= t) & (r > rfreeze)
        if behind.any():
            k = k_of_vec(r[behind])
            sp = np.ldexp(1.0, 2 - k)
            a1, a2 = alpha_vel_vec(sp, r[behind] - sp, y1[behind] % sp, y2[behind] % sp)
            out[behind, 1] = a1
            out[behind, 2] = a2
        return out

    rr = np.where(r <= t, r, t)
    frozen = rr <= rfreeze
    if frozen.any():
        s0 = 2.0 ** (-kmax)
        out[frozen, 0] = _frozen_pattern_br(s0, y1[frozen], y2[frozen], neg)
    live = ~frozen
    if live.any():
        k = k_of_vec(rr[live])
        s = np.ldexp(1.0, -k)
        p = 4.0 * s
        rhat = rr[live] - p
        u = y1[live] % p
        v = y2[live] % p
        br, b1, b2 = pattern_b_vec(s, rhat, u, v, neg)
        ahead = r[live] > t[live]
        b1 = np.where(ahead, 0.0, b1)
        b2 = np.where(ahead, 0.0, b2)
        if fam in (2, 3):
            i = (u / s).astype(np.int64)
            j = (v / s).astype(np.int64)
            mix = (~ahead) & (rhat <= s) & (i % 2 == 0) & (j % 2 == 0)
            if mix.any():
                sm = s[mix]
                a1, a2 = alpha_vel_vec(sm, rhat[mix], u[mix] - i[mix] * sm, v[mix] - j[mix] * sm)
                b1 = np.asarray(b1)
                b2 = np.asarray(b2)
                b1[mix] = a1
                b2[mix] = a2
        out[live, 0] = br
        out[live, 1] = b1
        out[live, 2] = b2
    return out


def eval_assembled_br(t, r, y1, y2, fam, kmax):
    return eval_assembled_b(t, r, y1, y2, fam, kmax)[:, 0]


def eval_assembled_u(t, r, y1, y2, fam, kmax):
    t = _as1d(t)
    r = _as1d(r)
    y1 = _as1d(y1)
    y2 = _as1d(y2)
    if t.shape != r.shape:
        t = np.broadcast_to(t, r.shape)
    n = r.shape[0]
    out = np.zeros(n, dtype=np.float64)
    rfreeze = 2.0 ** (2 - kmax)
    behind = r <= t
    frozen = behind & (r <= rfreeze)
    live = behind & ~frozen

    if fam <= 1:
        if frozen.any():
            s0 = 2.0 ** (-kmax)
            out[frozen] = np.where(
                _frozen_pattern_br(s0, y1[frozen], y2[frozen], -5.0) == 1.0, 1.0, 0.0
            )
        if live.any():
            k = k_of_vec(r[live])
            s = np.ldexp(1.0, -k)
            p = 4.0 * s
            br, _, _ = pattern_b_vec(s, r[live] - p, y1[live] % p, y2[live] % p, -5.0)
            out[live] = np.where(br == 1.0, 1.0, 0.0)
        return out

    if fam <= 3:
        if frozen.any():
            s0 = 2.0 ** (-kmax)
            p = 4.0 * s0
            u = y1[frozen] % p
            v = y2[frozen] % p
            i = (u / s0).astype(np.int64)
            j = (v / s0).astype(np.int64)
            on_dash = (i % 2 == 0) & (j % 2 == 0)
            sig = 1.0 if ((kmax - 3) % 2) == 0 else -1.0
            par = datum_parity_vec(0.25 * s0, u - i * s0, v - j * s0)
            out[frozen] = np.where(on_dash, sig * par, 0.0)
        if live.any():
            k = k_of_vec(r[live])
            s = np.ldexp(1.0, -k)
            p = 4.0 * s
            out[live] = sigma_of_vec(k) * pattern_u_mixing_vec(
                s, r[live] - p, y1[live] % p, y2[live] % p
            )
        return out

    if frozen.any():
        q = 2.0 ** (-kmax)
        sig = 1.0 if ((kmax - 3) % 2) == 0 else -1.0
        out[frozen] = sig * datum_parity_vec(q, y1[frozen] % (4.0 * q), y2[frozen] % (4.0 * q))
    if live.any():
        k = k_of_vec(r[live])
        sp = np.ldexp(1.0, 2 - k)
        out[live] = sigma_of_vec(k) * z_state_vec(
            sp, r[live] - sp, y1[live] % sp, y2[live] % sp
        )
    return out


def eval_pattern_b(s, rhat, y1, y2, neg, mixing):
    rhat = _as1d(rhat)
    y1 = _as1d(y1)
    y2 = _as1d(y2)
    p = 4.0 * s
    u = y1 % p
    v = y2 % p
    br, b1, b2 = pattern_b_vec(s, rhat, u, v, neg)
    out = np.stack([br, b1, b2], axis=1)
    if mixing:
        i = (u / s).astype(np.int64)
        j = (v / s).astype(np.int64)
        mix = (rhat <= s) & (i % 2 == 0) & (j % 2 == 0)
        if mix.any():
            a1, a2 = alpha_vel_vec(s, rhat[mix], u[mix] - i[mix] * s, v[mix] - j[mix] * s)
            out[mix, 1] = a1
            out[mix, 2] = a2
    return out


def eval_alpha(s, rhat, y1, y2):
    rhat = _as1d(rhat)
    y1 = _as1d(y1)
    y2 = _as1d(y2)
    a1, a2 = alpha_vel_vec(s, rhat, y1 % s, y2 % s)
    return np.stack([a1, a2], axis=1)


def eval_rotor(lam, halfwidth, x1, x2):
    x1 = _as1d(x1)
    x2 = _as1d(x2)
    a1, a2 = rotor_vec(lam, x1, x2)
    inside = (np.abs(x1) < halfwidth) & (np.abs(x2) < halfwidth)
    a1 = np.where(inside, a1, 0.0)
    a2 = np.where(inside, a2, 0.0)
    return np.stack([a1, a2], axis=1)


def eval_square_advance(v1, v2, tau, ccw):
    v1 = _as1d(v1)
    v2 = _as1d(v2)
    if ccw:
        a, b = square_advance_ccw_vec(v1, v2, tau)
    else:
        a, b = square_advance_cw_vec(v1, v2, tau)
    return np.stack([a, b], axis=1)


def eval_z_state(s, rhat, u, v):
    rhat = _as1d(rhat)
    u = _as1d(u)
    v = _as1d(v)
    return z_state_vec(s, rhat, u % s, v % s)


# ---------------------------------------------------------------------------
# finite volume update


def upwind_update(u, fr, f1, f2, dtoh, g0, g1, src, dt):
    """One donor-cell step; same stencil as the scalar lane, via rolls."""
    up_lo = np.concatenate([g0[None, :, :], u[:-1]], axis=0)
    lo_val = np.where(fr[:-1] > 0.0, up_lo, u)
    up_hi = np.concatenate([u[1:], g1[None, :, :]], axis=0)
    hi_val = np.where(fr[1:] > 0.0, u, up_hi)
    acc = fr[:-1] * lo_val - fr[1:] * hi_val

    um = np.roll(u, 1, axis=1)
    f1p = np.roll(f1, -1, axis=1)
    upn = np.roll(u, -1, axis=1)
    acc += f1 * np.where(f1 > 0.0, um, u)
    acc -= f1p * np.where(f1p > 0.0, u, upn)

    um = np.roll(u, 1, axis=2)
    f2p = np.roll(f2, -1, axis=2)
    upn = np.roll(u, -1, axis=2)
    acc += f2 * np.where(f2 > 0.0, um, u)
    acc -= f2p * np.where(f2p > 0.0, u, upn)
    return u + dtoh * acc + dt * src


# ---------------------------------------------------------------------------
# rotor flow oracle


def oracle_plain_midpoint(x0, y0, lam, span, nsteps):
    x = _as1d(x0).copy()
    y = _as1d(y0).copy()
    dt = span / nsteps
    for _ in range(nsteps):
        vx, vy = rotor_vec(lam, x, y)
        wx, wy = rotor_vec(lam, x + 0.5 * dt * vx, y + 0.5 * dt * vy)
        x = x + dt * wx
        y = y + dt * wy
    return np.stack([x, y], axis=1)


def oracle_event_midpoint(x0, y0, lam, span, nsteps):
    """Event-located integrator: exact corner handling, vectorized."""
    x = _as1d(x0).copy()
    y = _as1d(y0).copy()
    dt = span / nsteps
    for _ in range(nsteps):
        rem = np.full_like(x, dt)
        origin = (x == 0.0) & (y == 0.0)
        rem[origin] = 0.0
        for _ in range(8):
            act = rem > 0.0
            if not act.any():
                break
            corner = np.abs(x) == np.abs(y)
            diag_neg = corner & (y == -x)
            vert_plain = ~corner & (np.abs(x) > np.abs(y))
            vx = np.where(diag_neg, 2.0 * lam * y, np.where(corner | vert_plain, 0.0, 2.0 * lam * y))
            vy = np.where(diag_neg, 0.0, np.where(corner | vert_plain, -2.0 * lam * x, 0.0))
            horiz = vy == 0.0
            denom_h = np.where(vx != 0.0, vx, 1.0)
            denom_v = np.where(vy != 0.0, vy, 1.0)
            tcross = np.where(horiz, (y - x) / denom_h, (-x - y) / denom_v)
            free = act & ((tcross > rem) | (tcross <= 0.0))
            hit = act & ~free
            x = np.where(free, x + rem * vx, x)
            y = np.where(free, y + rem * vy, y)
            x = np.where(hit & horiz, y, x)
            y = np.where(hit & ~horiz, -x, y)
            rem = np.where(free, 0.0, np.where(hit, rem - tcross, rem))
    return np.stack([x, y], axis=1)

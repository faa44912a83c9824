"""Jitted scalar kernels and batch loops (numba lane).

Every construction in the catalog reduces to a handful of scalar branch
tables; this module holds the single authoritative scalar implementation,
compiled with numba. The numpy lane reimplements the same tables with array
masks and is tested for exact agreement.

Conventions used throughout:

* ``s = 2**-k`` is the jet scale of level ``k``; one radial cycle of the
  level-k pattern occupies a window of length ``4*s`` and one lateral period
  is ``4*s`` in each of ``y1, y2``.
* ``rhat`` is the position inside the current radial window, in ``[0, 4*s]``.
* Lateral coordinates passed to the ``_pattern_*`` helpers are already
  reduced to one period ``[0, 4*s)``.
* Family codes are defined in ``_common``; ``neg`` is the amplitude of the
  inward jets (-5 plain, -1 tangent).
"""

import math

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


# ---------------------------------------------------------------------------
# level bookkeeping


@njit(**_JIT)
def k_of(r):
    """Dyadic level index of radius r: 2**(2-k) < r <= 2**(3-k), clamped at 3."""
    m, e = math.frexp(r)
    k = 3 - e
    if m == 0.5:
        # exact power of two belongs to the window it closes from below
        k = k  # frexp(2**(3-k)) = (0.5, 4-k) already maps to k-1
    if k < 3:
        k = 3
    return k


@njit(**_JIT)
def sigma_of(k):
    """Alternating datum sign (-1)**(k-3)."""
    return 1.0 if ((k - 3) % 2) == 0 else -1.0


# ---------------------------------------------------------------------------
# radial jet pattern (chessboard cycle), one lateral period


@njit(**_JIT)
def pattern_b(s, rhat, u, v, neg):
    """Velocity of the level-k cycle at window position rhat, lateral (u, v).

    Returns (br, b1, b2). Stage layout over rhat:
      [0, s]   alternating chessboard of radial jets
      [s, 2s]  dashed columns slide left, dark columns slide right
      [2s, 3s] dashed rows slide down, dark rows slide up
      [3s, 4s] merged coarse chessboard
    Sliding bands carry the lateral component that keeps them material.
    """
    if rhat <= s:
        i = int(u / s)
        j = int(v / s)
        iev = (i % 2) == 0
        jev = (j % 2) == 0
        if iev and jev:
            return 1.0, 0.0, 0.0
        if (not iev) and (not jev):
            return neg, 0.0, 0.0
        return 0.0, 0.0, 0.0
    if rhat <= 2.0 * s:
        j = int(v / s)
        if (j % 2) == 0:
            if u < s:
                return 1.0, 0.0, 0.0
            if 3.0 * s - rhat < u and u < 4.0 * s - rhat:
                return 1.0, -1.0, 0.0
            return 0.0, 0.0, 0.0
        if u >= 3.0 * s:
            return neg, 0.0, 0.0
        if rhat < u and u < rhat + s:
            return neg, neg, 0.0
        return 0.0, 0.0, 0.0
    if rhat <= 3.0 * s:
        if u < 2.0 * s:
            if v < s:
                return 1.0, 0.0, 0.0
            if 4.0 * s - rhat < v and v < 5.0 * s - rhat:
                return 1.0, 0.0, -1.0
            return 0.0, 0.0, 0.0
        if v >= 3.0 * s:
            return neg, 0.0, 0.0
        if rhat - s < v and v < rhat:
            return neg, 0.0, neg
        return 0.0, 0.0, 0.0
    if u < 2.0 * s and v < 2.0 * s:
        return 1.0, 0.0, 0.0
    if u >= 2.0 * s and v >= 2.0 * s:
        return neg, 0.0, 0.0
    return 0.0, 0.0, 0.0


# ---------------------------------------------------------------------------
# rotor (mixing) machinery


@njit(**_JIT)
def rotor(lam, vx, vy):
    """Clockwise square rotor scaled by lam, in block-centered coordinates."""
    if abs(vx) >= abs(vy):
        return 0.0, -2.0 * lam * vx
    return 2.0 * lam * vy, 0.0


@njit(**_JIT)
def alpha_vel(s, rhat, u, v):
    """Mixing velocity inside one dashed square of side s, local coords (u, v).

    Schedule over rhat in [0, s] with q = s/4: central quarter turn on
    [0, q], four half turns on [q, 3q], central quarter turn on [3q, 4q].
    The rotor gain lam = 4/s makes one side take q units of rhat.
    """
    q = 0.25 * s
    lam = 4.0 / s
    if rhat <= q or rhat >= 3.0 * q:
        vx = u - 2.0 * q
        vy = v - 2.0 * q
        if abs(vx) < q and abs(vy) < q:
            return rotor(lam, vx, vy)
        return 0.0, 0.0
    cx = q if u < 2.0 * q else 3.0 * q
    cy = q if v < 2.0 * q else 3.0 * q
    return rotor(lam, u - cx, v - cy)


@njit(**_JIT)
def square_advance_cw(vx, vy, tau):
    """Advance (vx, vy) clockwise along its max-norm level square by tau sides."""
    c = abs(vx) if abs(vx) >= abs(vy) else abs(vy)
    if c == 0.0 or tau <= 0.0:
        return vx, vy
    remaining = tau
    while remaining > 0.0:
        if vx == c and vy > -c:  # right side, heading down
            d = (vy + c) / (2.0 * c)
            if remaining < d:
                return vx, vy - remaining * 2.0 * c
            vx = c
            vy = -c
        elif vy == -c and vx > -c:  # bottom side, heading left
            d = (vx + c) / (2.0 * c)
            if remaining < d:
                return vx - remaining * 2.0 * c, vy
            vx = -c
            vy = -c
        elif vx == -c and vy < c:  # left side, heading up
            d = (c - vy) / (2.0 * c)
            if remaining < d:
                return vx, vy + remaining * 2.0 * c
            vx = -c
            vy = c
        else:  # top side, heading right
            d = (c - vx) / (2.0 * c)
            if remaining < d:
                return vx + remaining * 2.0 * c, vy
            vx = c
            vy = c
        remaining -= d
    return vx, vy


@njit(**_JIT)
def square_advance_ccw(vx, vy, tau):
    """Counterclockwise advance; the swap reflection conjugates the two senses."""
    a, b = square_advance_cw(vy, vx, tau)
    return b, a


@njit(**_JIT)
def datum_parity(q, u, v):
    """Sign of the scale-q chessboard with +1 on the cell at the origin."""
    i = int(u / q)
    j = int(v / q)
    return 1.0 if ((i + j) % 2) == 0 else -1.0


@njit(**_JIT)
def z_state(s, rhat, u, v):
    """Mixed datum inside one dashed square at window position rhat in [0, s].

    Traces (u, v) backward through the three rotor stages and reads the
    initial scale-q chessboard (+1 at the local origin cell).
    """
    q = 0.25 * s
    t1 = min(rhat, q) / q
    t2 = min(max(rhat - q, 0.0), 2.0 * q) / q
    t3 = min(max(rhat - 3.0 * q, 0.0), q) / q
    x = u
    y = v
    if t3 > 0.0:
        vx = x - 2.0 * q
        vy = y - 2.0 * q
        if abs(vx) < q and abs(vy) < q:
            vx, vy = square_advance_ccw(vx, vy, t3)
            x = vx + 2.0 * q
            y = vy + 2.0 * q
    if t2 > 0.0:
        cx = q if x < 2.0 * q else 3.0 * q
        cy = q if y < 2.0 * q else 3.0 * q
        vx, vy = square_advance_ccw(x - cx, y - cy, t2)
        x = vx + cx
        y = vy + cy
    if t1 > 0.0:
        vx = x - 2.0 * q
        vy = y - 2.0 * q
        if abs(vx) < q and abs(vy) < q:
            vx, vy = square_advance_ccw(vx, vy, t1)
            x = vx + 2.0 * q
            y = vy + 2.0 * q
    if x < 0.0:
        x = 0.0
    if y < 0.0:
        y = 0.0
    i = int(x / q)
    j = int(y / q)
    if i > 3:
        i = 3
    if j > 3:
        j = 3
    return 1.0 if ((i + j) % 2) == 0 else -1.0


@njit(**_JIT)
def z_end(s, lu, lv):
    """Post-mixing content of a dashed square: coarse chessboard, sign flipped."""
    hq = 0.5 * s
    i = int(lu / hq)
    j = int(lv / hq)
    par = 1.0 if ((i + j) % 2) == 0 else -1.0
    return -par


@njit(**_JIT)
def pattern_u_mixing(s, rhat, u, v):
    """Transported datum of the mixing cycle, one lateral period, sign-free.

    During the first stage the four dashed squares mix in place; afterwards
    their (identical) contents ride the sliding bands of the plain cycle.
    """
    if rhat <= s:
        i = int(u / s)
        j = int(v / s)
        if (i % 2) == 0 and (j % 2) == 0:
            return z_state(s, rhat, u - i * s, v - j * s)
        return 0.0
    if rhat <= 2.0 * s:
        j = int(v / s)
        if (j % 2) == 0:
            if u < s:
                return z_end(s, u, v - j * s)
            lo = 3.0 * s - rhat
            if lo < u and u < lo + s:
                return z_end(s, u - lo, v - j * s)
        return 0.0
    if rhat <= 3.0 * s:
        if u < 2.0 * s:
            if v < s:
                return z_end(s, u % s, v)
            lo = 4.0 * s - rhat
            if lo < v and v < lo + s:
                return z_end(s, u % s, v - lo)
        return 0.0
    if u < 2.0 * s and v < 2.0 * s:
        return z_end(s, u % s, v % s)
    return 0.0


# ---------------------------------------------------------------------------
# assembled space-time fields


@njit(**_JIT)
def assembled_b(t, r, y1, y2, fam, kmax):
    """Velocity (br, b1, b2) of an assembled variant at (t, r, y1, y2).

    Ahead of the front (r > t) only the radial jet profile survives, frozen
    to the pattern the front carries at time t. Behind the front the full
    level-k(r) pattern acts. Below the truncation radius 2**(2-kmax) the
    deepest chessboard continues without lateral motion.
    """
    neg = -5.0 if fam == 0 or fam == 2 else -1.0
    rfreeze = 2.0 ** (2 - kmax)
    if fam == 4:
        if r > t:
            return 1.0, 0.0, 0.0
        if r <= rfreeze:
            return 1.0, 0.0, 0.0
        k = k_of(r)
        sp = 2.0 ** (2 - k)
        a1, a2 = alpha_vel(sp, r - sp, y1 % sp, y2 % sp)
        return 1.0, a1, a2
    rr = r if r <= t else t
    if rr <= rfreeze:
        s = 2.0 ** (-kmax)
        p = 4.0 * s
        u = y1 % p
        v = y2 % p
        i = int(u / s)
        j = int(v / s)
        if (i % 2) == 0 and (j % 2) == 0:
            return 1.0, 0.0, 0.0
        if (i % 2) == 1 and (j % 2) == 1:
            return neg, 0.0, 0.0
        return 0.0, 0.0, 0.0
    k = k_of(rr)
    s = 2.0 ** (-k)
    p = 4.0 * s
    rhat = rr - p
    u = y1 % p
    v = y2 % p
    if r > t:
        br, _, _ = pattern_b(s, rhat, u, v, neg)
        return br, 0.0, 0.0
    if fam == 2 or fam == 3:
        if rhat <= s:
            i = int(u / s)
            j = int(v / s)
            if (i % 2) == 0 and (j % 2) == 0:
                a1, a2 = alpha_vel(s, rhat, u - i * s, v - j * s)
                return 1.0, a1, a2
            if (i % 2) == 1 and (j % 2) == 1:
                return neg, 0.0, 0.0
            return 0.0, 0.0, 0.0
    return pattern_b(s, rhat, u, v, neg)


@njit(**_JIT)
def assembled_u(t, r, y1, y2, fam, kmax):
    """Exact solution value of an assembled variant at (t, r, y1, y2)."""
    if r > t:
        return 0.0
    rfreeze = 2.0 ** (2 - kmax)
    if fam <= 1:
        if r <= rfreeze:
            s = 2.0 ** (-kmax)
            p = 4.0 * s
            u = y1 % p
            v = y2 % p
            i = int(u / s)
            j = int(v / s)
            return 1.0 if (i % 2) == 0 and (j % 2) == 0 else 0.0
        k = k_of(r)
        s = 2.0 ** (-k)
        p = 4.0 * s
        br, _, _ = pattern_b(s, r - p, y1 % p, y2 % p, -5.0)
        return 1.0 if br == 1.0 else 0.0
    if fam <= 3:
        if r <= rfreeze:
            s = 2.0 ** (-kmax)
            p = 4.0 * s
            u = y1 % p
            v = y2 % p
            i = int(u / s)
            j = int(v / s)
            if (i % 2) == 0 and (j % 2) == 0:
                return sigma_of(kmax) * datum_parity(0.25 * s, u - i * s, v - j * s)
            return 0.0
        k = k_of(r)
        s = 2.0 ** (-k)
        p = 4.0 * s
        return sigma_of(k) * pattern_u_mixing(s, r - p, y1 % p, y2 % p)
    if r <= rfreeze:
        q = 2.0 ** (-kmax)
        return sigma_of(kmax) * datum_parity(q, y1 % (4.0 * q), y2 % (4.0 * q))
    k = k_of(r)
    sp = 2.0 ** (2 - k)
    return sigma_of(k) * z_state(sp, r - sp, y1 % sp, y2 % sp)


# ---------------------------------------------------------------------------
# batch wrappers (array in, array out)


@njit(**_JIT)
def eval_assembled_b(t, r, y1, y2, fam, kmax, out):
    n = r.shape[0]
    for i in range(n):
        br, b1, b2 = assembled_b(t[i], r[i], y1[i], y2[i], fam, kmax)
        out[i, 0] = br
        out[i, 1] = b1
        out[i, 2] = b2


@njit(**_JIT)
def eval_assembled_br(t, r, y1, y2, fam, kmax, out):
    n = r.shape[0]
    for i in range(n):
        br, b1, b2 = assembled_b(t[i], r[i], y1[i], y2[i], fam, kmax)
        out[i] = br


@njit(**_JIT)
def eval_assembled_u(t, r, y1, y2, fam, kmax, out):
    n = r.shape[0]
    for i in range(n):
        out[i] = assembled_u(t[i], r[i], y1[i], y2[i], fam, kmax)


@njit(**_JIT)
def eval_pattern_b(s, rhat, y1, y2, neg, mixing, out):
    """Standalone cycle evaluator; rhat may vary per point, lateral wrap applied."""
    p = 4.0 * s
    n = rhat.shape[0]
    for i in range(n):
        rh = rhat[i]
        u = y1[i] % p
        v = y2[i] % p
        if mixing and rh <= s:
            ii = int(u / s)
            jj = int(v / s)
            if (ii % 2) == 0 and (jj % 2) == 0:
                a1, a2 = alpha_vel(s, rh, u - ii * s, v - jj * s)
                out[i, 0] = 1.0
                out[i, 1] = a1
                out[i, 2] = a2
                continue
            if (ii % 2) == 1 and (jj % 2) == 1:
                out[i, 0] = neg
                out[i, 1] = 0.0
                out[i, 2] = 0.0
                continue
            out[i, 0] = 0.0
            out[i, 1] = 0.0
            out[i, 2] = 0.0
            continue
        br, b1, b2 = pattern_b(s, rh, u, v, neg)
        out[i, 0] = br
        out[i, 1] = b1
        out[i, 2] = b2


@njit(**_JIT)
def eval_alpha(s, rhat, y1, y2, out):
    """Planar mixing velocity on the torus of period s (one square), wrap applied."""
    n = rhat.shape[0]
    for i in range(n):
        a1, a2 = alpha_vel(s, rhat[i], y1[i] % s, y2[i] % s)
        out[i, 0] = a1
        out[i, 1] = a2


@njit(**_JIT)
def eval_rotor(lam, halfwidth, x1, x2, out):
    """Single origin-centered rotor block of the given halfwidth."""
    n = x1.shape[0]
    for i in range(n):
        if abs(x1[i]) < halfwidth and abs(x2[i]) < halfwidth:
            a1, a2 = rotor(lam, x1[i], x2[i])
            out[i, 0] = a1
            out[i, 1] = a2
        else:
            out[i, 0] = 0.0
            out[i, 1] = 0.0


@njit(**_JIT)
def eval_square_advance(v1, v2, tau, ccw, out):
    n = v1.shape[0]
    for i in range(n):
        if ccw:
            a, b = square_advance_ccw(v1[i], v2[i], tau[i])
        else:
            a, b = square_advance_cw(v1[i], v2[i], tau[i])
        out[i, 0] = a
        out[i, 1] = b


@njit(**_JIT)
def eval_z_state(s, rhat, u, v, out):
    n = u.shape[0]
    for i in range(n):
        out[i] = z_state(s, rhat[i], u[i] % s, v[i] % s)


# ---------------------------------------------------------------------------
# finite volume update


@njit(**_JIT)
def upwind_update(u, fr, f1, f2, dtoh, g0, g1, src, dt, out):
    """One donor-cell step of u_t + div(b u) = f on a periodic-lateral box.

    fr has nr+1 radial faces; f1, f2 hold the lateral left-face values with
    periodic wrap. g0, g1 are the boundary data used on inflow faces at
    r = 0 and r = r_max.
    """
    nr, n1, n2 = u.shape
    for i in range(nr):
        for j in range(n1):
            jm = j - 1 if j > 0 else n1 - 1
            jp = j + 1 if j + 1 < n1 else 0
            for l in range(n2):
                lm = l - 1 if l > 0 else n2 - 1
                lp = l + 1 if l + 1 < n2 else 0
                acc = 0.0
                fl = fr[i, j, l]
                if fl > 0.0:
                    acc += fl * (g0[j, l] if i == 0 else u[i - 1, j, l])
                else:
                    acc += fl * u[i, j, l]
                fh = fr[i + 1, j, l]
                if fh > 0.0:
                    acc -= fh * u[i, j, l]
                else:
                    acc -= fh * (g1[j, l] if i == nr - 1 else u[i + 1, j, l])
                fl = f1[i, j, l]
                acc += fl * (u[i, jm, l] if fl > 0.0 else u[i, j, l])
                fh = f1[i, jp, l]
                acc -= fh * (u[i, j, l] if fh > 0.0 else u[i, jp, l])
                fl = f2[i, j, l]
                acc += fl * (u[i, j, lm] if fl > 0.0 else u[i, j, l])
                fh = f2[i, j, lp]
                acc -= fh * (u[i, j, l] if fh > 0.0 else u[i, j, lp])
                out[i, j, l] = u[i, j, l] + dtoh * acc + dt * src[i, j, l]


# ---------------------------------------------------------------------------
# rotor flow oracle (for the quarter-turn acceptance test)


@njit(**_JIT)
def oracle_plain_midpoint(x0, y0, lam, span, nsteps, out):
    """Fixed-step explicit midpoint for the clockwise rotor, no event handling."""
    n = x0.shape[0]
    dt = span / nsteps
    for i in range(n):
        x = x0[i]
        y = y0[i]
        for _ in range(nsteps):
            vx, vy = rotor(lam, x, y)
            mx = x + 0.5 * dt * vx
            my = y + 0.5 * dt * vy
            wx, wy = rotor(lam, mx, my)
            x = x + dt * wx
            y = y + dt * wy
        out[i, 0] = x
        out[i, 1] = y


@njit(**_JIT)
def oracle_event_midpoint(x0, y0, lam, span, nsteps, out):
    """Midpoint integrator with exact event location at the square corners.

    The rotor velocity is constant along each side of a max-norm level
    square, so locating the corner crossing inside a step makes every step
    exact to rounding. Corners are resolved by the clockwise cycle
    (right -> bottom -> left -> top).
    """
    n = x0.shape[0]
    dt = span / nsteps
    for i in range(n):
        x = x0[i]
        y = y0[i]
        for _ in range(nsteps):
            remaining = dt
            guard = 0
            while remaining > 0.0 and guard < 8:
                guard += 1
                if x == 0.0 and y == 0.0:
                    break
                if abs(y) == abs(x):
                    # at a corner: pick the outgoing side of the cw cycle
                    if y == -x:
                        vx = 2.0 * lam * y
                        vy = 0.0
                        tcross = (y - x) / vx  # next corner at x == y
                    else:
                        vx = 0.0
                        vy = -2.0 * lam * x
                        tcross = (-x - y) / vy
                else:
                    vx, vy = rotor(lam, x, y)
                    if vx == 0.0:
                        tcross = (-x - y) / vy
                    else:
                        tcross = (y - x) / vx
                if tcross > remaining or tcross <= 0.0:
                    x = x + remaining * vx
                    y = y + remaining * vy
                    remaining = 0.0
                else:
                    # land exactly on the corner
                    if vx == 0.0:
                        y = -x
                    else:
                        x = y
                    remaining -= tcross
        out[i, 0] = x
        out[i, 1] = y

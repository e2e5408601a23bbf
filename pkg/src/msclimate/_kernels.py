"""Compiled inner loops: vector fields, RK4 / Dormand-Prince steppers, section crossings.

Every model is addressed by an integer id and a float64[4] parameter vector so a
single compiled specialization serves all variants.  The section used throughout
is the x-nullcline {f_0(y) = 0}, crossed from f_0 > 0 to f_0 <= 0 (local maxima of
the first coordinate along the oriented trajectory).
"""
import numpy as np
from numba import njit

MS = 0
SYM = 1
ASYM = 2
ROTATED = 3
UNFOLDED = 4
HAMILTONIAN = 5
HAM_QUAD = 6  # Hamiltonian flow with running integrals of v^2 and u^2 v^2

RK4 = 0
RK45 = 1

OK = 0
STEP_LIMIT = 1
NONFINITE = 2
STEP_UNDERFLOW = 3
TIME_LIMIT = 4

DIVERGENCE_BOUND = 1.0e6


@njit(cache=True)
def dim(model):
    if model == MS:
        return 3
    if model == HAM_QUAD:
        return 4
    return 2


@njit(cache=True)
def rhs(model, y, prm, sign):
    out = np.empty(y.shape[0])
    if model == MS:
        p, q, r, s = prm[0], prm[1], prm[2], prm[3]
        x, yy, z = y[0], y[1], y[2]
        out[0] = -x - yy
        out[1] = r * yy - p * z + s * z * z - yy * z * z
        out[2] = -q * x - q * z
    elif model == SYM:
        p, r = prm[0], prm[1]
        x, yy = y[0], y[1]
        out[0] = -x - yy
        out[1] = r * yy + p * x - x * x * yy
    elif model == ASYM:
        p, r, s = prm[0], prm[1], prm[2]
        x, yy = y[0], y[1]
        out[0] = -x - yy
        out[1] = r * yy + p * x + s * x * x - x * x * yy
    elif model == ROTATED:
        p, r, s = prm[0], prm[1], prm[2]
        x, yy = y[0], y[1]
        out[0] = yy
        out[1] = (r - p) * x + (r - 1.0) * yy - (s + yy) * x * x - x * x * x
    elif model == UNFOLDED:
        lam, mu, eta = prm[0], prm[1], prm[2]
        u, v = y[0], y[1]
        out[0] = v
        out[1] = mu * u - u * u * u + eta * (lam - u * u) * v
    elif model == HAMILTONIAN:
        mu = prm[0]
        u, v = y[0], y[1]
        out[0] = v
        out[1] = mu * u - u * u * u
    else:
        mu = prm[0]
        u, v = y[0], y[1]
        out[0] = v
        out[1] = mu * u - u * u * u
        out[2] = v * v
        out[3] = u * u * v * v
    if sign != 1.0:
        for i in range(out.shape[0]):
            out[i] = sign * out[i]
    return out


@njit(cache=True)
def rk4_step(model, y, h, prm, sign):
    k1 = rhs(model, y, prm, sign)
    k2 = rhs(model, y + 0.5 * h * k1, prm, sign)
    k3 = rhs(model, y + 0.5 * h * k2, prm, sign)
    k4 = rhs(model, y + h * k3, prm, sign)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@njit(cache=True)
def dopri_step(model, y, h, prm, sign):
    """One Dormand-Prince step; returns (5th-order solution, error estimate)."""
    k1 = rhs(model, y, prm, sign)
    k2 = rhs(model, y + h * _A21 * k1, prm, sign)
    k3 = rhs(model, y + h * (_A31 * k1 + _A32 * k2), prm, sign)
    k4 = rhs(model, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3), prm, sign)
    k5 = rhs(model, y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4), prm, sign)
    k6 = rhs(model, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5),
             prm, sign)
    y5 = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
    k7 = rhs(model, y5, prm, sign)
    err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
    return y5, err


@njit(cache=True)
def _err_norm(y, ynew, err, atol, rtol):
    acc = 0.0
    n = y.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        acc += (err[i] / sc) ** 2
    return np.sqrt(acc / n)


@njit(cache=True)
def _bad(y):
    for i in range(y.shape[0]):
        v = y[i]
        if not np.isfinite(v) or abs(v) > DIVERGENCE_BOUND:
            return True
    return False


@njit(cache=True)
def _advance(model, y, h, prm, sign, method, atol, rtol):
    """Attempt one step.  Returns (accepted, y_new, h_used, h_next)."""
    if method == RK4:
        return True, rk4_step(model, y, h, prm, sign), h, h
    ynew, err = dopri_step(model, y, h, prm, sign)
    en = _err_norm(y, ynew, err, atol, rtol)
    if not np.isfinite(en):
        return False, y, h, 0.2 * h
    if en <= 1.0:
        fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** (-0.2)))
        return True, ynew, h, h * fac
    fac = max(0.2, 0.9 * en ** (-0.25))
    return False, y, h, h * fac


@njit(cache=True)
def _substep(model, y, h, prm, sign, method):
    if method == RK4:
        return rk4_step(model, y, h, prm, sign)
    ynew, _ = dopri_step(model, y, h, prm, sign)
    return ynew


@njit(cache=True)
def _refine_crossing(model, y, h, prm, sign, method, g0, g1):
    """Illinois iteration on the sub-step length where f_0 changes sign."""
    a, b = 0.0, h
    fa, fb = g0, g1
    side = 0
    c = b
    yc = y
    for _ in range(80):
        c = b - fb * (b - a) / (fb - fa)
        yc = _substep(model, y, c, prm, sign, method)
        fc = rhs(model, yc, prm, sign)[0]
        if fc > 0.0:
            a, fa = c, fc
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb = c, fc
            if side == 1:
                fa *= 0.5
            side = 1
        if abs(b - a) <= 1e-13 * abs(h) or fc == 0.0:
            break
    return c, yc


@njit(cache=True)
def integrate_path(model, prm, y0, sign, method, h0, atol, rtol, t_end, max_steps, hmax):
    """Integrate and store every accepted step.  Returns (t, Y, n, status)."""
    n = y0.shape[0]
    cap = 1024
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    ts[0] = 0.0
    ys[0] = y0
    cnt = 1
    t = 0.0
    y = y0.copy()
    h = h0
    steps = 0
    status = OK
    if _bad(y):
        return ts[:1], ys[:1], 1, NONFINITE
    while t < t_end:
        if steps >= max_steps:
            status = STEP_LIMIT
            break
        hh = min(h, t_end - t)
        if method == RK45:
            hh = min(hh, hmax)
        ok, ynew, hused, hnext = _advance(model, y, hh, prm, sign, method, atol, rtol)
        steps += 1
        if not ok:
            h = hnext
            if h < 1e-14 * max(1.0, t):
                status = STEP_UNDERFLOW
                break
            continue
        if _bad(ynew):
            status = NONFINITE
            break
        t = t + hused if t_end - t > hused else t_end
        y = ynew
        if method == RK45:
            h = hnext if hh == h else max(h, hnext)
        if cnt == cap:
            cap *= 2
            ts2 = np.empty(cap)
            ys2 = np.empty((cap, n))
            ts2[:cnt] = ts[:cnt]
            ys2[:cnt] = ys[:cnt]
            ts, ys = ts2, ys2
        ts[cnt] = t
        ys[cnt] = y
        cnt += 1
    return ts[:cnt], ys[:cnt], cnt, status


@njit(cache=True)
def crossings(model, prm, y0, sign, method, h0, atol, rtol, t_end, max_steps, hmax,
              max_cross):
    """Collect up to ``max_cross`` section crossings (f_0: + -> -).

    Returns (times, states, count, status, t_last, y_last).  A start exactly on
    the section does not count as a crossing.
    """
    n = y0.shape[0]
    ct = np.empty(max_cross)
    cy = np.empty((max_cross, n))
    cnt = 0
    t = 0.0
    y = y0.copy()
    h = h0
    steps = 0
    status = OK
    if _bad(y):
        return ct[:0], cy[:0], 0, NONFINITE, t, y
    g = rhs(model, y, prm, sign)[0]
    while cnt < max_cross:
        if t >= t_end:
            status = TIME_LIMIT
            break
        if steps >= max_steps:
            status = STEP_LIMIT
            break
        hh = min(h, t_end - t)
        if method == RK45:
            hh = min(hh, hmax)
        ok, ynew, hused, hnext = _advance(model, y, hh, prm, sign, method, atol, rtol)
        steps += 1
        if not ok:
            h = hnext
            if h < 1e-14 * max(1.0, t):
                status = STEP_UNDERFLOW
                break
            continue
        if _bad(ynew):
            status = NONFINITE
            y = ynew
            break
        gnew = rhs(model, ynew, prm, sign)[0]
        if g > 0.0 and gnew <= 0.0:
            dt, yc = _refine_crossing(model, y, hused, prm, sign, method, g, gnew)
            ct[cnt] = t + dt
            cy[cnt] = yc
            cnt += 1
        t += hused
        y = ynew
        g = gnew
        if method == RK45:
            h = hnext if hh == h else max(h, hnext)
    return ct[:cnt], cy[:cnt], cnt, status, t, y


@njit(cache=True)
def window_sup(model, prm, y0, sign, method, h0, atol, rtol, t_end, t_start, max_steps,
               hmax):
    """Sup of the first coordinate over [t_start, mid] and [mid, t_end].

    Interior maxima are located on the section to sub-step accuracy.
    Returns (sup_a, sup_b, status, t_reached, y_final).
    """
    mid = 0.5 * (t_start + t_end)
    sa = -np.inf
    sb = -np.inf
    t = 0.0
    y = y0.copy()
    h = h0
    steps = 0
    status = OK
    if _bad(y):
        return sa, sb, NONFINITE, t, y
    g = rhs(model, y, prm, sign)[0]
    # window boundaries are hit exactly so their samples are included
    while t < t_end:
        if steps >= max_steps:
            status = STEP_LIMIT
            break
        target = t_start if t < t_start else (mid if t < mid else t_end)
        hh = min(h, target - t)
        if method == RK45:
            hh = min(hh, hmax)
        ok, ynew, hused, hnext = _advance(model, y, hh, prm, sign, method, atol, rtol)
        steps += 1
        if not ok:
            h = hnext
            if h < 1e-14 * max(1.0, t):
                status = STEP_UNDERFLOW
                break
            continue
        if _bad(ynew):
            status = NONFINITE
            y = ynew
            break
        gnew = rhs(model, ynew, prm, sign)[0]
        tnew = target if target - t <= hused else t + hused
        if t >= t_start:
            in_a = tnew <= mid
            if g > 0.0 and gnew <= 0.0:
                dt, yc = _refine_crossing(model, y, hused, prm, sign, method, g, gnew)
                if t + dt <= mid:
                    sa = max(sa, yc[0])
                else:
                    sb = max(sb, yc[0])
            if in_a:
                sa = max(sa, ynew[0])
            else:
                sb = max(sb, ynew[0])
        if tnew == t_start:
            sa = max(sa, ynew[0])
        if tnew == mid:
            sb = max(sb, ynew[0])
        t = tnew
        y = ynew
        g = gnew
        if method == RK45:
            h = hnext if hh == h else max(h, hnext)
    return sa, sb, status, t, y


@njit(cache=True)
def window_sup_batch(model, prms, y0s, method, h0, atol, rtol, t_end, t_start,
                     max_steps, hmax):
    m = y0s.shape[0]
    sa = np.empty(m)
    sb = np.empty(m)
    st = np.empty(m, dtype=np.int64)
    for i in range(m):
        a, b, s, _, _ = window_sup(model, prms[i], y0s[i], 1.0, method, h0, atol, rtol,
                                   t_end, t_start, max_steps, hmax)
        sa[i] = a
        sb[i] = b
        st[i] = s
    return sa, sb, st


@njit(cache=True)
def first_returns(model, prm, x0s, xlo, xhi, sign, atol, rtol, t_max, hmax):
    """First return of points (x0, 0) to the segment {y = 0, xlo < x < xhi} for a planar
    field of the form x' = y.  Returns (x_return, period, status) arrays;
    status 0 = returned inside the segment, 5 = returned outside it, otherwise
    the orbit stalled or diverged.
    """
    m = x0s.shape[0]
    xr = np.full(m, np.nan)
    tr = np.full(m, np.nan)
    st = np.zeros(m, dtype=np.int64)
    y0 = np.zeros(2)
    for i in range(m):
        y0[0] = x0s[i]
        y0[1] = 0.0
        ct, cy, cnt, status, _, _ = crossings(model, prm, y0, sign, RK45, 1e-3, atol, rtol,
                                              t_max, 10_000_000, hmax, 1)
        if cnt == 1 and xlo < cy[0, 0] < xhi:
            xr[i] = cy[0, 0]
            tr[i] = ct[0]
        elif cnt == 1:
            # returned, but outside the segment; the value is still reported
            xr[i] = cy[0, 0]
            tr[i] = ct[0]
            st[i] = 5
        else:
            st[i] = status if status != OK else TIME_LIMIT
    return xr, tr, st


@njit(cache=True)
def manifold_exit(model, prm, y0, sign, atol, rtol, t_max, hmax):
    """Follow a planar x' = y orbit from y0 to its second crossing of y = 0.

    Returns (x at that crossing, direction flag, status); the flag is +1 for a
    downward crossing (y: + -> -) and -1 for an upward one.
    """
    y = y0.copy()
    t = 0.0
    h = 1e-3
    count = 0
    prev = y[1]
    while t < t_max:
        hh = min(h, hmax)
        ok, ynew, hused, hnext = _advance(model, y, hh, prm, sign, RK45, atol, rtol)
        if not ok:
            h = hnext
            if h < 1e-15:
                return np.nan, 0, STEP_UNDERFLOW
            continue
        if _bad(ynew):
            return np.nan, 0, NONFINITE
        t += hused
        h = hnext
        cur = ynew[1]
        if (prev > 0.0 and cur <= 0.0) or (prev < 0.0 and cur >= 0.0):
            count += 1
            if count == 2:
                # linear interpolation is enough: only the side of the saddle matters
                w = prev / (prev - cur)
                xc = y[0] + w * (ynew[0] - y[0])
                return xc, 1 if prev > 0.0 else -1, OK
        prev = cur
        y = ynew
    return np.nan, 0, TIME_LIMIT

"""Compiled inner loops: boundary evaluation, collision solving, stepping.

Everything in this module is plain scalars and preallocated arrays so numba
can compile it. The public API lives in the wrapper modules; nothing here
validates its inputs.

Conventions shared with the rest of the package:

* every table is star-shaped about the origin, with polar radius R(theta);
* the boundary parameter u is the angle for circle/ellipse/egg, the polar
  angle for the cardioid, and arc length for the cuspless table;
* the inward unit normal n and the unit tangent t (direction of increasing u)
  form the frame angles are measured in; reflection angles are unsigned, the
  signed phi used in phase space is angle * side with side = sign(v . t).
"""

import math

import numpy as np
from numba import njit

# table kind codes, kept in sync with tables.Table
CIRCLE = 0
ELLIPSE = 1
CARDIOID = 2
CUSPLESS = 3
EGG = 4

# step/trajectory status codes
OK = 0
HIT_CUSP = 1
HIT_TANGENT = 2
NO_ROOT = 3

EPS_DEPART = 1e-10   # minimum flight time accepted as a new collision
EPS_CUSP = 1e-8      # parameter distance to the cardioid cusp
EPS_TANGENT = 1e-9   # cos(eta) below which a collision counts as tangent

ROOT3 = math.sqrt(3.0)
WALL_HALF = ROOT3 / 4.0        # cuspless: |s| at the wall/arc joins
ARC_HALF = 9.0 * ROOT3 / 4.0   # cuspless: s at the rightmost point

_TWO_PI = 2.0 * math.pi
_SECTOR = 2.0 * math.pi / 3.0  # cuspless: polar angle of the joins

# sweep solver tuning; see _next_collision
_STEP_FRAC = 0.5
_STEP_FLOOR = 1e-4


@njit(cache=True, inline="always")
def _wrap_angle(x):
    # into [-pi, pi)
    return x - _TWO_PI * math.floor((x + math.pi) / _TWO_PI)


@njit(cache=True, inline="always")
def _wrap_diff(x, period):
    # representative of x closest to zero, modulo period
    return x - period * math.floor(x / period + 0.5)


@njit(cache=True, inline="always")
def _radial(kind, p, th):
    """Polar radius of the boundary at angle th."""
    if kind == CIRCLE:
        return 1.0
    if kind == ELLIPSE:
        c = math.cos(th)
        s = math.sin(th)
        return 1.0 / math.sqrt(c * c / (p * p) + s * s)
    if kind == CARDIOID:
        return 1.0 + math.cos(th)
    if kind == CUSPLESS:
        w = _wrap_angle(th)
        if abs(w) <= _SECTOR:
            return 1.0 + math.cos(w)
        return -0.25 / math.cos(w)
    return 1.0 + p * math.cos(3.0 * th)


@njit(cache=True)
def _frame(kind, p, u):
    """Boundary data at parameter u.

    Returns (qx, qy, nx, ny, tx, ty, K, g): position, inward unit normal,
    unit tangent along increasing u, signed curvature (<= 0, focusing), and
    the metric factor g = |dq/du| converting du to arc length.
    """
    if kind == CIRCLE:
        c = math.cos(u)
        s = math.sin(u)
        return c, s, -c, -s, -s, c, -1.0, 1.0
    if kind == ELLIPSE:
        c = math.cos(u)
        s = math.sin(u)
        g = math.sqrt(p * p * s * s + c * c)
        tx = -p * s / g
        ty = c / g
        return p * c, s, -ty, tx, tx, ty, -p / (g * g * g), g
    if kind == CARDIOID or kind == EGG:
        if kind == CARDIOID:
            rho = 1.0 + math.cos(u)
            d1 = -math.sin(u)
            d2 = -math.cos(u)
        else:
            rho = 1.0 + p * math.cos(3.0 * u)
            d1 = -3.0 * p * math.sin(3.0 * u)
            d2 = -9.0 * p * math.cos(3.0 * u)
        c = math.cos(u)
        s = math.sin(u)
        gx = d1 * c - rho * s
        gy = d1 * s + rho * c
        g = math.sqrt(gx * gx + gy * gy)
        tx = gx / g
        ty = gy / g
        K = -(rho * rho + 2.0 * d1 * d1 - rho * d2) / (g * g * g)
        return rho * c, rho * s, -ty, tx, tx, ty, K, g
    # CUSPLESS, u is arc length increasing counterclockwise, u = -y on the
    # wall; the arc spans |u| > WALL_HALF with the rightmost point at +-ARC_HALF
    if abs(u) <= WALL_HALF:
        return -0.25, -u, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0
    th = 2.0 * math.asin((abs(u) - ARC_HALF) / 4.0)
    if u < 0.0:
        th = -th
    rho = 1.0 + math.cos(th)
    d1 = -math.sin(th)
    d2 = -math.cos(th)
    c = math.cos(th)
    s = math.sin(th)
    gx = d1 * c - rho * s
    gy = d1 * s + rho * c
    g = math.sqrt(gx * gx + gy * gy)
    tx = gx / g
    ty = gy / g
    K = -(rho * rho + 2.0 * d1 * d1 - rho * d2) / (g * g * g)
    return rho * c, rho * s, -ty, tx, tx, ty, K, 1.0


@njit(cache=True)
def _param_from_point(kind, p, x, y):
    """Canonical boundary parameter of a point known to lie on the boundary."""
    th = math.atan2(y, x)
    if kind == ELLIPSE:
        return math.atan2(y, x / p)
    if kind == CUSPLESS:
        if abs(th) > _SECTOR:
            return -y
        s = 4.0 * math.sin(0.5 * th)
        s += ARC_HALF if th <= 0.0 else -ARC_HALF
        if s == -ARC_HALF:
            s = ARC_HALF
        return s
    return _wrap_angle(th)


@njit(cache=True, inline="always")
def _fsweep(kind, p, th, d, th_d):
    # signed boundary residual along the ray, parametrized by polar angle:
    # positive outside the table, negative inside
    return d - _radial(kind, p, th) * math.cos(th - th_d)


@njit(cache=True, inline="always")
def _gres(kind, p, qx, qy, vx, vy, t):
    # same residual parametrized by ray length
    x = qx + t * vx
    y = qy + t * vy
    return math.hypot(x, y) - _radial(kind, p, math.atan2(y, x))


@njit(cache=True, inline="always")
def _tau_of(qx, qy, vx, vy, d, th_d, th):
    # ray length at polar angle th; -1.0 signals "at or beyond infinity"
    cs = math.cos(th - th_d)
    if cs < 1e-14:
        return -1.0
    r = d / cs
    return (r * math.cos(th) - qx) * vx + (r * math.sin(th) - qy) * vy


@njit(cache=True)
def _refine(kind, p, qx, qy, vx, vy, ta, tb):
    """Bisect the ray-length residual inside a bracket; returns tau or -1."""
    ga = _gres(kind, p, qx, qy, vx, vy, ta)
    gb = _gres(kind, p, qx, qy, vx, vy, tb)
    if ga >= 0.0:
        return ta
    if gb < 0.0:
        return -1.0
    for _ in range(80):
        tm = 0.5 * (ta + tb)
        if tb - ta < 1e-15:
            break
        if _gres(kind, p, qx, qy, vx, vy, tm) < 0.0:
            ta = tm
        else:
            tb = tm
    return 0.5 * (ta + tb)


@njit(cache=True)
def _next_collision(kind, p, smax, rmax, qx, qy, vx, vy):
    """First boundary crossing of the ray q + tau*v with tau > EPS_DEPART.

    Returns (tau, x, y, u, status). v must be a unit vector pointing into
    the table (or q strictly inside). The residual is sampled at adaptive
    polar-angle steps bounded by 0.5*|F|/smax so a sign change can never be
    stepped over, with a 1e-4 floor; brackets are polished by bisection in
    the ray length.
    """
    L = qx * vy - qy * vx
    if abs(L) < 1e-12:
        # radial chord through the centre
        qdotv = qx * vx + qy * vy
        if kind == CARDIOID and qdotv < 0.0:
            # the centre is the cusp, and this ray runs straight into it
            return -qdotv, 0.0, 0.0, math.pi, HIT_CUSP
        th_v = math.atan2(vy, vx)
        tau = _radial(kind, p, th_v) - qdotv
        if tau <= EPS_DEPART:
            return 0.0, qx, qy, 0.0, NO_ROOT
        x = qx + tau * vx
        y = qy + tau * vy
        u = _param_from_point(kind, p, x, y)
        return _epilogue(kind, p, tau, x, y, u, vx, vy)

    sgn = 1.0 if L > 0.0 else -1.0
    qdotv = qx * vx + qy * vy
    px = qx - qdotv * vx
    py = qy - qdotv * vy
    d = math.hypot(px, py)
    th_d = math.atan2(py, px)
    th0 = math.atan2(qy, qx)
    th_v = math.atan2(vy, vx)
    delta = sgn * (th_v - th0)
    delta -= _TWO_PI * math.floor(delta / _TWO_PI)
    if delta > math.pi:
        # the polar angle sweeps strictly less than pi along any ray
        delta = math.pi
    tau_hi = math.hypot(qx, qy) + rmax + 1.0

    f_prev = _fsweep(kind, p, th0, d, th_d)
    if f_prev >= 0.0:
        f_prev = -1e-300
    c_prev = 0.0
    for _ in range(400000):
        if c_prev >= delta:
            break
        step = _STEP_FRAC * abs(f_prev) / smax
        if step < _STEP_FLOOR:
            step = _STEP_FLOOR
        c_next = c_prev + step
        if c_next > delta:
            c_next = delta
        f_next = _fsweep(kind, p, th0 + sgn * c_next, d, th_d)
        if f_prev < 0.0 and f_next >= 0.0:
            ta = _tau_of(qx, qy, vx, vy, d, th_d, th0 + sgn * c_prev)
            tb = _tau_of(qx, qy, vx, vy, d, th_d, th0 + sgn * c_next)
            if ta < 0.0:
                ta = 0.0
            if tb < 0.0:
                tb = tau_hi
            tau = _refine(kind, p, qx, qy, vx, vy, ta, tb)
            if tau > EPS_DEPART:
                x = qx + tau * vx
                y = qy + tau * vy
                u = _param_from_point(kind, p, x, y)
                return _epilogue(kind, p, tau, x, y, u, vx, vy)
        f_prev = f_next
        c_prev = c_next
    if f_prev < 0.0:
        # root hides within the last resolution cell before the asymptote
        ta = _tau_of(qx, qy, vx, vy, d, th_d, th0 + sgn * c_prev)
        if ta < 0.0:
            ta = 0.0
        tau = _refine(kind, p, qx, qy, vx, vy, ta, tau_hi)
        if tau > EPS_DEPART:
            x = qx + tau * vx
            y = qy + tau * vy
            u = _param_from_point(kind, p, x, y)
            return _epilogue(kind, p, tau, x, y, u, vx, vy)
    return 0.0, qx, qy, 0.0, NO_ROOT


@njit(cache=True)
def _epilogue(kind, p, tau, x, y, u, vx, vy):
    if kind == CARDIOID and math.pi - abs(u) < EPS_CUSP:
        return tau, x, y, u, HIT_CUSP
    qx, qy, nx, ny, tx, ty, K, g = _frame(kind, p, u)
    ceta = -(vx * nx + vy * ny)
    if ceta < EPS_TANGENT:
        return tau, x, y, u, HIT_TANGENT
    return tau, x, y, u, OK


@njit(cache=True)
def _step(kind, p, smax, rmax, lam, u, phi):
    """One bounce of the pinball map from the outgoing state (u, phi).

    phi is the signed outgoing angle at u. Returns
    (u1, phi1, eta1, tau, side1, K0, K1, g0, g1, status) where phi1 is the
    signed outgoing angle at the new collision, eta1 the unsigned incidence
    there, K the curvatures and g the metric factors at departure/arrival.
    """
    qx, qy, nx, ny, tx, ty, K0, g0 = _frame(kind, p, u)
    cph = math.cos(phi)
    sph = math.sin(phi)
    vx = nx * cph + tx * sph
    vy = ny * cph + ty * sph
    tau, x, y, u1, status = _next_collision(kind, p, smax, rmax, qx, qy, vx, vy)
    if status != OK:
        return u1, 0.0, 0.0, tau, 1.0, K0, 0.0, g0, 1.0, status
    qx1, qy1, nx1, ny1, tx1, ty1, K1, g1 = _frame(kind, p, u1)
    ceta = -(vx * nx1 + vy * ny1)
    seta = vx * tx1 + vy * ty1
    # atan2 stays fully accurate at near-normal incidence, where acos of
    # the dot product loses half the significant digits
    eta = math.atan2(abs(seta), ceta)
    side = 1.0 if seta >= 0.0 else -1.0
    phi1 = side * lam * eta
    return u1, phi1, eta, tau, side, K0, K1, g0, g1, OK


@njit(cache=True, inline="always")
def _flight_matrix(lam, tau, K0, K1, cphi0, ceta1):
    """Per-flight derivative of the pinball map in the (arc length, phi) chart."""
    A = (tau * K0 + cphi0) / ceta1
    B = tau / ceta1
    return -A, -B, -lam * (K1 * A + K0), -lam * (K1 * B + 1.0)


@njit(cache=True, nogil=True)
def _lyapunov_full(kind, p, smax, rmax, lam, u0, phi0, discard, n):
    """Two Lyapunov exponents along one trajectory, Gram-Schmidt style.

    Returns (nu_plus, nu_minus, det_log_mean, n_used, status, u_end, phi_end).
    det_log_mean is the running mean of log|det| of the per-flight matrices,
    which equals nu_plus + nu_minus up to rounding and is reported for the
    consistency check.
    """
    u = u0
    phi = phi0
    status = OK
    for _ in range(discard):
        u, phi, eta, tau, side, K0, K1, g0, g1, status = _step(
            kind, p, smax, rmax, lam, u, phi)
        if status != OK:
            return 0.0, 0.0, 0.0, 0, status, u, phi
    w1x, w1y = 1.0, 0.0
    w2x, w2y = 0.0, 1.0
    acc1 = 0.0
    acc2 = 0.0
    accd = 0.0
    used = 0
    cphi = math.cos(phi)
    for _ in range(n):
        u, phi, eta, tau, side, K0, K1, g0, g1, status = _step(
            kind, p, smax, rmax, lam, u, phi)
        if status != OK:
            break
        ceta = math.cos(eta)
        m00, m01, m10, m11 = _flight_matrix(lam, tau, K0, K1, cphi, ceta)
        a1x = m00 * w1x + m01 * w1y
        a1y = m10 * w1x + m11 * w1y
        a2x = m00 * w2x + m01 * w2y
        a2y = m10 * w2x + m11 * w2y
        n1 = math.hypot(a1x, a1y)
        w1x = a1x / n1
        w1y = a1y / n1
        dot = a2x * w1x + a2y * w1y
        b2x = a2x - dot * w1x
        b2y = a2y - dot * w1y
        n2 = math.hypot(b2x, b2y)
        if n2 > 0.0:
            w2x = b2x / n2
            w2y = b2y / n2
        else:
            w2x = -w1y
            w2y = w1x
        acc1 += math.log(n1)
        acc2 += math.log(n2) if n2 > 0.0 else -math.inf
        det = lam * cphi / ceta
        accd += math.log(det) if det > 0.0 else -math.inf
        cphi = math.cos(phi)
        used += 1
    if used == 0:
        return 0.0, 0.0, 0.0, 0, status, u, phi
    return acc1 / used, acc2 / used, accd / used, used, status, u, phi


@njit(cache=True, nogil=True)
def _trajectory(kind, p, smax, rmax, lam, u0, phi0, discard,
                out_u, out_phi, out_eta, out_tau, out_side, out_k, out_g):
    """Fill per-collision arrays; returns (count, status)."""
    u = u0
    phi = phi0
    for _ in range(discard):
        u, phi, eta, tau, side, K0, K1, g0, g1, status = _step(
            kind, p, smax, rmax, lam, u, phi)
        if status != OK:
            return 0, status
    n = out_u.size
    for k in range(n):
        u, phi, eta, tau, side, K0, K1, g0, g1, status = _step(
            kind, p, smax, rmax, lam, u, phi)
        if status != OK:
            return k, status
        out_u[k] = u
        out_phi[k] = phi
        out_eta[k] = eta
        out_tau[k] = tau
        out_side[k] = side
        out_k[k] = K1
        out_g[k] = g1
    return n, OK


@njit(cache=True, nogil=True)
def _detect_period(kind, p, smax, rmax, lam, u0, phi0, discard, pmax, tol,
                   uperiod):
    """Minimal period <= pmax of the attractor reached from (u0, phi0).

    Recurrence must hold along a whole window of pmax+1 base points. Returns
    (period, u_end, phi_end); period 0 means aperiodic within pmax, -1 means
    the trajectory left the domain.
    """
    u = u0
    phi = phi0
    for _ in range(discard):
        u, phi, eta, tau, side, K0, K1, g0, g1, status = _step(
            kind, p, smax, rmax, lam, u, phi)
        if status != OK:
            return -1, u, phi
    m = 2 * pmax + 1
    us = np.empty(m)
    ps = np.empty(m)
    us[0] = u
    ps[0] = phi
    for k in range(1, m):
        u, phi, eta, tau, side, K0, K1, g0, g1, status = _step(
            kind, p, smax, rmax, lam, u, phi)
        if status != OK:
            return -1, u, phi
        us[k] = u
        ps[k] = phi
    for per in range(1, pmax + 1):
        good = True
        for k in range(pmax + 1):
            if abs(_wrap_diff(us[k + per] - us[k], uperiod)) > tol:
                good = False
                break
            if abs(ps[k + per] - ps[k]) > tol:
                good = False
                break
        if good:
            return per, u, phi
    return 0, u, phi


@njit(cache=True, nogil=True)
def _basin_block(kind, p, smax, rmax, lam, us, phis, discard, n, eps_chaos,
                 uperiod, att_u, att_phi, att_off,
                 out_label, out_nu, out_tag):
    """Label a batch of initial states: 0 periodic, 1 chaotic, 2 escaped.

    att_* describe candidate attractor orbits (concatenated points with
    offsets); non-chaotic cells are tagged by the nearest orbit, -1 if none
    were supplied.
    """
    m = us.size
    natt = att_off.size - 1
    for i in range(m):
        nu1, nu2, accd, used, status, ue, pe = _lyapunov_full(
            kind, p, smax, rmax, lam, us[i], phis[i], discard, n)
        if used == 0:
            out_label[i] = 2
            out_nu[i] = np.nan
            out_tag[i] = -1
            continue
        out_nu[i] = nu1
        tag = -1
        if nu1 > eps_chaos:
            out_label[i] = 1
        else:
            out_label[i] = 0
            if natt > 0:
                best = 1e300
                for j in range(natt):
                    for k in range(att_off[j], att_off[j + 1]):
                        du = _wrap_diff(ue - att_u[k], uperiod)
                        dp = pe - att_phi[k]
                        dist = math.hypot(du, dp)
                        if dist < best:
                            best = dist
                            tag = j
        out_tag[i] = tag
    return 0


@njit(cache=True, nogil=True)
def _period3_gap(kind, p, smax, rmax, lam, nth, nphi, sin_hi):
    """Min distance between the polar angle and its third iterate on a grid.

    Returns (gap, skipped): positive gap certifies (at grid resolution) that
    no period-3 orbit exists; cells whose short trajectory leaves the domain
    are skipped and counted.
    """
    gap = 1e300
    skipped = 0
    for i in range(nth):
        th0 = -math.pi + _TWO_PI * (i + 0.5) / nth
        for j in range(nphi):
            sphi = -sin_hi + 2.0 * sin_hi * j / (nphi - 1)
            u = th0
            phi = math.asin(sphi)
            ok = True
            for _ in range(3):
                u, phi, eta, tau, side, K0, K1, g0, g1, status = _step(
                    kind, p, smax, rmax, lam, u, phi)
                if status != OK:
                    ok = False
                    break
            if not ok:
                skipped += 1
                continue
            du = abs(_wrap_diff(u - th0, _TWO_PI))
            if du < gap:
                gap = du
    return gap, skipped


@njit(cache=True, nogil=True)
def _slap_square_min_derivative(kind, p, smax, rmax, ngrid, lo, hi):
    """Min over a parameter grid of |(T0^2)'| in the arc-length chart."""
    best = 1e300
    for i in range(ngrid):
        u0 = lo + (hi - lo) * (i + 0.5) / ngrid
        u1, phi1, eta1, tau1, side1, K0a, K1a, g0a, g1a, st = _step(
            kind, p, smax, rmax, 0.0, u0, 0.0)
        if st != OK:
            continue
        u2, phi2, eta2, tau2, side2, K0b, K1b, g0b, g1b, st = _step(
            kind, p, smax, rmax, 0.0, u1, 0.0)
        if st != OK:
            continue
        d1 = -(tau1 * K0a + 1.0) / math.cos(eta1)
        d2 = -(tau2 * K0b + 1.0) / math.cos(eta2)
        v = abs(d1 * d2)
        if v < best:
            best = v
    return best


@njit(cache=True, nogil=True)
def _theta_histogram(kind, p, smax, rmax, lam, u0, phi0, discard, n, nbins,
                     out_bins):
    """Occupancy histogram of the polar-angle coordinate along a trajectory."""
    u = u0
    phi = phi0
    for _ in range(discard):
        u, phi, eta, tau, side, K0, K1, g0, g1, status = _step(
            kind, p, smax, rmax, lam, u, phi)
        if status != OK:
            return 0, status
    used = 0
    for _ in range(n):
        u, phi, eta, tau, side, K0, K1, g0, g1, status = _step(
            kind, p, smax, rmax, lam, u, phi)
        if status != OK:
            return used, status
        b = int((u + math.pi) / _TWO_PI * nbins)
        if b == nbins:
            b = nbins - 1
        out_bins[b] += 1
        used += 1
    return used, OK

"""Independent geometry oracle for cross-checking the collision solver.

Everything here is deliberately written from scratch: the radial functions
are re-derived (not imported), and the first-collision solver is a dense
Cartesian sweep along the ray followed by vectorized bisection on the
inside/outside indicator.  Slow and dumb on purpose.
"""
import math

import numpy as np

ROOT3 = math.sqrt(3.0)


def radial(name: str, param: float, theta):
    """Boundary radius R(theta) for the named table, vectorized."""
    theta = np.asarray(theta, dtype=np.float64)
    if name == "circle":
        return np.ones_like(theta)
    if name == "ellipse":
        a = param
        return 1.0 / np.sqrt((np.cos(theta) / a) ** 2 + np.sin(theta) ** 2)
    if name == "cardioid":
        return 1.0 + np.cos(theta)
    if name == "cuspless":
        on_arc = np.abs(theta) <= 2.0 * math.pi / 3.0
        # wall x = -1/4: r cos(theta) = -1/4 on the far side
        wall = -0.25 / np.where(on_arc, -1.0, np.cos(theta))
        return np.where(on_arc, 1.0 + np.cos(theta), wall)
    if name == "egg":
        return 1.0 + param * np.cos(3.0 * theta)
    raise ValueError(name)


def inside(name: str, param: float, x, y):
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    return r < radial(name, param, th)


def interior_points(name: str, param: float, rmax: float, n: int, rng):
    """Uniform points in the table interior (rejection from the bounding box)."""
    xs = np.empty(n)
    ys = np.empty(n)
    have = 0
    while have < n:
        cand = rng.uniform(-rmax, rmax, size=(2, 4 * (n - have)))
        keep = inside(name, param, cand[0], cand[1])
        m = min(int(keep.sum()), n - have)
        xs[have:have + m] = cand[0, keep][:m]
        ys[have:have + m] = cand[1, keep][:m]
        have += m
    return xs, ys


def fd_flight_jacobian(lam, table, x, h=2e-6):
    """Finite-difference Jacobian of one map step, arc-length chart both ends.

    The derivative route independent of the analytic flight matrix: perturb
    (s0, phi0), re-run the actual map, difference the images. One Richardson
    step over central differences kills the h^2 truncation term, which
    otherwise dominates near grazing arrivals.
    """
    from pinball.dynamics import PhasePoint, step

    g0 = table.metric(x.u)
    r0 = step(lam, table, x)
    u1c = r0.state.u
    g1 = table.metric(u1c)

    def image(du, dphi):
        r = step(lam, table, PhasePoint(table.wrap(x.u + du), x.phi + dphi))
        return table.wrap(r.state.u - u1c), r.state.phi

    def central(hh):
        du1a, dp1a = image(+hh / g0, 0.0)
        du1b, dp1b = image(-hh / g0, 0.0)
        du1c_, dp1c_ = image(0.0, +hh)
        du1d, dp1d = image(0.0, -hh)
        return np.array([
            [g1 * (du1a - du1b) / (2.0 * hh), g1 * (du1c_ - du1d) / (2.0 * hh)],
            [(dp1a - dp1b) / (2.0 * hh), (dp1c_ - dp1d) / (2.0 * hh)],
        ])

    return (4.0 * central(0.5 * h) - central(h)) / 3.0, r0


def safe_states(table, n, seed, margin=0.05, stream=0):
    """Random phase points that keep a step's finite differencing valid.

    Filters out departures and arrivals near chart seams (cuspless joins,
    cardioid cusp) and near-tangential flights, where one-sided neighbours
    would land on a different smooth piece.
    """
    from pinball.analysis import random_phase_points
    from pinball.dynamics import PhasePoint, step

    wall_half = ROOT3 / 4.0
    kept = []
    attempt = 0
    while len(kept) < n and attempt < 8:
        us, phis = random_phase_points(table, 2 * n, seed + attempt, stream)
        for u, phi in zip(us, phis):
            if abs(phi) > 0.5 * math.pi - margin:
                continue
            x = PhasePoint(float(u), float(phi))
            try:
                r = step(0.7, table, x)  # geometry probe; lam value irrelevant
            except Exception:
                continue
            if math.cos(r.eta) < margin:
                continue
            bad = False
            for uu in (x.u, r.state.u):
                if table.name == "cardioid" and math.pi - abs(uu) < 1e-2:
                    bad = True
                if table.name == "cuspless" and (
                        abs(abs(uu) - wall_half) < 1e-3):
                    bad = True
            if not bad:
                kept.append(x)
            if len(kept) == n:
                break
        attempt += 1
    if len(kept) < n:
        raise AssertionError(f"could not collect {n} safe states for {table.name}")
    return kept


def first_hit(name: str, param: float, rmax: float, qx, qy, vx, vy,
              coarse: int = 4096, iters: int = 60, chunk: int = 1000):
    """Ray length to the first boundary crossing, one value per ray.

    Rays must start inside and carry unit velocity.  The coarse sweep spacing
    (~2*rmax/4096) under-resolves grazing exits; callers filter those out.
    """
    qx, qy, vx, vy = (np.asarray(a, dtype=np.float64) for a in (qx, qy, vx, vy))
    n = qx.size
    tmax = 2.0 * rmax + 0.2
    ts = np.linspace(tmax / coarse, tmax, coarse)
    out = np.empty(n)
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        px = qx[s:e] + ts[:, None] * vx[s:e]
        py = qy[s:e] + ts[:, None] * vy[s:e]
        outside = ~inside(name, param, px, py)
        if not outside.any(axis=0).all():
            raise AssertionError("ray never left the table; tmax too small")
        first = outside.argmax(axis=0)
        hi = ts[first]
        lo = np.where(first > 0, ts[np.maximum(first - 1, 0)], 0.0)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            mx = qx[s:e] + mid * vx[s:e]
            my = qy[s:e] + mid * vy[s:e]
            ins = inside(name, param, mx, my)
            lo = np.where(ins, mid, lo)
            hi = np.where(ins, hi, mid)
        out[s:e] = 0.5 * (lo + hi)
    return out

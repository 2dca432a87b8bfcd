"""Orbit statistics and orbit hunting: Lyapunov exponents, basins, searches.

All routines that consume randomness take an explicit (seed, stream) pair
and draw from a counter-based generator, so results are reproducible and
independent of how work is scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .dynamics import PhasePoint, Trajectory, check_contraction, step, trajectory
from .errors import NoConvergence, PinballError
from .stability import flight_jacobian
from .tables import Table, cuspless_cardioid

EPS_CHAOS = 1e-3  # threshold on the top exponent separating chaos from order


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class LyapunovEstimate:
    """Both Lyapunov exponents of one orbit, with bookkeeping.

    det_log_mean is the orbit average of log|det| of the per-flight
    derivative; it equals nu_plus + nu_minus up to rounding whenever the
    contraction is positive, which makes a cheap internal consistency check.
    """

    nu_plus: float
    nu_minus: float
    det_log_mean: float
    n_used: int
    terminated_early: bool
    reason: str


_REASON = {_k.OK: "", _k.HIT_CUSP: "cusp", _k.HIT_TANGENT: "tangent",
           _k.NO_ROOT: "no_root"}


def lyapunov(lam: float, table: Table, x0: PhasePoint, n: int = 100_000,
             discard: int = 5_000) -> LyapunovEstimate:
    """Estimate both exponents along the orbit of x0.

    Tangent vectors are carried through the per-flight derivatives in the
    arc-length chart and reorthonormalized at every collision. At
    contraction zero the lower exponent is -inf.
    """
    lam = check_contraction(lam)
    nu1, nu2, accd, used, status, ue, pe = _k._lyapunov_full(
        *table._packed(), lam, table.wrap(x0.u), x0.phi, discard, n)
    if used == 0:
        return LyapunovEstimate(math.nan, math.nan, math.nan, 0, True,
                                _REASON[status])
    return LyapunovEstimate(nu1, nu2, accd, used, used < n, _REASON[status])


def random_phase_points(table: Table, n: int, seed: int, stream: int = 0):
    """n reproducible phase points, roughly uniform over the phase space.

    Each point is produced by launching a ray from a uniform interior
    position in a uniform direction and recording the elastic outgoing
    state at its first collision. Returns (u, phi) arrays.
    """
    rng = _rng(seed, stream)
    us = np.empty(n)
    phis = np.empty(n)
    got = 0
    while got < n:
        qx, qy = rng.uniform(-table.rmax, table.rmax, size=2)
        if not table.contains(qx, qy):
            continue
        ang = rng.uniform(0.0, 2.0 * math.pi)
        vx, vy = math.cos(ang), math.sin(ang)
        tau, x, y, u, status = _k._next_collision(*table._packed(),
                                                  qx, qy, vx, vy)
        if status != _k.OK:
            continue
        fr = _k._frame(table.kind, table.param, u)
        ceta = min(1.0, -(vx * fr[2] + vy * fr[3]))
        side = 1.0 if (vx * fr[4] + vy * fr[5]) >= 0.0 else -1.0
        us[got] = u
        phis[got] = side * math.acos(ceta)
        got += 1
    return us, phis


def sample_attractor(lam: float, table: Table, n: int = 20_000,
                     discard: int = 5_000, x0: PhasePoint | None = None,
                     seed: int = 0) -> Trajectory:
    """A post-transient orbit segment, for attractor portraits."""
    if x0 is None:
        us, phis = random_phase_points(table, 1, seed)
        x0 = PhasePoint(float(us[0]), float(phis[0]))
    return trajectory(lam, table, x0, n, discard=discard)


def attractor_period(lam: float, table: Table, x0: PhasePoint,
                     discard: int = 20_000, pmax: int = 64,
                     tol: float = 1e-6):
    """Minimal period of the attractor reached from x0, up to pmax.

    The recurrence is required to hold along a window of pmax+1 consecutive
    collisions. Returns (period, end_state): period 0 means no recurrence
    was found (aperiodic at this tolerance), -1 that the orbit left the
    domain; end_state is on the attractor when period > 0.
    """
    lam = check_contraction(lam)
    per, ue, pe = _k._detect_period(*table._packed(), lam, table.wrap(x0.u),
                                    x0.phi, discard, pmax, tol,
                                    table.u_period)
    if per <= 0:
        return per, None
    return per, PhasePoint(ue, pe)


@dataclass
class BasinResult:
    """Grid classification of initial conditions.

    labels[i, j] describes the cell (u_axis[i], phi_axis[j]): 0 converged
    to a regular attractor, 1 chaotic (top exponent above the threshold),
    2 left the domain. tags holds the index of the nearest supplied
    attractor orbit for label-0 cells, -1 where none was supplied.
    """

    u_axis: np.ndarray
    phi_axis: np.ndarray
    labels: np.ndarray
    nu_plus: np.ndarray
    tags: np.ndarray


def _pack_orbits(orbits):
    if not orbits:
        return np.empty(0), np.empty(0), np.zeros(1, np.int64)
    us, phis, off = [], [], [0]
    for orbit in orbits:
        for x in orbit:
            x = x if isinstance(x, PhasePoint) else PhasePoint(*x)
            us.append(x.u)
            phis.append(x.phi)
        off.append(len(us))
    return np.array(us), np.array(phis), np.array(off, np.int64)


def classify_basin(lam: float, table: Table, u_axis, phi_axis, attractors=(),
                   n: int = 2_000, discard: int = 2_000,
                   eps_chaos: float = EPS_CHAOS, threads: int = 1) -> BasinResult:
    """Classify every cell of a phase-space grid by its long-time fate.

    attractors is an optional sequence of periodic orbits (sequences of
    phase points) used to tag regular cells by which orbit they end up
    nearest to. The grid cells are independent, so the result does not
    depend on threads.
    """
    lam = check_contraction(lam)
    u_axis = np.asarray(u_axis, dtype=float)
    phi_axis = np.asarray(phi_axis, dtype=float)
    U, P = np.meshgrid(u_axis, phi_axis, indexing="ij")
    us = np.ascontiguousarray(U.ravel())
    phis = np.ascontiguousarray(P.ravel())
    att_u, att_phi, att_off = _pack_orbits(attractors)
    labels = np.empty(us.size, np.int8)
    nu = np.empty(us.size)
    tags = np.empty(us.size, np.int64)

    def run(lo, hi):
        _k._basin_block(*table._packed(), lam, us[lo:hi], phis[lo:hi],
                        discard, n, eps_chaos, table.u_period,
                        att_u, att_phi, att_off,
                        labels[lo:hi], nu[lo:hi], tags[lo:hi])

    if threads <= 1:
        run(0, us.size)
    else:
        bounds = np.linspace(0, us.size, threads * 4 + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run, lo, hi)
                       for lo, hi in zip(bounds[:-1], bounds[1:])]
            for f in futures:
                f.result()
    shape = U.shape
    return BasinResult(u_axis, phi_axis, labels.reshape(shape),
                       nu.reshape(shape), tags.reshape(shape))


def _iterate_with_jacobian(lam, table, x, period):
    """T^period and its derivative in the (parameter, angle) chart."""
    J = np.eye(2)
    y = x
    for _ in range(period):
        Js, res = flight_jacobian(lam, table, y)
        g0 = table.metric(y.u)
        g1 = table.metric(res.state.u)
        J = np.array([[Js[0, 0] * g0 / g1, Js[0, 1] / g1],
                      [Js[1, 0] * g0, Js[1, 1]]]) @ J
        y = res.state
    return y, J


def find_periodic_orbit(lam: float, table: Table, guess, period: int | None = None,
                        tol: float = 1e-10, max_iter: int = 100) -> list[PhasePoint]:
    """Newton search for a periodic orbit near a guess.

    guess is a phase point (then period is required) or a sequence of them
    (whose length sets the period; its first element seeds the search).
    Steps are halved when the residual fails to drop. Returns the orbit as
    a list of consecutive phase points. Raises NoConvergence if the
    residual cannot be pushed below tol.
    """
    lam = check_contraction(lam)
    if isinstance(guess, PhasePoint) or (len(guess) == 2
                                         and np.isscalar(guess[0])):
        x = guess if isinstance(guess, PhasePoint) else PhasePoint(*guess)
        if period is None:
            raise ValueError("period is required with a single-point guess")
    else:
        pts = list(guess)
        x = pts[0] if isinstance(pts[0], PhasePoint) else PhasePoint(*pts[0])
        period = period or len(pts)

    def residual(z):
        y, J = _iterate_with_jacobian(lam, table, z, period)
        du = _k._wrap_diff(y.u - table.wrap(z.u), table.u_period)
        dphi = y.phi - z.phi
        return np.array([du, dphi]), J

    G, J = residual(x)
    r = math.hypot(G[0], G[1])
    for _ in range(max_iter):
        if r < tol:
            orbit = [PhasePoint(float(x.u), float(x.phi))]
            for _ in range(period - 1):
                orbit.append(step(lam, table, orbit[-1]).state)
            return orbit
        try:
            delta = np.linalg.solve(J - np.eye(2), -G)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Newton system") from exc
        scale = 1.0
        while True:
            try:
                xn = PhasePoint(table.wrap(x.u + scale * delta[0]),
                                x.phi + scale * delta[1])
                Gn, Jn = residual(xn)
                rn = math.hypot(Gn[0], Gn[1])
            except (PinballError, ValueError):
                rn = math.inf
            if rn < r or scale < 1.0 / 1024.0:
                break
            scale *= 0.5
        if not math.isfinite(rn):
            raise NoConvergence(f"Newton step left the domain at residual {r:.3e}")
        x, G, J, r = xn, Gn, Jn, rn
    raise NoConvergence(f"no periodic orbit after {max_iter} iterations; "
                        f"residual {r:.3e}")


def period3_gap(lam: float, table: Table, n_theta: int = 400,
                n_phi: int = 400, sin_max: float = 0.999):
    """Exclusion test for period-3 orbits of an angle-parametrized table.

    Sweeps a grid over the full phase space and returns (gap, skipped)
    where gap is the smallest circle distance between a parameter value and
    its third image. A positive gap certifies, at grid resolution, that no
    period-3 orbit exists; a gap indistinguishable from zero is
    inconclusive. skipped counts grid cells whose short orbit left the
    domain.
    """
    lam = check_contraction(lam)
    if table.u_period != 2.0 * math.pi:
        raise ValueError("period3_gap expects an angle-parametrized table")
    return _k._period3_gap(*table._packed(), lam, n_theta, n_phi, sin_max)


def slap_square_min_derivative(table: Table, n_grid: int = 10_000) -> float:
    """Grid minimum of |(T0 o T0)'| in the arc-length chart.

    A value above 1 certifies (at grid resolution) uniform expansion of
    the second iterate of the slap map.
    """
    half = 0.5 * table.u_period
    return _k._slap_square_min_derivative(*table._packed(), n_grid,
                                          -half, half)


# ----------------------------------------------------------------------
# the cuspless table's critical orbit, by shooting
# ----------------------------------------------------------------------

def cuspless_shoot(lam: float, phi0: float, collisions: int = 4) -> float:
    """Arc position reached after a few collisions from the upper corner.

    The trajectory leaves the upper curvature discontinuity of the cuspless
    table (arc position -sqrt(3)/4) at signed angle phi0 from the wall
    normal and is followed for the given number of collisions; the arc
    position of the last one is returned. Domain exits raise.
    """
    lam = check_contraction(lam)
    table = cuspless_cardioid()
    u, phi = -_k.WALL_HALF, float(phi0)
    for _ in range(collisions):
        u, phi, eta, tau, side, K0, K1, g0, g1, status = _k._step(
            *table._packed(), lam, u, phi)
        if status != _k.OK:
            raise PinballError(f"shot left the domain ({_REASON[status]})")
    return u


def _golden_min(f, a: float, b: float, iters: int = 90):
    """Golden-section minimum of a unimodal scalar function on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _deepest_return(lam: float, phi_lo: float, phi_hi: float, coarse: int):
    """Smallest fourth-collision arc position over a window of launch angles."""
    phis = np.linspace(phi_lo, phi_hi, coarse)
    vals = np.full(coarse, np.inf)
    for i, p in enumerate(phis):
        try:
            vals[i] = cuspless_shoot(lam, float(p))
        except PinballError:
            pass
    i = int(np.argmin(vals))
    lo = phis[max(i - 1, 0)]
    hi = phis[min(i + 1, coarse - 1)]

    def f(p):
        try:
            return cuspless_shoot(lam, p)
        except PinballError:
            return math.inf
    return _golden_min(f, lo, hi)


def cuspless_critical_search(lam_lo: float = 0.05, lam_hi: float = 0.09,
                             phi_lo: float = -0.06, phi_hi: float = 0.0,
                             coarse: int = 121, lam_tol: float = 1e-7):
    """Locate the contraction at which the corner-to-corner orbit appears.

    For each contraction value the deepest fourth-collision return over the
    launch-angle window is found; the critical pair is where that extremum
    just touches the upper discontinuity. Returns (lam, phi) of the
    touching orbit, found by bisection between contractions whose deepest
    return lies on either side of the corner.
    """
    def overshoot(lam):
        phi, s4 = _deepest_return(lam, phi_lo, phi_hi, coarse)
        return s4 + _k.WALL_HALF, phi

    g_lo, _ = overshoot(lam_lo)
    g_hi, _ = overshoot(lam_hi)
    if not (g_lo > 0.0 > g_hi):
        raise NoConvergence("bracket does not straddle the corner touch")
    while lam_hi - lam_lo > lam_tol:
        mid = 0.5 * (lam_lo + lam_hi)
        g, _ = overshoot(mid)
        if g > 0.0:
            lam_lo = mid
        else:
            lam_hi = mid
    lam_star = 0.5 * (lam_lo + lam_hi)
    _, phi_star = overshoot(lam_star)
    return float(lam_star), float(phi_star)

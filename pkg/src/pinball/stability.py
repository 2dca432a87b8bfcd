"""Linear stability of orbits: flight derivatives, monodromy, closed forms.

The per-flight derivative is taken in the (arc length, signed angle) chart.
For a flight of length tau leaving a point of curvature K0 at angle phi0 and
arriving at a point of curvature K1 with incidence eta1, the derivative of
the map with contraction factor lam is

    D = - [[ A,                B              ],
           [ lam*(K1*A + K0),  lam*(K1*B + 1) ]],

    A = (tau*K0 + cos phi0)/cos eta1,   B = tau/cos eta1,

with det D = lam * cos phi0 / cos eta1. At lam = 1 this is the familiar
elastic billiard derivative. Monodromy matrices of period-p orbits are
products of p such factors and have determinant lam**p * prod(cos phi_i /
cos eta_{i+1}); for the symmetric bouncing orbits treated in closed form
below every phi_i equals eta_{i+1} and the determinant is exactly lam**p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .dynamics import PhasePoint, StepResult, _raise_for_status, check_contraction
from .errors import NotPeriodic
from .tables import Table


@dataclass(frozen=True)
class StabilityReport:
    """Monodromy matrix of a periodic orbit and its spectral data."""

    matrix: np.ndarray
    trace: float
    det: float
    eigenvalues: tuple
    classification: str


def eigenvalues_from_trace_det(tr: float, det: float) -> tuple:
    """Both eigenvalues of a real 2x2 matrix, as complex numbers."""
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        s = math.sqrt(disc)
        return (complex(0.5 * (tr + s)), complex(0.5 * (tr - s)))
    s = math.sqrt(-disc)
    return (complex(0.5 * tr, 0.5 * s), complex(0.5 * tr, -0.5 * s))


def _classify(tr: float, det: float, tol: float) -> str:
    disc = tr * tr - 4.0 * det
    if disc < 0.0:
        m = math.sqrt(det)
        if m < 1.0 - tol:
            return "attracting focus"
        if m > 1.0 + tol:
            return "repelling focus"
        return "elliptic"
    mu1, mu2 = eigenvalues_from_trace_det(tr, det)
    hi, lo = max(abs(mu1), abs(mu2)), min(abs(mu1), abs(mu2))
    if hi < 1.0 - tol:
        return "attracting node"
    if lo > 1.0 + tol:
        return "repelling node"
    if hi > 1.0 + tol and lo < 1.0 - tol:
        unstable = mu1 if abs(mu1) > abs(mu2) else mu2
        return "flip saddle" if unstable.real < 0.0 else "saddle"
    return "parabolic"


def flight_matrix(lam: float, tau: float, K0: float, K1: float,
                  cphi0: float, ceta1: float) -> np.ndarray:
    """The per-flight derivative from its scalar ingredients."""
    m00, m01, m10, m11 = _k._flight_matrix(lam, tau, K0, K1, cphi0, ceta1)
    return np.array([[m00, m01], [m10, m11]])


def flight_jacobian(lam: float, table: Table, x: PhasePoint):
    """Derivative of one step of the map at x, in the arc-length chart.

    Returns (J, result) where result is the StepResult of the flight, so
    callers can chain along an orbit without recomputing collisions.
    """
    lam = check_contraction(lam)
    u1, phi1, eta, tau, side, K0, K1, g0, g1, status = _k._step(
        *table._packed(), lam, table.wrap(x.u), x.phi)
    _raise_for_status(status, "flight_jacobian")
    J = flight_matrix(lam, tau, K0, K1, math.cos(x.phi), math.cos(eta))
    return J, StepResult(PhasePoint(u1, phi1), eta, tau, side)


def orbit_monodromy(lam: float, table: Table, points, tol: float = 1e-10,
                    class_tol: float = 1e-9) -> StabilityReport:
    """Monodromy of a periodic orbit given as its sequence of phase points.

    The points must be consecutive states of the map; each one is stepped
    and checked against its successor to tolerance tol before the flight
    derivatives are multiplied up. The matrix is based at points[0].
    """
    lam = check_contraction(lam)
    pts = [x if isinstance(x, PhasePoint) else PhasePoint(*x) for x in points]
    if not pts:
        raise ValueError("need at least one orbit point")
    M = np.eye(2)
    for i, x in enumerate(pts):
        J, res = flight_jacobian(lam, table, x)
        nxt = pts[(i + 1) % len(pts)]
        du = abs(_k._wrap_diff(res.state.u - table.wrap(nxt.u), table.u_period))
        dphi = abs(res.state.phi - nxt.phi)
        if du > tol or dphi > tol:
            raise NotPeriodic(
                f"point {i} maps ({du:.3e}, {dphi:.3e}) away from point "
                f"{(i + 1) % len(pts)}; not a closed orbit at tol={tol:.1e}")
        M = J @ M
    tr = float(np.trace(M))
    det = float(np.linalg.det(M))
    return StabilityReport(M, tr, det, eigenvalues_from_trace_det(tr, det),
                           _classify(tr, det, class_tol))


# ----------------------------------------------------------------------
# closed forms for the symmetric two-bounce orbits
# ----------------------------------------------------------------------

def ellipse_minor_axis_monodromy(lam: float, a: float) -> np.ndarray:
    """Monodromy of the orbit bouncing along the minor axis of the ellipse.

    Based at either endpoint (0, +-1); both flights have length 2 and meet
    the boundary head on at curvature -1/a**2.
    """
    a2 = a * a
    a4 = a2 * a2
    lp = 1.0 + lam
    return np.array([
        [(4.0 * lp * (1.0 - a2) + a4) / a4, 2.0 * lp * (a2 - 2.0) / a2],
        [-2.0 * lam * lp * (a2 - 1.0) * (a2 - 2.0) / (a4 * a2),
         lam * (4.0 * (1.0 - a2) * lp + lam * a4) / a4],
    ])


def ellipse_minor_axis_eigs(lam: float, a: float) -> tuple:
    a4 = a ** 4
    p1 = 4.0 * (1.0 - a * a) * (1.0 + lam) ** 2 + a4 * (1.0 + lam * lam)
    return eigenvalues_from_trace_det(p1 / a4, lam * lam)


def ellipse_focus_threshold(a: float) -> float:
    """Contraction below which the minor-axis eigenvalues become complex.

    For a = sqrt(2) the off-diagonal coupling vanishes identically and the
    eigenvalues stay real for every contraction; 0 is returned there.
    """
    a2 = a * a
    if abs(a2 - 2.0) < 1e-12:
        return 0.0
    return (a2 * a2 + 4.0 * a2 - 4.0 - 4.0 * a2 * math.sqrt(a2 - 1.0)) / (a2 - 2.0) ** 2


def cuspless_period2_monodromy(lam: float) -> np.ndarray:
    """Monodromy of the horizontal orbit of the cuspless table.

    Based at the rightmost point of the arc: the wall flight is applied
    first, then the arc flight. Flights have length 9/4, the arc curvature
    at the rightmost point is -3/4 and the wall is flat.
    """
    lp = 1.0 + lam
    return np.array([
        [-4.0 * (27.0 * lam + 11.0), 144.0 * lp],
        [33.0 * lam * lp, -4.0 * lam * (11.0 * lam + 27.0)],
    ]) / 64.0


def cuspless_period2_eigs(lam: float) -> tuple:
    tr = -(11.0 * lam * lam + 54.0 * lam + 11.0) / 16.0
    return eigenvalues_from_trace_det(tr, lam * lam)


def cuspless_flip_lambda() -> float:
    """Contraction at which the horizontal orbit loses stability.

    The orbit attracts below this value; above it one eigenvalue drops
    through -1 and the orbit is a flip saddle. The crossing happens exactly
    at (27 - 8*sqrt(11))/5.
    """
    return (27.0 - 8.0 * math.sqrt(11.0)) / 5.0


def egg_period2_trace(lam: float, alpha: float) -> float:
    """Trace of the diameter orbit joining a vertex to the opposite flat point."""
    a2 = alpha * alpha
    return ((1.0 + lam * lam) * (a2 * a2 - 326.0 * a2 + 1.0)
            - 648.0 * lam * a2) / (1.0 - a2) ** 2


def egg_period2_eigs(lam: float, alpha: float) -> tuple:
    return eigenvalues_from_trace_det(egg_period2_trace(lam, alpha), lam * lam)


def egg_flip_alpha(lam: float) -> float:
    """Perturbation at which the diameter orbit's eigenvalue crosses -1.

    For alpha above this value the orbit is a flip saddle for the given
    contraction.
    """
    l2 = lam * lam
    root = math.sqrt(83.0 + 162.0 * lam + 83.0 * l2)
    num = 82.0 + 162.0 * lam + 82.0 * l2 - 9.0 * (1.0 + lam) * root
    return math.sqrt(num / (1.0 + l2))


def egg_focus_alpha(lam: float) -> float:
    """Perturbation at which the diameter orbit's eigenvalues become complex."""
    if lam >= 1.0:
        raise ValueError("the focus boundary degenerates at contraction 1")
    root = math.sqrt(82.0 + 160.0 * lam + 82.0 * lam * lam)
    return (9.0 * (1.0 + lam) - root) / (lam - 1.0)

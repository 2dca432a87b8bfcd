"""The reflection law and the collision-to-collision pinball map.

Phase space is the set of outgoing states (u, phi): u is the boundary
parameter of the latest collision and phi the signed angle from the inward
normal to the outgoing velocity, positive toward the tangent of increasing
u, |phi| < pi/2.

At a collision with incidence angle eta (the unsigned angle between the
incoming velocity and the reversed normal) the outgoing angle is

    phi = contraction * eta,

on the same tangential side the trajectory was already moving, so
contraction = 1 is the elastic billiard and contraction = 0 the slap map
that leaves every collision along the normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as _k
from .errors import CuspHit, PinballError, TangentHit
from .tables import Frame, Table

_STATUS_REASON = {_k.OK: "", _k.HIT_CUSP: "cusp", _k.HIT_TANGENT: "tangent",
                  _k.NO_ROOT: "no_root"}


def check_contraction(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("contraction factor must lie in [0, 1]")
    return lam


@dataclass(frozen=True)
class PhasePoint:
    """Outgoing state of the pinball map."""

    u: float
    phi: float

    def __post_init__(self):
        if not abs(self.phi) < 0.5 * math.pi:
            raise ValueError("outgoing angle must satisfy |phi| < pi/2")


class StepResult(NamedTuple):
    state: PhasePoint     # outgoing state at the new collision
    eta: float            # unsigned incidence angle there
    flight_time: float    # chord length of the flight
    side: float           # +-1, tangential side of the motion at arrival


@dataclass
class Trajectory:
    """A finite orbit segment, one entry per collision."""

    u: np.ndarray
    phi: np.ndarray          # signed outgoing angles
    eta: np.ndarray          # unsigned incidence angles
    flight_time: np.ndarray
    side: np.ndarray
    terminated: bool = False
    reason: str = ""

    def __len__(self) -> int:
        return self.u.size

    @property
    def points(self) -> list[PhasePoint]:
        return [PhasePoint(float(a), float(b)) for a, b in zip(self.u, self.phi)]


def _raise_for_status(status: int, where: str):
    if status == _k.HIT_CUSP:
        raise CuspHit(f"{where}: trajectory reached the cusp")
    if status == _k.HIT_TANGENT:
        raise TangentHit(f"{where}: trajectory arrived tangentially")
    if status == _k.NO_ROOT:
        raise PinballError(f"{where}: no boundary crossing found")


def reflect(lam: float, frame: Frame, v: np.ndarray):
    """Apply the contracting reflection law at one collision.

    v is the unit incoming velocity at the boundary point described by
    frame. Returns (v_out, eta, phi, side) with phi = lam * eta unsigned
    and side = +-1 the tangential component's sign.
    """
    ceta = -float(np.dot(v, frame.normal))
    if ceta < _k.EPS_TANGENT:
        raise TangentHit("incoming velocity is tangent to the boundary")
    seta = float(np.dot(v, frame.tangent))
    eta = math.atan2(abs(seta), ceta)
    side = 1.0 if seta >= 0.0 else -1.0
    phi = lam * eta
    v_out = math.cos(phi) * frame.normal + side * math.sin(phi) * frame.tangent
    return v_out, eta, phi, side


def step(lam: float, table: Table, x: PhasePoint) -> StepResult:
    """One application of the pinball map."""
    lam = check_contraction(lam)
    u1, phi1, eta, tau, side, K0, K1, g0, g1, status = _k._step(
        *table._packed(), lam, table.wrap(x.u), x.phi)
    _raise_for_status(status, "step")
    return StepResult(PhasePoint(u1, phi1), eta, tau, side)


def trajectory(lam: float, table: Table, x0: PhasePoint, n: int,
               discard: int = 0) -> Trajectory:
    """Iterate the map n times after a discarded transient.

    The returned segment is truncated, with terminated=True and a reason
    string, if the orbit reaches the cusp or a tangency.
    """
    lam = check_contraction(lam)
    u = np.empty(n)
    phi = np.empty(n)
    eta = np.empty(n)
    tau = np.empty(n)
    side = np.empty(n)
    karr = np.empty(n)
    garr = np.empty(n)
    count, status = _k._trajectory(*table._packed(), lam, table.wrap(x0.u),
                                   x0.phi, discard, u, phi, eta, tau, side,
                                   karr, garr)
    sl = slice(0, count)
    return Trajectory(u[sl].copy(), phi[sl].copy(), eta[sl].copy(),
                      tau[sl].copy(), side[sl].copy(),
                      terminated=status != _k.OK,
                      reason=_STATUS_REASON[status])


def slap_map(table: Table, u: float) -> float:
    """The contraction-zero map on the boundary parameter alone."""
    u1, phi1, eta, tau, side, K0, K1, g0, g1, status = _k._step(
        *table._packed(), 0.0, table.wrap(u), 0.0)
    _raise_for_status(status, "slap_map")
    return u1


def slap_derivative(table: Table, u: float) -> float:
    """Derivative of the slap map in the arc-length chart, d s1 / d s0."""
    u1, phi1, eta, tau, side, K0, K1, g0, g1, status = _k._step(
        *table._packed(), 0.0, table.wrap(u), 0.0)
    _raise_for_status(status, "slap_derivative")
    return -(tau * K0 + 1.0) / math.cos(eta)

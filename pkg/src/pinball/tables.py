"""Billiard table geometries.

All tables are closed convex-or-mildly-nonconvex curves, star shaped about
the origin. A table is addressed by a scalar boundary parameter u:

* circle, ellipse, three-pointed egg: the usual angular parameter;
* cardioid: the polar angle, with the cusp at u = pi (excluded);
* cuspless cardioid: arc length, increasing counterclockwise with u = -y on
  the flat wall, so the wall is |u| <= sqrt(3)/4, the upper curvature
  discontinuity sits at u = -sqrt(3)/4 and the rightmost point of the arc
  is u = 9*sqrt(3)/4.

Curvature is reported with the sign convention that focusing arcs are
negative, so every table here has K <= 0 with equality only on the flat
wall of the cuspless table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as _k
from .errors import CuspHit, CuspPoint, PinballError, TangentHit, Unsupported

ARC_HALF = _k.ARC_HALF
WALL_HALF = _k.WALL_HALF

_MARGIN = 1.05  # safety factor on the sweep solver's Lipschitz bound


class Frame(NamedTuple):
    """Boundary data at one parameter value."""

    point: np.ndarray    # position on the boundary
    normal: np.ndarray   # inward unit normal
    tangent: np.ndarray  # unit tangent, direction of increasing parameter
    curvature: float     # signed curvature, <= 0 on focusing arcs
    metric: float        # |d point / d u|, converts du to arc length


@dataclass(frozen=True)
class Table:
    """One billiard table; build instances through the factory functions."""

    name: str
    kind: int
    param: float
    smax: float
    rmax: float
    u_period: float

    def _packed(self):
        return self.kind, self.param, self.smax, self.rmax

    def wrap(self, u: float) -> float:
        """Canonical representative of the boundary parameter."""
        half = 0.5 * self.u_period
        w = u - self.u_period * math.floor((u + half) / self.u_period)
        if self.kind == _k.CUSPLESS and w == -half:
            w = half
        return w

    def _check_cusp(self, u: float) -> None:
        if self.kind == _k.CARDIOID and math.pi - abs(self.wrap(u)) < _k.EPS_CUSP:
            raise CuspPoint("the cardioid boundary frame is undefined at the cusp")

    def boundary_frame(self, u: float) -> Frame:
        self._check_cusp(u)
        qx, qy, nx, ny, tx, ty, K, g = _k._frame(self.kind, self.param, self.wrap(u))
        return Frame(np.array([qx, qy]), np.array([nx, ny]), np.array([tx, ty]), K, g)

    def boundary_point(self, u: float) -> np.ndarray:
        self._check_cusp(u)
        qx, qy, *_ = _k._frame(self.kind, self.param, self.wrap(u))
        return np.array([qx, qy])

    def curvature(self, u: float) -> float:
        return self.boundary_frame(u).curvature

    def metric(self, u: float) -> float:
        return self.boundary_frame(u).metric

    def arc_length(self, u: float) -> float:
        """Arc length from the reference point, where a closed form exists."""
        w = self.wrap(u)
        if self.kind in (_k.CIRCLE, _k.CUSPLESS):
            return w
        if self.kind == _k.CARDIOID:
            return 4.0 * math.sin(0.5 * w)
        raise Unsupported(f"no closed-form arc length for the {self.name} table")

    def param_from_arc(self, s: float) -> float:
        if self.kind in (_k.CIRCLE, _k.CUSPLESS):
            return self.wrap(s)
        if self.kind == _k.CARDIOID:
            if abs(s) >= 4.0:
                raise CuspPoint("arc length +-4 is the cardioid cusp")
            return 2.0 * math.asin(0.25 * s)
        raise Unsupported(f"no closed-form arc length for the {self.name} table")

    def coordinate(self, u: float) -> float:
        """Plotting coordinate: arc length where closed form, else parameter."""
        if self.kind in (_k.CIRCLE, _k.CARDIOID, _k.CUSPLESS):
            return self.arc_length(u)
        return self.wrap(u)

    def param_from_point(self, x: float, y: float) -> float:
        """Boundary parameter of a point assumed to lie on the boundary."""
        return _k._param_from_point(self.kind, self.param, x, y)

    def contains(self, x: float, y: float) -> bool:
        """True if the point lies strictly inside the table."""
        r = math.hypot(x, y)
        return r < _k._radial(self.kind, self.param, math.atan2(y, x))

    def next_collision(self, q: np.ndarray, v: np.ndarray):
        """First boundary hit of the ray q + tau*v, tau > 0.

        v is normalized internally. Returns (tau, point, u). Raises CuspHit
        or TangentHit when the flight ends at the cardioid cusp or at a
        tangential collision, and PinballError if no crossing is found
        (which means the ray never entered the table).
        """
        speed = math.hypot(v[0], v[1])
        if speed == 0.0:
            raise ValueError("direction must be a nonzero vector")
        tau, x, y, u, status = _k._next_collision(
            self.kind, self.param, self.smax, self.rmax,
            float(q[0]), float(q[1]), float(v[0]) / speed, float(v[1]) / speed)
        if status == _k.HIT_CUSP:
            raise CuspHit(f"flight from {q!r} ends at the cusp")
        if status == _k.HIT_TANGENT:
            raise TangentHit(f"flight from {q!r} arrives tangentially at u={u:.6g}")
        if status == _k.NO_ROOT:
            raise PinballError("ray does not cross the boundary; "
                               "is the start point inside the table?")
        return tau / speed, np.array([x, y]), u


def circle() -> Table:
    """Unit circle."""
    return Table("circle", _k.CIRCLE, 0.0, _MARGIN * 1.0, 1.0, 2.0 * math.pi)


def ellipse(a: float) -> Table:
    """Ellipse with horizontal semi-axis a >= 1 and vertical semi-axis 1."""
    if a < 1.0:
        raise ValueError("semi-axis ratio a must be >= 1")
    bound = a + 0.5 * a * (a * a - 1.0)
    return Table("ellipse", _k.ELLIPSE, float(a), _MARGIN * bound, float(a),
                 2.0 * math.pi)


def cardioid() -> Table:
    """Cardioid rho = 1 + cos(theta), cusp at theta = pi."""
    return Table("cardioid", _k.CARDIOID, 0.0, _MARGIN * 3.0, 2.0, 2.0 * math.pi)


def cuspless_cardioid() -> Table:
    """Central 2/3 of the cardioid closed by a flat vertical wall."""
    return Table("cuspless", _k.CUSPLESS, 0.0, _MARGIN * 3.0, 2.0,
                 2.0 * ARC_HALF)


def three_pointed_egg(alpha: float) -> Table:
    """Three-fold perturbed circle rho = 1 + alpha*cos(3*theta), 0 <= alpha <= 0.1."""
    if not 0.0 <= alpha <= 0.1:
        raise ValueError("perturbation alpha must lie in [0, 0.1]")
    return Table("egg", _k.EGG, float(alpha), _MARGIN * (1.0 + 4.0 * alpha),
                 1.0 + alpha, 2.0 * math.pi)


def make_table(name: str, a: float = 2.0, alpha: float = 0.08) -> Table:
    """Build a table by name; a and alpha apply where relevant."""
    if name == "circle":
        return circle()
    if name == "ellipse":
        return ellipse(a)
    if name == "cardioid":
        return cardioid()
    if name == "cuspless":
        return cuspless_cardioid()
    if name == "egg":
        return three_pointed_egg(alpha)
    raise ValueError(f"unknown table {name!r}; expected one of "
                     "circle, ellipse, cardioid, cuspless, egg")

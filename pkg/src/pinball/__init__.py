"""Dissipative pinball billiards.

Trajectories, linear stability and bifurcation scans for billiards whose
reflection law contracts the outgoing angle toward the normal by a fixed
factor. Contraction 1 is the elastic billiard, contraction 0 the slap map.
"""

__version__ = "0.1.0"

from .errors import (CuspHit, CuspPoint, NoConvergence, NotPeriodic,
                     PinballError, TangentHit, Unsupported)
from .tables import (Table, cardioid, circle, cuspless_cardioid, ellipse,
                     make_table, three_pointed_egg)
from .dynamics import (PhasePoint, StepResult, Trajectory, reflect,
                       slap_derivative, slap_map, step, trajectory)
from .stability import (StabilityReport, cuspless_flip_lambda,
                        cuspless_period2_eigs, cuspless_period2_monodromy,
                        egg_flip_alpha, egg_focus_alpha, egg_period2_eigs,
                        egg_period2_trace, ellipse_focus_threshold,
                        ellipse_minor_axis_eigs, ellipse_minor_axis_monodromy,
                        flight_jacobian, flight_matrix, orbit_monodromy)
from .analysis import (BasinResult, LyapunovEstimate, attractor_period,
                       classify_basin, cuspless_critical_search,
                       cuspless_shoot, find_periodic_orbit, lyapunov,
                       period3_gap, random_phase_points, sample_attractor,
                       slap_square_min_derivative)

__all__ = [name for name in dir() if not name.startswith("_")]

"""Parameter sweeps and their CSV emission.

Sweeps are deterministic: every initial condition is drawn from a
counter-based generator keyed by (seed, stream), where the stream index is
a function of the sweep cell alone. Threads only change who computes a
cell, never its value or its place in the output.

CSV layout is RFC-4180-style with a '#'-prefixed metadata block in front,
one 'key: value' pair per line. No timestamps or hostnames are written, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from . import _kernels as _k
from .analysis import (EPS_CHAOS, attractor_period, lyapunov,
                       random_phase_points)
from .dynamics import PhasePoint, check_contraction, trajectory
from .errors import NoConvergence
from .tables import Table

_HIST_BINS = 360  # polar-angle occupancy resolution for crisis detection


@dataclass(frozen=True)
class SweepSpec:
    """Shared knobs of a parameter sweep."""

    lam_values: np.ndarray
    n_ics: int = 100
    n: int = 100_000
    discard: int = 5_000
    seed: int = 0

    def __post_init__(self):
        vals = np.asarray(self.lam_values, dtype=float)
        if vals.size == 0:
            raise ValueError("empty contraction grid")
        if vals.size > 1 and not np.all(np.diff(vals) > 0.0):
            raise ValueError("contraction grid must be strictly increasing")
        for v in (vals[0], vals[-1]):
            check_contraction(v)
        if self.n_ics <= 0 or self.n <= 0 or self.discard < 0:
            raise ValueError("counts must be positive")
        object.__setattr__(self, "lam_values", vals)


# ----------------------------------------------------------------------
# bifurcation sweep
# ----------------------------------------------------------------------

def _scan_one_lambda(table, lam, stream, spec, keep, pmax, tol):
    """Rows (lam, coord, sin_phi, period, nu_plus) for one sweep column."""
    us, phis = random_phase_points(table, spec.n_ics, spec.seed, stream)
    rows = []
    escaped = 0
    for j in range(spec.n_ics):
        nu1, nu2, accd, used, status, ue, pe = _k._lyapunov_full(
            *table._packed(), lam, table.wrap(float(us[j])), float(phis[j]),
            spec.discard, spec.n)
        if used < spec.n:
            escaped += 1
            continue
        x_end = PhasePoint(ue, pe)
        per, xa = attractor_period(lam, table, x_end, discard=0,
                                   pmax=pmax, tol=tol)
        if per < 0:
            escaped += 1
            continue
        m = min(per, keep) if per > 0 else keep
        seg = trajectory(lam, table, xa if xa is not None else x_end, m)
        for u, phi in zip(seg.u, seg.phi):
            rows.append((lam, table.coordinate(float(u)),
                         math.sin(float(phi)), per, nu1))
        if seg.terminated and len(seg) == 0:
            escaped += 1
    return rows, escaped


def bifurcation_scan(table: Table, spec: SweepSpec, keep: int = 40,
                     pmax: int = 64, period_tol: float = 1e-6,
                     threads: int = 1):
    """Attractor fingerprints along a contraction sweep.

    For each contraction value, n_ics random initial conditions are relaxed
    onto their attractor; each contributes its detected period (0 if
    aperiodic), its top Lyapunov exponent and up to keep sample points.
    Returns (rows, n_escaped, n_total) where rows are
    (lambda, coord, sin_phi, period, nu_plus).
    """
    jobs = list(enumerate(spec.lam_values))

    def run(job):
        i, lam = job
        return _scan_one_lambda(table, float(lam), i, spec, keep, pmax,
                                period_tol)

    if threads <= 1:
        results = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    rows = []
    escaped = 0
    for r, e in results:
        rows.extend(r)
        escaped += e
    return rows, escaped, len(spec.lam_values) * spec.n_ics


# ----------------------------------------------------------------------
# cascade thresholds (period doublings, chaos onset)
# ----------------------------------------------------------------------

def _attractor_state(table, lam, x_seed, discard, pmax, tol):
    per, xa = attractor_period(lam, table, x_seed, discard=discard,
                               pmax=pmax, tol=tol)
    return per, (xa if xa is not None else x_seed)


def locate_period_doubling(table: Table, period_from: int, lam_lo: float,
                           lam_hi: float, x_seed: PhasePoint,
                           lam_tol: float = 2e-4, discard: int = 120_000,
                           pmax: int = 64, tol: float = 1e-6) -> float:
    """Bisect for the contraction where the attractor period leaves period_from.

    The attractor is followed by continuation: each evaluation reuses the
    end state of the previous one as its initial condition. The bracket
    must have period period_from at lam_lo and a larger one (or an
    aperiodic attractor) at lam_hi.
    """
    per_lo, x = _attractor_state(table, lam_lo, x_seed, discard, pmax, tol)
    if per_lo != period_from:
        raise NoConvergence(
            f"expected period {period_from} at {lam_lo}, found {per_lo}")
    per_hi, _ = _attractor_state(table, lam_hi, x, discard, pmax, tol)
    if 0 < per_hi <= period_from:
        raise NoConvergence(
            f"expected period above {period_from} at {lam_hi}, found {per_hi}")
    while lam_hi - lam_lo > lam_tol:
        mid = 0.5 * (lam_lo + lam_hi)
        per, xm = _attractor_state(table, mid, x, discard, pmax, tol)
        if per == period_from:
            lam_lo, x = mid, xm
        else:
            lam_hi = mid
    return 0.5 * (lam_lo + lam_hi)


def locate_chaos_onset(table: Table, lam_lo: float, lam_hi: float,
                       x_seed: PhasePoint, step: float = 5e-4,
                       lam_tol: float = 2e-4, n: int = 300_000,
                       discard: int = 100_000) -> float:
    """First contraction in [lam_lo, lam_hi] whose attractor has nu_plus > 0.

    Walks a coarse grid upward with continuation, then bisects between the
    last negative and first positive exponent.
    """
    x = x_seed
    prev = lam_lo
    found = None
    lam = lam_lo
    while lam <= lam_hi + 1e-12:
        est = lyapunov(lam, table, x, n=n, discard=discard)
        if est.n_used:
            # reuse a state already on the attractor for the next value
            per, xa = attractor_period(lam, table, x, discard=discard)
            if xa is not None:
                x = xa
        if est.n_used and est.nu_plus > 0.0:
            found = lam
            break
        prev = lam
        lam = lam + step
    if found is None:
        raise NoConvergence("no positive exponent found in the bracket")
    lo, hi = prev, found
    while hi - lo > lam_tol:
        mid = 0.5 * (lo + hi)
        est = lyapunov(mid, table, x, n=n, discard=discard)
        if est.n_used and est.nu_plus > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


# ----------------------------------------------------------------------
# crises of the egg's chaotic attractor
# ----------------------------------------------------------------------

def _chaotic_state(table, lam, seed, stream, n, discard, tries=16):
    """Some state on a chaotic attractor at this contraction, or None."""
    us, phis = random_phase_points(table, tries, seed, stream)
    for j in range(tries):
        x0 = PhasePoint(float(us[j]), float(phis[j]))
        nu1, nu2, accd, used, status, ue, pe = _k._lyapunov_full(
            *table._packed(), lam, table.wrap(x0.u), x0.phi, discard, n)
        if used == n and nu1 > EPS_CHAOS:
            return PhasePoint(ue, pe)
    return None


def symmetry_components(lam: float, table: Table, x_chaotic: PhasePoint,
                        n: int = 200_000, discard: int = 50_000,
                        bins: int = _HIST_BINS, overlap: float = 0.5) -> int:
    """1 if the sampled attractor fills all three symmetry sectors, else 3.

    The polar-angle occupancy histogram of one long trajectory is compared
    with its rotation by a third of a turn; a Jaccard overlap of the
    supports above the threshold means the attractor is (statistically)
    invariant under the three-fold symmetry, i.e. the symmetric pieces have
    merged.
    """
    counts = np.zeros(bins, np.int64)
    used, status = _k._theta_histogram(*table._packed(), lam,
                                       table.wrap(x_chaotic.u),
                                       x_chaotic.phi, discard, n, bins,
                                       counts)
    if used == 0:
        raise NoConvergence("trajectory left the domain while sampling")
    support = counts > 0
    rotated = np.roll(support, bins // 3)
    inter = np.logical_and(support, rotated).sum()
    union = np.logical_or(support, rotated).sum()
    return 1 if union and inter / union > overlap else 3


def locate_merging_crisis(table: Table, lam_lo: float = 0.43,
                          lam_hi: float = 0.46, seed: int = 0,
                          lam_tol: float = 1e-3, n: int = 200_000,
                          discard: int = 100_000) -> float:
    """Bisect for the contraction where the three chaotic pieces merge.

    Periodic windows punched into the chaotic region have no chaotic
    attractor to examine; when a probe lands in one, nearby contractions
    within the current bracket are tried instead.
    """
    stream = 0

    def components(lam):
        nonlocal stream
        x = _chaotic_state(table, lam, seed, stream, 40_000, discard)
        stream += 1
        if x is None:
            return None
        return symmetry_components(lam, table, x, n=n, discard=discard)

    c = components(lam_lo)
    if c != 3:
        raise NoConvergence(f"need three separate pieces at {lam_lo}, got {c}")
    c = components(lam_hi)
    if c != 1:
        raise NoConvergence(f"need a merged attractor at {lam_hi}, got {c}")
    while lam_hi - lam_lo > lam_tol:
        width = lam_hi - lam_lo
        probe = None
        for frac in (0.5, 0.4, 0.6, 0.28, 0.72):
            lam = lam_lo + frac * width
            c = components(lam)
            if c is not None:
                probe = (lam, c)
                break
        if probe is None:
            raise NoConvergence(
                f"no chaotic orbit anywhere inside ({lam_lo}, {lam_hi}); "
                "periodic window wider than the remaining bracket")
        lam, c = probe
        if c == 1:
            lam_hi = lam
        else:
            lam_lo = lam
    return 0.5 * (lam_lo + lam_hi)


def locate_vanishing_crisis(table: Table, lam_lo: float = 0.6,
                            lam_hi: float = 0.7, n_ics: int = 10,
                            seed: int = 0, lam_tol: float = 2e-3,
                            n: int = 60_000,
                            discard: int = 200_000) -> float:
    """Bisect for the contraction where the chaotic attractor disappears.

    Above the crisis every orbit eventually settles on a periodic
    attractor; chaotic transients near the crisis are long, hence the
    generous discard.
    """
    def any_chaotic(lam, stream):
        return _chaotic_state(table, lam, seed, stream, n,
                              discard, tries=n_ics) is not None

    if not any_chaotic(lam_lo, 0):
        raise NoConvergence(f"no chaotic attractor at {lam_lo}")
    if any_chaotic(lam_hi, 1):
        raise NoConvergence(f"chaotic attractor still present at {lam_hi}")
    stream = 2
    while lam_hi - lam_lo > lam_tol:
        mid = 0.5 * (lam_lo + lam_hi)
        if any_chaotic(mid, stream):
            lam_lo = mid
        else:
            lam_hi = mid
        stream += 1
    return 0.5 * (lam_lo + lam_hi)


def chaotic_fraction(lam: float, table: Table, n_ics: int, seed: int,
                     stream: int = 0, n: int = 40_000,
                     discard: int = 20_000) -> float:
    """Fraction of random initial conditions whose orbit is chaotic."""
    us, phis = random_phase_points(table, n_ics, seed, stream)
    hits = 0
    for j in range(n_ics):
        est = lyapunov(lam, table, PhasePoint(float(us[j]), float(phis[j])),
                       n=n, discard=discard)
        if est.n_used and est.nu_plus > EPS_CHAOS:
            hits += 1
    return hits / n_ics


def crisis_scan(table: Table, spec: SweepSpec, threads: int = 1):
    """Rows (lambda, component_count, chaotic_fraction) along a sweep.

    component_count is 0 when no chaotic orbit is found, otherwise 3 or 1
    for separate or merged symmetric attractor pieces.
    """
    jobs = list(enumerate(spec.lam_values))

    def run(job):
        i, lam = job
        lam = float(lam)
        frac = chaotic_fraction(lam, table, spec.n_ics, spec.seed,
                                stream=2 * i, n=spec.n,
                                discard=spec.discard)
        if frac == 0.0:
            return (lam, 0, frac)
        x = _chaotic_state(table, lam, spec.seed, 2 * i + 1, spec.n,
                           spec.discard)
        if x is None:
            return (lam, 0, frac)
        comp = symmetry_components(lam, table, x, n=max(spec.n, 100_000),
                                   discard=spec.discard)
        return (lam, comp, frac)

    if threads <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, jobs))


# ----------------------------------------------------------------------
# (alpha, lambda) phase diagram
# ----------------------------------------------------------------------

def phase_diagram(make_egg, alpha_values, spec: SweepSpec,
                  eps_chaos: float = EPS_CHAOS, threads: int = 1,
                  early_exit: bool = False):
    """Rows (alpha, lambda, any_chaotic, max_nu_plus) over a parameter grid.

    make_egg maps alpha to a Table. Cells at contraction 1 with alpha > 0
    are flagged chaotic by rule (the elastic map always retains chaotic
    layers there); the reported exponent is still the measured one. With
    early_exit the remaining initial conditions of a cell are skipped once
    one chaotic orbit is found, and max_nu_plus covers only the evaluated
    ones.
    """
    alpha_values = np.asarray(alpha_values, dtype=float)
    cells = [(i, j) for i in range(alpha_values.size)
             for j in range(spec.lam_values.size)]

    def run(cell):
        i, j = cell
        alpha = float(alpha_values[i])
        lam = float(spec.lam_values[j])
        table = make_egg(alpha)
        stream = i * spec.lam_values.size + j
        us, phis = random_phase_points(table, spec.n_ics, spec.seed, stream)
        best = -math.inf
        for m in range(spec.n_ics):
            est = lyapunov(lam, table, PhasePoint(float(us[m]),
                                                  float(phis[m])),
                           n=spec.n, discard=spec.discard)
            if est.n_used:
                best = max(best, est.nu_plus)
            if early_exit and best > eps_chaos:
                break
        flag = best > eps_chaos or (lam >= 1.0 and alpha > 0.0)
        return (alpha, lam, int(flag), best)

    if threads <= 1:
        return [run(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, cells))


def hamiltonian_portrait(table: Table, n_ics: int = 40, n: int = 2_000,
                         seed: int = 0):
    """Rows (ic, coord, sin_phi) of elastic trajectories, for portraits."""
    us, phis = random_phase_points(table, n_ics, seed)
    rows = []
    for j in range(n_ics):
        seg = trajectory(1.0, table, PhasePoint(float(us[j]), float(phis[j])),
                         n, discard=0)
        for u, phi in zip(seg.u, seg.phi):
            rows.append((j, table.coordinate(float(u)), math.sin(float(phi))))
    return rows


# ----------------------------------------------------------------------
# CSV emission
# ----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def base_metadata(table: Table | None = None, **extra) -> dict:
    """The standard CSV metadata block; extra pairs append in given order."""
    meta = {
        "version": __version__,
        "rng": "philox counter-based, key=(seed, stream)",
        "eps_chaos": repr(EPS_CHAOS),
        "eps_cusp": repr(_k.EPS_CUSP),
        "eps_tangent": repr(_k.EPS_TANGENT),
    }
    if table is not None:
        meta["table"] = table.name
        if table.name == "ellipse":
            meta["a"] = repr(table.param)
        elif table.name == "egg":
            meta["alpha"] = repr(table.param)
        if table.name in ("circle", "cardioid", "cuspless"):
            meta["coord"] = "arc length"
        else:
            meta["coord"] = "boundary angle"
        if table.name == "cuspless":
            meta["coord_note"] = ("u=-y on the wall, counterclockwise; "
                                  "upper discontinuity at -sqrt(3)/4")
    meta.update({k: _fmt(v) for k, v in extra.items()})
    return meta


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence],
              meta: dict | None = None) -> None:
    """Write rows with a '#' metadata block and a header line."""
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])

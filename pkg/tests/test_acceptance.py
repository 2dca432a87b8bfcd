"""Acceptance gate: the quantitative claims this package is built around.

Each test covers one criterion, ends with a single pass/fail line (echoed
in the terminal summary), and carries a wall-clock budget. Tolerances are
pinned; loosening them is a regression, not a fix.
"""
import math
import time

import numpy as np
import pytest

import conftest
import oracle
from pinball import analysis, scan, tables
from pinball.cli import main as cli_main
from pinball.dynamics import PhasePoint, step, trajectory
from pinball.errors import PinballError
from pinball.stability import (cuspless_flip_lambda, cuspless_period2_eigs,
                               cuspless_period2_monodromy, egg_flip_alpha,
                               egg_period2_trace, ellipse_focus_threshold,
                               ellipse_minor_axis_monodromy, flight_jacobian,
                               orbit_monodromy)

ROOT3 = math.sqrt(3.0)
WALL_HALF = ROOT3 / 4.0
ARC_HALF = 9.0 * ROOT3 / 4.0


def _record(num: int, desc: str, failures: list, t0: float, budget: float):
    elapsed = time.perf_counter() - t0
    if elapsed > budget:
        failures.append(f"took {elapsed:.1f}s, budget {budget:.0f}s")
    verdict = "PASS" if not failures else "FAIL"
    line = f"criterion {num} {verdict} ({desc}) [{elapsed:.1f}s]"
    conftest.ACCEPTANCE_LOG.append(line)
    print(line)
    assert not failures, f"criterion {num}: " + "; ".join(failures)


def _check(failures, ok, msg):
    if not ok:
        failures.append(msg)


def test_criterion_1_closed_form_thresholds():
    t0 = time.perf_counter()
    bad = []
    lam_c = cuspless_flip_lambda()
    _check(bad, abs(lam_c - (27.0 - 8.0 * math.sqrt(11.0)) / 5.0) < 1e-15,
           "flip threshold is not (27-8*sqrt(11))/5")
    mu = min(m.real for m in cuspless_period2_eigs(lam_c))
    _check(bad, abs(mu + 1.0) < 1e-10, f"mu-(lam_c) = {mu!r} is not -1")
    a0 = egg_flip_alpha(0.0)
    _check(bad, abs(a0 - 0.0781) < 1e-4, f"flip alpha at lam=0: {a0!r}")
    a1 = egg_flip_alpha(1.0)
    _check(bad, abs(a1 - 0.0554) < 1e-4, f"flip alpha at lam=1: {a1!r}")
    lm5 = ellipse_focus_threshold(5.0)
    _check(bad, abs(lm5 - 0.4369) < 1e-3, f"ellipse focus threshold a=5: {lm5!r}")
    _check(bad, ellipse_focus_threshold(math.sqrt(2.0)) == 0.0,
           "threshold must vanish at a = sqrt(2)")
    _record(1, "closed-form stability thresholds", bad, t0, 1.0)


def test_criterion_2_monodromy_matches_closed_forms():
    t0 = time.perf_counter()
    bad = []
    lams = [k / 10.0 for k in range(1, 10)]

    for a in (1.2, 1.5, 5.0):
        ell = tables.ellipse(a)
        pts = [PhasePoint(0.5 * math.pi, 0.0), PhasePoint(-0.5 * math.pi, 0.0)]
        for lam in lams:
            rep = orbit_monodromy(lam, ell, pts)
            M = ellipse_minor_axis_monodromy(lam, a)
            err = np.max(np.abs(rep.matrix - M)) / max(1.0, np.max(np.abs(M)))
            _check(bad, err < 1e-9, f"ellipse a={a} lam={lam}: matrix err {err:.2e}")
            _check(bad, abs(rep.det - lam ** 2) < 1e-9,
                   f"ellipse a={a} lam={lam}: det err")

    cusp = tables.cuspless_cardioid()
    pts = [PhasePoint(ARC_HALF, 0.0), PhasePoint(0.0, 0.0)]
    for lam in lams:
        rep = orbit_monodromy(lam, cusp, pts)
        M = cuspless_period2_monodromy(lam)
        err = np.max(np.abs(rep.matrix - M)) / max(1.0, np.max(np.abs(M)))
        _check(bad, err < 1e-9, f"cuspless lam={lam}: matrix err {err:.2e}")

    for alpha in (0.05, 0.08):
        egg = tables.three_pointed_egg(alpha)
        pts = [PhasePoint(0.0, 0.0), PhasePoint(math.pi, 0.0)]
        for lam in lams:
            rep = orbit_monodromy(lam, egg, pts)
            tr = egg_period2_trace(lam, alpha)
            _check(bad, abs(rep.trace - tr) < 1e-9 * max(1.0, abs(tr)),
                   f"egg alpha={alpha} lam={lam}: trace err")
            _check(bad, abs(rep.det - lam ** 2) < 1e-9,
                   f"egg alpha={alpha} lam={lam}: det err")
    _record(2, "diameter monodromy vs closed forms", bad, t0, 10.0)


def test_criterion_3_jacobian_vs_finite_differences(all_tables):
    t0 = time.perf_counter()
    bad = []
    lam = 0.6
    for tab in all_tables:
        states = oracle.safe_states(tab, 10_000, seed=101)
        worst_fd = 0.0
        worst_det = 0.0
        for x in states:
            J, r = flight_jacobian(lam, tab, x)
            F, _ = oracle.fd_flight_jacobian(lam, tab, x)
            worst_fd = max(worst_fd,
                           float(np.max(np.abs(J - F)) / np.max(np.abs(J))))
            det_ref = lam * math.cos(x.phi) / math.cos(r.eta)
            worst_det = max(worst_det,
                            abs(np.linalg.det(J) - det_ref) / max(1.0, abs(det_ref)))
        _check(bad, worst_fd < 1e-5, f"{tab.name}: FD mismatch {worst_fd:.2e}")
        _check(bad, worst_det < 1e-10, f"{tab.name}: det identity {worst_det:.2e}")
    _record(3, "flight derivative vs central differences", bad, t0, 30.0)


def test_criterion_4_cardioid_lyapunov():
    t0 = time.perf_counter()
    bad = []
    card = tables.cardioid()
    for i, lam in enumerate(k / 10.0 for k in range(1, 10)):
        us, phis = analysis.random_phase_points(card, 100, seed=3, stream=i)
        nus = []
        for u, phi in zip(us, phis):
            est = analysis.lyapunov(lam, card, PhasePoint(float(u), float(phi)),
                                    n=15_000, discard=3_000)
            _check(bad, not est.terminated_early,
                   f"lam={lam}: escape ({est.reason})")
            _check(bad, est.nu_plus > 0.0, f"lam={lam}: nu+ = {est.nu_plus!r}")
            _check(bad, est.nu_plus + est.nu_minus < 0.0,
                   f"lam={lam}: sum of exponents not negative")
            resid = abs(est.nu_plus + est.nu_minus - est.det_log_mean)
            _check(bad, resid < 1e-6, f"lam={lam}: sum identity {resid:.2e}")
            nus.append(est.nu_plus)
        spread = float(np.std(nus))
        _check(bad, spread < 5e-3, f"lam={lam}: cross-IC std {spread:.2e}")
        if bad:
            break
    _record(4, "cardioid is chaotic and dissipative at every contraction",
            bad, t0, 300.0)


def test_criterion_5_slap_square_expands():
    t0 = time.perf_counter()
    bad = []
    val = analysis.slap_square_min_derivative(tables.cardioid(), n_grid=10_000)
    _check(bad, val > 1.0, f"min |(T0 o T0)'| = {val!r} <= 1")
    _check(bad, abs(val - 1.5062622644003003) < 1e-9,
           f"grid minimum moved: {val!r}")
    _record(5, "cardioid slap-map second iterate expands", bad, t0, 5.0)


def test_criterion_6_cuspless_critical_orbit(cuspless):
    t0 = time.perf_counter()
    bad = []

    lam_star, phi_star = analysis.cuspless_critical_search()
    _check(bad, abs(lam_star - 0.0712) < 1e-3,
           f"critical contraction {lam_star!r}")
    _check(bad, abs(phi_star - (-0.0290)) < 1e-3, f"critical angle {phi_star!r}")

    # loss of stability of the wall diameter, from the numeric monodromy only
    pts = [PhasePoint(ARC_HALF, 0.0), PhasePoint(0.0, 0.0)]

    def unstable(lam):
        rep = orbit_monodromy(lam, cuspless, pts)
        return max(abs(m) for m in rep.eigenvalues) > 1.0

    lo, hi = 0.05, 0.15
    if unstable(lo) or not unstable(hi):
        bad.append("bisection bracket does not straddle the loss of stability")
    else:
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if unstable(mid) else (mid, hi)
        loss = 0.5 * (lo + hi)
        _check(bad, abs(loss - 0.0934) < 1e-3, f"stability loss at {loss!r}")

    # between the two thresholds the attracting diameter coexists with a
    # chaotic set: the basin grid must show both labels
    W = H = 32
    u_axis = -ARC_HALF + 2.0 * ARC_HALF * (np.arange(W) + 0.5) / W
    phi_axis = -0.5 * math.pi + math.pi * (np.arange(H) + 0.5) / H
    res = analysis.classify_basin(0.09, cuspless, u_axis, phi_axis,
                                  n=2_000, discard=2_000, threads=4)
    n_regular = int((res.labels == 0).sum())
    n_chaotic = int((res.labels == 1).sum())
    _check(bad, n_regular > 0 and n_chaotic > 0,
           f"labels not mixed: {n_regular} regular, {n_chaotic} chaotic")
    _record(6, "cuspless critical orbit, flip point, coexisting basins",
            bad, t0, 120.0)


def test_criterion_7_egg_cascade_and_crises(eggshape):
    t0 = time.perf_counter()
    bad = []

    per, seed_state = analysis.attractor_period(0.385, eggshape,
                                                PhasePoint(0.0, 0.01),
                                                discard=200_000)
    _check(bad, per == 8, f"attractor period at 0.385 is {per}")
    if per == 8:
        lam4 = scan.locate_period_doubling(eggshape, 8, 0.385, 0.3915,
                                           seed_state)
        _check(bad, abs(lam4 - 0.389) < 5e-3, f"8->16 doubling at {lam4!r}")

        per16, seed16 = analysis.attractor_period(0.390, eggshape, seed_state,
                                                  discard=300_000)
        _check(bad, per16 == 16, f"attractor period at 0.390 is {per16}")
        if per16 == 16:
            lam5 = scan.locate_period_doubling(eggshape, 16, 0.390, 0.3933,
                                               seed16)
            _check(bad, abs(lam5 - 0.393) < 5e-3, f"16->32 doubling at {lam5!r}")

            onset = scan.locate_chaos_onset(eggshape, 0.3925, 0.3965, seed16)
            _check(bad, abs(onset - 0.394) < 2e-3, f"chaos onset at {onset!r}")

    merge = scan.locate_merging_crisis(eggshape, seed=5)
    _check(bad, abs(merge - 0.4435) < 0.01, f"merging crisis at {merge!r}")

    frac = scan.chaotic_fraction(0.7, eggshape, n_ics=16, seed=11,
                                 n=40_000, discard=120_000)
    _check(bad, frac == 0.0, f"chaotic fraction at 0.7 is {frac!r}")

    # two mirror period-3 attractors, continued down from the elastic limit
    orbit_a = [(math.pi / 3.0, math.pi / 6.0)]
    orbit_b = [(math.pi / 3.0, -math.pi / 6.0)]
    for lam in (1.0, 0.9, 0.8, 0.7):
        orbit_a = analysis.find_periodic_orbit(lam, eggshape, orbit_a, period=3)
        orbit_b = analysis.find_periodic_orbit(lam, eggshape, orbit_b, period=3)
    for name, orb in (("a", orbit_a), ("b", orbit_b)):
        rep = orbit_monodromy(0.7, eggshape, orb)
        _check(bad, rep.classification.startswith("attracting"),
               f"orbit {name} at 0.7 is {rep.classification}")
    mirror = sorted((round(-p.u, 6), round(-p.phi, 6)) for p in orbit_a)
    direct = sorted((round(p.u, 6), round(p.phi, 6)) for p in orbit_b)
    _check(bad, mirror == direct, "second orbit is not the mirror image")

    # their basins tile the grid with no chaotic cells, heavily interleaved
    W = H = 48
    u_axis = -math.pi + 2.0 * math.pi * (np.arange(W) + 0.5) / W
    phi_axis = -0.5 * math.pi + math.pi * (np.arange(H) + 0.5) / H
    res = analysis.classify_basin(0.7, eggshape, u_axis, phi_axis,
                                  attractors=[orbit_a, orbit_b],
                                  n=1_200, discard=800, threads=4)
    _check(bad, int((res.labels != 0).sum()) == 0,
           "chaotic or escaping cells at lam = 0.7")
    total = res.tags.size
    frac_a = int((res.tags == 0).sum()) / total
    frac_b = int((res.tags == 1).sum()) / total
    _check(bad, frac_a > 0.25 and frac_b > 0.25,
           f"basin split {frac_a:.2f}/{frac_b:.2f} is too lopsided")
    changes = int((res.tags[:, 1:] != res.tags[:, :-1]).sum()
                  + (res.tags[1:, :] != res.tags[:-1, :]).sum())
    _check(bad, changes >= 200,
           f"only {changes} neighbour tag changes; basins not interleaved")
    _record(7, "egg cascade, crises, and intermingled period-3 basins",
            bad, t0, 900.0)


def test_criterion_8_period3_exclusion_and_recovery(eggshape):
    t0 = time.perf_counter()
    bad = []
    for lam, floor in ((0.0, 1e-4), (0.2, 1e-5), (0.3, 2e-6)):
        gap, skipped = analysis.period3_gap(lam, eggshape)
        _check(bad, gap > floor,
               f"lam={lam}: gap {gap:.3e} under floor {floor:.0e}")
        _check(bad, skipped == 0, f"lam={lam}: {skipped} skipped cells")

    orbit = [(math.pi / 3.0, math.pi / 6.0)]
    expect = {1.0: "elliptic", 0.45: "attracting", 0.4: "attracting"}
    for lam in (1.0, 0.8, 0.6, 0.5, 0.45, 0.4):
        orbit = analysis.find_periodic_orbit(lam, eggshape, orbit, period=3)
        if lam in expect:
            rep = orbit_monodromy(lam, eggshape, orbit)
            _check(bad, rep.classification.startswith(expect[lam]),
                   f"lam={lam}: {rep.classification}")
            if lam == 1.0:
                worst = max(abs(abs(m) - 1.0) for m in rep.eigenvalues)
                _check(bad, worst < 1e-6,
                       f"elastic multipliers off the unit circle by {worst:.1e}")
    _record(8, "period-3 exclusion gap and Newton recovery", bad, t0, 120.0)


def test_criterion_9_determinism_and_exact_laws(all_tables, tmp_path):
    t0 = time.perf_counter()
    bad = []

    # identical output bytes no matter how many threads do the work
    args = ["bifurcation", "--table", "egg", "--alpha", "0.08",
            "--lambda-range", "0.30:0.44:0.07", "--ics", "4", "--n", "4000",
            "--discard", "1000", "--keep", "8", "--seed", "1"]
    files = []
    for threads in (1, 4):
        out = tmp_path / f"sweep_{threads}.csv"
        code = cli_main(args + ["--threads", str(threads), "--out", str(out)])
        _check(bad, code == 0, f"bifurcation CLI exited {code}")
        files.append(out.read_bytes())
    _check(bad, files[0] == files[1], "CSV bytes differ across thread counts")

    # circle: the outgoing angle contracts by exactly lambda per bounce
    circ = tables.circle()
    for lam in (0.3, 0.7):
        tr = trajectory(lam, circ, PhasePoint(0.4, 0.8), 30)
        for k in range(len(tr)):
            expected = 0.8 * lam ** (k + 1)
            _check(bad, abs(tr.phi[k] - expected) <= 1e-9 * expected + 1e-15,
                   f"circle decay broken at lam={lam}, k={k}")

    # elastic flights preserve the invariant area element
    for tab in all_tables:
        for x in oracle.safe_states(tab, 40, seed=77):
            J, r = flight_jacobian(1.0, tab, x)
            B = np.diag([1.0, math.cos(r.state.phi)]) @ J @ np.diag(
                [1.0, 1.0 / math.cos(x.phi)])
            err = abs(abs(np.linalg.det(B)) - 1.0)
            _check(bad, err < 1e-9, f"{tab.name}: Birkhoff det err {err:.1e}")

    # collision solver vs the dense-sampling oracle, 1e4 rays per table
    rng = np.random.default_rng(2024)
    for tab in all_tables:
        n = 10_000
        qx, qy = oracle.interior_points(tab.name, tab.param, tab.rmax, n, rng)
        ang = rng.uniform(-math.pi, math.pi, n)
        vx, vy = np.cos(ang), np.sin(ang)
        if tab.name == "cardioid":
            keep = np.abs(qx * vy - qy * vx) > 0.05
            qx, qy, vx, vy = qx[keep], qy[keep], vx[keep], vy[keep]
        taus = np.empty(qx.size)
        ok = np.zeros(qx.size, dtype=bool)
        for i in range(qx.size):
            try:
                tau, _, u = tab.next_collision(np.array([qx[i], qy[i]]),
                                               np.array([vx[i], vy[i]]))
            except PinballError:
                continue
            f = tab.boundary_frame(u)
            if -(vx[i] * f.normal[0] + vy[i] * f.normal[1]) < 0.05:
                continue  # grazing, below the oracle's sweep resolution
            if tab.name == "cardioid" and math.pi - abs(u) < 0.1:
                continue
            taus[i], ok[i] = tau, True
        _check(bad, ok.mean() > 0.7, f"{tab.name}: only {ok.mean():.0%} usable rays")
        ref = oracle.first_hit(tab.name, tab.param, tab.rmax,
                               qx[ok], qy[ok], vx[ok], vy[ok])
        worst = float(np.max(np.abs(taus[ok] - ref)))
        _check(bad, worst < 1e-9, f"{tab.name}: solver vs oracle {worst:.2e}")
    _record(9, "bit-determinism, exact circle law, area law, solver oracle",
            bad, t0, 300.0)

"""Acceptance suite: one PASS/FAIL line per criterion, printed past output capture.

Criteria that cannot hold as literally stated are still evaluated literally,
print FAIL with the measured numbers, and are marked as strict expected
failures so that a future fix turns them into an unexpected pass. Extra
checks that explain those failures print INFO lines.
"""

import math
import time

import numpy as np
import pytest

from heatmoments.discretization import (
    auto_select_k,
    recover,
    satisfies_apriori_bound,
    uniform_mesh,
)
from heatmoments.heat_forward import heat_moments_exact, sample_readings
from heatmoments.measures import AtomicMeasure, exact_moments, num_moments
from heatmoments.metrics import cluster, kantorovich_norm, transport_plan, w1_distance
from heatmoments.moment_dynamics import build_A, invert_moments
from heatmoments.quadrature import gh_sensors, observe_moments, uniform_sensors

from conftest import AMP_1D, AMP_2D, POS_1D, POS_2D
from oracles import transport_bruteforce

R = 5.0
T_LIST = (1.0, 10.0, 100.0, 1000.0)
K_MAX = 16
EPS = np.finfo(float).eps

pytestmark = pytest.mark.acceptance


def line(capsys, tag, number, text):
    with capsys.disabled():
        print(f"\n{tag} criterion {number}: {text}")


def verdict(ok):
    return "PASS" if ok else "FAIL"


def truth_1d():
    return AtomicMeasure(POS_1D, AMP_1D)


def truth_2d():
    return AtomicMeasure(np.array(POS_2D), AMP_2D)


def sweep(mu, mesh, n_gh, Ts, ks, d=1):
    """Recover at every (T, k); moments are observed once at max(ks) and truncated."""
    out = {}
    for T in Ts:
        rule = gh_sensors(n_gh, T, d=d)
        y = observe_moments(rule, sample_readings(mu, rule.nodes, T), max(ks), T).y
        for k in ks:
            t0 = time.perf_counter()
            res = recover(y.truncate(k), mesh, T=T)
            out[T, k] = (res, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def sweep_1d():
    """Full 1D sweep on a grid of spacing 0.01 (1001 points including both endpoints)."""
    return sweep(truth_1d(), uniform_mesh(R, 1001), 100, T_LIST, range(K_MAX + 1))


@pytest.fixture(scope="module")
def w1_1d(sweep_1d):
    mu = truth_1d()
    return {key: w1_distance(res.measure, mu) for key, (res, _) in sweep_1d.items()}


@pytest.fixture(scope="module")
def literal_1d():
    """T=1, k=14 on the 1000-point grid including both endpoints."""
    mu = truth_1d()
    t0 = time.perf_counter()
    rule = gh_sensors(100, 1.0)
    y = observe_moments(rule, sample_readings(mu, rule.nodes, 1.0), 14, 1.0).y
    mesh = uniform_mesh(R, 1000)
    res = recover(y, mesh, T=1.0)
    elapsed = time.perf_counter() - t0
    return res, w1_distance(res.measure, mu), elapsed, mesh


@pytest.fixture(scope="module")
def recovery_2d():
    mu = truth_2d()
    t0 = time.perf_counter()
    T = 100.0
    rule = gh_sensors(100, T, d=2)
    y = observe_moments(rule, sample_readings(mu, rule.nodes, T), 8, T).y
    res = recover(y, uniform_mesh(R, 100, 2), T=T)
    clustered = cluster(res.measure, 0.02)
    return res, clustered, time.perf_counter() - t0


def grid_w1_lower_bound(mu, mesh):
    """Any measure on the mesh is at least this far from mu in W1.

    Each true atom's mass must be matched within the transport plan either by
    mesh mass (at distance >= its gap to the mesh) or by opposite-sign true
    atoms, and the truth's atoms are farther apart than twice any gap.
    """
    gaps = np.array([np.min(np.linalg.norm(mesh.points - x, axis=1)) for x in mu.positions])
    sep = min(np.linalg.norm(a - b) for i, a in enumerate(mu.positions) for b in mu.positions[i + 1:])
    assert sep > 2 * gaps.max()
    return float(np.sum(np.abs(mu.amplitudes) * gaps))


@pytest.mark.xfail(strict=True, raises=AssertionError, reason="no measure on a 1000-point endpoint grid is within 1e-3 of the truth")
def test_criterion_1_reproduction_1d(capsys, literal_1d, sweep_1d, w1_1d):
    res, w1, elapsed, mesh = literal_1d
    ok = w1 <= 1e-3 and elapsed <= 60.0
    lb = grid_w1_lower_bound(truth_1d(), mesh)
    line(capsys, verdict(ok), 1,
         f"T=1 k=14 N=1000: W1={w1:.3e} (needs <= 1e-3; grid lower bound {lb:.3e}), {elapsed:.2f}s; "
         f"on the 1001-point grid W1={w1_1d[1.0, 14]:.3e}")
    assert ok


def test_criterion_1_grid_lower_bound(capsys, literal_1d):
    res, w1, _, mesh = literal_1d
    lb = grid_w1_lower_bound(truth_1d(), mesh)
    line(capsys, "INFO", 1, f"W1 lower bound for any measure on the 1000-point grid: {lb:.3e} > 1e-3")
    assert lb > 1e-3
    assert w1 >= lb * (1 - 1e-9)


def test_criterion_1_on_truth_containing_grid(capsys, sweep_1d, w1_1d):
    res, elapsed = sweep_1d[1.0, 14]
    line(capsys, "INFO", 1, f"T=1 k=14 N=1001: W1={w1_1d[1.0, 14]:.3e}, recovery {elapsed:.2f}s")
    assert w1_1d[1.0, 14] <= 1e-3 and elapsed <= 60.0


def test_criterion_2_sharp_drop(capsys, w1_1d):
    ratios = {T: w1_1d[T, 12] / max(w1_1d[T, 14], 1e-300) for T in (1.0, 10.0)}
    ok = all(r >= 10.0 for r in ratios.values())
    line(capsys, verdict(ok), 2, ", ".join(
        f"T={T:g}: W1(k=12)={w1_1d[T, 12]:.3e} W1(k=14)={w1_1d[T, 14]:.3e} ratio {r:.2e}" for T, r in ratios.items()))
    assert ok


def test_criterion_3_large_T_degradation(capsys, w1_1d):
    low = min(w1_1d[1000.0, k] for k in range(11))
    w10, w16 = w1_1d[1000.0, 10], w1_1d[1000.0, 16]
    ok = math.isfinite(low) and w16 > w10
    line(capsys, verdict(ok), 3, f"T=1000: min_(k<=10) W1={low:.3e}, W1(k=10)={w10:.3e}, W1(k=16)={w16:.3e}")
    assert ok


def test_criterion_4_reproduction_2d(capsys, recovery_2d):
    res, clustered, elapsed = recovery_2d
    gaps = [float(np.min(np.linalg.norm(clustered.positions - p, axis=1))) for p in np.array(POS_2D)]
    ok = max(gaps) <= 0.2 and elapsed <= 900.0
    line(capsys, verdict(ok), 4,
         f"T=100 k=8: {res.atom_count} atoms, {len(clustered)} after clustering, "
         f"max distance to a recovered atom {max(gaps):.3f} (<= 0.2), {elapsed:.1f}s")
    assert ok


def random_measure(rng, d):
    n = int(rng.integers(1, 5))
    return AtomicMeasure(rng.uniform(-R, R, (n, d)), rng.uniform(-3, 3, n), dim=d)


def test_criterion_5_inversion_roundtrip(capsys):
    rng = np.random.default_rng(20240601)
    worst, worst_float = 0.0, 0.0
    for _ in range(50):
        d = int(rng.integers(1, 3))
        k = int(rng.integers(0, 13))
        T = float(rng.choice([0.1, 1.0, 10.0, 100.0]))
        mu = random_measure(rng, d)
        exact = exact_moments(mu, k, exact=True)
        scale = 1.0 + max(abs(float(v)) for v in exact.values)
        z = invert_moments(heat_moments_exact(mu, k, T, exact=True), T, build_A(d, k))
        err = max(abs(float(a - b)) for a, b in zip(z.values, exact.values))
        worst = max(worst, err / scale)
        zf = invert_moments(heat_moments_exact(mu, k, T), T, build_A(d, k))
        worst_float = max(worst_float, float(np.max(np.abs(zf.values - exact.to_float().values))) / scale)
    ok = worst <= 1e-10
    line(capsys, verdict(ok), 5, f"50 measures, worst relative error {worst:.2e} with exact arithmetic "
         f"(double-precision path: {worst_float:.2e})")
    assert ok


def test_criterion_6_nilpotency_and_row_sum(capsys):
    bad = []
    for d in (1, 2, 3):
        for k in range(2, 17):
            A = build_A(d, k)
            p = k // 2 + 1
            if np.any(A.matrix_power(p)):
                bad.append((d, k, "nilpotency"))
            if np.max(np.sum(np.abs(A.entries), axis=1)) != k * (k - 1):
                bad.append((d, k, "row sum"))
    ok = not bad
    line(capsys, verdict(ok), 6, f"d<=3, k=2..16: {'all hold' if ok else bad}")
    assert ok


def fourth_moment_error(rule, T):
    delta = AtomicMeasure([0.0], [1.0])
    y = observe_moments(rule, sample_readings(delta, rule.nodes, T), 4, T).y
    return abs(y.values[4] - 1200.0) / 1200.0


@pytest.mark.xfail(strict=True, raises=AssertionError, reason="Gauss-Hermite errors for n >= 10 are exact up to a few ulps, so their order is roundoff")
def test_criterion_7_quadrature_oracle(capsys):
    T = 10.0
    gh100 = fourth_moment_error(gh_sensors(100, T), T)
    unif = fourth_moment_error(uniform_sensors(50.0, 100), T)
    seq = [fourth_moment_error(gh_sensors(n, T), T) for n in (10, 20, 40, 80)]
    monotone = all(b <= a for a, b in zip(seq, seq[1:]))
    ok = gh100 <= 1e-8 and unif > gh100 and monotone
    line(capsys, verdict(ok), 7,
         f"GH n=100 error {gh100:.2e} (<= 1e-8: {gh100 <= 1e-8}); uniform {unif:.2e} larger: {unif > gh100}; "
         f"GH n=10,20,40,80 errors {', '.join(f'{e:.2e}' for e in seq)} non-increasing: {monotone}")
    assert ok


def test_criterion_7_oracle_clauses(capsys):
    T = 10.0
    gh100 = fourth_moment_error(gh_sensors(100, T), T)
    unif = fourth_moment_error(uniform_sensors(50.0, 100), T)
    seq = [fourth_moment_error(gh_sensors(n, T), T) for n in (10, 20, 40, 80)]
    one_ulp = np.spacing(1200.0) / 1200.0
    line(capsys, "INFO", 7, f"oracle and comparison clauses hold; GH errors are {max(seq) / one_ulp:.0f} ulp at most")
    assert gh100 <= 1e-8 and unif > gh100
    assert max(seq) <= 4 * one_ulp


def test_criterion_7_trend_on_signed_truth(capsys):
    # a source whose fourth moment is not integrated exactly shows the trend
    T, mu = 10.0, truth_1d()
    ref = float(heat_moments_exact(mu, 4, T, exact=True).values[4])
    errs = []
    for n in (3, 5, 10, 20):
        rule = gh_sensors(n, T)
        y = observe_moments(rule, sample_readings(mu, rule.nodes, T), 4, T).y
        errs.append(abs(y.values[4] - ref) / abs(ref))
    line(capsys, "INFO", 7, f"six-atom source, GH n=3,5,10,20: {', '.join(f'{e:.1e}' for e in errs)}")
    assert all(b < a for a, b in zip(errs, errs[1:]))


def all_recoveries(sweep_1d, literal_1d, recovery_2d):
    recs = [(1, res) for res, _ in sweep_1d.values()]
    recs.append((1, literal_1d[0]))
    recs.append((2, recovery_2d[0]))
    return recs


def test_criterion_8_sparsity_and_feasibility(capsys, sweep_1d, literal_1d, recovery_2d):
    recs = all_recoveries(sweep_1d, literal_1d, recovery_2d)
    sparse = all(res.atom_count <= num_moments(d, res.order) for d, res in recs)
    worst = max(res.residual / max(1.0, res.rhs_inf) for _, res in recs)
    ok = sparse and worst <= 1e-8
    line(capsys, verdict(ok), 8, f"{len(recs)} recoveries: atom counts within C(k+d,d): {sparse}; "
         f"worst relative residual {worst:.2e}")
    assert ok


def test_criterion_9_apriori_tv_bound(capsys, sweep_1d, literal_1d, recovery_2d):
    recs = all_recoveries(sweep_1d, literal_1d, recovery_2d)
    ratios = [res.tv / (math.exp(2 * d * res.order / R) * res.rhs_inf) for d, res in recs]
    ok = all(satisfies_apriori_bound(res, d, R) for d, res in recs)
    line(capsys, verdict(ok), 9, f"{len(recs)} recoveries, largest TV/bound {max(ratios):.3e}")
    assert ok


def test_criterion_10_transport_oracle(capsys):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 3))
        n1, n2 = (int(v) for v in rng.integers(1, 4, 2))
        a = AtomicMeasure(rng.uniform(-3, 3, (n1, d)), rng.uniform(-2, 2, n1), dim=d)
        b_amp = rng.uniform(-2, 2, n2)
        b_amp[-1] += a.mass - b_amp.sum()
        b = AtomicMeasure(rng.uniform(-3, 3, (n2, d)), b_amp, dim=d)
        plan = transport_plan(a, b)
        if plan.flow.size == 0:
            continue
        C = np.linalg.norm(plan.sources[:, None, :] - plan.targets[None, :, :], axis=2)
        ref = transport_bruteforce(plan.flow.sum(axis=1), plan.flow.sum(axis=0), C)
        worst = max(worst, abs(plan.cost - ref) / max(1.0, ref))
    sandwich_ok = True
    for _ in range(100):
        d = int(rng.integers(1, 3))
        a = AtomicMeasure(rng.uniform(-3, 3, (3, d)), rng.uniform(-2, 2, 3), dim=d)
        b_amp = rng.uniform(-2, 2, 3)
        b_amp[-1] += a.mass - b_amp.sum()
        b = AtomicMeasure(rng.uniform(-3, 3, (3, d)), b_amp, dim=d)
        pts = np.vstack([a.positions, b.positions])
        diam = float(np.max(np.linalg.norm(pts[:, None] - pts[None, :], axis=2)))
        kn, w = kantorovich_norm(a - b), w1_distance(a, b)
        sandwich_ok &= kn <= w + 1e-9 and w <= max(1.0, diam / 2) * kn + 1e-9
    ok = worst <= 1e-9 and sandwich_ok
    line(capsys, verdict(ok), 10, f"200 transport instances, worst gap {worst:.1e}; sandwich on 100 pairs: {sandwich_ok}")
    assert ok


@pytest.fixture(scope="module")
def mass_sweep(sweep_1d):
    mu = truth_1d()
    out = {(100, T, k): res for (T, k), (res, _) in sweep_1d.items()}
    mesh = uniform_mesh(R, 1001)
    for (T, k), (res, _) in sweep(mu, mesh, 30, T_LIST, range(K_MAX + 1)).items():
        out[30, T, k] = res
    return out


@pytest.mark.xfail(strict=True, raises=AssertionError, reason="at T=1000 and k >= 14 the amplitudes reach 1e8 to 1e11, "
                   "so double-precision mass granularity exceeds 1e-9")
def test_criterion_11_mass_preservation(capsys, mass_sweep):
    mass = truth_1d().mass
    errs = {key: abs(res.measure.mass - mass) for key, res in mass_sweep.items()}
    bad = sorted((key for key, e in errs.items() if e > 1e-9), key=lambda t: (t[0], t[1], t[2]))
    ok = not bad
    detail = "; ".join(f"n={n} T={T:g} k={k}: {errs[n, T, k]:.1e}" for n, T, k in bad)
    line(capsys, verdict(ok), 11, f"{len(errs)} recoveries with GH n in (30, 100), k=0..16, T<=1000; "
         f"worst mass error {max(errs.values()):.1e}" + (f"; over 1e-9: {detail}" if bad else ""))
    assert ok


def test_criterion_11_within_selected_orders(capsys, mass_sweep):
    mass = truth_1d().mass
    worst = 0.0
    for n in (30, 100):
        for T in T_LIST:
            tvs = [mass_sweep[n, T, k].tv for k in range(K_MAX + 1)]
            k_sel = auto_select_k(tvs)
            worst = max(worst, max(abs(mass_sweep[n, T, k].measure.mass - mass) for k in range(k_sel + 1)))
    line(capsys, "INFO", 11, f"mass error up to the automatically selected order: {worst:.1e}")
    assert worst <= 1e-9


def test_criterion_11_error_at_float_granularity(capsys, mass_sweep):
    # every mass error is within a small multiple of eps times the amplitudes summed
    mass = truth_1d().mass
    ratio = max(abs(res.measure.mass - mass) / (1e-9 + EPS * res.tv) for res in mass_sweep.values())
    line(capsys, "INFO", 11, f"largest mass error in units of (1e-9 + eps * TV): {ratio:.2f}")
    assert ratio <= 64.0

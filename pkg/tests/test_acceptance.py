"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Thresholds are applied exactly as stated; a criterion that is not met fails.
"""

import math
import random

import numpy as np
import pytest

from steklov.fem import bisect_mesh, build_mesh, steklov_mode_fem
from steklov.modal import sphere_eigenvalue
from steklov.profile import (
    certify_caps,
    make_capped,
    make_euclidean,
    make_piecewise,
    make_plateau_h0,
    make_plateau_large,
    make_plateau_small,
)
from steklov.shoot import piecewise_linear_trial, rayleigh, steklov_mode
from steklov.sweep import fit_trend, sweep_family
from steklov.theorems import (
    gamma_bound,
    gap_bound_3d,
    gap_bound_highdim,
    n2_exact,
    ratio_bound,
    verify_profile,
)

GRID = list(np.logspace(-1, -3, 11))  # five points per decade


@pytest.fixture(scope="module")
def sweep_a4():
    return sweep_family("A_large", 4, 1, 1.0, GRID)


@pytest.fixture(scope="module")
def sweep_b4():
    return sweep_family("B_small", 4, 1, 1.0, GRID)


def fmt_ratios(rows):
    return "[" + ", ".join(f"{r.ratio:.4f}" for r in rows) + "]"


def test_criterion_01_euclidean_oracle(criterion):
    worst_shoot = worst_fem = 0.0
    for n in (3, 4, 5):
        for R in (1.0, 2.0):
            p = make_euclidean(n, R)
            for k in range(1, 6):
                lam = sphere_eigenvalue(n, k)
                exact = k / R
                worst_shoot = max(worst_shoot, abs(steklov_mode(p, lam) - exact) / exact)
                worst_fem = max(worst_fem, abs(steklov_mode_fem(p, lam, build_mesh(p, 4000)) - exact) / exact)
    ok = worst_shoot <= 1e-6 and worst_fem <= 1e-4
    assert criterion(1, ok, f"max rel err shooting {worst_shoot:.2e} (<=1e-6), fem N=4000 {worst_fem:.2e} (<=1e-4)")


BATTERY = [
    make_euclidean(3, 1.0),
    make_euclidean(5, 2.0),
    make_plateau_large(3, 1.0, 1e-2),
    make_plateau_large(4, 1.0, 1e-3),
    make_plateau_large(6, 2.0, 1e-2),
    make_plateau_small(4, 1.0, 1e-2),
    make_plateau_small(5, 1.0, 0.1),
    make_plateau_h0(1.0, 1e-2, 1.0),
    make_plateau_h0(2.0, 1e-2, 0.5),
    make_capped(3, 1.0, 0.5, 1.0, 2.0, [(0, 1.5), (0.6, 1.5)]),
    make_capped(4, 1.0, 0.4, 0.8, 3.0, [(0, 0.9), (0.5, 2.5), (0.7, 2.5)]),
    make_piecewise(4, 1.0, [(0, 0.9), (0.3, 0.2), (0.6, 0.2)]),
    make_piecewise(3, 2.0, [(0, 2.5), (0.5, 0.4), (1.0, 0.4)]),
]


def test_criterion_02_ratio_strict(criterion):
    min_margin, worst = math.inf, ""
    for p in BATTERY:
        sig = [steklov_mode(p, sphere_eigenvalue(p.n, k)) for k in range(1, 5)]
        for k in (1, 2, 3):
            margin = ratio_bound(p.n, k) - sig[k] / sig[k - 1]
            if margin < min_margin:
                min_margin, worst = margin, f"{p.tag} k={k}"
    ok = min_margin > 0
    assert criterion(2, ok, f"{len(BATTERY)} profiles, k=1..3, min margin {min_margin:.3e} at {worst}")


def test_criterion_03_ratio_sharpness_n4(criterion, sweep_a4):
    target = 8 / 3
    ratios = [r.ratio for r in sweep_a4]
    fit = fit_trend(sweep_a4, "ratio")
    final_ok = ratios[-1] >= 0.9 * target
    limit_err = abs(fit.limit_estimate - target) / target
    ok = fit.monotone and fit.direction == "increasing" and final_ok and limit_err <= 0.05
    criterion(3, ok, f"monotone={fit.monotone} final={ratios[-1]:.4f} (>= {0.9 * target:.4f}) "
                     f"limit={fit.limit_estimate:.4f} (rel err {limit_err:.3f}, <= 0.05) ratios={fmt_ratios(sweep_a4)}")
    assert ok


def test_criterion_04_ratio_sharpness_n3(criterion):
    rows = sweep_family("A_large", 3, 1, 1.0, GRID)
    fit = fit_trend(rows, "ratio")
    final = rows[-1].ratio
    ok = fit.direction == "increasing" and final >= 0.9 * 3 and final < 3
    assert criterion(4, ok, f"monotone={fit.monotone} final={final:.4f} (>= 2.7) limit={fit.limit_estimate:.4f}")


def test_criterion_05_small_plateau(criterion, sweep_b4):
    row = sweep_b4[-1]
    assert row.eps == pytest.approx(1e-3)
    s_eps, g_eps = row.sigma_k / row.eps, row.gap / row.eps
    ok = 0.9 * 3 <= s_eps <= 1.1 * 3 and 0.5 * 5 <= g_eps <= 2 * 5 and row.ratio >= 0.9 * 8 / 3
    assert criterion(5, ok, f"sigma/eps={s_eps:.4f} in [2.7, 3.3], gap/eps={g_eps:.4f} in [2.5, 10], "
                            f"final ratio={row.ratio:.4f} (>= {0.9 * 8 / 3:.4f})")


def test_criterion_06_gap_dichotomy(criterion, sweep_a4, sweep_b4):
    grow = sweep_a4[-1].gap / sweep_a4[0].gap
    shrink = sweep_b4[0].gap / sweep_b4[-1].gap
    ok = grow >= 10 and shrink >= 10
    assert criterion(6, ok, f"family A gap grows x{grow:.1f} (>= 10), family B gap shrinks x{shrink:.1f} (>= 10)")


def test_criterion_07_boundary_value_family(criterion, sweep_a4):
    rows = sweep_family("C_h0", 3, 1, 1.0, GRID, h0=1.0)
    below = all(r.sigma_k < 2 for r in rows)
    last = rows[-1].sigma_k
    fit = fit_trend(sweep_a4, "sigma")
    rate_ok = abs(fit.rate_estimate + 0.5) <= 0.2
    ok = below and last >= 0.9 * 2 and rate_ok
    assert criterion(7, ok, f"max sigma_1={max(r.sigma_k for r in rows):.6f} (< 2), sigma_1(1e-3)={last:.6f} (>= 1.8), "
                            f"family A sigma rate {fit.rate_estimate:.3f} (within 0.2 of -0.5)")


def test_criterion_08_gap_bound_3d(criterion):
    profiles = [p for p in BATTERY if p.n == 3] + [make_plateau_h0(1.0, 1e-3, 1.0)]
    min_margin = math.inf
    for p in profiles:
        sig = [0.0] + [steklov_mode(p, sphere_eigenvalue(3, k)) for k in (1, 2, 3)]
        for k in (0, 1, 2):
            bound = gap_bound_3d(p.R, float(p.h0), k)
            min_margin = min(min_margin, bound - (sig[k + 1] - sig[k]))
    c = make_plateau_h0(1.0, 1e-3, 1.0)
    closeness = steklov_mode(c, sphere_eigenvalue(3, 1)) / gap_bound_3d(1.0, 1.0, 0)
    ok = len(profiles) >= 5 and min_margin > 0 and closeness >= 0.85
    assert criterion(8, ok, f"{len(profiles)} profiles, k=0..2, min margin {min_margin:.3e}; "
                            f"family C gap/bound at 1e-3 = {closeness:.4f} (>= 0.85)")


def test_criterion_09_conditional_ratio(criterion):
    p = make_capped(3, 1.0, 0.5, 1.0, 2.0, [(0, 1.5), (0.6, 1.5)])
    caps = certify_caps(p, 0.5, 1.0, 2.0)
    gamma = gamma_bound(3, 1, 1.0, 0.5, 1.0, 2.0)
    s1, s2 = (steklov_mode(p, sphere_eigenvalue(3, k)) for k in (1, 2))
    lim_c2 = gamma_bound(3, 1, 1.0, 0.5, 1.0, 1e6) < 1e-6 * gamma
    lim_r1 = gamma_bound(3, 1, 1.0, 1e-6, 1.0, 2.0) < 1e-6
    ok = caps["passed"] and s2 / s1 <= 3 - gamma and lim_c2 and lim_r1
    assert criterion(9, ok, f"caps certified={caps['passed']}, ratio={s2 / s1:.6f} <= 3 - gamma = {3 - gamma:.8f}, "
                            f"gamma limits C2->inf {lim_c2}, R1->0 {lim_r1}")


def test_criterion_10_gap_bound_highdim(criterion):
    level = 1e-2 ** -0.5
    cases = [
        (make_plateau_large(4, 1.0, 1e-2), level),
        (make_capped(4, 1.0, 0.4, 0.8, 3.0, [(0, 0.9), (0.5, 2.5), (0.7, 2.5)]), 3.0),
        (make_euclidean(4, 1.0), 1.0),
        (make_plateau_small(4, 1.0, 1e-2), 1.0),
    ]
    min_margin, certified = math.inf, 0
    for p, C2 in cases:
        if not certify_caps(p, 0.5 * p.R, 1e-300, C2)["upper_ok"]:
            continue
        certified += 1
        sig = [0.0] + [steklov_mode(p, sphere_eigenvalue(4, k)) for k in (1, 2)]
        for k in (0, 1):
            bound = gap_bound_highdim(4, k, p.R, C2, float(p.h0))
            min_margin = min(min_margin, bound - (sig[k + 1] - sig[k]))
    ok = certified >= 3 and min_margin >= 0
    assert criterion(10, ok, f"{certified} certified n=4 profiles, k=0,1, min margin {min_margin:.3e}")


def test_criterion_11_structural(criterion):
    rng = random.Random(20240611)
    profiles = [BATTERY[2], BATTERY[5], BATTERY[7], BATTERY[9], BATTERY[11]]
    failures = []
    # variational upper bound for random admissible trial functions
    for i in range(100):
        p = profiles[i % 5]
        k = rng.randint(1, 3)
        lam = sphere_eigenvalue(p.n, k)
        m = rng.randint(1, 5)
        rs = sorted(rng.uniform(0.02, 0.98) * p.R for _ in range(m))
        knots = [(0.0, 1.0)] + [(r, rng.uniform(0.0, 2.0)) for r in rs] + [(p.R, 0.0)]
        if any(b[0] - a[0] < 1e-6 for a, b in zip(knots, knots[1:])):
            continue
        a, da, kinks = piecewise_linear_trial(knots)
        if rayleigh(p, lam, a, da, kinks=kinks) < steklov_mode(p, lam) * (1 - 1e-9):
            failures.append(f"rayleigh {p.tag} k={k}")
    for p in profiles:
        lams = [sphere_eigenvalue(p.n, k) for k in (1, 2, 3)]
        sig = [steklov_mode(p, lam) for lam in lams]
        mesh = build_mesh(p, 1000)
        for lam, s in zip(lams, sig):
            coarse = steklov_mode_fem(p, lam, mesh)
            fine = steklov_mode_fem(p, lam, bisect_mesh(mesh))
            if coarse < s * (1 - 1e-10) or fine < s * (1 - 1e-10):
                failures.append(f"fem below shooting {p.tag}")
            if fine > coarse * (1 + 1e-12):
                failures.append(f"nested refinement {p.tag}")
        if not (sig[0] < steklov_mode(p, 0.5 * (lams[0] + lams[1])) < sig[1] < sig[2]):
            failures.append(f"lambda monotonicity {p.tag}")
        for c in (0.5, 3.0):
            scaled = steklov_mode(p.homothety(c), lams[1])
            if abs(scaled - sig[1] / c) > 1e-6 * sig[1] / c:
                failures.append(f"homothety {p.tag} c={c}")
        gaps = [sig[0]] + [b - a for a, b in zip(sig, sig[1:])]
        if abs(math.fsum(gaps) - sig[-1]) > 1e-6 * sig[-1]:
            failures.append(f"telescoping {p.tag}")
        rep = verify_profile(p, 3)
        if abs(math.fsum(r.gap for r in rep.rows) - rep.rows[-1].sigma_k1) > 1e-6 * rep.rows[-1].sigma_k1:
            failures.append(f"report telescoping {p.tag}")
    ok = not failures
    assert criterion(11, ok, "all variational/structural checks hold" if ok else "; ".join(failures[:5]))


def test_criterion_12_two_dimensional_formula(criterion):
    bad = [(k, h0) for k in range(11) for h0 in (0.1, 0.5, 1.0, 3.0, 7.0) if n2_exact(k, h0) != k / h0]
    assert criterion(12, not bad, f"n2_exact == k/h0 for k <= 10 at 5 values of h0 ({len(bad)} mismatches)")

import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from steklov.profile import (
    make_capped,
    make_euclidean,
    make_piecewise,
    make_plateau_h0,
    make_plateau_large,
    make_plateau_small,
)
from steklov.shoot import SolverOptions
from steklov.theorems import (
    CSV_HEADER,
    InconsistentHypothesisError,
    _check,
    gamma_bound,
    gap_bound_3d,
    gap_bound_highdim,
    n2_exact,
    ratio_bound,
    sigma_bound_3d,
    verdict_tolerance,
    verify_profile,
)


def gamma_oracle(n, k, R, R1, C1, C2):
    """Both branches through the auxiliary quantity rho, in exact arithmetic.

    rho = C2^(2(n-2)) / C1^(2(n-1)) (R L0^2 + C2^2 L0 / (R - R1)) / (L1 - L0)
    gamma_1 = 1 / (4 R1 rho);  gamma_2 = C1^(2(n-3)) / C2^(2(n-1)) R1^3 / 128 L0^2 / rho
    """
    R, R1, C1, C2 = (Fraction(x) for x in (R, R1, C1, C2))
    L0, L1 = Fraction(k * (n + k - 2)), Fraction((k + 1) * (n + k - 1))
    rho = C2 ** (2 * (n - 2)) / C1 ** (2 * (n - 1)) * (R * L0**2 + C2**2 * L0 / (R - R1)) / (L1 - L0)
    g1 = 1 / (4 * R1 * rho)
    g2 = C1 ** (2 * (n - 3)) / C2 ** (2 * (n - 1)) * R1**3 / 128 * L0**2 / rho
    return min(g1, g2)


# -- constants -------------------------------------------------------------------

def test_ratio_bound_examples():
    assert ratio_bound(3, 1) == 3
    assert ratio_bound(4, 1) == pytest.approx(8 / 3, rel=1e-15)
    assert ratio_bound(3, 2) == 2
    with pytest.raises(ValueError):
        ratio_bound(2, 1)
    with pytest.raises(ValueError):
        ratio_bound(3, 0)


def test_n2_exact():
    assert n2_exact(0, 1) == 0
    assert n2_exact(3, 1) == 3
    assert n2_exact(2, 0.5) == 4
    for k in range(11):
        for h0 in (0.25, 1.0, 3.0):
            assert n2_exact(k, h0) == k / h0
    with pytest.raises(ValueError):
        n2_exact(1, 0.0)


def test_gamma_example_against_oracle():
    assert gamma_bound(3, 1, 1, 0.5, 1, 2) == pytest.approx(float(gamma_oracle(3, 1, 1, 0.5, 1, 2)), rel=1e-14)
    # for these inputs the second branch is active: 1/1024 * 6 / (1 + 8) ... evaluated exactly
    assert gamma_oracle(3, 1, 1, 0.5, 1, 2) == Fraction(1, 81920)


@given(n=st.integers(3, 8), k=st.integers(1, 6), R=st.floats(0.5, 3.0), f=st.floats(0.05, 0.95),
       C1=st.floats(0.2, 2.0), dC=st.floats(0.01, 3.0))
def test_gamma_matches_oracle(n, k, R, f, C1, dC):
    R1, C2 = f * R, C1 + dC
    assert gamma_bound(n, k, R, R1, C1, C2) == pytest.approx(float(gamma_oracle(n, k, R, R1, C1, C2)), rel=1e-12)


def test_gamma_limits():
    g2 = gamma_bound(3, 1, 1, 0.5, 1, 2)
    assert gamma_bound(3, 1, 1, 0.5, 1, 1e6) < 1e-6 * g2
    assert gamma_bound(3, 1, 1, 1e-6, 1, 2) < 1e-6


@given(n=st.integers(3, 6), k=st.integers(1, 4), C1=st.floats(0.3, 1.5), a=st.floats(0.01, 2), b=st.floats(0.01, 2))
def test_gamma_monotone(n, k, C1, a, b):
    lo, hi = sorted((C1 + a, C1 + a + b))
    assert gamma_bound(n, k, 1, 0.5, C1, hi) <= gamma_bound(n, k, 1, 0.5, C1, lo)
    c_small, c_big = 0.5 * C1, C1
    assert gamma_bound(n, k, 1, 0.5, c_small, C1 + a) <= gamma_bound(n, k, 1, 0.5, c_big, C1 + a)


def test_gamma_domain():
    with pytest.raises(ValueError):
        gamma_bound(3, 1, 1, 1.0, 1, 2)
    with pytest.raises(ValueError):
        gamma_bound(3, 1, 1, 0.5, 2, 1)


def test_three_dimensional_bounds():
    assert gap_bound_3d(1, 1, 0) == 2
    assert gap_bound_3d(1, 1, 1) == 4
    assert gap_bound_3d(2, 2, 1) == 2
    assert sigma_bound_3d(1, 1, 1) == 2
    assert sigma_bound_3d(1, 1, 2) == 6
    assert sigma_bound_3d(1, 2, 1) == 0.5


def test_high_dimensional_gap_bound():
    assert gap_bound_highdim(4, 1, 1, 1, 1) == 5
    assert gap_bound_highdim(4, 0, 1, 2, 1) == 6
    assert gap_bound_highdim(5, 1, 1, 1, 1) == 6
    with pytest.raises(InconsistentHypothesisError):
        gap_bound_highdim(4, 1, 1, 1, 2)


def test_verdict_tolerance():
    assert _check("x", 1.0, 2.0).verdict == "pass"
    rhs = 2.0
    tol = verdict_tolerance(rhs)
    assert _check("x", rhs + 0.5 * tol, rhs).verdict == "pass"
    assert _check("x", rhs + 2 * tol, rhs).verdict == "fail"
    assert _check("x", float("nan"), rhs).verdict == "indeterminate"


# -- verification ----------------------------------------------------------------

def test_verify_euclidean():
    rep = verify_profile(make_euclidean(3, 1), 3)
    assert rep.passed
    assert rep.check(1, "ratio").margin == pytest.approx(1.0, abs=1e-10)
    assert {c.name for row in rep.rows for c in row.checks} == {"ratio", "gap_3d", "sigma_3d"}
    lines = rep.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    data = json.loads(rep.to_json())
    assert data["passed"] and any("undefined symbol L" in note for note in data["metadata"]["notes"])


def test_verify_plateau_h0_margins_small_positive():
    rep = verify_profile(make_plateau_h0(1, 1e-3, 1), 2)
    assert rep.passed
    m = rep.check(1, "sigma_3d").margin
    assert 0 < m < 0.05


def test_verify_capped_with_gamma():
    p = make_capped(3, 1, 0.5, 1, 2, [(0, 1.5), (0.6, 1.5)])
    rep = verify_profile(p, 2, R1=0.5, C1=1, C2=2, crosscheck=True)
    assert rep.passed and rep.metadata["crosscheck_ok"]
    c = rep.check(1, "ratio_gamma")
    assert c.rhs == pytest.approx(3 - gamma_bound(3, 1, 1, 0.5, 1, 2), rel=1e-15)


def test_verify_skips_uncertified_caps():
    p = make_plateau_h0(1, 1e-2, 1.0)  # plateau 10 exceeds C2 = 2
    rep = verify_profile(p, 2, R1=0.5, C1=1, C2=2)
    assert not rep.metadata["caps"]["passed"]
    with pytest.raises(KeyError):
        rep.check(1, "ratio_gamma")


def test_verify_highdim_gap():
    p = make_plateau_large(4, 1, 1e-2)
    rep = verify_profile(p, 2, C2=10.0)
    assert rep.passed
    assert rep.check(0, "gap_highdim").rhs == pytest.approx(gap_bound_highdim(4, 0, 1, 10.0, 1.0))


def test_verify_indeterminate_rows():
    rep = verify_profile(make_plateau_large(4, 1, 1e-2), 2, SolverOptions(max_refine=1))
    assert rep.indeterminate and not rep.passed
    assert "solver_errors" in rep.metadata


def test_verify_domain():
    with pytest.raises(ValueError):
        verify_profile(make_euclidean(3, 1), 1)
    with pytest.raises(ValueError):
        verify_profile(make_euclidean(2, 1), 2)


def test_verify_parallel_matches_serial():
    p = make_plateau_small(4, 1, 1e-2)
    a = verify_profile(p, 3, workers=1).to_csv()
    b = verify_profile(p, 3, workers=3).to_csv()
    assert a == b


BATTERY = [
    make_plateau_large(3, 1, 0.05),
    make_plateau_large(5, 2, 1e-2),
    make_plateau_small(4, 1, 0.05),
    make_plateau_h0(1.5, 1e-2, 0.6),
    make_piecewise(4, 1, [(0, 0.9), (0.3, 0.2), (0.6, 0.2)]),
    make_piecewise(3, 2, [(0, 2.5), (0.5, 0.4), (1.0, 0.4)]),
]


@pytest.mark.parametrize("p", BATTERY, ids=lambda p: p.tag)
def test_battery_passes_and_telescopes(p):
    rep = verify_profile(p, 3)
    assert rep.passed, rep.to_csv()
    for row in rep.rows[1:]:
        assert row.ratio < ratio_bound(p.n, row.k)
    sigma_last = rep.rows[-1].sigma_k1
    assert math.fsum(row.gap for row in rep.rows) == pytest.approx(sigma_last, rel=1e-12)

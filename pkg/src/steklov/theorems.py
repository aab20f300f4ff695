"""Bound constants for Steklov ratios and gaps on revolution metrics, and verdicts.

For a profile ``h`` satisfying the pole conditions, the per-mode Steklov values
``sigma_(k)`` obey

* ``sigma_(k+1) / sigma_(k) < lambda_(k+1) / lambda_(k)`` for ``n >= 3``;
* a quantitative improvement ``... <= lambda_(k+1)/lambda_(k) - gamma`` when
  ``h <= C2`` on ``[0, R]`` and ``h >= C1`` on ``[0, R1]``;
* for ``n = 3``: ``sigma_(k) < R lambda_(k) / h(0)^2`` and
  ``sigma_(k+1) - sigma_(k) < R (lambda_(k+1) - lambda_(k)) / h(0)^2``;
* for ``n >= 4`` with ``h <= C2``:
  ``sigma_(k+1) - sigma_(k) <= (lambda_(k+1) - lambda_(k)) C2^(n-3) R / h(0)^(n-1)``.

In dimension 2 the spectrum is explicit, ``sigma_(k) = k / h(0)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from .fem import build_mesh, steklov_mode_fem
from .modal import format_number, sphere_eigenvalue
from .profile import Profile, certify_caps
from .shoot import SolverOptions, steklov_mode

__all__ = [
    "BoundCheck",
    "BoundRow",
    "BoundReport",
    "InconsistentHypothesisError",
    "ratio_bound",
    "n2_exact",
    "gamma_bound",
    "gap_bound_3d",
    "sigma_bound_3d",
    "gap_bound_highdim",
    "verdict_tolerance",
    "verify_profile",
    "default_workers",
]

CSV_HEADER = ["k", "sigma_k", "sigma_k1", "ratio", "gap", "bound_name", "rhs", "margin", "verdict"]
CROSSCHECK_RTOL = 1e-3


class InconsistentHypothesisError(ValueError):
    """Bound inputs that contradict the hypotheses they encode."""


def _require_int(name: str, value, lo: int) -> int:
    if int(value) != value or value < lo:
        raise ValueError(f"{name} must be an integer >= {lo}, got {value}")
    return int(value)


def ratio_bound(n: int, k: int) -> float:
    """``lambda_(k+1) / lambda_(k) = (k+1)(n+k-1) / (k(n+k-2))``."""
    if n == 2:
        raise ValueError("n = 2 has the exact spectrum k / h(0); use n2_exact")
    n = _require_int("n", n, 3)
    k = _require_int("k", k, 1)
    return (k + 1) * (n + k - 1) / (k * (n + k - 2))


def n2_exact(k: int, h0: float) -> float:
    """Steklov value of mode ``k`` in dimension 2: ``k / h0``."""
    k = _require_int("k", k, 0)
    if not h0 > 0:
        raise ValueError("h0 must be positive")
    return k / h0


def gamma_bound(n: int, k: int, R: float, R1: float, C1: float, C2: float) -> float:
    """Improvement ``gamma`` of the ratio bound for profiles capped by ``C1, C2`` on ``[0, R1]``."""
    n = _require_int("n", n, 3)
    k = _require_int("k", k, 1)
    if not 0 < R1 < R:
        raise ValueError("need 0 < R1 < R")
    if not 0 < C1 < C2:
        raise ValueError("need 0 < C1 < C2")
    lk = sphere_eigenvalue(n, k)
    dl = sphere_eigenvalue(n, k + 1) - lk
    g1 = (C1 ** (2 * (n - 1)) / C2 ** (2 * (n - 2)) / (4 * R1)
          * dl / (R * lk**2 + C2**2 * lk / (R - R1)))
    g2 = (C1 ** (4 * (n - 2)) / C2 ** (2 * (2 * n - 3)) * R1**3 / 128
          * dl / (R + C2**2 / ((R - R1) * lk)))
    return min(g1, g2)


def gap_bound_3d(R: float, h0: float, k: int) -> float:
    """``R (lambda_(k+1) - lambda_(k)) / h0^2`` with ``n = 3``, i.e. ``2R(k+1)/h0^2``."""
    k = _require_int("k", k, 0)
    if not (R > 0 and h0 > 0):
        raise ValueError("R and h0 must be positive")
    return R * (sphere_eigenvalue(3, k + 1) - sphere_eigenvalue(3, k)) / h0**2


def sigma_bound_3d(R: float, h0: float, k: int) -> float:
    """``R lambda_(k) / h0^2 = R k (k+1) / h0^2`` with ``n = 3``."""
    k = _require_int("k", k, 1)
    if not (R > 0 and h0 > 0):
        raise ValueError("R and h0 must be positive")
    return R * sphere_eigenvalue(3, k) / h0**2


def gap_bound_highdim(n: int, k: int, R: float, C2: float, h0: float) -> float:
    """``(lambda_(k+1) - lambda_(k)) C2^(n-3) R / h0^(n-1)`` for ``h <= C2``, ``n >= 4``."""
    n = _require_int("n", n, 4)
    k = _require_int("k", k, 0)
    if not (R > 0 and h0 > 0 and C2 > 0):
        raise ValueError("R, C2 and h0 must be positive")
    if h0 > C2:
        raise InconsistentHypothesisError(f"h(0) = {h0} exceeds the cap C2 = {C2}")
    dl = sphere_eigenvalue(n, k + 1) - sphere_eigenvalue(n, k)
    return dl * C2 ** (n - 3) * R / h0 ** (n - 1)


def verdict_tolerance(rhs: float) -> float:
    return 1e-7 + 1e-4 * abs(rhs)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    margin: float
    verdict: str  # "pass" | "fail" | "indeterminate"


def _check(name: str, lhs: float, rhs: float) -> BoundCheck:
    margin = rhs - lhs
    if not math.isfinite(margin):
        return BoundCheck(name, lhs, rhs, margin, "indeterminate")
    verdict = "pass" if margin > -verdict_tolerance(rhs) else "fail"
    return BoundCheck(name, lhs, rhs, margin, verdict)


@dataclass
class BoundRow:
    k: int
    sigma_k: float
    sigma_k1: float
    ratio: float
    gap: float
    checks: list[BoundCheck] = field(default_factory=list)


@dataclass
class BoundReport:
    profile: str
    n: int
    R: float
    h0: float
    rows: list[BoundRow]
    metadata: dict = field(default_factory=dict)

    @property
    def verdicts(self) -> list[str]:
        return [c.verdict for row in self.rows for c in row.checks]

    @property
    def indeterminate(self) -> bool:
        return "indeterminate" in self.verdicts

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(v == "pass" for v in self.verdicts) \
            and self.metadata.get("crosscheck_ok", True)

    def check(self, k: int, name: str) -> BoundCheck:
        for row in self.rows:
            if row.k == k:
                for c in row.checks:
                    if c.name == name:
                        return c
        raise KeyError((k, name))

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "n": self.n,
            "R": self.R,
            "h0": self.h0,
            "passed": self.passed,
            "rows": [asdict(row) for row in self.rows],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            for c in row.checks:
                writer.writerow([row.k, format_number(row.sigma_k), format_number(row.sigma_k1),
                                 format_number(row.ratio), format_number(row.gap), c.name,
                                 format_number(c.rhs), format_number(c.margin), c.verdict])
        return buf.getvalue()


def default_workers() -> int:
    """Worker cap from ``STEKLOV_THREADS`` (default 1)."""
    raw = os.environ.get("STEKLOV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


L_SYMBOL_NOTE = ("the supremum constant for sigma_(k) in dimension 3 is printed with an undefined "
                 "symbol L; this harness uses R, matching the strict inequality it refines")


def verify_profile(profile: Profile, k_max: int = 3, opts: SolverOptions | None = None,
                   R1: float | None = None, C1: float | None = None, C2: float | None = None,
                   crosscheck: bool = False, workers: int | None = None) -> BoundReport:
    """Compute ``sigma_(0..k_max+1)`` and evaluate every applicable bound.

    Rows ``k = 0..k_max`` carry ``sigma_(k)``, ``sigma_(k+1)``, their ratio
    (``k >= 1``) and gap, plus one :class:`BoundCheck` per applicable bound.
    A mode whose solve fails yields NaN values and ``indeterminate`` verdicts.
    The ``gamma`` and high-dimensional gap bounds are applied only after the
    caps are certified by dense sampling.
    """
    k_max = _require_int("k_max", k_max, 2)
    n = profile.n
    if n < 3:
        raise ValueError("verification needs n >= 3; in dimension 2 the spectrum is n2_exact")
    opts = opts or SolverOptions()
    workers = default_workers() if workers is None else max(1, int(workers))
    R, h0 = profile.R, float(profile.h0)
    meta: dict = {"notes": [L_SYMBOL_NOTE], "solver": {"rtol": opts.rtol, "method": opts.method}}

    def solve(k: int) -> tuple[float, str | None]:
        try:
            return steklov_mode(profile, sphere_eigenvalue(n, k), opts), None
        except Exception as exc:  # recorded per row; the report stays usable
            return float("nan"), f"{type(exc).__name__}: {exc}"

    results = _map(solve, list(range(k_max + 2)), workers)
    sig = [s for s, _ in results]
    errors = {k: e for k, (_, e) in enumerate(results) if e}
    if errors:
        meta["solver_errors"] = errors

    caps = None
    if R1 is not None and C1 is not None and C2 is not None:
        caps = certify_caps(profile, R1, C1, C2)
        meta["caps"] = {"R1": R1, "C1": C1, "C2": C2, **caps}
        if not caps["passed"]:
            meta["notes"].append("caps not certified: conditional ratio bound skipped")
    upper_ok = False
    if C2 is not None:
        upper_ok = caps["upper_ok"] if caps is not None else certify_caps(profile, 0.5 * R, 0.0, C2)["upper_ok"]
        meta.setdefault("caps", {"C2": C2})["upper_ok"] = upper_ok
    gamma_by_k = {}

    rows = []
    for k in range(k_max + 1):
        s0, s1 = sig[k], sig[k + 1]
        ratio = s1 / s0 if k >= 1 and s0 > 0 else float("nan")
        row = BoundRow(k, s0, s1, ratio, s1 - s0)
        if k >= 1:
            row.checks.append(_check("ratio", ratio, ratio_bound(n, k)))
            if caps is not None and caps["passed"]:
                g = gamma_bound(n, k, R, R1, C1, C2)
                gamma_by_k[k] = g
                row.checks.append(_check("ratio_gamma", ratio, ratio_bound(n, k) - g))
        if n == 3:
            row.checks.append(_check("gap_3d", row.gap, gap_bound_3d(R, h0, k)))
            if k >= 1:
                row.checks.append(_check("sigma_3d", s0, sigma_bound_3d(R, h0, k)))
        elif upper_ok:
            row.checks.append(_check("gap_highdim", row.gap, gap_bound_highdim(n, k, R, C2, h0)))
        rows.append(row)
    if gamma_by_k:
        meta["gamma"] = gamma_by_k

    if crosscheck:
        mesh = build_mesh(profile, opts.fem_N, "junction")
        cc = {}
        ok = True
        for k in range(1, k_max + 2):
            fem = steklov_mode_fem(profile, sphere_eigenvalue(n, k), mesh)
            rel = abs(fem - sig[k]) / sig[k] if sig[k] > 0 else float("nan")
            ok = ok and rel <= CROSSCHECK_RTOL
            cc[k] = {"sigma_fem": fem, "rel_diff": rel}
        meta["crosscheck"] = cc
        meta["crosscheck_ok"] = bool(ok)

    return BoundReport(profile.tag, n, R, h0, rows, meta)

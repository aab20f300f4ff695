"""Parameter sweeps over the plateau families and convergence-trend fits.

Three one-parameter families push a Steklov ratio or bound to its extreme as
``eps -> 0``:

``A_large``
    plateau of height ``P(eps)`` (``P^(n-3) = eps^(-1/2)``); ``sigma_(k)`` grows
    like ``lambda_(k) (R - eps) P^(n-3)`` and the ratio tends to
    ``lambda_(k+1) / lambda_(k)``.
``B_small``
    plateau of height ``eps^2`` (``n >= 4``); ``sigma_(k) ~ lambda_(k) eps`` and
    the gap vanishes like ``(lambda_(k+1) - lambda_(k)) eps``.
``C_h0``
    ``n = 3`` plateau of height ``h0 eps^(-1/2)``; ``sigma_(k)`` approaches
    ``R lambda_(k) / h0^2`` from below.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .fem import build_mesh, steklov_mode_fem
from .modal import format_number, sphere_eigenvalue
from .profile import EPS_MIN, Profile, make_plateau_h0, make_plateau_large, make_plateau_small, plateau_large_level
from .shoot import SolverOptions, steklov_mode
from .theorems import (
    _check,
    _map,
    default_workers,
    gap_bound_3d,
    ratio_bound,
    sigma_bound_3d,
)

__all__ = [
    "SweepRow",
    "TrendFit",
    "InsufficientDataError",
    "FAMILIES",
    "default_grid",
    "family_profile",
    "sweep_family",
    "fit_trend",
    "sweep_to_csv",
    "sweep_to_svg",
]

FAMILIES = ("A_large", "B_small", "C_h0")
CSV_HEADER = ["eps", "sigma_k", "sigma_k1", "ratio", "gap", "target_ratio", "pred_sigma", "pred_gap", "status"]


class InsufficientDataError(ValueError):
    pass


@dataclass
class SweepRow:
    eps: float
    sigma_k: float
    sigma_k1: float
    ratio: float
    gap: float
    target_ratio: float
    target_gap: float  # inf marks a diverging gap
    pred_sigma: float
    pred_gap: float
    status: str = "ok"  # ok | bound_violation | failed
    fem_rel: float | None = None
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "failed"

    def value(self, quantity: str) -> float:
        if quantity == "sigma":
            return self.sigma_k
        if quantity in ("ratio", "gap", "sigma_k1"):
            return getattr(self, quantity)
        raise ValueError(f"unknown quantity {quantity!r}")


def _family(name: str) -> str:
    key = name.lower().replace("-", "_")
    for fam in FAMILIES:
        if key == fam.lower() or key == fam.split("_")[0].lower():
            return fam
    raise ValueError(f"unknown family {name!r}; expected one of {FAMILIES}")


def _check_dimension(family: str, n: int) -> None:
    if family == "A_large" and n < 3:
        raise ValueError("A_large needs n >= 3")
    if family == "B_small" and n < 4:
        raise ValueError("B_small needs n >= 4")
    if family == "C_h0" and n != 3:
        raise ValueError("C_h0 is defined for n = 3 only")


def _eps_upper(family: str, R: float) -> float:
    return {"A_large": min(R / 8, 1.0), "B_small": min(R / 4, 1.0), "C_h0": min(R / 8, 1.0)}[family]


def default_grid(family: str, R: float = 1.0, per_decade: int = 5,
                 hi: float = 1e-1, lo: float = 1e-4) -> tuple[list[float], str]:
    """Geometric grid from ``hi`` down to ``lo`` clipped to the family's admissible range.

    Returns the grid and a human-readable note on any clipping.
    """
    family = _family(family)
    m = int(round(per_decade * math.log10(hi / lo)))
    grid = list(np.logspace(math.log10(hi), math.log10(lo), m + 1))
    upper = _eps_upper(family, R)
    kept = [e for e in grid if EPS_MIN <= e < upper]
    note = ""
    if len(kept) < len(grid):
        note = f"clipped {len(grid) - len(kept)} points outside [{EPS_MIN:g}, {upper:g}) for {family}"
    return kept, note


def family_profile(family: str, n: int, R: float, eps: float, h0: float = 1.0) -> Profile:
    family = _family(family)
    if family == "A_large":
        return make_plateau_large(n, R, eps)
    if family == "B_small":
        return make_plateau_small(n, R, eps)
    return make_plateau_h0(R, eps, h0)


def _targets(family: str, prof: Profile, k: int, eps: float, h0: float) -> dict:
    n, R = prof.n, prof.R
    lk, lk1 = sphere_eigenvalue(n, k), sphere_eigenvalue(n, k + 1)
    target_ratio = lk1 / lk
    if family == "A_large":
        scale = (R - eps) * plateau_large_level(n, eps) ** (n - 3)
        return {"target_ratio": target_ratio, "target_gap": math.inf if n >= 4 else (lk1 - lk) * R,
                "pred_sigma": lk * scale, "pred_gap": (lk1 - lk) * scale}
    if family == "B_small":
        return {"target_ratio": target_ratio, "target_gap": 0.0,
                "pred_sigma": lk * eps, "pred_gap": (lk1 - lk) * eps}
    return {"target_ratio": target_ratio, "target_gap": R * (lk1 - lk) / h0**2,
            "pred_sigma": R * lk / h0**2, "pred_gap": R * (lk1 - lk) / h0**2}


def _verdicts(prof: Profile, k: int, s0: float, s1: float) -> list:
    checks = [_check("ratio", s1 / s0, ratio_bound(prof.n, k))]
    if prof.n == 3:
        h0 = float(prof.h0)
        checks.append(_check("gap_3d", s1 - s0, gap_bound_3d(prof.R, h0, k)))
        checks.append(_check("sigma_3d", s0, sigma_bound_3d(prof.R, h0, k)))
        checks.append(_check("sigma_3d", s1, sigma_bound_3d(prof.R, h0, k + 1)))
    return checks


def sweep_family(family: str, n: int, k: int = 1, R: float = 1.0, eps_grid=None, h0: float = 1.0,
                 opts: SolverOptions | None = None, crosscheck: bool = True,
                 workers: int | None = None) -> list[SweepRow]:
    """Tabulate ``sigma_(k)``, ``sigma_(k+1)``, ratio and gap along ``eps_grid``.

    Shooting computes every row; with ``crosscheck`` the coarsest and finest
    rows are recomputed by finite elements and the relative difference of
    ``sigma_(k)`` is stored in ``fem_rel``.  A solver failure marks its row
    ``failed`` and the sweep continues.
    """
    family = _family(family)
    _check_dimension(family, n)
    if int(k) != k or k < 1:
        raise ValueError("k must be an integer >= 1")
    if eps_grid is None:
        eps_grid, _ = default_grid(family, R)
    grid = [float(e) for e in eps_grid]
    if len(grid) < 1:
        raise ValueError("eps_grid is empty")
    if any(b >= a for a, b in zip(grid[:-1], grid[1:])):
        raise ValueError("eps_grid must be strictly decreasing")
    upper = _eps_upper(family, R)
    if grid[0] >= upper or grid[-1] < EPS_MIN:
        raise ValueError(f"eps_grid must lie in [{EPS_MIN:g}, {upper:g}) for {family}")
    opts = opts or SolverOptions()
    workers = default_workers() if workers is None else max(1, int(workers))
    lk, lk1 = sphere_eigenvalue(n, k), sphere_eigenvalue(n, k + 1)
    nan = float("nan")

    def row_at(i_eps: tuple[int, float]) -> SweepRow:
        i, eps = i_eps
        prof = family_profile(family, n, R, eps, h0)
        tgt = _targets(family, prof, k, eps, h0)
        try:
            s0 = steklov_mode(prof, lk, opts)
            s1 = steklov_mode(prof, lk1, opts)
        except Exception as exc:
            return SweepRow(eps, nan, nan, nan, nan, **tgt, status="failed", note=f"{type(exc).__name__}: {exc}")
        row = SweepRow(eps, s0, s1, s1 / s0, s1 - s0, **tgt)
        bad = [c.name for c in _verdicts(prof, k, s0, s1) if c.verdict != "pass"]
        if bad:
            row.status = "bound_violation"
            row.note = ",".join(bad)
        if crosscheck and i in (0, len(grid) - 1):
            fem = steklov_mode_fem(prof, lk, build_mesh(prof, opts.fem_N, "junction"))
            row.fem_rel = abs(fem - s0) / s0
        return row

    return _map(row_at, list(enumerate(grid)), workers)


@dataclass
class TrendFit:
    quantity: str
    monotone: bool
    direction: str  # increasing | decreasing | constant | mixed (along decreasing eps)
    limit_estimate: float
    rate_estimate: float
    rate_defined: bool
    converging: bool
    n_rows: int
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def fit_trend(rows: list[SweepRow], quantity: str = "ratio", tail: int | None = None,
              exponent: float | None = None) -> TrendFit:
    """Monotonicity, limit and rate of ``quantity`` along decreasing ``eps``.

    The limit is the Aitken delta-squared extrapolation of the last three rows
    (exact for ``q = L + C eps^p`` on a geometric grid).  When successive
    differences do not shrink the sequence is treated as divergent: the limit
    is ``+-inf`` and the rate is the log-log slope of ``|q|``.  Otherwise the
    rate is the log-log slope of ``|q - L|`` against ``eps`` over the last
    ``tail`` rows (all rows by default), the exponent ``p`` above.

    Passing a known correction ``exponent`` replaces Aitken by classical
    Richardson extrapolation of the last two rows, ``q = L + C eps^exponent``.
    """
    good = [r for r in rows if r.ok and math.isfinite(r.value(quantity))]
    if len(good) < 3:
        raise InsufficientDataError(f"need >= 3 successful rows, got {len(good)}")
    eps = np.array([r.eps for r in good])
    q = np.array([r.value(quantity) for r in good])
    if np.any(np.diff(eps) >= 0):
        raise ValueError("rows must be ordered by decreasing eps")
    d = np.diff(q)
    scale = max(np.max(np.abs(q)), 1e-300)
    flat = np.abs(d) <= 1e-12 * scale
    if np.all(flat):
        direction = "constant"
    elif np.all(d > 0):
        direction = "increasing"
    elif np.all(d < 0):
        direction = "decreasing"
    else:
        direction = "mixed"
    monotone = direction in ("increasing", "decreasing")
    notes = []

    q1, q2, q3 = q[-3:]
    d1, d2 = q2 - q1, q3 - q2
    if exponent is not None:
        rho = (eps[-1] / eps[-2]) ** exponent
        limit, converging = float((q3 - rho * q2) / (1.0 - rho)), True
        notes.append(f"Richardson with known exponent {exponent:g}")
    elif abs(d2) <= 1e-12 * scale:
        limit, converging = float(q3), True
    elif abs(d2) >= abs(d1):
        limit, converging = math.copysign(math.inf, d2), False
        notes.append("successive differences do not shrink; treated as divergent")
    else:
        limit, converging = float(q3 - d2 * d2 / (d2 - d1)), True

    sel = slice(-tail, None) if tail else slice(None)
    resid = np.abs(q - limit) if converging else np.abs(q)
    x, y = np.log(eps[sel]), resid[sel]
    use = y > 1e-12 * scale
    if np.count_nonzero(use) >= 2 and np.ptp(x[use]) > 0:
        rate = float(np.polyfit(x[use], np.log(y[use]), 1)[0])
        rate_defined = True
    else:
        rate, rate_defined = float("nan"), False
        notes.append("rate undefined: residuals vanish")
    return TrendFit(quantity, monotone, direction, limit, rate, rate_defined, converging, len(good), notes)


def sweep_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([format_number(r.eps), format_number(r.sigma_k), format_number(r.sigma_k1),
                         format_number(r.ratio), format_number(r.gap), format_number(r.target_ratio),
                         format_number(r.pred_sigma), format_number(r.pred_gap), r.status])
    return buf.getvalue()


def sweep_to_svg(rows: list[SweepRow], quantity: str = "ratio", width: int = 480, height: int = 320) -> str:
    """Polyline of ``quantity`` against ``log10 eps`` with a dashed target line."""
    pts = [(math.log10(r.eps), r.value(quantity)) for r in rows if r.ok and math.isfinite(r.value(quantity))]
    target = rows[0].target_ratio if rows and quantity == "ratio" else None
    pad = 40
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] + ([target] if target is not None else [])
    ys = ys or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):  # decreasing eps runs left to right
        return pad + (x1 - x) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    line = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="12">log10 eps</text>',
        f'<text x="12" y="{pad - 12}" font-size="12">{quantity}</text>',
        f'<text x="{pad}" y="{height - pad + 14}" font-size="10">{x1:.2f}</text>',
        f'<text x="{width - pad}" y="{height - pad + 14}" font-size="10" text-anchor="end">{x0:.2f}</text>',
        f'<text x="{pad - 4}" y="{py(y0):.2f}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{pad - 4}" y="{py(y1):.2f}" font-size="10" text-anchor="end">{y1:.4g}</text>',
    ]
    if target is not None:
        parts.append(f'<line x1="{pad}" y1="{py(target):.2f}" x2="{width - pad}" y2="{py(target):.2f}" '
                     f'stroke="gray" stroke-dasharray="4,3"/>')
    parts.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{line}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

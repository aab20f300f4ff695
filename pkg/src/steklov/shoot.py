"""Per-mode Steklov values by shooting from the pole.

For a sphere eigenvalue ``lam`` the radial part ``a`` of an eigenfunction solves

    (h^(n-1) a')' = lam h^(n-3) a   on (0, R),   a regular at the pole r = R,

and the Steklov value is ``sigma = -a'(0) / a(0)`` (the outward normal at the
boundary ``r = 0`` is ``-d/dr``).  Near the pole ``h(R - s) = c s + O(s^3)``
with only odd powers, so ``r = R`` is a regular singular point with indicial
relation ``beta (beta + n - 2) = lam / c^2``.  The regular branch is seeded
from a Frobenius series and carried to ``r = 0``.

Two propagation routes are provided:

``riccati`` (default)
    Integrates the flux ratio ``w = h^(n-1) a' / a`` together with ``log a``.
    ``w`` is bounded and settles onto a stable equilibrium on long plateaus,
    so no overflow handling is needed.  Pieces of the profile that are affine
    in ``r`` are crossed with their closed-form transfer maps; smooth
    transition windows are integrated adaptively.

``linear``
    Integrates ``a' = p / h^(n-1)``, ``p' = lam h^(n-3) a`` adaptively over
    every piece, rescaling the state whenever it exceeds ``1e100``.  Fine for
    moderate plateaus; impractically slow when ``sqrt(lam) / h`` is huge.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import DOP853, Radau

from .profile import Piece, Profile, ProfileError, affine_value

__all__ = [
    "ShootError",
    "SeedError",
    "DegenerateShootError",
    "ConvergenceError",
    "InadmissibleTestFunction",
    "SolverOptions",
    "ModeProblem",
    "FrobeniusSeed",
    "ModeSolution",
    "indicial_exponent",
    "default_s0",
    "frobenius_seed",
    "integrate_mode",
    "solve_mode",
    "steklov_mode",
    "rayleigh",
    "cutoff_trial",
    "piecewise_linear_trial",
]

RENORM_THRESHOLD = 1e100


class ShootError(RuntimeError):
    pass


class SeedError(ShootError):
    """The profile is not an odd power series near the pole on the seed interval."""


class DegenerateShootError(ShootError):
    """Boundary trace ``a(0)`` is numerically zero relative to the solution."""


class ConvergenceError(ShootError):
    pass


class InadmissibleTestFunction(ValueError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    rtol: float = 1e-10
    atol: float = 1e-14
    max_steps: int = 200_000
    method: str = "riccati"
    exact_affine: bool = True
    max_refine: int = 6
    fem_N: int = 4000

    def __post_init__(self):
        if not 1e-12 <= self.rtol <= 1e-2:
            raise ValueError(f"rtol must lie in [1e-12, 1e-2], got {self.rtol}")
        if self.method not in ("riccati", "linear"):
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def integration_rtol(self) -> float:
        return max(self.rtol * 1e-2, 1e-13)


@dataclass(frozen=True)
class ModeProblem:
    profile: Profile
    lam: float
    check: bool = True

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        p = self.profile
        if self.check and p.strict:
            if abs(p.h(p.R)) > 1e-8 * max(1.0, p.R) or abs(p.dh(p.R) + 1.0) > 1e-8:
                raise ProfileError(f"{p.tag} violates h(R) = 0, h'(R) = -1")


@dataclass
class FrobeniusSeed:
    beta: float
    coeffs: np.ndarray
    s0: float
    M: int
    slope: float
    a: float
    da_dr: float
    log_a: float
    w: float
    trunc_err: float


@dataclass
class ModeSolution:
    sigma: float
    a_samples: np.ndarray
    a0: float
    p0: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"sigma": self.sigma, "a0": self.a0, "p0": self.p0, **self.diagnostics}, default=float)


# ---------------------------------------------------------------------------
# Frobenius seed


def indicial_exponent(n: int, lam: float) -> float:
    """Non-negative root of ``beta (beta + n - 2) = lam``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    d = n - 2
    return 0.5 * (-d + math.sqrt(d * d + 4.0 * lam))


def default_s0(profile: Profile) -> float:
    """Seed offset: half the distance from the pole to the nearest junction, at most R/20."""
    js = profile.junctions
    rho = profile.R - js[-1] if js else profile.R
    return min(rho / 2, profile.R / 20)


def _series_power(f: np.ndarray, alpha: float) -> np.ndarray:
    """Coefficients of ``f(s)^alpha`` for a series with ``f[0] = 1`` (Miller's recurrence)."""
    m_max = len(f) - 1
    out = np.zeros_like(f)
    out[0] = 1.0
    for m in range(1, m_max + 1):
        k = np.arange(1, m + 1)
        out[m] = np.sum(((alpha + 1) * k - m) * f[k] * out[m - k]) / m
    return out


def _odd_fit(profile: Profile, s_fit: float, n_odd: int) -> tuple[np.ndarray, float]:
    """Least-squares odd polynomial fit of ``s -> h(R - s)`` on ``(0, s_fit]``."""
    m = 4 * n_odd
    j = np.arange(1, m + 1)
    x = 0.5 * (1 + np.cos(np.pi * (j - 0.5) / m))  # Chebyshev nodes in (0, 1)
    powers = 2 * np.arange(n_odd) + 1
    r = profile.R - s_fit * x
    x = (profile.R - r) / s_fit  # R - r is exact here, so h(r) and s agree to rounding
    basis = x[:, None] ** powers[None, :]
    vals = profile.h(r)
    coef, *_ = np.linalg.lstsq(basis, vals, rcond=None)
    resid = np.max(np.abs(basis @ coef - vals)) / max(np.max(np.abs(vals)), 1e-300)
    return coef / s_fit**powers, float(resid)


def frobenius_seed(prob: ModeProblem, M: int = 8, s0: float | None = None) -> FrobeniusSeed:
    """Regular Frobenius solution at the pole, evaluated at ``r = R - s0``.

    With ``h(R - s) = c s (1 + d2 s^2 + d4 s^4 + ...)`` and
    ``a = s^beta sum_m C_m s^m``, substitution gives, for ``N >= 1``,

        C_N N (N + 2 beta + n - 2) = -sum_{j=1..N} C_{N-j} [A_j (N - j + beta)(N + beta + n - 2) - l B_j]

    where ``A = H^(n-1)``, ``B = H^(n-3)``, ``H = 1 + d2 s^2 + ...`` and ``l = lam / c^2``.
    """
    if M < 4:
        raise ValueError("truncation order M must be >= 4")
    p = prob.profile
    n, lam = p.n, float(prob.lam)
    if s0 is None:
        s0 = default_s0(p)
    s0 = p.R - (p.R - s0)  # make R - s0 exactly representable
    js = p.junctions
    rho = p.R - js[-1] if js else p.R
    if not 0 < s0 <= rho:
        raise SeedError(f"s0 = {s0:g} must lie in (0, {rho:g}]; reduce s0")
    n_odd = M // 2 + 1
    s_fit = min(2 * s0, rho)
    odd, resid = _odd_fit(p, s_fit, n_odd)
    if resid > 1e-12 or not odd[0] > 0:
        raise SeedError(f"h is not an odd power series near the pole on (0, {s_fit:g}] (residual {resid:.2e}); reduce s0")
    slope = float(odd[0])
    H = np.zeros(M + 1)
    H[0::2] = (odd / slope)[: len(H[0::2])]
    A = _series_power(H, n - 1)
    B = _series_power(H, n - 3)
    ell = lam / slope**2
    beta = indicial_exponent(n, ell)

    C = np.zeros(M + 1)
    C[0] = 1.0
    for N in range(1, M + 1):
        j = np.arange(1, N + 1)
        acc = np.sum(C[N - j] * (A[j] * (N - j + beta) * (N + beta + n - 2) - ell * B[j]))
        C[N] = -acc / (N * (N + 2 * beta + n - 2))

    m = np.arange(M + 1)
    terms = C * s0**m
    total = float(np.sum(terms))
    dtotal = float(np.sum(C * (m + beta) * s0 ** (m - 1.0)))  # s^-beta da/ds
    trunc = float((abs(terms[-1]) + abs(terms[-2])) / abs(total))
    if trunc > 1e-12:
        raise SeedError(f"Frobenius truncation error {trunc:.2e} too large at s0 = {s0:g}; reduce s0")
    a = s0**beta * total
    da_ds = s0**beta * dtotal
    h_s0 = p.h(p.R - s0)
    return FrobeniusSeed(
        beta=beta,
        coeffs=C,
        s0=float(s0),
        M=M,
        slope=slope,
        a=a,
        da_dr=-da_ds,
        log_a=beta * math.log(s0) + math.log(total),
        w=-(h_s0 ** (n - 1)) * dtotal / total,
        trunc_err=trunc,
    )


# ---------------------------------------------------------------------------
# propagation helpers


def _log_cosh(x: float) -> float:
    ax = abs(x)
    return ax + math.log1p(math.exp(-2 * ax)) - math.log(2.0)


def _affine_transfer(f: tuple, n: int, lam: float, r_s: float, r_e: float,
                     w: float, log_a: float, n_samples: int = 8):
    """Carry ``(w, log a)`` from ``r_s`` to ``r_e`` across an affine ``h`` in closed form."""
    B = f[1]
    rs = np.linspace(r_s, r_e, n_samples + 1)[1:]
    out = []
    if lam == 0.0:
        if w != 0.0:
            raise ShootError("closed-form transfer needs w = 0 when lambda = 0")
        return w, log_a, [(r, log_a) for r in rs]

    if B == 0.0:
        c = f[0]
        mu = math.sqrt(lam) / c
        kappa = math.sqrt(lam) * c ** (n - 2)
        u = w / kappa
        for r in rs:
            x = mu * (r - r_s)
            T = math.tanh(x)
            D = 1.0 + u * T
            if not D > 0:
                raise DegenerateShootError("radial solution vanishes inside a plateau")
            out.append((r, log_a + _log_cosh(x) + math.log(D), kappa * (u + T) / D))
    else:
        ell = lam / (B * B)
        b1 = indicial_exponent(n, ell)
        b2 = -(n - 2) - b1
        x_s = float(affine_value(f, r_s))
        v = w / (B * x_s ** (n - 2))
        for r in rs:
            x_e = float(affine_value(f, r))
            if not (x_s > 0 and x_e > 0):
                raise ShootError("affine piece reaches h <= 0")
            lr = math.log(x_e / x_s)
            if lr >= 0:
                q = math.exp((b2 - b1) * lr)
                den = (v - b2) + (b1 - v) * q
                num = b1 * (v - b2) + b2 * (b1 - v) * q
                lead = b1 * lr
            else:
                q = math.exp((b1 - b2) * lr)
                den = (v - b2) * q + (b1 - v)
                num = b1 * (v - b2) * q + b2 * (b1 - v)
                lead = b2 * lr
            if not den > 0:
                raise DegenerateShootError("radial solution vanishes on an affine piece")
            v_e = num / den
            out.append((r, log_a + lead + math.log(den / (b1 - b2)), B * x_e ** (n - 2) * v_e))
    w_e = out[-1][2]
    return w_e, out[-1][1], [(r, la) for r, la, _ in out]


def _march(fun, t0, y0, t1, method, rtol, atol, max_steps, jac=None, renorm=None):
    """Adaptive stepping with a step cap and optional rescaling of linear systems.

    Returns ``(ts, ys, log_scales, steps, rescalings)`` where the true state at
    ``ts[i]`` is ``ys[i] * exp(log_scales[i])``.
    """
    cls = {"DOP853": DOP853, "Radau": Radau}[method]
    kw = {"jac": jac} if (jac is not None and method == "Radau") else {}
    y = np.asarray(y0, dtype=float)
    log_scale = 0.0
    ts, ys, ls = [t0], [y.copy()], [0.0]
    steps = rescalings = 0
    solver = cls(fun, t0, y, t1, rtol=rtol, atol=atol, **kw)
    while solver.status == "running":
        if steps >= max_steps:
            raise ConvergenceError(f"step budget {max_steps} exhausted at r = {solver.t:g}")
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            raise ConvergenceError(f"integrator failed at r = {solver.t:g}: {msg}")
        y = solver.y.copy()
        if renorm is not None:
            big = float(np.max(np.abs(y)))
            if big > renorm:
                y /= big
                log_scale += math.log(big)
                rescalings += 1
                if solver.status == "running":
                    solver = cls(fun, solver.t, y, t1, rtol=rtol, atol=atol, **kw)
        ts.append(solver.t)
        ys.append(y)
        ls.append(log_scale)
    return ts, ys, ls, steps, rescalings


def _stiffness(piece: Piece, lam: float, lo: float, hi: float) -> float:
    hs = piece.value(np.linspace(lo, hi, 33))
    return math.sqrt(lam) * (hi - lo) / float(np.min(hs))


def _riccati_path(prob: ModeProblem, seed: FrobeniusSeed, opts: SolverOptions):
    p = prob.profile
    n, lam = p.n, float(prob.lam)
    rtol = opts.integration_rtol
    r = p.R - seed.s0
    w, log_a = seed.w, seed.log_a
    samples = [(r, log_a)]
    steps = 0
    for piece in reversed(p.pieces):
        if piece.a >= r:
            continue
        lo = max(piece.a, 0.0)
        if piece.f1 is None and opts.exact_affine:
            w, log_a, pts = _affine_transfer(piece.f0, n, lam, r, lo, w, log_a)
            samples.extend(pts)
        else:
            def fun(t, y, piece=piece):
                h = piece.value(t)
                hn1 = h ** (n - 1)
                return np.array([lam * h ** (n - 3) - y[0] * y[0] / hn1, y[0] / hn1])

            def jac(t, y, piece=piece):
                hn1 = piece.value(t) ** (n - 1)
                return np.array([[-2.0 * y[0] / hn1, 0.0], [1.0 / hn1, 0.0]])

            method = "Radau" if _stiffness(piece, lam, lo, r) > 200 else "DOP853"
            atol = np.array([abs(w) * 1e-6 * rtol + 1e-300, opts.atol])
            ts, ys, _, nst, _ = _march(fun, r, [w, log_a], lo, method, rtol, atol,
                                       opts.max_steps - steps, jac=jac)
            steps += nst
            w, log_a = ys[-1]
            samples.extend((t, y[1]) for t, y in zip(ts[1:], ys[1:]))
        r = lo
        if r <= 0.0:
            break
    h0 = p.h(0.0)
    sigma = -w / h0 ** (n - 1)
    arr = np.array(samples)
    log_a0 = arr[-1, 1]
    a_norm = np.exp(arr[:, 1] - log_a0)
    return sigma, np.column_stack([arr[:, 0], a_norm]), {"steps": steps, "rescalings": 0}


def _linear_path(prob: ModeProblem, seed: FrobeniusSeed, opts: SolverOptions):
    p = prob.profile
    n, lam = p.n, float(prob.lam)
    rtol = opts.integration_rtol
    r = p.R - seed.s0
    y = np.array([seed.a, p.h(r) ** (n - 1) * seed.da_dr])
    log_scale = 0.0
    samples = [(r, math.log(abs(y[0])))]
    steps = rescalings = 0
    edges = [e for e in p.breakpoints[:-1] if e < r][::-1]
    for lo in edges:
        def fun(t, yy):
            h = p.h(t)
            return np.array([yy[1] / h ** (n - 1), lam * h ** (n - 3) * yy[0]])

        ts, ys, ls, nst, nres = _march(fun, r, y, lo, "DOP853", rtol, 1e-300,
                                       opts.max_steps - steps, renorm=RENORM_THRESHOLD)
        steps += nst
        rescalings += nres
        for t, yy, l in zip(ts[1:], ys[1:], ls[1:]):
            with np.errstate(divide="ignore"):
                samples.append((t, math.log(abs(yy[0])) + log_scale + l if yy[0] != 0 else -np.inf))
        y = ys[-1]
        log_scale += ls[-1]
        r = lo
    a0, p0 = y
    arr = np.array(samples)
    log_a0 = math.log(abs(a0)) + log_scale if a0 != 0 else -np.inf
    if not np.isfinite(log_a0) or log_a0 < np.max(arr[:, 1]) + math.log(1e-8):
        raise DegenerateShootError("|a(0)| is below 1e-8 max|a|; boundary trace nearly vanishes")
    sigma = -p0 / (p.h(0.0) ** (n - 1) * a0)
    a_norm = np.exp(arr[:, 1] - log_a0)
    return sigma, np.column_stack([arr[:, 0], a_norm]), {"steps": steps, "rescalings": rescalings}


def integrate_mode(prob: ModeProblem, seed: FrobeniusSeed, opts: SolverOptions | None = None) -> ModeSolution:
    """Propagate the seeded regular solution to ``r = 0`` and read off ``sigma``.

    The returned samples are normalised to ``a(0) = 1``.
    """
    opts = opts or SolverOptions()
    if opts.method == "riccati":
        sigma, samples, diag = _riccati_path(prob, seed, opts)
    else:
        sigma, samples, diag = _linear_path(prob, seed, opts)
    if not math.isfinite(sigma):
        raise ConvergenceError(f"non-finite sigma {sigma!r}")
    if prob.lam > 0 and not sigma > 0:
        raise ShootError(f"sigma = {sigma!r} is not positive for lambda = {prob.lam}")
    h0 = prob.profile.h(0.0)
    diag = {**diag, "seed_order": seed.M, "s0": seed.s0, "beta": seed.beta, "seed_trunc": seed.trunc_err,
            "method": opts.method}
    return ModeSolution(sigma=float(sigma), a_samples=samples, a0=1.0,
                        p0=-float(sigma) * h0 ** (prob.profile.n - 1), diagnostics=diag)


def solve_mode(profile: Profile, lam: float, opts: SolverOptions | None = None, check: bool = True) -> ModeSolution:
    """Steklov value of one mode, refining the seed until ``sigma`` settles to ``rtol``."""
    opts = opts or SolverOptions()
    prob = ModeProblem(profile, float(lam), check)
    if lam == 0:
        samples = np.array([[0.0, 1.0], [profile.R, 1.0]])
        return ModeSolution(0.0, samples, 1.0, 0.0, {"steps": 0, "rescalings": 0, "est_error": 0.0})
    s0, M = default_s0(profile), 8
    prev = None
    last_err = None
    for _ in range(opts.max_refine):
        try:
            seed = frobenius_seed(prob, M, s0)
        except SeedError as exc:
            last_err = exc
            s0, M = s0 / 2, M + 4
            continue
        sol = integrate_mode(prob, seed, opts)
        if prev is not None:
            change = abs(sol.sigma - prev.sigma)
            if change <= opts.rtol * abs(sol.sigma):
                sol.diagnostics["est_error"] = change
                return sol
        prev = sol
        s0, M = s0 / 2, M + 4
    if prev is None:
        raise last_err or ConvergenceError("no admissible seed found")
    raise ConvergenceError(f"sigma did not settle to rtol = {opts.rtol:g} under seed refinement")


def steklov_mode(profile: Profile, lam: float, opts: SolverOptions | None = None, check: bool = True) -> float:
    """Steklov value ``sigma(h, lam)`` of the radial problem with spectral parameter ``lam``."""
    return solve_mode(profile, lam, opts, check).sigma


# ---------------------------------------------------------------------------
# Rayleigh quotients of trial functions


def rayleigh(profile: Profile, lam: float, a: Callable, da: Callable, quad_n: int = 200,
             kinks: Sequence[float] = (), rtol: float = 1e-12) -> float:
    """Rayleigh quotient ``int (a'^2 h^(n-1) + lam a^2 h^(n-3)) / (a(0)^2 h(0)^(n-1))``.

    Composite 8-point Gauss-Legendre on ``quad_n`` panels per smooth
    sub-interval, split at every profile junction and trial-function kink;
    panels are doubled until the value settles to ``rtol``.
    """
    if quad_n < 100:
        raise ValueError("quad_n must be >= 100")
    n, R = profile.n, profile.R
    a0 = float(a(0.0))
    if abs(float(a(R))) > 1e-12 * max(1.0, abs(a0)):
        raise InadmissibleTestFunction(f"trial function must vanish at r = R, got a(R) = {float(a(R))!r}")
    if a0 == 0.0:
        raise ZeroDivisionError("trial function vanishes on the boundary r = 0")
    cuts = np.unique(np.concatenate([profile.breakpoints, [k for k in kinks if 0 < k < R]]))
    x8, w8 = leggauss(8)

    def integrate(panels: int) -> float:
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            e = np.linspace(lo, hi, panels + 1)
            mid = 0.5 * (e[1:] + e[:-1])[:, None]
            half = 0.5 * (e[1:] - e[:-1])[:, None]
            r = (mid + half * x8[None, :]).ravel()
            wts = (half * w8[None, :]).ravel()
            h = profile.h(r)
            total += float(np.sum(wts * (np.asarray(da(r)) ** 2 * h ** (n - 1) + lam * np.asarray(a(r)) ** 2 * h ** (n - 3))))
        return total

    panels = quad_n
    val = integrate(panels)
    for _ in range(4):
        panels *= 2
        new = integrate(panels)
        done = abs(new - val) <= rtol * abs(new)
        val = new
        if done:
            break
    return val / (a0**2 * profile.h(0.0) ** (n - 1))


def cutoff_trial(R: float, delta: float):
    """Trial function equal to 1 on ``[0, R - delta]`` and ``(R - r)/delta`` after.

    Returns ``(a, da, kinks)`` for :func:`rayleigh`.
    """
    if not 0 < delta <= R:
        raise ValueError("delta must lie in (0, R]")

    def a(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= R - delta, 1.0, (R - r) / delta)

    def da(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= R - delta, 0.0, -1.0 / delta)

    return a, da, (R - delta,)


def piecewise_linear_trial(knots: Sequence[Sequence[float]]):
    """Continuous piecewise-linear trial function through ``(r, a)`` knots."""
    pts = np.asarray(knots, dtype=float)
    rs, vs = pts[:, 0], pts[:, 1]
    if np.any(np.diff(rs) <= 0):
        raise ValueError("trial knots must have increasing r")
    slopes = np.diff(vs) / np.diff(rs)

    def a(r):
        return np.interp(r, rs, vs)

    def da(r):
        idx = np.clip(np.searchsorted(rs, r, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    return a, da, tuple(rs[1:-1])

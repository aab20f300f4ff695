"""Warp functions ``h`` for revolution metrics ``dr^2 + h(r)^2 g0`` on a ball.

A profile is stored as a list of pieces on ``[0, R]``.  Each piece is either an
affine function ``A + B (r - r0)`` or a smooth blend ``(1 - psi) f0 + psi f1`` of two
affine functions, where ``psi`` is the flat smoothstep below.  Because ``psi``
has vanishing derivatives of every order at both ends of its window, gluing
pieces this way gives a C-infinity profile whenever neighbouring pieces agree
in value at the joins.

Boundary of the manifold is ``r = 0``; the pole (cone point) is ``r = R``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "ProfileError",
    "Piece",
    "Profile",
    "ValidationReport",
    "smoothstep",
    "smoothstep_deriv",
    "make_euclidean",
    "make_plateau_large",
    "make_plateau_small",
    "make_plateau_h0",
    "make_piecewise",
    "make_capped",
    "profile_from_spec",
    "validate_profile",
    "certify_caps",
]

EPS_MIN = 1e-6
FAMILIES = ("Euclidean", "PlateauLarge", "PlateauSmall", "PlateauH0", "Capped", "PiecewiseMollified")
_ALIASES = {
    "euclidean": "Euclidean",
    "plateaularge": "PlateauLarge",
    "plateau_large": "PlateauLarge",
    "a_large": "PlateauLarge",
    "plateausmall": "PlateauSmall",
    "plateau_small": "PlateauSmall",
    "b_small": "PlateauSmall",
    "plateauh0": "PlateauH0",
    "plateau_h0": "PlateauH0",
    "c_h0": "PlateauH0",
    "capped": "Capped",
    "piecewisemollified": "PiecewiseMollified",
    "piecewise_mollified": "PiecewiseMollified",
    "piecewise": "PiecewiseMollified",
}


class ProfileError(ValueError):
    """Bad profile parameters or an unsupported family/dimension combination."""


# ---------------------------------------------------------------------------
# smoothstep


def smoothstep(t):
    """Flat C-infinity step: ``f(t) / (f(t) + f(1 - t))`` with ``f(t) = exp(-1/t)``.

    Evaluated in the equivalent logistic form ``expit(1/(1-t) - 1/t)`` which
    never forms the tiny exponentials explicitly.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0.0) | (t_arr > 1.0)) or np.any(np.isnan(t_arr)):
        raise ValueError("smoothstep argument must lie in [0, 1]")
    out = expit(_logit_arg(t_arr))
    if np.ndim(t) == 0:
        return float(out)
    return out


def _logit_arg(t: np.ndarray) -> np.ndarray:
    """``1/(1-t) - 1/t`` (so that ``smoothstep = expit`` of it); +-inf at the ends."""
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / (1.0 - t) - 1.0 / t


def _blend_weights(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(1 - psi, psi)``, each to full relative precision."""
    u = _logit_arg(t)
    return expit(-u), expit(u)


def smoothstep_deriv(t):
    """Derivative of :func:`smoothstep`; exactly zero at ``t = 0`` and ``t = 1``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0.0) | (t_arr > 1.0)):
        raise ValueError("smoothstep argument must lie in [0, 1]")
    inner = (t_arr > 0.0) & (t_arr < 1.0)
    out = np.zeros_like(t_arr)
    ti = t_arr[inner]
    q, psi = _blend_weights(ti)
    with np.errstate(over="ignore", invalid="ignore"):
        d = psi * q * (1.0 / ti**2 + 1.0 / (1.0 - ti) ** 2)
    out[inner] = np.where(np.isfinite(d), d, 0.0)
    if np.ndim(t) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# pieces and profiles


def affine_value(f: tuple, r):
    """``A + B (r - r0)`` for ``f = (A, B[, r0])``."""
    if f[1] == 0.0:
        return f[0] + 0.0 * np.asarray(r, dtype=float)
    r0 = f[2] if len(f) > 2 else 0.0
    return f[0] + f[1] * (np.asarray(r, dtype=float) - r0)


@dataclass(frozen=True)
class Piece:
    """One piece of a profile on ``[a, b]``.

    ``f0`` and ``f1`` are affine maps ``(A, B, r0)`` meaning ``A + B (r - r0)``
    (``r0`` defaults to 0).  Anchoring the cone line at ``r0 = R`` makes
    ``h = B (r - R)`` exact to rounding however the profile is rescaled.
    If ``f1`` is None the piece is just ``f0``; otherwise it blends ``f0`` into
    ``f1`` across the window with the smoothstep.
    """

    a: float
    b: float
    f0: tuple
    f1: tuple | None = None

    def value(self, r: np.ndarray) -> np.ndarray:
        v0 = affine_value(self.f0, r)
        if self.f1 is None:
            return v0
        v1 = affine_value(self.f1, r)
        t = np.clip((r - self.a) / (self.b - self.a), 0.0, 1.0)
        q, psi = _blend_weights(t)
        return q * v0 + psi * v1

    def deriv(self, r: np.ndarray) -> np.ndarray:
        if self.f1 is None:
            return np.full_like(r, self.f0[1])
        width = self.b - self.a
        v0 = affine_value(self.f0, r)
        v1 = affine_value(self.f1, r)
        t = np.clip((r - self.a) / width, 0.0, 1.0)
        q, psi = _blend_weights(t)
        dpsi = smoothstep_deriv(t) / width
        return q * self.f0[1] + psi * self.f1[1] + (v1 - v0) * dpsi

    def mapped(self, c_r: float, c_h: float) -> "Piece":
        """Piece of ``c_h * h(r / c_r)`` on ``[c_r a, c_r b]``."""

        def f(p):
            if p is None:
                return None
            r0 = p[2] if len(p) > 2 else 0.0
            return (c_h * p[0], c_h * p[1] / c_r, c_r * r0)

        return Piece(c_r * self.a, c_r * self.b, f(self.f0), f(self.f1))


@dataclass(frozen=True, eq=False)
class Profile:
    """Warp function on ``[0, R]`` for dimension ``n``.

    ``windows`` lists the monotone transition windows as ``(a, b, sign)``
    with sign +1 for increasing and -1 for decreasing.  ``strict`` is False
    for derived profiles that deliberately break ``h'(R) = -1``; such
    profiles are accepted by the solvers but never pass validation.
    """

    n: int
    R: float
    family: str
    params: dict = field(default_factory=dict)
    pieces: tuple[Piece, ...] = ()
    windows: tuple[tuple[float, float, int], ...] = ()
    knots: tuple[tuple[float, float], ...] = ()
    strict: bool = True

    def __post_init__(self):
        if self.n < 2 or int(self.n) != self.n:
            raise ProfileError(f"dimension n must be an integer >= 2, got {self.n}")
        if not self.R > 0:
            raise ProfileError(f"R must be positive, got {self.R}")
        if not self.pieces:
            raise ProfileError("profile has no pieces")
        edges = [p.a for p in self.pieces] + [self.pieces[-1].b]
        if abs(edges[0]) > 0 or not np.isclose(edges[-1], self.R, rtol=0, atol=1e-15 * self.R):
            raise ProfileError("pieces must cover [0, R]")
        if any(b <= a for a, b in zip(edges[:-1], edges[1:])):
            raise ProfileError("piece boundaries must be strictly increasing")
        object.__setattr__(self, "_edges", np.asarray(edges[1:-1], dtype=float))

    # evaluation -----------------------------------------------------------

    def _dispatch(self, r, method):
        r_arr = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r_arr).ravel()
        idx = np.searchsorted(self._edges, flat, side="right")
        out = np.empty_like(flat)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = getattr(self.pieces[i], method)(flat[mask])
        if r_arr.ndim == 0:
            return float(out[0])
        return out.reshape(r_arr.shape)

    def h(self, r):
        """Warp function value(s) at ``r``."""
        return self._dispatch(r, "value")

    def dh(self, r):
        """Analytic derivative ``h'(r)``."""
        return self._dispatch(r, "deriv")

    __call__ = h

    @property
    def h0(self) -> float:
        return self.h(0.0)

    @property
    def junctions(self) -> tuple[float, ...]:
        """Interior piece boundaries, increasing."""
        return tuple(float(x) for x in self._edges)

    @property
    def breakpoints(self) -> np.ndarray:
        """``0``, every junction, and ``R``."""
        return np.concatenate([[0.0], self._edges, [self.R]])

    @property
    def tag(self) -> str:
        items = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()) if isinstance(v, (int, float)))
        return f"{self.family}(n={self.n},R={self.R:g}{',' if items else ''}{items})"

    # transforms -----------------------------------------------------------

    def homothety(self, c: float) -> "Profile":
        """Profile ``c h(r / c)`` on ``[0, c R]``; Steklov values scale by ``1/c``."""
        if not c > 0:
            raise ProfileError("scale factor must be positive")
        return Profile(
            n=self.n,
            R=c * self.R,
            family=self.family,
            params={**self.params, "homothety": c},
            pieces=tuple(p.mapped(c, c) for p in self.pieces),
            windows=tuple((c * a, c * b, s) for a, b, s in self.windows),
            knots=tuple((c * r, c * v) for r, v in self.knots),
            strict=self.strict,
        )

    def warped(self, c: float) -> "Profile":
        """Profile ``c h`` on the same interval (breaks ``h'(R) = -1`` unless c = 1)."""
        if not c > 0:
            raise ProfileError("scale factor must be positive")
        return Profile(
            n=self.n,
            R=self.R,
            family=self.family,
            params={**self.params, "warp": c},
            pieces=tuple(p.mapped(1.0, c) for p in self.pieces),
            windows=self.windows,
            knots=tuple((r, c * v) for r, v in self.knots),
            strict=self.strict and c == 1.0,
        )

    def with_dimension(self, n: int) -> "Profile":
        return Profile(n, self.R, self.family, dict(self.params), self.pieces, self.windows, self.knots, self.strict)

    def to_spec(self) -> dict:
        """JSON-able description accepted by :func:`profile_from_spec`."""
        spec = {"family": self.family, "n": self.n, "R": self.R, "params": dict(self.params)}
        if self.knots:
            spec["knots"] = [list(k) for k in self.knots]
        return spec


# ---------------------------------------------------------------------------
# builders


def _line(R: float) -> tuple[float, float, float]:
    return (0.0, -1.0, R)


def _const(c: float) -> tuple[float, float, float]:
    return (c, 0.0, 0.0)


def _check_eps(eps: float, upper: float, what: str) -> None:
    if not (EPS_MIN <= eps < upper):
        raise ProfileError(f"{what}: eps must lie in [{EPS_MIN:g}, {upper:g}), got {eps!r}")


def _plateau(n, R, eps, base, top, family, params) -> Profile:
    """Shared shape of the large-plateau families: base, rise, top, fall, cone."""
    pieces = (
        Piece(0.0, eps, _const(base)),
        Piece(eps, 2 * eps, _const(base), _const(top)),
        Piece(2 * eps, R - 2 * eps, _const(top)),
        Piece(R - 2 * eps, R - eps, _const(top), _line(R)),
        Piece(R - eps, R, _line(R)),
    )
    rise = 1 if top > base else (-1 if top < base else 0)
    windows = ((eps, 2 * eps, rise), (R - 2 * eps, R - eps, -1))
    return Profile(n, R, family, params, pieces, windows)


def make_euclidean(n: int, R: float) -> Profile:
    """Flat ball of radius ``R``: ``h(r) = R - r``."""
    return Profile(n, float(R), "Euclidean", {}, (Piece(0.0, float(R), _line(float(R))),))


def plateau_large_level(n: int, eps: float) -> float:
    if n == 3:
        return eps ** -0.5
    return eps ** (-1.0 / (2 * (n - 3)))


def make_plateau_large(n: int, R: float, eps: float) -> Profile:
    """Large plateau family used for ratio sharpness (``n >= 3``).

    ``h = 1`` on ``[0, eps]``, ``h = P`` on ``[2 eps, R - 2 eps]`` and
    ``h = R - r`` on ``[R - eps, R]`` where ``P = eps^(-1/(2(n-3)))`` for
    ``n >= 4`` and ``P = eps^(-1/2)`` for ``n = 3``.
    """
    if n == 2:
        raise ProfileError("plateau_large is undefined for n = 2")
    if n < 2:
        raise ProfileError(f"dimension n must be >= 3, got {n}")
    R = float(R)
    _check_eps(eps, min(R / 8, 1.0), "plateau_large")
    top = plateau_large_level(n, eps)
    if top <= 2 * eps:
        raise ProfileError("plateau level must exceed the cone profile on the falling window")
    return _plateau(n, R, eps, 1.0, top, "PlateauLarge", {"eps": eps})


def make_plateau_h0(R: float, eps: float, h0: float) -> Profile:
    """Three-dimensional plateau family with prescribed boundary value ``h(0) = h0``."""
    R = float(R)
    if not h0 > 0:
        raise ProfileError("h0 must be positive")
    _check_eps(eps, min(R / 8, 1.0), "plateau_h0")
    top = h0 * eps**-0.5
    if top <= 2 * eps:
        raise ProfileError("plateau level must exceed the cone profile on the falling window")
    return _plateau(3, R, eps, float(h0), top, "PlateauH0", {"eps": eps, "h0": float(h0)})


def make_plateau_small(n: int, R: float, eps: float) -> Profile:
    """Small plateau family: ``h = 1`` near the boundary, ``eps^2`` in the bulk.

    The bulk level meets the cone line ``R - r`` at ``r = R - eps^2`` with a
    corner; a smooth junction of width ``eps^2/10`` ending there removes it.
    """
    if n < 4:
        raise ProfileError(f"plateau_small requires n >= 4, got {n}")
    R = float(R)
    _check_eps(eps, min(R / 4, 1.0), "plateau_small")
    e2 = eps * eps
    w = e2 / 10
    pieces = (
        Piece(0.0, eps, _const(1.0)),
        Piece(eps, eps + e2, _const(1.0), _const(e2)),
        Piece(eps + e2, R - e2 - w, _const(e2)),
        Piece(R - e2 - w, R - e2, _const(e2), _line(R)),
        Piece(R - e2, R, _line(R)),
    )
    windows = ((eps, eps + e2, -1),)
    return Profile(n, R, "PlateauSmall", {"eps": eps}, pieces, windows)


def _knot_pieces(R: float, knots: Sequence[Sequence[float]], tail: float | None):
    pts = [(float(r), float(v)) for r, v in knots]
    if len(pts) < 1:
        raise ProfileError("at least one knot is required")
    if abs(pts[0][0]) > 0:
        raise ProfileError("first knot must sit at r = 0")
    rs = [r for r, _ in pts]
    if any(b <= a for a, b in zip(rs[:-1], rs[1:])):
        raise ProfileError("knot radii must be strictly increasing")
    if rs[-1] > R:
        raise ProfileError("knots must lie in [0, R]")
    pieces = []
    windows = []
    for (r0, v0), (r1, v1) in zip(pts[:-1], pts[1:]):
        if v0 == v1:
            pieces.append(Piece(r0, r1, _const(v0)))
        else:
            pieces.append(Piece(r0, r1, _const(v0), _const(v1)))
            windows.append((r0, r1, 1 if v1 > v0 else -1))
    r_last, v_last = pts[-1]
    if r_last < R:
        # blend the last level into the cone line, then follow the line to R
        if tail is None:
            tail = 0.5 * (R - r_last)
        if not 0 < tail < R - r_last:
            raise ProfileError("tail length must lie in (0, R - r_last)")
        pieces.append(Piece(r_last, R - tail, _const(v_last), _line(R)))
        pieces.append(Piece(R - tail, R, _line(R)))
    return tuple(pieces), tuple(windows), tuple(pts)


def make_piecewise(n: int, R: float, knots, tail: float | None = None) -> Profile:
    """Smoothstep interpolation through ``knots`` followed by the cone line.

    A last knot placed at ``r = R`` suppresses the cone tail; the resulting
    profile generally violates ``h(R) = 0`` and is rejected by validation.
    """
    R = float(R)
    pieces, windows, pts = _knot_pieces(R, knots, tail)
    params = {} if tail is None else {"tail": tail}
    return Profile(n, R, "PiecewiseMollified", params, pieces, windows, pts)


def make_capped(n: int, R: float, R1: float, C1: float, C2: float, knots, tail: float | None = None) -> Profile:
    """Knot profile obeying ``h <= C2`` on ``[0, R]`` and ``h >= C1`` on ``[0, R1]``."""
    R = float(R)
    if not 0 < R1 < R:
        raise ProfileError("need 0 < R1 < R")
    if not 0 < C1 < C2:
        raise ProfileError("need 0 < C1 < C2")
    for r, v in knots:
        if r <= R1 and not C1 <= v <= C2:
            raise ProfileError(f"knot ({r}, {v}) leaves [C1, C2] on [0, R1]")
        if r > R1 and not 0 < v <= C2:
            raise ProfileError(f"knot ({r}, {v}) leaves (0, C2] on (R1, R)")
    pieces, windows, pts = _knot_pieces(R, knots, tail)
    if pts[-1][0] < R1:
        raise ProfileError("knots must cover [0, R1]")
    if pts[-1][0] < R and R - pts[-1][0] > C2:
        raise ProfileError("cone tail would exceed C2; add a knot closer to R")
    params = {"R1": float(R1), "C1": float(C1), "C2": float(C2)}
    if tail is not None:
        params["tail"] = tail
    prof = Profile(n, R, "Capped", params, pieces, windows, pts)
    caps = certify_caps(prof, R1, C1, C2)
    if not caps["passed"]:
        raise ProfileError(f"capped profile violates its caps: {caps}")
    return prof


def profile_from_spec(spec: dict) -> Profile:
    """Build a profile from the JSON form ``{"family", "n", "R", "params", "knots"}``."""
    try:
        raw = str(spec["family"])
        n = int(spec["n"])
        R = float(spec["R"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProfileError(f"malformed profile spec: {exc}") from None
    family = _ALIASES.get(raw.lower(), raw)
    params = dict(spec.get("params") or {})
    knots = spec.get("knots")
    try:
        if family == "Euclidean":
            return make_euclidean(n, R)
        if family == "PlateauLarge":
            return make_plateau_large(n, R, float(params["eps"]))
        if family == "PlateauSmall":
            return make_plateau_small(n, R, float(params["eps"]))
        if family == "PlateauH0":
            if n != 3:
                raise ProfileError("PlateauH0 is defined for n = 3 only")
            return make_plateau_h0(R, float(params["eps"]), float(params["h0"]))
        if family == "Capped":
            return make_capped(n, R, float(params["R1"]), float(params["C1"]), float(params["C2"]),
                               knots or [], params.get("tail"))
        if family == "PiecewiseMollified":
            if not knots:
                raise ProfileError("PiecewiseMollified needs knots")
            return make_piecewise(n, R, knots, params.get("tail"))
    except KeyError as exc:
        raise ProfileError(f"missing parameter {exc} for family {family}") from None
    raise ProfileError(f"unknown family {raw!r}; expected one of {FAMILIES}")


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    profile: str
    checks: dict
    passed: bool

    def failed(self) -> list[str]:
        return [name for name, c in self.checks.items() if not c["passed"]]

    def to_dict(self) -> dict:
        return {"profile": self.profile, "passed": self.passed, "checks": self.checks}


def validate_profile(p: Profile, samples: int = 1000, tol: float = 1e-8) -> ValidationReport:
    """Check the smoothness assumptions on ``h`` numerically.

    Checks ``h(R) = 0``, ``h'(R) = -1``, positivity on ``[0, R - 1e-6 R]``
    and C1 continuity across every junction.
    """
    if samples < 16:
        raise ValueError("samples must be >= 16")
    if not tol > 0:
        raise ValueError("tol must be positive")
    checks = {}
    try:
        hR = p.h(p.R)
        dhR = p.dh(p.R)
        checks["h(R)=0"] = {"passed": bool(abs(hR) <= tol * max(1.0, p.R)), "value": hR}
        checks["h'(R)=-1"] = {"passed": bool(abs(dhR + 1.0) <= tol), "value": dhR}

        delta = p.R * 1e-6
        rs = np.concatenate([np.linspace(0.0, p.R - delta, samples), p.junctions])
        hs = p.h(rs)
        finite = bool(np.all(np.isfinite(hs)))
        hmin = float(np.min(hs)) if finite else float("nan")
        checks["positive"] = {"passed": finite and hmin > 0, "value": hmin}

        edges = p.breakpoints
        worst = 0.0
        for i, j in enumerate(p.junctions, start=1):
            d = 1e-3 * min(edges[i] - edges[i - 1], edges[i + 1] - edges[i])
            hl, hj, hr = p.h(j - d), p.h(j), p.h(j + d)
            kink = abs((hr - hj) - (hj - hl)) / d
            jump_dh = abs(p.dh(j + d) - p.dh(j - d))
            worst = max(worst, max(kink, jump_dh) / (1.0 + abs(p.dh(j))))
        # a C1 join with bounded h'' keeps both indicators O(d); a kink leaves them O(1)
        checks["smooth_junctions"] = {"passed": bool(worst <= 1e-2), "value": worst}
    except Exception as exc:  # evaluation failure is a failed report, not a crash
        checks["evaluation"] = {"passed": False, "value": repr(exc)}
    passed = all(c["passed"] for c in checks.values())
    return ValidationReport(p.tag, checks, passed)


def certify_caps(p: Profile, R1: float, C1: float, C2: float, samples: int = 20001) -> dict:
    """Dense-sampling check of ``h <= C2`` on ``[0, R]`` and ``h >= C1`` on ``[0, R1]``."""
    rs = np.unique(np.concatenate([np.linspace(0.0, p.R, samples), p.breakpoints]))
    hs = p.h(rs)
    hmax = float(np.max(hs))
    inner = rs <= R1
    hmin_inner = float(np.min(hs[inner]))
    upper_ok = hmax <= C2
    lower_ok = hmin_inner >= C1
    return {"passed": bool(upper_ok and lower_ok), "max_h": hmax, "min_h_on_R1": hmin_inner,
            "upper_ok": bool(upper_ok), "lower_ok": bool(lower_ok)}


def sample_grid(p: Profile, per_piece: int = 64) -> np.ndarray:
    """Points clustered in every piece, junctions included."""
    edges = p.breakpoints
    out = [np.linspace(a, b, per_piece, endpoint=False) for a, b in zip(edges[:-1], edges[1:])]
    out.append([p.R])
    return np.concatenate(out)

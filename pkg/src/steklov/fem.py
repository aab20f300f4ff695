"""Piecewise-linear Galerkin oracle for the per-mode Steklov value.

Minimises the energy ``E(a) = int (a'^2 h^(n-1) + lam a^2 h^(n-3)) dr`` over
continuous piecewise-linear ``a`` with ``a(R) = 0`` and ``a(0) = 1``; the
minimum divided by ``h(0)^(n-1)`` is the Steklov value of the discrete space,
an upper bound for the exact one.  The boundary term has rank one, so pinning
the boundary trace turns the eigenproblem into one SPD tridiagonal solve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import LinAlgError, solveh_banded

from .profile import Profile

__all__ = ["MeshError", "AssemblyError", "Mesh1D", "build_mesh", "bisect_mesh", "steklov_mode_fem", "observed_order", "refinement_study", "study_to_json"]

N_MIN = 8


class MeshError(ValueError):
    pass


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Mesh1D:
    nodes: np.ndarray
    grading: str

    @property
    def N(self) -> int:
        return len(self.nodes) - 1


def _clustered(lo: float, hi: float, m: int, beta: float = 3.0) -> np.ndarray:
    """``m + 1`` nodes on ``[lo, hi]`` clustered toward both ends (tanh map)."""
    t = np.linspace(-1.0, 1.0, m + 1)
    x = 0.5 * (1.0 + np.tanh(beta * t) / math.tanh(beta))
    x[0], x[-1] = 0.0, 1.0
    return lo + (hi - lo) * x


def build_mesh(profile: Profile, N: int, grading: str = "junction", ratio: float = 0.995) -> Mesh1D:
    """Mesh of ``[0, R]`` with about ``N`` cells and a node at every junction.

    ``uniform``
        equal cells (junctions inserted as extra nodes).
    ``geometric``
        cell sizes shrinking by ``ratio`` toward the pole ``r = R``.
    ``junction``
        half the cells shared equally between the pieces of the profile, half
        by length; nodes cluster at both ends of every piece, so thin
        transition windows and the pole are well resolved.
    """
    if N < N_MIN:
        raise MeshError(f"N must be >= {N_MIN}, got {N}")
    R = profile.R
    edges = profile.breakpoints
    if grading == "uniform":
        nodes = np.linspace(0.0, R, N + 1)
    elif grading == "geometric":
        if not 0 < ratio < 1:
            raise MeshError("geometric ratio must lie in (0, 1)")
        sizes = ratio ** np.arange(N)
        nodes = np.concatenate([[0.0], np.cumsum(sizes) / np.sum(sizes) * R])
    elif grading == "junction":
        lengths = np.diff(edges)
        k = len(lengths)
        if 4 * k > N:
            raise MeshError(f"{k} profile pieces need at least {4 * k} cells, got N = {N}")
        share = N // 2 // k + (N - N // 2) * lengths / R
        counts = np.maximum(4, np.floor(share).astype(int))
        counts[np.argmax(lengths)] += N - int(np.sum(counts))
        if np.any(counts < 4):
            raise MeshError("mesh too coarse for the junction layout")
        parts = [_clustered(lo, hi, m)[:-1] for lo, hi, m in zip(edges[:-1], edges[1:], counts)]
        nodes = np.concatenate(parts + [[R]])
    else:
        raise MeshError(f"unknown grading {grading!r}")
    if grading != "junction":
        # drop generated nodes within rounding distance of a breakpoint, then insert the breakpoints
        gap = np.min(np.abs(nodes[:, None] - edges[None, :]), axis=1)
        nodes = np.unique(np.concatenate([nodes[gap > 1e-12 * R], edges]))
    nodes[-1] = R
    if np.any(np.diff(nodes) <= 0):
        raise MeshError("junction spacing is finer than the mesh can represent")
    return Mesh1D(nodes, grading)


def bisect_mesh(mesh: Mesh1D) -> Mesh1D:
    """Split every cell in two."""
    x = mesh.nodes
    mid = 0.5 * (x[1:] + x[:-1])
    out = np.empty(2 * len(x) - 1)
    out[0::2] = x
    out[1::2] = mid
    return Mesh1D(out, mesh.grading + "+bisect")


def steklov_mode_fem(profile: Profile, lam: float, mesh: Mesh1D, quad_points: int = 2) -> float:
    """Galerkin Steklov value of the mode with spectral parameter ``lam``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return 0.0
    n = profile.n
    x = mesh.nodes
    if len(x) < N_MIN + 1 or np.any(np.diff(x) <= 0) or x[0] != 0.0 or x[-1] != profile.R:
        raise MeshError("invalid mesh for this profile")
    gx, gw = leggauss(quad_points)
    d = np.diff(x)
    pts = 0.5 * (x[1:] + x[:-1])[:, None] + 0.5 * d[:, None] * gx[None, :]
    wts = 0.5 * d[:, None] * gw[None, :]
    phiL = 0.5 * (1.0 - gx)[None, :]
    phiR = 0.5 * (1.0 + gx)[None, :]
    h = profile.h(pts.ravel()).reshape(pts.shape)
    with np.errstate(over="raise", divide="raise", invalid="raise"):
        try:
            stiff = np.sum(wts * h ** (n - 1), axis=1) / d**2
            wm = wts * h ** (n - 3)
            mLL = lam * np.sum(wm * phiL * phiL, axis=1)
            mLR = lam * np.sum(wm * phiL * phiR, axis=1)
            mRR = lam * np.sum(wm * phiR * phiR, axis=1)
        except FloatingPointError as exc:
            raise AssemblyError(f"non-finite cell weights: {exc}") from None
    if not (np.all(np.isfinite(stiff)) and np.all(np.isfinite(mLL))):
        raise AssemblyError("non-finite cell weights")

    N = len(d)
    diag = np.zeros(N + 1)
    diag[:-1] += stiff + mLL
    diag[1:] += stiff + mRR
    off = mLR - stiff  # coupling between node i and i+1

    # Write a = 1 + u with u_0 = 0, u_N = -1.  Stiffness annihilates constants,
    # so interior rows read K_II u_I = -(M 1)_I + off_{N-1} e_{N-1}; solving for
    # the small correction u keeps full relative precision where a is nearly 1.
    ones_row = np.zeros(N + 1)
    ones_row[:-1] += mLL + mLR
    ones_row[1:] += mLR + mRR
    rhs = -ones_row[1:N].copy()
    rhs[-1] += off[N - 1]
    dI = diag[1:N]
    if not np.all(dI > 0):
        raise AssemblyError("assembled system is not SPD: non-positive diagonal")
    eI = off[1 : N - 1]
    scale = 1.0 / np.sqrt(dI)
    ab = np.zeros((2, N - 1))
    ab[1] = 1.0
    ab[0, 1:] = eI * scale[1:] * scale[:-1]
    try:
        z = solveh_banded(ab, rhs * scale, lower=False)
    except LinAlgError as exc:
        raise AssemblyError(f"assembled system is not SPD: {exc}") from None
    u = np.concatenate([[0.0], z * scale, [-1.0]])
    a = 1.0 + u
    du = np.diff(u)
    energy = np.sum(stiff * du**2 + mLL * a[:-1] ** 2 + 2 * mLR * a[:-1] * a[1:] + mRR * a[1:] ** 2)
    return float(energy / profile.h(0.0) ** (n - 1))


def observed_order(errors: list[float], refinement: float = 2.0) -> list[float]:
    """``log(e_i / e_{i+1}) / log(refinement)`` for successive refinements."""
    return [math.log(e0 / e1) / math.log(refinement) for e0, e1 in zip(errors[:-1], errors[1:])]


def refinement_study(profile: Profile, lam: float, N: int = 1000, levels: int = 3,
                     grading: str = "junction", exact: float | None = None) -> dict:
    """Values on ``levels`` nested bisections of a base mesh, JSON-ready.

    With ``exact`` the observed order uses true errors; otherwise it uses
    successive differences (which decay at the same rate).
    """
    mesh = build_mesh(profile, N, grading)
    sizes, values = [], []
    for _ in range(levels):
        sizes.append(mesh.N)
        values.append(steklov_mode_fem(profile, lam, mesh))
        mesh = bisect_mesh(mesh)
    if exact is not None:
        errors = [abs(v - exact) for v in values]
    else:
        errors = [abs(v1 - v0) for v0, v1 in zip(values[:-1], values[1:])]
    orders = observed_order(errors) if all(e > 0 for e in errors) else []
    return {"profile": profile.tag, "lambda": lam, "N": sizes, "sigma": values, "observed_order": orders}


def study_to_json(study: dict) -> str:
    return json.dumps(study, indent=2, sort_keys=True)

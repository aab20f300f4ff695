"""Laplace eigenvalues on the round sphere and assembly of Steklov spectra.

Separating variables ``u = a(r) phi_k`` reduces the Steklov problem to one
radial problem per sphere eigenvalue ``lambda_(k) = k (n + k - 2)``; the
Steklov value ``sigma_(k)`` inherits the multiplicity of ``lambda_(k)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import comb
from typing import Iterable

from .profile import Profile

__all__ = [
    "SolverInconsistencyError",
    "SphereMode",
    "SpectrumRow",
    "SpectrumTable",
    "sphere_eigenvalue",
    "sphere_multiplicity",
    "sphere_mode",
    "assemble_spectrum",
    "format_number",
]


class SolverInconsistencyError(RuntimeError):
    """Per-mode values that cannot come from a correct solve (e.g. not increasing)."""


def _check_nk(n: int, k: int) -> None:
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    if int(k) != k or k < 0:
        raise ValueError(f"k must be an integer >= 0, got {k}")


def sphere_eigenvalue(n: int, k: int) -> int:
    """``k (n + k - 2)``: the k-th distinct eigenvalue of the Laplacian on S^(n-1)."""
    _check_nk(n, k)
    return k * (n + k - 2)


def sphere_multiplicity(n: int, k: int) -> int:
    """Dimension of degree-k spherical harmonics on S^(n-1)."""
    _check_nk(n, k)
    if k == 0:
        return 1
    return comb(n + k - 2, k) + comb(n + k - 3, k - 1)


@dataclass(frozen=True)
class SphereMode:
    n: int
    k: int
    lam: int
    mult: int


def sphere_mode(n: int, k: int) -> SphereMode:
    return SphereMode(n, k, sphere_eigenvalue(n, k), sphere_multiplicity(n, k))


def format_number(x: float) -> str:
    """Fixed 12-significant-digit scientific notation used in every CSV."""
    return f"{float(x):.11e}"


@dataclass(frozen=True)
class SpectrumRow:
    k: int
    lam: int
    sigma: float
    mult: int


@dataclass
class SpectrumTable:
    n: int
    R: float
    profile: str
    rows: list[SpectrumRow] = field(default_factory=list)

    @property
    def sigmas(self) -> list[float]:
        return [row.sigma for row in self.rows]

    def flattened(self) -> list[float]:
        """Steklov eigenvalues repeated according to multiplicity."""
        out = []
        for row in self.rows:
            out.extend([row.sigma] * row.mult)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "lambda", "sigma", "mult"])
        for row in self.rows:
            writer.writerow([row.k, row.lam, format_number(row.sigma), row.mult])
        return buf.getvalue()


def assemble_spectrum(profile: Profile, sigmas: Iterable[tuple[int, float]], k_max: int) -> SpectrumTable:
    """Attach sphere data to per-mode Steklov values ``(k, sigma_k)``.

    ``sigma_0`` must be 0 (the constant mode).  Raises
    :class:`SolverInconsistencyError` if the values are not strictly
    increasing in ``k``.
    """
    values = dict(sigmas)
    missing = [k for k in range(k_max + 1) if k not in values]
    if missing:
        raise ValueError(f"missing modes {missing}")
    if values[0] != 0.0:
        raise SolverInconsistencyError(f"sigma_0 must be 0, got {values[0]!r}")
    rows = []
    for k in range(k_max + 1):
        rows.append(SpectrumRow(k, sphere_eigenvalue(profile.n, k), float(values[k]), sphere_multiplicity(profile.n, k)))
    for prev, cur in zip(rows[:-1], rows[1:]):
        if not cur.sigma > prev.sigma:
            raise SolverInconsistencyError(
                f"sigma_{cur.k} = {cur.sigma!r} does not exceed sigma_{prev.k} = {prev.sigma!r}"
            )
    return SpectrumTable(profile.n, profile.R, profile.tag, rows)

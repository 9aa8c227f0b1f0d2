"""Winding number, Chern number, multipole chiral number and phase-diagram grids."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import models
from .errors import AccuracyError, CriticalPointError, TopocritError
from .parallel import pmap
from .spectra import locate_band_touching


def winding_number(couplings, n_k: Optional[int] = None, gap_tol=1e-10) -> int:
    """Winding of h(k) around the origin by phase unwrapping.

    The grid is doubled until no phase increment exceeds pi/2, so near-critical
    couplings are still resolved.
    """
    lam = models.as_couplings(couplings)
    R = len(lam) - 1
    n_min = 64 * (R + 1)
    if n_k is None:
        n_k = max(1024, n_min)
    if n_k < n_min:
        raise ValueError(f"n_k={n_k} below the minimum 64*(R+1)={n_min}")
    # zeros of h can fall between grid points; the continuous minimum catches them
    if locate_band_touching(lam).E_min <= gap_tol:
        raise CriticalPointError("gap closes: critical point, winding undefined")
    while True:
        k = -np.pi + 2 * np.pi * np.arange(n_k + 1) / n_k
        h = models.bloch_h(lam, k)
        if np.abs(h).min() <= gap_tol:
            raise CriticalPointError("gap closes on the k grid: critical point, winding undefined")
        dphi = np.diff(np.unwrap(np.angle(h)))
        if np.abs(dphi).max() < np.pi / 2:
            break
        if n_k >= 2**20:
            raise CriticalPointError("phase of h not resolved on 2^20 points: gap is (nearly) closed")
        n_k *= 2
    raw = dphi.sum() / (2 * np.pi)
    w = int(round(raw))
    if abs(raw - w) > 1e-6:
        raise AccuracyError(f"winding sum {raw!r} not within 1e-6 of an integer")
    return w


# ---------------------------------------------------------------------------
# Chern number

def ci_gap_closes(params: models.CIParams, tol=1e-12) -> bool:
    """The CI gap closes only at k=(0,0) (m0 = -2 lambda0) and k=(-pi/2, pi/2) (m0 = 0)."""
    scale = max(1.0, abs(params.m0), abs(params.lambda0))
    return abs(params.m0 + 2 * params.lambda0) <= tol * scale or abs(params.m0) <= tol * scale


def chern_number(params: models.CIParams, n_k: int = 64, gap_tol=1e-10) -> int:
    """Lattice field-strength (link variable) Chern number of the lower CI band."""
    if not isinstance(params, models.CIParams):
        params = models.CIParams(*params)
    if ci_gap_closes(params):
        raise CriticalPointError(f"gap closes at (m0, lambda0) = {params.as_tuple()}")
    k = 2 * np.pi * np.arange(n_k) / n_k
    H = models.ci_bloch(params, k[:, None], k[None, :])
    E, V = np.linalg.eigh(H)
    if np.abs(E).min() <= gap_tol:
        raise CriticalPointError("gap closes on the k grid")
    u = V[..., 0]  # lower band, shape (n_k, n_k, 2)

    def link(a, b):
        ov = np.sum(a.conj() * b, axis=-1)
        if np.abs(ov).min() < 1e-12:
            raise AccuracyError("vanishing link overlap; refine n_k")
        return ov / np.abs(ov)

    ux = link(u, np.roll(u, -1, axis=0))
    uy = link(u, np.roll(u, -1, axis=1))
    F = np.angle(ux * np.roll(uy, -1, axis=0) / (np.roll(ux, -1, axis=1) * uy))
    raw = F.sum() / (2 * np.pi)
    c = int(round(raw))
    if abs(raw - c) > 1e-6:
        raise AccuracyError(f"Chern sum {raw!r} not within 1e-6 of an integer")
    return c


# ---------------------------------------------------------------------------
# multipole chiral number

def hoti_bulk_gap(couplings) -> float:
    """Minimum bulk HOTI energy.  E^2 = |h(kx)|^2 + |h(ky)|^2, so it is sqrt(2) min|h|."""
    return float(np.sqrt(2) * locate_band_touching(couplings).E_min)


def multipole_chiral_number(spec: models.LatticeSpec, gap_tol=1e-8, sv_tol=1e-10,
                            return_raw=False):
    if spec.family is not models.Family.HOTI_2D:
        raise ValueError("multipole chiral number needs a HOTI_2D spec")
    if spec.boundary is not models.Boundary.OPEN:
        raise ValueError("multipole chiral number needs OPEN boundaries")
    if hoti_bulk_gap(spec.couplings) <= gap_tol:
        raise CriticalPointError(f"bulk gap closes at lambda = {spec.couplings}")
    H = models.build_hoti(spec)
    S = models.sublattice_signs(spec)
    A, B = np.flatnonzero(S > 0), np.flatnonzero(S < 0)
    h = H[np.ix_(A, B)]
    UA, s, UBh = np.linalg.svd(h)
    if s.min() <= sv_tol * max(s.max(), 1e-300):
        raise CriticalPointError("zero singular value in the chiral block")
    UB = UBh.conj().T
    pos = models.cell_positions(spec)
    q = np.exp(-2j * np.pi * pos[:, 0] * pos[:, 1] / spec.length**2)
    QA = UA.conj().T @ (q[A, None] * UA)
    QB = UB.conj().T @ (q[B, None] * UB)
    raw = np.angle(np.linalg.eigvals(QA @ QB.conj().T)).sum() / (2 * np.pi)
    n = int(round(raw))
    return (n, float(raw)) if return_raw else n


# ---------------------------------------------------------------------------
# phase diagrams

@dataclass(frozen=True)
class PhaseDiagram:
    axis1: str
    values1: tuple
    axis2: str
    values2: tuple
    cells: tuple  # row-major over (values1, values2); None marks a rejected cell
    rejected: tuple = field(default=())  # (i, j, message)

    def grid(self):
        """Cells as a float array with NaN for rejected points."""
        a = np.array([np.nan if c is None else c for c in self.cells], dtype=float)
        return a.reshape(len(self.values1), len(self.values2))


@dataclass(frozen=True)
class EsshWinding:
    """Evaluator: winding of ``base`` with couplings ``i1``, ``i2`` replaced."""
    base: tuple
    i1: int
    i2: int
    n_k: Optional[int] = None

    def __call__(self, a, b):
        lam = list(self.base)
        lam[self.i1], lam[self.i2] = a, b
        return winding_number(lam, self.n_k)


@dataclass(frozen=True)
class CIChern:
    """Evaluator over (m0, lambda0)."""
    n_k: int = 64

    def __call__(self, m0, lambda0):
        return chern_number(models.CIParams(m0, lambda0), self.n_k)


@dataclass(frozen=True)
class HotiMCN:
    """Evaluator: MCN of (lambda0, lambda1, lambda2) with two entries replaced."""
    base: tuple
    i1: int
    i2: int
    L: int = 10

    def __call__(self, a, b):
        lam = list(self.base)
        lam[self.i1], lam[self.i2] = a, b
        return multipole_chiral_number(models.hoti(lam, self.L))


def _cell(item):
    evaluator, a, b = item
    try:
        return evaluator(a, b), None
    except TopocritError as e:
        return None, str(e)


def phase_diagram(evaluator: Callable, axis1, axis2, workers: int = 1) -> PhaseDiagram:
    """Evaluate ``evaluator(a, b)`` on the grid; ``axis = (name, values)``.

    Rejections (critical cells) become ``None`` and are listed in ``rejected``.
    """
    n1, v1 = axis1[0], tuple(float(x) for x in axis1[1])
    n2, v2 = axis2[0], tuple(float(x) for x in axis2[1])
    items = [(evaluator, a, b) for a in v1 for b in v2]
    out = pmap(_cell, items, workers)
    cells = tuple(c for c, _ in out)
    rejected = tuple((i // len(v2), i % len(v2), msg) for i, (c, msg) in enumerate(out) if msg is not None)
    return PhaseDiagram(n1, v1, n2, v2, cells, rejected)

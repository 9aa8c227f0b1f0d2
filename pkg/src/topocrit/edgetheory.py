"""Edge modes from the roots of the boundary polynomial P(z) = sum_r lambda_r z^r.

A left edge mode on sublattice A satisfies sum_r lambda_r phi_{j+r} = 0.
Every root z of P with |z| < 1 and multiplicity m contributes the m
solutions j^s z^j, s = 0..m-1.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from . import models
from .errors import AccuracyError, TrivialPhaseError
from .fitting import ScalingFit, fit_power_law

EPS = np.finfo(float).eps
UNIT_TOL = 1e-9  # |z| within this of 1 counts as on the unit circle


@dataclass(frozen=True)
class EdgeRootSet:
    roots: tuple  # ((z, multiplicity), ...) sorted by |z|
    couplings: tuple

    @property
    def inside_count(self) -> int:
        return sum(m for z, m in self.roots if abs(z) < 1 - UNIT_TOL)

    @property
    def on_circle(self) -> tuple:
        return tuple((z, m) for z, m in self.roots if abs(abs(z) - 1) <= UNIT_TOL)

    @property
    def degree(self) -> int:
        return sum(m for _, m in self.roots)


def _merge_radius(m, scale, tol):
    # an m-fold root comes back from the companion matrix split by ~eps^(1/m)
    return scale * max(tol, 8 * EPS ** (1.0 / m))


def edge_roots(couplings, cluster_tol=1e-6) -> EdgeRootSet:
    lam = np.trim_zeros(np.asarray(models.as_couplings(couplings)), "b")
    if lam.size == 0:
        raise ValueError("all couplings are zero; P(z) is degenerate")
    if lam.size == 1:
        return EdgeRootSet((), tuple(lam))
    z = np.roots(lam[::-1])
    scale = max(np.abs(z).max(), 1e-300)
    # top-down grouping: take the largest set of mutual near-neighbours whose
    # spread fits the radius allowed for that multiplicity
    left = list(z)
    clusters = []
    while left:
        pts = np.array(left)
        found = None
        for m in range(len(pts), 1, -1):
            for i in range(len(pts)):
                near = np.argsort(np.abs(pts - pts[i]))[:m]
                grp = pts[near]
                if np.abs(grp[:, None] - grp[None, :]).max() < _merge_radius(m, scale, cluster_tol):
                    found = near
                    break
            if found is not None:
                break
        if found is None:
            found = [0]
        clusters.append([left[k] for k in found])
        left = [x for k, x in enumerate(left) if k not in set(found)]
    roots = []
    for c in clusters:
        cz = complex(np.mean(c))
        # snap conjugation-symmetric noise: real-coefficient clusters on the axis stay real
        if abs(cz.imag) < 1e-14 * max(1.0, abs(cz)):
            cz = complex(cz.real, 0.0)
        roots.append((cz, len(c)))
    roots.sort(key=lambda t: (abs(t[0]), np.angle(t[0])))
    return EdgeRootSet(tuple(roots), tuple(lam))


@dataclass(frozen=True)
class AnalyticEdgeMode:
    amplitudes: np.ndarray
    root: complex
    power: int


def recursion_residual(couplings, phi) -> float:
    """max_j |sum_r lambda_r phi_{j+r}| over the bulk rows j = 1..L-R, relative to ||phi||."""
    lam = np.asarray(couplings, float)
    R = len(lam) - 1
    L = len(phi)
    rows = np.array([np.dot(lam, phi[j:j + R + 1]) for j in range(L - R)])
    return float(np.abs(rows).max() / (np.linalg.norm(phi) * np.abs(lam).sum())) if len(rows) else 0.0


def analytic_edge_modes(roots: EdgeRootSet, L: int, residual_tol=1e-9):
    """Normalised modes j^s z^j (j = 1..L) for every root with |z| <= 1."""
    qual = [(z, m) for z, m in roots.roots if abs(z) <= 1 + UNIT_TOL]
    if not qual:
        raise TrivialPhaseError("no roots inside or on the unit circle: no left edge modes")
    j = np.arange(1, L + 1, dtype=float)
    out = []
    for z, m in qual:
        for s in range(m):
            if z == 0:
                phi = np.zeros(L, complex)
                phi[s] = 1.0
            elif z.imag == 0:
                phi = np.sign(z.real) ** j * np.exp(j * np.log(abs(z.real))) * j**s
            else:
                # evaluate in logs to avoid underflow of z^j for small |z|
                phi = np.exp(j * np.log(complex(z))) * j**s
            phi = phi / np.linalg.norm(phi)
            res = recursion_residual(roots.couplings, phi)
            if res > residual_tol:
                raise AccuracyError(f"recursion residual {res:.2e} for root {z:.6g}, power {s}")
            out.append(AnalyticEdgeMode(phi, z, s))
    return out


class XiMethod(str, Enum):
    ROOT = "ROOT"
    ENVELOPE_FIT = "ENVELOPE_FIT"


@dataclass(frozen=True)
class LocalizationResult:
    xi: float
    kappa: float
    method: XiMethod


def localization_length(source, power=0) -> LocalizationResult:
    """xi from an EdgeRootSet (ROOT) or from a mode's amplitudes (ENVELOPE_FIT).

    A critical root set (a root on the unit circle) or a non-decaying
    envelope gives xi = inf.
    """
    if isinstance(source, EdgeRootSet):
        if source.on_circle:
            return LocalizationResult(np.inf, 0.0, XiMethod.ROOT)
        inside = [abs(z) for z, _ in source.roots if abs(z) < 1 - UNIT_TOL]
        if not inside:
            raise TrivialPhaseError("no roots inside the unit circle")
        zmax = max(inside)
        if zmax == 0:
            return LocalizationResult(0.0, np.inf, XiMethod.ROOT)
        kappa = -np.log(zmax)
        return LocalizationResult(1 / kappa, kappa, XiMethod.ROOT)
    phi = np.abs(np.asarray(source))
    L = len(phi)
    j = np.arange(1, L + 1)
    sel = (j >= L / 4) & (j <= 3 * L / 4)
    amp = phi[sel] / np.linalg.norm(phi)
    if np.any(amp <= 1e-14):
        raise ValueError("mode amplitude falls below 1e-14 inside the fit window")
    slope = np.polyfit(j[sel], np.log(amp / j[sel] ** power), 1)[0]
    if slope >= 0:
        return LocalizationResult(np.inf, 0.0, XiMethod.ENVELOPE_FIT)
    return LocalizationResult(-1 / slope, -slope, XiMethod.ENVELOPE_FIT)


def xi_exponent(family: Callable, deltas) -> ScalingFit:
    """Fit xi(delta) ~ delta^exponent with xi from roots of ``family(delta)``."""
    deltas = np.sort(np.asarray(deltas, float))
    if np.any(deltas <= 0):
        raise ValueError("deltas must be positive")
    xis = []
    for d in deltas:
        res = localization_length(edge_roots(family(d)))
        if not np.isfinite(res.xi):
            raise ValueError(f"delta={d:g} is critical; xi diverges")
        xis.append(res.xi)
    return fit_power_law(deltas, xis)


def position_moments(phi):
    """Mean and variance of the cell index j (1-based) under |phi_j|^2."""
    w = np.abs(np.asarray(phi)) ** 2
    w = w / w.sum()
    j = np.arange(1, len(w) + 1)
    mean = float(np.dot(w, j))
    return mean, float(np.dot(w, (j - mean) ** 2))


def variance_law_ratio(phi, xi) -> float:
    """Var(j) / (xi/2)^2; tends to 2p - 1 for an envelope j^(p-1) e^(-j/xi) with 1 << xi << L."""
    return position_moments(phi)[1] / (xi / 2) ** 2

"""Eigendecomposition, band sampling, band touchings and gap scaling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar

from . import models
from .edgetheory import edge_roots
from .errors import NotCriticalError, NotHermitianError, TopocritError
from .fitting import ScalingFit, fit_power_law
from .parallel import pmap

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray
    states: np.ndarray

    def __len__(self):
        return len(self.energies)

    def residual(self, H):
        """max_i ||H v_i - E_i v_i||, for checking the decomposition."""
        R = H @ self.states - self.states * self.energies
        return float(np.abs(R).max())


def eigh(H) -> Spectrum:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {H.shape}")
    dev = np.abs(H - H.conj().T).max() if H.size else 0.0
    if dev > HERMITIAN_TOL:
        raise NotHermitianError(f"matrix is not Hermitian (max |H - H^dag| = {dev:.3g})")
    E, V = np.linalg.eigh(H)
    return Spectrum(E, V)


# ---------------------------------------------------------------------------
# 1D bands

def band_energies_1d(couplings, n_k: int):
    """Upper band E+(k) = |h(k)| on the uniform grid k_j = -pi + 2 pi j / n_k."""
    lam = models.as_couplings(couplings)
    R = len(lam) - 1
    if n_k < 2 * R + 2:
        raise ValueError(f"n_k={n_k} too small to resolve a degree-{R} polynomial (need >= {2 * R + 2})")
    k = -np.pi + 2 * np.pi * np.arange(n_k) / n_k
    return k, np.abs(models.bloch_h(lam, k))


@dataclass(frozen=True)
class TouchingPoint:
    k_c: float
    E_min: float
    order_p: Optional[int] = None
    fit_quality: Optional[float] = None
    raw_exponent: Optional[float] = None
    derivative_p: Optional[int] = None
    mixed_order: bool = False


def _wrap(k):
    """Map to (-pi, pi], so k = pi rather than -pi."""
    k = float(np.angle(np.exp(1j * k)))
    return np.pi if np.isclose(k, -np.pi, atol=1e-15) else k


def locate_band_touching(couplings) -> TouchingPoint:
    """Global minimiser of |h(k)|.

    Candidates come from a dense grid (refined by bounded minimisation) and
    from the phases of roots of P(z) near the unit circle; cluster centroids
    pin multiple roots far more accurately than any 1D minimiser can.
    """
    lam = models.as_couplings(couplings)
    R = len(lam) - 1
    f = lambda k: abs(models.bloch_h(lam, k))  # noqa: E731
    n = max(4096, 64 * (R + 1))
    k, E = band_energies_1d(lam, n)
    dk = 2 * np.pi / n
    cands = []
    idx = np.flatnonzero((E <= np.roll(E, 1)) & (E <= np.roll(E, -1)))
    for i in idx[np.argsort(E[idx])][:8]:
        res = minimize_scalar(lambda q: f(q) ** 2, bounds=(k[i] - dk, k[i] + dk),
                              method="bounded", options={"xatol": 1e-12})
        kk = res.x if f(res.x) <= E[i] else k[i]
        cands.append((_wrap(kk), float(f(kk))))
    roots = edge_roots(lam).roots if any(lam) else ()
    for z, _ in roots:
        if abs(abs(z) - 1) < 1e-3:
            kk = _wrap(np.angle(z))
            cands.append((kk, float(f(kk))))
    Emin = min(e for _, e in cands)
    ties = [c for c in cands if c[1] <= Emin + 1e-12 * max(1.0, max(map(abs, lam)))]
    # prefer k in [0, pi] among symmetric partners, then the smallest |h|
    ties.sort(key=lambda c: (not (0 <= c[0] <= np.pi), c[1], c[0]))
    kc, e = ties[0]
    return TouchingPoint(k_c=kc, E_min=e)


def _mp_energy(lam, kc, dk):
    k = mpmath.mpf(kc) + dk
    return abs(sum(mpmath.mpf(l) * mpmath.expj(r * k) for r, l in enumerate(lam)))


def _derivative_order(lam, kc, tol=1e-9):
    """Smallest m with d^m |h|^2/dk^m != 0 at k_c, via |h|^2 = sum_d c_d e^{ikd}."""
    lam = np.asarray(lam, float)
    R = len(lam) - 1
    c = np.correlate(lam, lam, mode="full")  # c_d for d = -R..R
    d = np.arange(-R, R + 1)
    with mpmath.workdps(50):
        k = mpmath.mpf(kc)
        for m in range(0, 2 * R + 2):
            val = sum(mpmath.mpf(float(cd)) * (1j * int(dd)) ** m * mpmath.expj(int(dd) * k)
                      for cd, dd in zip(c, d))
            scale = float(np.sum(np.abs(c) * np.abs(d).astype(float) ** m)) or 1.0
            if abs(val) > tol * scale:
                return m
    return None


def touching_order(couplings, k_c: float, window=(1e-4, 1e-2), n_points=21) -> TouchingPoint:
    """Order p of E+ ~ |k - k_c|^p from a log-log fit on both sides of k_c.

    The energies are evaluated at 50 digits so that the window reaches
    E ~ 1e-16 for p = 4 without round-off.  A derivative test on |h|^2
    cross-checks the fitted order.
    """
    lam = models.as_couplings(couplings)
    E0 = float(abs(models.bloch_h(lam, k_c)))
    if E0 > 1e-8:
        raise NotCriticalError(f"|h(k_c)| = {E0:.3g} > 1e-8; couplings are not at a band touching")
    dks = np.logspace(np.log10(window[0]), np.log10(window[1]), n_points)
    xs, ys = [], []
    with mpmath.workdps(50):
        for dk in dks:
            for s in (1, -1):
                xs.append(np.log(dk))
                ys.append(float(mpmath.log(_mp_energy(lam, k_c, s * mpmath.mpf(dk)))))
    xs, ys = np.array(xs), np.array(ys)
    slope, icpt = np.polyfit(xs, ys, 1)
    res = ys - (icpt + slope * xs)
    r2 = 1 - np.sum(res**2) / np.sum((ys - ys.mean()) ** 2)
    p = int(round(slope))
    m = _derivative_order(lam, k_c)
    dp = None if m is None else m / 2
    mixed = bool(abs(slope - p) > 0.15 or r2 < 0.999 or p < 1 or dp != p)
    return TouchingPoint(k_c=float(k_c), E_min=E0, order_p=max(p, 1), fit_quality=float(r2),
                         raw_exponent=float(slope), derivative_p=None if dp is None else int(np.ceil(dp)),
                         mixed_order=mixed)


# ---------------------------------------------------------------------------
# gaps

def in_gap_count(energies, ratio=10.0, max_count=None) -> int:
    """Number of states separated from the rest of the spectrum near E = 0 by a
    jump of at least ``ratio`` in sorted |E|.

    Degenerate zero modes split by exponentially small, uneven amounts, so
    several jumps can qualify; the largest one marks the gap edge.  Returns 0
    if there is no such jump.
    """
    a = np.sort(np.abs(np.asarray(energies, float)))
    if max_count is None:
        max_count = len(a) // 2
    n_max = min(max_count, len(a) - 1)
    if n_max < 1:
        return 0
    lo = np.maximum(a[:n_max], 1e-300)
    r = a[1:n_max + 1] / lo
    best = int(np.argmax(r))
    return best + 1 if r[best] >= ratio else 0


def bulk_edge_gap(H, max_zero_modes=None) -> float:
    """Lowest bulk |E| minus the largest in-gap |E|.

    With no in-gap states the in-gap energy is taken as zero, so the result
    is the smallest |E|.
    """
    E = np.linalg.eigvalsh(H)
    a = np.sort(np.abs(E))
    n = in_gap_count(E, max_count=max_zero_modes)
    return float(a[n] - (a[n - 1] if n else 0.0))


def _gap_for(item):
    family, L = item
    target = family(L)
    H = models.build(target) if isinstance(target, models.LatticeSpec) else np.asarray(target)
    g = bulk_edge_gap(H)
    if not g > 0:
        raise TopocritError(f"non-positive bulk-edge gap {g:.3g} at L={L}; states misclassified")
    return g


def gap_scaling(family: Callable, sizes, workers: int = 1) -> ScalingFit:
    """Fit the bulk-edge gap against L.  ``family(L)`` returns a LatticeSpec or a matrix."""
    sizes = sorted(int(s) for s in sizes)
    if len(sizes) < 4:
        raise ValueError("gap_scaling needs at least 4 sizes")
    return fit_power_law(sizes, gap_values(family, sizes, workers))


def gap_values(family: Callable, sizes, workers: int = 1):
    """Bulk-edge gap for each L, in the order given."""
    return pmap(_gap_for, [(family, int(L)) for L in sizes], workers)


def direct_gap(couplings, k) -> float:
    """Direct band gap 2|h(k)| at fixed momentum."""
    return float(2 * abs(models.bloch_h(couplings, k)))

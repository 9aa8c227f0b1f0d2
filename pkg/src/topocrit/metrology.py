"""Quantum Fisher information of eigenstate probes, and edge-mode selection."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Callable, Optional

import numpy as np

from . import models
from .errors import SizeError, TrackingError, TrivialPhaseError
from .fitting import ScalingFit, fit_power_law
from .parallel import pmap
from .spectra import Spectrum, eigh, in_gap_count

# relative to ||H||; see select_probe / qfi_perturbative
DEFAULT_CUT = 1e-13


class QfiMethod(str, Enum):
    FIDELITY = "FIDELITY"
    PERTURBATIVE = "PERTURBATIVE"
    STATE_DERIVATIVE = "STATE_DERIVATIVE"


@dataclass(frozen=True)
class QfiResult:
    value: float
    method: QfiMethod
    probe_index: Optional[int] = None
    delta_lambda: float = 0.0
    lam: Optional[float] = None
    excluded: int = 0
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# zero modes

@dataclass(frozen=True)
class EdgeMode:
    state: np.ndarray
    sublattice: str  # "A" or "B"
    side: str  # "LEFT"/"RIGHT" in 1D, corner label in 2D
    center: float  # mean distance (in cells) from the mode's own edge
    energy: float  # <H>, ~0


@dataclass(frozen=True)
class ZeroModes:
    indices: tuple  # eigen-indices spanning the near-zero subspace
    modes: tuple  # EdgeMode, ordered by localisation

    def select(self, side=None, sublattice=None):
        return [m for m in self.modes
                if (side is None or m.side == side) and (sublattice is None or m.sublattice == sublattice)]


def select_zero_modes(spec: models.LatticeSpec, spectrum: Optional[Spectrum] = None,
                      ratio=10.0, polarization_tol=1e-6, H=None) -> ZeroModes:
    """Sublattice-polarised, edge-resolved basis of the in-gap zero-energy subspace.

    In-gap states are those below a jump of at least ``ratio`` in sorted |E|.
    The subspace is rotated to diagonalise the sublattice-A projector, then,
    within each sublattice, the position operator.
    """
    if spec.boundary is not models.Boundary.OPEN:
        raise ValueError("edge modes need OPEN boundaries")
    if spectrum is None:
        spectrum = eigh(models.build(spec) if H is None else H)
    E, V = spectrum.energies, spectrum.states
    n = in_gap_count(E, ratio=ratio)
    if n == 0:
        raise TrivialPhaseError("no in-gap states: trivial phase")
    idx = np.sort(np.argsort(np.abs(E), kind="stable")[:n])
    VZ = V[:, idx]
    S = models.sublattice_signs(spec)
    pos = models.cell_positions(spec)
    L = spec.length
    PA = (S > 0).astype(float)
    w, C = np.linalg.eigh(VZ.conj().T @ (PA[:, None] * VZ))
    modes = []
    for label, keep in (("A", w >= 1 - polarization_tol), ("B", w <= polarization_tol)):
        if not keep.any():
            continue
        sub = VZ @ C[:, keep]
        if pos.ndim == 1:
            X = sub.conj().T @ (pos[:, None] * sub)
        else:
            X = sub.conj().T @ ((pos[:, 0] + L * pos[:, 1])[:, None] * sub)
        _, R = np.linalg.eigh(X)
        for psi in (sub @ R).T:
            k = np.argmax(np.abs(psi))
            psi = psi * (abs(psi[k]) / psi[k])
            if not np.any(np.abs(psi.imag) > 1e-14 * np.abs(psi).max()):
                psi = psi.real.copy()
            p = np.abs(psi) ** 2
            if pos.ndim == 1:
                mean = float(p @ pos)
                side = "LEFT" if mean < (L + 1) / 2 else "RIGHT"
                center = mean if side == "LEFT" else L + 1 - mean
            else:
                mx, my = p @ pos[:, 0], p @ pos[:, 1]
                sx = "L" if mx < (L + 1) / 2 else "R"
                sy = "B" if my < (L + 1) / 2 else "T"
                side = sx + sy
                center = float(min(mx, L + 1 - mx) + min(my, L + 1 - my))
            energy = float(np.real(np.vdot(psi, (V * E) @ (V.conj().T @ psi))))
            modes.append(EdgeMode(psi, label, side, float(center), energy))
    modes.sort(key=lambda m: (m.center, m.side, m.sublattice))
    return ZeroModes(tuple(int(i) for i in idx), tuple(modes))


# ---------------------------------------------------------------------------
# perturbative route

def _cut(spectrum, degeneracy_cut):
    if degeneracy_cut is None:
        return DEFAULT_CUT * max(np.abs(spectrum.energies).max(), 1e-300)
    return degeneracy_cut


def qfi_perturbative(spectrum: Spectrum, driving, l0: int, degeneracy_cut=None) -> QfiResult:
    """F = 4 sum_{l != l0} |<l|H_r|l0>|^2 / (E_l - E_l0)^2, dropping |E_l - E_l0| <= cut.

    The default cut is 1e-13 ||H||.
    """
    Hr = driving.matrix if isinstance(driving, models.DrivingTerm) else np.asarray(driving)
    n = len(spectrum.energies)
    if not (0 <= l0 < n):
        raise IndexError(f"probe index {l0} outside 0..{n - 1}")
    E, V = spectrum.energies, spectrum.states
    cut = _cut(spectrum, degeneracy_cut)
    m = V.conj().T @ (Hr @ V[:, l0])
    dE = E - E[l0]
    keep = np.abs(dE) > cut
    excluded = int(np.count_nonzero(~keep)) - 1  # the probe itself is not an exclusion
    val = 4.0 * np.sum(np.abs(m[keep]) ** 2 / dE[keep] ** 2)
    return QfiResult(float(val), QfiMethod.PERTURBATIVE, int(l0), 0.0, excluded=excluded,
                     meta={"degeneracy_cut": float(cut)})


def degenerate_cluster(energies, l0, tol):
    return np.flatnonzero(np.abs(np.asarray(energies) - energies[l0]) <= tol)


def qfi_cluster(spectrum: Spectrum, driving, l0: int, degeneracy_cut=None) -> QfiResult:
    """Perturbative QFI averaged over the degenerate cluster containing ``l0``.

    Equivalent to the trace over the cluster, so it is independent of the
    arbitrary basis the eigensolver picks inside a degenerate level.
    """
    Hr = driving.matrix if isinstance(driving, models.DrivingTerm) else np.asarray(driving)
    E, V = spectrum.energies, spectrum.states
    cut = _cut(spectrum, degeneracy_cut)
    cl = degenerate_cluster(E, l0, cut)
    out = np.ones(len(E), bool)
    out[cl] = False
    keep = out & np.all(np.abs(E[:, None] - E[cl][None, :]) > cut, axis=1)
    M = V[:, keep].conj().T @ (Hr @ V[:, cl])
    dE = E[keep][:, None] - E[cl][None, :]
    val = 4.0 * np.sum(np.abs(M) ** 2 / dE**2) / len(cl)
    return QfiResult(float(val), QfiMethod.PERTURBATIVE, int(l0), 0.0,
                     excluded=int(np.count_nonzero(out & ~keep)),
                     meta={"cluster_size": int(len(cl)), "degeneracy_cut": float(cut)})


def qfi_subspace_state(spectrum: Spectrum, driving, psi, subspace, energy=0.0) -> QfiResult:
    """Perturbative QFI of a state living in a (near-)degenerate subspace at ``energy``,
    summing only over eigenstates outside the subspace."""
    Hr = driving.matrix if isinstance(driving, models.DrivingTerm) else np.asarray(driving)
    E, V = spectrum.energies, spectrum.states
    out = np.ones(len(E), bool)
    out[list(subspace)] = False
    m = V[:, out].conj().T @ (Hr @ psi)
    val = 4.0 * np.sum(np.abs(m) ** 2 / (E[out] - energy) ** 2)
    return QfiResult(float(val), QfiMethod.PERTURBATIVE, None, 0.0, excluded=len(subspace) - 1)


# ---------------------------------------------------------------------------
# fidelity route

def _one_minus_overlap(a, b):
    """1 - |<a|b>| computed as ||a - e^{i phi} b||^2 / 2, free of cancellation."""
    ov = np.vdot(b, a)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    d = a - ph * b
    return 0.5 * float(np.real(np.vdot(d, d)))


def track_state(H, psi, ambiguity=1e-3, degenerate_tol=None):
    """Eigenvector of H with maximal overlap with psi; rejects near ties.

    With ``degenerate_tol`` set, a match inside a degenerate level (energies
    within the tolerance) returns psi projected onto that level, which is
    the parallel-transported state; the eigensolver's basis there is arbitrary.
    """
    E, V = np.linalg.eigh(H)
    ov = np.abs(V.conj().T @ psi)
    order = np.argsort(ov)[::-1]
    i = int(order[0])
    if degenerate_tol is not None:
        level = np.flatnonzero(np.abs(E - E[i]) <= degenerate_tol)
        if len(level) > 1:
            phi = V[:, level] @ (V[:, level].conj().T @ psi)
            w = np.linalg.norm(phi)
            if w < 1 - ambiguity:
                raise TrackingError(f"state leaks out of its degenerate level (weight {w:.6f})")
            return i, phi / w, E[i]
    if len(ov) > 1 and ov[order[0]] - ov[order[1]] < ambiguity:
        raise TrackingError(f"ambiguous tracking: overlaps {ov[order[0]]:.6f} vs {ov[order[1]]:.6f}")
    return i, V[:, i], E[i]


def _fid_q(family, lam, psi0, h, dtol):
    _, a, _ = track_state(family(lam - h / 2), psi0, degenerate_tol=dtol)
    _, b, _ = track_state(family(lam + h / 2), psi0, degenerate_tol=dtol)
    return 8.0 * _one_minus_overlap(a, b) / h**2


def qfi_fidelity(family: Callable, lam: float, l0: int, delta: float = 1e-4,
                 richardson=True, adaptive=True, degenerate_tol=None) -> QfiResult:
    """F = 8 (1 - |<psi(lam - h/2)|psi(lam + h/2)>|) / h^2 with Richardson over h, h/2.

    ``family(lam)`` returns the Hamiltonian matrix.  The probe is eigenstate
    ``l0`` at ``lam``; at the shifted points it is tracked by overlap.  With
    ``adaptive`` the step is shrunk until h^2 F <= 1e-2 so the expansion
    stays in its quadratic regime.  ``degenerate_tol`` is passed to
    :func:`track_state`.
    """
    E, V = np.linalg.eigh(family(lam))
    if not (0 <= l0 < len(E)):
        raise IndexError(f"probe index {l0} outside 0..{len(E) - 1}")
    psi0 = V[:, l0]
    h = float(delta)
    q = _fid_q(family, lam, psi0, h, degenerate_tol)
    if adaptive:
        for _ in range(20):
            if q * h * h <= 1e-2:
                break
            h = 0.05 / np.sqrt(q)
            q = _fid_q(family, lam, psi0, h, degenerate_tol)
    if richardson:
        q2 = _fid_q(family, lam, psi0, h / 2, degenerate_tol)
        q = (4 * q2 - q) / 3
    return QfiResult(max(float(q), 0.0), QfiMethod.FIDELITY, int(l0), h, lam=float(lam))


# ---------------------------------------------------------------------------
# state-derivative route

def eigenstate_triplet(family: Callable, lam: float, l0: int, delta: float, degenerate_tol=None):
    """Eigenstate ``l0`` at lam and its overlap-tracked partners at lam -/+ delta."""
    _, V = np.linalg.eigh(family(lam))
    psi = V[:, l0]
    _, m, _ = track_state(family(lam - delta), psi, degenerate_tol=degenerate_tol)
    _, p, _ = track_state(family(lam + delta), psi, degenerate_tol=degenerate_tol)
    return m, psi, p


def qfi_state_derivative(states, delta: float, norm_tol=1e-8) -> QfiResult:
    """F = 4 (<d psi|d psi> - |<psi|d psi>|^2) from states at lam - delta, lam, lam + delta."""
    m, c, p = (np.asarray(s, dtype=complex) for s in states)
    for s in (m, c, p):
        if abs(np.linalg.norm(s) - 1) > norm_tol:
            raise ValueError("states must be normalised")
    if delta <= 0:
        raise ValueError("delta must be positive")
    # gauge: overlaps with the centre real positive
    m = m * np.exp(-1j * np.angle(np.vdot(c, m)))
    p = p * np.exp(-1j * np.angle(np.vdot(c, p)))
    d = (p - m) / (2 * delta)
    val = 4 * (np.real(np.vdot(d, d)) - abs(np.vdot(c, d)) ** 2)
    return QfiResult(max(float(val), 0.0), QfiMethod.STATE_DERIVATIVE, None, float(delta))


# ---------------------------------------------------------------------------
# scaling with size

class Probe(str, Enum):
    LOWEST_POSITIVE = "LOWEST_POSITIVE"  # lowest eigenstate with E >= 0
    CLUSTER = "CLUSTER"  # the degenerate level of the lowest E >= 0 state, averaged
    POLARIZED_EDGE = "POLARIZED_EDGE"  # sublattice-A left zero mode from select_zero_modes


def lowest_nonnegative(energies) -> int:
    E = np.asarray(energies)
    pos = np.flatnonzero(E >= 0)
    if pos.size == 0:
        return int(np.argmax(E))
    return int(pos[np.argmin(E[pos])])


def probe_qfi(spec: models.LatticeSpec, r, probe=Probe.LOWEST_POSITIVE, degeneracy_cut=None) -> QfiResult:
    """Perturbative QFI of the chosen probe state of ``spec`` for driving coupling ``r``."""
    probe = Probe(probe)
    H = models.build(spec)
    spec_ = eigh(H)
    Hr = models.driving_term(spec, r)
    if probe is Probe.POLARIZED_EDGE:
        zm = select_zero_modes(spec, spec_)
        mode = zm.select(sublattice="A")[0]
        return qfi_subspace_state(spec_, Hr, mode.state, zm.indices, energy=0.0)
    l0 = lowest_nonnegative(spec_.energies)
    if probe is Probe.CLUSTER:
        return qfi_cluster(spec_, Hr, l0, degeneracy_cut)
    return qfi_perturbative(spec_, Hr, l0, degeneracy_cut)


def _probe_task(item):
    spec, r, probe, cut = item
    return probe_qfi(spec, r, probe, cut).value


@dataclass(frozen=True)
class QfiScaling:
    fit: ScalingFit
    values: tuple


def qfi_scaling(family: Callable, sizes, r, probe=Probe.LOWEST_POSITIVE,
                degeneracy_cut=None, workers=1) -> QfiScaling:
    """F_Q(L) at the couplings ``family(L)`` for driving ``r``, fitted against L."""
    sizes = sorted(int(L) for L in sizes)
    if len(sizes) < 4:
        raise SizeError("qfi_scaling needs at least 4 sizes")
    vals = pmap(_probe_task, [(family(L), r, Probe(probe), degeneracy_cut) for L in sizes], workers)
    return QfiScaling(fit_power_law(sizes, vals), tuple(vals))


def spec_family(family, couplings, boundary=models.Boundary.OPEN):
    """Picklable ``L -> LatticeSpec`` generator for a fixed family and couplings."""
    return partial(_make_spec, models.Family(family), couplings, models.Boundary(boundary))


def _make_spec(family, couplings, boundary, L):
    return models.LatticeSpec(family, couplings, L, boundary)

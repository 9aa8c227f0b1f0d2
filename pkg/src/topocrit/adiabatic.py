"""Adiabatic ramps, GHZ branch coefficients and the N-particle QFI.

The propagator is a product of exact exponentials of H at the step
midpoints, each through an eigendecomposition.  Along the way we carry

* the in-step integral of <psi(s)|H_2|psi(s)> (done exactly, s continuous
  inside the step), giving a = <psi|U^dag dU|psi>;
* the tangent chi = (dU/dlambda) L, the exact derivative of the discrete
  propagator with respect to a uniform shift of the ramp, giving b = <chi|chi>.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from typing import Optional, Sequence

import numpy as np

from . import models
from .errors import AccuracyError, TrackingError
from .fitting import ScalingFit, fit_power_law
from .metrology import select_zero_modes
from .parallel import pmap
from .spectra import locate_band_touching, touching_order

MIN_STEPS = 100
MAX_STEP_PHASE = 8.0  # largest allowed dt * ||H||


class RampShape(str, Enum):
    LINEAR = "LINEAR"
    QUADRATIC = "QUADRATIC"  # decelerates into the end point


@dataclass(frozen=True)
class RampSchedule:
    start: float
    end: float
    total_time: float
    steps: int
    shape: RampShape = RampShape.LINEAR
    offset: float = 0.0  # uniform shift of the whole ramp, used for d/dlambda

    def __post_init__(self):
        object.__setattr__(self, "shape", RampShape(self.shape))
        if not self.total_time > 0:
            raise ValueError("total_time must be positive")
        if int(self.steps) != self.steps or self.steps < MIN_STEPS:
            raise ValueError(f"steps must be an integer >= {MIN_STEPS}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.total_time / self.steps

    @property
    def amplitude(self) -> float:
        return abs(self.start - self.end)

    def __call__(self, t):
        s = np.clip(np.asarray(t, float) / self.total_time, 0.0, 1.0)
        if self.shape is RampShape.LINEAR:
            lam = self.start + (self.end - self.start) * s
        else:
            lam = self.end + (self.start - self.end) * (1 - s) ** 2
        return lam + self.offset

    def midpoints(self):
        return self((np.arange(self.steps) + 0.5) * self.dt)

    def shifted(self, delta):
        return replace(self, offset=self.offset + delta)


def default_steps(total_time, norm_h, kappa=0.25, minimum=2000):
    """Step count with dt * ||H|| <= 1 / kappa."""
    return int(max(minimum, np.ceil(total_time * norm_h * kappa)))


@dataclass
class Evolution:
    states: np.ndarray  # (dim, m) final states
    unitary: Optional[np.ndarray] = None
    a_integral: Optional[np.ndarray] = None  # (m,) -i * int <psi|H2|psi> dt
    tangent: Optional[np.ndarray] = None  # (dim, m) dU/dlambda applied to the initial states
    energy_integral: Optional[np.ndarray] = None  # (m,) int <psi|H|psi> dt
    low_weight_min: Optional[np.ndarray] = None  # (m,) min weight inside the tracked low-|E| window
    unitarity_error: float = 0.0


def _sinc(x):
    return np.sinc(x / np.pi)


def evolve(H0, H2, schedule: RampSchedule, states, unitary=False, derivatives=False,
           energies=False, low_window: int = 0, max_step_phase=MAX_STEP_PHASE) -> Evolution:
    """Propagate ``states`` (columns) under H(t) = H0 + lambda(t) H2.

    ``derivatives`` accumulates a (in-step exact integral) and the tangent
    (dU/dlambda) applied to the states.  ``energies`` accumulates the
    integral of <H> per state and, with ``low_window = n``, the smallest
    weight each state keeps inside the n instantaneous eigenstates of
    smallest |E|.
    """
    H0 = np.asarray(H0)
    H2 = np.asarray(H2)
    psi = np.array(states, dtype=complex, copy=True)
    if psi.ndim == 1:
        psi = psi[:, None]
    norms = np.linalg.norm(psi, axis=0)
    if np.any(np.abs(norms - 1) > 1e-10):
        raise ValueError("initial states must be normalised")
    dt = schedule.dt
    lams = schedule.midpoints()
    hnorm = max(np.abs(np.linalg.eigvalsh(H0 + lams[0] * H2)).max(),
                np.abs(np.linalg.eigvalsh(H0 + lams[-1] * H2)).max())
    if dt * hnorm > max_step_phase:
        raise AccuracyError(f"dt * ||H|| = {dt * hnorm:.3g} exceeds {max_step_phase}; increase steps")
    d, m = psi.shape
    U = np.eye(d, dtype=complex) if unitary else None
    a = np.zeros(m, complex) if derivatives else None
    chi = np.zeros_like(psi) if derivatives else None
    eint = np.zeros(m) if energies else None
    wmin = np.ones(m) if (energies and low_window) else None
    for lam in lams:
        E, V = np.linalg.eigh(H0 + lam * H2)
        c = V.conj().T @ psi
        ph = np.exp(-1j * E * dt)
        if derivatives:
            W = V.conj().T @ (H2 @ V)
            w = E[:, None] - E[None, :]
            x = _sinc(w * dt / 2)
            phi = dt * np.exp(0.5j * w * dt) * x
            a += -1j * np.einsum("im,ij,jm->m", c.conj(), W * phi, c)
            D = -1j * dt * np.exp(-0.5j * (E[:, None] + E[None, :]) * dt) * x
            chi = V @ (ph[:, None] * (V.conj().T @ chi) + (W * D) @ c)
        if energies:
            eint += dt * np.real(np.einsum("im,i,im->m", c.conj(), E, c))
            if wmin is not None:
                low = np.argsort(np.abs(E))[:low_window]
                wmin = np.minimum(wmin, np.sum(np.abs(c[low]) ** 2, axis=0))
        psi = V @ (ph[:, None] * c)
        if unitary:
            U = V @ (ph[:, None] * (V.conj().T @ U))
    if unitary:
        err = float(np.abs(U.conj().T @ U - np.eye(d)).max())
    else:
        err = float(np.abs(np.linalg.norm(psi, axis=0) - 1).max())
    if err > 1e-10:
        raise AccuracyError(f"unitarity violated: {err:.3g}")
    return Evolution(psi, U, a, chi, eint, wmin, err)


# ---------------------------------------------------------------------------
# protocol

@dataclass(frozen=True)
class GhzProtocol:
    """Ramp coupling ``index`` of ``couplings`` from ``start`` to the critical ``end``."""
    couplings: tuple = (1.0, 2.0, 2.0)
    index: int = 2
    start: float = 2.0
    end: float = 1.0
    ramp_constant: Optional[float] = None  # c in T = c L^p; None -> 20 (start - end) / gap(start)
    order_p: Optional[int] = None  # None -> touching order at the end point
    shape: RampShape = RampShape.LINEAR
    steps_per_norm_time: float = 0.25  # n_t = max(2000, kappa * T * ||H||)
    n_branches: int = 2

    def couplings_at(self, value):
        lam = list(self.couplings)
        lam[self.index] = value
        return tuple(lam)

    def gap_at_start(self) -> float:
        # full bulk gap 2 min|h|
        return 2 * locate_band_touching(self.couplings_at(self.start)).E_min

    def constant(self) -> float:
        if self.ramp_constant is not None:
            return float(self.ramp_constant)
        return 20 * abs(self.start - self.end) / self.gap_at_start()

    def order(self) -> int:
        if self.order_p is not None:
            return int(self.order_p)
        lam = self.couplings_at(self.end)
        return touching_order(lam, locate_band_touching(lam).k_c).order_p

    def matrices(self, L):
        spec = models.essh(self.couplings_at(0.0), L)
        return models.build(spec), models.driving_term(spec, self.index).matrix

    def schedule(self, L, total_time=None, steps=None) -> RampSchedule:
        T = self.constant() * L ** self.order() if total_time is None else float(total_time)
        if steps is None:
            H0, H2 = self.matrices(L)
            norm = np.abs(np.linalg.eigvalsh(H0 + self.start * H2)).max()
            steps = default_steps(T, norm, self.steps_per_norm_time)
        return RampSchedule(self.start, self.end, T, steps, self.shape)

    def initial_states(self, L):
        spec = models.essh(self.couplings_at(self.start), L)
        left = select_zero_modes(spec).select(side="LEFT", sublattice="A")
        if len(left) < self.n_branches:
            raise ValueError(f"need {self.n_branches} left edge modes at the start point, found {len(left)}")
        return np.stack([m.state for m in left[: self.n_branches]], axis=1).astype(complex)


@dataclass(frozen=True)
class BranchCoefficients:
    a: tuple  # complex, one per branch
    b: tuple  # real
    schedule: RampSchedule
    L: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for ai, bi in zip(self.a, self.b):
            if bi < abs(ai) ** 2 - 1e-8 * max(1.0, bi):
                raise AccuracyError(f"Cauchy-Schwarz violated: b={bi!r} < |a|^2={abs(ai) ** 2!r}")
            if ai.real > 1e-6 * abs(ai) + 1e-10:
                raise AccuracyError(f"a={ai!r} has a real part; it must be -i times a real integral")

    @property
    def a1(self):
        return self.a[0]

    @property
    def a2(self):
        return self.a[1]

    @property
    def b1(self):
        return self.b[0]

    @property
    def b2(self):
        return self.b[1]


def fd_delta(schedule: RampSchedule, h2_norm: float) -> float:
    """Step for d/dlambda by finite differences: 1e-4 of the ramp amplitude,
    reduced so that delta * T * ||H_2|| <= 1e-4 (keeps the O(delta^2) term negligible)."""
    return 1e-4 * max(schedule.amplitude, 1e-12) / max(1.0, schedule.total_time * h2_norm)


def branch_coefficients(H0, H2, schedule: RampSchedule, states, L: int = 0,
                        cross_check=True, tol=1e-4, reject=1e-3) -> BranchCoefficients:
    """a_mu and b_mu for each column of ``states``.

    a comes from the exact in-step time integral, b from the propagated
    tangent.  With ``cross_check`` both are compared with a central finite
    difference of the whole propagator (ramp shifted by +-delta); the scale
    for a is max(|a|, sqrt(b)) since |a| <= sqrt(b).
    """
    ev = evolve(H0, H2, schedule, states, derivatives=True)
    a = ev.a_integral
    b = np.real(np.sum(np.abs(ev.tangent) ** 2, axis=0))
    a_tan = np.einsum("im,im->m", ev.states.conj(), ev.tangent)
    meta = {"unitarity_error": ev.unitarity_error,
            "a_tangent_dev": float(np.max(np.abs(a - a_tan) / np.maximum(np.sqrt(b), 1e-300)))}
    if cross_check:
        h2n = np.abs(np.linalg.eigvalsh(H2)).max()
        delta = fd_delta(schedule, h2n)
        ep = evolve(H0, H2, schedule.shifted(delta), states)
        em = evolve(H0, H2, schedule.shifted(-delta), states)
        dpsi = (ep.states - em.states) / (2 * delta)
        a_fd = np.einsum("im,im->m", ev.states.conj(), dpsi)
        b_fd = np.real(np.sum(np.abs(dpsi) ** 2, axis=0))
        scale = np.maximum(np.maximum(np.abs(a), np.sqrt(b)), 1e-300)
        dev_a = float(np.max(np.abs(a - a_fd) / scale))
        dev_b = float(np.max(np.abs(b - b_fd) / np.maximum(b, 1e-300)))
        meta.update(delta=delta, a_fd=tuple(complex(x) for x in a_fd), b_fd=tuple(float(x) for x in b_fd),
                    a_dev=dev_a, b_dev=dev_b,
                    unitarity_error=max(ev.unitarity_error, ep.unitarity_error, em.unitarity_error),
                    cross_check_pass=bool(dev_a <= tol and dev_b <= tol))
        if max(dev_a, dev_b) > reject:
            raise AccuracyError(f"finite-difference cross-check failed (a dev {dev_a:.2e}, b dev {dev_b:.2e})")
    return BranchCoefficients(tuple(complex(x) for x in a), tuple(float(x) for x in b), schedule, L, meta)


def protocol_coefficients(protocol: GhzProtocol, L: int, cross_check=False, total_time=None,
                          steps=None) -> BranchCoefficients:
    H0, H2 = protocol.matrices(L)
    sched = protocol.schedule(L, total_time, steps)
    return branch_coefficients(H0, H2, sched, protocol.initial_states(L), L, cross_check=cross_check)


# ---------------------------------------------------------------------------
# GHZ QFI

@dataclass(frozen=True)
class GhzQfi:
    N: int
    value: float
    interference_part: float
    eigenstate_part: float


def ghz_qfi(coeffs: BranchCoefficients, N: int) -> GhzQfi:
    """N^2 |a1 - a2|^2 + 2N [(b1 - |a1|^2) + (b2 - |a2|^2)]."""
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    a1, a2 = coeffs.a[:2]
    b1, b2 = coeffs.b[:2]
    inter = N * N * abs(a1 - a2) ** 2
    eig = 2 * N * ((b1 - abs(a1) ** 2) + (b2 - abs(a2) ** 2))
    return GhzQfi(int(N), float(inter + eig), float(inter), float(eig))


@dataclass(frozen=True)
class PhaseFormData:
    dtheta: float  # d/dlambda of theta = -int (E_2 - E_1) dt
    eigen_terms: tuple  # per branch: sum_n |<n|H2|psi>|^2 / (E_n - E_psi)^2 outside the low window
    low_weight_min: float


def phase_form_data(H0, H2, schedule: RampSchedule, states, low_window=None,
                    min_weight=0.5) -> PhaseFormData:
    """Inputs of the dynamical-phase decomposition.

    Each branch energy is <H> along its evolution.  A branch counts as
    tracked while it keeps at least ``min_weight`` inside the
    ``low_window`` eigenstates of smallest |E| (default: twice the number
    of branches, both edges).
    """
    states = np.asarray(states, complex)
    m = states.shape[1]
    low_window = 2 * m if low_window is None else low_window
    h2n = np.abs(np.linalg.eigvalsh(H2)).max()
    delta = fd_delta(schedule, h2n)
    runs = [evolve(H0, H2, schedule.shifted(s), states, energies=True, low_window=low_window)
            for s in (-delta, 0.0, delta)]
    wmin = float(min(r.low_weight_min.min() for r in runs))
    if wmin < min_weight:
        raise TrackingError(f"branch tracking lost: weight in the low-energy window fell to {wmin:.3f}")
    theta = [-(r.energy_integral[1] - r.energy_integral[0]) for r in runs]
    dtheta = (theta[2] - theta[0]) / (2 * delta)
    lam_T = schedule(schedule.total_time)
    E, V = np.linalg.eigh(H0 + lam_T * H2)
    low = np.argsort(np.abs(E))[:low_window]
    out = np.ones(len(E), bool)
    out[low] = False
    terms = []
    for psi in runs[1].states.T:
        e_psi = float(np.real(np.vdot(psi, (V * E) @ (V.conj().T @ psi))))
        mel = V[:, out].conj().T @ (H2 @ psi)
        terms.append(float(np.sum(np.abs(mel) ** 2 / (E[out] - e_psi) ** 2)))
    return PhaseFormData(float(dtheta), tuple(terms), wmin)


def ghz_qfi_phase_form(data: PhaseFormData, N: int) -> GhzQfi:
    """N^2 (dtheta)^2 + 2N (<dL1|dL1> + <dL2|dL2>)."""
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    inter = N * N * data.dtheta**2
    eig = 2 * N * sum(data.eigen_terms[:2])
    return GhzQfi(int(N), float(inter + eig), float(inter), float(eig))


# ---------------------------------------------------------------------------
# scaling surface

@dataclass(frozen=True)
class GhzSurface:
    rows: tuple  # (L, N, F_Q)
    coefficients: tuple  # BranchCoefficients per L
    n_exponent: float
    l_exponent: float
    log_prefactor: float
    r_squared: float
    per_n: dict  # N -> ScalingFit over L


def _coeff_task(item):
    protocol, L = item
    return protocol_coefficients(protocol, L)


def fit_surface(rows):
    """Joint OLS of ln F on (ln N, ln L).  Returns (n_exp, l_exp, intercept, R^2)."""
    r = np.asarray(rows, float)
    if len(r) < 3 or np.any(r[:, 2] <= 0):
        raise ValueError("surface fit needs at least 3 rows with positive F")
    X = np.column_stack([np.ones(len(r)), np.log(r[:, 1]), np.log(r[:, 0])])
    y = np.log(r[:, 2])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1 - np.sum(res**2) / ss if ss > 0 else 1.0
    return float(coef[1]), float(coef[2]), float(coef[0]), float(r2)


def ghz_scaling_surface(protocol: GhzProtocol, sizes: Sequence[int], Ns: Sequence[int],
                        workers=1) -> GhzSurface:
    sizes = sorted(int(L) for L in sizes)
    Ns = sorted(int(n) for n in Ns)
    coeffs = pmap(_coeff_task, [(protocol, L) for L in sizes], workers)
    rows = tuple((L, N, ghz_qfi(c, N).value) for L, c in zip(sizes, coeffs) for N in Ns)
    n_exp, l_exp, icpt, r2 = fit_surface(rows)
    per_n = {}
    if len(sizes) >= 3:
        for N in Ns:
            per_n[N] = fit_power_law(sizes, [f for L, n, f in rows if n == N])
    return GhzSurface(rows, tuple(coeffs), n_exp, l_exp, icpt, r2, per_n)


def protocol_task(protocol):
    """Picklable per-size worker factory."""
    return partial(protocol_coefficients, protocol)

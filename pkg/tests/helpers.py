"""Shared oracles and generators for the test suite."""
import numpy as np

from topocrit import metrology as mt
from topocrit import models, spectra


def random_gapped_instance(rng, max_L=64, max_R=4, min_gap=0.05):
    """(spec, r, l0) for a gapped OPEN eSSH chain with a non-degenerate probe l0."""
    while True:
        R = int(rng.integers(1, max_R + 1))
        lam = tuple(rng.uniform(-2, 2, R + 1))
        if abs(lam[-1]) < 0.1 or spectra.locate_band_touching(lam).E_min < min_gap:
            continue
        L = int(rng.integers(R + 2, max_L + 1))
        spec = models.essh(lam, L)
        E = np.linalg.eigvalsh(models.build(spec))
        sep = np.abs(E[:, None] - E[None, :])
        np.fill_diagonal(sep, np.inf)
        ok = np.flatnonzero(sep.min(axis=1) > 1e-3 * np.abs(E).max())
        if len(ok) == 0:
            continue
        return spec, int(rng.integers(0, R + 1)), int(rng.choice(ok))


def three_routes(spec, r, l0, delta=1e-4):
    fam = models.ramp_family(spec, r)
    lam = models.get_coupling(spec, r)
    s = spectra.eigh(fam(lam))
    p = mt.qfi_perturbative(s, models.driving_term(spec, r), l0)
    f = mt.qfi_fidelity(fam, lam, l0, delta)
    d = mt.qfi_state_derivative(mt.eigenstate_triplet(fam, lam, l0, delta), delta)
    return p, f, d


def two_level(lam):
    """sigma_z + lambda sigma_x."""
    return np.array([[1.0, lam], [lam, -1.0]])


def rel(a, b):
    return abs(a - b) / abs(b)


def ghz_state(psi1, psi2, N):
    """(psi1^{(x)N} + psi2^{(x)N}) / sqrt(2) for orthonormal single-particle states."""
    a, b = psi1, psi2
    for _ in range(N - 1):
        a, b = np.kron(a, psi1), np.kron(b, psi2)
    return (a + b) / np.sqrt(2)


def ghz_brute_force(H0, H2, schedule, states, N, delta):
    """QFI of the explicitly materialised N-particle GHZ state (state-derivative route)."""
    from topocrit.adiabatic import evolve
    out = []
    for s in (-delta, 0.0, delta):
        ev = evolve(H0, H2, schedule.shifted(s), states)
        v = ghz_state(ev.states[:, 0], ev.states[:, 1], N)
        out.append(v / np.linalg.norm(v))
    return mt.qfi_state_derivative(out, delta).value

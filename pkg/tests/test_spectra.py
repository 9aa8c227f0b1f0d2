import numpy as np
import pytest

from topocrit import models, spectra
from topocrit.errors import NotCriticalError, NotHermitianError, SizeError
from topocrit.metrology import spec_family


def test_eigh_diagonal():
    s = spectra.eigh(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(s.energies, [1, 2, 3])
    assert np.allclose(np.abs(s.states), np.eye(3)[:, [1, 2, 0]])


def test_eigh_sigma_x():
    s = spectra.eigh(np.array([[0, 1], [1, 0]], float))
    assert np.allclose(s.energies, [-1, 1])


def test_eigh_small_chain():
    g = (1 + np.sqrt(5)) / 2
    s = spectra.eigh(models.build(models.essh((1, -1), 2)))
    assert np.allclose(s.energies, [-g, -1 / g, 1 / g, g])


def test_eigh_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        spectra.eigh(np.array([[0, 1], [0, 0]], float))
    with pytest.raises(NotHermitianError):
        spectra.eigh(np.ones((2, 3)))


def test_spectrum_invariants():
    H = models.build(models.essh((0.3, -1.2, 0.8), 40))
    s = spectra.eigh(H)
    assert np.abs(s.states.T @ s.states - np.eye(len(H))).max() < 1e-10
    assert s.residual(H) < 1e-8 * np.abs(s.energies).max()


def test_eigh_deterministic():
    H = models.build(models.essh((1, 2, 1), 50))
    a, b = spectra.eigh(H), spectra.eigh(H.copy())
    assert np.array_equal(a.energies, b.energies) and np.array_equal(a.states, b.states)


# -- bands ------------------------------------------------------------------

def test_band_constant():
    k, E = spectra.band_energies_1d((1, 0), 64)
    assert len(k) == 64 and k[0] == -np.pi and k.max() < np.pi
    assert np.allclose(E, 1)


@pytest.mark.parametrize("couplings,kmin", [((1, 2, 1), np.pi), ((1, -4, 6, -4, 1), 0.0)])
def test_band_minimum(couplings, kmin):
    k, E = spectra.band_energies_1d(couplings, 1024)
    i = np.argmin(E)
    assert E[i] < 1e-14
    assert np.isclose(abs(np.exp(1j * k[i]) - np.exp(1j * kmin)), 0)


def test_band_grid_too_small():
    with pytest.raises(ValueError):
        spectra.band_energies_1d((1, -4, 6, -4, 1), 9)


@pytest.mark.parametrize("couplings,k_c", [((1, -1), 0.0), ((1, 2, 1), np.pi)])
def test_locate_touching(couplings, k_c):
    tp = spectra.locate_band_touching(couplings)
    assert tp.E_min < 1e-12
    assert abs(tp.k_c - k_c) <= 1e-8


def test_locate_linear_touching_of_quartic_family():
    tp = spectra.locate_band_touching((1, -4, 0, -4, 1))
    assert tp.E_min < 1e-12
    # the touching is off the symmetric points, so check h itself
    assert abs(models.bloch_h((1, -4, 0, -4, 1), tp.k_c)) < 1e-12


def test_locate_gapped():
    tp = spectra.locate_band_touching((1, -2))
    assert np.isclose(tp.E_min, 1.0)


@pytest.mark.parametrize("couplings,p", [
    ((1, -1), 1), ((1, 2, 1), 2), ((1, -3, 3, -1), 3), ((1, -4, 6, -4, 1), 4),
    ((1, -4, -10, -4, 1), 2), ((1, -4, 0, -4, 1), 1),
])
def test_touching_order(couplings, p):
    tp = spectra.locate_band_touching(couplings)
    t = spectra.touching_order(couplings, tp.k_c)
    assert t.order_p == p
    assert abs(t.raw_exponent - p) < 0.1
    assert t.derivative_p == p
    assert not t.mixed_order
    assert t.fit_quality > 0.999


def test_touching_order_rejects_gapped():
    with pytest.raises(NotCriticalError):
        spectra.touching_order((1, -2), 0.0)


# -- gaps -------------------------------------------------------------------

def test_in_gap_count():
    assert spectra.in_gap_count([-1, -1e-8, 1e-8, 1]) == 2
    assert spectra.in_gap_count([-1, -0.9, 0.9, 1]) == 0


@pytest.mark.parametrize("couplings,p", [((1, -1), 1), ((1, -4, 6, -4, 1), 4)])
def test_gap_scaling(couplings, p):
    fit = spectra.gap_scaling(spec_family("ESSH_1D", couplings), [64, 96, 128, 192, 256, 384, 512])
    assert abs(fit.exponent + p) <= 0.05 * p


def _sigma_z_family(L):
    return np.kron(np.diag([1.0, -1.0]), np.eye(L))


def test_gap_scaling_constant_family():
    fit = spectra.gap_scaling(_sigma_z_family, [4, 8, 16, 32])
    assert abs(fit.exponent) < 1e-12


def test_gap_scaling_needs_four_sizes():
    with pytest.raises(ValueError):
        spectra.gap_scaling(_sigma_z_family, [4, 8, 16])


def test_direct_gap_scales_with_order():
    # direct gap at the first grid momentum next to k_c behaves as (2 pi / L)^p
    lam = (1, 2, 1)
    g = [spectra.direct_gap(lam, np.pi + 2 * np.pi / L) for L in (100, 200, 400)]
    slopes = np.diff(np.log(g)) / np.diff(np.log([100, 200, 400]))
    assert np.allclose(slopes, -2, atol=0.01)

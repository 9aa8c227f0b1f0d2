import numpy as np
import pytest

from topocrit import invariants, models, spectra
from topocrit.edgetheory import edge_roots
from topocrit.errors import CriticalPointError
from topocrit.models import CIParams


@pytest.mark.parametrize("couplings,w", [
    ((1, 0), 0), ((0, 1), 1), ((1, 2, 2), 2), ((1, 2, 0.5), 1), ((1, -2), 1), ((2, 1), 0),
])
def test_winding(couplings, w):
    assert invariants.winding_number(couplings) == w


@pytest.mark.parametrize("couplings", [(1, -1), (1, 2, 1), (1, -4, 6, -4, 1)])
def test_winding_rejects_critical(couplings):
    with pytest.raises(CriticalPointError):
        invariants.winding_number(couplings)


def test_winding_grid_minimum():
    with pytest.raises(ValueError):
        invariants.winding_number((1, 2, 2), n_k=100)


def test_winding_near_critical_is_resolved():
    # |h| min of 1e-7 still gives an integer once the grid adapts
    assert invariants.winding_number((1, -1 - 1e-7)) == 1
    assert invariants.winding_number((1, -1 + 1e-7)) == 0


def _random_gapped(rng, n, min_gap=1e-3):
    out = []
    while len(out) < n:
        R = int(rng.integers(1, 5))
        lam = rng.uniform(-3, 3, R + 1)
        if abs(lam[-1]) < 0.05:
            continue
        if spectra.locate_band_touching(lam).E_min < min_gap:
            continue
        out.append(tuple(lam))
    return out


RANDOM_GAPPED = _random_gapped(np.random.default_rng(20240611), 200)


def test_root_winding_duality():
    mismatches = [lam for lam in RANDOM_GAPPED
                  if invariants.winding_number(lam) != edge_roots(lam).inside_count]
    assert len(RANDOM_GAPPED) == 200
    assert mismatches == []


@pytest.mark.parametrize("lam", RANDOM_GAPPED[:20])
def test_winding_grid_refinement(lam):
    R = len(lam) - 1
    n = max(1024, 64 * (R + 1))
    assert invariants.winding_number(lam, n) == invariants.winding_number(lam, 2 * n)


def _winding_or_none(lam):
    try:
        return invariants.winding_number(lam)
    except CriticalPointError:
        return None


def _closure_between(lam, a, b, wa, tol=1e-12):
    """Bisect on the winding; return a point where the gap is closed, or None."""
    while b - a > tol:
        m = 0.5 * (a + b)
        wm = _winding_or_none(lam(m))
        if wm is None:
            return m
        a, b = (m, b) if wm == wa else (a, m)
    m = 0.5 * (a + b)
    return m if spectra.locate_band_touching(lam(m)).E_min < 1e-9 else None


@pytest.mark.parametrize("fixed", [(1, -4, -4, 1), (1, -4, -4, 0.5), (1, -4, -4, -2)])
def test_winding_changes_only_at_gap_closures(fixed):
    # sweep lambda2 with (l0, l1, l3, l4) fixed
    def lam(x):
        return (fixed[0], fixed[1], x, fixed[2], fixed[3])
    xs = np.linspace(-12.03, 8.03, 201)
    ws = [_winding_or_none(lam(x)) for x in xs]
    for x, w in zip(xs, ws):
        assert (w is None) == (spectra.locate_band_touching(lam(x)).E_min <= 1e-10)
    gapped = [(x, w) for x, w in zip(xs, ws) if w is not None]
    for (xa, wa), (xb, wb) in zip(gapped[:-1], gapped[1:]):
        if wa == wb:
            continue
        between = [x for x in xs if xa < x < xb]
        if between:
            continue  # the rejected samples in between are the closures
        assert _closure_between(lam, xa, xb, wa) is not None


def test_palindromic_sweep_is_gapless_between_touchings():
    # with l4 = l0 and l3 = l1, h(k) e^{-2ik} is real, so it has zeros for all -10 <= l2 <= 6
    for x in np.linspace(-10, 6, 33):
        assert spectra.locate_band_touching((1, -4, x, -4, 1)).E_min < 1e-12
    assert invariants.winding_number((1, -4, -10.5, -4, 1)) == 2
    assert invariants.winding_number((1, -4, 6.5, -4, 1)) == 2


# -- Chern -------------------------------------------------------------------

@pytest.mark.parametrize("n_k", [32, 64, 128])
def test_chern_regression(n_k):
    # stable integer over grid refinement, frozen from the plaquette computation
    assert invariants.chern_number(CIParams(1, -1), n_k) == 2


@pytest.mark.parametrize("params,c", [((10, -0.5), 0), ((-1, 1), -2), ((1, -1), 2), ((-10, 0.5), 0)])
def test_chern_values(params, c):
    assert invariants.chern_number(CIParams(*params)) == c
    assert invariants.chern_number(CIParams(*params), 128) == c


@pytest.mark.parametrize("params", [(1, -0.5), (0, 0.7), (-2, 1)])
def test_chern_rejects_boundary(params):
    with pytest.raises(CriticalPointError):
        invariants.chern_number(CIParams(*params))


# -- multipole chiral number ---------------------------------------------------

def test_mcn_atomic_limit():
    assert invariants.multipole_chiral_number(models.hoti((1, 0, 0), 8)) == 0


@pytest.mark.parametrize("L", [8, 10, 12])
def test_mcn_dimerised_limit(L):
    n, raw = invariants.multipole_chiral_number(models.hoti((1, -2.5, 0), L), return_raw=True)
    assert n == 1 and abs(raw - 1) < 1e-8


@pytest.mark.parametrize("lam,n", [((1, -3, -1.5), 1), ((0.2, 1, 0), 1), ((0.1, 0, 1), 4)])
def test_mcn_size_independent(lam, n):
    assert [invariants.multipole_chiral_number(models.hoti(lam, L)) for L in (8, 10, 12)] == [n] * 3


def test_mcn_rejects_multicritical_point():
    with pytest.raises(CriticalPointError):
        invariants.multipole_chiral_number(models.hoti((1, -2, 1), 12))


def test_mcn_needs_open_hoti():
    with pytest.raises(ValueError):
        invariants.multipole_chiral_number(models.hoti((1, -2.5, 0), 8, models.Boundary.PERIODIC))
    with pytest.raises(ValueError):
        invariants.multipole_chiral_number(models.ci(1, -1, 4))


# -- phase diagrams ------------------------------------------------------------

def test_single_cell_diagram():
    pd = invariants.phase_diagram(invariants.EsshWinding((1, 0), 0, 1), ("l0", [1.0]), ("l1", [0.0]))
    assert pd.cells == (0,) and pd.rejected == ()


def test_quartic_diagram_has_windings_one_to_four():
    ev = invariants.EsshWinding((1, -4, 0, -4, 1), 2, 4)
    pd = invariants.phase_diagram(ev, ("l2", np.linspace(-12, 8, 41)), ("l4", np.linspace(-6, 6, 25)))
    assert len(pd.cells) == 41 * 25
    assert {c for c in pd.cells if c is not None} == {1, 2, 3, 4}
    g = pd.grid()
    assert g.shape == (41, 25)


def test_ci_diagram_sentinels_on_boundaries():
    m0 = np.linspace(-2, 2, 9)
    l0 = np.linspace(-1, 1, 9)
    pd = invariants.phase_diagram(invariants.CIChern(32), ("m0", m0), ("lambda0", l0))
    for i, m in enumerate(m0):
        for j, l in enumerate(l0):
            cell = pd.cells[i * len(l0) + j]
            on_boundary = np.isclose(m, -2 * l) or np.isclose(m, 0)
            assert (cell is None) == on_boundary
    assert len(pd.rejected) == sum(c is None for c in pd.cells)


def test_diagram_parallel_matches_serial():
    ev = invariants.EsshWinding((1, 0, 0), 1, 2)
    ax = ("l1", np.linspace(-2, 2, 5)), ("l2", np.linspace(-2, 2, 4))
    assert invariants.phase_diagram(ev, *ax, workers=1) == invariants.phase_diagram(ev, *ax, workers=2)


def test_hoti_bulk_gap():
    assert np.isclose(invariants.hoti_bulk_gap((1, -2.5, 0)), np.sqrt(2) * 1.5)


def test_ci_gap_closes():
    assert invariants.ci_gap_closes(CIParams(1, -0.5))
    assert invariants.ci_gap_closes(CIParams(0, 3))
    assert not invariants.ci_gap_closes(CIParams(1, -1))

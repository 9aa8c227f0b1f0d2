"""Hamiltonian builders for the extended SSH chain, the 2D chiral HOTI and the
quadratic-touching Chern insulator.

Conventions
-----------
eSSH sites are ordered (a_1, b_1, a_2, b_2, ..., a_L, b_L) and
``H[a_{j+r}, b_j] = lambda_r``.

2D models use cell index ``x * L + y`` (x-major) with the orbitals of each
cell contiguous.  HOTI orbitals 0, 1 form sublattice A and 2, 3 sublattice B;
the chiral operator is tau_3 (x) sigma_0.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Union

import numpy as np
import scipy.sparse as sp

from .errors import SizeError


class Family(str, Enum):
    ESSH_1D = "ESSH_1D"
    HOTI_2D = "HOTI_2D"
    CI_2D = "CI_2D"


class Boundary(str, Enum):
    OPEN = "OPEN"
    PERIODIC = "PERIODIC"


@dataclass(frozen=True)
class CIParams:
    m0: float
    lambda0: float

    def __post_init__(self):
        if not (np.isfinite(self.m0) and np.isfinite(self.lambda0)):
            raise ValueError("CI parameters must be finite")

    def as_tuple(self):
        return (float(self.m0), float(self.lambda0))


def as_couplings(couplings) -> tuple:
    """Validate and normalise a real coupling vector (lambda_0, ..., lambda_R)."""
    lam = tuple(float(c) for c in np.atleast_1d(np.asarray(couplings, dtype=float)))
    if len(lam) == 0:
        raise ValueError("empty coupling vector")
    if not all(np.isfinite(lam)):
        raise ValueError("couplings must be finite")
    return lam


@dataclass(frozen=True)
class LatticeSpec:
    family: Family
    couplings: Union[tuple, CIParams]
    length: int
    boundary: Boundary = Boundary.OPEN

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if int(self.length) != self.length or self.length < 1:
            raise SizeError(f"length must be a positive integer, got {self.length}")
        object.__setattr__(self, "length", int(self.length))
        if fam is Family.CI_2D:
            c = self.couplings
            if not isinstance(c, CIParams):
                c = CIParams(*c)
            object.__setattr__(self, "couplings", c)
            return
        lam = as_couplings(self.couplings)
        object.__setattr__(self, "couplings", lam)
        if fam is Family.HOTI_2D and len(lam) != 3:
            raise ValueError("HOTI takes exactly (lambda0, lambda1, lambda2)")
        R = len(lam) - 1
        if fam is Family.ESSH_1D and self.boundary is Boundary.OPEN and self.length <= R:
            raise SizeError(f"open chain needs L > R (L={self.length}, R={R})")

    @property
    def range(self) -> int:
        return len(self.couplings) - 1

    @property
    def dim(self) -> int:
        L = self.length
        return {Family.ESSH_1D: 2 * L, Family.HOTI_2D: 4 * L * L, Family.CI_2D: 2 * L * L}[self.family]

    def with_couplings(self, couplings):
        return replace(self, couplings=couplings)

    def with_length(self, L):
        return replace(self, length=L)


def essh(couplings, L, boundary=Boundary.OPEN) -> LatticeSpec:
    return LatticeSpec(Family.ESSH_1D, tuple(couplings), L, Boundary(boundary))


def hoti(couplings, L, boundary=Boundary.OPEN) -> LatticeSpec:
    return LatticeSpec(Family.HOTI_2D, tuple(couplings), L, Boundary(boundary))


def ci(m0, lambda0, L, boundary=Boundary.OPEN) -> LatticeSpec:
    return LatticeSpec(Family.CI_2D, CIParams(m0, lambda0), L, Boundary(boundary))


# ---------------------------------------------------------------------------
# eSSH

def bloch_h(couplings, k):
    """h(k) = sum_r lambda_r e^{ikr}.  Vectorised over k."""
    lam = np.asarray(as_couplings(couplings))
    return np.polyval(lam[::-1], np.exp(1j * np.asarray(k, dtype=float)))


def build_essh_real(spec: LatticeSpec) -> np.ndarray:
    if spec.family is not Family.ESSH_1D:
        raise ValueError(f"expected ESSH_1D, got {spec.family.value}")
    L = spec.length
    H = np.zeros((2 * L, 2 * L))
    j = np.arange(L)
    for r, t in enumerate(spec.couplings):
        if t == 0.0:
            continue
        tgt = j + r
        if spec.boundary is Boundary.PERIODIC:
            src, tgt = j, tgt % L
        else:
            src, tgt = j[tgt < L], tgt[tgt < L]
        np.add.at(H, (2 * tgt, 2 * src + 1), t)
    return H + H.T


# ---------------------------------------------------------------------------
# 2D Bloch forms

_s0 = np.eye(2)
_s1 = np.array([[0, 1], [1, 0]], dtype=complex)
_s2 = np.array([[0, -1j], [1j, 0]])
_s3 = np.diag([1.0, -1.0]).astype(complex)

GAMMA = (
    -np.kron(_s2, _s1),
    -np.kron(_s2, _s2),
    -np.kron(_s2, _s3),
    np.kron(_s1, _s0),
)


def hoti_bloch(couplings, kx, ky):
    """4x4 HOTI Bloch matrix; broadcasts over kx, ky (trailing axes 4x4)."""
    hx = bloch_h(couplings, kx)
    hy = bloch_h(couplings, ky)
    hx, hy = np.broadcast_arrays(hx, hy)
    d = (hy.imag, hy.real, hx.imag, hx.real)
    return sum(di[..., None, None] * g for di, g in zip(d, GAMMA))


def ci_g(kx, ky):
    return (np.exp(-1j * np.asarray(kx)) - 1) + 1j * (np.exp(-1j * np.asarray(ky)) - 1)


def ci_d(params: CIParams, kx, ky):
    """(d_x, d_y, d_z) of the Chern insulator."""
    kx, ky = np.broadcast_arrays(np.asarray(kx, float), np.asarray(ky, float))
    g2 = ci_g(kx, ky) ** 2
    dz = params.m0 + params.lambda0 * (np.cos(kx) + np.cos(ky))
    return g2.real, g2.imag, dz


def ci_bloch(params: CIParams, kx, ky):
    dx, dy, dz = ci_d(params, kx, ky)
    H = np.empty(dz.shape + (2, 2), dtype=complex)
    H[..., 0, 0] = dz
    H[..., 1, 1] = -dz
    H[..., 0, 1] = dx - 1j * dy
    H[..., 1, 0] = dx + 1j * dy
    return H


# ---------------------------------------------------------------------------
# 2D real space

_HOP_GRID = 5  # resolves hoppings of range <= 2 in each direction


def hopping_table(bloch_fn, tol=1e-13):
    """Read off t(R) from H(k) = sum_R t(R) e^{ik.R} by a small discrete Fourier transform."""
    M = _HOP_GRID
    ks = 2 * np.pi * np.arange(M) / M
    Hk = bloch_fn(ks[:, None], ks[None, :])
    out = {}
    half = M // 2
    for dx in range(-half, half + 1):
        for dy in range(-half, half + 1):
            ph = np.exp(-1j * (dx * ks[:, None] + dy * ks[None, :]))
            t = np.einsum("ab,abij->ij", ph, Hk) / M**2
            t.real[np.abs(t.real) < tol] = 0.0
            t.imag[np.abs(t.imag) < tol] = 0.0
            if np.any(t != 0):
                out[(dx, dy)] = t
    return out


def _shift(L, d, periodic):
    # S[x', x] = 1 for x' = x - d
    x = np.arange(L)
    xp = x - d
    if periodic:
        xp %= L
        keep = np.ones(L, bool)
    else:
        keep = (xp >= 0) & (xp < L)
    return sp.csr_matrix((np.ones(keep.sum()), (xp[keep], x[keep])), shape=(L, L))


def real_space_2d(bloch_fn, L, periodic=False) -> np.ndarray:
    hop = hopping_table(bloch_fn)
    n = bloch_fn(np.zeros(1), np.zeros(1)).shape[-1]
    H = sp.csr_matrix((L * L * n, L * L * n), dtype=complex)
    for (dx, dy), t in hop.items():
        H = H + sp.kron(sp.kron(_shift(L, dx, periodic), _shift(L, dy, periodic)), sp.csr_matrix(t))
    H = H.toarray()
    # real hoppings give a real matrix, which halves the eigensolver cost
    if not np.any(H.imag):
        H = np.ascontiguousarray(H.real)
    return H


def build_hoti(spec: LatticeSpec, k=None) -> np.ndarray:
    """Bloch matrix at ``k=(kx, ky)`` or, with ``k=None``, the real-space matrix."""
    if spec.family is not Family.HOTI_2D:
        raise ValueError(f"expected HOTI_2D, got {spec.family.value}")
    if k is not None:
        return hoti_bloch(spec.couplings, *k)
    return real_space_2d(lambda a, b: hoti_bloch(spec.couplings, a, b), spec.length,
                         spec.boundary is Boundary.PERIODIC)


def build_ci(spec: LatticeSpec, k=None) -> np.ndarray:
    if spec.family is not Family.CI_2D:
        raise ValueError(f"expected CI_2D, got {spec.family.value}")
    if k is not None:
        return ci_bloch(spec.couplings, *k)
    return real_space_2d(lambda a, b: ci_bloch(spec.couplings, a, b), spec.length,
                         spec.boundary is Boundary.PERIODIC)


def build(spec: LatticeSpec) -> np.ndarray:
    """Real-space Hamiltonian for any family."""
    return {
        Family.ESSH_1D: build_essh_real,
        Family.HOTI_2D: build_hoti,
        Family.CI_2D: build_ci,
    }[spec.family](spec)


# ---------------------------------------------------------------------------
# driving terms and bookkeeping

CI_PARAMETERS = ("m0", "lambda0")


@dataclass(frozen=True)
class DrivingTerm:
    r: Union[int, str]
    matrix: np.ndarray


def driving_term(spec: LatticeSpec, r: Union[int, str]) -> DrivingTerm:
    """dH/d(parameter r).  Integer index for eSSH/HOTI couplings, 'm0'/'lambda0' for CI."""
    if spec.family is Family.CI_2D:
        if r not in CI_PARAMETERS:
            raise ValueError(f"CI driving parameter must be one of {CI_PARAMETERS}")
        unit = CIParams(1.0, 0.0) if r == "m0" else CIParams(0.0, 1.0)
        zero = CIParams(0.0, 0.0)
        M = build(spec.with_couplings(unit)) - build(spec.with_couplings(zero))
        return DrivingTerm(r, M)
    n = len(spec.couplings)
    if not (0 <= int(r) < n):
        raise ValueError(f"driving index {r} outside 0..{n - 1}")
    e = [0.0] * n
    e[int(r)] = 1.0
    return DrivingTerm(int(r), build(spec.with_couplings(tuple(e))))


def sublattice_signs(spec: LatticeSpec) -> np.ndarray:
    """Diagonal of the chiral operator: +1 on sublattice A, -1 on B."""
    L = spec.length
    if spec.family is Family.ESSH_1D:
        return np.tile([1.0, -1.0], L)
    if spec.family is Family.HOTI_2D:
        return np.tile([1.0, 1.0, -1.0, -1.0], L * L)
    raise ValueError("the Chern insulator has no chiral sublattice structure")


def cell_positions(spec: LatticeSpec) -> np.ndarray:
    """Unit-cell coordinate of every basis state, 1-based. Shape (dim,) in 1D, (dim, 2) in 2D."""
    L = spec.length
    if spec.family is Family.ESSH_1D:
        return np.repeat(np.arange(1, L + 1), 2).astype(float)
    n = 4 if spec.family is Family.HOTI_2D else 2
    x = np.repeat(np.arange(1, L + 1), L)
    y = np.tile(np.arange(1, L + 1), L)
    return np.repeat(np.stack([x, y], axis=1), n, axis=0).astype(float)


def ramp_family(spec: LatticeSpec, index):
    """Return ``f(value) -> H`` varying one coupling of ``spec`` linearly."""
    H0 = build(set_coupling(spec, index, 0.0))
    Hr = driving_term(spec, index).matrix

    def f(value):
        return H0 + value * Hr
    return f


def set_coupling(spec, index, value):
    if spec.family is Family.CI_2D:
        m0, l0 = spec.couplings.as_tuple()
        return spec.with_couplings(CIParams(value, l0) if index == "m0" else CIParams(m0, value))
    lam = list(spec.couplings)
    lam[int(index)] = value
    return spec.with_couplings(tuple(lam))


def get_coupling(spec, index) -> float:
    if spec.family is Family.CI_2D:
        return spec.couplings.m0 if index == "m0" else spec.couplings.lambda0
    return spec.couplings[int(index)]

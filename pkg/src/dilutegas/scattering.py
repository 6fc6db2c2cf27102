"""Per-energy scattering blocks: the T-matrix inverses, the four R
operators, the blockwise unitary S, and the map Theta(X) = S^+ X S - X.

The continuum S-matrix contains delta-normalized spectral vectors; here it
is realized fiberwise per bin on the orthonormalized span of the two
amplitude vectors, where unitarity is an exact finite-matrix property
independent of the bin width. Everything on the orthogonal complement of
that span is identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularTMatrix
from .model import EnergyGrid, FormFactorSet, gamma_table

__all__ = ["ScatteringBlock", "ScatteringData", "t_inverses", "r_ops",
           "build_smatrix", "theta_map"]

COND_LIMIT = 1e12
RANK_TOL = 1e-12


def t_inverses(energy: float, gamma_j: np.ndarray, D: np.ndarray):
    """Invert the two bracket operators

        bracket0 = 1 + g01 D^+ - g10 D + (g00 g11 - g10 g01) D D^+
        bracket1 = 1 + g01 D^+ - g10 D + (g00 g11 - g10 g01) D^+ D

    returning (T0, T1) = (bracket0^-1, bracket1^-1). A bracket with
    condition number above 1e12 marks a scattering resonance at this
    energy and raises SingularTMatrix rather than regularizing.
    """
    g00, g01 = gamma_j[0, 0], gamma_j[0, 1]
    g10, g11 = gamma_j[1, 0], gamma_j[1, 1]
    Dd = D.conj().T
    I = np.eye(D.shape[0], dtype=complex)
    det = g00 * g11 - g10 * g01
    common = g01 * Dd - g10 * D
    bracket0 = I + common + det * (D @ Dd)
    bracket1 = I + common + det * (Dd @ D)
    out = []
    for bracket in (bracket0, bracket1):
        cond = np.linalg.cond(bracket)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularTMatrix(energy, cond)
        out.append(np.linalg.inv(bracket))
    return out[0], out[1]


def r_ops(energy: float, gamma_j: np.ndarray, D: np.ndarray,
          T0: np.ndarray, T1: np.ndarray) -> np.ndarray:
    """The four amplitude operators, literally:

        R00 = g11 D T1 D^+        R01 = -D T1 (1 + g01 D^+)
        R11 = g00 D^+ T0 D        R10 = D^+ T0 (1 - g10 D)
    """
    g00, g01 = gamma_j[0, 0], gamma_j[0, 1]
    g10, g11 = gamma_j[1, 0], gamma_j[1, 1]
    Dd = D.conj().T
    I = np.eye(D.shape[0], dtype=complex)
    R = np.empty((2, 2), dtype=object)
    R[0, 0] = g11 * (D @ T1 @ Dd)
    R[0, 1] = -(D @ T1 @ (I + g01 * Dd))
    R[1, 1] = g00 * (Dd @ T0 @ D)
    R[1, 0] = Dd @ T0 @ (I - g10 * D)
    return R


def _orthonormal_factor(G: np.ndarray):
    """C with C^+ C = G, shape (rank, 2); Cholesky when G has full rank,
    eigenbasis truncation onto range(G) otherwise."""
    tr = max(float(np.trace(G).real), 0.0)
    w = np.linalg.eigvalsh(G)
    if tr > 0 and w.min() > RANK_TOL * tr:
        return np.linalg.cholesky(G).conj().T, False
    w, U = np.linalg.eigh(G)
    keep = w > RANK_TOL * max(tr, np.finfo(float).tiny)
    C = np.sqrt(w[keep])[:, None] * U[:, keep].conj().T
    return C, True


@dataclass(frozen=True)
class ScatteringBlock:
    """One energy bin's scattering data, in the orthonormalized basis of
    span{v0(E_j), v1(E_j)} (change of basis recorded as `basis`, with
    basis^+ basis = G)."""

    j: int
    energy: float
    width: float
    T0: np.ndarray
    T1: np.ndarray
    R: np.ndarray
    S_block: np.ndarray
    basis: np.ndarray
    gram: np.ndarray
    amplitudes: np.ndarray
    rank: int
    degenerate: bool
    cond_T0: float
    cond_T1: float
    unit_defect: float


@dataclass(frozen=True)
class ScatteringData:
    blocks: tuple
    dim_system: int
    grid: EnergyGrid

    def __iter__(self):
        return iter(self.blocks)

    @property
    def degenerate_bins(self):
        return tuple(b.j for b in self.blocks if b.degenerate)

    @property
    def max_unit_defect(self) -> float:
        return max(b.unit_defect for b in self.blocks)


def build_smatrix(grid: EnergyGrid, ff: FormFactorSet, coupling: np.ndarray) -> ScatteringData:
    """Assemble per-bin blocks S_j = 1 - 2pi sum_{m,n} R_{m,n} (x) |v_m><v_n|
    on H_S (x) span{v0, v1}, orthonormalized through the Gram matrix.

    Rank-deficient Grams (parallel amplitude vectors) restrict to range(G);
    the affected bins are flagged `degenerate` in the block metadata, not
    treated as errors.
    """
    D = np.asarray(coupling, dtype=complex)
    dS = D.shape[0]
    gt = gamma_table(grid, ff)
    blocks = []
    for j in range(grid.n_bins):
        E = float(grid.centers[j])
        gamma_j = gt.values[j]
        g00, g01 = gamma_j[0, 0], gamma_j[0, 1]
        g10, g11 = gamma_j[1, 0], gamma_j[1, 1]
        det = g00 * g11 - g10 * g01
        Dd = D.conj().T
        I = np.eye(dS, dtype=complex)
        common = g01 * Dd - g10 * D
        cond0 = float(np.linalg.cond(I + common + det * (D @ Dd)))
        cond1 = float(np.linalg.cond(I + common + det * (Dd @ D)))
        T0, T1 = t_inverses(E, gamma_j, D)
        R = r_ops(E, gamma_j, D, T0, T1)
        G = ff.gram(j)
        C, degenerate = _orthonormal_factor(G)
        r = C.shape[0]
        S = np.eye(dS * r, dtype=complex)
        for m in range(2):
            for n in range(2):
                S -= 2 * np.pi * np.kron(R[m, n], np.outer(C[:, m], C[:, n].conj()))
        defect = float(np.linalg.norm(S.conj().T @ S - np.eye(dS * r), 2))
        blocks.append(ScatteringBlock(
            j=j, energy=E, width=float(grid.widths[j]), T0=T0, T1=T1, R=R,
            S_block=S, basis=C, gram=G, amplitudes=ff.amplitudes[j].T.copy(),
            rank=r, degenerate=degenerate, cond_T0=cond0, cond_T1=cond1,
            unit_defect=defect))
    return ScatteringData(blocks=tuple(blocks), dim_system=dS, grid=grid)


def theta_components(block: ScatteringBlock, X: np.ndarray) -> np.ndarray:
    """The expanded components

        Theta^{n,m}(X) = 2pi sum_{n',m'} G_{n'm'} R^+_{n',m} X R_{m',n}
                         - R^+_{n,m} X - X R_{m,n}
    """
    R, G = block.R, block.gram
    out = np.empty((2, 2), dtype=object)
    for n in range(2):
        for m in range(2):
            acc = -(R[n, m].conj().T @ X) - (X @ R[m, n])
            for n2 in range(2):
                for m2 in range(2):
                    acc = acc + 2 * np.pi * G[n2, m2] * (R[n2, m].conj().T @ X @ R[m2, n])
            out[n, m] = acc
    return out


def theta_map(data: ScatteringData, X: np.ndarray):
    """Both routes to Theta: the expanded per-bin components and, for each
    bin, the defect between their kron-reconstruction

        2pi sum_{n,m} Theta^{n,m}(X) (x) |c_m><c_n|

    and the directly computed S^+ (X (x) 1) S - X (x) 1. Returns
    (components, defects); the two routes agreeing is the correctness
    certificate for the expansion.
    """
    X = np.asarray(X, dtype=complex)
    dS = data.dim_system
    if X.shape != (dS, dS):
        raise ValueError(f"observable must be {dS}x{dS}, got {X.shape}")
    comps, defects = [], []
    for block in data.blocks:
        th = theta_components(block, X)
        r = block.rank
        C = block.basis
        XI = np.kron(X, np.eye(r))
        direct = block.S_block.conj().T @ XI @ block.S_block - XI
        recon = np.zeros_like(direct)
        for n in range(2):
            for m in range(2):
                recon += 2 * np.pi * np.kron(th[n, m], np.outer(C[:, m], C[:, n].conj()))
        comps.append(th)
        defects.append(float(np.linalg.norm(direct - recon, 2)))
    return comps, np.array(defects)

"""Discretized physical model: system spectrum and coupling, energy grid,
form-factor amplitudes, gas occupation weights, and the causal spectral
functions gamma built from them.

Conventions. The one-particle spectrum is discretized into bins
(E_j, dE_j, d_j): center energy, width, multiplicity. Per-bin amplitude
vectors v_n(E_j) of length d_j carry the spectral density of the two
form factors, so that the density <g_n, P_{E_j} g_m> equals the plain
inner product <v_n(E_j), v_m(E_j)> and every continuum energy integral
becomes sum_j dE_j(...). Inner products are conjugate-linear in the
first slot throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemModel", "EnergyGrid", "FormFactorSet", "GasState", "GammaTable",
    "bohr_decompose", "gibbs_density", "gamma_table",
]


def _readonly(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemModel:
    """System Hamiltonian spectrum plus the coupling operator.

    eigenvalues: one energy per level (distinct levels may share a value;
    degeneracy is encoded by the labels, not by value comparison).
    projector_labels: for each basis index of the d_S-dimensional system
    space, the level it belongs to.
    coupling: complex d_S x d_S matrix D.
    """

    eigenvalues: np.ndarray
    projector_labels: np.ndarray
    coupling: np.ndarray

    def __post_init__(self):
        ev = _readonly(np.asarray(self.eigenvalues, dtype=float))
        labels = _readonly(np.asarray(self.projector_labels, dtype=int))
        D = _readonly(np.asarray(self.coupling, dtype=complex))
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "projector_labels", labels)
        object.__setattr__(self, "coupling", D)
        if ev.ndim != 1 or ev.size == 0:
            raise ValueError("eigenvalues must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(ev)):
            raise ValueError("eigenvalues must be finite")
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("projector_labels must be a non-empty 1-d sequence")
        if labels.min() < 0 or labels.max() >= ev.size:
            raise ValueError("projector_labels must index into eigenvalues")
        used = np.unique(labels)
        if used.size != ev.size:
            raise ValueError("every level must appear in projector_labels")
        d = labels.size
        if D.shape != (d, d):
            raise ValueError(f"coupling must be {d}x{d}, got {D.shape}")

    @property
    def dim(self) -> int:
        return self.projector_labels.size

    def projector(self, level: int) -> np.ndarray:
        """Orthogonal projector onto the eigenspace of the given level."""
        diag = (self.projector_labels == level).astype(float)
        return np.diag(diag).astype(complex)

    def hamiltonian(self) -> np.ndarray:
        return np.diag(self.eigenvalues[self.projector_labels]).astype(complex)


def bohr_decompose(model: SystemModel, tol_omega: float = 1e-9) -> dict[float, np.ndarray]:
    """Split the coupling D into blocks D_w = sum P_k D P_m over level pairs
    with energy difference e_m - e_k = w, grouping frequencies within
    tol_omega (absolute). Returns {w: D_w} with sum(D_w) = D exactly.
    """
    ev = model.eigenvalues
    pairs = []
    for k in range(ev.size):
        for m in range(ev.size):
            pairs.append((ev[m] - ev[k], k, m))
    pairs.sort(key=lambda p: (p[0], p[1], p[2]))
    out: dict[float, np.ndarray] = {}
    cur_key = None
    for omega, k, m in pairs:
        if cur_key is None or abs(omega - cur_key) > tol_omega:
            cur_key = omega
        block = model.projector(k) @ model.coupling @ model.projector(m)
        if cur_key in out:
            out[cur_key] = out[cur_key] + block
        else:
            out[cur_key] = block
    # projector sandwiches only select entries, so empty blocks are exact zeros
    return {w: B for w, B in out.items() if np.any(B != 0)}


def gibbs_density(E: float, beta: float, xi: float) -> float:
    """Equilibrium occupation xi*exp(-beta*E) / (1 - xi*exp(-beta*E))."""
    if not 0.0 <= xi < 1.0:
        raise ValueError(f"fugacity must lie in [0, 1), got {xi}")
    if beta < 0.0:
        raise ValueError(f"inverse temperature must be >= 0, got {beta}")
    x = xi * np.exp(-beta * E)
    if x >= 1.0:
        raise ValueError(f"xi*exp(-beta*E) = {x:g} >= 1: no equilibrium occupation")
    return float(x / (1.0 - x))


@dataclass(frozen=True)
class EnergyGrid:
    """Sorted, non-overlapping energy bins (center, width, multiplicity)."""

    centers: np.ndarray
    widths: np.ndarray
    multiplicities: np.ndarray

    def __post_init__(self):
        c = _readonly(np.asarray(self.centers, dtype=float))
        w = _readonly(np.asarray(self.widths, dtype=float))
        m = _readonly(np.asarray(self.multiplicities, dtype=int))
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "multiplicities", m)
        if not (c.ndim == w.ndim == m.ndim == 1) or not (c.size == w.size == m.size):
            raise ValueError("centers, widths, multiplicities must be 1-d of equal length")
        if c.size == 0:
            raise ValueError("grid needs at least one bin")
        if np.any(w <= 0):
            raise ValueError("bin widths must be positive")
        if np.any(m < 1):
            raise ValueError("multiplicities must be >= 1")
        if np.any(np.diff(c) <= 0):
            raise ValueError("bin centers must be strictly increasing")
        hi = c[:-1] + w[:-1] / 2
        lo = c[1:] - w[1:] / 2
        if np.any(hi - lo > 1e-12 * np.maximum(w[:-1], w[1:])):
            raise ValueError("bins overlap")

    @classmethod
    def uniform(cls, lo: float, hi: float, n_bins: int, multiplicity: int = 1) -> "EnergyGrid":
        edges = np.linspace(lo, hi, n_bins + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        widths = np.diff(edges)
        return cls(centers, widths, np.full(n_bins, multiplicity))

    @property
    def n_bins(self) -> int:
        return self.centers.size


@dataclass(frozen=True)
class FormFactorSet:
    """Per-bin amplitude vectors of the two coupling channels.

    amplitudes[j] is a (2, d_j) complex array; row n is v_n(E_j).
    """

    amplitudes: tuple

    def __post_init__(self):
        amps = tuple(_readonly(np.asarray(a, dtype=complex)) for a in self.amplitudes)
        object.__setattr__(self, "amplitudes", amps)
        for j, a in enumerate(amps):
            if a.ndim != 2 or a.shape[0] != 2:
                raise ValueError(f"amplitudes[{j}] must have shape (2, d_j), got {a.shape}")

    @classmethod
    def from_profiles(cls, grid: EnergyGrid, profile0, profile1) -> "FormFactorSet":
        """Sample two scalar profiles at the bin centers (multiplicity-1 grids)."""
        if np.any(grid.multiplicities != 1):
            raise ValueError("from_profiles requires multiplicity-1 bins")
        amps = []
        for E in grid.centers:
            amps.append(np.array([[profile0(E)], [profile1(E)]], dtype=complex))
        return cls(tuple(amps))

    def check_against(self, grid: EnergyGrid) -> None:
        if len(self.amplitudes) != grid.n_bins:
            raise ValueError(
                f"form factors cover {len(self.amplitudes)} bins, grid has {grid.n_bins}")
        for j, a in enumerate(self.amplitudes):
            if a.shape[1] != grid.multiplicities[j]:
                raise ValueError(
                    f"bin {j}: amplitude length {a.shape[1]} != multiplicity "
                    f"{grid.multiplicities[j]}")

    def gram(self, j: int) -> np.ndarray:
        """2x2 Gram matrix G_{nm}(E_j) = <v_n(E_j), v_m(E_j)>.

        Symmetrized so hermiticity holds exactly, not just to roundoff;
        the scattering construction downstream relies on that.
        """
        a = self.amplitudes[j]
        G = a.conj() @ a.T
        return 0.5 * (G + G.conj().T)

    def grams(self) -> np.ndarray:
        return np.array([self.gram(j) for j in range(len(self.amplitudes))])

    def norms_squared(self, grid: EnergyGrid) -> np.ndarray:
        """[||g_0||^2, ||g_1||^2] = sum_j dE_j G_nn(E_j)."""
        G = self.grams()
        return np.real(np.tensordot(grid.widths, np.diagonal(G, axis1=1, axis2=2), axes=1))


@dataclass(frozen=True)
class GasState:
    """Fugacity plus per-bin PSD occupation-weight operators L_j.

    weights[j] is a Hermitian PSD (d_j, d_j) matrix; the Gibbs case is
    L_j = exp(-beta*E_j) * identity.
    """

    fugacity: float
    weights: tuple

    def __post_init__(self):
        if not 0.0 <= self.fugacity < 1.0:
            raise ValueError(f"fugacity must lie in [0, 1), got {self.fugacity}")
        ws = tuple(_readonly(np.asarray(w, dtype=complex)) for w in self.weights)
        object.__setattr__(self, "weights", ws)
        for j, w in enumerate(ws):
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValueError(f"weights[{j}] must be square, got {w.shape}")
            if np.max(np.abs(w - w.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(w))):
                raise ValueError(f"weights[{j}] is not Hermitian")
            lo = np.linalg.eigvalsh(w).min()
            if lo < -1e-12 * max(1.0, np.max(np.abs(w))):
                raise ValueError(f"weights[{j}] is not positive semidefinite (min eig {lo:g})")
            if self.fugacity * np.linalg.eigvalsh(w).max() >= 1.0:
                raise ValueError(f"weights[{j}]: spectral radius of xi*L_j must be < 1")

    @classmethod
    def gibbs(cls, grid: EnergyGrid, beta: float, fugacity: float = 0.0) -> "GasState":
        ws = tuple(
            np.exp(-beta * E) * np.eye(int(d), dtype=complex)
            for E, d in zip(grid.centers, grid.multiplicities)
        )
        return cls(fugacity, ws)

    @classmethod
    def empty(cls, grid: EnergyGrid) -> "GasState":
        ws = tuple(np.zeros((int(d), int(d)), dtype=complex) for d in grid.multiplicities)
        return cls(0.0, ws)

    def check_against(self, grid: EnergyGrid) -> None:
        if len(self.weights) != grid.n_bins:
            raise ValueError(
                f"gas weights cover {len(self.weights)} bins, grid has {grid.n_bins}")
        for j, w in enumerate(self.weights):
            if w.shape[0] != grid.multiplicities[j]:
                raise ValueError(
                    f"bin {j}: weight dimension {w.shape[0]} != multiplicity "
                    f"{grid.multiplicities[j]}")


@dataclass(frozen=True)
class GammaTable:
    """Per-bin 2x2 causal spectral matrices gamma_{nm}(E_j).

    The Hermitian part equals pi*G(E_j) exactly by construction; only the
    principal-value (anti-Hermitian) part is a numerical sum.
    """

    values: np.ndarray
    pv_part: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, dtype=complex)))
        if self.pv_part is not None:
            object.__setattr__(self, "pv_part", _readonly(np.asarray(self.pv_part, dtype=complex)))


def gamma_table(grid: EnergyGrid, ff: FormFactorSet) -> GammaTable:
    """gamma_{nm}(E_j) = pi*G_{nm}(E_j) - i * PV sum_{j'} dE_{j'} G_{nm}(E_{j'}) / (E_{j'} - E_j).

    The principal value uses the midpoint rule with the singular bin j'=j
    skipped; the Hermitian part is set to pi*G exactly rather than computed,
    because scattering unitarity downstream depends on that identity holding
    structurally.
    """
    ff.check_against(grid)
    G = ff.grams()
    nb = grid.n_bins
    K = np.zeros((nb, 2, 2), dtype=complex)
    for j in range(nb):
        denom = grid.centers - grid.centers[j]
        mask = np.arange(nb) != j
        coeff = grid.widths[mask] / denom[mask]
        Kj = np.tensordot(coeff, G[mask], axes=1)
        K[j] = 0.5 * (Kj + Kj.conj().T)   # restore exact hermiticity lost to BLAS ordering
    values = np.pi * G - 1j * K
    return GammaTable(values=values, pv_part=K)

"""Markovian generator of the test particle: Heisenberg and Schrodinger
superoperators assembled from the scattering blocks and the gas weights,
an independent Lindblad-form builder from user-supplied T-matrix elements,
density-matrix evolution, and structural checks (duality, complete
positivity via the Choi matrix).

Vectorization is column-stacking throughout: vec(X) = X.reshape(-1,
order='F'), so vec(A X B) = kron(B.T, A) vec(X) and the Schrodinger
superoperator is the conjugate transpose of the Heisenberg one under the
Hilbert-Schmidt pairing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import InvalidState, ShapeMismatch
from .model import GasState
from .scattering import ScatteringData

__all__ = ["GeneratorPair", "TMatrixInput", "heisenberg_generator",
           "boltzmann_from_T", "evolve_density", "duality_check", "cp_check",
           "CPReport", "t_matrix_from_blocks", "vec", "unvec"]


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X, dtype=complex).reshape(-1, order="F")


def unvec(x: np.ndarray) -> np.ndarray:
    n = int(round(np.sqrt(x.size)))
    return x.reshape(n, n, order="F")


@dataclass(frozen=True)
class GeneratorPair:
    """heis acts on vectorized observables, schr on vectorized density
    matrices; schr is the Hilbert-Schmidt adjoint of heis. metadata keeps
    the assembly ingredients (per-bin weights, the jump superoperator, and
    the operator B giving the remainder -B^+ X - X B) for cp_check."""

    heis: np.ndarray
    schr: np.ndarray
    dim: int
    metadata: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        h = np.asarray(self.heis, dtype=complex)
        s = np.asarray(self.schr, dtype=complex)
        h.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "heis", h)
        object.__setattr__(self, "schr", s)
        n = self.dim ** 2
        if h.shape != (n, n) or s.shape != (n, n):
            raise ValueError("superoperator shape inconsistent with dim")

    def apply_heis(self, X: np.ndarray) -> np.ndarray:
        return unvec(self.heis @ vec(X))

    def apply_schr(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.schr @ vec(rho))


def _pair_from_parts(dim, phi, B, weights=None):
    I = np.eye(dim, dtype=complex)
    heis = phi - np.kron(I, B.conj().T) - np.kron(B.T, I)
    meta = {"phi": phi, "b_op": B}
    if weights is not None:
        meta["weights"] = weights
    return GeneratorPair(heis=heis, schr=heis.conj().T, dim=dim, metadata=meta)


def heisenberg_generator(scattering: ScatteringData, gas: GasState) -> GeneratorPair:
    """heis(X) = sum_j sum_{n,m} dE_j <v_n(E_j), L_j v_m(E_j)> Theta^{n,m}_{E_j}(X).

    Assembled from the R operators: the completely positive candidate
    collects the 2pi G_{n'm'} R^+_{n',m} X R_{m',n} terms; the rest is
    exactly -B^+ X - X B with B = sum_j sum_{n,m} w_{mn}(E_j) R_{n,m}(E_j).
    """
    gas.check_against(scattering.grid)
    dS = scattering.dim_system
    n2 = dS ** 2
    I = np.eye(dS, dtype=complex)
    phi = np.zeros((n2, n2), dtype=complex)
    B = np.zeros((dS, dS), dtype=complex)
    weights = []
    for block in scattering.blocks:
        V = block.amplitudes            # d_j x 2, columns v_n
        L = gas.weights[block.j]
        w = block.width * (V.conj().T @ L @ V)
        w = 0.5 * (w + w.conj().T)
        weights.append(w)
        R = block.R
        G = block.gram
        for n in range(2):
            for m in range(2):
                for n2_ in range(2):
                    for m2 in range(2):
                        phi += (2 * np.pi * w[n, m] * G[n2_, m2]
                                * np.kron(R[m2, n].T, R[n2_, m].conj().T))
                B += w[m, n] * R[n, m]
    return _pair_from_parts(dS, phi, B, tuple(weights))


@dataclass(frozen=True)
class TMatrixInput:
    """Energy shells plus transition matrix elements for the direct
    Lindblad assembly.

    energies[i]: dispersion energy of shell i; weights[i]: its measure
    (dk); density[i]: gas occupation density at the shell, >= 0.
    elements maps (omega, i_out, i_in) to the complex d_S x d_S matrix
    T_omega(k_out, k_in). window is the energy-conservation width dE: a
    pair contributes iff |E_out - E_in + omega| <= window/2, with weight
    1/window standing in for the delta function.
    """

    energies: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    elements: dict
    window: float

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        d = np.asarray(self.density, dtype=float)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "density", d)
        if not (e.shape == w.shape == d.shape) or e.ndim != 1:
            raise ValueError("energies, weights, density must be 1-d of equal length")
        if np.any(w <= 0):
            raise ValueError("shell weights must be positive")
        if np.any(d < 0):
            raise ValueError("gas density must be nonnegative")
        if not self.window > 0:
            raise ValueError("window must be positive")
        dims = {np.asarray(T).shape for T in self.elements.values()}
        if len(dims) > 1:
            raise ValueError(f"inconsistent element shapes: {dims}")

    @property
    def dim_system(self) -> int:
        for T in self.elements.values():
            return np.asarray(T).shape[0]
        raise ValueError("no T elements given")


def boltzmann_from_T(tm: TMatrixInput) -> GeneratorPair:
    """Lindblad generator with jump operators

        A = sqrt(2pi * w_out * w_in * density_in / window) * T_omega(k_out, k_in)

    over all energy-conserving shell pairs. Trace preservation holds by
    construction; the effective Hamiltonian part is zero (the closed form
    of the shift lives outside the T-element data).
    """
    dS = tm.dim_system
    n2 = dS ** 2
    phi = np.zeros((n2, n2), dtype=complex)
    K = np.zeros((dS, dS), dtype=complex)
    for (omega, i_out, i_in), T in sorted(
            tm.elements.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        if abs(tm.energies[i_out] - tm.energies[i_in] + omega) > tm.window / 2:
            continue
        rate = 2 * np.pi * tm.weights[i_out] * tm.weights[i_in] * tm.density[i_in] / tm.window
        A = np.sqrt(rate) * np.asarray(T, dtype=complex)
        phi += np.kron(A.T, A.conj().T)
        K += A.conj().T @ A
    return _pair_from_parts(dS, phi, 0.5 * K)


def t_matrix_from_blocks(scattering: ScatteringData, gas: GasState) -> TMatrixInput:
    """Extract T elements from the built S-matrix blocks:

        T_{ab}(E_j) = -(S_j - 1)_{ab} / (2pi)  (system-operator-valued)

    with shells (bin j, orthonormal basis index a) at energy E_j, weight
    dE_j. Valid for coupling with a single Bohr frequency 0 (time-independent
    D); within-bin pairs are exactly energy conserving, so the window is the
    bin width. Gas density per shell is the basis-diagonal part of L_j.
    """
    gas.check_against(scattering.grid)
    energies, weights, density, elements = [], [], [], {}
    offset = 0
    dS = scattering.dim_system
    # the delta discretization divides each pair weight by one global
    # window; shells get weight sqrt(dE_j * window) so that a within-bin
    # pair always contributes dE_j, bin widths uniform or not
    window = float(np.min(scattering.grid.widths))
    for block in scattering.blocks:
        r = block.rank
        C = block.basis
        L = gas.weights[block.j]
        V = block.amplitudes
        # occupation density in the orthonormalized scattering basis
        Cinv = np.linalg.pinv(C)            # 2 x r
        Lbasis = Cinv.conj().T @ (V.conj().T @ L @ V) @ Cinv
        M4 = block.S_block.reshape(dS, r, dS, r)
        for a in range(r):
            energies.append(block.energy)
            weights.append(np.sqrt(block.width * window))
            density.append(max(float(np.real(Lbasis[a, a])), 0.0))
        for a in range(r):
            for b in range(r):
                T = -(M4[:, a, :, b] - (a == b) * np.eye(dS)) / (2 * np.pi)
                elements[(0.0, offset + a, offset + b)] = T
        offset += r
    return TMatrixInput(np.array(energies), np.array(weights),
                        np.array(density), elements, window)


def _check_state(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidState(f"density matrix must be square, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise InvalidState("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol or abs(np.trace(rho).imag) > tol:
        raise InvalidState(f"trace must be 1, got {np.trace(rho)}")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise InvalidState("density matrix has negative eigenvalues")
    return rho


def evolve_density(gen: GeneratorPair, rho0: np.ndarray, t: float,
                   dt: float | None = None) -> np.ndarray:
    """rho(t) = exp(t L_*) rho0: exact superoperator exponential for
    d_S <= 8 (or whenever no step is given), classical 4th-order fixed-step
    integration with step dt otherwise."""
    rho0 = _check_state(rho0)
    if t < 0:
        raise ValueError("t must be >= 0")
    if rho0.shape[0] != gen.dim:
        raise InvalidState(f"state dimension {rho0.shape[0]} != generator dim {gen.dim}")
    r = vec(rho0)
    if t == 0:
        return rho0.copy()
    use_expm = dt is None and gen.dim <= 8
    if dt is None and gen.dim > 8:
        dt = min(0.01, t / 100.0)
    if use_expm:
        return unvec(expm(gen.schr * t) @ r)
    n_steps = max(1, int(np.ceil(t / dt)))
    h = t / n_steps
    A = gen.schr
    for _ in range(n_steps):
        k1 = A @ r
        k2 = A @ (r + 0.5 * h * k1)
        k3 = A @ (r + 0.5 * h * k2)
        k4 = A @ (r + h * k3)
        r = r + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return unvec(r)


def duality_check(gen: GeneratorPair, rho0: np.ndarray, X: np.ndarray,
                  t: float) -> float:
    """|Tr(rho0 e^{t heis}(X)) - Tr(e^{t schr}(rho0) X)|."""
    rho0 = np.asarray(rho0, dtype=complex)
    X = np.asarray(X, dtype=complex)
    lhs = np.trace(rho0 @ unvec(expm(gen.heis * t) @ vec(X)))
    rhs = np.trace(unvec(expm(gen.schr * t) @ vec(rho0)) @ X)
    return abs(lhs - rhs)


@dataclass(frozen=True)
class CPReport:
    choi_min_eig: float
    remainder_defect: float
    unitality_defect: float
    h_eff: np.ndarray
    passed: bool


def cp_check(gen: GeneratorPair, tol: float = 1e-10) -> CPReport:
    """Split heis into the jump map Phi and the remainder, certify
    complete positivity of Phi through its Choi matrix, and verify the
    remainder is -1/2 {Phi(1), X} + i [H_eff, X] with H_eff Hermitian.

    Needs the assembly metadata ('phi', 'b_op') that both builders attach.
    """
    if "phi" not in gen.metadata or "b_op" not in gen.metadata:
        raise ValueError("cp_check requires a GeneratorPair with assembly metadata")
    phi = gen.metadata["phi"]
    B = gen.metadata["b_op"]
    d = gen.dim
    I = np.eye(d, dtype=complex)

    # Choi matrix of X -> Phi(X): PSD iff Phi is completely positive
    J = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[a, b] = 1.0
            J += np.kron(E, unvec(phi @ vec(E)))
    J = 0.5 * (J + J.conj().T)
    choi_min = float(np.linalg.eigvalsh(J).min())

    phi_one = unvec(phi @ vec(I))
    h_eff = (B - B.conj().T) / 2j
    scale = max(1.0, float(np.max(np.abs(gen.heis))))

    # remainder actually present in heis
    remainder = gen.heis - phi
    # candidate form: -1/2 {phi(1), X} + i [h_eff, X]
    anti = -0.5 * (np.kron(I, phi_one) + np.kron(phi_one.T, I))
    comm = 1j * (np.kron(I, h_eff) - np.kron(h_eff.T, I))
    defect = float(np.max(np.abs(remainder - (anti + comm))))
    if defect > tol * scale:
        raise ShapeMismatch(
            f"generator remainder is not anticommutator+commutator shaped "
            f"(defect {defect:.3e}, scale {scale:.3e})")

    unitality = float(np.max(np.abs(gen.heis @ vec(I))))
    passed = choi_min >= -tol * scale and defect <= tol * scale
    return CPReport(choi_min_eig=choi_min, remainder_defect=defect,
                    unitality_defect=unitality, h_eff=h_eff, passed=passed)

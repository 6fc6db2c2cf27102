"""Truncated bosonic Fock-space numerics over a few modes: exact-integer
commutation checks, coherent vectors with a-priori tail bounds, second
quantization, the quasifree pair correlation, and the step-size scaling
that makes products of number increments first order.

The mode space is small on purpose (d <= 3, total occupation <= 8): every
statement checked here is a finite matrix identity, so defects separate
cleanly into truncation tails (bounded up front) and float roundoff.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import TruncationTooSmall
from .model import gibbs_density

__all__ = [
    "TruncatedFock", "ItoScalingReport", "coherent_vector",
    "number_characterization_check", "second_quantization_check",
    "quasifree_two_point_check", "ito_scaling_check",
]

TAIL_LIMIT = 1e-10


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class TruncatedFock:
    """Occupation basis {n : sum_i n_i <= n_max} over `modes` bosonic modes
    with annihilators/creators as explicit matrices. States with total
    occupation <= n_max - 1 form the protected subspace on which the
    canonical commutation relations hold without truncation artifacts."""

    def __init__(self, modes: int, n_max: int):
        if not 1 <= modes <= 3:
            raise ValueError(f"modes must be 1..3, got {modes}")
        if not 1 <= n_max <= 8:
            raise ValueError(f"n_max must be 1..8, got {n_max}")
        self.modes = modes
        self.n_max = n_max
        self.basis = tuple(
            n for n in itertools.product(range(n_max + 1), repeat=modes)
            if sum(n) <= n_max)
        self.dim = len(self.basis)
        self.index = {n: k for k, n in enumerate(self.basis)}
        ops = []
        for i in range(modes):
            A = np.zeros((self.dim, self.dim))
            for n in self.basis:
                if n[i] > 0:
                    m = n[:i] + (n[i] - 1,) + n[i + 1:]
                    A[self.index[m], self.index[n]] = math.sqrt(n[i])
            ops.append(_readonly(A))
        self._ann = tuple(ops)
        self.protected = _readonly(
            np.array([sum(n) <= n_max - 1 for n in self.basis]))

    def annihilator(self, i: int) -> np.ndarray:
        return self._ann[i]

    def creator(self, i: int) -> np.ndarray:
        return self._ann[i].T

    def d_gamma(self, X) -> np.ndarray:
        """Second quantization sum_ij X_ij a+_i a_j, assembled per matrix
        element so diagonal occupation terms stay exact integers and the
        result is bit-exact Hermitian for Hermitian X."""
        X = np.asarray(X, dtype=complex)
        if X.shape != (self.modes, self.modes):
            raise ValueError(f"X must be {self.modes}x{self.modes}, got {X.shape}")
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for n in self.basis:
            col = self.index[n]
            diag = 0.0 + 0.0j
            for i in range(self.modes):
                diag += X[i, i] * n[i]
            out[col, col] += diag
            for j in range(self.modes):
                if n[j] == 0:
                    continue
                for i in range(self.modes):
                    if i == j:
                        continue
                    m = list(n)
                    m[j] -= 1
                    m[i] += 1
                    out[self.index[tuple(m)], col] += (
                        X[i, j] * (math.sqrt(n[j]) * math.sqrt(n[i] + 1)))
        return out

    def number_operator(self) -> np.ndarray:
        return self.d_gamma(np.eye(self.modes))

    def ccr_defect(self, i: int, j: int) -> float:
        """max |([a_i, a+_j] - delta_ij)|m>| over protected columns m,
        evaluated in exact integer arithmetic: every product entry is a
        square root of an integer, and matching radicands cancel exactly."""
        worst = 0
        for n in self.basis:
            if sum(n) > self.n_max - 1:
                continue
            # a_i a+_j |n>: raise j (never truncated on protected states),
            # lower i; radicand of the amplitude onto |n + e_j - e_i>
            up = list(n)
            up[j] += 1
            r1 = up[i] * (n[j] + 1)        # n_i of the raised state times (n_j + 1)
            # a+_j a_i |n>: lower i first (zero when n_i = 0), raise j
            if n[i] > 0:
                down = list(n)
                down[i] -= 1
                r2 = n[i] * (down[j] + 1)
            else:
                r2 = 0
            if i == j:
                # both radicands are perfect squares; the integer difference
                # of their roots must be exactly 1
                worst = max(worst, abs(math.isqrt(r1) - math.isqrt(r2) - 1))
            else:
                worst = max(worst, abs(r1 - r2))
        return float(worst)


def _poisson_tail(x: float, n_max: int) -> float:
    """e^{-x} sum_{k > n_max} x^k / k!, summed from the first omitted term
    so nothing cancels."""
    term = math.exp(-x)
    for k in range(1, n_max + 2):
        term *= x / k
    total = 0.0
    k = n_max + 1
    while True:
        total += term
        k += 1
        term *= x / k
        if term <= 1e-30 * max(total, 1e-300):
            return total


def coherent_vector(space: TruncatedFock, f) -> np.ndarray:
    """Truncated coherent vector e^{-|f|^2/2} sum_n prod_i f_i^{n_i}/sqrt(n_i!).
    Refuses amplitudes whose occupation tail beyond the cutoff exceeds
    1e-10, so downstream identities hold within documented tolerance."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (space.modes,):
        raise ValueError(f"f must have {space.modes} components, got {f.shape}")
    x = float(np.vdot(f, f).real)
    tail = _poisson_tail(x, space.n_max)
    if tail > TAIL_LIMIT:
        raise TruncationTooSmall(
            f"coherent tail {tail:.3e} beyond n_max={space.n_max} exceeds {TAIL_LIMIT}")
    psi = np.zeros(space.dim, dtype=complex)
    pref = math.exp(-0.5 * x)
    for n in space.basis:
        amp = pref
        for i in range(space.modes):
            amp = amp * f[i] ** n[i] / math.sqrt(math.factorial(n[i]))
        psi[space.index[n]] = amp
    return psi


def number_characterization_check(space: TruncatedFock, X, f, g) -> float:
    """|<Psi(f), dGamma(X) Psi(g)> - <f, X g> <Psi(f), Psi(g)>|."""
    X = np.asarray(X, dtype=complex)
    pf = coherent_vector(space, f)
    pg = coherent_vector(space, g)
    lhs = np.vdot(pf, space.d_gamma(X) @ pg)
    rhs = np.vdot(f, X @ np.asarray(g, dtype=complex)) * np.vdot(pf, pg)
    return abs(lhs - rhs)


def second_quantization_check(space: TruncatedFock, X, f, t: float) -> float:
    """|| e^{i t dGamma(X)} Psi(f) - Psi(e^{i t X} f) || for Hermitian X."""
    X = np.asarray(X, dtype=complex)
    if np.max(np.abs(X - X.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(X))):
        raise ValueError("X must be Hermitian")
    psi = coherent_vector(space, f)
    evolved = expm(1j * t * space.d_gamma(X)) @ psi
    rotated = coherent_vector(space, expm(1j * t * X) @ np.asarray(f, dtype=complex))
    return float(np.linalg.norm(evolved - rotated))


def quasifree_two_point_check(space: TruncatedFock, energies, beta: float,
                              xi: float, f, g) -> float:
    """Pair correlation Tr(rho A+(f) A(g)) in the truncated grand-canonical
    state rho ~ xi^N e^{-beta dGamma(H1)}, against the closed form
    sum_i conj(g_i) f_i * xi e^{-beta E_i} / (1 - xi e^{-beta E_i})."""
    energies = np.asarray(energies, dtype=float)
    if energies.shape != (space.modes,):
        raise ValueError(f"need {space.modes} mode energies, got {energies.shape}")
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    x = xi * np.exp(-beta * energies)
    if np.any(x >= 1.0):
        raise ValueError("xi e^{-beta E} must be < 1 for every mode")
    w = np.array([float(np.prod(x ** np.array(n))) for n in space.basis])
    z_full = float(np.prod(1.0 / (1.0 - x)))
    tail = 1.0 - w.sum() / z_full
    if tail > TAIL_LIMIT:
        raise TruncationTooSmall(
            f"Gibbs weight tail {tail:.3e} beyond n_max={space.n_max} exceeds {TAIL_LIMIT}")
    rho = np.diag(w / w.sum()).astype(complex)
    a_plus_f = sum(f[i] * space.creator(i) for i in range(space.modes))
    a_g = sum(np.conj(g[i]) * space.annihilator(i) for i in range(space.modes))
    lhs = np.trace(rho @ a_plus_f @ a_g)
    rhs = sum(np.conj(g[i]) * f[i] * gibbs_density(energies[i], beta, xi)
              for i in range(space.modes))
    return abs(lhs - rhs)


@dataclass(frozen=True)
class ItoScalingReport:
    dts: tuple
    identity_defects: tuple
    lead_terms: tuple
    cross_terms: tuple
    lead_slope: float
    cross_slope: float
    passed: bool


def ito_scaling_check(space: TruncatedFock, X, Y, f, dts,
                      tol: float = 1e-8) -> ItoScalingReport:
    """On coherent amplitudes f*sqrt(dt), splits
    <dGamma(X) dGamma(Y)> = <f_dt, X Y f_dt> + <f_dt, X f_dt><f_dt, Y f_dt>
    into its first-order part (equal to <dGamma(XY)> up to truncation) and
    the second-order cross part, then fits both log-log slopes in dt."""
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    dts = tuple(float(d) for d in dts)
    if len(dts) < 2 or any(d <= 0 for d in dts):
        raise ValueError("need at least two positive step sizes")
    dgx, dgy, dgxy = space.d_gamma(X), space.d_gamma(Y), space.d_gamma(X @ Y)
    defects, leads, crosses = [], [], []
    for dt in dts:
        fd = np.asarray(f, dtype=complex) * math.sqrt(dt)
        psi = coherent_vector(space, fd)
        full = np.vdot(psi, dgx @ (dgy @ psi))
        lead = np.vdot(psi, dgxy @ psi)
        want = np.vdot(fd, X @ Y @ fd) + np.vdot(fd, X @ fd) * np.vdot(fd, Y @ fd)
        defects.append(abs(full - want))
        leads.append(lead)
        crosses.append(full - lead)
    lead_mag = np.abs(leads)
    cross_mag = np.abs(crosses)
    if np.all(lead_mag > 0.0) and np.all(cross_mag > 0.0):
        lead_slope = float(np.polyfit(np.log(dts), np.log(lead_mag), 1)[0])
        cross_slope = float(np.polyfit(np.log(dts), np.log(cross_mag), 1)[0])
    else:
        lead_slope = cross_slope = float("nan")
    passed = all(d <= tol for d in defects)
    return ItoScalingReport(
        dts=dts, identity_defects=tuple(defects), lead_terms=tuple(leads),
        cross_terms=tuple(crosses), lead_slope=lead_slope,
        cross_slope=cross_slope, passed=passed)

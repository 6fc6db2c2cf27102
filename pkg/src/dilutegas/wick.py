"""Exact finite-fugacity correlators of the scaled collision noise via
Wick pairings with closed-form simplex integration, the zero-fugacity
limit evaluator, and the convergence / factorization reports built on the
two.

Conventions. A factor (f, g) at simplex slot s stands for the normalized
pair A+(f) A(g) sharing the time of slot s, with slot 0 the latest time;
the integration region is t >= t_0 >= t_1 >= ... >= 0 for horizon t.
A contraction whose creator sits left of its annihilator in the operator
product carries the thermal kernel xi <g, L (1 - xi L)^{-1} f>, the
reversed order the forward kernel <g, (1 - xi L)^{-1} f>; spectral phases
enter per leg as exp(+-i E t_slot / xi), and every factor contributes one
power of 1/xi. All time integrals are evaluated in closed form, so the
only approximations anywhere are the energy discretization itself and the
final float arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CombinatoricsOverflow
from .model import EnergyGrid, FormFactorSet, GasState, gamma_table

__all__ = [
    "CorrelatorSpec", "ConvergenceReport", "FactorizationReport",
    "exact_correlator", "limit_correlator", "pairing_values",
    "convergence_report", "factorization_check", "simplex_integral",
]

DEFAULT_BUDGET = 20_000_000
_SERIES_SWITCH = 1.0


# ---------------------------------------------------------------------------
# closed-form simplex integration of exponential sums
# ---------------------------------------------------------------------------

def _int_term(p, phi, coeff, horizon, out):
    """Accumulate int_0^u s^p e^{i phi s} ds into `out` as a map
    (power, frequency) -> coefficient of u^power e^{i freq u}."""
    if phi == 0.0:
        out[(p + 1, 0.0)] = out.get((p + 1, 0.0), 0.0) + coeff / (p + 1)
        return
    if abs(phi) * horizon <= _SERIES_SWITCH:
        # small-phase branch: expand e^{i phi s} so the antiderivative stays
        # polynomial; terms are cut far below the working precision
        term = coeff
        for k in range(40):
            key = (p + k + 1, 0.0)
            out[key] = out.get(key, 0.0) + term / (p + k + 1)
            term = term * (1j * phi) / (k + 1)
            if abs(term) * horizon ** (p + k + 2) < 1e-20 * max(1.0, abs(coeff)):
                break
        return
    iphi = 1j * phi
    cur = {(0, phi): 1.0 / iphi, (0, 0.0): -1.0 / iphi}
    for q in range(1, p + 1):
        nxt = {(q, phi): 1.0 / iphi}
        for key, c in cur.items():
            nxt[key] = nxt.get(key, 0.0) - (q / iphi) * c
        cur = nxt
    for key, c in cur.items():
        out[key] = out.get(key, 0.0) + coeff * c


def simplex_integral(thetas, horizon, fixed_theta=0.0):
    """int over horizon >= t_0 >= ... >= t_{m-1} >= 0 of
    exp(i sum_k thetas[k] t_k) dt, times exp(i fixed_theta * horizon)."""
    cur = {(0, 0.0): 1.0 + 0.0j}
    for s in range(len(thetas) - 1, -1, -1):
        out = {}
        for (p, phi), c in cur.items():
            _int_term(p, phi + thetas[s], c, horizon, out)
        cur = out
    val = 0.0 + 0.0j
    for (p, phi), c in cur.items():
        val += c * horizon ** p * np.exp(1j * (phi + fixed_theta) * horizon)
    return val


# ---------------------------------------------------------------------------
# spec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelatorSpec:
    """An ordered product of pair factors (f_i, g_i) with one simplex slot
    per factor. slots defaults to chronological (0, 1, ..., n-1: leftmost
    factor latest); the fully reversed assignment is the anti-chronological
    product and is the only other accepted order. n = 0 is allowed only as
    the empty inner spec of factorization_check."""

    grid: EnergyGrid
    form_factors: FormFactorSet
    gas: GasState
    factors: tuple
    horizon: float
    slots: tuple = None
    n_max: int = 4
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        facs = tuple((int(f), int(g)) for f, g in self.factors)
        object.__setattr__(self, "factors", facs)
        n = len(facs)
        if n > self.n_max:
            raise ValueError(f"{n} factors exceed n_max={self.n_max}")
        for f, g in facs:
            if f not in (0, 1) or g not in (0, 1):
                raise ValueError(f"channel indices must be 0 or 1, got ({f}, {g})")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if self.budget < 1:
            raise ValueError("budget must be positive")
        slots = tuple(range(n)) if self.slots is None else tuple(int(s) for s in self.slots)
        if sorted(slots) != list(range(n)):
            raise ValueError("slots must relabel the factors by 0..n-1")
        if slots != tuple(range(n)) and slots != tuple(reversed(range(n))):
            raise ValueError("slots must be chronological or anti-chronological")
        object.__setattr__(self, "slots", slots)
        self.form_factors.check_against(self.grid)
        self.gas.check_against(self.grid)

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def chronological(self) -> bool:
        return self.slots == tuple(range(self.n))

    def reversed(self) -> "CorrelatorSpec":
        """The adjoint product: factor order reversed, f/g swapped, each
        factor keeping its time slot."""
        return CorrelatorSpec(
            grid=self.grid, form_factors=self.form_factors, gas=self.gas,
            factors=tuple((g, f) for f, g in reversed(self.factors)),
            horizon=self.horizon,
            slots=tuple(reversed(self.slots)),
            n_max=self.n_max, budget=self.budget)

    def _legs(self):
        legs = []
        for (f, g), s in zip(self.factors, self.slots):
            legs.append(("c", f, s, None))
            legs.append(("a", g, s, None))
        return legs


# ---------------------------------------------------------------------------
# finite-fugacity evaluator
# ---------------------------------------------------------------------------

class _Tables:
    """Per-(model, xi) contraction kernels and phase-grid layout."""

    __slots__ = ("centers", "widths", "fw", "bw", "uniform", "step", "E0")

    def __init__(self, grid, ff, gas, xi):
        if not 0.0 < xi < 1.0:
            raise ValueError(f"fugacity must lie in (0, 1), got {xi}")
        nb = grid.n_bins
        self.centers = grid.centers
        self.widths = grid.widths
        self.fw = np.zeros((2, 2, nb), dtype=complex)
        self.bw = np.zeros((2, 2, nb), dtype=complex)
        for j in range(nb):
            V = ff.amplitudes[j]                    # (2, d_j)
            L = gas.weights[j]
            if xi * np.linalg.eigvalsh(L).max() >= 1.0:
                raise ValueError(
                    f"bin {j}: spectral radius of xi*L must be < 1")
            X = np.linalg.solve(np.eye(L.shape[0]) - xi * L, V.T)   # (d_j, 2)
            self.fw[:, :, j] = V.conj() @ X
            self.bw[:, :, j] = xi * (V.conj() @ (L @ X))
        if nb > 1:
            self.step = (self.centers[-1] - self.centers[0]) / (nb - 1)
            dev = np.max(np.abs(np.diff(self.centers) - self.step))
            self.uniform = self.step > 0 and dev <= 1e-12 * self.step
        else:
            self.step = 1.0
            self.uniform = True
        self.E0 = float(self.centers[0])


def _legs_terms(tab, legs, horizon, xi, budget):
    """All creator/annihilator matchings with their integrated values
    (no 1/xi prefactor). Bins are summed exactly: tuples sharing the same
    phase pattern are grouped before integration, by integer index sums on
    uniform-center grids and by bit-identical phase rows otherwise."""
    nb = tab.centers.size
    cre = [i for i, l in enumerate(legs) if l[0] == "c"]
    ann = [i for i, l in enumerate(legs) if l[0] == "a"]
    if len(cre) != len(ann):
        raise ValueError("legs must balance creators and annihilators")
    npair = len(cre)
    if npair == 0:
        return [((), 1.0 + 0.0j)]
    n_match = math.factorial(npair)
    if n_match * nb ** npair > budget:
        raise CombinatoricsOverflow(
            f"{n_match} pairings x {nb ** npair} bin tuples exceed budget {budget}")
    int_slots = sorted({l[2] for l in legs if l[2] != "fix"})
    slot_pos = {s: k for k, s in enumerate(int_slots)}
    m_int = len(int_slots)
    counts = np.zeros(m_int + 1)
    for l in legs:
        k = m_int if l[2] == "fix" else slot_pos[l[2]]
        counts[k] += 1.0 if l[0] == "c" else -1.0
    span = 2 * nb * npair + 1
    pack_ok = span ** (m_int + 1) < 2 ** 62
    shape = (nb,) * npair
    grids = np.indices(shape).reshape(npair, -1) if npair else None
    terms = []
    for match in itertools.permutations(ann):
        pairs = tuple(zip(cre, match))
        kvs = []
        zero = False
        for c_idx, a_idx in pairs:
            table = tab.bw if c_idx < a_idx else tab.fw
            kv = table[legs[a_idx][1], legs[c_idx][1]] * tab.widths
            for li in (c_idx, a_idx):
                if legs[li][3] is not None:
                    mask = np.zeros(nb)
                    mask[legs[li][3]] = 1.0
                    kv = kv * mask
            if not np.any(kv):
                zero = True
                break
            kvs.append(kv)
        if zero:
            terms.append((pairs, 0.0 + 0.0j))
            continue
        coeff = kvs[0]
        for kv in kvs[1:]:
            coeff = np.multiply.outer(coeff, kv)
        flat_c = coeff.reshape(-1)
        if tab.uniform and pack_ok:
            rows = np.zeros((m_int + 1, flat_c.size), np.int64)
            for p, (c_idx, a_idx) in enumerate(pairs):
                for li, sgn in ((c_idx, 1), (a_idx, -1)):
                    s = legs[li][2]
                    rows[m_int if s == "fix" else slot_pos[s]] += sgn * grids[p]
            key = np.zeros(flat_c.size, np.int64)
            for k in range(m_int + 1):
                key = key * span + (rows[k] + nb * npair)
            uniq, inv = np.unique(key, return_inverse=True)
            agg = (np.bincount(inv, weights=flat_c.real)
                   + 1j * np.bincount(inv, weights=flat_c.imag))
            dec = np.empty((uniq.size, m_int + 1), np.int64)
            rest = uniq.copy()
            for k in range(m_int, -1, -1):
                dec[:, k] = rest % span - nb * npair
                rest //= span
            theta_rows = dec * tab.step + counts * tab.E0
        else:
            rows = np.zeros((m_int + 1, flat_c.size))
            for p, (c_idx, a_idx) in enumerate(pairs):
                for li, sgn in ((c_idx, 1), (a_idx, -1)):
                    s = legs[li][2]
                    rows[m_int if s == "fix" else slot_pos[s]] += sgn * tab.centers[grids[p]]
            uniq, inv = np.unique(rows.T, axis=0, return_inverse=True)
            agg = (np.bincount(inv, weights=flat_c.real)
                   + 1j * np.bincount(inv, weights=flat_c.imag))
            theta_rows = uniq
        val = 0.0 + 0.0j
        for row, c in zip(theta_rows, agg):
            if c == 0.0:
                continue
            val += c * simplex_integral(
                [row[k] / xi for k in range(m_int)], horizon,
                fixed_theta=row[m_int] / xi)
        terms.append((pairs, val))
    return terms


def _legs_value(spec, legs, xi, xi_power):
    tab = _Tables(spec.grid, spec.form_factors, spec.gas, xi)
    terms = _legs_terms(tab, legs, spec.horizon, xi, spec.budget)
    return sum(v for _, v in terms) / xi ** xi_power


def exact_correlator(spec: CorrelatorSpec, xi: float) -> complex:
    """Time-integrated moment of the product of spec.n scaled pair factors
    in the quasifree gas state at fugacity xi, summed over all Wick
    pairings and integrated in closed form over the simplex."""
    if spec.n < 1:
        raise ValueError("exact_correlator needs at least one factor")
    return _legs_value(spec, spec._legs(), xi, spec.n)


def pairing_values(spec: CorrelatorSpec, xi: float) -> dict:
    """Per-pairing contributions to exact_correlator, keyed by the factor
    permutation (annihilator of factor i paired with the creator of factor
    perm[i]). Cyclic structure controls the t-degree: a pairing whose
    permutation has b cycles contributes O(t^b)."""
    if spec.n < 1:
        raise ValueError("pairing_values needs at least one factor")
    tab = _Tables(spec.grid, spec.form_factors, spec.gas, xi)
    terms = _legs_terms(tab, spec._legs(), spec.horizon, xi, spec.budget)
    out = {}
    for pairs, val in terms:
        perm = [0] * spec.n
        for c_idx, a_idx in pairs:
            perm[a_idx // 2] = c_idx // 2
        out[tuple(perm)] = val / xi ** spec.n
    return out


# ---------------------------------------------------------------------------
# zero-fugacity limit
# ---------------------------------------------------------------------------

def limit_correlator(spec: CorrelatorSpec) -> complex:
    """Limiting value of exact_correlator as the fugacity vanishes: a sum
    over ordered partitions of the factor chain into consecutive causal
    blocks; a block spanning factors a..b contributes

        sum_j dE_j <v_{g_b}, L_j v_{f_a}> * prod_{r=a}^{b-1} gamma_{g_r, f_{r+1}}(E_j)

    and a partition into B blocks carries t^B / B!."""
    if spec.n < 1:
        raise ValueError("limit_correlator needs at least one factor")
    if not spec.chronological:
        return np.conj(limit_correlator(spec.reversed()))
    grid, ff, gas = spec.grid, spec.form_factors, spec.gas
    nb = grid.n_bins
    lw = np.zeros((2, 2, nb), dtype=complex)
    for j in range(nb):
        V = ff.amplitudes[j]
        lw[:, :, j] = V.conj() @ (gas.weights[j] @ V.T)
    gam = gamma_table(grid, ff).values        # (nb, 2, 2)
    chans = spec.factors
    n = spec.n
    total = 0.0 + 0.0j
    for cuts in itertools.product((0, 1), repeat=n - 1):
        blocks = []
        start = 0
        for i, c in enumerate(cuts):
            if c:
                blocks.append((start, i))
                start = i + 1
        blocks.append((start, n - 1))
        val = 1.0 + 0.0j
        for a, b in blocks:
            w = grid.widths * lw[chans[b][1], chans[a][0]]
            chain = np.ones(nb, dtype=complex)
            for r in range(a, b):
                chain = chain * gam[:, chans[r][1], chans[r + 1][0]]
            val *= np.sum(w * chain)
        total += val * spec.horizon ** len(blocks) / math.factorial(len(blocks))
    return total


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _check_xi_list(xis):
    xis = tuple(float(x) for x in xis)
    if len(xis) < 2 or any(a <= b for a, b in zip(xis, xis[1:])):
        raise ValueError("need a strictly decreasing fugacity list")
    return xis


def _trend(errors):
    if all(e == 0.0 for e in errors):
        return True
    return all(a > b for a, b in zip(errors, errors[1:]))


@dataclass(frozen=True)
class ConvergenceReport:
    order: int
    xis: tuple
    exact_values: tuple
    limit: complex
    abs_errors: tuple
    rel_errors: tuple
    decreasing: bool
    final_rel_error: float
    passed: bool

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def convergence_report(spec: CorrelatorSpec, xis, tol: float = 5e-2) -> ConvergenceReport:
    """Exact-vs-limit error table along a decreasing fugacity list. A
    non-converging sequence yields a FAIL verdict, never an exception."""
    xis = _check_xi_list(xis)
    lim = limit_correlator(spec)
    exact = tuple(exact_correlator(spec, xi) for xi in xis)
    scale = max(abs(lim), 1e-300)
    abs_errors = tuple(abs(e - lim) for e in exact)
    rel_errors = tuple(a / scale for a in abs_errors)
    decreasing = _trend(rel_errors)
    final = rel_errors[-1]
    return ConvergenceReport(
        order=spec.n, xis=xis, exact_values=exact, limit=lim,
        abs_errors=abs_errors, rel_errors=rel_errors, decreasing=decreasing,
        final_rel_error=final, passed=decreasing and final <= tol)


@dataclass(frozen=True)
class FactorizationReport:
    f_channel: int
    g_channel: int
    bin_index: int
    xis: tuple
    lhs_values: tuple
    rhs_values: tuple
    defects: tuple
    decreasing: bool
    final_defect: float
    passed: bool

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def factorization_check(f_channel: int, g_channel: int, bin_index: int,
                        inner_spec: CorrelatorSpec, xis,
                        tol: float = 5e-2) -> FactorizationReport:
    """Sandwich moment with one creator/annihilator pair pinned to the
    latest time and restricted to one energy bin, around inner_spec's
    factors integrated over the simplex below it. Checks that it
    factorizes, increasingly well as the fugacity drops, into the pinned
    pair correlation times the plain inner moment."""
    if f_channel not in (0, 1) or g_channel not in (0, 1):
        raise ValueError("outer channel indices must be 0 or 1")
    if not 0 <= bin_index < inner_spec.grid.n_bins:
        raise ValueError(f"bin_index {bin_index} outside the energy grid")
    if inner_spec.n > 2:
        raise ValueError("inner spec is limited to 2 factors")
    if not inner_spec.chronological:
        raise ValueError("inner spec must be chronological")
    xis = _check_xi_list(xis)
    outer_c = ("c", f_channel, "fix", bin_index)
    outer_a = ("a", g_channel, "fix", bin_index)
    lhs_vals, rhs_vals, defects = [], [], []
    for xi in xis:
        lhs = _legs_value(inner_spec, [outer_c] + inner_spec._legs() + [outer_a],
                          xi, inner_spec.n + 1)
        pair = _legs_value(inner_spec, [outer_c, outer_a], xi, 1)
        inner = exact_correlator(inner_spec, xi) if inner_spec.n else 1.0 + 0.0j
        rhs = pair * inner
        lhs_vals.append(lhs)
        rhs_vals.append(rhs)
        defects.append(abs(lhs - rhs) / abs(rhs) if rhs != 0.0 else abs(lhs))
    decreasing = _trend(defects)
    final = defects[-1]
    return FactorizationReport(
        f_channel=f_channel, g_channel=g_channel, bin_index=bin_index,
        xis=xis, lhs_values=tuple(lhs_vals), rhs_values=tuple(rhs_vals),
        defects=tuple(defects), decreasing=decreasing, final_defect=final,
        passed=decreasing and final <= tol)

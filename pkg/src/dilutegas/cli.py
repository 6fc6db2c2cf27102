"""Command line entry point: parses model files, runs the solvers and check
batteries, and emits reproducible CSV/JSON artifacts.

Exit codes: 0 on success or PASS, 1 on a FAIL verdict, 2 on input or usage
errors. Every run that gets past argument parsing writes a JSON manifest
recording input hashes, package versions, the seed, and wall time; clock
readings live only in the manifest's "timing" block, never in payload
files, so payloads are byte-identical across reruns of the same config.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time

import numpy as np
import scipy
from scipy.linalg import expm

from . import __version__
from .collision import build_kernel, ensemble_average, sample_trajectory
from .errors import (InvalidState, ModelFormatError, SingularTMatrix,
                     TruncationTooSmall)
from .fock import (TruncatedFock, coherent_vector, ito_scaling_check,
                   number_characterization_check, quasifree_two_point_check,
                   second_quantization_check)
from .generator import cp_check, evolve_density, heisenberg_generator, unvec, vec
from .modelfile import DEMO_NAMES, document_from_parts, resolve_model
from .scattering import build_smatrix, theta_map
from .wick import CorrelatorSpec, convergence_report

__all__ = ["main"]


# ---------------------------------------------------------------- helpers

def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _pairs(M):
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _json_payload(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    _write_text(path, "\n".join(lines) + "\n")


def _sha256_file(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _model_record(spec: str, pm) -> dict:
    if spec.startswith("demo:"):
        digest = hashlib.sha256(
            json.dumps(pm.document, sort_keys=True).encode()).hexdigest()
    else:
        digest = _sha256_file(spec)
    return {"source": spec, "sha256": digest}


def _load_rho0(arg: str, d: int) -> np.ndarray:
    if arg == "mixed":
        return np.eye(d, dtype=complex) / d
    if arg.startswith("pure:"):
        k = int(arg[len("pure:"):])
        if not 0 <= k < d:
            raise ValueError(f"pure state index {k} outside 0..{d - 1}")
        rho = np.zeros((d, d), dtype=complex)
        rho[k, k] = 1.0
        return rho
    with open(arg, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        return np.array([[complex(z[0], z[1]) for z in row] for row in raw],
                        dtype=complex)
    except (TypeError, IndexError) as e:
        raise ValueError(
            f"{arg}: expected a row-major matrix of [re, im] pairs") from e


def _parse_xis(text: str):
    xis = tuple(float(x) for x in text.split(",") if x.strip())
    if len(xis) < 2:
        raise ValueError("need at least two comma-separated xi values")
    return xis


def _upper_pairs(d):
    return [(i, j) for i in range(d) for j in range(i + 1, d)]


class _Battery:
    """Collects named defect-vs-tolerance checks and prints verdict lines."""

    def __init__(self):
        self.checks = []

    def add(self, name, defect, tol):
        ok = bool(defect <= tol)
        self.checks.append({"name": name, "defect": float(defect),
                            "tolerance": float(tol), "pass": ok})
        print(f"{'PASS' if ok else 'FAIL'} {name}: defect {defect:.3e} "
              f"(tol {tol:g})")
        return ok

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def report(self) -> dict:
        return {"checks": self.checks,
                "verdict": "PASS" if self.passed else "FAIL"}


# ------------------------------------------------------------ subcommands

def _cmd_model(args):
    pm = resolve_model(args.model)
    inputs = {"model": _model_record(args.model, pm)}
    grid, ff = pm.grid, pm.form_factors
    ranks = []
    for j in range(grid.n_bins):
        G = ff.gram(j)
        w = np.linalg.eigvalsh(G)
        ranks.append(int(np.sum(w > 1e-12 * max(w.sum(), 1e-300))))
    norms = ff.norms_squared(grid)
    print(f"model: {pm.name or '(unnamed)'} ({args.model})")
    print(f"schema_version: {pm.schema_version}")
    print(f"system: dim {pm.system.dim}, levels {pm.system.eigenvalues.size}")
    print(f"grid: {grid.n_bins} bins, centers in "
          f"[{grid.centers[0]:g}, {grid.centers[-1]:g}], "
          f"multiplicity {grid.multiplicities.min()}..{grid.multiplicities.max()}")
    print(f"form factors: |g0|^2 = {norms[0]:.6g}, |g1|^2 = {norms[1]:.6g}, "
          f"rank-deficient bins: {sum(1 for r in ranks if r < 2)}")
    print(f"gas: fugacity {pm.gas.fugacity:g}")
    print("model OK")
    outputs = {}
    if args.dump:
        doc = document_from_parts(pm.name, pm.system, grid, ff, pm.gas)
        _write_text(args.dump, _json_payload(doc))
        outputs["dump"] = args.dump
    return 0, inputs, outputs, None, {}


def _cmd_smatrix(args):
    pm = resolve_model(args.model)
    inputs = {"model": _model_record(args.model, pm)}
    data = build_smatrix(pm.grid, pm.form_factors, pm.system.coupling)
    rows = [
        [str(b.j), _fmt(b.energy), _fmt(b.cond_T0), _fmt(b.cond_T1),
         _fmt(b.unit_defect)]
        for b in data.blocks
    ]
    _write_csv(args.out, ["bin", "E", "cond_T0", "cond_T1", "unit_defect"],
               rows)
    outputs = {"csv": args.out}
    if args.blocks_json:
        doc = {"dim_system": data.dim_system,
               "bins": [{"bin": b.j, "energy": float(b.energy),
                         "rank": b.rank, "degenerate": b.degenerate,
                         "s_block": _pairs(b.S_block)} for b in data.blocks]}
        _write_text(args.blocks_json, _json_payload(doc))
        outputs["blocks_json"] = args.blocks_json
    worst = data.max_unit_defect
    ok = worst <= args.tol_unit
    print(f"{data.grid.n_bins} bins, max unitarity defect {worst:.3e} "
          f"(tol {args.tol_unit:g}) -> {'PASS' if ok else 'FAIL'}")
    return (0 if ok else 1), inputs, outputs, None, {}


def _cmd_evolve(args):
    pm = resolve_model(args.model)
    inputs = {"model": _model_record(args.model, pm)}
    if args.t < 0 or args.dt <= 0:
        raise ValueError("need t >= 0 and dt > 0")
    data = build_smatrix(pm.grid, pm.form_factors, pm.system.coupling)
    gen = heisenberg_generator(data, pm.gas)
    d = gen.dim
    rho0 = _load_rho0(args.rho0, d)
    if not args.rho0.startswith(("mixed", "pure:")):
        inputs["rho0"] = {"source": args.rho0, "sha256": _sha256_file(args.rho0)}
    n = int(np.floor(args.t / args.dt + 1e-9))
    times = [k * args.dt for k in range(n + 1)]
    if times[-1] < args.t - 1e-12 * max(args.t, 1.0):
        times.append(args.t)
    header = (["t"] + [f"p{i}" for i in range(d)]
              + [x for i, j in _upper_pairs(d)
                 for x in (f"re_c{i}{j}", f"im_c{i}{j}")]
              + ["trace", "min_eig"])
    rows = []
    for t in times:
        rho = evolve_density(gen, rho0, t)
        herm = 0.5 * (rho + rho.conj().T)
        row = [_fmt(t)]
        row += [_fmt(rho[i, i].real) for i in range(d)]
        for i, j in _upper_pairs(d):
            row += [_fmt(rho[i, j].real), _fmt(rho[i, j].imag)]
        row += [_fmt(np.trace(rho).real), _fmt(np.linalg.eigvalsh(herm).min())]
        rows.append(row)
    _write_csv(args.out, header, rows)
    print(f"evolved to t={args.t:g} in {len(times)} output rows -> {args.out}")
    return 0, inputs, {"csv": args.out}, None, {}


def _cmd_trajectories(args):
    pm = resolve_model(args.model)
    inputs = {"model": _model_record(args.model, pm)}
    if args.t_end <= 0 or args.n_traj < 1 or args.points < 2:
        raise ValueError("need t-end > 0, n-traj >= 1, points >= 2")
    data = build_smatrix(pm.grid, pm.form_factors, pm.system.coupling)
    kernel = build_kernel(data, pm.gas)
    d = kernel.dim_system
    rho0 = _load_rho0(args.rho0, d)
    if not args.rho0.startswith(("mixed", "pure:")):
        inputs["rho0"] = {"source": args.rho0, "sha256": _sha256_file(args.rho0)}
    t_grid = np.linspace(0.0, args.t_end, args.points)
    transform = None
    if args.schroedinger_picture:
        # rho -> e^{-iH_S t} rho e^{iH_S t}; H_S is diagonal, so the
        # conjugation is an elementwise phase
        h = np.diag(pm.system.hamiltonian()).real
        P = np.exp(-1j * np.subtract.outer(h, h)[None, :, :]
                   * t_grid[:, None, None])
        transform = lambda snaps: snaps * P
    res = ensemble_average(kernel, rho0, t_grid, args.n_traj, args.seed,
                           threads=args.threads, transform=transform)
    header = ["t"]
    for i in range(d):
        for j in range(d):
            header += [f"mean_re_{i}{j}", f"mean_im_{i}{j}", f"stderr_{i}{j}"]
    rows = []
    for ti, t in enumerate(t_grid):
        row = [_fmt(t)]
        for i in range(d):
            for j in range(d):
                row += [_fmt(res.mean[ti, i, j].real),
                        _fmt(res.mean[ti, i, j].imag),
                        _fmt(res.stderr[ti, i, j])]
        rows.append(row)
    _write_csv(args.out, header, rows)
    meta_path = args.meta or args.out + ".meta.json"
    meta = {"rate": float(kernel.rate),
            "empty_gas": bool(kernel.empty_gas),
            "generator_identity_defect": float(kernel.identity_defect),
            "bin_probabilities": [float(p) for p in kernel.bin_probabilities],
            "n_traj": args.n_traj,
            "picture": "schroedinger" if args.schroedinger_picture
                       else "interaction"}
    _write_text(meta_path, _json_payload(meta))
    print(f"{args.n_traj} trajectories, rate {kernel.rate:.6g} -> {args.out}")
    return 0, inputs, {"csv": args.out, "meta": meta_path}, args.seed, {}


def _cmd_correlators(args):
    pm = resolve_model(args.model)
    inputs = {"model": _model_record(args.model, pm)}
    with open(args.spec, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    inputs["spec"] = {"source": args.spec, "sha256": _sha256_file(args.spec)}
    factors = raw["factors"] if isinstance(raw, dict) else raw
    factors = tuple((int(f), int(g)) for f, g in factors)
    xis = _parse_xis(args.xis)
    spec = CorrelatorSpec(grid=pm.grid, form_factors=pm.form_factors,
                          gas=pm.gas, factors=factors, horizon=args.t)
    rep = convergence_report(spec, xis, tol=args.tol)
    doc = {
        "order": rep.order,
        "xis": list(rep.xis),
        "exact_values": [[v.real, v.imag] for v in rep.exact_values],
        "limit_value": [rep.limit.real, rep.limit.imag],
        "abs_errors": [float(e) for e in rep.abs_errors],
        "rel_errors": [float(e) for e in rep.rel_errors],
        "decreasing": bool(rep.decreasing),
        "final_rel_error": float(rep.final_rel_error),
        "tolerance": args.tol,
        "verdict": rep.verdict,
    }
    _write_text(args.out, _json_payload(doc))
    print(f"order {rep.order} correlator at t={args.t:g}: rel errors "
          + ", ".join(f"{e:.3e}" for e in rep.rel_errors)
          + f" -> {rep.verdict}")
    return (0 if rep.passed else 1), inputs, {"json": args.out}, None, {}


def _fock_battery(modes, n_max, seed, battery):
    sp = TruncatedFock(modes, n_max)
    rng = np.random.default_rng(seed)

    def vec_small(scale=0.1):
        return scale * (rng.standard_normal(modes)
                        + 1j * rng.standard_normal(modes))

    def herm():
        X = rng.standard_normal((modes, modes)) \
            + 1j * rng.standard_normal((modes, modes))
        return 0.5 * (X + X.conj().T)

    battery.add("fock_ccr_exact_integer",
                max(sp.ccr_defect(i, j)
                    for i in range(modes) for j in range(modes)), 0.0)
    eye = np.eye(sp.dim)
    worst = 0.0
    for i in range(modes):
        for j in range(modes):
            comm = (sp.annihilator(i) @ sp.creator(j)
                    - sp.creator(j) @ sp.annihilator(i))
            want = eye if i == j else np.zeros_like(eye)
            worst = max(worst, float(np.max(np.abs((comm - want)[:, sp.protected]))))
    battery.add("fock_ccr_float_protected", worst, 1e-12)
    d_herm = d_lie = 0.0
    for _ in range(3):
        X, Y = herm(), herm()
        dgx, dgy = sp.d_gamma(X), sp.d_gamma(Y)
        d_herm = max(d_herm, float(np.max(np.abs(dgx - dgx.conj().T))))
        lie = dgx @ dgy - dgy @ dgx - sp.d_gamma(X @ Y - Y @ X)
        d_lie = max(d_lie, float(np.max(np.abs(lie[:, sp.protected]))))
    battery.add("fock_d_gamma_hermitian", d_herm, 1e-14)
    battery.add("fock_d_gamma_lie_morphism", d_lie, 1e-12)
    d_ov = 0.0
    for _ in range(4):
        f, g = vec_small(), vec_small()
        got = np.vdot(coherent_vector(sp, f), coherent_vector(sp, g))
        want = np.exp(np.vdot(f, g)
                      - 0.5 * (np.vdot(f, f).real + np.vdot(g, g).real))
        d_ov = max(d_ov, abs(got - want))
    battery.add("fock_coherent_overlap", d_ov, 1e-10)
    battery.add("fock_number_characterization",
                max(number_characterization_check(sp, herm(), vec_small(),
                                                  vec_small())
                    for _ in range(3)), 1e-8)
    battery.add("fock_second_quantization",
                max(second_quantization_check(sp, herm(), vec_small(), 0.7)
                    for _ in range(3)), 1e-8)
    energies = np.linspace(1.1, 1.6, modes)
    battery.add("fock_quasifree_two_point",
                max(quasifree_two_point_check(sp, energies, 1.0, 0.2,
                                              vec_small(), vec_small())
                    for _ in range(3)), 1e-8)
    rep = ito_scaling_check(sp, herm(), herm(), vec_small(),
                            (1e-1, 1e-2, 1e-3))
    battery.add("fock_ito_identity", max(rep.identity_defects), 1e-8)
    battery.add("fock_ito_lead_slope_error", abs(rep.lead_slope - 1.0), 0.02)
    battery.add("fock_ito_cross_slope_error", abs(rep.cross_slope - 2.0), 0.05)


def _cmd_fock_verify(args):
    battery = _Battery()
    _fock_battery(args.modes, args.n_max, args.seed, battery)
    report = battery.report()
    report["space"] = {"modes": args.modes, "n_max": args.n_max}
    outputs = {}
    if args.out:
        _write_text(args.out, _json_payload(report))
        outputs["json"] = args.out
    print(f"VERDICT: {report['verdict']}")
    return (0 if battery.passed else 1), {}, outputs, args.seed, {}


def _cmd_verify_all(args):
    pm = resolve_model(args.model)
    inputs = {"model": _model_record(args.model, pm)}
    rng = np.random.default_rng(args.seed)
    battery = _Battery()
    d = pm.system.dim

    data = build_smatrix(pm.grid, pm.form_factors, pm.system.coupling)
    battery.add("smatrix_unitarity", data.max_unit_defect, 1e-10)

    def herm():
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        return 0.5 * (X + X.conj().T)

    battery.add("theta_dual_route",
                max(float(theta_map(data, herm())[1].max())
                    for _ in range(3)), 1e-10)

    gen = heisenberg_generator(data, pm.gas)
    cp = cp_check(gen)
    battery.add("choi_positive", max(0.0, -cp.choi_min_eig), 1e-10)
    battery.add("generator_remainder_shape", cp.remainder_defect, 1e-10)
    battery.add("heisenberg_unitality", cp.unitality_defect, 1e-10)

    kernel = build_kernel(data, pm.gas)
    battery.add("collision_generator_identity", kernel.identity_defect, 1e-8)

    def rand_state():
        A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rho = A @ A.conj().T
        return rho / np.trace(rho).real

    if kernel.rate > 0:
        t = 3.0 / kernel.rate
        rho0 = rand_state()
        lam_t = kernel.rate * t
        term = vec(rho0)
        series = np.zeros_like(term)
        weight = np.exp(-lam_t)
        covered = 0.0
        k = 0
        while covered < 1.0 - 1e-10 and k < 500:
            series = series + weight * term
            covered += weight
            term = kernel.collision_map @ term
            k += 1
            weight = weight * lam_t / k
        exact = expm(gen.schr * t) @ vec(rho0)
        battery.add("poisson_series_semigroup",
                    float(np.max(np.abs(series - exact))), 1e-8)
    else:
        battery.add("poisson_series_semigroup", 0.0, 1e-8)

    worst_neg = 0.0
    for _ in range(20):
        rho_t = evolve_density(gen, rand_state(), 1.5)
        herm_part = 0.5 * (rho_t + rho_t.conj().T)
        worst_neg = max(worst_neg, max(0.0, -float(
            np.linalg.eigvalsh(herm_part).min())))
    battery.add("evolved_positivity", worst_neg, 1e-8)

    t_grid = np.linspace(0.0, 2.0, 5)
    rho0 = np.eye(d, dtype=complex) / d
    r1 = ensemble_average(kernel, rho0, t_grid, 40, args.seed,
                          threads=args.threads)
    r2 = ensemble_average(kernel, rho0, t_grid, 40, args.seed,
                          threads=args.threads)
    same = (r1.mean.tobytes() == r2.mean.tobytes()
            and r1.stderr.tobytes() == r2.stderr.tobytes())
    battery.add("trajectory_determinism", 0.0 if same else 1.0, 0.0)

    xis = (1e-1, 1e-2, 1e-3)
    de = float(pm.grid.widths.max())
    spec = CorrelatorSpec(grid=pm.grid, form_factors=pm.form_factors,
                          gas=pm.gas, factors=((0, 1),),
                          horizon=0.95 * np.pi * min(xis) / de)
    rep = convergence_report(spec, xis)
    battery.add("correlator_n1_monotone", 0.0 if rep.decreasing else 1.0, 0.0)
    battery.add("correlator_n1_final_rel_error", rep.final_rel_error, 5e-2)

    _fock_battery(2, 8, args.seed, battery)

    report = battery.report()
    outputs = {}
    if args.out:
        _write_text(args.out, _json_payload(report))
        outputs["json"] = args.out
    print(f"VERDICT: {report['verdict']}")
    return (0 if battery.passed else 1), inputs, outputs, args.seed, {}


# ----------------------------------------------------------------- parser

def _build_parser():
    p = argparse.ArgumentParser(
        prog="dilutegas",
        description="Collision-model and scattering numerics for a quantum "
                    "test particle in a dilute Bose gas.",
        epilog="Model inputs accept a .json/.toml path or demo:<name> with "
               f"names: {', '.join(DEMO_NAMES)}.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, model=True, seed=False, threads=False):
        if model:
            sp.add_argument("--model", required=True,
                            help="model file path or demo:<name>")
        if seed:
            sp.add_argument("--seed", type=int, default=0,
                            help="RNG seed (default 0; no silent entropy)")
        if threads:
            sp.add_argument("--threads", type=int, default=1,
                            help="worker thread cap (default 1)")
        sp.add_argument("--manifest", default=None,
                        help="manifest path (default: <out>.manifest.json "
                             "or dilutegas-manifest.json)")

    sp = sub.add_parser("model", help="validate a model file")
    sp.add_argument("action", choices=["check"])
    add_common(sp)
    sp.add_argument("--dump", default=None,
                    help="write the normalized JSON document here")
    sp.set_defaults(func=_cmd_model)

    sp = sub.add_parser("smatrix", help="per-bin scattering blocks and "
                                        "unitarity defects")
    add_common(sp)
    sp.add_argument("--out", required=True, help="CSV output path")
    sp.add_argument("--blocks-json", default=None,
                    help="also write full S blocks as JSON")
    sp.add_argument("--tol-unit", type=float, default=1e-10)
    sp.set_defaults(func=_cmd_smatrix)

    sp = sub.add_parser("evolve", help="integrate the master equation")
    add_common(sp)
    sp.add_argument("--rho0", default="mixed",
                    help="'mixed', 'pure:<k>', or a JSON matrix file")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--dt", type=float, required=True,
                    help="output step")
    sp.add_argument("--out", required=True, help="CSV output path")
    sp.set_defaults(func=_cmd_evolve)

    sp = sub.add_parser("trajectories", help="Poisson collision-model "
                                             "ensemble averages")
    add_common(sp, seed=True, threads=True)
    sp.add_argument("--rho0", default="mixed")
    sp.add_argument("--t-end", type=float, required=True)
    sp.add_argument("--n-traj", type=int, required=True)
    sp.add_argument("--points", type=int, default=11,
                    help="output grid size (default 11)")
    sp.add_argument("--schroedinger-picture", action="store_true",
                    help="conjugate snapshots by e^{-i H_S t}")
    sp.add_argument("--out", required=True, help="CSV output path")
    sp.add_argument("--meta", default=None,
                    help="metadata JSON path (default <out>.meta.json)")
    sp.set_defaults(func=_cmd_trajectories)

    sp = sub.add_parser("correlators", help="finite-xi correlators vs the "
                                            "limit")
    add_common(sp)
    sp.add_argument("--spec", required=True,
                    help="JSON file listing [f, g] channels per factor")
    sp.add_argument("--xis", required=True,
                    help="comma-separated decreasing xi values")
    sp.add_argument("--t", type=float, required=True, help="time horizon")
    sp.add_argument("--tol", type=float, default=5e-2)
    sp.add_argument("--out", required=True, help="JSON report path")
    sp.set_defaults(func=_cmd_correlators)

    sp = sub.add_parser("fock-verify", help="truncated Fock-space check "
                                            "battery")
    add_common(sp, model=False, seed=True)
    sp.add_argument("--modes", type=int, default=2)
    sp.add_argument("--n-max", type=int, default=8)
    sp.add_argument("--out", default=None, help="JSON report path")
    sp.set_defaults(func=_cmd_fock_verify)

    sp = sub.add_parser("verify-all", help="full end-to-end check battery")
    add_common(sp, seed=True, threads=True)
    sp.add_argument("--out", default=None, help="JSON report path")
    sp.set_defaults(func=_cmd_verify_all)

    return p


def _manifest_path(args) -> str:
    if getattr(args, "manifest", None):
        return args.manifest
    out = getattr(args, "out", None)
    if out:
        return out + ".manifest.json"
    return "dilutegas-manifest.json"


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    t0 = time.monotonic()
    try:
        code, inputs, outputs, seed, extra = args.func(args)
    except (ModelFormatError, InvalidState, SingularTMatrix,
            TruncationTooSmall, OSError, ValueError, KeyError,
            json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        code, inputs, outputs, seed = 2, {}, {}, getattr(args, "seed", None)
        extra = {"error": str(e)}
    command = args.command if args.command != "model" else "model check"
    manifest = {
        "command": command,
        "argv": list(argv) if argv is not None else sys.argv[1:],
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "exit_code": code,
        "versions": {
            "dilutegas": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "timing": {
            "timestamp_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "wall_time_s": round(time.monotonic() - t0, 6),
        },
    }
    manifest.update(extra)
    try:
        _write_text(_manifest_path(args), _json_payload(manifest))
    except OSError as e:
        print(f"error: cannot write manifest: {e}", file=sys.stderr)
        code = max(code, 2)
    return code


if __name__ == "__main__":
    sys.exit(main())

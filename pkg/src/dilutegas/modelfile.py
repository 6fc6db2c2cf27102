"""Model definition files: schema-versioned JSON or TOML documents carrying
the system spectrum and coupling, the energy grid, per-bin form-factor
amplitudes, and the gas state. Also hosts the bundled demo models that the
command line accepts as ``demo:<name>``.

Complex numbers are stored as ``[re, im]`` pairs; matrices are row-major
nested lists. Syntax errors keep the decoder's line information; semantic
errors carry the dotted path of the offending element.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:          # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ModelFormatError
from .model import EnergyGrid, FormFactorSet, GasState, SystemModel

__all__ = [
    "SCHEMA_VERSION", "DEMO_NAMES", "ParsedModel", "parse_model",
    "load_model", "resolve_model", "demo_document", "document_from_parts",
]

SCHEMA_VERSION = 1
DEMO_NAMES = ("two-level", "null-coupling", "degenerate-gram")


@dataclass(frozen=True)
class ParsedModel:
    name: str
    schema_version: int
    system: SystemModel
    grid: EnergyGrid
    form_factors: FormFactorSet
    gas: GasState
    document: dict


def _fail(path, msg):
    raise ModelFormatError(f"{path}: {msg}")


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _number(node, path):
    if not _is_number(node):
        _fail(path, f"expected a number, got {type(node).__name__}")
    return float(node)


def _integer(node, path):
    if not isinstance(node, int) or isinstance(node, bool):
        _fail(path, f"expected an integer, got {type(node).__name__}")
    return node


def _section(doc, key, path, allowed):
    node = doc[key]
    if not isinstance(node, dict):
        _fail(f"{path}.{key}", "expected a table/object")
    for k in node:
        if k not in allowed:
            _fail(f"{path}.{key}.{k}",
                  f"unknown key (allowed: {', '.join(sorted(allowed))})")
    return node


def _require(node, key, path):
    if key not in node:
        _fail(path, f"missing required key '{key}'")
    return node[key]


def _complex_scalar(node, path):
    if (not isinstance(node, list) or len(node) != 2
            or not all(_is_number(x) for x in node)):
        _fail(path, "expected a complex number as a [re, im] pair")
    return complex(node[0], node[1])


def _complex_matrix(node, path, rows=None, cols=None):
    if not isinstance(node, list) or not node:
        _fail(path, "expected a non-empty row-major matrix")
    if rows is not None and len(node) != rows:
        _fail(path, f"expected {rows} rows, got {len(node)}")
    out = []
    width = None
    for i, row in enumerate(node):
        if not isinstance(row, list) or not row:
            _fail(f"{path}[{i}]", "expected a non-empty row")
        if width is None:
            width = len(row)
        elif len(row) != width:
            _fail(f"{path}[{i}]", f"row length {len(row)} != {width}")
        out.append([_complex_scalar(z, f"{path}[{i}][{k}]")
                    for k, z in enumerate(row)])
    if cols is not None and width != cols:
        _fail(path, f"expected {cols} columns, got {width}")
    return np.array(out, dtype=complex)


def _number_list(node, path, min_len=1):
    if not isinstance(node, list) or len(node) < min_len:
        _fail(path, f"expected a list of at least {min_len} numbers")
    return [_number(x, f"{path}[{i}]") for i, x in enumerate(node)]


def _parse_system(doc, source):
    sec = _section(doc, "system", source,
                   {"eigenvalues", "projector_labels", "coupling"})
    path = f"{source}.system"
    ev = _number_list(_require(sec, "eigenvalues", path), f"{path}.eigenvalues")
    if "projector_labels" in sec:
        raw = sec["projector_labels"]
        if not isinstance(raw, list) or not raw:
            _fail(f"{path}.projector_labels", "expected a non-empty list")
        labels = [_integer(x, f"{path}.projector_labels[{i}]")
                  for i, x in enumerate(raw)]
    else:
        labels = list(range(len(ev)))
    D = _complex_matrix(_require(sec, "coupling", path), f"{path}.coupling",
                        rows=len(labels), cols=len(labels))
    try:
        return SystemModel(np.array(ev), np.array(labels), D)
    except ValueError as e:
        _fail(path, str(e))


def _parse_grid(doc, source):
    sec = _section(doc, "grid", source, {"bins", "uniform"})
    path = f"{source}.grid"
    if ("bins" in sec) == ("uniform" in sec):
        _fail(path, "exactly one of 'bins' or 'uniform' is required")
    if "uniform" in sec:
        u = sec["uniform"]
        if not isinstance(u, dict):
            _fail(f"{path}.uniform", "expected a table/object")
        for k in u:
            if k not in {"lo", "hi", "count", "multiplicity"}:
                _fail(f"{path}.uniform.{k}", "unknown key")
        lo = _number(_require(u, "lo", f"{path}.uniform"), f"{path}.uniform.lo")
        hi = _number(_require(u, "hi", f"{path}.uniform"), f"{path}.uniform.hi")
        count = _integer(_require(u, "count", f"{path}.uniform"),
                         f"{path}.uniform.count")
        mult = _integer(u.get("multiplicity", 1), f"{path}.uniform.multiplicity")
        if count < 1:
            _fail(f"{path}.uniform.count", "need at least one bin")
        if not lo < hi:
            _fail(f"{path}.uniform", f"lo={lo:g} must be < hi={hi:g}")
        try:
            return EnergyGrid.uniform(lo, hi, count, multiplicity=mult)
        except ValueError as e:
            _fail(f"{path}.uniform", str(e))
    bins = sec["bins"]
    if not isinstance(bins, list) or not bins:
        _fail(f"{path}.bins", "expected a non-empty list of bins")
    centers, widths, mults = [], [], []
    for i, b in enumerate(bins):
        bpath = f"{path}.bins[{i}]"
        if not isinstance(b, dict):
            _fail(bpath, "expected a table/object")
        for k in b:
            if k not in {"center", "width", "multiplicity"}:
                _fail(f"{bpath}.{k}", "unknown key")
        centers.append(_number(_require(b, "center", bpath), f"{bpath}.center"))
        widths.append(_number(_require(b, "width", bpath), f"{bpath}.width"))
        mults.append(_integer(b.get("multiplicity", 1), f"{bpath}.multiplicity"))
    try:
        return EnergyGrid(np.array(centers), np.array(widths), np.array(mults))
    except ValueError as e:
        _fail(f"{path}.bins", str(e))


def _parse_form_factors(doc, grid, source):
    sec = _section(doc, "form_factors", source, {"amplitudes"})
    path = f"{source}.form_factors"
    raw = _require(sec, "amplitudes", path)
    if not isinstance(raw, list):
        _fail(f"{path}.amplitudes", "expected one amplitude matrix per bin")
    if len(raw) != grid.n_bins:
        _fail(f"{path}.amplitudes",
              f"{len(raw)} entries for a grid with {grid.n_bins} bins")
    amps = []
    for j, a in enumerate(raw):
        amps.append(_complex_matrix(
            a, f"{path}.amplitudes[{j}]",
            rows=2, cols=int(grid.multiplicities[j])))
    try:
        ff = FormFactorSet(tuple(amps))
        ff.check_against(grid)
        return ff
    except ValueError as e:
        _fail(f"{path}.amplitudes", str(e))


def _parse_gas(doc, grid, source):
    sec = _section(doc, "gas", source, {"fugacity", "beta", "weights", "empty"})
    path = f"{source}.gas"
    modes = [k for k in ("beta", "weights", "empty") if k in sec]
    if len(modes) != 1:
        _fail(path, "exactly one of 'beta', 'weights', or 'empty' is required")
    if "empty" in sec:
        if sec["empty"] is not True:
            _fail(f"{path}.empty", "only 'empty = true' is meaningful")
        if "fugacity" in sec and _number(sec["fugacity"], f"{path}.fugacity") != 0.0:
            _fail(f"{path}.fugacity", "an empty gas has fugacity 0")
        return GasState.empty(grid)
    xi = _number(_require(sec, "fugacity", path), f"{path}.fugacity")
    try:
        if "beta" in sec:
            beta = _number(sec["beta"], f"{path}.beta")
            return GasState.gibbs(grid, beta=beta, fugacity=xi)
        raw = sec["weights"]
        if not isinstance(raw, list) or len(raw) != grid.n_bins:
            _fail(f"{path}.weights",
                  f"expected one weight matrix per bin ({grid.n_bins})")
        ws = []
        for j, w in enumerate(raw):
            d = int(grid.multiplicities[j])
            ws.append(_complex_matrix(w, f"{path}.weights[{j}]", rows=d, cols=d))
        gas = GasState(xi, tuple(ws))
        gas.check_against(grid)
        return gas
    except ValueError as e:
        _fail(path, str(e))


def parse_model(doc, source="<memory>") -> ParsedModel:
    """Validate a decoded document and build the model objects. Raises
    ModelFormatError naming the offending element."""
    if not isinstance(doc, dict):
        _fail(source, "top level must be a table/object")
    allowed = {"schema_version", "name", "system", "grid", "form_factors", "gas"}
    for k in doc:
        if k not in allowed:
            _fail(f"{source}.{k}",
                  f"unknown key (allowed: {', '.join(sorted(allowed))})")
    version = _require(doc, "schema_version", source)
    version = _integer(version, f"{source}.schema_version")
    if version != SCHEMA_VERSION:
        _fail(f"{source}.schema_version",
              f"unsupported version {version} (supported: {SCHEMA_VERSION})")
    name = doc.get("name", "")
    if not isinstance(name, str):
        _fail(f"{source}.name", "expected a string")
    for key in ("system", "grid", "form_factors", "gas"):
        _require(doc, key, source)
    system = _parse_system(doc, source)
    grid = _parse_grid(doc, source)
    ff = _parse_form_factors(doc, grid, source)
    gas = _parse_gas(doc, grid, source)
    return ParsedModel(name=name, schema_version=version, system=system,
                       grid=grid, form_factors=ff, gas=gas, document=doc)


def load_model(path) -> ParsedModel:
    """Read a .json or .toml model file."""
    path = str(path)
    if path.endswith(".json"):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelFormatError(
                f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
        except OSError as e:
            raise ModelFormatError(f"{path}: {e.strerror or e}") from e
    elif path.endswith(".toml"):
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ModelFormatError(f"{path}: {e}") from e
        except OSError as e:
            raise ModelFormatError(f"{path}: {e.strerror or e}") from e
    else:
        raise ModelFormatError(
            f"{path}: unsupported extension (expected .json or .toml)")
    return parse_model(doc, source=path)


def resolve_model(spec: str) -> ParsedModel:
    """Accepts either a file path or ``demo:<name>``."""
    if spec.startswith("demo:"):
        name = spec[len("demo:"):]
        return parse_model(demo_document(name), source=spec)
    return load_model(spec)


def _pair(z):
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _matrix_doc(M):
    return [[_pair(z) for z in row] for row in np.asarray(M)]


def document_from_parts(name, system, grid, ff, gas) -> dict:
    """JSON-ready document (explicit per-bin weights) for the given parts."""
    return {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "system": {
            "eigenvalues": [float(x) for x in system.eigenvalues],
            "projector_labels": [int(x) for x in system.projector_labels],
            "coupling": _matrix_doc(system.coupling),
        },
        "grid": {
            "bins": [
                {"center": float(c), "width": float(w), "multiplicity": int(m)}
                for c, w, m in zip(grid.centers, grid.widths,
                                   grid.multiplicities)
            ],
        },
        "form_factors": {
            "amplitudes": [_matrix_doc(a) for a in ff.amplitudes],
        },
        "gas": {
            "fugacity": float(gas.fugacity),
            "weights": [_matrix_doc(w) for w in gas.weights],
        },
    }


def _demo_profiles(grid, parallel):
    """Multiplicity-2 amplitude rows from two Gaussian envelopes; the
    parallel variant makes v1 a multiple of v0 so every Gram is rank 1."""
    E = grid.centers
    a0 = np.exp(-((E - 0.95) ** 2) / (2 * 0.55 ** 2))
    a1 = np.exp(-((E - 1.15) ** 2) / (2 * 0.6 ** 2)) * (0.8 + 0.3 * np.sin(E))
    out = []
    for j in range(grid.n_bins):
        v0 = [a0[j], 0.3 * a1[j]]
        v1 = [0.7 * v for v in v0] if parallel else [0.2 * a0[j], a1[j]]
        out.append([[[float(x), 0.0] for x in v0],
                    [[float(x), 0.0] for x in v1]])
    return out


def demo_document(name: str) -> dict:
    """Bundled demo models: 'two-level' (Gaussian profiles, Gibbs gas),
    'null-coupling' (D = 0), 'degenerate-gram' (parallel profiles, rank-1
    Gram at every bin)."""
    if name not in DEMO_NAMES:
        raise ModelFormatError(
            f"demo:{name}: unknown demo (available: {', '.join(DEMO_NAMES)})")
    grid = EnergyGrid.uniform(0.3, 1.9, 16, multiplicity=2)
    null = name == "null-coupling"
    d = 0.0 if null else 0.5
    return {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "system": {
            "eigenvalues": [0.0, 1.0],
            "coupling": [[[0.0, 0.0], [d, 0.0]], [[d, 0.0], [0.0, 0.0]]],
        },
        "grid": {
            "uniform": {"lo": 0.3, "hi": 1.9, "count": 16, "multiplicity": 2},
        },
        "form_factors": {
            "amplitudes": _demo_profiles(grid, parallel=name == "degenerate-gram"),
        },
        "gas": {"fugacity": 0.2, "beta": 1.0},
    }

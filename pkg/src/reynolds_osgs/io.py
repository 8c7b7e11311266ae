"""Run configuration files and result export.

Configuration files are INI-style with fixed sections and keys; anything
unrecognized is rejected so that a config file fully documents a run.  All
floats are written with 17 significant digits, which round-trips doubles.
"""
from __future__ import annotations

import ast
import configparser
import csv
import io
import math
import operator
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .mesh import StructuredMesh
from .model import ModelConfig
from .solver import IterationTrace, SolverConfig
from .verification import CASE_ALIASES, CASE_IDS, get_case

FLOAT_FMT = "%.17g"
EXPORT_FORMATS = ("csv", "vtk")


class ConfigError(ValueError):
    pass


def fmt(value: float) -> str:
    return FLOAT_FMT % value


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """Parse a float literal or a small arithmetic expression in ``pi``, e.g. ``7*pi/9``."""

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise ValueError(text)

    try:
        return ev(ast.parse(text.strip(), mode="eval").body)
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_MODEL_KEYS = {
    "zeta": parse_number, "x_a": parse_number, "u_bar": parse_number, "c1": parse_number, "c2": parse_number,
    "beta": parse_number, "stabilization_mode": str.strip, "shock_capturing": _parse_bool,
    "x_min": parse_number, "x_max": parse_number, "y_min": parse_number, "y_max": parse_number,
}
_SOLVER_KEYS = {
    "picard_warmup": int, "max_iterations": int, "rel_tolerance": parse_number, "abs_tolerance": parse_number,
    "initial_guess_value": parse_number, "linearization": str.strip,
}
_MESH_KEYS = {"nx": int, "ny": int, "base_nx": int, "base_ny": int, "levels": int}
_SCHEMA = {
    "case": {"name": str.strip},
    "model": _MODEL_KEYS,
    "mesh": _MESH_KEYS,
    "solver": _SOLVER_KEYS,
    "output": {"directory": str.strip, "formats": str.strip},
}


@dataclass
class RunConfig:
    model: ModelConfig
    solver: SolverConfig = field(default_factory=SolverConfig)
    case: Optional[str] = None
    nx: Optional[int] = None
    ny: Optional[int] = None
    base_nx: Optional[int] = None
    base_ny: Optional[int] = None
    levels: Optional[int] = None
    output_dir: Path = Path("output")
    formats: tuple[str, ...] = ("csv",)

    @property
    def has_series(self) -> bool:
        return self.levels is not None

    def to_ini(self) -> str:
        """Fully resolved configuration in the same format :func:`parse_config` reads."""
        cp = configparser.ConfigParser()
        if self.case:
            cp["case"] = {"name": self.case}
        m = self.model
        cp["model"] = {
            "zeta": fmt(m.zeta), "x_a": fmt(m.x_a), "u_bar": fmt(m.u_bar), "c1": fmt(m.c1), "c2": fmt(m.c2),
            "beta": fmt(m.beta), "stabilization_mode": m.stabilization_mode,
            "shock_capturing": str(m.shock_capturing).lower(),
            "x_min": fmt(m.x_range[0]), "x_max": fmt(m.x_range[1]),
            "y_min": fmt(m.y_range[0]), "y_max": fmt(m.y_range[1]),
        }
        mesh = {k: str(getattr(self, k)) for k in _MESH_KEYS if getattr(self, k) is not None}
        cp["mesh"] = mesh
        s = self.solver
        cp["solver"] = {k: (fmt(v) if isinstance(v, float) else str(v)) for k, v in asdict(s).items()}
        cp["output"] = {"directory": str(self.output_dir), "formats": ", ".join(self.formats)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue().strip() + "\n"


def _read_sections(text: str, source: str) -> dict[str, dict[str, object]]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    parsed: dict[str, dict[str, object]] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        schema = _SCHEMA[section]
        parsed[section] = {}
        for key, raw in cp.items(section):
            if key not in schema:
                raise ConfigError(f"{source}: unknown key '{key}' in section [{section}]")
            try:
                parsed[section][key] = schema[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: invalid value for '{section}.{key}': {exc}") from exc
    return parsed


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a run configuration."""
    sec = _read_sections(text, source)
    case = sec.get("case", {}).get("name")
    if case is not None:
        case = CASE_ALIASES.get(case, case)
        if case not in CASE_IDS:
            raise ConfigError(f"{source}: invalid value for 'case.name': {case!r} (expected one of {CASE_IDS})")

    model_kw = dict(sec.get("model", {}))
    x_range = (model_kw.pop("x_min", 0.0), model_kw.pop("x_max", 2.0 * math.pi))
    y_range = (model_kw.pop("y_min", -1.0), model_kw.pop("y_max", 1.0))
    try:
        if case is not None:
            model = get_case(case, x_range=x_range, y_range=y_range, **model_kw).config
        else:
            model = ModelConfig(x_range=x_range, y_range=y_range, **model_kw)
        solver = SolverConfig(**sec.get("solver", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    mesh = sec.get("mesh", {})
    if not mesh:
        raise ConfigError(f"{source}: section [mesh] is required")
    if ("nx" in mesh) != ("ny" in mesh):
        raise ConfigError(f"{source}: 'mesh.nx' and 'mesh.ny' must be given together")
    series = [k in mesh for k in ("base_nx", "base_ny", "levels")]
    if any(series) and not all(series):
        raise ConfigError(f"{source}: 'mesh.base_nx', 'mesh.base_ny' and 'mesh.levels' must be given together")
    if "nx" not in mesh and not all(series):
        raise ConfigError(f"{source}: [mesh] needs nx/ny or base_nx/base_ny/levels")
    for key, value in mesh.items():
        if value < 1:
            raise ConfigError(f"{source}: invalid value for 'mesh.{key}': must be positive")

    out = sec.get("output", {})
    formats = tuple(f.strip() for f in str(out.get("formats", "csv")).split(",") if f.strip())
    for f in formats:
        if f not in EXPORT_FORMATS:
            raise ConfigError(f"{source}: invalid value for 'output.formats': {f!r}")
    return RunConfig(model=model, solver=solver, case=case, output_dir=Path(out.get("directory", "output")),
                     formats=formats, **mesh)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def _header(provenance: str) -> str:
    return "".join(f"# {line}".rstrip() + "\n" for line in provenance.splitlines())


def write_field_csv(path, mesh: StructuredMesh, u, xi, provenance: str = "") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(_header(provenance))
        fh.write(f"# nx = {mesh.nx}\n# ny = {mesh.ny}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "x", "y", "u", "xi"])
        for i, ((x, y), ui, xii) in enumerate(zip(mesh.nodes, u, xi)):
            w.writerow([i, fmt(x), fmt(y), fmt(ui), fmt(xii)])


@dataclass
class FieldData:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    xi: np.ndarray
    header: list[str]


def read_field_csv(path) -> FieldData:
    header, rows = [], []
    with Path(path).open(encoding="utf-8") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                header.append(line[1:].strip())
            else:
                lines.append(line)
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"node", "x", "y", "u", "xi"} <= set(reader.fieldnames):
        raise ValueError(f"{path}: not a field file (expected columns node,x,y,u,xi)")
    for row in reader:
        rows.append((int(row["node"]), float(row["x"]), float(row["y"]), float(row["u"]), float(row["xi"])))
    rows.sort()
    arr = np.array([r[1:] for r in rows], dtype=float).reshape(-1, 4)
    return FieldData(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], header)


def extract_line(data: FieldData, y_value: float):
    """Nodal ``(x, u)`` on the mesh line nearest to ``y_value``, sorted by x."""
    ys = np.unique(data.y)
    if not ys[0] <= y_value <= ys[-1]:
        raise ValueError(f"y = {y_value} lies outside [{ys[0]}, {ys[-1]}]")
    y_line = ys[np.argmin(np.abs(ys - y_value))]
    on_line = data.y == y_line
    order = np.argsort(data.x[on_line])
    return data.x[on_line][order], data.u[on_line][order]


def write_line_csv(fh, x, u) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x", "u"])
    for xi, ui in zip(x, u):
        w.writerow([fmt(xi), fmt(ui)])


def write_trace_csv(path, trace: IterationTrace, provenance: str = "") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(_header(provenance))
        fh.write(f"# converged = {str(trace.converged).lower()}\n")
        fh.write(f"# initial_residual = {fmt(trace.initial_residual)}\n")
        fh.write(f"# tolerance = {fmt(trace.tolerance)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "method", "residual", "update_norm"])
        for r in trace.records:
            w.writerow([r.index, r.method, fmt(r.residual), fmt(r.update_norm)])


def write_convergence_csv(path, rows, provenance: str = "") -> None:
    names = [f.name for f in fields(rows[0])] if rows else []
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(_header(provenance))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in rows:
            values = []
            for name in names:
                v = getattr(row, name)
                if v is None:
                    values.append("")
                elif isinstance(v, bool):
                    values.append(str(v).lower())
                elif isinstance(v, float):
                    values.append(fmt(v))
                else:
                    values.append(str(v))
            w.writerow(values)


def write_vtk(path, mesh: StructuredMesh, u, xi, title: str = "reynolds") -> None:
    """Legacy ASCII VTK structured grid with point data ``u`` and ``xi``."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET STRUCTURED_GRID\n")
        fh.write(f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1\n")
        fh.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            fh.write(f"{fmt(x)} {fmt(y)} 0\n")
        fh.write(f"POINT_DATA {mesh.n_nodes}\n")
        for name, values in (("u", u), ("xi", xi)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.writelines(f"{fmt(v)}\n" for v in values)

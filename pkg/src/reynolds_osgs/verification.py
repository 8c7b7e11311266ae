"""Manufactured solutions, error norms and the journal-bearing scenario."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mesh import StructuredMesh, build_mesh, evaluate_field, refinement_series, tabulate
from .model import ModelConfig, gap, strong_operator
from .solver import SolverConfig, estimate_rate, solve_nonlinear

CASE_IDS = ("smooth", "boundary_layer", "bearing")
CASE_ALIASES = {"1": "smooth", "2": "boundary_layer", "3": "bearing"}

# Steepness of the exponential layer at x = 2 pi in the boundary-layer case.
LAYER_RATE = 100.0


@dataclass(frozen=True)
class ExactSolution:
    """Separable field ``u = scale * A(x) B(y)`` with derivatives up to order two."""

    value: Callable
    grad: Callable
    second: Callable  # returns (u_xx, u_yy, u_xy)


def _smooth_parts(x):
    s, c = np.sin(x), np.cos(x)
    s2, c2 = np.sin(2 * x), np.cos(2 * x)
    A = (1 - c2) * s
    dA = 2 * s2 * s + (1 - c2) * c
    d2A = 4 * c2 * s + 4 * s2 * c - (1 - c2) * s
    return A, dA, d2A


def _layer_parts(x):
    # (e^{100 x / 2pi} - 1) / (e^100 - 1), shifted to avoid overflow.
    c = LAYER_RATE / (2 * np.pi)
    tail = np.exp(-LAYER_RATE)
    denom = 1.0 - tail
    e = np.exp(c * x - LAYER_RATE)
    ratio = (e - tail) / denom
    A = ratio - 1.0 + 0.5 * (np.cos(x / 2) + 1.0)
    dA = c * e / denom - 0.25 * np.sin(x / 2)
    d2A = c * c * e / denom - 0.125 * np.cos(x / 2)
    return A, dA, d2A


def _y_parts(y):
    return 1 + np.cos(np.pi * y), -np.pi * np.sin(np.pi * y), -np.pi**2 * np.cos(np.pi * y)


def _separable(x_parts, scale) -> ExactSolution:
    def value(x, y):
        return scale * x_parts(np.asarray(x, float))[0] * _y_parts(np.asarray(y, float))[0]

    def grad(x, y):
        A, dA, _ = x_parts(np.asarray(x, float))
        B, dB, _ = _y_parts(np.asarray(y, float))
        return scale * dA * B, scale * A * dB

    def second(x, y):
        A, dA, d2A = x_parts(np.asarray(x, float))
        B, dB, d2B = _y_parts(np.asarray(y, float))
        return scale * d2A * B, scale * A * d2B, scale * dA * dB

    return ExactSolution(value, grad, second)


@dataclass(frozen=True)
class ManufacturedCase:
    case_id: str
    config: ModelConfig
    exact: Optional[ExactSolution]

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    def forcing(self, x, y):
        return manufactured_forcing(self, x, y)

    @property
    def forcing_fn(self):
        return self.forcing if self.has_exact else None


def bearing_case_config(**overrides) -> ModelConfig:
    """Journal bearing: eccentricity 0.6, minimum gap at 140 degrees, no forcing."""
    params = dict(zeta=0.6, x_a=7.0 * np.pi / 9.0, u_bar=0.98)
    params.update(overrides)
    return ModelConfig(**params)


def get_case(case_id: str, **overrides) -> ManufacturedCase:
    """Build one of the three reference problems; ``overrides`` go to :class:`ModelConfig`."""
    case_id = CASE_ALIASES.get(str(case_id), str(case_id))
    if case_id == "smooth":
        return ManufacturedCase(case_id, ModelConfig(**{"zeta": 0.5, "x_a": np.pi, "u_bar": 0.98, **overrides}),
                                _separable(_smooth_parts, 1.0 / 6.0))
    if case_id == "boundary_layer":
        return ManufacturedCase(case_id, ModelConfig(**{"zeta": 0.5, "x_a": np.pi, "u_bar": 0.98, **overrides}),
                                _separable(_layer_parts, 0.25))
    if case_id == "bearing":
        return ManufacturedCase(case_id, bearing_case_config(**overrides), None)
    raise ValueError(f"unknown case {case_id!r}; expected one of {CASE_IDS}")


def _require_exact(case: ManufacturedCase) -> ExactSolution:
    if case.exact is None:
        raise ValueError(f"case {case.case_id!r} has no exact solution")
    return case.exact


def exact_u(case: ManufacturedCase, x, y):
    return _require_exact(case).value(x, y)


def manufactured_forcing(case: ManufacturedCase, x, y):
    """Forcing ``f`` that makes the exact field solve the boundary value problem.

    Since the equation reads ``L(u, u) = f - dH/dx``, ``f = L(u, u) + dH/dx``.
    """
    ex = _require_exact(case)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    u = ex.value(x, y)
    ux, uy = ex.grad(x, y)
    uxx, uyy, _ = ex.second(x, y)
    _, dH = gap(x, case.config)
    return strong_operator(u, ux, uy, uxx, uyy, x, case.config) + dH


def _norms(u_h, case, mesh, n_gauss=3):
    ex = _require_exact(case)
    tab = tabulate(mesh, n_gauss)
    fld = evaluate_field(mesh, u_h, tab)
    ue = ex.value(tab.x, tab.y)
    gx, gy = ex.grad(tab.x, tab.y)
    return tab, fld, ue, gx, gy


def error_l2(u_h, case: ManufacturedCase, mesh: StructuredMesh) -> float:
    """Relative error ``||u - u_h|| / ||u||`` in L2, 3x3 Gauss per element."""
    tab, fld, ue, _, _ = _norms(u_h, case, mesh)
    err = np.sum(tab.W * (ue - fld.u) ** 2)
    ref = np.sum(tab.W * ue**2)
    return float(np.sqrt(err / ref))


def error_h1_semi(u_h, case: ManufacturedCase, mesh: StructuredMesh) -> float:
    """Relative H1-seminorm error, 3x3 Gauss per element."""
    tab, fld, _, gx, gy = _norms(u_h, case, mesh)
    err = np.sum(tab.W * ((gx - fld.ux) ** 2 + (gy - fld.uy) ** 2))
    ref = np.sum(tab.W * (gx**2 + gy**2))
    return float(np.sqrt(err / ref))


def line_profile(mesh: StructuredMesh, values, y_value: float):
    """Nodal ``(x, u)`` along the mesh line closest to ``y = y_value``."""
    y0, y1 = mesh.y_range
    if not y0 <= y_value <= y1:
        raise ValueError(f"y = {y_value} lies outside [{y0}, {y1}]")
    j = int(np.argmin(np.abs(mesh.y_stations - y_value)))
    return mesh.x_stations.copy(), mesh.node_grid(values)[j].copy()


@dataclass
class ConvergenceRow:
    level: int
    nx: int
    ny: int
    h: float
    error_l2: float
    order: Optional[float]
    iterations: int
    converged: bool
    wall_time: float


def convergence_study(
    case: ManufacturedCase,
    base: StructuredMesh = None,
    levels: int = 6,
    solver_config: SolverConfig = SolverConfig(),
    config: Optional[ModelConfig] = None,
) -> list[ConvergenceRow]:
    """Solve on a uniformly refined series and tabulate errors and observed orders."""
    config = case.config if config is None else config
    base = build_mesh(3, 1, config.x_range, config.y_range) if base is None else base
    rows: list[ConvergenceRow] = []
    for level, mesh in enumerate(refinement_series(base, levels)):
        start = time.perf_counter()
        sol = solve_nonlinear(mesh, config, solver_config, case.forcing)
        elapsed = time.perf_counter() - start
        err = error_l2(sol.u, case, mesh)
        order = None
        if rows:
            hs = [r.h for r in rows] + [mesh.h]
            errs = [r.error_l2 for r in rows] + [err]
            order = estimate_rate(errs, h=hs, last=2)
        rows.append(ConvergenceRow(level, mesh.nx, mesh.ny, mesh.h, err, order, sol.trace.iterations,
                                   sol.trace.converged, elapsed))
    return rows

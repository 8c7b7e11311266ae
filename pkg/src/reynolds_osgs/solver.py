"""Hybrid Picard/Newton driver and convergence-rate estimation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    Forcing,
    SystemBlocks,
    apply_dirichlet,
    assemble_newton,
    assemble_picard,
    condense,
    recover_projection,
)
from .mesh import StructuredMesh
from .model import ModelConfig

log = logging.getLogger(__name__)

LINEARIZATIONS = ("picard_only", "hybrid")

# A Newton step that inflates the residual by more than this is undone.
NEWTON_BLOWUP_FACTOR = 1e3


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    picard_warmup: int = 4
    max_iterations: int = 50
    rel_tolerance: float = 1e-10
    abs_tolerance: float = 1e-12
    initial_guess_value: float = 1.0
    linearization: str = "hybrid"

    def __post_init__(self):
        if self.rel_tolerance <= 0 or self.abs_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 <= self.picard_warmup <= self.max_iterations:
            raise ValueError("picard_warmup must lie in [0, max_iterations]")
        if self.linearization not in LINEARIZATIONS:
            raise ValueError(f"linearization must be one of {LINEARIZATIONS}, got {self.linearization!r}")


@dataclass(frozen=True)
class IterationRecord:
    index: int
    method: str  # "picard", "newton" or "picard-fallback"
    residual: float
    update_norm: float


@dataclass
class IterationTrace:
    """Residual history; ``initial_residual`` belongs to the starting guess."""

    initial_residual: float = float("nan")
    tolerance: float = float("nan")
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.residual for r in self.records])

    def methods(self) -> list[str]:
        return [r.method for r in self.records]


@dataclass
class Solution:
    u: np.ndarray
    xi: np.ndarray
    trace: IterationTrace
    blocks: Optional[SystemBlocks] = None

    def __iter__(self):
        # Unpacks as (u, xi, trace).
        return iter((self.u, self.xi, self.trace))


def linear_solve(A, b) -> np.ndarray:
    """Direct sparse LU solve; raises :class:`SolverError` on singular systems."""
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(0)
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite values")
    return x


def system_residual(mesh: StructuredMesh, blocks: SystemBlocks, u: np.ndarray) -> float:
    """``||F - A u||_2`` over the free nodes of a Picard-assembled system."""
    A, b = condense(blocks)
    A_ff, b_f = apply_dirichlet(A, b, mesh.boundary_nodes)
    u_f = u[mesh.interior_nodes]
    return float(np.linalg.norm(b_f - A_ff @ u_f))


def initial_guess(mesh: StructuredMesh, value: float) -> np.ndarray:
    u = np.full(mesh.n_nodes, float(value))
    u[mesh.boundary_nodes] = 0.0
    return u


def _step(mesh, blocks, u, iteration):
    A, b = condense(blocks)
    A_ff, b_f = apply_dirichlet(A, b, mesh.boundary_nodes)
    try:
        u_free = linear_solve(A_ff, b_f)
    except SolverError as exc:
        raise SolverError(f"iteration {iteration}: {exc}") from exc
    u_new = np.zeros_like(u)
    u_new[mesh.interior_nodes] = u_free
    return u_new


def solve_nonlinear(
    mesh: StructuredMesh,
    config: ModelConfig,
    solver_config: SolverConfig = SolverConfig(),
    forcing: Forcing = None,
    u0: Optional[np.ndarray] = None,
) -> Solution:
    """Solve the stabilized nonlinear problem.

    Steps ``1 .. picard_warmup`` use the fixed-point linearization, later
    steps Newton (for ``linearization="hybrid"``).  Each record holds the
    Picard-system residual of the iterate the step produced.  Running out of
    iterations is reported through ``trace.converged``, not an exception.
    """
    sc = solver_config
    u = initial_guess(mesh, sc.initial_guess_value) if u0 is None else np.array(u0, dtype=float)
    u[mesh.boundary_nodes] = 0.0

    trace = IterationTrace()
    picard = assemble_picard(mesh, u, config, forcing)
    residual = system_residual(mesh, picard, u)
    trace.initial_residual = residual
    f_norm = float(np.linalg.norm(picard.F[mesh.interior_nodes]))
    tolerance = max(sc.rel_tolerance * max(f_norm, residual), sc.abs_tolerance)
    trace.tolerance = tolerance
    if residual <= tolerance:
        trace.converged = True
        return Solution(u, recover_projection(picard, u), trace, picard)

    for it in range(1, sc.max_iterations + 1):
        use_newton = sc.linearization == "hybrid" and it > sc.picard_warmup
        method = "newton" if use_newton else "picard"
        blocks = assemble_newton(mesh, u, config, forcing) if use_newton else picard
        u_new = _step(mesh, blocks, u, it)
        picard_new = assemble_picard(mesh, u_new, config, forcing)
        residual_new = system_residual(mesh, picard_new, u_new)

        if use_newton and not residual_new <= NEWTON_BLOWUP_FACTOR * residual:
            log.debug("iteration %d: Newton residual %.3e rejected, falling back to Picard", it, residual_new)
            method = "picard-fallback"
            u_new = _step(mesh, picard, u, it)
            picard_new = assemble_picard(mesh, u_new, config, forcing)
            residual_new = system_residual(mesh, picard_new, u_new)

        update = float(np.linalg.norm(u_new - u))
        u, picard, residual = u_new, picard_new, residual_new
        trace.records.append(IterationRecord(it, method, residual, update))
        log.debug("iteration %d (%s): residual %.3e, update %.3e", it, method, residual, update)
        if not np.isfinite(residual):
            break
        if residual <= tolerance:
            trace.converged = True
            break

    return Solution(u, recover_projection(picard, u), trace, picard)


def estimate_rate(values, h=None, last: int = 3) -> float:
    """Observed convergence order.

    With ``h`` given, ``values`` are errors on a mesh series and the result is
    the least-squares slope of ``log(error)`` against ``log(h)`` over the last
    ``last`` meshes.  Without ``h``, ``values`` is a residual history and the
    result is the slope of ``log r_(i+1)`` against ``log r_i`` fitted through
    the last ``last`` consecutive pairs (1 for linear, 2 for quadratic
    convergence); this needs at least ``last + 1`` entries.
    """
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise ValueError("rate estimation needs strictly positive, finite values")
    if h is not None:
        h = np.asarray(h, dtype=float)
        if h.shape != values.shape:
            raise ValueError("h and errors must have equal length")
        if len(values) < 2:
            raise ValueError("need at least two meshes to estimate an order")
        n = min(last, len(values))
        return float(np.polyfit(np.log(h[-n:]), np.log(values[-n:]), 1)[0])
    if len(values) < 4:
        raise ValueError("need at least four residuals to estimate a rate")
    logs = np.log(values)
    n = min(last, len(values) - 1)
    xs, ys = logs[-n - 1 : -1], logs[-n:]
    return float(np.polyfit(xs, ys, 1)[0])

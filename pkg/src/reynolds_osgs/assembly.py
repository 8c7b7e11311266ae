"""Element assembly of the linearized, stabilized Reynolds system.

One call produces the blocks of

    [ K  -P_tau ] [ u  ]   [ F ]
    [ P  -M     ] [ xi ] = [ 0 ]

where ``xi`` is the projection of the convective term onto the finite
element space.  ``M`` is the row-sum lumped Gram matrix, so ``xi`` is
eliminated cheaply by :func:`condense`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .mesh import StructuredMesh, element_geometry, evaluate_field, shape_functions, tabulate
from .model import (
    ModelConfig,
    coefficients,
    forcing_rhs,
    newton_coefficients,
    strong_operator,
)

Forcing = Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]]


class AssemblyError(ValueError):
    pass


@dataclass
class ShockCaptureState:
    """Element-wise shock-capturing quantities, lagged to one iterate."""

    residual_ratio: np.ndarray  # normalized residual norm R*_K
    peclet: np.ndarray  # P_K
    sigma: np.ndarray
    tau_s: np.ndarray
    alpha: float


@dataclass
class SystemBlocks:
    K: sp.csr_matrix
    F: np.ndarray
    M: np.ndarray
    P_tau: Optional[sp.csr_matrix] = None
    P: Optional[sp.csr_matrix] = None
    shock: Optional[ShockCaptureState] = None

    @property
    def n(self) -> int:
        return self.K.shape[0]


@lru_cache(maxsize=64)
def _pattern(nx, ny, n_nodes, elements_bytes):
    elements = np.frombuffer(elements_bytes, dtype=np.int64).reshape(-1, 4)
    rows = np.repeat(elements, 4, axis=1).ravel()
    cols = np.tile(elements, (1, 4)).ravel()
    keys = rows * n_nodes + cols
    unique, inverse = np.unique(keys, return_inverse=True)
    indices = (unique % n_nodes).astype(np.int32)
    indptr = np.searchsorted(unique // n_nodes, np.arange(n_nodes + 1)).astype(np.int32)
    return inverse, indices, indptr


def scatter_matrix(mesh: StructuredMesh, local: np.ndarray) -> sp.csr_matrix:
    """Sum element matrices ``(nel, 4, 4)`` into a CSR matrix on the mesh pattern."""
    elements = np.ascontiguousarray(mesh.elements, dtype=np.int64)
    inverse, indices, indptr = _pattern(mesh.nx, mesh.ny, mesh.n_nodes, elements.tobytes())
    data = np.bincount(inverse, weights=local.ravel(), minlength=len(indices))
    n = mesh.n_nodes
    return sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=(n, n))


def scatter_vector(mesh: StructuredMesh, local: np.ndarray) -> np.ndarray:
    return np.bincount(mesh.elements.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def _check_field(mesh: StructuredMesh, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise AssemblyError(f"field has shape {u.shape}, mesh has {mesh.n_nodes} nodes")
    return u


def _forcing_values(forcing: Forcing, x, y) -> np.ndarray:
    if forcing is None:
        return np.zeros_like(x)
    return np.broadcast_to(np.asarray(forcing(x, y), dtype=float), x.shape)


def lumped_gram(mesh: StructuredMesh) -> np.ndarray:
    """Row-sum lumped Gram matrix, ``M_i = integral of N_i``."""
    tab = tabulate(mesh, 2)
    return scatter_vector(mesh, np.einsum("eq,qi->ei", tab.W, tab.N))


def _grad_grad(tab) -> np.ndarray:
    return np.einsum("eqi,eqj->eqij", tab.dNdx, tab.dNdx) + np.einsum("eqi,eqj->eqij", tab.dNdy, tab.dNdy)


def _osgs_local(tab, coef):
    W = tab.W
    dNx, N = tab.dNdx, tab.N
    wta = W * coef.tau * coef.a_x
    ks = np.einsum("eq,eqi,eqj->eij", wta * coef.a_x, dNx, dNx)
    p_tau = np.einsum("eq,eqi,qj->eij", wta, dNx, N)
    p = np.einsum("eq,qi,eqj->eij", W * coef.a_x, N, dNx)
    return ks, p_tau, p


def assemble_osgs_blocks(mesh: StructuredMesh, u_prev, config: ModelConfig):
    """Stabilization blocks ``(K_S, P_tau, P)`` with coefficients frozen at ``u_prev``.

    ``K_S`` discretizes ``(a.grad v, tau a.grad u)``, ``P_tau`` couples the
    projection through ``(a.grad v, tau xi)`` and ``P`` is ``(eta, a.grad u)``.
    """
    u_prev = _check_field(mesh, u_prev)
    tab = tabulate(mesh, 2)
    fld = evaluate_field(mesh, u_prev, tab)
    coef = coefficients(fld.u, fld.ux, tab.x, tab.y, tab.h[:, None], config)
    return tuple(scatter_matrix(mesh, block) for block in _osgs_local(tab, coef))


def _assemble(mesh, u_prev, config, forcing, newton):
    u_prev = _check_field(mesh, u_prev)
    tab = tabulate(mesh, 2)
    fld = evaluate_field(mesh, u_prev, tab)
    coef = coefficients(fld.u, fld.ux, tab.x, tab.y, tab.h[:, None], config)
    W, N, dNx, dNy = tab.W, tab.N, tab.dNdx, tab.dNdy
    gg = _grad_grad(tab)

    fhat = forcing_rhs(tab.x, tab.y, _forcing_values(forcing, tab.x, tab.y), config)
    Fe = np.einsum("eq,qi->ei", W * fhat, N)

    if newton:
        k, dk, psi, dpsi, _, chi = newton_coefficients(fld.u, fld.ux, tab.x, tab.y, config)
        grad_v_grad_u = dNx * fld.ux[..., None] + dNy * fld.uy[..., None]
        Ke = (
            np.einsum("eq,eqij->eij", W * k, gg)
            + np.einsum("eq,eqi,qj->eij", W * dk, grad_v_grad_u, N)
            - np.einsum("eq,qi,eqj->eij", W * coef.H * dpsi, N, dNx)
            - np.einsum("eq,qi,qj->eij", W * chi, N, N)
        )
        Fe = (
            Fe
            + np.einsum("eq,eqi->ei", W * dk * fld.u, grad_v_grad_u)
            - np.einsum("eq,qi->ei", W * chi * fld.u, N)
            + np.einsum("eq,qi->ei", W * psi * coef.dH_dx, N)
        )
    else:
        Ke = (
            np.einsum("eq,eqij->eij", W * coef.k, gg)
            - np.einsum("eq,qi,eqj->eij", W * coef.a_x, N, dNx)
            - np.einsum("eq,qi,qj->eij", W * coef.s, N, N)
        )

    P_tau = P = None
    mode = config.stabilization_mode
    if mode == "osgs":
        ks, p_tau, p = _osgs_local(tab, coef)
        Ke = Ke + ks
        P_tau = scatter_matrix(mesh, p_tau)
        P = scatter_matrix(mesh, p)
    elif mode == "artificial_diffusion":
        # (sign(a) dv/dx, h/2 d(a u)/dx); zero where a vanishes.
        scale = W * np.sign(coef.a_x) * 0.5 * tab.h[:, None]
        Ke = (
            Ke
            + np.einsum("eq,eqi,eqj->eij", scale * coef.a_x, dNx, dNx)
            + np.einsum("eq,eqi,qj->eij", scale * coef.s, dNx, N)
        )

    shock = None
    if config.shock_capturing:
        shock = shock_capturing_state(mesh, u_prev, config, forcing)
        Ke = Ke + shock.tau_s[:, None, None] * np.einsum("eq,eqij->eij", W, gg)

    M = scatter_vector(mesh, np.einsum("eq,qi->ei", W, N))
    return SystemBlocks(
        K=scatter_matrix(mesh, Ke), F=scatter_vector(mesh, Fe), M=M, P_tau=P_tau, P=P, shock=shock
    )


def assemble_picard(mesh: StructuredMesh, u_prev, config: ModelConfig, forcing: Forcing = None) -> SystemBlocks:
    """Fixed-point linearization: every coefficient frozen at ``u_prev``."""
    return _assemble(mesh, u_prev, config, forcing, newton=False)


def assemble_newton(mesh: StructuredMesh, u_prev, config: ModelConfig, forcing: Forcing = None) -> SystemBlocks:
    """Newton linearization of the Galerkin terms about ``u_prev``.

    Stabilization, artificial diffusion and shock capturing keep their
    fixed-point form, so ``F - K u_prev`` equals the Picard residual.
    """
    return _assemble(mesh, u_prev, config, forcing, newton=True)


def condense(blocks: SystemBlocks):
    """Eliminate the projection unknowns: ``A = K - P_tau M^-1 P``, ``b = F``."""
    if blocks.P_tau is None or blocks.P is None:
        return blocks.K, blocks.F
    if np.any(blocks.M <= 0.0):
        bad = np.flatnonzero(blocks.M <= 0.0)
        raise AssemblyError(f"non-positive lumped Gram entries at nodes {bad[:10].tolist()}")
    A = blocks.K - blocks.P_tau @ sp.diags(1.0 / blocks.M) @ blocks.P
    return A.tocsr(), blocks.F


def recover_projection(blocks: SystemBlocks, u) -> np.ndarray:
    """Projection ``xi = M^-1 P u`` of the convective term; zero without OSGS."""
    if blocks.P is None:
        return np.zeros(blocks.n)
    return (blocks.P @ np.asarray(u, dtype=float)) / blocks.M


def apply_dirichlet(A, b, boundary_nodes):
    """Remove homogeneous Dirichlet rows and columns; returns the free-node system."""
    n = A.shape[0]
    free = np.ones(n, dtype=bool)
    free[np.asarray(boundary_nodes, dtype=int)] = False
    A = sp.csr_matrix(A)
    return A[free][:, free].tocsr(), np.asarray(b, dtype=float)[free]


def free_nodes(n: int, boundary_nodes) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(boundary_nodes, dtype=int)] = False
    return np.flatnonzero(mask)


def strong_residual(u_field, mesh: StructuredMesh, element: int, quad_point, config: ModelConfig, forcing: Forcing = None):
    """Strong residual ``L(u_h, u_h) - f_hat`` of a nodal field at one reference point."""
    u_field = _check_field(mesh, u_field)
    point, grads, second, _ = element_geometry(mesh, element, quad_point)
    ue = u_field[mesh.elements[element]]
    values, _ = shape_functions(quad_point)
    u = values @ ue
    ux, uy = grads.T @ ue
    uxx, uyy = second[:, 0] @ ue, second[:, 1] @ ue
    x, y = point
    f = _forcing_values(forcing, np.array([x]), np.array([y]))[0]
    return float(strong_operator(u, ux, uy, uxx, uyy, x, config) - forcing_rhs(x, y, f, config))


def residual_at_points(mesh: StructuredMesh, u_field, config: ModelConfig, forcing: Forcing = None, n_gauss: int = 3):
    """Vectorized strong residual at every quadrature point, shape ``(nel, nq)``.

    Second derivatives ``u_xx`` and ``u_yy`` of a bilinear field vanish on
    axis-aligned rectangles.
    """
    tab = tabulate(mesh, n_gauss)
    fld = evaluate_field(mesh, _check_field(mesh, u_field), tab)
    zero = np.zeros_like(fld.u)
    f = _forcing_values(forcing, tab.x, tab.y)
    return strong_operator(fld.u, fld.ux, fld.uy, zero, zero, tab.x, config) - forcing_rhs(tab.x, tab.y, f, config)


def shock_capturing_state(mesh: StructuredMesh, u_prev, config: ModelConfig, forcing: Forcing = None) -> ShockCaptureState:
    """Residual-scaled isotropic diffusion ``tau_s = R*_K sigma_K`` for every element."""
    u_prev = _check_field(mesh, u_prev)
    tab = tabulate(mesh, 3)
    fld = evaluate_field(mesh, u_prev, tab)
    zero = np.zeros_like(fld.u)
    f = _forcing_values(forcing, tab.x, tab.y)
    fhat = forcing_rhs(tab.x, tab.y, f, config)
    residual = strong_operator(fld.u, fld.ux, fld.uy, zero, zero, tab.x, config) - fhat

    W = tab.W
    res_norm = np.sqrt(np.sum(W * residual**2, axis=1))
    f_norm = np.sqrt(np.sum(W * fhat**2, axis=1))
    u_norm = np.sqrt(np.sum(W * (fld.u**2 + fld.ux**2 + fld.uy**2), axis=1))
    f_total = f_norm.sum()
    alpha = float(u_norm.sum() / f_total) if f_total > 0.0 else 0.0

    denom = alpha * f_norm + u_norm
    ratio = np.divide(res_norm, denom, out=np.zeros_like(res_norm), where=denom > 0.0)

    # Diffusivity at the element centroid.
    centroid_u = u_prev[mesh.elements].mean(axis=1)
    centroid_x = mesh.nodes[mesh.elements, 0].mean(axis=1)
    k = newton_coefficients(centroid_u, 0.0, centroid_x, 0.0, config)[0]

    h = tab.h
    peclet = h * ratio / (2.0 * k)
    inv_peclet = np.divide(1.0, peclet, out=np.full_like(peclet, np.inf), where=peclet > 0.0)
    sigma = 0.5 * h * np.maximum(0.0, config.beta - inv_peclet)
    return ShockCaptureState(ratio, peclet, sigma, ratio * sigma, alpha)


def assemble_shock_capturing(mesh: StructuredMesh, u_prev, config: ModelConfig, forcing: Forcing = None):
    """Element ``tau_s`` and the matrix ``sum_K (grad v, tau_s grad u)_K``."""
    state = shock_capturing_state(mesh, u_prev, config, forcing)
    tab = tabulate(mesh, 2)
    local = state.tau_s[:, None, None] * np.einsum("eq,eqij->eij", tab.W, _grad_grad(tab))
    return state.tau_s, scatter_matrix(mesh, local)


__all__ = [
    "AssemblyError",
    "ShockCaptureState",
    "SystemBlocks",
    "apply_dirichlet",
    "assemble_newton",
    "assemble_osgs_blocks",
    "assemble_picard",
    "assemble_shock_capturing",
    "condense",
    "free_nodes",
    "lumped_gram",
    "recover_projection",
    "residual_at_points",
    "scatter_matrix",
    "shock_capturing_state",
    "strong_residual",
]

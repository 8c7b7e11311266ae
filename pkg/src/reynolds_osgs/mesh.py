"""Structured bilinear quadrilateral meshes, shape functions and Gauss rules."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

# Reference corner coordinates, counterclockwise from (-1, -1).
CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product Gauss-Legendre rule on the reference square."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def npoints(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadratureRule:
    """Return the ``n x n`` Gauss rule, exact for ``xi**a * eta**b`` with a, b <= 2n - 1."""
    if n < 1:
        raise ValueError(f"number of Gauss points must be positive, got {n}")
    pts, wts = np.polynomial.legendre.leggauss(n)
    xi, eta = np.meshgrid(pts, pts, indexing="xy")
    weights = np.outer(wts, wts).ravel()
    points = np.column_stack([xi.ravel(), eta.ravel()])
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, 2 * n - 1)


@dataclass(frozen=True, eq=False)
class StructuredMesh:
    """Uniform grid of axis-aligned rectangles.

    Nodes are numbered row by row (``j * (nx + 1) + i``) and every element
    lists its four corners counterclockwise starting at the lower left.
    """

    nx: int
    ny: int
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nodes: np.ndarray = field(repr=False)
    elements: np.ndarray = field(repr=False)
    boundary_nodes: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / self.ny

    @property
    def h(self) -> float:
        """Element diameter used by the method: the longest element edge."""
        return max(self.dx, self.dy)

    @property
    def area(self) -> float:
        return (self.x_range[1] - self.x_range[0]) * (self.y_range[1] - self.y_range[0])

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @property
    def x_stations(self) -> np.ndarray:
        return self.nodes[: self.nx + 1, 0]

    @property
    def y_stations(self) -> np.ndarray:
        return self.nodes[:: self.nx + 1, 1]

    def node_grid(self, values: np.ndarray) -> np.ndarray:
        """Reshape a nodal vector to ``(ny + 1, nx + 1)``; row ``j`` is the line ``y = y_j``."""
        return np.asarray(values).reshape(self.ny + 1, self.nx + 1)

    def element_sizes(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.nodes[:, 0]
        y = self.nodes[:, 1]
        el = self.elements
        return x[el[:, 1]] - x[el[:, 0]], y[el[:, 3]] - y[el[:, 0]]

    def element_diameters(self) -> np.ndarray:
        ex, ey = self.element_sizes()
        return np.maximum(ex, ey)


def build_mesh(nx: int, ny: int, x_range=(0.0, 2.0 * np.pi), y_range=(-1.0, 1.0)) -> StructuredMesh:
    """Uniform ``nx x ny`` rectangle mesh of ``x_range x y_range``."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"element counts must be positive integers, got nx={nx}, ny={ny}")
    x0, x1 = (float(v) for v in x_range)
    y0, y1 = (float(v) for v in y_range)
    if not x0 < x1:
        raise ValueError(f"x_range must be increasing, got {x_range}")
    if not y0 < y1:
        raise ValueError(f"y_range must be increasing, got {y_range}")
    nx, ny = int(nx), int(ny)

    # Index-based coordinates so refined meshes reproduce parent nodes exactly.
    xs = x0 + (x1 - x0) * np.arange(nx + 1) / nx
    ys = y0 + (y1 - y0) * np.arange(ny + 1) / ny
    xs[-1], ys[-1] = x1, y1
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    n0 = (j * (nx + 1) + i).ravel()
    elements = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])

    I, J = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    on_boundary = (I == 0) | (I == nx) | (J == 0) | (J == ny)
    boundary = np.flatnonzero(on_boundary.ravel())

    for arr in (nodes, elements, boundary):
        arr.setflags(write=False)
    return StructuredMesh(nx, ny, (x0, x1), (y0, y1), nodes, elements, boundary)


def refine(mesh: StructuredMesh) -> StructuredMesh:
    """Split every element into four."""
    return build_mesh(2 * mesh.nx, 2 * mesh.ny, mesh.x_range, mesh.y_range)


def refinement_series(base: StructuredMesh, levels: int) -> list[StructuredMesh]:
    """``levels`` meshes, starting with ``base`` and refining uniformly."""
    meshes = [base]
    for _ in range(levels - 1):
        meshes.append(refine(meshes[-1]))
    return meshes


def shape_functions(ref_point) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear shape function values and reference gradients at ``(xi, eta)``.

    Returns
    -------
    values : (4,) array
    ref_gradients : (4, 2) array of ``(d/dxi, d/deta)``
    """
    xi, eta = ref_point
    cx, cy = CORNERS[:, 0], CORNERS[:, 1]
    values = 0.25 * (1.0 + cx * xi) * (1.0 + cy * eta)
    grads = np.column_stack([0.25 * cx * (1.0 + cy * eta), 0.25 * cy * (1.0 + cx * xi)])
    return values, grads


def element_geometry(mesh: StructuredMesh, element_id: int, ref_point):
    """Map a reference point of one element to physical space.

    Returns ``(point, gradients, second, det_j)`` where ``gradients`` is (4, 2)
    and ``second`` holds ``(d2/dx2, d2/dy2, d2/dxdy)`` for each shape, shape (4, 3).
    """
    if not 0 <= element_id < mesh.n_elements:
        raise IndexError(f"element id {element_id} outside [0, {mesh.n_elements})")
    corners = mesh.nodes[mesh.elements[element_id]]
    lx = corners[1, 0] - corners[0, 0]
    ly = corners[3, 1] - corners[0, 1]
    xi, eta = ref_point
    point = np.array([corners[0, 0] + 0.5 * (xi + 1.0) * lx, corners[0, 1] + 0.5 * (eta + 1.0) * ly])
    _, ref_grads = shape_functions(ref_point)
    grads = ref_grads * np.array([2.0 / lx, 2.0 / ly])
    second = np.zeros((4, 3))
    second[:, 2] = 0.25 * CORNERS[:, 0] * CORNERS[:, 1] * 4.0 / (lx * ly)
    return point, grads, second, 0.25 * lx * ly


class Tabulation(NamedTuple):
    """Shape data of every element at every quadrature point of a rule."""

    x: np.ndarray  # (nel, nq)
    y: np.ndarray  # (nel, nq)
    N: np.ndarray  # (nq, 4)
    dNdx: np.ndarray  # (nel, nq, 4)
    dNdy: np.ndarray  # (nel, nq, 4)
    d2Ndxy: np.ndarray  # (nel, 4)
    W: np.ndarray  # quadrature weight times det J, (nel, nq)
    h: np.ndarray  # element diameter, (nel,)


def tabulate(mesh: StructuredMesh, n_gauss: int = 2) -> Tabulation:
    return _tabulate(mesh.nx, mesh.ny, mesh.x_range, mesh.y_range, n_gauss)


@lru_cache(maxsize=64)
def _tabulate(nx, ny, x_range, y_range, n_gauss) -> Tabulation:
    mesh = build_mesh(nx, ny, x_range, y_range)
    rule = gauss_rule(n_gauss)
    lx, ly = mesh.element_sizes()
    origin = mesh.nodes[mesh.elements[:, 0]]
    xi, eta = rule.points[:, 0], rule.points[:, 1]

    x = origin[:, :1] + 0.5 * (xi[None, :] + 1.0) * lx[:, None]
    y = origin[:, 1:] + 0.5 * (eta[None, :] + 1.0) * ly[:, None]

    cx, cy = CORNERS[:, 0], CORNERS[:, 1]
    N = 0.25 * (1.0 + np.outer(xi, cx)) * (1.0 + np.outer(eta, cy))
    dNdxi = 0.25 * cx[None, :] * (1.0 + np.outer(eta, cy))
    dNdeta = 0.25 * cy[None, :] * (1.0 + np.outer(xi, cx))
    dNdx = dNdxi[None, :, :] * (2.0 / lx)[:, None, None]
    dNdy = dNdeta[None, :, :] * (2.0 / ly)[:, None, None]
    d2Ndxy = (cx * cy)[None, :] / (lx * ly)[:, None]
    W = rule.weights[None, :] * (0.25 * lx * ly)[:, None]
    h = np.maximum(lx, ly)

    tab = Tabulation(x, y, N, dNdx, dNdy, d2Ndxy, W, h)
    for arr in tab:
        arr.setflags(write=False)
    return tab


class FieldAtPoints(NamedTuple):
    u: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    uxy: np.ndarray  # (nel, 1); constant per element


def evaluate_field(mesh: StructuredMesh, values: np.ndarray, tab: Tabulation) -> FieldAtPoints:
    """Interpolate a nodal field and its derivatives to the quadrature points."""
    ue = np.asarray(values, dtype=float)[mesh.elements]  # (nel, 4)
    u = ue @ tab.N.T
    ux = np.einsum("eqa,ea->eq", tab.dNdx, ue)
    uy = np.einsum("eqa,ea->eq", tab.dNdy, ue)
    uxy = np.sum(tab.d2Ndxy * ue, axis=1, keepdims=True)
    return FieldAtPoints(u, ux, uy, uxy)


def interpolate(mesh: StructuredMesh, fn) -> np.ndarray:
    """Nodal interpolant of ``fn(x, y)``."""
    return np.asarray(fn(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)

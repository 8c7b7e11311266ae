import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reynolds_osgs.mesh import (
    build_mesh,
    element_geometry,
    evaluate_field,
    gauss_rule,
    refine,
    refinement_series,
    shape_functions,
    tabulate,
)

ref_coord = st.floats(-1.0, 1.0, allow_nan=False)


def test_coarsest_mesh_of_series():
    mesh = build_mesh(3, 1, (0.0, 2 * np.pi), (-1.0, 1.0))
    assert mesh.n_nodes == 8
    assert mesh.n_elements == 3
    assert mesh.dx == pytest.approx(2 * np.pi / 3)
    assert mesh.dy == pytest.approx(2.0)


def test_unit_square_single_element():
    mesh = build_mesh(1, 1, (0, 1), (0, 1))
    assert mesh.n_nodes == 4 and mesh.n_elements == 1
    np.testing.assert_array_equal(mesh.nodes[mesh.elements[0]], [[0, 0], [1, 0], [1, 1], [0, 1]])
    assert sorted(mesh.boundary_nodes) == [0, 1, 2, 3]


def test_finest_mesh_node_count():
    assert build_mesh(96, 32).n_nodes == 97 * 33


@pytest.mark.parametrize("args", [(0, 1), (1, 0), (-2, 3), (1.5, 2)])
def test_invalid_counts(args):
    with pytest.raises(ValueError):
        build_mesh(*args)


@pytest.mark.parametrize("xr,yr", [((1, 0), (0, 1)), ((0, 1), (1, 1))])
def test_inverted_ranges(xr, yr):
    with pytest.raises(ValueError):
        build_mesh(2, 2, xr, yr)


def test_boundary_nodes_are_exactly_the_edge_nodes():
    mesh = build_mesh(5, 4, (0, 2), (-1, 3))
    x, y = mesh.nodes.T
    expected = np.flatnonzero((x == 0) | (x == 2) | (y == -1) | (y == 3))
    np.testing.assert_array_equal(np.sort(mesh.boundary_nodes), expected)
    assert len(mesh.interior_nodes) == 4 * 3


def test_refinement_series_reaches_finest_mesh():
    series = refinement_series(build_mesh(3, 1), 6)
    assert [(m.nx, m.ny) for m in series] == [(3, 1), (6, 2), (12, 4), (24, 8), (48, 16), (96, 32)]
    for coarse, fine in zip(series, series[1:]):
        assert coarse.h / fine.h == 2.0


def test_refined_nodes_contain_parent_nodes_exactly():
    coarse = build_mesh(3, 1)
    fine = refine(refine(coarse))
    fine_grid = fine.nodes.reshape(fine.ny + 1, fine.nx + 1, 2)
    np.testing.assert_array_equal(fine_grid[::4, ::4].reshape(-1, 2), coarse.nodes)


def test_shape_function_nodal_values():
    np.testing.assert_allclose(shape_functions((0, 0))[0], 0.25)
    for a, corner in enumerate([(-1, -1), (1, -1), (1, 1), (-1, 1)]):
        values, _ = shape_functions(corner)
        np.testing.assert_array_equal(values, np.eye(4)[a])


@settings(max_examples=100, deadline=None)
@given(ref_coord, ref_coord)
def test_partition_of_unity(xi, eta):
    values, grads = shape_functions((xi, eta))
    assert values.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-14)


def test_shape_gradients_match_central_differences():
    rng = np.random.default_rng(0)
    eps = 1e-6
    for xi, eta in rng.uniform(-1, 1, size=(20, 2)):
        _, grads = shape_functions((xi, eta))
        d_xi = (shape_functions((xi + eps, eta))[0] - shape_functions((xi - eps, eta))[0]) / (2 * eps)
        d_eta = (shape_functions((xi, eta + eps))[0] - shape_functions((xi, eta - eps))[0]) / (2 * eps)
        np.testing.assert_allclose(grads[:, 0], d_xi, atol=1e-8)
        np.testing.assert_allclose(grads[:, 1], d_eta, atol=1e-8)


def test_element_geometry_unit_square():
    mesh = build_mesh(1, 1, (0, 1), (0, 1))
    point, grads, second, det = element_geometry(mesh, 0, (0, 0))
    np.testing.assert_allclose(point, [0.5, 0.5])
    np.testing.assert_allclose(grads, [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
    assert det == pytest.approx(0.25)
    np.testing.assert_array_equal(second[:, :2], 0.0)
    np.testing.assert_allclose(second[:, 2], [1, -1, 1, -1])


def test_element_geometry_coarse_element():
    mesh = build_mesh(3, 1)
    rng = np.random.default_rng(1)
    for e in range(3):
        _, _, second, det = element_geometry(mesh, e, rng.uniform(-1, 1, 2))
        assert det == pytest.approx(np.pi / 3)
        np.testing.assert_array_equal(second[:, 0], 0.0)
        np.testing.assert_array_equal(second[:, 1], 0.0)


def test_element_geometry_rejects_bad_id():
    with pytest.raises(IndexError):
        element_geometry(build_mesh(2, 2), 4, (0, 0))


@pytest.mark.parametrize("a", range(4))
@pytest.mark.parametrize("b", range(4))
def test_two_point_rule_exact_to_cubic(a, b):
    rule = gauss_rule(2)
    exact = (1 - (-1) ** (a + 1)) / (a + 1) * (1 - (-1) ** (b + 1)) / (b + 1)
    approx = np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b)
    assert approx == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_rule_weights_sum_to_reference_area(n):
    assert gauss_rule(n).weights.sum() == pytest.approx(4.0)
    assert np.all(gauss_rule(n).weights > 0)


@pytest.mark.parametrize("levels", [1, 3, 6])
def test_area_conservation(levels):
    mesh = refinement_series(build_mesh(3, 1), levels)[-1]
    for n in (2, 3):
        assert tabulate(mesh, n).W.sum() == pytest.approx(mesh.area, abs=1e-10)


def test_jacobian_positive():
    mesh = build_mesh(7, 5, (0, 3), (-2, 1))
    assert np.all(tabulate(mesh, 3).W > 0)


def test_evaluate_field_reproduces_bilinear_functions():
    mesh = build_mesh(4, 3, (0, 2), (-1, 1))
    fn = lambda x, y: 1.0 + 2.0 * x - 3.0 * y + 0.5 * x * y
    u = fn(*mesh.nodes.T)
    tab = tabulate(mesh, 3)
    fld = evaluate_field(mesh, u, tab)
    np.testing.assert_allclose(fld.u, fn(tab.x, tab.y), atol=1e-13)
    np.testing.assert_allclose(fld.ux, 2.0 + 0.5 * tab.y, atol=1e-13)
    np.testing.assert_allclose(fld.uy, -3.0 + 0.5 * tab.x, atol=1e-13)
    np.testing.assert_allclose(fld.uxy, 0.5, atol=1e-13)

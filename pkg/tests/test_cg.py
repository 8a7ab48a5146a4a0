"""
Tests for the continuous Lagrange baseline.
"""

import numpy as np
import pytest

from fem import ElementKind, make_basis, matrix_asymmetry
from solvers import CgSolver, SolverError, solve_cg
from solvers.cg_solver import lagrange_element, node_numbering
from utils.metrics import compute_errors
from utils.problems import cavity_problem, manufactured_problem


@pytest.mark.parametrize("k", [1, 2, 3])
def test_lagrange_basis_is_nodal(k):
    element = lagrange_element(k)
    values = make_basis(ElementKind.TRIANGLE, k).tabulate(element.nodes) @ element.to_modal
    assert np.allclose(values, np.eye(len(element.nodes)), atol=1e-11)
    kinds = [kind[0] for kind in element.node_kind]
    assert kinds.count("vertex") == 3
    assert kinds.count("edge") == 3 * (k - 1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_node_numbering_is_conforming(cavity_mesh, k):
    mesh, _ = cavity_mesh(2, "uniform")
    element = lagrange_element(k)
    l2g = node_numbering(mesh, element)
    maps_points = mesh.vertices[mesh.triangles]
    # shared nodes must sit at the same physical point from both sides
    ref = element.nodes
    physical = (maps_points[:, 0, None, :]
                + (maps_points[:, 1, None, :] - maps_points[:, 0, None, :]) * ref[None, :, 0, None]
                + (maps_points[:, 2, None, :] - maps_points[:, 0, None, :]) * ref[None, :, 1, None])
    coords = {}
    for e in range(mesh.n_triangles):
        for a, node in enumerate(l2g[e]):
            point = physical[e, a]
            if node in coords:
                assert np.allclose(coords[node], point)
            coords[node] = point
    assert len(coords) == int(l2g.max()) + 1


def test_cg_rejects_k0(cavity_mesh):
    mesh, classification = cavity_mesh(2)
    with pytest.raises(SolverError):
        solve_cg(mesh, classification, 0, manufactured_problem())


def test_zero_data_gives_zero_solution(cavity_mesh):
    mesh, classification = cavity_mesh(4)
    solution = solve_cg(mesh, classification, 2, manufactured_problem().homogeneous())
    assert np.all(np.abs(solution.u) < 1e-14)


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("neumann_sides", [(), ("left", "right")])
def test_linear_solution_reproduced(cavity_mesh, k, neumann_sides):
    mesh, classification = cavity_mesh(2, "uniform", neumann_sides)
    problem = manufactured_problem(1.0, -2.0, neumann_sides)
    solution = solve_cg(mesh, classification, k, problem)
    report = compute_errors(solution, None, problem)
    assert report.e_u < 1e-10
    assert report.e_q_l2 < 1e-10
    assert report.e_ubar is None


def test_reduced_matrix_symmetric(cavity_mesh):
    mesh, classification = cavity_mesh(4, "uniform")
    solver = CgSolver(mesh, classification, 2, cavity_problem(1.0, -2.0))
    solution = solver.solve()
    assert solution.trace_matrix is solver.reduced_matrix
    assert matrix_asymmetry(solution.trace_matrix) < 1e-12
    assert solution.q.shape == (mesh.n_triangles, 2, 6)


def test_dirichlet_nodes_cover_boundary(cavity_mesh):
    mesh, classification = cavity_mesh(2)
    solver = CgSolver(mesh, classification, 1, manufactured_problem())
    fixed = solver.dirichlet_nodes()
    on_boundary = np.zeros(mesh.n_vertices, dtype=bool)
    on_boundary[mesh.facets[classification.dirichlet].reshape(-1)] = True
    assert np.array_equal(fixed[:mesh.n_vertices], on_boundary)


def test_cavity_converges_at_optimal_rate(cavity_mesh):
    problem = cavity_problem(1.0, -2.0)
    errors = []
    for n in (8, 16):
        mesh, classification = cavity_mesh(n)
        errors.append(compute_errors(solve_cg(mesh, classification, 2, problem), None, problem).e_u)
    assert np.log2(errors[0] / errors[1]) == pytest.approx(3.0, abs=0.35)


@pytest.mark.slow
def test_near_critical_contrast_error_magnitude(cavity_mesh):
    mesh, classification = cavity_mesh(16)
    problem = cavity_problem(1.0, -1.001)
    report = compute_errors(solve_cg(mesh, classification, 1, problem), None, problem)
    assert mesh.n_triangles == 1024
    assert 2.5 / 1.5 <= report.e_u <= 2.5 * 1.5

"""
Tests for error norms, convergence tables and conservativity diagnostics.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from fem import ElementKind, make_affine_maps, make_basis, make_quadrature
from meshing import (
    FacetLabel, Mesh, build_structured_mesh, cavity_domain, classify_facets, unit_square_domain,
)
from solvers import DiscreteSolution, Method, ProblemData, make_tau, postprocess, solve_hdg
from utils.metrics import (
    COLUMNS, ConvergenceTable, ErrorReport, MetricsError, compute_errors, compute_rates,
    convergence_rate, flux_jump_residual, solution_norms,
)
from utils.problems import cavity_problem, manufactured_problem, metamaterial_problem


def bilinear_problem():
    """u = xy on the unit square, σ = 1."""
    return ProblemData(
        name="bilinear", domain=unit_square_domain(), sigma_plus=1.0, kappa=-2.0,
        source=lambda p, t: np.zeros(len(p)),
        dirichlet=lambda p, t: p[:, 0] * p[:, 1],
        exact_u=lambda p, t: p[:, 0] * p[:, 1],
        exact_q=lambda p, t: -np.column_stack([p[:, 1], p[:, 0]]),
    )


def projected_solution(mesh, classification, problem, k):
    """L² projections of the exact u and q, packed as a DiscreteSolution."""
    maps = make_affine_maps(mesh)
    rule = make_quadrature(ElementKind.TRIANGLE, 2 * k + 4)
    phi = make_basis(ElementKind.TRIANGLE, k).tabulate(rule.points)
    points = maps.to_physical(rule.points)
    nq = points.shape[1]
    tags = np.repeat(mesh.tags, nq)
    u = problem.u(points.reshape(-1, 2), tags).reshape(-1, nq)
    q = problem.q(points.reshape(-1, 2), tags).reshape(-1, nq, 2)
    return DiscreteSolution(
        method=Method.CG, mesh=mesh, classification=classification, degree=k,
        u=np.einsum("q,eq,qi->ei", rule.weights, u, phi),
        q=np.einsum("q,eqc,qi->eci", rule.weights, q, phi),
    )


# ============ Rates ============

def test_convergence_rate_examples():
    assert convergence_rate(1e-2, 2.5e-3, 0.2, 0.1) == pytest.approx(2.0)
    assert convergence_rate(1.0, 1.0 / 27.0, 0.3, 0.1) == pytest.approx(3.0)
    assert convergence_rate(0.0, 1e-3, 0.2, 0.1) is None
    assert convergence_rate(None, 1e-3, 0.2, 0.1) is None
    assert convergence_rate(1e-2, 1e-3, 0.1, 0.1) is None


def test_compute_rates_fills_columns():
    table = ConvergenceTable(method="hdg", degree=1)
    for h, e in ((0.4, 1.6e-1), (0.2, 4e-2), (0.1, 1e-2)):
        table.add(ErrorReport(cells=int(1 / h**2), h=h, e_u=e, e_q_l2=e, e_q_vh=e))
    rated = compute_rates(table)
    assert rated.rate("e_u")[0] is None
    assert rated.rate("e_u")[1:] == pytest.approx([2.0, 2.0])
    assert rated.rate("e_ubar") == [None, None, None]
    assert table.rates == {}


def test_compute_rates_rejects_empty_table():
    with pytest.raises(MetricsError):
        compute_rates(ConvergenceTable(method="cg", degree=1))


def test_table_requires_decreasing_h():
    table = ConvergenceTable(method="hdg", degree=0)
    table.add(ErrorReport(cells=8, h=0.5, e_u=1.0, e_q_l2=1.0, e_q_vh=1.0))
    with pytest.raises(MetricsError):
        table.add(ErrorReport(cells=8, h=0.5, e_u=1.0, e_q_l2=1.0, e_q_vh=1.0))


@pytest.mark.parametrize("value", [-1.0, math.inf, math.nan])
def test_error_report_validation(value):
    with pytest.raises(MetricsError):
        ErrorReport(cells=8, h=0.5, e_u=value, e_q_l2=1.0, e_q_vh=1.0)


def test_to_frame_columns():
    table = ConvergenceTable(method="cg", degree=2)
    table.add(ErrorReport(cells=16, h=0.5, e_u=1e-1, e_q_l2=2e-1, e_q_vh=2e-1))
    table.add(ErrorReport(cells=64, h=0.25, e_u=1.25e-2, e_q_l2=5e-2, e_q_vh=5e-2))
    frame = compute_rates(table).to_frame()
    assert list(frame.columns) == COLUMNS
    assert frame["cells"].tolist() == [16, 64]
    assert frame["rate_u"].iloc[1] == pytest.approx(3.0)
    assert frame["e_ubar"].isna().all()
    assert frame["rate_u"].isna().iloc[0]


# ============ Errors ============

def test_projection_errors_decrease(cavity_mesh):
    problem = cavity_problem(1.0, -2.0)
    errors = []
    for n in (2, 4, 8):
        mesh, classification = cavity_mesh(n)
        errors.append(compute_errors(projected_solution(mesh, classification, problem, 1), None, problem))
    assert errors[0].e_u > errors[1].e_u > errors[2].e_u
    assert errors[0].e_q_l2 > errors[1].e_q_l2 > errors[2].e_q_l2
    assert errors[2].e_ubar is None
    assert errors[2].e_ustar is None


def test_exact_projection_has_no_error():
    domain = unit_square_domain()
    mesh = build_structured_mesh(domain, 2, "uniform")
    classification = classify_facets(mesh, domain)
    report = compute_errors(projected_solution(mesh, classification, bilinear_problem(), 2),
                            None, bilinear_problem())
    assert report.e_u < 1e-13
    assert report.e_q_l2 < 1e-13


def test_unit_coefficient_norms_coincide():
    domain = unit_square_domain()
    mesh = build_structured_mesh(domain, 2, "uniform")
    classification = classify_facets(mesh, domain)
    problem = bilinear_problem()
    report = compute_errors(projected_solution(mesh, classification, problem, 0), None, problem)
    assert report.e_q_vh == pytest.approx(report.e_q_l2, rel=1e-14)
    assert report.e_q_l2 > 0.0


def test_flux_norm_weights_by_coefficient(cavity_mesh):
    mesh, classification = cavity_mesh(2)
    problem = cavity_problem(1.0, -4.0)
    report = compute_errors(projected_solution(mesh, classification, problem, 0), None, problem)
    assert report.e_q_vh < report.e_q_l2


def test_metrics_need_exact_solution(cavity_mesh):
    mesh, classification = cavity_mesh(2)
    solution = projected_solution(mesh, classification, cavity_problem(), 0)
    with pytest.raises(MetricsError):
        compute_errors(solution, None, metamaterial_problem())


def test_quadrature_choice_does_not_pollute_errors(hdg_cavity_solution):
    *_, problem, solution = hdg_cavity_solution(n=4, k=2)
    default = compute_errors(solution, None, problem)
    finer = compute_errors(solution, None, problem, quadrature_degree=2 * 2 + 8)
    for key in ("e_u", "e_q_l2", "e_ubar"):
        assert getattr(finer, key) == pytest.approx(getattr(default, key), rel=1e-3)


def test_solution_norms(hdg_cavity_solution):
    *_, solution = hdg_cavity_solution(n=2, k=1)
    norms = solution_norms(solution)
    assert set(norms) == {"u", "q", "ubar"}
    assert all(value > 0.0 for value in norms.values())


def test_zero_solution_norms(cavity_mesh):
    mesh, classification = cavity_mesh(2)
    problem = cavity_problem(1.0, -2.0).homogeneous()
    solution = solve_hdg(mesh, classification, 1, problem, make_tau(mesh, classification))
    assert solution_norms(solution) == {"u": 0.0, "q": 0.0, "ubar": 0.0}


def test_errors_do_not_depend_on_element_order(cavity_mesh):
    mesh, classification = cavity_mesh(4)
    order = np.random.default_rng(11).permutation(mesh.n_triangles)
    shuffled = Mesh.from_arrays(mesh.vertices, mesh.triangles[order], mesh.tags[order])
    problem = cavity_problem(1.0, -2.0)
    reports = []
    for m, c in ((mesh, classification), (shuffled, classify_facets(shuffled, cavity_domain()))):
        solution = solve_hdg(m, c, 1, problem, make_tau(m, c))
        reports.append(compute_errors(solution, postprocess(solution, problem), problem))
    for key in ("e_u", "e_q_l2", "e_q_vh", "e_ubar", "e_ustar"):
        assert reports[1].error(key) == pytest.approx(reports[0].error(key), rel=1e-9), key


# ============ Conservativity ============

def test_flux_jump_vanishes_without_interior_facets(single_triangle):
    mesh, classification = single_triangle()
    solution = solve_hdg(mesh, classification, 2, manufactured_problem(),
                         make_tau(mesh, classification))
    assert flux_jump_residual(solution) == 0.0


def test_flux_jump_grows_with_trace_perturbation(hdg_cavity_solution):
    mesh, classification, _, solution = hdg_cavity_solution(n=4, k=1, kappa=-2.0)
    facet = int(np.flatnonzero(classification.labels == FacetLabel.INTERIOR_PLUS)[0])
    eps = 1e-6
    ubar = solution.ubar.copy()
    ubar[facet, 0] += eps
    perturbed = flux_jump_residual(replace(solution, ubar=ubar))
    tau = abs(solution.tau.values[facet])
    # both owners see -τ|e|ε on the constant moment
    expected = 2.0 * tau * mesh.facet_lengths()[facet] * eps
    assert flux_jump_residual(solution) < 1e-3 * expected
    assert perturbed == pytest.approx(expected, rel=1e-3)

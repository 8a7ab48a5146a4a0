"""
Tests for the experiment problems and the coefficient data.
"""

import numpy as np
import pytest

from meshing import unit_square_domain
from solvers import ProblemData, ProblemError
from utils.problems import (
    Experiment, METAMATERIAL_KAPPA_MAX, METAMATERIAL_KAPPA_MIN, cavity_problem, cavity_solution,
    get_problem, linear_transmission_manufactured, manufactured_problem, metamaterial_problem,
)


def interface_points(n=100, seed=0):
    y = np.random.default_rng(seed).uniform(0.0, 1.0, n)
    return np.column_stack([np.zeros(n), y])


@pytest.mark.parametrize("kappa", [-1.001, -1.5, -3.0])
def test_cavity_vanishes_on_boundary(kappa):
    problem = cavity_problem(kappa=kappa)
    t = np.linspace(0.0, 1.0, 11)
    left = np.column_stack([-np.ones_like(t), t])
    right = np.column_stack([np.ones_like(t), t])
    bottom = np.column_stack([2 * t - 1, np.zeros_like(t)])
    top = np.column_stack([2 * t - 1, np.ones_like(t)])
    for side in (left, right, bottom, top):
        assert np.allclose(problem.u(side), 0.0, atol=1e-14)


@pytest.mark.parametrize("kappa", [-1.001, -2.0, -0.5])
def test_cavity_transmission_conditions(kappa):
    solution = cavity_solution(kappa=kappa)
    points = interface_points()
    plus, minus = np.ones(len(points)), -np.ones(len(points))
    assert np.allclose(solution.u(points, plus), solution.u(points, minus), atol=1e-12)
    normal = np.tile([1.0, 0.0], (len(points), 1))
    assert np.allclose(solution.neumann(points, normal, plus),
                       solution.neumann(points, normal, minus), atol=1e-9)


def test_linear_transmission_conditions():
    solution = linear_transmission_manufactured(1.0, -2.0)
    points = interface_points()
    plus, minus = np.ones(len(points)), -np.ones(len(points))
    assert np.allclose(solution.u(points, plus), solution.u(points, minus))
    assert np.allclose(solution.q(points, plus), solution.q(points, minus))
    assert np.allclose(solution.q(points, plus), [[2.0, 0.0]])


@pytest.mark.parametrize("tag", [1, -1])
def test_cavity_source_matches_operator(tag):
    # central differences of σ∇u
    solution = cavity_solution(sigma_plus=1.5, kappa=-2.0)
    x = -0.5 if tag > 0 else 0.5
    point = np.array([[x, 0.3]])
    tags = np.array([tag])
    eps = 1e-4
    div = 0.0
    for d in range(2):
        step = np.zeros((1, 2))
        step[0, d] = eps
        q_plus = solution.q(point + step, tags)[0, d]
        q_minus = solution.q(point - step, tags)[0, d]
        div -= (q_plus - q_minus) / (2 * eps)
    assert solution.f(point, tags)[0] == pytest.approx(div, rel=1e-6)


def test_cavity_rejects_critical_contrast():
    with pytest.raises(ProblemError):
        cavity_problem(kappa=-1.0)


@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_contrast_must_be_negative(kappa):
    with pytest.raises(ProblemError):
        cavity_problem(kappa=kappa)
    with pytest.raises(ProblemError):
        manufactured_problem(kappa=kappa)


def test_sigma_plus_must_be_positive():
    with pytest.raises(ProblemError):
        cavity_problem(sigma_plus=0.0)


def test_cavity_exact_solution_scales_with_sigma():
    # u depends on the contrast only, f on σ₊ linearly
    a = cavity_problem(sigma_plus=1.0, kappa=-1.5)
    b = cavity_problem(sigma_plus=4.0, kappa=-1.5)
    points = np.array([[-0.3, 0.2], [0.4, 0.7]])
    assert np.allclose(a.u(points), b.u(points))
    assert np.allclose(4.0 * a.f(points), b.f(points))


def test_metamaterial_source():
    problem = metamaterial_problem(kappa=-2.0)
    points = np.array([[0.5, 1.0], [2.0, 1.0], [4.5, 0.5]])
    tags = problem.domain.subdomain_of(points)
    assert list(tags) == [1, -1, 1]
    assert np.allclose(problem.f(points), [1.0, 0.0, 0.0])
    assert not problem.has_exact
    with pytest.raises(ProblemError):
        problem.u(points)


@pytest.mark.parametrize("kappa", [METAMATERIAL_KAPPA_MIN, -1.0, METAMATERIAL_KAPPA_MAX])
def test_metamaterial_rejects_critical_interval(kappa):
    with pytest.raises(ProblemError):
        metamaterial_problem(kappa=kappa)


def test_metamaterial_records_boundary_condition():
    problem = metamaterial_problem(kappa=-0.5)
    assert "dirichlet" in problem.metadata["boundary_condition"]


def test_problem_data_helpers():
    problem = manufactured_problem(kappa=-2.0)
    points = np.array([[-0.5, 0.5], [0.5, 0.5]])
    assert np.allclose(problem.sigma(np.array([1, -1])), [1.0, -2.0])
    assert np.allclose(problem.scaled(3.0).u(points), 3.0 * problem.u(points))
    zero = problem.homogeneous()
    assert np.allclose(zero.f(points), 0.0)
    assert not zero.has_exact


def test_problem_data_validation():
    with pytest.raises(ProblemError):
        ProblemData(name="bad", domain=unit_square_domain(), sigma_plus=1.0, kappa=0.5,
                    source=lambda p, t: np.zeros(len(p)))


def test_get_problem():
    assert get_problem("cavity").name == "cavity"
    assert get_problem(Experiment.MANUFACTURED, kappa=-3.0).kappa == -3.0
    with pytest.raises(ProblemError):
        Experiment.parse("waveguide")
    assert not Experiment.METAMATERIAL.has_exact_solution

"""
Shared fixtures for the test suite.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from meshing import (  # noqa: E402
    FacetClassification, FacetLabel, Mesh, build_structured_mesh, cavity_domain, classify_facets,
)
from solvers import make_tau, solve_hdg  # noqa: E402
from utils.problems import cavity_problem, manufactured_problem  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full refinement studies on the finest meshes")


@pytest.fixture
def cavity_mesh():
    """Factory: cavity mesh and classification at resolution n."""
    def build(n=4, pattern="mirrored", neumann_sides=()):
        domain = cavity_domain(neumann_sides)
        mesh = build_structured_mesh(domain, n, pattern)
        return mesh, classify_facets(mesh, domain)
    return build


@pytest.fixture
def single_triangle():
    """Factory: one-element mesh with every facet Dirichlet."""
    def build(tag=1, vertices=((-1.0, 0.0), (-0.5, 0.0), (-1.0, 0.5))):
        mesh = Mesh.from_arrays(np.array(vertices), np.array([[0, 1, 2]]), np.array([tag]))
        labels = np.full(mesh.n_facets, int(FacetLabel.DIRICHLET))
        return mesh, FacetClassification(labels=labels)
    return build


@pytest.fixture
def hdg_cavity_solution(cavity_mesh):
    """Factory: HDG cavity solution (mesh, classification, problem, solution)."""
    def solve(n=4, k=1, kappa=-1.001, pattern="mirrored"):
        mesh, classification = cavity_mesh(n, pattern)
        problem = cavity_problem(1.0, kappa)
        tau = make_tau(mesh, classification, 1.0)
        return mesh, classification, problem, solve_hdg(mesh, classification, k, problem, tau)
    return solve


@pytest.fixture
def linear_problem():
    return manufactured_problem(1.0, -2.0)

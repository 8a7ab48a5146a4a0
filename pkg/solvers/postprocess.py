"""
Local Post-processing
=====================
Element-wise reconstruction u_h* ∈ P_{k+1}(K) from (q_h, u_h):

    (∇u_h*, ∇v)_K = -(σ⁻¹ q_h, ∇v)_K   for all v ∈ P_{k+1}(K)
    (u_h*, 1)_K = (u_h, 1)_K

The gradient system is singular on constants; the mean condition is
appended as one Lagrange multiplier row.
"""

import logging
from dataclasses import dataclass

import numpy as np

from errors import SignHdgError
from fem.basis import ElementKind, make_basis
from fem.geometry import make_affine_maps
from fem.linalg import SingularMatrixError, batched_solve
from fem.quadrature import make_quadrature
from solvers.base_solver import DiscreteSolution
from solvers.problem_data import ProblemData

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096


class PostprocessError(SignHdgError):
    module = "postprocess"


@dataclass(frozen=True)
class PostprocessedField:
    """Coefficients (nt, dim P_{k+1}) of u_h* in the orthonormal basis."""
    degree: int
    coefficients: np.ndarray

    def evaluate(self, ref_points: np.ndarray, elements=slice(None)) -> np.ndarray:
        phi = make_basis(ElementKind.TRIANGLE, self.degree).tabulate(ref_points)
        return self.coefficients[elements] @ phi.T


def postprocess(solution: DiscreteSolution, problem: ProblemData) -> PostprocessedField:
    """
    Compute u_h* on every element.

    Args:
        solution: Solution carrying q_h and u_h
        problem: Supplies σ per subdomain

    Raises:
        PostprocessError: If the solution has no flux, or a local system is singular
    """
    if solution.q is None:
        raise PostprocessError(f"{solution.method.value} solution carries no flux field")
    mesh = solution.mesh
    k = solution.degree
    maps = make_affine_maps(mesh)
    low = make_basis(ElementKind.TRIANGLE, k)
    high = make_basis(ElementKind.TRIANGLE, k + 1)
    rule = make_quadrature(ElementKind.TRIANGLE, 2 * k + 2)

    phi_low = low.tabulate(rule.points)
    phi_high = high.tabulate(rule.points)
    dphi_high = high.gradients(rule.points)
    grad_gram = np.einsum("q,qia,qjb->abij", rule.weights, dphi_high, dphi_high)
    # (q, ∇̂ψ_j) pairing per reference direction: ∫ φ_i ∂̂_a ψ_j
    flux_pairing = np.einsum("q,qi,qja->aij", rule.weights, phi_low, dphi_high)
    means_high = rule.weights @ phi_high
    means_low = rule.weights @ phi_low

    N = high.dim
    coefficients = np.empty((mesh.n_triangles, N))
    sigma = problem.sigma(mesh.tags)
    for start in range(0, mesh.n_triangles, CHUNK_SIZE):
        elements = np.arange(start, min(start + CHUNK_SIZE, mesh.n_triangles))
        ne = len(elements)
        det = maps.determinants[elements]
        invt = maps.inverse_transposes[elements]
        metric = np.einsum("eca,ecb->eab", invt, invt)

        system = np.zeros((ne, N + 1, N + 1))
        system[:, :N, :N] = np.einsum("e,eab,abij->eij", det, metric, grad_gram)
        system[:, :N, N] = means_high
        system[:, N, :N] = means_high

        rhs = np.zeros((ne, N + 1))
        rhs[:, :N] = -(det / sigma[elements])[:, None] * np.einsum(
            "eci,eca,aij->ej", solution.q[elements], invt, flux_pairing)
        rhs[:, N] = solution.u[elements] @ means_low

        try:
            solved = batched_solve(system, rhs[:, :, None], first_element=start)
        except SingularMatrixError as err:
            raise PostprocessError(f"Post-processing system of element {err.element} is singular") from err
        coefficients[elements] = solved[:, :N, 0]

    logger.debug(f"Post-processed {mesh.n_triangles} elements to degree {k + 1}")
    return PostprocessedField(degree=k + 1, coefficients=coefficients)

"""
Base Solver Module
==================
Shared solution container and the template all discretizations follow:

    assemble → solve global system → recover element fields

Each concrete solver (HDG, CG) implements the three steps; the base class
handles validation, timing and logging. `SolverFactory` picks a solver by
method name.
"""

import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Optional

import numpy as np

from errors import SignHdgError
from fem.basis import ElementKind, make_basis
from meshing.facets import FacetClassification
from meshing.mesh_builder import Mesh
from solvers.problem_data import ProblemData

logger = logging.getLogger(__name__)


class SolverError(SignHdgError):
    """Raised when a discretization cannot be assembled or solved."""
    module = "hdg"


class Method(Enum):
    HDG = "hdg"
    CG = "cg"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, Method):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise SolverError(f"Unknown method: {value!r}") from None


@dataclass(frozen=True)
class DiscreteSolution:
    """
    Element-wise polynomial solution in the orthonormal reference bases.

    Attributes:
        method: Discretization that produced it
        mesh, classification: Geometry it lives on
        degree: Polynomial degree k
        u: (nt, dim P_k) coefficients of u_h
        q: (nt, 2, dim P_k) coefficients of q_h (HDG only)
        ubar: (nf, k+1) trace coefficients, zero on Dirichlet facets (HDG only)
        u_star: (nt, dim P_{k+1}) post-processed coefficients, once computed
        trace_matrix: Global matrix that was factorized
        tau: Stabilization used (HDG only)
    """
    method: Method
    mesh: Mesh
    classification: FacetClassification
    degree: int
    u: np.ndarray
    q: Optional[np.ndarray] = None
    ubar: Optional[np.ndarray] = None
    u_star: Optional[np.ndarray] = None
    trace_matrix: Any = None
    tau: Any = None

    def evaluate_u(self, ref_points: np.ndarray, elements=slice(None)) -> np.ndarray:
        """(ne, npts) values of u_h at reference points of the selected elements."""
        phi = make_basis(ElementKind.TRIANGLE, self.degree).tabulate(ref_points)
        return self.u[elements] @ phi.T

    def evaluate_q(self, ref_points: np.ndarray, elements=slice(None)) -> np.ndarray:
        """(ne, npts, 2) values of q_h."""
        if self.q is None:
            raise SolverError(f"{self.method.value} solution carries no flux field")
        phi = make_basis(ElementKind.TRIANGLE, self.degree).tabulate(ref_points)
        return np.einsum("ecn,qn->eqc", self.q[elements], phi)

    def evaluate_u_star(self, ref_points: np.ndarray, elements=slice(None)) -> np.ndarray:
        if self.u_star is None:
            raise SolverError("Solution has not been post-processed")
        phi = make_basis(ElementKind.TRIANGLE, self.degree + 1).tabulate(ref_points)
        return self.u_star[elements] @ phi.T

    def with_postprocessed(self, u_star: np.ndarray) -> "DiscreteSolution":
        return replace(self, u_star=u_star)


class BaseSolver(ABC):
    """
    Abstract base class for all discretizations.

    Each child class implements:
    - _assemble(): build the global system
    - _solve_system(): factorize and solve it
    - _recover(): turn the global solution into a DiscreteSolution
    """
    method: Method = None
    min_degree: int = 0

    def __init__(
        self,
        mesh: Mesh,
        classification: FacetClassification,
        k: int,
        problem: ProblemData,
        quadrature_degree: Optional[int] = None,
    ):
        """
        Args:
            mesh: Interface-conforming mesh
            classification: Facet labels of the mesh
            k: Polynomial degree
            problem: Coefficient and data
            quadrature_degree: Override of the default 2k+2 assembly rule
        """
        if k < self.min_degree:
            raise SolverError(f"{self.method.value} requires k >= {self.min_degree}, got {k}")
        if len(classification.labels) != mesh.n_facets:
            raise SolverError("Facet classification does not match the mesh")
        self.mesh = mesh
        self.classification = classification
        self.k = int(k)
        self.problem = problem
        self.quadrature_degree = quadrature_degree if quadrature_degree is not None else 2 * k + 2

    def solve(self) -> DiscreteSolution:
        """Run assemble → solve → recover and log timings."""
        name = self.method.value.upper()
        logger.info(f"{name} k={self.k}: {self.mesh.n_triangles} cells, problem {self.problem.name}")
        start = time.perf_counter()
        system = self._assemble()
        assembled = time.perf_counter()
        values = self._solve_system(system)
        solved = time.perf_counter()
        solution = self._recover(system, values)
        logger.info(
            f"{name} k={self.k}: assembly {assembled - start:.2f}s, "
            f"solve {solved - assembled:.2f}s, recovery {time.perf_counter() - solved:.2f}s"
        )
        return solution

    # ============ Abstract Methods (Child classes must implement) ============

    @abstractmethod
    def _assemble(self) -> Any:
        pass

    @abstractmethod
    def _solve_system(self, system: Any) -> np.ndarray:
        pass

    @abstractmethod
    def _recover(self, system: Any, values: np.ndarray) -> DiscreteSolution:
        pass


class SolverFactory:
    """
    Creates the solver for a method name.

    Usage:
        solver = SolverFactory.get_solver("hdg", mesh, classification, 2, problem, gamma=1.0)
        solution = solver.solve()
    """

    @staticmethod
    def get_solver(
        method: "str | Method",
        mesh: Mesh,
        classification: FacetClassification,
        k: int,
        problem: ProblemData,
        gamma: float = 1.0,
        quadrature_degree: Optional[int] = None,
    ) -> BaseSolver:
        method = Method.parse(method)
        if method is Method.HDG:
            from solvers.hdg_solver import HdgSolver, make_tau
            tau = make_tau(mesh, classification, gamma)
            return HdgSolver(mesh, classification, k, problem, tau, quadrature_degree)
        if method is Method.CG:
            from solvers.cg_solver import CgSolver
            return CgSolver(mesh, classification, k, problem, quadrature_degree)
        raise SolverError(f"Unknown method: {method}")

"""
Continuous Galerkin Solver
==========================
H¹-conforming Lagrange P_k baseline for the same sign-changing problem:

    (σ∇u, ∇v) = -(f, v) - ⟨u_N, v⟩_Γ_N,   u = u_D on Γ_D

The local Lagrange basis is expressed in the orthonormal modal basis, so
the solution is stored as modal coefficients and evaluated exactly like
an HDG solution. Dirichlet nodes are eliminated.

Global node numbering: vertices, then k-1 nodes per facet along the
facet orientation, then element interior nodes.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from fem.basis import ElementKind, edge_reference_points, lagrange_nodes, make_basis
from fem.geometry import make_affine_maps
from fem.linalg import assemble_csr, sparse_lu_solve
from fem.quadrature import make_quadrature
from meshing.facets import FacetClassification, FacetLabel
from meshing.mesh_builder import Mesh
from solvers.base_solver import BaseSolver, DiscreteSolution, Method, SolverError
from solvers.problem_data import ProblemData

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LagrangeElement:
    """
    Lagrange P_k element on the reference triangle.

    Attributes:
        degree: k
        nodes: (nloc, 2) equispaced nodes
        to_modal: (n, nloc) V⁻¹, modal coefficients of each nodal basis function
        node_kind: per node, ("vertex", ℓ), ("edge", ℓ, r) or ("interior", p)
    """
    degree: int
    nodes: np.ndarray
    to_modal: np.ndarray
    node_kind: tuple


@lru_cache(maxsize=None)
def lagrange_element(k: int) -> LagrangeElement:
    if k < 1:
        raise SolverError(f"Continuous Lagrange elements need k >= 1, got {k}")
    nodes = lagrange_nodes(k)
    vandermonde = make_basis(ElementKind.TRIANGLE, k).tabulate(nodes)
    to_modal = np.linalg.inv(vandermonde)

    kinds = []
    interior = 0
    for x, y in np.rint(nodes * k).astype(int):
        if (x, y) == (0, 0):
            kinds.append(("vertex", 0))
        elif (x, y) == (k, 0):
            kinds.append(("vertex", 1))
        elif (x, y) == (0, k):
            kinds.append(("vertex", 2))
        elif x + y == k:
            kinds.append(("edge", 0, y))
        elif x == 0:
            kinds.append(("edge", 1, k - y))
        elif y == 0:
            kinds.append(("edge", 2, x))
        else:
            kinds.append(("interior", interior))
            interior += 1
    return LagrangeElement(degree=k, nodes=nodes, to_modal=to_modal, node_kind=tuple(kinds))


def node_numbering(mesh: Mesh, element: LagrangeElement) -> np.ndarray:
    """(nt, nloc) global node of every local node."""
    k = element.degree
    nv, nf, nt = mesh.n_vertices, mesh.n_facets, mesh.n_triangles
    n_interior = sum(1 for kind in element.node_kind if kind[0] == "interior")
    l2g = np.empty((nt, len(element.node_kind)), dtype=np.int64)
    for a, kind in enumerate(element.node_kind):
        if kind[0] == "vertex":
            l2g[:, a] = mesh.triangles[:, kind[1]]
        elif kind[0] == "edge":
            _, l, r = kind
            position = np.where(mesh.element_flips[:, l], k - r, r)
            l2g[:, a] = nv + mesh.element_facets[:, l] * (k - 1) + position - 1
        else:
            l2g[:, a] = nv + nf * (k - 1) + np.arange(nt) * n_interior + kind[1]
    return l2g


class CgSolver(BaseSolver):
    """Lagrange P_k solve of the sign-indefinite variational problem."""
    method = Method.CG
    min_degree = 1

    def __init__(
        self,
        mesh: Mesh,
        classification: FacetClassification,
        k: int,
        problem: ProblemData,
        quadrature_degree: Optional[int] = None,
    ):
        super().__init__(mesh, classification, k, problem, quadrature_degree)
        self.maps = make_affine_maps(mesh)
        self.element = lagrange_element(self.k)
        self.l2g = node_numbering(mesh, self.element)
        self.n_nodes = int(self.l2g.max()) + 1
        self.reduced_matrix = None

    def _assemble(self):
        mesh, maps, element = self.mesh, self.maps, self.element
        W = make_basis(ElementKind.TRIANGLE, self.k)
        vol = make_quadrature(ElementKind.TRIANGLE, self.quadrature_degree)
        C = element.to_modal

        dphi = W.gradients(vol.points)
        grad_gram = np.einsum("q,qia,qjb->abij", vol.weights, dphi, dphi)
        metric = np.einsum("eca,ecb->eab", maps.inverse_transposes, maps.inverse_transposes)
        sigma = self.problem.sigma(mesh.tags)
        modal = np.einsum("e,eab,abij->eij", sigma * maps.determinants, metric, grad_gram)
        stiffness = np.einsum("ia,eij,jb->eab", C, modal, C)

        points = maps.to_physical(vol.points)
        nq = points.shape[1]
        f = self.problem.source(points.reshape(-1, 2), np.repeat(mesh.tags, nq)).reshape(-1, nq)
        phi = W.tabulate(vol.points)
        load = -maps.determinants[:, None] * np.einsum("q,eq,qi,ia->ea", vol.weights, f, phi, C)
        load += self._neumann_load(W, C)

        rows = np.broadcast_to(self.l2g[:, :, None], stiffness.shape)
        cols = np.broadcast_to(self.l2g[:, None, :], stiffness.shape)
        matrix = assemble_csr(rows, cols, stiffness, self.n_nodes)
        rhs = np.bincount(self.l2g.reshape(-1), weights=load.reshape(-1),
                          minlength=self.n_nodes).astype(float)
        return matrix, rhs

    def _neumann_load(self, W, C) -> np.ndarray:
        mesh, maps = self.mesh, self.maps
        labels = self.classification.labels[mesh.element_facets]
        load = np.zeros((mesh.n_triangles, C.shape[1]))
        if not np.any(labels == FacetLabel.NEUMANN):
            return load
        seg = make_quadrature(ElementKind.SEGMENT, self.quadrature_degree)
        for l in range(3):
            hit = np.flatnonzero(labels[:, l] == FacetLabel.NEUMANN)
            if len(hit) == 0:
                continue
            ref = edge_reference_points(l, seg.points)
            x = maps.to_physical(ref, hit)
            normals = np.repeat(maps.normals[hit, l], len(seg.points), axis=0)
            g = self.problem.neumann(x.reshape(-1, 2), normals,
                                     np.repeat(mesh.tags[hit], len(seg.points))).reshape(len(hit), -1)
            basis = W.tabulate(ref) @ C
            load[hit] -= maps.edge_lengths[hit, l][:, None] * np.einsum("q,eq,qa->ea", seg.weights, g, basis)
        return load

    def dirichlet_nodes(self) -> np.ndarray:
        """Boolean mask of nodes lying on Dirichlet facets."""
        mesh, element = self.mesh, self.element
        on_dirichlet = self.classification.labels[mesh.element_facets] == FacetLabel.DIRICHLET
        mask = np.zeros(self.n_nodes, dtype=bool)
        for a, kind in enumerate(element.node_kind):
            if kind[0] == "vertex":
                # vertex ℓ touches edges ℓ+1 and ℓ+2
                l = kind[1]
                touching = on_dirichlet[:, (l + 1) % 3] | on_dirichlet[:, (l + 2) % 3]
            elif kind[0] == "edge":
                touching = on_dirichlet[:, kind[1]]
            else:
                continue
            mask[self.l2g[touching, a]] = True
        return mask

    def _solve_system(self, system) -> np.ndarray:
        matrix, rhs = system
        fixed = self.dirichlet_nodes()
        free = np.flatnonzero(~fixed)

        values = np.zeros(self.n_nodes)
        if np.any(fixed):
            values[fixed] = self._dirichlet_values(fixed)
        rhs = rhs - matrix @ values
        reduced = matrix[free][:, free]
        logger.info(f"CG k={self.k}: {len(free)} free nodes, {reduced.nnz} nonzeros")
        self.reduced_matrix = reduced
        values[free] = sparse_lu_solve(reduced, rhs[free])
        return values

    def _dirichlet_values(self, fixed: np.ndarray) -> np.ndarray:
        coords = np.empty((self.n_nodes, 2))
        tags = np.empty(self.n_nodes, dtype=np.int64)
        physical = self.maps.to_physical(self.element.nodes).reshape(-1, 2)
        coords[self.l2g.reshape(-1)] = physical
        tags[self.l2g.reshape(-1)] = np.repeat(self.mesh.tags, self.l2g.shape[1])
        return self.problem.dirichlet(coords[fixed], tags[fixed])

    def _recover(self, system, values: np.ndarray) -> DiscreteSolution:
        u = values[self.l2g] @ self.element.to_modal.T
        return DiscreteSolution(
            method=Method.CG,
            mesh=self.mesh,
            classification=self.classification,
            degree=self.k,
            u=u,
            q=self._flux_projection(u),
            trace_matrix=self.reduced_matrix,
        )

    def _flux_projection(self, u: np.ndarray) -> np.ndarray:
        """Coefficients of -σ∇u_h in the orthonormal P_k basis (exact, ∇u_h ∈ P_{k-1})."""
        W = make_basis(ElementKind.TRIANGLE, self.k)
        vol = make_quadrature(ElementKind.TRIANGLE, 2 * self.k)
        phi = W.tabulate(vol.points)
        grads = self.maps.physical_gradients(W.gradients(vol.points))
        grad_u = np.einsum("en,eqnc->eqc", u, grads)
        sigma = self.problem.sigma(self.mesh.tags)
        return -sigma[:, None, None] * np.einsum("q,eqc,qi->eci", vol.weights, grad_u, phi)


def solve_cg(
    mesh: Mesh,
    classification: FacetClassification,
    k: int,
    problem: ProblemData,
    quadrature_degree: Optional[int] = None,
) -> DiscreteSolution:
    """
    Solve with continuous Lagrange P_k elements.

    Raises:
        SolverError: If k < 1
        SingularMatrixError: If the indefinite system is singular (near the
            critical contrast); never regularized
    """
    return CgSolver(mesh, classification, k, problem, quadrature_degree).solve()

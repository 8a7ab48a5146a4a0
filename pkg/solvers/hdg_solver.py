"""
HDG Solver
==========
Hybridizable discontinuous Galerkin discretization with sign-changing
stabilization for -∇·q = f, σ⁻¹q + ∇u = 0.

Per element K the unknowns are ordered [q₁ (n), q₂ (n), u (n)] with
n = dim P_k, and the trace unknowns of its three facets [ū_ℓ (k+1)].
The local equations read

    M_K x_K + G_K ū = F_K        (element rows)
    Σ_K G_Kᵀ x_K - D_K ū = F̄      (trace rows)

with M_K = [[A, B], [Bᵀ, -C]] symmetric. Eliminating x_K element by
element leaves the trace system Σ_K S_K ū = Σ_K g_K with
S_K = G_Kᵀ M_K⁻¹ G_K + D_K, g_K = G_Kᵀ M_K⁻¹ F_K - F̄_K.

Elements are processed in vectorized chunks; assembly and reductions are
index-ordered so results do not depend on the chunk size.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np
from scipy.sparse.linalg import SuperLU

from fem.basis import ElementKind, edge_reference_points, make_basis
from fem.geometry import AffineMaps, make_affine_maps
from fem.linalg import (
    SingularMatrixError, assemble_csr, batched_solve, dense_lu_solve, matrix_asymmetry,
    sparse_lu_factor, sparse_lu_solve,
)
from fem.quadrature import make_quadrature
from meshing.facets import FacetClassification, FacetLabel
from meshing.mesh_builder import Mesh
from solvers.base_solver import BaseSolver, DiscreteSolution, Method, SolverError
from solvers.problem_data import ProblemData

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
MONOLITHIC_MAX_ELEMENTS = 512
QUADRATURE_CHECK_TOL = 1e-12
REFINEMENT_STEPS = 2


# ============ Stabilization ============

@dataclass(frozen=True)
class TauField:
    """
    Facet-wise constant stabilization parameter.

    Attributes:
        values: (nf,) τ per facet; +γ next to Ω₊, -γ next to Ω₋, 0 on Γ_I
        gamma: Magnitude used away from the interface
    """
    values: np.ndarray
    gamma: float

    @property
    def magnitude_bounds(self) -> tuple:
        """(γ₀, γ₁): smallest and largest |τ| over facets with τ ≠ 0."""
        nonzero = np.abs(self.values[self.values != 0.0])
        if len(nonzero) == 0:
            return (0.0, 0.0)
        return (float(nonzero.min()), float(nonzero.max()))

    def element_values(self, mesh: Mesh) -> np.ndarray:
        """(nt, 3) τ seen from each local edge."""
        return self.values[mesh.element_facets]

    def audit(self, mesh: Mesh, classification: FacetClassification) -> None:
        """
        Check the sign table: zero on interface facets, sign of the
        element's subdomain on every other facet of that element.

        Raises:
            SolverError: Naming the first offending element and facet
        """
        if len(self.values) != mesh.n_facets:
            raise SolverError(f"TauField has {len(self.values)} values for {mesh.n_facets} facets")
        tau_e = self.element_values(mesh)
        on_interface = classification.labels[mesh.element_facets] == FacetLabel.INTERFACE
        expected_sign = np.broadcast_to(mesh.tags[:, None], tau_e.shape)
        bad = np.where(on_interface, tau_e != 0.0, np.sign(tau_e) != expected_sign)
        if np.any(bad):
            e, l = (int(i) for i in np.argwhere(bad)[0])
            facet = int(mesh.element_facets[e, l])
            raise SolverError(
                f"Stabilization violates the sign condition on facet {facet} of element {e} "
                f"(tag {int(mesh.tags[e]):+d}, tau {tau_e[e, l]:+.3e})")


def make_tau(mesh: Mesh, classification: FacetClassification, gamma: float = 1.0) -> TauField:
    """
    Sign-changing stabilization: +γ on facets of Ω₊, -γ on facets of Ω₋,
    exactly zero on the interface.

    Raises:
        SolverError: If gamma is not positive
    """
    if not gamma > 0:
        raise SolverError(f"Stabilization magnitude gamma must be positive, got {gamma}")
    labels = classification.labels
    values = np.zeros(mesh.n_facets)
    values[labels == FacetLabel.INTERIOR_PLUS] = gamma
    values[labels == FacetLabel.INTERIOR_MINUS] = -gamma
    boundary = (labels == FacetLabel.DIRICHLET) | (labels == FacetLabel.NEUMANN)
    values[boundary] = gamma * mesh.tags[mesh.facet_owners[boundary, 0]]
    values.flags.writeable = False
    return TauField(values=values, gamma=float(gamma))


# ============ Reference tables ============

@dataclass(frozen=True)
class ReferenceTables:
    """Integrals of basis products on the reference triangle and its edges."""
    degree: int
    n: int
    m: int
    vol_points: np.ndarray     # (nqv, 2)
    vol_weights: np.ndarray    # (nqv,)
    phi: np.ndarray            # (nqv, n)
    grad_mass: np.ndarray      # (2, n, n): ∫ ∂̂_d φ_j φ_i  stored [d, i, j]
    seg_points: np.ndarray     # (nqs,)
    seg_weights: np.ndarray    # (nqs,)
    edge_points: np.ndarray    # (3, nqs, 2)
    edge_phi: np.ndarray       # (3, nqs, n)
    edge_psi: np.ndarray       # (2, nqs, m): trace basis along / against the edge
    edge_mass: np.ndarray      # (3, n, n)
    edge_coupling: np.ndarray  # (3, 2, n, m)


@lru_cache(maxsize=None)
def reference_tables(k: int, quadrature_degree: int) -> ReferenceTables:
    W = make_basis(ElementKind.TRIANGLE, k)
    M = make_basis(ElementKind.SEGMENT, k)
    vol = make_quadrature(ElementKind.TRIANGLE, quadrature_degree)
    seg = make_quadrature(ElementKind.SEGMENT, quadrature_degree)

    phi = W.tabulate(vol.points)
    dphi = W.gradients(vol.points)
    grad_mass = np.einsum("q,qjd,qi->dij", vol.weights, dphi, phi)

    edge_points = np.stack([edge_reference_points(l, seg.points) for l in range(3)])
    edge_phi = np.stack([W.tabulate(p) for p in edge_points])
    edge_psi = np.stack([M.tabulate(seg.points), M.tabulate(1.0 - seg.points)])
    edge_mass = np.einsum("q,lqi,lqj->lij", seg.weights, edge_phi, edge_phi)
    edge_coupling = np.einsum("q,lqi,oqm->loim", seg.weights, edge_phi, edge_psi)

    return ReferenceTables(
        degree=k, n=W.dim, m=M.dim,
        vol_points=vol.points, vol_weights=vol.weights, phi=phi, grad_mass=grad_mass,
        seg_points=seg.points, seg_weights=seg.weights, edge_points=edge_points,
        edge_phi=edge_phi, edge_psi=edge_psi, edge_mass=edge_mass, edge_coupling=edge_coupling,
    )


def physical_edge_points(maps: AffineMaps, tables: ReferenceTables, elements) -> np.ndarray:
    """(ne, 3, nqs, 2) physical quadrature points on the three edges."""
    return (maps.origins[elements][:, None, None, :]
            + np.einsum("eij,lqj->elqi", maps.jacobians[elements], tables.edge_points))


# ============ Local systems ============

@dataclass(frozen=True)
class LocalElementSystem:
    """
    Batched local HDG blocks of a set of elements.

    Attributes:
        elements: (ne,) global element indices
        matrix: (ne, 3n, 3n) [[A, B], [Bᵀ, -C]]
        coupling: (ne, 3n, 3m) G, coupling to the traces of the three facets
        trace_block: (ne, 3m, 3m) D = diag(τ_ℓ |e_ℓ|)
        rhs: (ne, 3n) F from f and u_D
        trace_rhs: (ne, 3m) F̄ from u_N
    """
    elements: np.ndarray
    matrix: np.ndarray
    coupling: np.ndarray
    trace_block: np.ndarray
    rhs: np.ndarray
    trace_rhs: np.ndarray

    @property
    def n_flux(self) -> int:
        return 2 * (self.matrix.shape[1] // 3)

    @property
    def A(self) -> np.ndarray:
        return self.matrix[:, :self.n_flux, :self.n_flux]

    @property
    def B(self) -> np.ndarray:
        return self.matrix[:, :self.n_flux, self.n_flux:]

    @property
    def C(self) -> np.ndarray:
        return -self.matrix[:, self.n_flux:, self.n_flux:]


def assemble_local(
    elements: np.ndarray,
    mesh: Mesh,
    maps: AffineMaps,
    classification: FacetClassification,
    k: int,
    problem: ProblemData,
    tau: TauField,
    quadrature_degree: Optional[int] = None,
    check_quadrature: bool = False,
) -> LocalElementSystem:
    """
    Assemble the local blocks of a batch of elements.

    Args:
        elements: Global element indices
        quadrature_degree: Rule degree (default 2k+2)
        check_quadrature: Re-assemble with a rule two degrees higher and
            compare the matrices

    Raises:
        SolverError: If check_quadrature finds blocks differing by more than 1e-12
    """
    elements = np.atleast_1d(np.asarray(elements, dtype=np.int64))
    degree = 2 * k + 2 if quadrature_degree is None else int(quadrature_degree)
    local = _assemble_batch(elements, mesh, maps, classification,
                            reference_tables(k, degree), problem, tau)
    if check_quadrature:
        reference = _assemble_batch(elements, mesh, maps, classification,
                                    reference_tables(k, degree + 2), problem, tau)
        for name in ("matrix", "coupling", "trace_block"):
            ours, ref = getattr(local, name), getattr(reference, name)
            scale = max(float(np.max(np.abs(ref))), np.finfo(float).tiny)
            diff = float(np.max(np.abs(ours - ref))) / scale
            if diff > QUADRATURE_CHECK_TOL:
                raise SolverError(f"Quadrature degree {degree} is insufficient for k={k}: "
                                  f"{name} blocks differ by {diff:.2e} from degree {degree + 2}")
    return local


def _assemble_batch(
    elements: np.ndarray,
    mesh: Mesh,
    maps: AffineMaps,
    classification: FacetClassification,
    tables: ReferenceTables,
    problem: ProblemData,
    tau: TauField,
) -> LocalElementSystem:
    n, m = tables.n, tables.m
    ne = len(elements)
    det = maps.determinants[elements]
    lengths = maps.edge_lengths[elements]
    normals = maps.normals[elements]
    flips = mesh.element_flips[elements].astype(np.int64)
    tags = mesh.tags[elements]
    facets = mesh.element_facets[elements]
    tau_e = tau.values[facets]
    labels = classification.labels[facets]
    sigma = problem.sigma(tags)

    matrix = np.zeros((ne, 3 * n, 3 * n))
    mass = (det / sigma)[:, None, None] * np.eye(n)
    matrix[:, :n, :n] = mass
    matrix[:, n:2 * n, n:2 * n] = mass

    # (∂_c φ_j, φ_i)_K - ⟨φ_j, φ_i n_c⟩_∂K
    volume = np.einsum("e,ecd,dij->ecij", det, maps.inverse_transposes[elements], tables.grad_mass)
    boundary = np.einsum("el,elc,lij->ecij", lengths, normals, tables.edge_mass)
    B = (volume - boundary).reshape(ne, 2 * n, n)
    matrix[:, :2 * n, 2 * n:] = B
    matrix[:, 2 * n:, :2 * n] = B.transpose(0, 2, 1)
    matrix[:, 2 * n:, 2 * n:] = -np.einsum("el,lij->eij", tau_e * lengths, tables.edge_mass)

    oriented = tables.edge_coupling[np.arange(3)[None, :], flips]
    coupling_q = np.einsum("el,elc,elim->ecilm", lengths, normals, oriented).reshape(ne, 2 * n, 3 * m)
    coupling_u = np.einsum("el,elim->eilm", tau_e * lengths, oriented).reshape(ne, n, 3 * m)
    coupling = np.concatenate([coupling_q, coupling_u], axis=1)

    trace_diag = np.repeat(tau_e * lengths, m, axis=1)
    trace_block = trace_diag[:, :, None] * np.eye(3 * m)

    rhs = np.zeros((ne, 3 * n))
    points = maps.to_physical(tables.vol_points, elements)
    nqv = points.shape[1]
    f = problem.source(points.reshape(-1, 2), np.repeat(tags, nqv)).reshape(ne, nqv)
    rhs[:, 2 * n:] = det[:, None] * np.einsum("q,eq,qi->ei", tables.vol_weights, f, tables.phi)

    trace_rhs = np.zeros((ne, 3, m))
    dirichlet = labels == FacetLabel.DIRICHLET
    neumann = labels == FacetLabel.NEUMANN
    if dirichlet.any() or neumann.any():
        edge_x = physical_edge_points(maps, tables, elements)
        nqs = edge_x.shape[2]
        edge_tags = np.broadcast_to(tags[:, None], (ne, 3))

        if dirichlet.any():
            g = np.zeros((ne, 3, nqs))
            g[dirichlet] = problem.dirichlet(
                edge_x[dirichlet].reshape(-1, 2), np.repeat(edge_tags[dirichlet], nqs)
            ).reshape(-1, nqs)
            moments = np.einsum("q,elq,lqi->eli", tables.seg_weights, g, tables.edge_phi)
            rhs[:, :2 * n] -= np.einsum("el,elc,eli->eci", lengths, normals, moments).reshape(ne, 2 * n)
            rhs[:, 2 * n:] -= np.einsum("el,eli->ei", tau_e * lengths, moments)

        if neumann.any():
            g = np.zeros((ne, 3, nqs))
            edge_n = np.broadcast_to(normals[:, :, None, :], edge_x.shape)
            g[neumann] = problem.neumann(
                edge_x[neumann].reshape(-1, 2), edge_n[neumann].reshape(-1, 2),
                np.repeat(edge_tags[neumann], nqs),
            ).reshape(-1, nqs)
            psi = tables.edge_psi[flips]
            trace_rhs = np.einsum("el,q,elq,elqm->elm", lengths, tables.seg_weights, g, psi)

    return LocalElementSystem(
        elements=elements,
        matrix=matrix,
        coupling=coupling,
        trace_block=trace_block,
        rhs=rhs,
        trace_rhs=trace_rhs.reshape(ne, 3 * m),
    )


# ============ Static condensation ============

@dataclass(frozen=True)
class CondensedElements:
    """
    Schur complements of a batch of elements and what recovery needs.

    Attributes:
        elements: (ne,) global element indices
        schur: (ne, 3m, 3m) S_K
        rhs: (ne, 3m) g_K
        lift_coupling: (ne, 3n, 3m) M_K⁻¹ G_K
        lift_rhs: (ne, 3n) M_K⁻¹ F_K
    """
    elements: np.ndarray
    schur: np.ndarray
    rhs: np.ndarray
    lift_coupling: np.ndarray
    lift_rhs: np.ndarray


def condense(local: LocalElementSystem) -> CondensedElements:
    """
    Eliminate (q_h, u_h) element by element.

    Raises:
        SingularMatrixError: If some local (q, u) block is singular; the
            element is named, which usually means τ vanishes on all its facets
    """
    stacked = np.concatenate([local.coupling, local.rhs[:, :, None]], axis=2)
    try:
        solved = batched_solve(local.matrix, stacked)
    except SingularMatrixError as err:
        element = int(local.elements[err.element]) if err.element is not None else None
        raise SingularMatrixError(
            f"Local (q, u) block of element {element} is singular; "
            f"check the stabilization on its facets", pivot=err.pivot, element=element,
        ) from err
    lift_coupling = solved[:, :, :-1]
    lift_rhs = solved[:, :, -1]
    schur = np.einsum("eji,ejk->eik", local.coupling, lift_coupling) + local.trace_block
    rhs = np.einsum("eji,ej->ei", local.coupling, lift_rhs) - local.trace_rhs
    return CondensedElements(
        elements=local.elements,
        schur=schur,
        rhs=rhs,
        lift_coupling=lift_coupling,
        lift_rhs=lift_rhs,
    )


# ============ Global solve ============

@dataclass
class TraceSystem:
    matrix: object
    rhs: np.ndarray
    condensed: list
    factorization: Optional[SuperLU] = None


class HdgSolver(BaseSolver):
    """
    Condensed HDG solve: trace system by sparse LU, then local recovery.

    Recovery is followed by `refinement_steps` rounds of iterative
    refinement on the full (q, u, ū) system: residuals accumulated in
    extended precision, condensed with fresh local solves, and corrected
    with the existing trace factorization. The trace matrix is badly
    conditioned for contrasts close to the critical value.
    """
    method = Method.HDG
    min_degree = 0

    def __init__(
        self,
        mesh: Mesh,
        classification: FacetClassification,
        k: int,
        problem: ProblemData,
        tau: TauField,
        quadrature_degree: Optional[int] = None,
        chunk_size: int = CHUNK_SIZE,
        check_quadrature: bool = False,
        refinement_steps: int = REFINEMENT_STEPS,
    ):
        super().__init__(mesh, classification, k, problem, quadrature_degree)
        tau.audit(mesh, classification)
        if refinement_steps < 0:
            raise SolverError(f"refinement_steps must be non-negative, got {refinement_steps}")
        self.tau = tau
        self.maps = make_affine_maps(mesh)
        self.chunk_size = int(chunk_size)
        self.check_quadrature = check_quadrature
        self.refinement_steps = int(refinement_steps)
        self.m = k + 1

        free = classification.free_facets()
        self.facet_dofs = np.full(mesh.n_facets, -1, dtype=np.int64)
        self.facet_dofs[free] = np.arange(len(free))
        self.n_trace = len(free) * self.m

    def local_dofs(self, elements) -> np.ndarray:
        """(ne, 3m) global trace unknowns of each element, -1 on Dirichlet facets."""
        fd = self.facet_dofs[self.mesh.element_facets[elements]]
        dofs = fd[:, :, None] * self.m + np.arange(self.m)
        dofs[fd < 0] = -1
        return dofs.reshape(len(fd), 3 * self.m)

    def chunks(self) -> Iterator[np.ndarray]:
        nt = self.mesh.n_triangles
        for start in range(0, nt, self.chunk_size):
            yield np.arange(start, min(start + self.chunk_size, nt))

    def assemble_local(self, elements) -> LocalElementSystem:
        return assemble_local(elements, self.mesh, self.maps, self.classification, self.k,
                              self.problem, self.tau, self.quadrature_degree, self.check_quadrature)

    def _assemble(self) -> TraceSystem:
        rows, cols, vals, rhs_idx, rhs_val, condensed = [], [], [], [], [], []
        for elements in self.chunks():
            block = condense(self.assemble_local(elements))
            dofs = self.local_dofs(elements)
            r = np.broadcast_to(dofs[:, :, None], block.schur.shape)
            c = np.broadcast_to(dofs[:, None, :], block.schur.shape)
            keep = (r >= 0) & (c >= 0)
            rows.append(r[keep])
            cols.append(c[keep])
            vals.append(block.schur[keep])
            active = dofs >= 0
            rhs_idx.append(dofs[active])
            rhs_val.append(block.rhs[active])
            condensed.append(block)
            logger.debug(f"Condensed elements {elements[0]}..{elements[-1]}")

        matrix = assemble_csr(np.concatenate(rows), np.concatenate(cols),
                              np.concatenate(vals), self.n_trace)
        rhs = np.bincount(np.concatenate(rhs_idx), weights=np.concatenate(rhs_val),
                          minlength=self.n_trace).astype(float)
        logger.info(f"HDG k={self.k}: {self.n_trace} trace unknowns, {matrix.nnz} nonzeros")
        return TraceSystem(matrix=matrix, rhs=rhs, condensed=condensed)

    def _solve_system(self, system: TraceSystem) -> np.ndarray:
        if self.n_trace == 0:
            return np.zeros(0)
        asymmetry = matrix_asymmetry(system.matrix)
        logger.debug(f"Trace matrix asymmetry {asymmetry:.2e}")
        system.factorization = sparse_lu_factor(system.matrix)
        return sparse_lu_solve(system.matrix, system.rhs, factorization=system.factorization)

    def _recover(self, system: TraceSystem, values: np.ndarray) -> DiscreteSolution:
        x = self._lift(system, values)
        for step in range(self.refinement_steps):
            x, values, residual = self._refine(system, x, values)
            logger.debug(f"HDG k={self.k}: refinement step {step + 1}, residual {residual:.3e}")
            if residual == 0.0:
                break

        dim = x.shape[1] // 3
        return DiscreteSolution(
            method=Method.HDG,
            mesh=self.mesh,
            classification=self.classification,
            degree=self.k,
            u=x[:, 2 * dim:],
            q=x[:, :2 * dim].reshape(-1, 2, dim),
            ubar=self._scatter_trace(values),
            trace_matrix=system.matrix,
            tau=self.tau,
        )

    def _lift(self, system: TraceSystem, values: np.ndarray) -> np.ndarray:
        """(nt, 3n) element unknowns [q₁, q₂, u] from the trace values."""
        padded = np.append(values, 0.0)
        x = np.empty((self.mesh.n_triangles, system.condensed[0].lift_rhs.shape[1]))
        for block in system.condensed:
            local_trace = padded[self.local_dofs(block.elements)]
            x[block.elements] = block.lift_rhs - np.einsum("eij,ej->ei", block.lift_coupling, local_trace)
        return x

    def _refine(self, system: TraceSystem, x: np.ndarray, values: np.ndarray):
        """
        One step of iterative refinement on the uncondensed system.

        Returns:
            (x, values, residual): corrected unknowns and the largest entry of
            the residual they were corrected for
        """
        ext = np.longdouble
        padded = np.append(values, 0.0).astype(ext)
        trace_res = np.zeros(self.n_trace + 1, dtype=ext)  # last slot collects Dirichlet rows
        lifted = np.empty_like(x)
        rhs_idx, rhs_val = [], []
        largest = 0.0

        for elements in self.chunks():
            local = assemble_local(elements, self.mesh, self.maps, self.classification, self.k,
                                   self.problem, self.tau, self.quadrature_degree)
            dofs = self.local_dofs(elements)
            xe = x[elements].astype(ext)
            te = padded[dofs]
            G = local.coupling.astype(ext)

            element_res = (local.rhs.astype(ext)
                           - np.einsum("eij,ej->ei", local.matrix.astype(ext), xe)
                           - np.einsum("eij,ej->ei", G, te))
            np.add.at(trace_res, dofs, local.trace_rhs.astype(ext)
                      - np.einsum("eji,ej->ei", G, xe)
                      + np.einsum("eij,ej->ei", local.trace_block.astype(ext), te))

            element_res = element_res.astype(float)
            largest = max(largest, float(np.max(np.abs(element_res))))
            lifted[elements] = batched_solve(local.matrix, element_res[:, :, None],
                                             first_element=int(elements[0]))[:, :, 0]
            active = dofs >= 0
            rhs_idx.append(dofs[active])
            rhs_val.append(np.einsum("eji,ej->ei", local.coupling, lifted[elements])[active])

        trace_res = trace_res[:-1].astype(float)
        if self.n_trace:
            largest = max(largest, float(np.max(np.abs(trace_res))))
        if largest == 0.0:
            return x, values, 0.0

        delta = np.zeros(0)
        if self.n_trace:
            rhs = np.bincount(np.concatenate(rhs_idx), weights=np.concatenate(rhs_val),
                              minlength=self.n_trace) - trace_res
            delta = system.factorization.solve(rhs)
        padded_delta = np.append(delta, 0.0)
        for block in system.condensed:
            local_delta = padded_delta[self.local_dofs(block.elements)]
            lifted[block.elements] -= np.einsum("eij,ej->ei", block.lift_coupling, local_delta)
        return x + lifted, values + delta, largest

    def _scatter_trace(self, values: np.ndarray) -> np.ndarray:
        ubar = np.zeros((self.mesh.n_facets, self.m))
        free = self.facet_dofs >= 0
        ubar[free] = values.reshape(-1, self.m)
        return ubar


def solve_hdg(
    mesh: Mesh,
    classification: FacetClassification,
    k: int,
    problem: ProblemData,
    tau: TauField,
    quadrature_degree: Optional[int] = None,
) -> DiscreteSolution:
    """
    Solve the HDG system by static condensation onto the facet traces.

    Dirichlet facets carry no unknowns; u_D enters through the local
    right-hand sides.

    Raises:
        SolverError: If the stabilization violates the sign condition
        SingularMatrixError: If a local block or the trace matrix is singular
    """
    return HdgSolver(mesh, classification, k, problem, tau, quadrature_degree).solve()


def solve_hdg_monolithic(
    mesh: Mesh,
    classification: FacetClassification,
    k: int,
    problem: ProblemData,
    tau: TauField,
    quadrature_degree: Optional[int] = None,
) -> DiscreteSolution:
    """
    Solve the full (q_h, u_h, ū_h) system densely, without condensation.

    Only meant for small meshes, as a reference for the condensed solve.

    Raises:
        SolverError: If the mesh has more than MONOLITHIC_MAX_ELEMENTS cells
    """
    if mesh.n_triangles > MONOLITHIC_MAX_ELEMENTS:
        raise SolverError(f"Monolithic solve limited to {MONOLITHIC_MAX_ELEMENTS} cells, "
                          f"mesh has {mesh.n_triangles}")
    solver = HdgSolver(mesh, classification, k, problem, tau, quadrature_degree)
    local = solver.assemble_local(np.arange(mesh.n_triangles))
    nt, size = local.matrix.shape[:2]
    n_local = nt * size
    total = n_local + solver.n_trace

    matrix = np.zeros((total, total))
    rhs = np.zeros(total)
    dofs = solver.local_dofs(np.arange(nt))
    for e in range(nt):
        block = slice(e * size, (e + 1) * size)
        matrix[block, block] = local.matrix[e]
        rhs[block] = local.rhs[e]
        keep = dofs[e] >= 0
        trace = n_local + dofs[e][keep]
        matrix[block, trace] += local.coupling[e][:, keep]
        matrix[trace, block] += local.coupling[e][:, keep].T
        matrix[np.ix_(trace, trace)] -= local.trace_block[e][np.ix_(keep, keep)]
        rhs[trace] += local.trace_rhs[e][keep]

    x = dense_lu_solve(matrix, rhs)
    dim = size // 3
    elementwise = x[:n_local].reshape(nt, size)
    return DiscreteSolution(
        method=Method.HDG,
        mesh=mesh,
        classification=classification,
        degree=k,
        u=elementwise[:, 2 * dim:],
        q=elementwise[:, :2 * dim].reshape(nt, 2, dim),
        ubar=solver._scatter_trace(x[n_local:]),
        tau=tau,
    )


# ============ Residuals ============

def numerical_flux_moments(solution: DiscreteSolution, maps: Optional[AffineMaps] = None) -> np.ndarray:
    """
    Moments ⟨q_h·n + τ(u_h - ū_h), μ_m⟩_e of every element edge.

    Returns:
        (nt, 3, k+1) array, in the facet orientation of the trace basis
    """
    if solution.q is None or solution.ubar is None or solution.tau is None:
        raise SolverError("Numerical flux needs an HDG solution")
    mesh = solution.mesh
    maps = make_affine_maps(mesh) if maps is None else maps
    tables = reference_tables(solution.degree, 2 * solution.degree + 2)
    flips = mesh.element_flips.astype(np.int64)
    oriented = tables.edge_coupling[np.arange(3)[None, :], flips]
    tau_e = solution.tau.element_values(mesh)
    lengths = maps.edge_lengths

    flux = np.einsum("el,elc,elim,eci->elm", lengths, maps.normals, oriented, solution.q)
    trace_u = np.einsum("elim,ei->elm", oriented, solution.u)
    ubar = solution.ubar[mesh.element_facets]
    return flux + (tau_e * lengths)[:, :, None] * (trace_u - ubar)


def hdg_equation_residual(
    solution: DiscreteSolution,
    problem: ProblemData,
    quadrature_degree: Optional[int] = None,
) -> float:
    """
    Re-evaluate all local and trace equations at a computed solution.

    Returns:
        Largest residual entry relative to the largest term entering it
    """
    mesh, classification = solution.mesh, solution.classification
    maps = make_affine_maps(mesh)
    nt = mesh.n_triangles
    local = assemble_local(np.arange(nt), mesh, maps, classification, solution.degree,
                           problem, solution.tau, quadrature_degree)
    x = np.concatenate([solution.q.reshape(nt, -1), solution.u], axis=1)
    trace = solution.ubar[mesh.element_facets].reshape(nt, -1)

    Mx = np.einsum("eij,ej->ei", local.matrix, x)
    Gt = np.einsum("eij,ej->ei", local.coupling, trace)
    element_res = Mx + Gt - local.rhs

    Gx = np.einsum("eji,ej->ei", local.coupling, x)
    Dt = np.einsum("eij,ej->ei", local.trace_block, trace)
    per_edge = (Gx - Dt - local.trace_rhs).reshape(nt, 3, -1)
    facet_res = np.zeros_like(solution.ubar)
    np.add.at(facet_res, mesh.element_facets, per_edge)
    facet_res[classification.dirichlet] = 0.0

    scale = max(float(np.max(np.abs(a))) if a.size else 0.0
                for a in (Mx, Gt, local.rhs, Gx, Dt, local.trace_rhs))
    if scale == 0.0:
        return 0.0
    return max(float(np.max(np.abs(element_res))), float(np.max(np.abs(facet_res)))) / scale

"""
Error Metrics
=============
Discretization errors against an exact solution, convergence tables with
estimated orders of convergence, and conservativity diagnostics.

Norms:
    e_u     = ‖u - u_h‖_Ω
    e_q_l2  = ‖q - q_h‖_Ω
    e_q_vh  = (|σ|⁻¹ (q - q_h), q - q_h)_Ω^½
    e_ubar  = ⟨P_M u - ū_h, P_M u - ū_h⟩^½ over element boundaries off Γ_D
    e_ustar = ‖u - u_h*‖_Ω
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from errors import SignHdgError
from fem.basis import ElementKind, edge_reference_points, make_basis
from fem.geometry import make_affine_maps
from fem.quadrature import make_quadrature
from meshing.facets import FacetLabel
from solvers.base_solver import DiscreteSolution
from solvers.hdg_solver import numerical_flux_moments
from solvers.postprocess import PostprocessedField
from solvers.problem_data import ProblemData

logger = logging.getLogger(__name__)

ERROR_KEYS = ("e_u", "e_q_l2", "e_q_vh", "e_ubar", "e_ustar")
RATE_KEYS = {key: "rate_" + key[2:] for key in ERROR_KEYS}
COLUMNS = ["cells", "h"] + [col for key in ERROR_KEYS for col in (key, RATE_KEYS[key])]


class MetricsError(SignHdgError):
    module = "metrics"


@dataclass(frozen=True)
class ErrorReport:
    """Errors of one solve; e_ubar / e_ustar absent for CG."""
    cells: int
    h: float
    e_u: float
    e_q_l2: float
    e_q_vh: float
    e_ubar: Optional[float] = None
    e_ustar: Optional[float] = None

    def __post_init__(self):
        for key in ("h",) + ERROR_KEYS:
            value = getattr(self, key)
            if value is not None and not (math.isfinite(value) and value >= 0.0):
                raise MetricsError(f"{key} must be finite and non-negative, got {value}")

    def error(self, key: str) -> Optional[float]:
        return getattr(self, key)

    def to_row(self) -> Dict[str, Optional[float]]:
        return {"cells": self.cells, "h": self.h, **{key: getattr(self, key) for key in ERROR_KEYS}}


@dataclass
class ConvergenceTable:
    """
    Error reports over a refinement sequence, coarse to fine.

    Attributes:
        method: "hdg" or "cg"
        degree: Polynomial degree k
        rows: ErrorReports with strictly decreasing h
        rates: Per error key, one rate per row (None for the first row)
    """
    method: str
    degree: int
    rows: List[ErrorReport] = field(default_factory=list)
    rates: Dict[str, List[Optional[float]]] = field(default_factory=dict)

    def add(self, report: ErrorReport) -> None:
        if self.rows and not report.h < self.rows[-1].h:
            raise MetricsError(f"Rows must have strictly decreasing h: {report.h} after {self.rows[-1].h}")
        self.rows.append(report)

    def rate(self, key: str) -> List[Optional[float]]:
        return self.rates.get(key, [None] * len(self.rows))

    def to_frame(self) -> pd.DataFrame:
        """Rows in CSV column order; absent values are NaN."""
        records = []
        for i, report in enumerate(self.rows):
            record = report.to_row()
            for key in ERROR_KEYS:
                record[RATE_KEYS[key]] = self.rate(key)[i]
            records.append(record)
        frame = pd.DataFrame.from_records(records, columns=COLUMNS)
        frame["cells"] = frame["cells"].astype("int64")
        return frame.astype({col: "float64" for col in COLUMNS if col != "cells"})


# ============ Errors ============

def compute_errors(
    solution: DiscreteSolution,
    postprocessed: Optional[PostprocessedField],
    problem: ProblemData,
    quadrature_degree: Optional[int] = None,
) -> ErrorReport:
    """
    Compute all error norms of a solution.

    Args:
        solution: HDG or CG solution
        postprocessed: u_h* (falls back to solution.u_star, may be absent)
        problem: Must carry the exact u and q
        quadrature_degree: Default 2k+4

    Raises:
        MetricsError: If the problem has no exact solution
    """
    if not problem.has_exact:
        raise MetricsError(f"Problem {problem.name} has no exact solution to compare against")
    mesh = solution.mesh
    k = solution.degree
    degree = 2 * k + 4 if quadrature_degree is None else int(quadrature_degree)
    maps = make_affine_maps(mesh)
    rule = make_quadrature(ElementKind.TRIANGLE, degree)

    points = maps.to_physical(rule.points)
    nq = points.shape[1]
    tags = np.repeat(mesh.tags, nq)
    flat = points.reshape(-1, 2)
    weights = maps.determinants[:, None] * rule.weights[None, :]

    u_exact = problem.u(flat, tags).reshape(-1, nq)
    e_u = _volume_norm(weights, u_exact - solution.evaluate_u(rule.points))

    q_exact = problem.q(flat, tags).reshape(-1, nq, 2)
    q_diff = np.sum((q_exact - solution.evaluate_q(rule.points)) ** 2, axis=2)
    e_q_l2 = math.sqrt(float(np.sum(weights * q_diff)))
    inv_sigma = 1.0 / np.abs(problem.sigma(mesh.tags))
    e_q_vh = math.sqrt(float(np.sum(inv_sigma[:, None] * weights * q_diff)))

    e_ustar = None
    if postprocessed is not None:
        e_ustar = _volume_norm(weights, u_exact - postprocessed.evaluate(rule.points))
    elif solution.u_star is not None:
        e_ustar = _volume_norm(weights, u_exact - solution.evaluate_u_star(rule.points))

    e_ubar = trace_error(solution, problem, degree) if solution.ubar is not None else None

    report = ErrorReport(cells=mesh.n_triangles, h=mesh.h, e_u=e_u, e_q_l2=e_q_l2,
                         e_q_vh=e_q_vh, e_ubar=e_ubar, e_ustar=e_ustar)
    logger.debug(f"Errors on {mesh.n_triangles} cells: {report.to_row()}")
    return report


def trace_error(solution: DiscreteSolution, problem: ProblemData, quadrature_degree: int) -> float:
    """
    ⟨P_M u - ū_h, P_M u - ū_h⟩^½ summed over element boundaries, Dirichlet
    facets excluded; interior facets count once per owner.
    """
    mesh = solution.mesh
    maps = make_affine_maps(mesh)
    seg = make_quadrature(ElementKind.SEGMENT, quadrature_degree)
    trace_basis = make_basis(ElementKind.SEGMENT, solution.degree)
    psi = np.stack([trace_basis.tabulate(seg.points), trace_basis.tabulate(1.0 - seg.points)])
    labels = solution.classification.labels[mesh.element_facets]

    total = 0.0
    for l in range(3):
        hit = np.flatnonzero(labels[:, l] != FacetLabel.DIRICHLET)
        if len(hit) == 0:
            continue
        x = maps.to_physical(edge_reference_points(l, seg.points), hit)
        u = problem.u(x.reshape(-1, 2), np.repeat(mesh.tags[hit], len(seg.points))).reshape(len(hit), -1)
        oriented = psi[mesh.element_flips[hit, l].astype(np.int64)]
        projection = np.einsum("q,eq,eqm->em", seg.weights, u, oriented)
        diff = projection - solution.ubar[mesh.element_facets[hit, l]]
        total += float(np.sum(maps.edge_lengths[hit, l] * np.sum(diff ** 2, axis=1)))
    return math.sqrt(total)


def _volume_norm(weights: np.ndarray, diff: np.ndarray) -> float:
    return math.sqrt(float(np.sum(weights * diff ** 2)))


def solution_norms(solution: DiscreteSolution) -> Dict[str, float]:
    """L² norms of u_h, q_h and ū_h (facet norm) from their orthonormal coefficients."""
    maps = make_affine_maps(solution.mesh)
    det = maps.determinants
    norms = {"u": math.sqrt(float(np.sum(det * np.sum(solution.u ** 2, axis=1))))}
    if solution.q is not None:
        norms["q"] = math.sqrt(float(np.sum(det * np.sum(solution.q ** 2, axis=(1, 2)))))
    if solution.ubar is not None:
        lengths = solution.mesh.facet_lengths()
        norms["ubar"] = math.sqrt(float(np.sum(lengths * np.sum(solution.ubar ** 2, axis=1))))
    return norms


# ============ Rates ============

def convergence_rate(e_coarse, e_fine, h_coarse: float, h_fine: float) -> Optional[float]:
    """log(e_c/e_f)/log(h_c/h_f); None when an error is absent or zero."""
    if e_coarse is None or e_fine is None or e_coarse <= 0.0 or e_fine <= 0.0:
        return None
    if h_coarse == h_fine:
        return None
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def compute_rates(table: ConvergenceTable) -> ConvergenceTable:
    """
    Fill the rate columns between consecutive rows.

    Raises:
        MetricsError: If the table is empty
    """
    if not table.rows:
        raise MetricsError("Cannot compute rates of an empty table")
    rates: Dict[str, List[Optional[float]]] = {}
    for key in ERROR_KEYS:
        column: List[Optional[float]] = [None]
        for coarse, fine in zip(table.rows[:-1], table.rows[1:]):
            column.append(convergence_rate(coarse.error(key), fine.error(key), coarse.h, fine.h))
        rates[key] = column
    return replace(table, rows=list(table.rows), rates=rates)


# ============ Conservativity ============

def flux_jump_residual(solution: DiscreteSolution) -> float:
    """
    Largest P_k moment of the jump of q_h·n + τ(u_h - ū_h) over interior
    and interface facets (0 when there are none).
    """
    mesh = solution.mesh
    moments = numerical_flux_moments(solution)
    jump = np.zeros((mesh.n_facets, moments.shape[2]))
    np.add.at(jump, mesh.element_facets, moments)
    interior = mesh.facet_owners[:, 1] >= 0
    if not np.any(interior):
        return 0.0
    return float(np.max(np.abs(jump[interior])))

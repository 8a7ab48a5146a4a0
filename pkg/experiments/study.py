"""
Experiment Drivers
==================
Convergence studies and field/slice output over a RunConfig.

Usage:
    config = load_config("config/symmetric.env", k=(2,))
    results = run_convergence_study(config)
    fields = run_field_output(load_config("config/metamaterial.env"))
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from errors import SignHdgError
from fem.basis import ElementKind, lagrange_nodes, make_basis
from fem.geometry import make_affine_maps
from fem.linalg import matrix_asymmetry
from meshing.domain import DomainSpec
from meshing.facets import FacetClassification, classify_facets
from meshing.mesh_builder import Mesh, MeshPattern, build_mapped_mesh, build_structured_mesh
from meshing.mesh_io import write_mesh
from solvers.base_solver import DiscreteSolution, Method, SolverFactory
from solvers.postprocess import postprocess
from solvers.problem_data import ProblemData
from utils.metrics import (
    ConvergenceTable, ErrorReport, compute_errors, compute_rates, flux_jump_residual,
    solution_norms,
)
from utils.problems import Experiment, get_problem
from utils.run_config import ConfigError, RunConfig, atomic_write_text, load_config, write_metadata

logger = logging.getLogger(__name__)

CSV_OPTIONS = dict(index=False, float_format="%.5e", na_rep="", lineterminator="\n")
SYMMETRY_TOL = 1e-12
FLUX_JUMP_TOL = 1e-9

DESIGN_FACTS = {
    "sign_convention": "div(sigma grad u) = f with q = -sigma grad u",
    "dirichlet_traces": "eliminated",
    "tau_interface": "0",
    "assembly_quadrature": "2k+2 unless quadrature_degree is set",
    "error_quadrature": "2k+4",
    "trace_error_facets": "element boundaries without dirichlet facets",
}


@dataclass
class LevelResult:
    """Outcome of one (method, k, n) solve."""
    method: str
    degree: int
    n: int
    report: Optional[ErrorReport] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)
    error: Optional[SignHdgError] = None


@dataclass
class StudyResult:
    """One convergence table with its files and the failure that cut it short, if any."""
    method: str
    degree: int
    table: ConvergenceTable
    csv_path: Path
    meta_path: Path
    levels: List[LevelResult] = field(default_factory=list)
    failure: Optional[str] = None
    failure_module: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


# ============ Meshes and solves ============

def build_mesh(domain: DomainSpec, n: int, pattern: "MeshPattern | str") -> Tuple[Mesh, FacetClassification]:
    """Structured mesh for vertical interfaces, mapped mesh for slanted ones."""
    vertical = all(len({round(p[0], 12) for p in chain}) == 1 for chain in domain.interfaces)
    builder = build_structured_mesh if vertical else build_mapped_mesh
    mesh = builder(domain, n, pattern)
    return mesh, classify_facets(mesh, domain)


def solve(
    config: RunConfig,
    problem: ProblemData,
    method: str,
    k: int,
    n: int,
) -> DiscreteSolution:
    """Mesh level n, solve with one method and post-process HDG solutions."""
    mesh, classification = build_mesh(problem.domain, n, config.mesh_pattern)
    solver = SolverFactory.get_solver(method, mesh, classification, k, problem,
                                      gamma=config.gamma, quadrature_degree=config.quadrature_degree)
    solution = solver.solve()
    if solution.method is Method.HDG:
        solution = solution.with_postprocessed(postprocess(solution, problem).coefficients)
    return solution


def run_level(config: RunConfig, problem: ProblemData, method: str, k: int, n: int) -> LevelResult:
    """Solve one level and measure errors; module errors are captured, not raised."""
    result = LevelResult(method=method, degree=k, n=n)
    start = time.perf_counter()
    try:
        solution = solve(config, problem, method, k, n)
        result.report = compute_errors(solution, None, problem)
        result.diagnostics = diagnostics(solution)
    except SignHdgError as e:
        result.error = e
        logger.error(f"{method} k={k} n={n}: {e.module}: {e}")
        return result
    logger.info(f"{method} k={k} n={n}: {result.report.cells} cells, e_u={result.report.e_u:.3e} "
                f"({time.perf_counter() - start:.1f}s)")
    return result


def diagnostics(solution: DiscreteSolution) -> Dict[str, float]:
    """Matrix asymmetry and, for HDG, the flux jump relative to ‖q_h‖."""
    values: Dict[str, float] = {}
    if solution.trace_matrix is not None:
        values["asymmetry"] = matrix_asymmetry(solution.trace_matrix)
        if values["asymmetry"] > SYMMETRY_TOL:
            logger.warning(f"Global matrix asymmetry {values['asymmetry']:.2e} exceeds {SYMMETRY_TOL}")
    if solution.method is Method.HDG:
        q_norm = solution_norms(solution)["q"]
        jump = flux_jump_residual(solution)
        values["flux_jump"] = jump / q_norm if q_norm > 0 else jump
        if values["flux_jump"] > FLUX_JUMP_TOL:
            logger.warning(f"Numerical flux jump {values['flux_jump']:.2e} exceeds {FLUX_JUMP_TOL}")
    return values


# ============ Convergence study ============

def table_stem(config: RunConfig, method: str, k: int) -> str:
    return f"{config.experiment}_{method}_k{k}"


def run_convergence_study(config: RunConfig) -> List[StudyResult]:
    """
    Run every (method, k) refinement series and write one CSV per series.

    A failing level ends its own series only; the table keeps the levels
    that completed before it.

    Raises:
        ConfigError: If the experiment has no exact solution
    """
    experiment = Experiment.parse(config.experiment)
    if not experiment.has_exact_solution:
        raise ConfigError(f"Experiment {experiment.value} has no exact solution; use field output")
    problem = get_problem(experiment, config.sigma_plus, config.kappa)
    series = [(method, k) for method in config.methods for k in config.k]
    logger.info(f"Study {experiment.value}: {len(series)} series x {len(config.levels)} levels, "
                f"{config.workers} worker(s)")

    results = []
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        futures = {
            (method, k): [executor.submit(run_level, config, problem, method, k, n) for n in config.levels]
            for method, k in series
        }
        for method, k in series:
            results.append(_collect_series(config, method, k, futures[(method, k)]))
    return results


def _collect_series(config: RunConfig, method: str, k: int, futures) -> StudyResult:
    """
    Gather one series in level order. The CSV is rewritten atomically after
    every completed level, so it always holds the finished prefix.
    """
    table = ConvergenceTable(method=method, degree=k)
    levels: List[LevelResult] = []
    failure = failure_module = None
    out = Path(config.output_dir)
    stem = table_stem(config, method, k)
    csv_path = out / f"{stem}.csv"
    for i, future in enumerate(futures):
        level = future.result()
        levels.append(level)
        if level.error is not None:
            failure = f"level n={level.n}: {level.error}"
            failure_module = level.error.module
            for pending in futures[i + 1:]:
                pending.cancel()
            break
        table.add(level.report)
        table = compute_rates(table)
        atomic_write_text(csv_path, table.to_frame().to_csv(**CSV_OPTIONS))
        logger.debug(f"Wrote level n={level.n} to {csv_path}")
    if not table.rows:
        atomic_write_text(csv_path, table.to_frame().to_csv(**CSV_OPTIONS))

    extra = {"method": method, "degree": str(k), "status": "ok" if failure is None else f"failed at {failure}",
             **DESIGN_FACTS}
    meta_path = write_metadata(out / f"{stem}.meta.env", config, extra)
    logger.info(f"Wrote {csv_path} ({len(table.rows)} rows)")
    return StudyResult(method=method, degree=k, table=table, csv_path=csv_path, meta_path=meta_path,
                       levels=levels, failure=failure, failure_module=failure_module)


# ============ Field and slice output ============

@dataclass
class FieldOutput:
    field_paths: Dict[str, Path]
    slice_path: Path
    meta_path: Path
    slice_frame: pd.DataFrame
    discrepancy: Optional[float] = None


def slice_points(domain: DomainSpec, x2: float, count: int) -> np.ndarray:
    """
    Evenly spaced points on the horizontal line x₂ = const across Ω.

    Raises:
        ConfigError: If the line does not lie in the domain
    """
    xmin, xmax, ymin, ymax = domain.bounds
    if not ymin <= x2 <= ymax:
        raise ConfigError(f"Slice line x2={x2} lies outside the domain {domain.name} "
                          f"(x2 in [{ymin}, {ymax}])")
    points = np.column_stack([np.linspace(xmin, xmax, count), np.full(count, float(x2))])
    if not np.all(domain.contains(points)):
        raise ConfigError(f"Slice line x2={x2} leaves the domain {domain.name}")
    return points


def sample_at_points(solution: DiscreteSolution, points: np.ndarray) -> np.ndarray:
    """Values of u_h at physical points (first containing element wins)."""
    elements, ref = solution.mesh.locate_points(points)
    if np.any(elements < 0):
        raise ConfigError(f"{int(np.sum(elements < 0))} sample points lie outside the mesh")
    phi = make_basis(ElementKind.TRIANGLE, solution.degree).tabulate(ref)
    return np.einsum("pn,pn->p", solution.u[elements], phi)


def slice_discrepancy(u_hdg: np.ndarray, u_cg: np.ndarray) -> float:
    """max |u_hdg - u_cg| / max |u_hdg| over a slice."""
    scale = float(np.max(np.abs(u_hdg)))
    if scale == 0.0:
        raise ConfigError("HDG slice is identically zero; discrepancy undefined")
    return float(np.max(np.abs(u_hdg - u_cg))) / scale


def field_frame(solution: DiscreteSolution, order: int) -> pd.DataFrame:
    """Per-element samples of u_h (and u_h*) on a lattice of reference points."""
    ref = lagrange_nodes(order)
    maps = make_affine_maps(solution.mesh)
    x = maps.to_physical(ref)
    nt, npts = x.shape[:2]
    data = {
        "element": np.repeat(np.arange(nt), npts),
        "x1": x[..., 0].reshape(-1),
        "x2": x[..., 1].reshape(-1),
        "u_h": solution.evaluate_u(ref).reshape(-1),
    }
    if solution.u_star is not None:
        data["u_star"] = solution.evaluate_u_star(ref).reshape(-1)
    return pd.DataFrame(data)


def run_field_output(config: RunConfig) -> FieldOutput:
    """
    Solve one mesh level per method, write field samples and a slice.

    Raises:
        ConfigError: If more than one level or degree is configured, or the
            slice line is outside Ω
    """
    if len(config.levels) != 1 or len(config.k) != 1:
        raise ConfigError("Field output needs exactly one level and one degree")
    n, k = config.levels[0], config.k[0]
    experiment = Experiment.parse(config.experiment)
    problem = get_problem(experiment, config.sigma_plus, config.kappa)
    x2 = config.slice_height
    points = slice_points(problem.domain, x2, config.slice_points)

    out = Path(config.output_dir)
    stem = f"{experiment.value}_k{k}"
    slice_data = {"x1": points[:, 0]}
    field_paths: Dict[str, Path] = {}
    for method in config.methods:
        solution = solve(config, problem, method, k, n)
        path = out / f"{stem}_{method}_field.csv"
        atomic_write_text(path, field_frame(solution, config.sample_order).to_csv(**CSV_OPTIONS))
        field_paths[method] = path
        slice_data[f"u_{method}"] = sample_at_points(solution, points)

    if problem.has_exact:
        slice_data["u_exact"] = problem.u(points)
    frame = pd.DataFrame(slice_data)
    slice_path = out / f"{stem}_slice.csv"
    atomic_write_text(slice_path, frame.to_csv(**CSV_OPTIONS))

    discrepancy = None
    extra = {"level": str(n), **DESIGN_FACTS, **dict(problem.metadata)}
    if "u_hdg" in slice_data and "u_cg" in slice_data:
        discrepancy = slice_discrepancy(slice_data["u_hdg"], slice_data["u_cg"])
        extra["slice_discrepancy"] = f"{discrepancy:.6e}"
        logger.info(f"Slice x2={x2}: relative HDG/CG discrepancy {discrepancy:.3e}")
    meta_path = write_metadata(out / f"{stem}_field.meta.env", config, extra)
    return FieldOutput(field_paths=field_paths, slice_path=slice_path, meta_path=meta_path,
                       slice_frame=frame, discrepancy=discrepancy)


# ============ Mesh export ============

def export_mesh(config: RunConfig, path: Optional[Path] = None) -> Path:
    """Write the first-level mesh of the configured experiment in the text format."""
    problem = get_problem(config.experiment, config.sigma_plus, config.kappa)
    n = config.levels[0]
    mesh, classification = build_mesh(problem.domain, n, config.mesh_pattern)
    path = Path(config.output_dir) / f"{config.experiment}_n{n}_{config.pattern}.mesh" if path is None else Path(path)
    return write_mesh(path, mesh, classification)


def list_experiments(config_dir: Path = Path("config")) -> List[Dict[str, object]]:
    """Experiments with their domain and the preset files that use them."""
    presets: Dict[str, List[str]] = {e.value: [] for e in Experiment}
    for preset in sorted(Path(config_dir).glob("*.env")):
        try:
            presets[load_config(preset).experiment].append(preset.name)
        except SignHdgError as e:
            logger.warning(f"Skipping preset {preset}: {e}")
    listing = []
    for experiment in Experiment:
        domain = get_problem(experiment, 1.0, -2.0).domain
        listing.append({
            "name": experiment.value,
            "exact_solution": experiment.has_exact_solution,
            "bounds": [float(b) for b in domain.bounds],
            "presets": presets[experiment.value],
        })
    return listing

# Solvers Package
"""
Discretizations of the sign-changing Poisson problem.

Available solvers:
- HdgSolver: Hybridized DG with sign-changing stabilization
- CgSolver: Continuous Lagrange baseline
- postprocess: Local P_{k+1} reconstruction of HDG solutions
"""

from solvers.problem_data import ProblemData, ProblemError
from solvers.base_solver import BaseSolver, DiscreteSolution, Method, SolverError, SolverFactory
from solvers.hdg_solver import (
    HdgSolver, LocalElementSystem, TauField, assemble_local, condense, hdg_equation_residual,
    make_tau, solve_hdg, solve_hdg_monolithic,
)
from solvers.cg_solver import CgSolver, solve_cg
from solvers.postprocess import PostprocessedField, PostprocessError, postprocess

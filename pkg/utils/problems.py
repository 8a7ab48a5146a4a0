"""
Problem Definitions
===================
Experiment problems for sign-changing Poisson equations:

- cavity: Ω = (−1,1)×(0,1) split at x₁ = 0, closed-form solution
- metamaterial: negative layer with kinked interfaces in (0,5)×(0,2)
- manufactured: piecewise linear transmission solution, reproduced
  exactly by the discretizations for k ≥ 1

Sources are hand-derived for the convention ∇·(σ∇u) = f, q = -σ∇u.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict

import numpy as np

from meshing.domain import DomainSpec, cavity_domain, metamaterial_domain
from solvers.problem_data import ProblemData, ProblemError, ScalarFn, VectorFn

logger = logging.getLogger(__name__)

# Well-posedness interval of the meta-material layer; contrasts inside are rejected
METAMATERIAL_KAPPA_MIN = -1.46
METAMATERIAL_KAPPA_MAX = -0.69
METAMATERIAL_SOURCE_XMAX = 1.3

CRITICAL_TOL = 1e-12


class Experiment(Enum):
    CAVITY = "cavity"
    METAMATERIAL = "metamaterial"
    MANUFACTURED = "manufactured"

    @classmethod
    def parse(cls, value: "str | Experiment") -> "Experiment":
        if isinstance(value, Experiment):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ProblemError(f"Unknown experiment: {value!r}") from None

    @property
    def has_exact_solution(self) -> bool:
        return self is not Experiment.METAMATERIAL


@dataclass(frozen=True)
class ManufacturedSolution:
    """
    Closed-form piecewise solution with matching flux and source.

    Attributes:
        name: Identifier
        sigma_plus, sigma_minus: Coefficient on Ω₊ / Ω₋
        u: u(points, tags)
        grad_u: ∇u(points, tags) -> (N, 2)
        f: ∇·(σ∇u)(points, tags)
    """
    name: str
    sigma_plus: float
    sigma_minus: float
    u: ScalarFn
    grad_u: VectorFn
    f: ScalarFn

    def sigma(self, tags: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(tags) > 0, self.sigma_plus, self.sigma_minus)

    def q(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        return -self.sigma(tags)[:, None] * self.grad_u(points, tags)

    def neumann(self, points: np.ndarray, normals: np.ndarray, tags: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", self.q(points, tags), normals)

    def to_problem(self, domain: DomainSpec) -> ProblemData:
        """ProblemData with u_D, u_N taken as traces of this solution."""
        return ProblemData(
            name=self.name,
            domain=domain,
            sigma_plus=self.sigma_plus,
            kappa=self.sigma_minus / self.sigma_plus,
            source=self.f,
            dirichlet=self.u,
            neumann=self.neumann,
            exact_u=self.u,
            exact_q=self.q,
        )


# ============ Cavity ============

def cavity_solution(sigma_plus: float = 1.0, kappa: float = -1.001) -> ManufacturedSolution:
    """
    u = ((x₁+1)² - c(x₁+1)) sin(πx₂) on Ω₊ and d(x₁-1) sin(πx₂) on Ω₋,
    c = (2σ₊+σ₋)/(σ₊+σ₋), d = σ₊/(σ₊+σ₋).

    Raises:
        ProblemError: If kappa >= 0 or kappa = -1 (ill-posed)
    """
    _check_contrast(sigma_plus, kappa)
    if abs(kappa + 1.0) <= CRITICAL_TOL:
        raise ProblemError("kappa = -1: the problem is ill-posed on the symmetric cavity")
    sp = float(sigma_plus)
    sm = kappa * sp
    c = (2.0 * sp + sm) / (sp + sm)
    d = sp / (sp + sm)
    pi = np.pi

    def u(points, tags):
        x, y = points[:, 0], points[:, 1]
        s = np.sin(pi * y)
        return np.where(tags > 0, ((x + 1) ** 2 - c * (x + 1)) * s, d * (x - 1) * s)

    def grad_u(points, tags):
        x, y = points[:, 0], points[:, 1]
        s, co = np.sin(pi * y), np.cos(pi * y)
        plus = np.column_stack([(2 * (x + 1) - c) * s, pi * ((x + 1) ** 2 - c * (x + 1)) * co])
        minus = np.column_stack([d * s, pi * d * (x - 1) * co])
        return np.where((tags > 0)[:, None], plus, minus)

    def f(points, tags):
        x, y = points[:, 0], points[:, 1]
        s = np.sin(pi * y)
        plus = sp * (2.0 - pi**2 * ((x + 1) ** 2 - c * (x + 1))) * s
        minus = sm * (-pi**2 * d * (x - 1)) * s
        return np.where(tags > 0, plus, minus)

    return ManufacturedSolution(name="cavity", sigma_plus=sp, sigma_minus=sm,
                                u=u, grad_u=grad_u, f=f)


def cavity_problem(sigma_plus: float = 1.0, kappa: float = -1.001) -> ProblemData:
    """Symmetric cavity with homogeneous Dirichlet data on ∂Ω."""
    solution = cavity_solution(sigma_plus, kappa)
    problem = solution.to_problem(cavity_domain())
    logger.debug(f"Cavity problem sigma_plus={sigma_plus}, kappa={kappa}")
    return problem


# ============ Manufactured ============

def linear_transmission_manufactured(sigma_plus: float = 1.0, sigma_minus: float = -2.0) -> ManufacturedSolution:
    """
    u = σ₋x₁ on Ω₊, u = σ₊x₁ on Ω₋: continuous at x₁ = 0 with matching
    flux σ₊σ₋ on both sides, and f = 0.

    Raises:
        ProblemError: Unless σ₊ > 0 > σ₋ and σ₊ + σ₋ ≠ 0
    """
    if not sigma_plus > 0 > sigma_minus:
        raise ProblemError(f"Need sigma_plus > 0 > sigma_minus, got {sigma_plus}, {sigma_minus}")
    if abs(sigma_plus + sigma_minus) <= CRITICAL_TOL * sigma_plus:
        raise ProblemError("sigma_plus + sigma_minus = 0 is the critical contrast")
    sp, sm = float(sigma_plus), float(sigma_minus)

    def u(points, tags):
        return np.where(tags > 0, sm, sp) * points[:, 0]

    def grad_u(points, tags):
        slope = np.where(tags > 0, sm, sp)
        return np.column_stack([slope, np.zeros(len(points))])

    def f(points, tags):
        return np.zeros(len(points))

    return ManufacturedSolution(name="manufactured", sigma_plus=sp, sigma_minus=sm,
                                u=u, grad_u=grad_u, f=f)


def manufactured_problem(sigma_plus: float = 1.0, kappa: float = -2.0, neumann_sides=()) -> ProblemData:
    """Linear transmission solution on the cavity geometry."""
    _check_contrast(sigma_plus, kappa)
    solution = linear_transmission_manufactured(sigma_plus, kappa * sigma_plus)
    return solution.to_problem(cavity_domain(neumann_sides))


# ============ Meta-material ============

def metamaterial_problem(kappa: float = -2.0, sigma_plus: float = 1.0) -> ProblemData:
    """
    Meta-material layer with source sin(πx₂/2) on the part of Ω₊ left of x₁ = 1.3.

    Raises:
        ProblemError: If kappa >= 0 or lies in the critical interval
            [METAMATERIAL_KAPPA_MIN, METAMATERIAL_KAPPA_MAX]
    """
    _check_contrast(sigma_plus, kappa)
    if METAMATERIAL_KAPPA_MIN <= kappa <= METAMATERIAL_KAPPA_MAX:
        raise ProblemError(
            f"kappa = {kappa} lies in the critical interval "
            f"[{METAMATERIAL_KAPPA_MIN}, {METAMATERIAL_KAPPA_MAX}] of the meta-material layer")

    def source(points, tags):
        hit = (np.asarray(tags) > 0) & (points[:, 0] < METAMATERIAL_SOURCE_XMAX)
        return np.where(hit, np.sin(np.pi * points[:, 1] / 2.0), 0.0)

    return ProblemData(
        name="metamaterial",
        domain=metamaterial_domain(),
        sigma_plus=float(sigma_plus),
        kappa=float(kappa),
        source=source,
        metadata={
            "boundary_condition": "homogeneous dirichlet on all of the boundary (assumed)",
            "kappa_min": str(METAMATERIAL_KAPPA_MIN),
            "kappa_max": str(METAMATERIAL_KAPPA_MAX),
        },
    )


# ============ Registry ============

PROBLEM_BUILDERS: Dict[Experiment, Callable[[float, float], ProblemData]] = {
    Experiment.CAVITY: lambda sigma_plus, kappa: cavity_problem(sigma_plus, kappa),
    Experiment.MANUFACTURED: lambda sigma_plus, kappa: manufactured_problem(sigma_plus, kappa),
    Experiment.METAMATERIAL: lambda sigma_plus, kappa: metamaterial_problem(kappa, sigma_plus),
}


def get_problem(experiment: "str | Experiment", sigma_plus: float = 1.0, kappa: float = -1.001) -> ProblemData:
    """Build the problem of an experiment."""
    return PROBLEM_BUILDERS[Experiment.parse(experiment)](sigma_plus, kappa)


def _check_contrast(sigma_plus: float, kappa: float) -> None:
    if not sigma_plus > 0:
        raise ProblemError(f"sigma_plus must be positive, got {sigma_plus}")
    if not kappa < 0:
        raise ProblemError(f"Contrast kappa must be negative, got {kappa}")

"""
Problem Data
============
Coefficient, source and boundary data of a sign-changing Poisson problem.

Sign convention: ∇·(σ∇u) = f, i.e. with q = -σ∇u the mixed system reads
σ⁻¹q + ∇u = 0, ∇·q = -f, and the Neumann datum is u_N = -σ∇u·n = q·n.

All callables are vectorized over points and receive the subdomain tag
(+1 / -1) of each point, which selects the branch of piecewise formulas
on the interface.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from errors import SignHdgError
from meshing.domain import DomainSpec

logger = logging.getLogger(__name__)

ScalarFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
VectorFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
NeumannFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class ProblemError(SignHdgError):
    module = "problems"


def zero_scalar(points: np.ndarray, *_) -> np.ndarray:
    return np.zeros(len(points))


@dataclass(frozen=True)
class ProblemData:
    """
    Data of -∇·q = f, q = -σ∇u with σ = σ₊ on Ω₊ and σ₋ = κ_σ σ₊ on Ω₋.

    Attributes:
        name: Identifier used in file names and logs
        domain: Geometry with subdomains and boundary tags
        sigma_plus: σ₊ > 0
        kappa: Contrast κ_σ = σ₋/σ₊ < 0
        source: f(points, tags)
        dirichlet: u_D(points, tags)
        neumann: u_N(points, normals, tags)
        exact_u: Optional exact u(points, tags)
        exact_q: Optional exact q(points, tags) -> (N, 2)
        metadata: Extra key/value facts recorded with every run
    """
    name: str
    domain: DomainSpec
    sigma_plus: float
    kappa: float
    source: ScalarFn
    dirichlet: ScalarFn = zero_scalar
    neumann: NeumannFn = zero_scalar
    exact_u: Optional[ScalarFn] = None
    exact_q: Optional[VectorFn] = None
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.sigma_plus > 0:
            raise ProblemError(f"sigma_plus must be positive, got {self.sigma_plus}")
        if not self.kappa < 0:
            raise ProblemError(f"Contrast kappa must be negative, got {self.kappa}")

    @property
    def sigma_minus(self) -> float:
        return self.kappa * self.sigma_plus

    @property
    def has_exact(self) -> bool:
        return self.exact_u is not None and self.exact_q is not None

    def sigma(self, tags: np.ndarray) -> np.ndarray:
        tags = np.asarray(tags)
        return np.where(tags > 0, self.sigma_plus, self.sigma_minus)

    def _tags(self, points: np.ndarray, tags: Optional[np.ndarray]) -> np.ndarray:
        return self.domain.subdomain_of(points) if tags is None else np.asarray(tags)

    def f(self, points: np.ndarray, tags: Optional[np.ndarray] = None) -> np.ndarray:
        points = np.atleast_2d(points)
        return self.source(points, self._tags(points, tags))

    def u(self, points: np.ndarray, tags: Optional[np.ndarray] = None) -> np.ndarray:
        if self.exact_u is None:
            raise ProblemError(f"Problem {self.name} has no exact solution")
        points = np.atleast_2d(points)
        return self.exact_u(points, self._tags(points, tags))

    def q(self, points: np.ndarray, tags: Optional[np.ndarray] = None) -> np.ndarray:
        if self.exact_q is None:
            raise ProblemError(f"Problem {self.name} has no exact flux")
        points = np.atleast_2d(points)
        return self.exact_q(points, self._tags(points, tags))

    def scaled(self, factor: float) -> "ProblemData":
        """Same problem with f, u_D, u_N (and the exact solution) multiplied by `factor`."""
        def scale(fn):
            return None if fn is None else (lambda *args: factor * fn(*args))
        return ProblemData(
            name=self.name, domain=self.domain, sigma_plus=self.sigma_plus, kappa=self.kappa,
            source=scale(self.source), dirichlet=scale(self.dirichlet), neumann=scale(self.neumann),
            exact_u=scale(self.exact_u), exact_q=scale(self.exact_q), metadata=dict(self.metadata),
        )

    def homogeneous(self) -> "ProblemData":
        """Same geometry and coefficient with all data set to zero."""
        return ProblemData(
            name=f"{self.name}_zero", domain=self.domain, sigma_plus=self.sigma_plus,
            kappa=self.kappa, source=zero_scalar, metadata=dict(self.metadata),
        )

"""
Quadrature Rules
================
Gauss rules on the reference segment [0, 1] and collapsed Gauss rules on
the reference triangle (Gauss–Legendre in the collapsed direction times
Gauss–Jacobi(1, 0) across it, which absorbs the Duffy Jacobian).
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from errors import SignHdgError
from fem.basis import MAX_DEGREE, ElementKind

logger = logging.getLogger(__name__)

MAX_QUADRATURE_DEGREE = 2 * MAX_DEGREE + 6


class QuadratureError(SignHdgError):
    module = "polybasis"


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on a reference element, exact up to `degree`."""
    kind: ElementKind
    degree: int
    points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Reference-element integral of tabulated values (quadrature axis first)."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def make_quadrature(kind: "ElementKind | str", degree: int) -> QuadratureRule:
    """
    Quadrature rule exact for polynomials of total degree <= `degree`.

    Raises:
        QuadratureError: If the degree is negative or above MAX_QUADRATURE_DEGREE
    """
    kind = ElementKind(kind) if not isinstance(kind, ElementKind) else kind
    degree = int(degree)
    if not 0 <= degree <= MAX_QUADRATURE_DEGREE:
        raise QuadratureError(
            f"Quadrature degree {degree} outside the supported range 0..{MAX_QUADRATURE_DEGREE}")

    n = degree // 2 + 1
    a, wa = special.roots_legendre(n)
    if kind is ElementKind.SEGMENT:
        points = 0.5 * (a + 1.0)
        weights = 0.5 * wa
    else:
        b, wb = special.roots_jacobi(n, 1.0, 0.0)
        A, B = np.meshgrid(a, b, indexing="ij")
        WA, WB = np.meshgrid(wa, wb, indexing="ij")
        points = np.column_stack([((1.0 + A) * (1.0 - B) / 4.0).reshape(-1),
                                  ((1.0 + B) / 2.0).reshape(-1)])
        weights = (WA * WB / 8.0).reshape(-1)

    for array in (points, weights):
        array.flags.writeable = False
    return QuadratureRule(kind=kind, degree=degree, points=points, weights=weights)

"""
Polynomial Bases
================
Orthonormal bases of P_k on the reference triangle {x, y >= 0, x + y <= 1}
and the reference segment [0, 1].

The triangle basis is the Dubiner basis written with scaled Legendre
polynomials, so values and gradients are evaluated without the collapsed
coordinate singularity at the top vertex. Functions are ordered by total
degree; the first dim P_j functions of a degree-k basis span P_j.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from scipy import special

from errors import SignHdgError

logger = logging.getLogger(__name__)

MAX_DEGREE = 6


class BasisError(SignHdgError):
    """Raised for unsupported bases."""
    module = "polybasis"


class ElementKind(Enum):
    TRIANGLE = "triangle"
    SEGMENT = "segment"


def triangle_dim(k: int) -> int:
    return (k + 1) * (k + 2) // 2


@dataclass(frozen=True)
class BasisSet:
    """
    Orthonormal basis of P_k on a reference element.

    Mass matrix on the reference element is the identity.
    """
    kind: ElementKind
    degree: int

    @property
    def dim(self) -> int:
        if self.kind is ElementKind.TRIANGLE:
            return triangle_dim(self.degree)
        return self.degree + 1

    @property
    def indices(self) -> List[Tuple[int, int]]:
        """(p, q) index pairs of the triangle basis in storage order."""
        return [(d - q, q) for d in range(self.degree + 1) for q in range(d + 1)]

    def tabulate(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluate all basis functions.

        Args:
            points: (npts, 2) reference coordinates for triangles,
                (npts,) parameters for segments

        Returns:
            (npts, dim) array of values
        """
        if self.kind is ElementKind.SEGMENT:
            s = np.asarray(points, dtype=float).reshape(-1)
            z = 2.0 * s - 1.0
            return np.column_stack([np.sqrt(2 * j + 1) * special.eval_legendre(j, z)
                                    for j in range(self.degree + 1)])
        values, _ = self._triangle(points, with_gradients=False)
        return values

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """
        Reference gradients of all basis functions.

        Returns:
            (npts, dim, 2) for triangles, (npts, dim) for segments
        """
        if self.kind is ElementKind.SEGMENT:
            s = np.asarray(points, dtype=float).reshape(-1)
            z = 2.0 * s - 1.0
            cols = [np.zeros_like(z)]
            for j in range(1, self.degree + 1):
                # d/ds P_j(2s-1) = (j+1) P_{j-1}^{(1,1)}(2s-1)
                cols.append(np.sqrt(2 * j + 1) * (j + 1) * special.eval_jacobi(j - 1, 1, 1, z))
            return np.column_stack(cols)
        _, grads = self._triangle(points, with_gradients=True)
        return grads

    def _triangle(self, points: np.ndarray, with_gradients: bool):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        k = self.degree
        u = 2.0 * x - 1.0 + y
        t = 1.0 - y

        # scaled Legendre L_m(u, t) = t^m P_m(u / t) and its partial derivatives
        L = [np.ones_like(x), u]
        Lu = [np.zeros_like(x), np.ones_like(x)]
        Lt = [np.zeros_like(x), np.zeros_like(x)]
        for m in range(1, k):
            L.append(((2 * m + 1) * u * L[m] - m * t**2 * L[m - 1]) / (m + 1))
            Lu.append(((2 * m + 1) * (L[m] + u * Lu[m]) - m * t**2 * Lu[m - 1]) / (m + 1))
            Lt.append(((2 * m + 1) * u * Lt[m] - m * (2 * t * L[m - 1] + t**2 * Lt[m - 1])) / (m + 1))

        z = 2.0 * y - 1.0
        values = np.empty((len(x), self.dim))
        grads = np.empty((len(x), self.dim, 2)) if with_gradients else None
        for i, (p, q) in enumerate(self.indices):
            c = np.sqrt(2.0 * (2 * p + 1) * (p + q + 1))
            Q = special.eval_jacobi(q, 2 * p + 1, 0, z)
            values[:, i] = c * L[p] * Q
            if with_gradients:
                dQ = (q + 2 * p + 2) * special.eval_jacobi(q - 1, 2 * p + 2, 1, z) if q > 0 else 0.0
                grads[:, i, 0] = c * 2.0 * Lu[p] * Q
                grads[:, i, 1] = c * ((Lu[p] - Lt[p]) * Q + L[p] * dQ)
        return values, grads


@lru_cache(maxsize=None)
def make_basis(kind: "ElementKind | str", k: int) -> BasisSet:
    """
    Orthonormal basis of P_k on the reference triangle or segment.

    Raises:
        BasisError: If k is outside 0..MAX_DEGREE
    """
    kind = ElementKind(kind) if not isinstance(kind, ElementKind) else kind
    if not 0 <= int(k) <= MAX_DEGREE:
        raise BasisError(f"Polynomial degree {k} outside the supported range 0..{MAX_DEGREE}")
    return BasisSet(kind=kind, degree=int(k))


def edge_reference_points(edge: int, t: np.ndarray) -> np.ndarray:
    """
    Map segment parameters onto local edge `edge` of the reference triangle.

    Edge l runs from vertex l+1 to vertex l+2 (vertices (0,0), (1,0), (0,1)).
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    if edge == 0:
        return np.column_stack([1.0 - t, t])
    if edge == 1:
        return np.column_stack([np.zeros_like(t), 1.0 - t])
    if edge == 2:
        return np.column_stack([t, np.zeros_like(t)])
    raise BasisError(f"Triangle has no local edge {edge}")


def lagrange_nodes(k: int) -> np.ndarray:
    """Equispaced P_k nodes (i/k, j/k), i + j <= k, row by row in x₂."""
    if k < 1:
        raise BasisError(f"Lagrange elements need k >= 1, got {k}")
    return np.array([(i / k, j / k) for j in range(k + 1) for i in range(k + 1 - j)])

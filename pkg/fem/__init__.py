# FEM Package
"""
Reference-element machinery: polynomial bases, quadrature, affine maps,
and the dense/sparse solvers.
"""

from fem.basis import BasisError, BasisSet, ElementKind, MAX_DEGREE, make_basis
from fem.quadrature import QuadratureError, QuadratureRule, make_quadrature
from fem.geometry import AffineMaps, GeometryError, make_affine_maps
from fem.linalg import (
    LinalgError, SingularMatrixError, assemble_csr, batched_solve, dense_lu_solve,
    matrix_asymmetry, sparse_lu_factor, sparse_lu_solve,
)

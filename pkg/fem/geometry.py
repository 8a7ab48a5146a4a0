"""
Affine Geometry Maps
====================
Reference-to-physical maps x = v0 + J ξ of every triangle, with inverse
transposes for gradients, and per-edge lengths and outward unit normals.
"""

import logging
from dataclasses import dataclass

import numpy as np

from errors import SignHdgError
from meshing.mesh_builder import Mesh

logger = logging.getLogger(__name__)


class GeometryError(SignHdgError):
    module = "polybasis"


@dataclass(frozen=True)
class AffineMaps:
    """
    Geometry of all triangles of a mesh.

    Attributes:
        origins: (nt, 2) first vertex of each triangle
        jacobians: (nt, 2, 2) columns v1 - v0 and v2 - v0
        inverse_transposes: (nt, 2, 2) J^{-T}
        determinants: (nt,) det J (twice the area)
        edge_lengths: (nt, 3) length of local edge l
        normals: (nt, 3, 2) outward unit normal of local edge l
    """
    origins: np.ndarray
    jacobians: np.ndarray
    inverse_transposes: np.ndarray
    determinants: np.ndarray
    edge_lengths: np.ndarray
    normals: np.ndarray

    def to_physical(self, ref_points: np.ndarray, elements=slice(None)) -> np.ndarray:
        """(ne, npts, 2) physical coordinates of reference points."""
        ref_points = np.atleast_2d(ref_points)
        return (self.origins[elements][:, None, :]
                + np.einsum("eij,qj->eqi", self.jacobians[elements], ref_points))

    def physical_gradients(self, ref_gradients: np.ndarray, elements=slice(None)) -> np.ndarray:
        """Map (npts, dim, 2) reference gradients to (ne, npts, dim, 2)."""
        return np.einsum("eij,qnj->eqni", self.inverse_transposes[elements], ref_gradients)


def make_affine_maps(mesh: Mesh) -> AffineMaps:
    """
    Compute the affine maps of all triangles.

    Raises:
        GeometryError: For a degenerate or clockwise triangle (index reported)
    """
    v = mesh.vertices[mesh.triangles]
    v0 = v[:, 0]
    jac = np.stack([v[:, 1] - v0, v[:, 2] - v0], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    bad = np.flatnonzero(det <= 0.0)
    if len(bad):
        raise GeometryError(f"Degenerate triangle at cell {int(bad[0])} (det J = {det[bad[0]]:.3e})")

    inv_t = np.empty_like(jac)
    inv_t[:, 0, 0] = jac[:, 1, 1] / det
    inv_t[:, 0, 1] = -jac[:, 1, 0] / det
    inv_t[:, 1, 0] = -jac[:, 0, 1] / det
    inv_t[:, 1, 1] = jac[:, 0, 0] / det

    start = v[:, [1, 2, 0]]
    end = v[:, [2, 0, 1]]
    d = end - start
    lengths = np.hypot(d[..., 0], d[..., 1])
    # counter-clockwise triangles: outward normal is the tangent turned clockwise
    normals = np.stack([d[..., 1], -d[..., 0]], axis=-1) / lengths[..., None]

    maps = AffineMaps(
        origins=v0,
        jacobians=jac,
        inverse_transposes=inv_t,
        determinants=det,
        edge_lengths=lengths,
        normals=normals,
    )
    for array in (v0, jac, inv_t, det, lengths, normals):
        array.flags.writeable = False
    return maps

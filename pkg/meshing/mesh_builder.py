"""
Mesh Builder Module
===================
Conforming triangulations of the two-subdomain domains.

Builders:
- build_structured_mesh: axis-aligned grid, squares split into two triangles
- build_mapped_mesh: same grid with vertical lines sheared piecewise-affinely
  so that slanted interface chains become grid lines

Both produce an immutable `Mesh`. Facets are stored once, with the lower
vertex index first, and sorted by midpoint (x₁ then x₂); that order is
also the ordering of the global trace unknowns.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from meshing.domain import DomainSpec, MeshError

logger = logging.getLogger(__name__)

AREA_TOL = 1e-14


class MeshPattern(Enum):
    """Diagonal layout of the split grid cells."""
    MIRRORED = "mirrored"      # diagonal direction reflected across each interface
    UNIFORM = "uniform"        # one diagonal direction everywhere

    @classmethod
    def parse(cls, value: "str | MeshPattern") -> "MeshPattern":
        if isinstance(value, MeshPattern):
            return value
        aliases = {
            "mirrored": cls.MIRRORED, "mirroreddiagonals": cls.MIRRORED, "symmetric": cls.MIRRORED,
            "uniform": cls.UNIFORM, "uniformdiagonals": cls.UNIFORM, "nonsymmetric": cls.UNIFORM,
        }
        key = str(value).replace("_", "").replace("-", "").lower()
        if key not in aliases:
            raise MeshError(f"Unknown mesh pattern: {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class Mesh:
    """
    Immutable 2D simplicial mesh with subdomain tags and facet adjacency.

    Attributes:
        vertices: (nv, 2) coordinates
        triangles: (nt, 3) vertex indices, counter-clockwise
        tags: (nt,) +1 for Ω₊, -1 for Ω₋
        facets: (nf, 2) vertex indices, lower index first
        facet_owners: (nf, 2) owning triangles, lower index first, -1 if absent
        element_facets: (nt, 3) facet of local edge ℓ (the edge opposite vertex ℓ)
        element_flips: (nt, 3) True where local edge ℓ runs against the facet orientation
        diameters: (nt,) longest edge length h_K
    """
    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    facets: np.ndarray
    facet_owners: np.ndarray
    element_facets: np.ndarray
    element_flips: np.ndarray
    diameters: np.ndarray

    @classmethod
    def from_arrays(
        cls,
        vertices: np.ndarray,
        triangles: np.ndarray,
        tags: np.ndarray,
    ) -> "Mesh":
        """
        Build facets and adjacency from raw vertex/triangle arrays.

        Raises:
            MeshError: On degenerate or clockwise triangles, or facets
                shared by more than two triangles
        """
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        tags = np.ascontiguousarray(tags, dtype=np.int64)

        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError(f"Triangles must have shape (nt, 3), got {triangles.shape}")
        if len(tags) != len(triangles):
            raise MeshError("One subdomain tag per triangle is required")
        if not np.all(np.isin(tags, (1, -1))):
            raise MeshError("Subdomain tags must be +1 or -1")

        areas = signed_areas(vertices, triangles)
        bad = np.flatnonzero(areas <= AREA_TOL * max(1.0, float(np.max(np.abs(areas), initial=0.0))))
        if len(bad):
            raise MeshError(f"Degenerate or clockwise triangle at cell {int(bad[0])} "
                            f"(signed area {areas[bad[0]]:.3e})")

        # local edge l joins vertices l+1 and l+2
        local_a = triangles[:, [1, 2, 0]]
        local_b = triangles[:, [2, 0, 1]]
        pairs = np.stack([np.minimum(local_a, local_b), np.maximum(local_a, local_b)], axis=-1)
        unique, inverse = np.unique(pairs.reshape(-1, 2), axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)

        midpoints = 0.5 * (vertices[unique[:, 0]] + vertices[unique[:, 1]])
        order = np.lexsort((np.round(midpoints[:, 1], 12), np.round(midpoints[:, 0], 12)))
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        facets = unique[order]
        element_facets = rank[inverse].reshape(-1, 3)

        counts = np.bincount(element_facets.reshape(-1), minlength=len(facets))
        if np.any(counts > 2):
            f = int(np.flatnonzero(counts > 2)[0])
            raise MeshError(f"Non-conforming mesh: facet {f} has {counts[f]} owners")

        owners = np.full((len(facets), 2), -1, dtype=np.int64)
        flat = element_facets.reshape(-1)
        elements = np.repeat(np.arange(len(triangles)), 3)
        # stable sort keeps owners in increasing element order
        idx = np.argsort(flat, kind="stable")
        sorted_facets = flat[idx]
        first = np.ones(len(idx), dtype=bool)
        first[1:] = sorted_facets[1:] != sorted_facets[:-1]
        owners[sorted_facets[first], 0] = elements[idx][first]
        owners[sorted_facets[~first], 1] = elements[idx][~first]

        element_flips = facets[element_facets, 0] != local_a

        edge_vec = vertices[local_b] - vertices[local_a]
        diameters = np.max(np.hypot(edge_vec[..., 0], edge_vec[..., 1]), axis=1)

        mesh = cls(
            vertices=vertices,
            triangles=triangles,
            tags=tags,
            facets=facets,
            facet_owners=owners,
            element_facets=element_facets,
            element_flips=element_flips,
            diameters=diameters,
        )
        for array in (vertices, triangles, tags, facets, owners, element_facets,
                      element_flips, diameters):
            array.flags.writeable = False
        mesh.validate()
        return mesh

    # ============ Sizes ============

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @property
    def h(self) -> float:
        """Global mesh size max h_K."""
        return float(np.max(self.diameters))

    # ============ Derived quantities ============

    def signed_areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    def facet_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.facets[:, 0]] + self.vertices[self.facets[:, 1]])

    def facet_lengths(self) -> np.ndarray:
        d = self.vertices[self.facets[:, 1]] - self.vertices[self.facets[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def interface_mask(self) -> np.ndarray:
        """Facets whose two owners carry different subdomain tags."""
        two = self.facet_owners[:, 1] >= 0
        mask = np.zeros(self.n_facets, dtype=bool)
        own = self.facet_owners[two]
        mask[two] = self.tags[own[:, 0]] != self.tags[own[:, 1]]
        return mask

    def boundary_mask(self) -> np.ndarray:
        return self.facet_owners[:, 1] < 0

    def validate(self) -> None:
        """Check orientation and the no-element-inside-Γ_I rule."""
        areas = self.signed_areas()
        if np.any(areas <= 0):
            raise MeshError(f"Triangle {int(np.argmin(areas))} is not positively oriented")
        on_interface = self.interface_mask()[self.element_facets]
        trapped = np.flatnonzero(on_interface.all(axis=1))
        if len(trapped):
            raise MeshError(f"Triangle {int(trapped[0])} has all its facets on the interface")

    def locate_points(self, points: np.ndarray, tol: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
        """
        Find a containing triangle for each point.

        Returns:
            Tuple of (element index per point, -1 if outside; reference
            coordinates per point)
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        v0 = self.vertices[self.triangles[:, 0]]
        jac = np.stack([self.vertices[self.triangles[:, 1]] - v0,
                        self.vertices[self.triangles[:, 2]] - v0], axis=-1)
        inv = np.linalg.inv(jac)
        elements = np.full(len(points), -1, dtype=np.int64)
        ref = np.zeros((len(points), 2))
        for i, p in enumerate(points):
            xi = np.einsum("eij,ej->ei", inv, p - v0)
            inside = (xi[:, 0] >= -tol) & (xi[:, 1] >= -tol) & (xi.sum(axis=1) <= 1.0 + tol)
            hits = np.flatnonzero(inside)
            if len(hits):
                elements[i] = hits[0]
                ref[i] = np.clip(xi[hits[0]], 0.0, 1.0)
        return elements, ref


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


# ============ Builders ============

def build_structured_mesh(
    domain: DomainSpec,
    n: int,
    pattern: "MeshPattern | str" = MeshPattern.MIRRORED,
) -> Mesh:
    """
    Split an n-per-unit-length square grid into triangles.

    Args:
        domain: Axis-aligned rectangle whose interfaces are vertical lines
        n: Cells per unit length
        pattern: MIRRORED reflects the diagonal across every interface,
            UNIFORM uses one direction everywhere

    Returns:
        Mesh with 2·n²·|Ω| triangles

    Raises:
        MeshError: If the domain is not a rectangle or an interface is not
            on the grid
    """
    pattern = MeshPattern.parse(pattern)
    if not domain.is_rectangle():
        raise MeshError(f"Domain {domain.name} is not an axis-aligned rectangle")
    for chain in domain.interfaces:
        xs = {round(p[0], 12) for p in chain}
        if len(xs) != 1:
            raise MeshError(f"Interface {chain} is not a vertical line; use build_mapped_mesh")
    return _build_grid_mesh(domain, n, pattern)


def build_mapped_mesh(
    domain: DomainSpec,
    n: int,
    pattern: "MeshPattern | str" = MeshPattern.MIRRORED,
) -> Mesh:
    """
    Grid mesh whose vertical lines are sheared onto slanted interface chains.

    Each chain must run from the bottom to the top of the bounding box,
    be monotone in x₂, start at a grid-aligned x₁ and have its kinks on
    grid rows. Within every grid row the reference x₁ positions are mapped
    piecewise-affinely so the chain positions land on their grid lines.

    Raises:
        MeshError: On misaligned chains or when shearing produces a
            degenerate cell (the cell index is reported)
    """
    pattern = MeshPattern.parse(pattern)
    if not domain.is_rectangle():
        raise MeshError(f"Domain {domain.name} is not an axis-aligned rectangle")
    return _build_grid_mesh(domain, n, pattern)


def _grid_count(length: float, n: int, what: str) -> int:
    cells = length * n
    count = int(round(cells))
    if count < 1 or abs(cells - count) > 1e-9 * max(1.0, cells):
        raise MeshError(f"{what} length {length} is not a multiple of 1/{n}")
    return count


def _build_grid_mesh(domain: DomainSpec, n: int, pattern: MeshPattern) -> Mesh:
    if n < 1:
        raise MeshError(f"Resolution n must be >= 1, got {n}")
    xmin, xmax, ymin, ymax = domain.bounds
    nx = _grid_count(xmax - xmin, n, "x1")
    ny = _grid_count(ymax - ymin, n, "x2")
    x_ref = xmin + np.arange(nx + 1) / n
    y_grid = ymin + np.arange(ny + 1) / n
    x_ref[-1], y_grid[-1] = xmax, ymax

    chains = [np.asarray(chain, dtype=float) for chain in domain.interfaces]
    anchors = []
    for chain in chains:
        anchor = chain[np.argmin(chain[:, 1]), 0]
        _check_chain(chain, anchor, xmin, ymin, ymax, n)
        anchors.append(anchor)
    order = np.argsort(anchors)
    chains = [chains[i] for i in order]
    anchors = [anchors[i] for i in order]

    # vertex (i, j) sits at column i, row j
    xs = np.empty((ny + 1, nx + 1))
    for j, y in enumerate(y_grid):
        if chains:
            targets = [np.interp(y, c[np.argsort(c[:, 1]), 1], c[np.argsort(c[:, 1]), 0])
                       for c in chains]
            xs[j] = np.interp(x_ref, [xmin, *anchors, xmax], [xmin, *targets, xmax])
        else:
            xs[j] = x_ref
    ys = np.repeat(y_grid[:, None], nx + 1, axis=1)
    vertices = np.column_stack([xs.reshape(-1), ys.reshape(-1)])

    def vid(i, j):
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.reshape(-1), jj.reshape(-1)
    v00, v10, v11, v01 = vid(ii, jj), vid(ii + 1, jj), vid(ii + 1, jj + 1), vid(ii, jj + 1)

    if pattern is MeshPattern.MIRRORED and anchors:
        centers = x_ref[ii] + 0.5 / n
        flips = np.sum(centers[:, None] > np.asarray(anchors)[None, :], axis=1) % 2 == 1
    else:
        flips = np.zeros(len(ii), dtype=bool)

    first = np.where(flips[:, None],
                     np.column_stack([v00, v10, v01]),
                     np.column_stack([v00, v10, v11]))
    second = np.where(flips[:, None],
                      np.column_stack([v10, v11, v01]),
                      np.column_stack([v00, v11, v01]))
    triangles = np.empty((2 * len(ii), 3), dtype=np.int64)
    triangles[0::2] = first
    triangles[1::2] = second

    areas = signed_areas(vertices, triangles)
    bad = np.flatnonzero(areas <= AREA_TOL)
    if len(bad):
        raise MeshError(f"Shearing produced a degenerate cell at index {int(bad[0]) // 2}")

    centroids = vertices[triangles].mean(axis=1)
    tags = domain.subdomain_of(centroids)
    if np.any(tags == 0):
        raise MeshError(f"Triangle {int(np.flatnonzero(tags == 0)[0])} lies outside every subdomain")

    mesh = Mesh.from_arrays(vertices, triangles, tags)
    logger.debug(f"Built {pattern.value} mesh of {domain.name}: n={n}, "
                 f"{mesh.n_triangles} triangles, {mesh.n_facets} facets, h={mesh.h:.4f}")
    return mesh


def _check_chain(chain: np.ndarray, anchor: float, xmin: float, ymin: float, ymax: float, n: int) -> None:
    ys = np.sort(chain[:, 1])
    if abs(ys[0] - ymin) > 1e-12 or abs(ys[-1] - ymax) > 1e-12:
        raise MeshError(f"Interface chain {chain.tolist()} does not span the domain height")
    if np.any(np.diff(ys) <= 0):
        raise MeshError(f"Interface chain {chain.tolist()} is not monotone in x2")
    offset = (anchor - xmin) * n
    if abs(offset - round(offset)) > 1e-9:
        raise MeshError(f"Interface at x1={anchor} is not aligned with the n={n} grid")
    rows = (ys - ymin) * n
    if np.any(np.abs(rows - np.round(rows)) > 1e-9):
        raise MeshError(f"Interface chain {chain.tolist()} has kinks off the n={n} grid rows")

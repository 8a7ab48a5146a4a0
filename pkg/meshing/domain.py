"""
Domain Definitions
==================
Polygonal domains split into a positive and a negative subdomain.

A DomainSpec describes the outer polygon, the tagged subdomain polygons,
the boundary segments with their boundary condition, and the interface
chains along which the coefficient changes sign. Meshes are built from it
by `meshing.mesh_builder`.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import SignHdgError

logger = logging.getLogger(__name__)

GEOMETRY_TOL = 1e-10

Point = Tuple[float, float]


class MeshError(SignHdgError):
    """Raised for invalid domains and meshes."""
    module = "mesh"


class Subdomain(IntEnum):
    """Subdomain tag; the value is the sign of the coefficient."""
    PLUS = 1
    MINUS = -1

    @property
    def symbol(self) -> str:
        return "+" if self is Subdomain.PLUS else "-"

    @classmethod
    def from_symbol(cls, symbol: str) -> "Subdomain":
        if symbol == "+":
            return cls.PLUS
        if symbol == "-":
            return cls.MINUS
        raise MeshError(f"Unknown subdomain symbol: {symbol!r}")


class BoundaryKind(Enum):
    """Boundary condition carried by a boundary segment."""
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class BoundarySegment:
    """Straight piece of the outer boundary with its condition."""
    start: Point
    end: Point
    kind: BoundaryKind

    def contains(self, points: np.ndarray, tol: float = GEOMETRY_TOL) -> np.ndarray:
        """Mask of points lying on the closed segment."""
        p0 = np.asarray(self.start, dtype=float)
        p1 = np.asarray(self.end, dtype=float)
        d = p1 - p0
        length = np.hypot(*d)
        rel = np.atleast_2d(points) - p0
        # distance to the supporting line and position along it
        dist = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / length
        along = (rel @ d) / length**2
        scale = max(1.0, length)
        return (dist <= tol * scale) & (along >= -tol) & (along <= 1.0 + tol)


@dataclass(frozen=True)
class SubdomainPolygon:
    """Closed polygon (counter-clockwise vertex list) with its tag."""
    vertices: Tuple[Point, ...]
    tag: Subdomain

    def area(self) -> float:
        return abs(polygon_area(self.vertices))

    def contains(self, points: np.ndarray) -> np.ndarray:
        return points_in_polygon(np.atleast_2d(points), self.vertices)


@dataclass(frozen=True)
class DomainSpec:
    """
    Polygonal domain Ω = Ω₊ ∪ Ω₋ with boundary tags and interface chains.

    Attributes:
        name: Short identifier used in logs and file names
        outer: Vertices of the outer boundary, counter-clockwise
        subdomains: Tagged polygons partitioning the outer polygon
        boundary: Boundary segments, each Dirichlet or Neumann
        interfaces: Polylines separating Ω₊ from Ω₋, each monotone in x₂
    """
    name: str
    outer: Tuple[Point, ...]
    subdomains: Tuple[SubdomainPolygon, ...]
    boundary: Tuple[BoundarySegment, ...]
    interfaces: Tuple[Tuple[Point, ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Check the partition and boundary tagging invariants."""
        outer_area = abs(polygon_area(self.outer))
        if outer_area <= 0.0:
            raise MeshError(f"Domain {self.name}: outer polygon has zero area")
        total = sum(sub.area() for sub in self.subdomains)
        if abs(total - outer_area) > 1e-9 * outer_area:
            raise MeshError(
                f"Domain {self.name}: subdomain areas sum to {total}, "
                f"outer polygon area is {outer_area}"
            )
        for sub in self.subdomains:
            centroid = np.mean(np.asarray(sub.vertices, dtype=float), axis=0)[None, :]
            if any(o.contains(centroid)[0] for o in self.subdomains if o is not sub):
                raise MeshError(f"Domain {self.name}: overlapping subdomain polygons")
        # every outer edge must be covered by exactly one boundary segment
        outer = np.asarray(self.outer, dtype=float)
        for i in range(len(outer)):
            a, b = outer[i], outer[(i + 1) % len(outer)]
            probes = a + np.linspace(0.05, 0.95, 7)[:, None] * (b - a)
            hits = np.zeros(len(probes), dtype=int)
            for seg in self.boundary:
                hits += seg.contains(probes)
            if np.any(hits != 1):
                raise MeshError(
                    f"Domain {self.name}: outer edge {tuple(a)}-{tuple(b)} "
                    f"is not covered by exactly one boundary segment"
                )

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) of the outer polygon."""
        outer = np.asarray(self.outer, dtype=float)
        return (outer[:, 0].min(), outer[:, 0].max(),
                outer[:, 1].min(), outer[:, 1].max())

    @property
    def area(self) -> float:
        return abs(polygon_area(self.outer))

    def is_rectangle(self) -> bool:
        xmin, xmax, ymin, ymax = self.bounds
        return abs(self.area - (xmax - xmin) * (ymax - ymin)) <= 1e-12 * self.area

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Mask of points inside the closed outer polygon."""
        points = np.atleast_2d(points)
        inside = points_in_polygon(points, self.outer)
        on_edge = np.zeros(len(points), dtype=bool)
        for seg in self.boundary:
            on_edge |= seg.contains(points)
        return inside | on_edge

    def subdomain_of(self, points: np.ndarray) -> np.ndarray:
        """
        Subdomain tag (+1 / -1) of each point; 0 for points outside Ω.

        Points on the interface are reported as belonging to the first
        polygon that claims them.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        tags = np.zeros(len(points), dtype=int)
        for sub in self.subdomains:
            hit = (tags == 0) & sub.contains(points)
            tags[hit] = int(sub.tag)
        # boundary points fall outside the strict polygon test
        unresolved = (tags == 0) & self.contains(points)
        if np.any(unresolved):
            for idx in np.flatnonzero(unresolved):
                tags[idx] = self._nearest_tag(points[idx])
        return tags

    def _nearest_tag(self, point: np.ndarray) -> int:
        best, best_tag = np.inf, 0
        for sub in self.subdomains:
            verts = np.asarray(sub.vertices, dtype=float)
            d = _distance_to_polygon(point, verts)
            if d < best:
                best, best_tag = d, int(sub.tag)
        return best_tag

    def boundary_kind_of(self, a: np.ndarray, b: np.ndarray) -> Optional[BoundaryKind]:
        """Boundary condition of the segment containing edge a-b, if any."""
        ends = np.vstack([a, b])
        for seg in self.boundary:
            if np.all(seg.contains(ends)):
                return seg.kind
        return None


# ============ Geometry helpers ============

def polygon_area(vertices: Sequence[Point]) -> float:
    """Signed shoelace area (positive for counter-clockwise order)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def points_in_polygon(points: np.ndarray, vertices: Sequence[Point]) -> np.ndarray:
    """Even-odd ray casting test; points exactly on edges may go either way."""
    v = np.asarray(vertices, dtype=float)
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for xa, ya, xb, yb in zip(x0, y0, x1, y1):
        crosses = (ya > y) != (yb > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = xa + (y - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (x < x_cross)
    return inside


def _distance_to_polygon(point: np.ndarray, verts: np.ndarray) -> float:
    a = verts
    b = np.roll(verts, -1, axis=0)
    d = b - a
    t = np.clip(np.einsum("ij,ij->i", point - a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    closest = a + t[:, None] * d
    return float(np.min(np.hypot(*(closest - point).T)))


def rectangle_boundary(
    xmin: float, xmax: float, ymin: float, ymax: float,
    neumann_sides: Sequence[str] = ()
) -> Tuple[BoundarySegment, ...]:
    """
    Four boundary segments of an axis-aligned rectangle.

    Args:
        neumann_sides: Any of "left", "right", "bottom", "top"; the rest
            are Dirichlet.
    """
    sides = {
        "bottom": ((xmin, ymin), (xmax, ymin)),
        "right": ((xmax, ymin), (xmax, ymax)),
        "top": ((xmax, ymax), (xmin, ymax)),
        "left": ((xmin, ymax), (xmin, ymin)),
    }
    unknown = set(neumann_sides) - set(sides)
    if unknown:
        raise MeshError(f"Unknown rectangle sides: {sorted(unknown)}")
    return tuple(
        BoundarySegment(start, end,
                        BoundaryKind.NEUMANN if name in neumann_sides else BoundaryKind.DIRICHLET)
        for name, (start, end) in sides.items()
    )


# ============ Domain factories ============

def cavity_domain(neumann_sides: Sequence[str] = ()) -> DomainSpec:
    """Ω = (−1,1)×(0,1) with Ω₊ = (−1,0)×(0,1) and Ω₋ = (0,1)×(0,1)."""
    return DomainSpec(
        name="cavity",
        outer=((-1.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0)),
        subdomains=(
            SubdomainPolygon(((-1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (-1.0, 1.0)), Subdomain.PLUS),
            SubdomainPolygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)), Subdomain.MINUS),
        ),
        boundary=rectangle_boundary(-1.0, 1.0, 0.0, 1.0, neumann_sides),
        interfaces=(((0.0, 0.0), (0.0, 1.0)),),
    )


def unit_square_domain(neumann_sides: Sequence[str] = ()) -> DomainSpec:
    """Single-subdomain unit square (Ω₋ empty)."""
    square = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
    return DomainSpec(
        name="unit_square",
        outer=square,
        subdomains=(SubdomainPolygon(square, Subdomain.PLUS),),
        boundary=rectangle_boundary(0.0, 1.0, 0.0, 1.0, neumann_sides),
    )


def rectangle_domain(
    xmin: float, xmax: float, ymin: float, ymax: float,
    interfaces_x: Sequence[float] = (),
    neumann_sides: Sequence[str] = (),
    name: str = "rectangle",
) -> DomainSpec:
    """
    Rectangle split by vertical lines into alternating Ω₊ / Ω₋ strips,
    starting with Ω₊ on the left.
    """
    cuts = [xmin, *sorted(interfaces_x), xmax]
    strips: List[SubdomainPolygon] = []
    for i, (xa, xb) in enumerate(zip(cuts[:-1], cuts[1:])):
        tag = Subdomain.PLUS if i % 2 == 0 else Subdomain.MINUS
        strips.append(SubdomainPolygon(((xa, ymin), (xb, ymin), (xb, ymax), (xa, ymax)), tag))
    return DomainSpec(
        name=name,
        outer=((xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)),
        subdomains=tuple(strips),
        boundary=rectangle_boundary(xmin, xmax, ymin, ymax, neumann_sides),
        interfaces=tuple(((x, ymin), (x, ymax)) for x in sorted(interfaces_x)),
    )


def metamaterial_domain() -> DomainSpec:
    """
    Ω = (0,5)×(0,2) with a negative layer between the chains
    (1,0)–(1.3,1)–(1,2) and (3,0)–(3.3,1)–(3,2); homogeneous Dirichlet
    on the whole boundary.
    """
    left_chain = ((1.0, 0.0), (1.3, 1.0), (1.0, 2.0))
    right_chain = ((3.0, 0.0), (3.3, 1.0), (3.0, 2.0))
    return DomainSpec(
        name="metamaterial",
        outer=((0.0, 0.0), (5.0, 0.0), (5.0, 2.0), (0.0, 2.0)),
        subdomains=(
            SubdomainPolygon(((0.0, 0.0), (1.0, 0.0), (1.3, 1.0), (1.0, 2.0), (0.0, 2.0)),
                             Subdomain.PLUS),
            SubdomainPolygon(((1.0, 0.0), (3.0, 0.0), (3.3, 1.0), (3.0, 2.0), (1.0, 2.0), (1.3, 1.0)),
                             Subdomain.MINUS),
            SubdomainPolygon(((3.0, 0.0), (5.0, 0.0), (5.0, 2.0), (3.0, 2.0), (3.3, 1.0)),
                             Subdomain.PLUS),
        ),
        boundary=rectangle_boundary(0.0, 5.0, 0.0, 2.0),
        interfaces=(left_chain, right_chain),
    )

"""
Facet Classification
====================
Labels every mesh facet with exactly one of the five facet sets:
interior of Ω₊, interior of Ω₋, interface Γ_I, Dirichlet, Neumann.
"""

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict

import numpy as np

from meshing.domain import BoundaryKind, DomainSpec, MeshError
from meshing.mesh_builder import Mesh

logger = logging.getLogger(__name__)


class FacetLabel(IntEnum):
    """Facet sets partitioning F_h."""
    INTERIOR_PLUS = 0
    INTERIOR_MINUS = 1
    INTERFACE = 2
    DIRICHLET = 3
    NEUMANN = 4

    @property
    def text(self) -> str:
        return _LABEL_TEXT[self]

    @classmethod
    def from_text(cls, text: str) -> "FacetLabel":
        for label, name in _LABEL_TEXT.items():
            if name == text:
                return label
        raise MeshError(f"Unknown facet label: {text!r}")


_LABEL_TEXT = {
    FacetLabel.INTERIOR_PLUS: "interior+",
    FacetLabel.INTERIOR_MINUS: "interior-",
    FacetLabel.INTERFACE: "interface",
    FacetLabel.DIRICHLET: "dirichlet",
    FacetLabel.NEUMANN: "neumann",
}


@dataclass(frozen=True)
class FacetClassification:
    """One FacetLabel per facet of a mesh."""
    labels: np.ndarray

    def mask(self, label: FacetLabel) -> np.ndarray:
        return self.labels == int(label)

    def counts(self) -> Dict[FacetLabel, int]:
        return {label: int(np.count_nonzero(self.labels == int(label))) for label in FacetLabel}

    @property
    def dirichlet(self) -> np.ndarray:
        return self.mask(FacetLabel.DIRICHLET)

    @property
    def neumann(self) -> np.ndarray:
        return self.mask(FacetLabel.NEUMANN)

    @property
    def interface(self) -> np.ndarray:
        return self.mask(FacetLabel.INTERFACE)

    def free_facets(self) -> np.ndarray:
        """Indices of facets carrying trace unknowns (everything but Dirichlet)."""
        return np.flatnonzero(~self.dirichlet)


def classify_facets(mesh: Mesh, domain: DomainSpec) -> FacetClassification:
    """
    Label the facets of a mesh conforming to a domain.

    Boundary facets inherit the condition of the boundary segment that
    contains them; interior facets are split by the tags of their owners.

    Raises:
        MeshError: If a boundary facet lies on no tagged segment, or the
            interface facets do not cover the domain's interface chains
    """
    labels = np.empty(mesh.n_facets, dtype=np.int64)
    owners = mesh.facet_owners
    boundary = owners[:, 1] < 0

    interior = ~boundary
    tag0 = mesh.tags[owners[:, 0]]
    tag1 = np.where(interior, mesh.tags[np.maximum(owners[:, 1], 0)], 0)
    labels[interior & (tag0 != tag1)] = FacetLabel.INTERFACE
    labels[interior & (tag0 == tag1) & (tag0 > 0)] = FacetLabel.INTERIOR_PLUS
    labels[interior & (tag0 == tag1) & (tag0 < 0)] = FacetLabel.INTERIOR_MINUS

    for f in np.flatnonzero(boundary):
        a, b = mesh.vertices[mesh.facets[f]]
        kind = domain.boundary_kind_of(a, b)
        if kind is None:
            raise MeshError(f"Boundary facet {f} ({a.tolist()}-{b.tolist()}) "
                            f"is not contained in any boundary segment")
        labels[f] = FacetLabel.DIRICHLET if kind is BoundaryKind.DIRICHLET else FacetLabel.NEUMANN

    expected = sum(_polyline_length(chain) for chain in domain.interfaces)
    found = float(np.sum(mesh.facet_lengths()[labels == FacetLabel.INTERFACE]))
    if abs(found - expected) > 1e-9 * max(1.0, expected):
        raise MeshError(f"Mesh is not interface-conforming: interface facets cover "
                        f"{found:.6f}, interfaces have length {expected:.6f}")

    classification = FacetClassification(labels=labels)
    labels.flags.writeable = False
    logger.debug("Facet counts: " + ", ".join(
        f"{label.text}={count}" for label, count in classification.counts().items()))
    return classification


def _polyline_length(chain) -> float:
    pts = np.asarray(chain, dtype=float)
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))

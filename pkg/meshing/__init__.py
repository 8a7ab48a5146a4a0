# Meshing Package
"""
Domains, structured/mapped triangulations and facet classification.
"""

from meshing.domain import (
    BoundaryKind, BoundarySegment, DomainSpec, MeshError, Subdomain, SubdomainPolygon,
    cavity_domain, metamaterial_domain, rectangle_domain, unit_square_domain,
)
from meshing.mesh_builder import Mesh, MeshPattern, build_mapped_mesh, build_structured_mesh
from meshing.facets import FacetClassification, FacetLabel, classify_facets
from meshing.mesh_io import read_mesh, write_mesh

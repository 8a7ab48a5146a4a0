"""
Mesh Text Format
================
Plain-text export and import of a classified mesh:

    vertices N
    x y                (N lines)
    triangles M
    i j k tag          (M lines, tag is + or -)
    facets L
    i j label          (L lines)

Indices are 0-based.
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from meshing.domain import MeshError, Subdomain
from meshing.facets import FacetClassification, FacetLabel
from meshing.mesh_builder import Mesh

logger = logging.getLogger(__name__)


def format_mesh(mesh: Mesh, classification: FacetClassification) -> str:
    lines: List[str] = [f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k} {Subdomain(int(t)).symbol}"
              for (i, j, k), t in zip(mesh.triangles.tolist(), mesh.tags.tolist())]
    lines.append(f"facets {mesh.n_facets}")
    lines += [f"{i} {j} {FacetLabel(int(lab)).text}"
              for (i, j), lab in zip(mesh.facets.tolist(), classification.labels.tolist())]
    return "\n".join(lines) + "\n"


def write_mesh(path: Union[str, Path], mesh: Mesh, classification: FacetClassification) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_mesh(mesh, classification))
    logger.info(f"Wrote mesh with {mesh.n_triangles} triangles to {path}")
    return path


def read_mesh(path: Union[str, Path]) -> Tuple[Mesh, FacetClassification]:
    """
    Parse the text format back into a mesh and its facet labels.

    Raises:
        MeshError: On malformed files or facets that do not match the
            triangles
    """
    with open(path, "r", encoding="utf-8") as f:
        rows = [line.split() for line in f if line.strip()]

    pos = 0

    def section(name: str) -> List[List[str]]:
        nonlocal pos
        if pos >= len(rows) or rows[pos][0] != name or len(rows[pos]) != 2:
            raise MeshError(f"{path}: expected '{name} <count>' header at record {pos + 1}")
        count = int(rows[pos][1])
        body = rows[pos + 1:pos + 1 + count]
        if len(body) != count:
            raise MeshError(f"{path}: section '{name}' is truncated")
        pos += count + 1
        return body

    vertices = np.array([[float(x), float(y)] for x, y in section("vertices")])
    tri_rows = section("triangles")
    triangles = np.array([[int(r[0]), int(r[1]), int(r[2])] for r in tri_rows], dtype=np.int64)
    tags = np.array([int(Subdomain.from_symbol(r[3])) for r in tri_rows], dtype=np.int64)
    facet_rows = section("facets")

    mesh = Mesh.from_arrays(vertices, triangles, tags)
    index = {(int(a), int(b)): f for f, (a, b) in enumerate(mesh.facets.tolist())}
    labels = np.empty(mesh.n_facets, dtype=np.int64)
    if len(facet_rows) != mesh.n_facets:
        raise MeshError(f"{path}: {len(facet_rows)} facets listed, mesh has {mesh.n_facets}")
    for a, b, text in facet_rows:
        key = (min(int(a), int(b)), max(int(a), int(b)))
        if key not in index:
            raise MeshError(f"{path}: facet {key} is not an edge of any triangle")
        labels[index[key]] = FacetLabel.from_text(text)
    labels.flags.writeable = False
    return mesh, FacetClassification(labels=labels)

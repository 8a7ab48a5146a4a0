"""
Tests for domains, mesh builders, facet classification and mesh text I/O.
"""

import numpy as np
import pytest

from fem import ElementKind, make_affine_maps, make_quadrature
from meshing import (
    FacetLabel, Mesh, MeshError, MeshPattern, Subdomain, build_mapped_mesh, build_structured_mesh,
    cavity_domain, classify_facets, metamaterial_domain, read_mesh, rectangle_domain,
    unit_square_domain, write_mesh,
)


# ============ Domains ============

def test_cavity_domain_tags_points():
    domain = cavity_domain()
    tags = domain.subdomain_of(np.array([[-0.5, 0.5], [0.5, 0.5], [3.0, 0.5]]))
    assert tags.tolist() == [1, -1, 0]


def test_metamaterial_domain_tags_points():
    domain = metamaterial_domain()
    tags = domain.subdomain_of(np.array([[2.0, 1.0], [0.5, 1.0], [1.2, 1.0], [4.0, 1.0]]))
    assert tags.tolist() == [-1, 1, -1, 1]
    assert domain.area == pytest.approx(10.0)


def test_subdomain_from_symbol():
    assert Subdomain.from_symbol("+") is Subdomain.PLUS
    assert Subdomain.from_symbol("-") is Subdomain.MINUS
    with pytest.raises(MeshError):
        Subdomain.from_symbol("x")


def test_rectangle_domain_rejects_unknown_side():
    with pytest.raises(MeshError):
        rectangle_domain(0.0, 1.0, 0.0, 1.0, neumann_sides=("front",))


# ============ Structured meshes ============

@pytest.mark.parametrize("n", [1, 2, 8])
def test_cavity_mesh_counts(n, cavity_mesh):
    mesh, classification = cavity_mesh(n)
    assert mesh.n_triangles == 4 * n * n
    assert mesh.n_facets == 6 * n * n + 3 * n
    counts = classification.counts()
    assert counts[FacetLabel.INTERFACE] == n
    assert counts[FacetLabel.DIRICHLET] == 6 * n
    assert counts[FacetLabel.NEUMANN] == 0
    assert mesh.h == pytest.approx(np.sqrt(2.0) / n)


def test_cavity_tags_split_at_interface(cavity_mesh):
    mesh, _ = cavity_mesh(4)
    centroids = mesh.centroids()
    assert np.all((centroids[:, 0] < 0) == (mesh.tags > 0))


def test_mirrored_mesh_is_symmetric_about_interface(cavity_mesh):
    mesh, _ = cavity_mesh(4, "mirrored")

    def triangle_set(vertices):
        return {tuple(sorted(map(tuple, np.round(vertices[t], 12).tolist()))) for t in mesh.triangles}

    reflected = mesh.vertices * np.array([-1.0, 1.0]) + 0.0
    assert triangle_set(mesh.vertices) == triangle_set(reflected)


def test_uniform_mesh_is_not_symmetric(cavity_mesh):
    mesh, _ = cavity_mesh(4, "uniform")
    triangles = {tuple(sorted(map(tuple, np.round(mesh.vertices[t], 12).tolist()))) for t in mesh.triangles}
    reflected = mesh.vertices * np.array([-1.0, 1.0]) + 0.0
    mirrored = {tuple(sorted(map(tuple, np.round(reflected[t], 12).tolist()))) for t in mesh.triangles}
    assert triangles != mirrored


def test_facets_sorted_by_midpoint(cavity_mesh):
    mesh, _ = cavity_mesh(3)
    mid = np.round(mesh.facet_midpoints(), 12)
    order = np.lexsort((mid[:, 1], mid[:, 0]))
    assert np.array_equal(order, np.arange(mesh.n_facets))


def test_facet_adjacency_is_consistent(cavity_mesh):
    mesh, _ = cavity_mesh(3, "uniform")
    for e, facets in enumerate(mesh.element_facets):
        for l, f in enumerate(facets):
            assert e in mesh.facet_owners[f]
            start = mesh.triangles[e, (l + 1) % 3]
            end = mesh.triangles[e, (l + 2) % 3]
            assert {start, end} == set(mesh.facets[f].tolist())
            assert mesh.element_flips[e, l] == (mesh.facets[f, 0] != start)
    owners = mesh.facet_owners
    interior = owners[:, 1] >= 0
    assert np.all(owners[interior, 0] < owners[interior, 1])


def test_neumann_sides_are_labelled(cavity_mesh):
    _, classification = cavity_mesh(2, neumann_sides=("top", "bottom"))
    counts = classification.counts()
    assert counts[FacetLabel.NEUMANN] == 8
    assert counts[FacetLabel.DIRICHLET] == 4


def test_pattern_parse():
    assert MeshPattern.parse("uniform") is MeshPattern.UNIFORM
    assert MeshPattern.parse(MeshPattern.MIRRORED) is MeshPattern.MIRRORED
    with pytest.raises(MeshError):
        MeshPattern.parse("zigzag")


def test_misaligned_interface_rejected():
    domain = rectangle_domain(0.0, 1.0, 0.0, 1.0, interfaces_x=(0.3,))
    with pytest.raises(MeshError):
        build_structured_mesh(domain, 4)


def test_single_subdomain_mesh(cavity_mesh):
    domain = unit_square_domain()
    mesh = build_structured_mesh(domain, 3)
    classification = classify_facets(mesh, domain)
    assert np.all(mesh.tags == 1)
    assert classification.counts()[FacetLabel.INTERFACE] == 0


@pytest.mark.parametrize("pattern", ["mirrored", "uniform"])
@pytest.mark.parametrize("n", [1, 3, 8])
def test_euler_characteristic(cavity_mesh, n, pattern):
    mesh, _ = cavity_mesh(n, pattern)
    assert mesh.n_vertices - mesh.n_facets + mesh.n_triangles == 1


@pytest.mark.parametrize("pattern", ["mirrored", "uniform"])
def test_quadrature_integrates_domain_area(cavity_mesh, pattern):
    mesh, _ = cavity_mesh(4, pattern)
    rule = make_quadrature(ElementKind.TRIANGLE, 4)
    maps = make_affine_maps(mesh)
    assert np.sum(np.abs(maps.determinants)) * rule.weights.sum() == pytest.approx(2.0, rel=1e-13)


# ============ Mapped meshes ============

def test_metamaterial_mesh_has_expected_size():
    domain = metamaterial_domain()
    mesh = build_mapped_mesh(domain, 32)
    assert mesh.n_triangles == 20480


def test_metamaterial_mesh_conforms_to_interfaces():
    domain = metamaterial_domain()
    mesh = build_mapped_mesh(domain, 4)
    classification = classify_facets(mesh, domain)
    interface_length = mesh.facet_lengths()[classification.interface].sum()
    assert interface_length == pytest.approx(4 * np.hypot(0.3, 1.0))
    area_minus = mesh.signed_areas()[mesh.tags < 0].sum()
    assert area_minus == pytest.approx(4.0)


# ============ Validation ============

def test_clockwise_triangle_rejected():
    with pytest.raises(MeshError):
        Mesh.from_arrays(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]), np.array([[0, 1, 2]]),
                         np.array([1]))


def test_triangle_enclosed_by_interface_rejected():
    vertices = np.array([[0, 0], [2, 0], [0, 2], [1, 0], [1, 1], [0, 1]], dtype=float)
    triangles = np.array([[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]])
    with pytest.raises(MeshError, match="interface"):
        Mesh.from_arrays(vertices, triangles, np.array([1, 1, 1, -1]))


def test_locate_points(cavity_mesh):
    mesh, _ = cavity_mesh(2)
    points = np.array([[-0.9, 0.1], [0.3, 0.7], [2.0, 2.0]])
    elements, ref = mesh.locate_points(points)
    assert elements[2] == -1
    v = mesh.vertices[mesh.triangles[elements[:2]]]
    mapped = v[:, 0] + ref[:2, :1] * (v[:, 1] - v[:, 0]) + ref[:2, 1:] * (v[:, 2] - v[:, 0])
    assert np.allclose(mapped, points[:2])


# ============ Text format ============

def test_mesh_file_round_trip(tmp_path, cavity_mesh):
    mesh, classification = cavity_mesh(2, "uniform", neumann_sides=("left",))
    path = write_mesh(tmp_path / "cavity.mesh", mesh, classification)
    loaded, labels = read_mesh(path)
    assert np.array_equal(loaded.vertices, mesh.vertices)
    assert np.array_equal(loaded.triangles, mesh.triangles)
    assert np.array_equal(loaded.tags, mesh.tags)
    assert np.array_equal(labels.labels, classification.labels)
    assert path.read_text().startswith(f"vertices {mesh.n_vertices}\n")


def test_truncated_mesh_file_rejected(tmp_path):
    path = tmp_path / "broken.mesh"
    path.write_text("vertices 3\n0 0\n1 0\n")
    with pytest.raises(MeshError):
        read_mesh(path)


def test_mapped_mesh_euler_characteristic():
    mesh = build_mapped_mesh(metamaterial_domain(), 4)
    assert mesh.n_vertices - mesh.n_facets + mesh.n_triangles == 1

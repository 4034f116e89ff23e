import io

import numpy as np
import pytest

from eitact.mesh import (
    MeshSymmetryError,
    PITCH,
    build_mesh,
    compose,
    permute_element_values,
    symmetry_permutation,
)

# element count of the level-3 polar construction, frozen as a regression
# guard against accidental changes to the generator
LEVEL3_ELEMENT_COUNT = 17856


def test_nodes_inside_disk(mesh1):
    r = np.hypot(mesh1.nodes[:, 0], mesh1.nodes[:, 1])
    assert r.max() <= 1.0 + 1e-12
    boundary = np.concatenate(mesh1.electrode_segments)
    assert np.all(np.abs(np.hypot(*mesh1.nodes[boundary].T) - 1.0) < 1e-12)


def test_electrode_one_centred_at_top(mesh1):
    seg = mesh1.electrode_segments[0]
    centre = mesh1.nodes[seg[len(seg) // 2]]
    assert centre == pytest.approx((0.0, 1.0), abs=1e-12)
    # counterclockwise numbering with 22.5 degree pitch
    for e in range(16):
        seg = mesh1.electrode_segments[e]
        mid = mesh1.nodes[seg[len(seg) // 2]]
        ang = np.arctan2(mid[1], mid[0]) % (2 * np.pi)
        expected = (np.pi / 2 + e * PITCH) % (2 * np.pi)
        assert ang == pytest.approx(expected, abs=1e-12)


def test_node_set_invariant_under_symmetries(mesh1):
    nodes = mesh1.nodes
    ang = PITCH
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    for moved in (nodes @ rot.T, nodes * np.array([-1.0, 1.0])):
        from scipy.spatial import cKDTree
        dist, _ = cKDTree(nodes).query(moved)
        assert dist.max() < 1e-12


def test_positive_areas_and_total(mesh1):
    assert np.all(mesh1.areas > 0)
    assert abs(mesh1.areas.sum() - np.pi) / np.pi < 0.02


def test_area_converges_monotonically():
    totals = [build_mesh(level).areas.sum() for level in (1, 2, 3)]
    assert totals[0] < totals[1] < totals[2] <= np.pi


def test_refinement_monotone_and_frozen_count():
    m1, m2, m3 = (build_mesh(level) for level in (1, 2, 3))
    assert m1.n_elements < m2.n_elements < m3.n_elements
    assert m3.n_elements == LEVEL3_ELEMENT_COUNT


def test_build_mesh_rejections():
    with pytest.raises(ValueError):
        build_mesh(0)
    with pytest.raises(ValueError):
        build_mesh(1, contact_impedance=-1.0)
    with pytest.raises(ValueError, match="fewer than 2 boundary nodes"):
        build_mesh(1, coverage=0.01)
    with pytest.raises(ValueError, match="touch"):
        build_mesh(1, coverage=0.99)


def test_rotation_permutation_matches_coordinates(mesh1):
    perm = symmetry_permutation(mesh1, "rotation-3")
    ang = 3 * PITCH
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    moved = mesh1.nodes @ rot.T
    assert np.max(np.abs(mesh1.nodes[perm.node_map] - moved)) < 1e-12
    assert len(np.unique(perm.node_map)) == mesh1.n_nodes
    assert len(np.unique(perm.element_map)) == mesh1.n_elements


def test_electrode_maps(mesh1):
    rot = symmetry_permutation(mesh1, "rotation-5")
    assert np.array_equal(rot.electrode_map, (np.arange(16) + 5) % 16)
    flip = symmetry_permutation(mesh1, "flip")
    assert np.array_equal(flip.electrode_map, (16 - np.arange(16)) % 16)
    assert flip.electrode_map[0] == 0 and flip.electrode_map[8] == 8


def test_identity_involution_inverse(mesh1):
    ident = symmetry_permutation(mesh1, "rotation-0")
    assert np.array_equal(ident.node_map, np.arange(mesh1.n_nodes))
    assert np.array_equal(ident.element_map, np.arange(mesh1.n_elements))

    flip = symmetry_permutation(mesh1, "flip")
    twice = compose(flip, flip)
    assert np.array_equal(twice.node_map, np.arange(mesh1.n_nodes))

    r1 = symmetry_permutation(mesh1, "rotation-1")
    r15 = symmetry_permutation(mesh1, "rotation-15")
    assert np.array_equal(compose(r1, r15).node_map, np.arange(mesh1.n_nodes))


def test_group_composition_laws(mesh1):
    rots = [symmetry_permutation(mesh1, f"rotation-{k}") for k in range(16)]
    flip = symmetry_permutation(mesh1, "flip")
    for a in (2, 9):
        for b in (5, 13):
            got = compose(rots[a], rots[b])
            want = rots[(a + b) % 16]
            assert np.array_equal(got.node_map, want.node_map)
            assert np.array_equal(got.element_map, want.element_map)
    for k in (1, 6, 12):
        got = compose(compose(flip, rots[k]), flip)
        want = rots[(16 - k) % 16]
        assert np.array_equal(got.node_map, want.node_map)


def test_permute_element_values_roundtrip(mesh1):
    rng = np.random.default_rng(0)
    values = rng.normal(size=mesh1.n_elements)
    perm = symmetry_permutation(mesh1, "rotation-4")
    inv = symmetry_permutation(mesh1, "rotation-12")
    back = permute_element_values(inv, permute_element_values(perm, values))
    assert np.array_equal(back, values)


def test_unknown_kind_rejected(mesh1):
    with pytest.raises(ValueError):
        symmetry_permutation(mesh1, "rotation-16")
    with pytest.raises(ValueError):
        symmetry_permutation(mesh1, "mirror")


def test_element_locator(mesh1):
    rng = np.random.default_rng(1)
    r = 0.95 * np.sqrt(rng.uniform(size=200))
    ang = rng.uniform(0, 2 * np.pi, size=200)
    points = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    found = mesh1.element_at(points)
    assert np.all(found >= 0)
    # the containing triangle really contains the point
    def cross2(u, v):
        return u[0] * v[1] - u[1] * v[0]

    for p, e in zip(points, found):
        a, b, c = mesh1.nodes[mesh1.elements[e]]
        d = cross2(b - a, c - a)
        w1 = cross2(b - p, c - p) / d
        w2 = cross2(c - p, a - p) / d
        assert w1 >= -1e-9 and w2 >= -1e-9 and 1 - w1 - w2 >= -1e-9
    assert mesh1.element_at(np.array([[1.5, 0.0]]))[0] == -1


def test_dump_listing(mesh1):
    buf = io.StringIO()
    mesh1.dump(buf)
    text = buf.getvalue()
    assert f"# nodes {mesh1.n_nodes}" in text
    assert f"# elements {mesh1.n_elements}" in text

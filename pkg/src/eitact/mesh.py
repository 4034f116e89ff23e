"""Triangulated unit-disk sensor mesh with exact 16-fold dihedral symmetry.

The mesh is built in polar coordinates: concentric rings whose angular
subdivision is a multiple of 16, with every ring/quad layer split the same
way.  Rotating the node set by 22.5 degrees, or reflecting it through the
axis joining electrode 1 (top) and electrode 9 (bottom), maps nodes onto
nodes exactly (up to floating-point roundoff), so the symmetry group acts
on the mesh as plain index permutations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

N_ELECTRODES = 16
PITCH = 2.0 * np.pi / N_ELECTRODES
FIRST_ELECTRODE_ANGLE = np.pi / 2.0  # electrode 1 centred at the top


class MeshSymmetryError(RuntimeError):
    """A transformed node has no matching mesh node (construction bug)."""


@dataclass(frozen=True, eq=False)
class SensorMesh:
    """Immutable 2D triangle mesh of the circular sensor domain.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array
        Node coordinates, dimensionless unit-disk units.
    elements : (n_elements, 3) int array
        Counterclockwise node-index triples.
    electrode_segments : tuple of 16 int arrays
        Ordered boundary node indices under each electrode, counterclockwise.
        Electrode index 0 is the electrode centred at 90 degrees; indices
        increase counterclockwise (electrode i sits at 90 + 22.5*i degrees).
    contact_impedance : float
        Contact impedance shared by all electrodes (ohm * m).
    refinement_level : int
    coverage : float
        Fraction of each electrode pitch covered by the metal arc.
    """

    nodes: np.ndarray
    elements: np.ndarray
    electrode_segments: tuple
    contact_impedance: float
    refinement_level: int
    coverage: float
    # polar construction parameters; used by the structured point locator
    n_theta: int
    n_rings: int
    # derived quantities, precomputed once
    areas: np.ndarray
    centroids: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def electrode_edges(self, electrode: int) -> np.ndarray:
        """(n_edges, 2) node-index pairs of consecutive boundary nodes under
        the given electrode."""
        seg = self.electrode_segments[electrode]
        return np.column_stack([seg[:-1], seg[1:]])

    def element_at(self, points: np.ndarray) -> np.ndarray:
        """Locate the element containing each query point.

        Uses the polar construction directly (ring band + angular sector),
        so the cost is O(1) per point.  Returns -1 for points outside the
        meshed polygon.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(points[:, 0], points[:, 1])
        theta = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * np.pi)
        sector = np.floor(theta / (2.0 * np.pi / self.n_theta)).astype(int)
        sector = np.clip(sector, 0, self.n_theta - 1)
        band = np.clip(np.floor(r * self.n_rings).astype(int), 0, self.n_rings - 1)

        out = np.full(points.shape[0], -1, dtype=int)
        for p in range(points.shape[0]):
            if r[p] > 1.0:
                continue
            out[p] = self._locate_one(points[p], band[p], sector[p])
        return out

    def _candidate_elements(self, band: int, sector: int) -> np.ndarray:
        nt = self.n_theta
        cands = []
        for ds in (-1, 0, 1):
            j = (sector + ds) % nt
            for b in (band - 1, band, band + 1):
                if b < 0 or b >= self.n_rings:
                    continue
                if b == 0:
                    cands.append(j)
                else:
                    base = nt + (b - 1) * 4 * nt + 4 * j
                    cands.extend(range(base, base + 4))
        return np.asarray(cands, dtype=int)

    def _locate_one(self, point: np.ndarray, band: int, sector: int) -> int:
        for e in self._candidate_elements(band, sector):
            a, b, c = self.nodes[self.elements[e]]
            d = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
            wa = ((b[0] - point[0]) * (c[1] - point[1])
                  - (c[0] - point[0]) * (b[1] - point[1])) / d
            wb = ((c[0] - point[0]) * (a[1] - point[1])
                  - (a[0] - point[0]) * (c[1] - point[1])) / d
            if wa >= -1e-12 and wb >= -1e-12 and 1.0 - wa - wb >= -1e-12:
                return int(e)
        return -1

    def dump(self, stream) -> None:
        """Write a plain-text node/element listing (debugging aid only)."""
        stream.write(f"# nodes {self.n_nodes}\n")
        for i, (x, y) in enumerate(self.nodes):
            stream.write(f"{i} {x:.17g} {y:.17g}\n")
        stream.write(f"# elements {self.n_elements}\n")
        for i, (a, b, c) in enumerate(self.elements):
            stream.write(f"{i} {a} {b} {c}\n")
        stream.write(f"# electrodes {N_ELECTRODES}\n")
        for i, seg in enumerate(self.electrode_segments):
            stream.write(f"{i} " + " ".join(str(n) for n in seg) + "\n")


@dataclass(frozen=True, eq=False)
class SymmetryPermutation:
    """One element of the sensor's dihedral symmetry group as index maps.

    ``node_map[p]`` is the index of the node at the transformed position of
    node ``p``; likewise for ``element_map``.  ``electrode_map`` uses
    0-based electrode indices (electrode 1 of the usual 1-based convention
    is index 0).
    """

    kind: str  # "rotation-<k>" with k in 0..15, or "flip"
    node_map: np.ndarray
    element_map: np.ndarray
    electrode_map: np.ndarray


def _signed_areas(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    a = nodes[elements[:, 0]]
    b = nodes[elements[:, 1]]
    c = nodes[elements[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def build_mesh(refinement_level: int, contact_impedance: float = 0.01,
               coverage: float = 0.5) -> SensorMesh:
    """Build the polar sensor mesh.

    Parameters
    ----------
    refinement_level : int
        >= 1.  Level L uses 64*L angular sectors and 8*L rings; electrode
        arcs always start and end exactly on boundary nodes.
    contact_impedance : float
        Electrode contact impedance (ohm * m), > 0.
    coverage : float
        Fraction of each 22.5-degree pitch covered by the electrode arc.
        Snapped to a whole (even) number of boundary edges.

    Raises
    ------
    ValueError
        If the refinement/coverage combination leaves an electrode with
        fewer than 2 boundary nodes, or makes neighbouring electrodes touch.
    """
    if refinement_level < 1:
        raise ValueError("refinement_level must be >= 1")
    if contact_impedance <= 0:
        raise ValueError("contact_impedance must be > 0")

    nodes_per_pitch = 4 * refinement_level
    n_theta = N_ELECTRODES * nodes_per_pitch
    n_rings = 8 * refinement_level

    # electrode arc snapped to an even number of boundary edges so that the
    # arc stays centred on a grid node
    arc_edges = 2 * round(coverage * nodes_per_pitch / 2.0)
    if arc_edges < 2:
        raise ValueError(
            "electrode arc covers fewer than 2 boundary nodes; increase "
            "coverage or refinement_level")
    if arc_edges > nodes_per_pitch - 2:
        raise ValueError(
            "electrode arcs would touch; decrease coverage or increase "
            "refinement_level")

    dtheta = 2.0 * np.pi / n_theta
    ring_angles = np.arange(n_theta) * dtheta
    mid_angles = (np.arange(n_theta) + 0.5) * dtheta

    nodes = [np.zeros((1, 2))]
    for i in range(1, n_rings + 1):
        radius = i / n_rings
        nodes.append(radius * np.column_stack([np.cos(ring_angles),
                                               np.sin(ring_angles)]))
    for i in range(1, n_rings):
        radius = (i + 0.5) / n_rings
        nodes.append(radius * np.column_stack([np.cos(mid_angles),
                                               np.sin(mid_angles)]))
    nodes = np.vstack(nodes)

    def ring_node(i: int, j: int) -> int:
        return 1 + (i - 1) * n_theta + j % n_theta

    def mid_node(i: int, j: int) -> int:
        return 1 + n_rings * n_theta + (i - 1) * n_theta + j % n_theta

    elements = []
    for j in range(n_theta):
        elements.append((0, ring_node(1, j), ring_node(1, j + 1)))
    # each quad between rings i and i+1 is split into 4 triangles through
    # its centre node; this split is invariant under both the rotation and
    # the reflection, unlike a fixed-diagonal split
    for i in range(1, n_rings):
        for j in range(n_theta):
            a0, a1 = ring_node(i, j), ring_node(i, j + 1)
            b0, b1 = ring_node(i + 1, j), ring_node(i + 1, j + 1)
            c = mid_node(i, j)
            elements.append((a0, b0, c))
            elements.append((b0, b1, c))
            elements.append((b1, a1, c))
            elements.append((a1, a0, c))
    elements = np.asarray(elements, dtype=np.int32)

    signed = _signed_areas(nodes, elements)
    if np.any(signed <= 0):
        raise AssertionError("non-positive triangle area in polar construction")

    boundary_base = 1 + (n_rings - 1) * n_theta
    segments = []
    half = arc_edges // 2
    for e in range(N_ELECTRODES):
        centre = n_theta // 4 + e * nodes_per_pitch
        offs = np.arange(centre - half, centre + half + 1) % n_theta
        segments.append(boundary_base + offs)

    centroids = nodes[elements].mean(axis=1)
    nodes.setflags(write=False)
    elements.setflags(write=False)
    signed.setflags(write=False)
    centroids.setflags(write=False)

    return SensorMesh(
        nodes=nodes,
        elements=elements,
        electrode_segments=tuple(seg for seg in segments),
        contact_impedance=float(contact_impedance),
        refinement_level=int(refinement_level),
        coverage=arc_edges / nodes_per_pitch,
        n_theta=n_theta,
        n_rings=n_rings,
        areas=signed,
        centroids=centroids,
    )


def _transform_points(points: np.ndarray, kind: str) -> np.ndarray:
    if kind == "flip":
        return points * np.array([-1.0, 1.0])
    if kind.startswith("rotation-"):
        k = int(kind.split("-", 1)[1])
        if not 0 <= k < N_ELECTRODES:
            raise ValueError(f"rotation index out of range: {kind}")
        ang = k * PITCH
        c, s = np.cos(ang), np.sin(ang)
        rot = np.array([[c, -s], [s, c]])
        return points @ rot.T
    raise ValueError(f"unknown symmetry kind: {kind!r}")


_PERMUTATION_CACHE: "weakref.WeakKeyDictionary[SensorMesh, dict]" = None  # type: ignore


def symmetry_permutation(mesh: SensorMesh, kind: str) -> SymmetryPermutation:
    """Resolve a symmetry of the sensor into node/element/electrode maps.

    ``kind`` is ``"rotation-k"`` (counterclockwise by k * 22.5 degrees,
    k in 0..15) or ``"flip"`` (reflection through the electrode-1 /
    electrode-9 axis, i.e. x -> -x).  Results are cached per mesh.

    Raises
    ------
    MeshSymmetryError
        If some transformed node is farther than 1e-9 from every mesh node.
    """
    global _PERMUTATION_CACHE
    if _PERMUTATION_CACHE is None:
        import weakref
        _PERMUTATION_CACHE = weakref.WeakKeyDictionary()
    per_mesh = _PERMUTATION_CACHE.setdefault(mesh, {})
    if kind in per_mesh:
        return per_mesh[kind]
    perm = _resolve_permutation(mesh, kind)
    per_mesh[kind] = perm
    return perm


def _resolve_permutation(mesh: SensorMesh, kind: str) -> SymmetryPermutation:
    moved = _transform_points(mesh.nodes, kind)
    dist, node_map = cKDTree(mesh.nodes).query(moved)
    if dist.max() > 1e-9:
        raise MeshSymmetryError(
            f"mesh is not invariant under {kind}: worst node mismatch "
            f"{dist.max():.3e}")
    if len(np.unique(node_map)) != mesh.n_nodes:
        raise MeshSymmetryError(f"node map for {kind} is not a bijection")

    lookup = {}
    for idx, tri in enumerate(mesh.elements):
        lookup[tuple(sorted(tri))] = idx
    mapped = node_map[mesh.elements]
    element_map = np.empty(mesh.n_elements, dtype=np.int64)
    for idx in range(mesh.n_elements):
        key = tuple(sorted(mapped[idx]))
        try:
            element_map[idx] = lookup[key]
        except KeyError:
            raise MeshSymmetryError(
                f"element {idx} has no image under {kind}") from None
    if len(np.unique(element_map)) != mesh.n_elements:
        raise MeshSymmetryError(f"element map for {kind} is not a bijection")

    electrodes = np.arange(N_ELECTRODES)
    if kind == "flip":
        electrode_map = (N_ELECTRODES - electrodes) % N_ELECTRODES
    else:
        k = int(kind.split("-", 1)[1])
        electrode_map = (electrodes + k) % N_ELECTRODES

    return SymmetryPermutation(
        kind=kind,
        node_map=node_map.astype(np.int64),
        element_map=element_map,
        electrode_map=electrode_map,
    )


def permute_element_values(perm: SymmetryPermutation,
                           values: np.ndarray) -> np.ndarray:
    """Push element-wise values forward through a symmetry: the returned
    array assigns to each transformed element the value of its preimage."""
    out = np.empty_like(values)
    out[perm.element_map] = values
    return out


def compose(first: SymmetryPermutation,
            second: SymmetryPermutation) -> SymmetryPermutation:
    """Permutation of applying ``first`` then ``second`` (second . first)."""
    return SymmetryPermutation(
        kind=f"{second.kind}.{first.kind}",
        node_map=second.node_map[first.node_map],
        element_map=second.element_map[first.element_map],
        electrode_map=second.electrode_map[first.electrode_map],
    )

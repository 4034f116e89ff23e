"""Built-in consistency checks: reciprocity, round trips, the rotation and
flip oracles, and the symmetry-group composition laws.

Each property solves real forward problems on a small mesh, so a pass
means the whole measurement/EIM/augmentation chain is physically
consistent end to end, not just internally plumbed.
"""

from __future__ import annotations

import numpy as np

from . import protocol
from .augment import ALL_TRANSFORMS, augment_frame
from .eim import EimMatrix, compact, eim_to_seq, reciprocity_complete, seq_to_eim
from .forward import (
    ConductivityField,
    MeasurementFrame,
    NONREDUNDANT104,
    homogeneous_field,
    reciprocity_mismatch,
    solve_forward,
    to_nonredundant,
)
from .mesh import build_mesh, compose, permute_element_values, symmetry_permutation
from .dataset import sample_phantom
from .phantoms import conductivity_field


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float((np.abs(a - b) / np.maximum(np.abs(a), np.abs(b))).max())


def run_selftest(refinement: int = 1, seed: int = 0,
                 inject_eim_transpose: bool = False) -> list[tuple[str, bool, str]]:
    """Run all properties; returns (name, passed, detail) triples."""
    results = []
    mesh = build_mesh(refinement)
    rng = np.random.default_rng(seed)

    # 1. prefix counting
    total = sum(protocol.PREFIX_COUNTS)
    results.append(("sequence-prefix-sum",
                    total == protocol.N_NONREDUNDANT,
                    f"13+13+12+...+1 = {total}"))

    # 2. round trips, bit exact
    ok = True
    for _ in range(20):
        values = rng.normal(size=protocol.N_NONREDUNDANT)
        frame = MeasurementFrame(values, NONREDUNDANT104, excitation_current=1e-3)
        eim = seq_to_eim(frame)
        if inject_eim_transpose:
            eim = EimMatrix(eim.form, eim.entries.T.copy(), eim.mask,
                            eim.excitation_current)
        back = eim_to_seq(eim).values
        full = eim_to_seq(compact(reciprocity_complete(eim))).values
        ok = ok and np.array_equal(back, values) and np.array_equal(full, values)
    results.append(("eim-round-trips", ok, "seq->eim->seq and full chain, bit exact"))

    # 3. reciprocity of a forward solve
    phantom = sample_phantom(int(rng.integers(1 << 30)), 3)
    raw = solve_forward(mesh, conductivity_field(phantom, mesh))
    gap = reciprocity_mismatch(raw)
    results.append(("reciprocity", gap < 1e-8, f"max mismatch {gap:.3e}"))

    # 4. homogeneous field: every drive row reads the same 13-vector
    hom = solve_forward(mesh, homogeneous_field(mesh, 0.05))
    grid = hom.values.reshape(16, 13)
    spread = float((np.abs(grid - grid[0]) / np.abs(grid[0])).max())
    results.append(("homogeneous-rows", spread < 1e-9,
                    f"worst row deviation {spread:.3e}"))

    # 5. rotation/flip oracle: all 32 augmented frames against fresh solves
    sigma = conductivity_field(phantom, mesh)
    frame = to_nonredundant(raw)
    if inject_eim_transpose:
        eim = seq_to_eim(frame)
        eim = EimMatrix(eim.form, eim.entries.T.copy(), eim.mask,
                        eim.excitation_current)
        frame = eim_to_seq(eim)
    aset = augment_frame(frame)
    worst = 0.0
    for idx, transform in enumerate(ALL_TRANSFORMS):
        perm = transform.mesh_permutation(mesh)
        moved = permute_element_values(perm, sigma.values)
        target = to_nonredundant(
            solve_forward(mesh, ConductivityField(moved, mesh))).values
        worst = max(worst, _relative_gap(aset.frame_values[idx], target))
    results.append(("augmentation-oracle", worst < 1e-8,
                    f"worst entrywise relative error {worst:.3e} over 32 frames"))

    # 6. group composition laws, exact on index maps
    rots = [symmetry_permutation(mesh, f"rotation-{k}") for k in range(16)]
    flip = symmetry_permutation(mesh, "flip")
    ok = True
    for a in (1, 5, 11):
        for b in (2, 7, 15):
            lhs = compose(rots[a], rots[b])
            ok = ok and np.array_equal(lhs.node_map, rots[(a + b) % 16].node_map)
    for k in (1, 3, 9):
        lhs = compose(compose(flip, rots[k]), flip)
        ok = ok and np.array_equal(lhs.node_map, rots[(16 - k) % 16].node_map)
    ok = ok and np.array_equal(compose(flip, flip).node_map,
                               np.arange(mesh.n_nodes))
    results.append(("group-composition", ok,
                    "rotation addition, dihedral relation, flip involution"))

    return results

import numpy as np
import pytest

from eitact.dataset import sample_phantom
from eitact.forward import (
    ConductivityField,
    ForwardSolveError,
    MeasurementFrame,
    NONREDUNDANT104,
    RAW208,
    compute_jacobian,
    homogeneous_field,
    reciprocity_mismatch,
    solve_forward,
    to_nonredundant,
)
from eitact.mesh import build_mesh, permute_element_values, symmetry_permutation
from eitact.phantoms import conductivity_field
from eitact import protocol


def test_field_validation(mesh1):
    with pytest.raises(ValueError):
        ConductivityField(np.zeros(mesh1.n_elements), mesh1)
    with pytest.raises(ValueError):
        ConductivityField(np.full(mesh1.n_elements, -0.1), mesh1)
    with pytest.raises(ValueError):
        ConductivityField(np.ones(3), mesh1)


def test_all_zero_region_raises_not_garbage(mesh1):
    field = homogeneous_field(mesh1, 0.05)
    object.__setattr__(field, "values", np.zeros(mesh1.n_elements))
    with pytest.raises(ForwardSolveError):
        solve_forward(mesh1, field)


def test_homogeneous_rows_identical(mesh1):
    frame = solve_forward(mesh1, homogeneous_field(mesh1, 0.05))
    grid = frame.values.reshape(16, 13)
    rel = np.abs(grid - grid[0]) / np.abs(grid[0])
    assert rel.max() < 1e-9


def test_reciprocity_on_random_phantoms(mesh1):
    for i in range(10):
        phantom = sample_phantom(100 + i, 1 + i % 4)
        frame = solve_forward(mesh1, conductivity_field(phantom, mesh1))
        assert reciprocity_mismatch(frame) < 1e-8


def test_reciprocity_named_pair(mesh2, background2):
    frame = solve_forward(mesh2, background2)
    grid = frame.values.reshape(16, 13)
    # drive (1,2) measuring (3,4) is slot 0 of drive row 0; drive (3,4)
    # measuring (1,2) is pair 0 under drive 2, slot (0 - 2 - 2) % 16 = 12
    assert grid[0, 0] == pytest.approx(grid[2, 12], rel=1e-9)


def test_ohmic_scaling_of_whole_device():
    # scaling the conductivity by c scales every voltage by 1/c once the
    # contact coupling scales along (impedance 1/c): the entire system
    # matrix is then c times the original.  With the contact impedance held
    # fixed the relation is only approximate, because the electrode shunt
    # paths do not scale with the bulk.
    c = 3.7
    mesh_a = build_mesh(1, contact_impedance=0.01)
    mesh_b = build_mesh(1, contact_impedance=0.01 / c)
    va = solve_forward(mesh_a, homogeneous_field(mesh_a, 0.05)).values
    vb = solve_forward(mesh_b, homogeneous_field(mesh_b, 0.05 * c)).values
    assert np.abs(vb - va / c).max() / np.abs(va / c).max() < 1e-9


def test_current_linearity(mesh1, background1):
    v1 = solve_forward(mesh1, background1, excitation_current=1e-3).values
    v2 = solve_forward(mesh1, background1, excitation_current=2e-3).values
    assert np.allclose(v2, 2 * v1, rtol=1e-12)


def test_to_nonredundant_structure(mesh1, background1):
    raw = solve_forward(mesh1, background1)
    seq = to_nonredundant(raw)
    assert seq.form == NONREDUNDANT104
    assert seq.values.shape == (104,)
    grid = raw.values.reshape(16, 13)
    # the canonical sequence starts with the full rows of drives 0 and 1
    assert np.array_equal(seq.values[:13], grid[0])
    assert np.array_equal(seq.values[13:26], grid[1])
    # then the 12-prefix of drive 2, down to the 1-prefix of drive 13
    assert np.array_equal(seq.values[26:38], grid[2, :12])
    assert seq.values[103] == grid[13, 0]
    with pytest.raises(ValueError):
        to_nonredundant(seq)


def test_prefix_counts():
    assert sum(protocol.PREFIX_COUNTS) == 104
    assert protocol.PREFIX_COUNTS[:3] == (13, 13, 12)
    assert protocol.PREFIX_COUNTS[13] == 1
    assert protocol.PREFIX_COUNTS[14] == protocol.PREFIX_COUNTS[15] == 0


def test_frame_validation():
    with pytest.raises(ValueError):
        MeasurementFrame(np.zeros(104), RAW208, excitation_current=1e-3)
    with pytest.raises(ValueError):
        MeasurementFrame(np.zeros(10), NONREDUNDANT104, excitation_current=1e-3)
    with pytest.raises(ValueError):
        MeasurementFrame(np.zeros(104), "weird", excitation_current=1e-3)


def test_symmetry_equivariance(mesh1):
    phantom = sample_phantom(7, 2)
    sigma = conductivity_field(phantom, mesh1)
    base = solve_forward(mesh1, sigma).values.reshape(16, 13)
    k = 5
    perm = symmetry_permutation(mesh1, f"rotation-{k}")
    moved = permute_element_values(perm, sigma.values)
    rotated = solve_forward(
        mesh1, ConductivityField(moved, mesh1)).values.reshape(16, 13)
    expected = base[(np.arange(16) - k) % 16]
    rel = np.abs(rotated - expected) / np.abs(expected)
    assert rel.max() < 1e-8

    fperm = symmetry_permutation(mesh1, "flip")
    fmoved = permute_element_values(fperm, sigma.values)
    flipped = solve_forward(
        mesh1, ConductivityField(fmoved, mesh1)).values.reshape(16, 13)
    expected = base[(15 - np.arange(16)) % 16][:, ::-1]
    rel = np.abs(flipped - expected) / np.abs(expected)
    assert rel.max() < 1e-8


# --- Jacobian ---------------------------------------------------------------

def test_jacobian_shape(jacobian1, mesh1):
    assert jacobian1.entries.shape == (104, mesh1.n_elements)


def test_jacobian_finite_difference_columns(mesh1, background1, jacobian1):
    v0 = to_nonredundant(solve_forward(mesh1, background1)).values
    rng = np.random.default_rng(11)
    eps = 1e-6 * 0.05
    for k in rng.integers(0, mesh1.n_elements, size=5):
        bumped = background1.values.copy()
        bumped[k] += eps
        v1 = to_nonredundant(
            solve_forward(mesh1, ConductivityField(bumped, mesh1))).values
        fd = (v1 - v0) / eps
        col = jacobian1.entries[:, k]
        assert np.linalg.norm(fd - col) / np.linalg.norm(col) < 1e-2


def test_jacobian_linearity(mesh1, background1, jacobian1):
    v0 = to_nonredundant(solve_forward(mesh1, background1)).values
    phantom = sample_phantom(21, 2)
    delta = np.zeros(mesh1.n_elements)
    for c in phantom.circles:
        inside = np.hypot(mesh1.centroids[:, 0] - c.center[0],
                          mesh1.centroids[:, 1] - c.center[1]) < c.radius
        delta[inside] = -0.01 * 0.05  # 1% contrast
    v1 = to_nonredundant(solve_forward(
        mesh1, ConductivityField(background1.values + delta, mesh1))).values
    predicted = jacobian1.entries @ delta
    assert np.linalg.norm(v1 - v0 - predicted) / np.linalg.norm(predicted) < 0.05


def test_jacobian_symmetry(mesh1, jacobian1):
    # homogeneous reference: rotating drive, measurement and element
    # together leaves the sensitivity unchanged
    k = 4
    perm = symmetry_permutation(mesh1, f"rotation-{k}")
    scale = np.abs(jacobian1.entries).max()
    # canonical row (drive j, meas i) maps to the row of (j+k, i+k); that
    # row may be the reciprocal representative, which has equal value
    for r in (0, 20, 60, 103):
        j = (protocol.CANON_DRIVE[r] + k) % 16
        i = (protocol.CANON_MEAS[r] + k) % 16
        pos = protocol.CANON_POSITION[j, (i - j - 2) % 16]
        if pos < 0:  # canonical keeps the reciprocal twin instead
            pos = protocol.CANON_POSITION[i, (j - i - 2) % 16]
        lhs = jacobian1.entries[pos][perm.element_map]
        rhs = jacobian1.entries[r]
        assert np.abs(lhs - rhs).max() / scale < 1e-8

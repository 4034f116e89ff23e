import numpy as np
import pytest

from eitact import protocol
from eitact.augment import (
    ALL_TRANSFORMS,
    FrameTransform,
    augment_frame,
    flip_frames,
    rotate_frames,
    transform_label,
    transform_phantom,
)
from eitact.dataset import sample_phantom
from eitact.eim import frame_to_compact
from eitact.forward import (
    ConductivityField,
    MeasurementFrame,
    NONREDUNDANT104,
    solve_forward,
    to_nonredundant,
)
from eitact.mesh import permute_element_values
from eitact.phantoms import Circle, TouchPhantom, conductivity_field, rasterize


def _frame(values):
    return MeasurementFrame(values, NONREDUNDANT104, excitation_current=1e-3)


def _solved(mesh, phantom):
    return to_nonredundant(solve_forward(mesh, conductivity_field(phantom, mesh)))


@pytest.fixture(scope="module")
def phantom():
    return TouchPhantom((
        Circle((0.35, 0.2), 0.15, 0.004),
        Circle((-0.3, -0.42), 0.12, 0.02),
    ))


@pytest.fixture(scope="module")
def source(mesh1, phantom):
    return _solved(mesh1, phantom)


def test_row_zero_is_identity(source):
    cpt = frame_to_compact(source)
    rows = rotate_frames(cpt)
    assert np.array_equal(rows[0], source.values)


def test_rotated_cell_equivalence(source):
    # the rotated frame's reading for drive (1,2)/meas (3,4) is the source
    # reading for drive (2,3)/meas (4,5): one step up in every index
    rows = rotate_frames(frame_to_compact(source))
    rotated_once = rows[1]
    # canonical position of drive pair 1 (electrodes 2,3), slot 0 (pair 3)
    src_pos = protocol.CANON_POSITION[1, 0]
    assert rotated_once[0] == source.values[src_pos]


def test_flipped_cell_equivalence(source):
    # the mirrored frame's reading for drive (1,2)/meas (3,4) equals the
    # source reading for drive (16,1)/meas (14,15): canonically stored as
    # drive pair 13, slot 12 -> the last entry of the sequence
    rows = flip_frames(frame_to_compact(source))
    assert rows[0][0] == source.values[103]


def test_oracle_rotations_and_flips(mesh1, phantom, source):
    sigma = conductivity_field(phantom, mesh1)
    aset = augment_frame(source, phantom)
    for idx in (0, 1, 5, 12, 16, 17, 23, 31):
        transform = ALL_TRANSFORMS[idx]
        perm = transform.mesh_permutation(mesh1)
        moved = permute_element_values(perm, sigma.values)
        target = to_nonredundant(
            solve_forward(mesh1, ConductivityField(moved, mesh1))).values
        rel = np.abs(aset.frame_values[idx] - target) / np.abs(target)
        assert rel.max() < 1e-8, f"transform {idx} mismatch {rel.max():.2e}"


def test_oracle_on_transformed_phantom(mesh1, phantom, source):
    aset = augment_frame(source, phantom)
    for idx in (3, 19):
        moved = transform_phantom(phantom, ALL_TRANSFORMS[idx])
        target = _solved(mesh1, moved).values
        rel = np.abs(aset.frame_values[idx] - target) / np.abs(target)
        assert rel.max() < 1e-8


def test_augmented_set_basics(source, phantom):
    aset = augment_frame(source, phantom)
    assert len(aset) == 32
    assert aset.frame_values.shape == (32, 104)
    assert aset.labels.shape == (32, 64, 64)
    assert np.array_equal(aset.frame_values[0], source.values)
    assert aset.transforms[0] == FrameTransform(0, False)
    assert aset.transforms[16] == FrameTransform(0, True)
    assert aset.frame(4).form == NONREDUNDANT104


def test_zero_frame_augments_to_zeros():
    aset = augment_frame(_frame(np.zeros(104)))
    assert np.all(aset.frame_values == 0)
    assert aset.labels is None


def test_each_output_is_permutation_of_input():
    rng = np.random.default_rng(8)
    values = rng.normal(size=104)
    aset = augment_frame(_frame(values))
    want = np.sort(values)
    for row in aset.frame_values:
        assert np.array_equal(np.sort(row), want)


def test_all_32_frames_distinct(source):
    aset = augment_frame(source)
    for a in range(32):
        for b in range(a + 1, 32):
            gap = np.abs(aset.frame_values[a] - aset.frame_values[b]).max()
            assert gap > 1e-12


def test_group_structure_on_frames(source):
    aset = augment_frame(source)
    # rotations compose by index addition
    for k1, k2 in ((1, 2), (5, 13), (9, 9)):
        again = augment_frame(aset.frame(k1))
        assert np.array_equal(again.frame_values[k2],
                              aset.frame_values[(k1 + k2) % 16])
    # mirroring the pure mirror restores the rotation family
    mirrored = augment_frame(aset.frame(16))
    assert np.array_equal(mirrored.frame_values[16], aset.frame_values[0])
    assert np.array_equal(mirrored.frame_values[16 + 3], aset.frame_values[3])


def test_flip_of_symmetric_phantom_repeats_rotations(mesh1):
    # phantom mirror-symmetric about the electrode-1/9 (vertical) axis
    phantom = TouchPhantom((
        Circle((0.0, 0.55), 0.15, 0.003),
        Circle((0.0, -0.3), 0.2, 0.02),
    ))
    frame = _solved(mesh1, phantom)
    aset = augment_frame(frame)
    scale = np.abs(frame.values).max()
    for k in range(16):
        gap = np.abs(aset.frame_values[16 + k] - aset.frame_values[k]).max()
        assert gap / scale < 1e-8


def test_transforms_require_valid_shift():
    with pytest.raises(ValueError):
        FrameTransform(16, False)


def test_label_identity_and_fixed_point(phantom):
    label = rasterize(phantom)
    assert np.array_equal(transform_label(phantom, FrameTransform(0, False)),
                          label)
    centred = TouchPhantom((Circle((0.0, 0.0), 0.3, 0.01),))
    base = rasterize(centred)
    for t in (FrameTransform(4, False), FrameTransform(11, True)):
        assert np.array_equal(transform_label(centred, t), base)


def test_quarter_turn_label_matches_array_rotation(phantom):
    label = rasterize(phantom)
    for k, t in ((4, FrameTransform(4, False)), (8, FrameTransform(8, False)),
                 (12, FrameTransform(12, False))):
        analytic = transform_label(phantom, t)
        raster = transform_label(label, t)
        assert np.array_equal(analytic, raster)
        assert np.array_equal(raster, np.rot90(label, -(k // 4)))


def test_mirror_label_is_fliplr(phantom):
    label = rasterize(phantom)
    assert np.array_equal(transform_label(label, FrameTransform(0, True)),
                          np.fliplr(label))
    assert np.array_equal(transform_label(phantom, FrameTransform(0, True)),
                          np.fliplr(label))


def test_raster_rotation_close_to_analytic():
    phantom = TouchPhantom((Circle((0.5, 0.0), 0.22, 0.001),))
    label = rasterize(phantom)
    for t in (FrameTransform(1, False), FrameTransform(3, True)):
        analytic = transform_label(phantom, t)
        raster = transform_label(label, t)
        # bilinear edge blur only: mass-normalised L1 stays small
        assert np.abs(raster - analytic).sum() / analytic.sum() < 0.15


def test_analytic_rotation_preserves_geometry():
    # a circle at polar angle 0 lands at polar angle -90 deg under shift 4
    # (the touch turns clockwise when electrode labels shift up)
    phantom = TouchPhantom((Circle((0.6, 0.0), 0.1, 0.001),))
    moved = transform_phantom(phantom, FrameTransform(4, False))
    assert moved.circles[0].center == pytest.approx((0.0, -0.6), abs=1e-15)
    assert moved.circles[0].radius == phantom.circles[0].radius
    rot1 = transform_phantom(phantom, FrameTransform(1, False))
    ang = np.arctan2(rot1.circles[0].center[1], rot1.circles[0].center[0])
    assert ang == pytest.approx(-np.pi / 8, abs=1e-12)


def test_wrong_form_rejected(mesh1, background1):
    raw = solve_forward(mesh1, background1)
    with pytest.raises(ValueError):
        augment_frame(raw)
    from eitact.eim import seq_to_eim
    eim = seq_to_eim(to_nonredundant(raw))
    with pytest.raises(ValueError):
        rotate_frames(eim)  # padded, not compact
    with pytest.raises(ValueError):
        flip_frames(eim)

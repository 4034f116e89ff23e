"""Dihedral data augmentation: 1 frame -> 32 physically consistent frames.

A measurement frame of a touch pattern, rearranged through the completed
EIM, yields the frames of the same touch rotated to all 16 electrode
positions and of its mirror image at all 16 positions.  Output row ``k``
of the rotation family is the frame of the touch rotated clockwise by
k * 22.5 degrees (electrodes are numbered counterclockwise, so relabelling
electrodes up by k turns the touch the other way); the mirror family
reflects through the electrode-1/electrode-9 axis first.

The row extraction walks the compact EIM exactly like the rotation
position table: starting at drive row k, concatenate prefixes of length
13, 13, 12, ..., 1 from consecutive rows (wrapping past 16).  The mirror
family feeds the walk with the compact EIM reversed in both rows and
columns, which is the compact EIM of the mirrored touch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import protocol
from .eim import COMPACT, EimMatrix, frame_to_compact
from .forward import NONREDUNDANT104, MeasurementFrame
from .mesh import (
    N_ELECTRODES,
    PITCH,
    SensorMesh,
    SymmetryPermutation,
    compose,
    symmetry_permutation,
)
from .phantoms import Circle, TouchPhantom, rasterize


@dataclass(frozen=True)
class FrameTransform:
    """Touch-pattern transform matching one augmented frame.

    ``mirror`` reflects through the electrode-1/9 axis (x -> -x), applied
    first; ``shift`` then rotates the touch clockwise by shift * 22.5
    degrees.
    """

    shift: int
    mirror: bool

    def __post_init__(self):
        if not 0 <= self.shift < N_ELECTRODES:
            raise ValueError("shift must be in 0..15")

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        x, y = points[..., 0].copy(), points[..., 1].copy()
        if self.mirror:
            x = -x
        k = self.shift
        if k % 4 == 0:
            # exact quarter turns keep the bit-exact-label guarantee
            for _ in range(k // 4):
                x, y = y, -x
        else:
            ang = k * PITCH
            c, s = np.cos(ang), np.sin(ang)
            x, y = x * c + y * s, -x * s + y * c
        return np.stack([x, y], axis=-1)

    def mesh_permutation(self, mesh: SensorMesh) -> SymmetryPermutation:
        rot = symmetry_permutation(
            mesh, f"rotation-{(N_ELECTRODES - self.shift) % N_ELECTRODES}")
        if not self.mirror:
            return rot
        return compose(symmetry_permutation(mesh, "flip"), rot)


ALL_TRANSFORMS: tuple[FrameTransform, ...] = tuple(
    [FrameTransform(k, False) for k in range(N_ELECTRODES)]
    + [FrameTransform(k, True) for k in range(N_ELECTRODES)])


def rotate_frames(eim: EimMatrix) -> np.ndarray:
    """16 x 104 matrix; row k is the canonical sequence of the touch
    rotated clockwise by k * 22.5 degrees."""
    if eim.form != COMPACT:
        raise ValueError(f"expected a {COMPACT} EIM, got {eim.form}")
    flat = eim.entries.ravel()
    return flat[protocol.EXTRACTION_ORDERS]


def flip_frames(eim: EimMatrix) -> np.ndarray:
    """16 x 104 matrix; row k is the canonical sequence of the mirrored
    touch rotated clockwise by k * 22.5 degrees.

    Reversing the compact EIM in both rows and columns produces the
    mirrored touch's compact EIM (a reflection inverts the cyclic order of
    drive pairs as well as of the slots within a drive), after which the
    same row walk as for the rotations applies.
    """
    if eim.form != COMPACT:
        raise ValueError(f"expected a {COMPACT} EIM, got {eim.form}")
    flat = eim.entries[::-1, ::-1].ravel()
    return flat[protocol.EXTRACTION_ORDERS]


@dataclass(frozen=True, eq=False)
class AugmentedSet:
    """32 frames and matching labels derived from one source frame.

    Order: rotations shift = 0..15, then mirrored rotations shift = 0..15;
    entry 0 is the source frame itself.
    """

    frame_values: np.ndarray            # (32, 104)
    labels: np.ndarray | None           # (32, 64, 64)
    transforms: tuple[FrameTransform, ...]
    excitation_current: float

    def frame(self, index: int) -> MeasurementFrame:
        return MeasurementFrame(self.frame_values[index], NONREDUNDANT104,
                                excitation_current=self.excitation_current)

    def __len__(self) -> int:
        return self.frame_values.shape[0]


def transform_phantom(phantom: TouchPhantom,
                      transform: FrameTransform) -> TouchPhantom:
    centres = np.array([c.center for c in phantom.circles], dtype=float)
    if centres.size:
        centres = transform.apply_points(centres)
    circles = tuple(
        Circle((float(centres[i, 0]), float(centres[i, 1])),
               c.radius, c.conductivity)
        for i, c in enumerate(phantom.circles))
    return TouchPhantom(circles, phantom.background_conductivity)


def transform_label(label, transform: FrameTransform) -> np.ndarray:
    """Geometrically transform a ground-truth label.

    Analytic phantoms are transformed exactly and re-rasterised; raster
    labels fall back to fliplr / quarter-turn array ops and bilinear
    rotation for the remaining angles.
    """
    if isinstance(label, TouchPhantom):
        return rasterize(transform_phantom(label, transform))
    img = np.asarray(label, dtype=float)
    if transform.mirror:
        img = np.fliplr(img)
    k = transform.shift
    if k % 4 == 0:
        return np.ascontiguousarray(np.rot90(img, -(k // 4)))
    return ndimage.rotate(img, _RASTER_ANGLE_SIGN * np.degrees(k * PITCH),
                          reshape=False, order=1, mode="constant", cval=0.0)


# calibrated so that ndimage.rotate turns the image content the same way
# as the quarter-turn path; see test_augment for the pinning test
_RASTER_ANGLE_SIGN = -1.0


def augment_frame(frame: MeasurementFrame, label=None) -> AugmentedSet:
    """Expand one canonical frame (and its label) into all 32 variants."""
    if frame.form != NONREDUNDANT104:
        raise ValueError(f"expected a {NONREDUNDANT104} frame, got {frame.form}")
    cpt = frame_to_compact(frame)
    values = np.vstack([rotate_frames(cpt), flip_frames(cpt)])
    labels = None
    if label is not None:
        labels = np.stack([transform_label(label, t) for t in ALL_TRANSFORMS])
    return AugmentedSet(frame_values=values, labels=labels,
                        transforms=ALL_TRANSFORMS,
                        excitation_current=frame.excitation_current)

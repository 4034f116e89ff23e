"""Electrical Impedance Map: matrix views of the measurement sequence.

The padded 16x16 map places the reading with measurement pair ``(i, i+1)``
and drive pair ``(j, j+1)`` at cell ``(i, j)`` (0-based pair indices).
Cells whose pairs share an electrode do not exist physically; they stay
zero with the padding mask set.  A canonical 104-sequence fills 104 cells;
reciprocity completion mirrors them across the diagonal to fill all 208
valid cells, after which each drive column holds 13 valid readings that
can be packed into a dense 16x13 matrix, drive-major, slots
counterclockwise from just past the drive pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import protocol
from .forward import DEFAULT_CURRENT, NONREDUNDANT104, MeasurementFrame

PADDED104 = "padded104"
PADDED208 = "padded208"
COMPACT = "compact16x13"

N = protocol.N_PAIRS


def _valid_cell_mask() -> np.ndarray:
    """True where measurement and drive pairs share no electrode."""
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    diff = (i - j) % N
    return (diff != 0) & (diff != 1) & (diff != N - 1)


VALID_CELLS = _valid_cell_mask()
assert VALID_CELLS.sum() == 208


@dataclass(frozen=True, eq=False)
class EimMatrix:
    """One frame in EIM form.

    ``entries`` is (16, 16) for the padded forms and (16, 13) for the
    compact form.  ``mask`` (padded forms only) is True at zero-padded
    cells.  ``excitation_current`` is carried through so the frame can be
    reconstructed.
    """

    form: str
    entries: np.ndarray
    mask: np.ndarray | None
    excitation_current: float = DEFAULT_CURRENT

    def __post_init__(self):
        shape = {PADDED104: (N, N), PADDED208: (N, N), COMPACT: (N, 13)}
        if self.form not in shape:
            raise ValueError(f"unknown EIM form {self.form!r}")
        if self.entries.shape != shape[self.form]:
            raise ValueError(
                f"{self.form} entries must have shape {shape[self.form]}")
        if self.form == COMPACT:
            if self.mask is not None:
                raise ValueError("compact form carries no mask")
        else:
            filled = int((~self.mask).sum())
            expected = 104 if self.form == PADDED104 else 208
            if filled != expected:
                raise ValueError(
                    f"{self.form} must have {expected} filled cells, "
                    f"got {filled}")


def seq_to_eim(frame: MeasurementFrame) -> EimMatrix:
    """Place the canonical 104-sequence into the padded 16x16 map."""
    if frame.form != NONREDUNDANT104:
        raise ValueError(f"expected a {NONREDUNDANT104} frame, got {frame.form}")
    entries = np.zeros((N, N))
    mask = np.ones((N, N), dtype=bool)
    entries[protocol.CANON_MEAS, protocol.CANON_DRIVE] = frame.values
    mask[protocol.CANON_MEAS, protocol.CANON_DRIVE] = False
    return EimMatrix(PADDED104, entries, mask,
                     excitation_current=frame.excitation_current)


def reciprocity_complete(eim: EimMatrix) -> EimMatrix:
    """Mirror each filled cell across the diagonal (swap drive and
    measurement pairs).  Idempotent: a completed map is returned as is."""
    if eim.form == PADDED208:
        return eim
    if eim.form != PADDED104:
        raise ValueError(f"expected a padded EIM, got {eim.form}")
    entries = eim.entries.copy()
    filled = ~eim.mask
    entries[filled.T] = eim.entries.T[filled.T]
    mask = eim.mask & eim.mask.T
    if (~mask).sum() != 208:
        raise ValueError("input does not hold the 104 canonical cells")
    return EimMatrix(PADDED208, entries, mask,
                     excitation_current=eim.excitation_current)


def compact(eim: EimMatrix) -> EimMatrix:
    """Pack the 13 valid readings of each drive pair into a 16x13 matrix."""
    if eim.form != PADDED208:
        raise ValueError(
            f"expected a completed padded EIM, got {eim.form}; apply "
            "reciprocity_complete first")
    entries = np.empty((N, 13))
    for j in range(N):
        slots = [(j + 2 + m) % N for m in range(13)]
        entries[j] = eim.entries[slots, j]
    return EimMatrix(COMPACT, entries, None,
                     excitation_current=eim.excitation_current)


def eim_to_seq(eim: EimMatrix) -> MeasurementFrame:
    """Recover the canonical 104-sequence from any EIM form."""
    if eim.form == COMPACT:
        values = eim.entries[protocol.CANON_DRIVE, protocol.CANON_SLOT]
    else:
        values = eim.entries[protocol.CANON_MEAS, protocol.CANON_DRIVE]
    return MeasurementFrame(values, NONREDUNDANT104,
                            excitation_current=eim.excitation_current)


def frame_to_compact(frame: MeasurementFrame) -> EimMatrix:
    """Convenience pipeline: sequence -> padded -> completed -> compact."""
    return compact(reciprocity_complete(seq_to_eim(frame)))

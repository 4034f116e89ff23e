"""Index bookkeeping for the 16-electrode adjacent-adjacent protocol.

All electrode and pair indices in this module are 0-based: pair ``j``
means the adjacent electrode pair ``(j, j+1 mod 16)``, and pair 0 is the
pair starting at the electrode centred at 90 degrees.  The EIT literature's
1-based labels are these indices plus one.

A full frame drives all 16 adjacent pairs and reads the 13 adjacent pairs
that share no electrode with the drive, giving 16 x 13 = 208 readings.
Reciprocity makes half of them redundant; the canonical non-redundant
sequence keeps per-drive prefixes of length 13, 13, 12, ..., 1 (drives 14
and 15 contribute nothing), which sums to 104.
"""

from __future__ import annotations

import numpy as np

N_PAIRS = 16
N_MEAS_PER_DRIVE = 13
N_RAW = N_PAIRS * N_MEAS_PER_DRIVE      # 208
N_NONREDUNDANT = 104


def measurement_pair(drive: int, slot: int) -> int:
    """Pair index measured at ``slot`` (0..12) for a given drive pair.

    Slots run counterclockwise starting just past the drive pair.
    """
    return (drive + 2 + slot) % N_PAIRS


def prefix_count(drive: int) -> int:
    """Entries the canonical sequence keeps from this drive's 13 readings."""
    if drive <= 1:
        return 13
    if drive <= 13:
        return 14 - drive
    return 0


PREFIX_COUNTS = tuple(prefix_count(j) for j in range(N_PAIRS))
assert sum(PREFIX_COUNTS) == N_NONREDUNDANT


def _canonical_cells() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    drives, slots, meas = [], [], []
    for j in range(N_PAIRS):
        for m in range(PREFIX_COUNTS[j]):
            drives.append(j)
            slots.append(m)
            meas.append(measurement_pair(j, m))
    return (np.asarray(drives, dtype=np.int64),
            np.asarray(slots, dtype=np.int64),
            np.asarray(meas, dtype=np.int64))


# canonical sequence position -> (drive pair, slot, measurement pair)
CANON_DRIVE, CANON_SLOT, CANON_MEAS = _canonical_cells()

# (drive, slot) -> canonical position, -1 where the cell is dropped
CANON_POSITION = np.full((N_PAIRS, N_MEAS_PER_DRIVE), -1, dtype=np.int64)
CANON_POSITION[CANON_DRIVE, CANON_SLOT] = np.arange(N_NONREDUNDANT)


def extraction_order(start_row: int) -> np.ndarray:
    """Flat indices into a row-major (16, 13) full-readings matrix that
    assemble one canonical 104-sequence starting the row walk at
    ``start_row``.

    ``start_row = 0`` reproduces the canonical sequence itself.
    """
    idx = np.empty(N_NONREDUNDANT, dtype=np.int64)
    pos = 0
    for block in range(14):
        row = (start_row + block) % N_PAIRS
        num = PREFIX_COUNTS[block]
        idx[pos:pos + num] = row * N_MEAS_PER_DRIVE + np.arange(num)
        pos += num
    assert pos == N_NONREDUNDANT
    return idx


EXTRACTION_ORDERS = np.stack([extraction_order(t) for t in range(N_PAIRS)])

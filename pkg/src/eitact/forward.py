"""Complete-electrode-model forward solver and sensitivity matrix.

The potential u solves div(sigma grad u) = 0 on the disk, coupled to the
16 electrode potentials U_l through a contact impedance z:

    stiffness(sigma) u  +  (1/z) boundary coupling  =  injected currents

Discretisation: linear (P1) triangles, piecewise-constant conductivity per
element, and a Lagrange multiplier pinning sum(U) = 0.  One sparse LU
factorisation per conductivity field serves all 16 adjacent drive patterns.

Voltage convention: the reading for measurement pair ``(i, i+1)`` is
``U_i - U_{i+1}`` with the drive injecting +I at the first electrode of the
drive pair.  Readings are reported drive-major, each drive's 13 slots
running counterclockwise starting just past the drive pair, so on a
homogeneous disk every drive row is the same 13-vector.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import protocol
from .mesh import N_ELECTRODES, SensorMesh

RAW208 = "raw208"
NONREDUNDANT104 = "nonredundant104"

DEFAULT_CURRENT = 1e-3  # amperes; amplitude cancels in time-difference data


class ForwardSolveError(RuntimeError):
    """The FEM system could not be solved (singular or non-finite)."""


@dataclass(frozen=True, eq=False)
class ConductivityField:
    """Piecewise-constant conductivity, one value per mesh element (S/m)."""

    values: np.ndarray
    mesh: SensorMesh

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_elements,):
            raise ValueError(
                f"expected {self.mesh.n_elements} element values, "
                f"got shape {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("conductivity values must be finite and > 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def homogeneous_field(mesh: SensorMesh, value: float) -> ConductivityField:
    return ConductivityField(np.full(mesh.n_elements, float(value)), mesh)


@dataclass(frozen=True, eq=False)
class MeasurementFrame:
    """One frame of adjacent-protocol voltage readings (volts)."""

    values: np.ndarray
    form: str  # RAW208 or NONREDUNDANT104
    excitation_current: float
    protocol: str = "adjacent-adjacent-16"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = {RAW208: protocol_len_raw(), NONREDUNDANT104: protocol_len_seq()}
        if self.form not in expected:
            raise ValueError(f"unknown frame form {self.form!r}")
        if values.shape != (expected[self.form],):
            raise ValueError(
                f"{self.form} frame must have {expected[self.form]} values, "
                f"got shape {values.shape}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def protocol_len_raw() -> int:
    return protocol.N_RAW


def protocol_len_seq() -> int:
    return protocol.N_NONREDUNDANT


@dataclass(frozen=True, eq=False)
class JacobianMatrix:
    """Sensitivity of the 104 canonical readings to element conductivities.

    ``entries[r, k]`` is d(reading r)/d(sigma_k) in volts per (S/m),
    evaluated at ``reference_field``.
    """

    entries: np.ndarray
    reference_field: ConductivityField
    excitation_current: float

    @property
    def mesh(self) -> SensorMesh:
        return self.reference_field.mesh


# ---------------------------------------------------------------------------
# assembly

class _MeshOperators:
    """Sigma-independent FEM data for one mesh, built once and reused."""

    def __init__(self, mesh: SensorMesh):
        nodes, tris = mesh.nodes, mesh.elements
        x = nodes[tris, 0]
        y = nodes[tris, 1]
        # b_i, c_i of the P1 gradient: grad(phi_i) = (b_i, c_i) / (2 A)
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        areas = mesh.areas
        # geometric stiffness block per element: K[i,j] = (b_i b_j + c_i c_j)/(4A)
        self.k_geo = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
            / (4.0 * areas[:, None, None])
        self.grad_coeff = np.stack([b, c], axis=2) / (2.0 * areas[:, None, None])

        n = mesh.n_nodes
        self.n_nodes = n
        self.size = n + N_ELECTRODES + 1
        rows = np.repeat(tris, 3, axis=1).ravel()
        cols = np.tile(tris, (1, 3)).ravel()

        # contact-impedance coupling, independent of sigma
        z = mesh.contact_impedance
        extra_rows, extra_cols, extra_vals = [], [], []
        for el in range(N_ELECTRODES):
            edges = mesh.electrode_edges(el)
            p0 = mesh.nodes[edges[:, 0]]
            p1 = mesh.nodes[edges[:, 1]]
            lengths = np.hypot(*(p1 - p0).T)
            ucol = n + el
            for (a, bnode), ln in zip(edges, lengths):
                # edge mass matrix ln/6 * [[2,1],[1,2]] scaled by 1/z
                extra_rows += [a, a, bnode, bnode]
                extra_cols += [a, bnode, a, bnode]
                extra_vals += [2 * ln / (6 * z), ln / (6 * z),
                               ln / (6 * z), 2 * ln / (6 * z)]
                # node-to-electrode coupling -int(phi)/z = -ln/(2z) per endpoint
                extra_rows += [a, bnode, ucol, ucol]
                extra_cols += [ucol, ucol, a, bnode]
                extra_vals += [-ln / (2 * z)] * 4
            total = lengths.sum()
            extra_rows.append(ucol)
            extra_cols.append(ucol)
            extra_vals.append(total / z)
        # Lagrange multiplier row/column enforcing sum(U) = 0
        lam = n + N_ELECTRODES
        for el in range(N_ELECTRODES):
            extra_rows += [lam, n + el]
            extra_cols += [n + el, lam]
            extra_vals += [1.0, 1.0]

        self.sigma_rows = rows
        self.sigma_cols = cols
        self.const_rows = np.asarray(extra_rows, dtype=np.int64)
        self.const_cols = np.asarray(extra_cols, dtype=np.int64)
        self.const_vals = np.asarray(extra_vals, dtype=float)

        # right-hand sides for the 16 adjacent drive patterns at unit current
        rhs = np.zeros((self.size, N_ELECTRODES))
        for j in range(N_ELECTRODES):
            rhs[n + j, j] = 1.0
            rhs[n + (j + 1) % N_ELECTRODES, j] = -1.0
        self.unit_rhs = rhs

    def assemble(self, sigma: np.ndarray) -> sp.csc_matrix:
        vals = (self.k_geo * sigma[:, None, None]).ravel()
        data = np.concatenate([vals, self.const_vals])
        rows = np.concatenate([self.sigma_rows, self.const_rows])
        cols = np.concatenate([self.sigma_cols, self.const_cols])
        return sp.coo_matrix((data, (rows, cols)),
                             shape=(self.size, self.size)).tocsc()


_OPERATOR_CACHE: "weakref.WeakKeyDictionary[SensorMesh, _MeshOperators]" = \
    weakref.WeakKeyDictionary()


def _operators(mesh: SensorMesh) -> _MeshOperators:
    ops = _OPERATOR_CACHE.get(mesh)
    if ops is None:
        ops = _MeshOperators(mesh)
        _OPERATOR_CACHE[mesh] = ops
    return ops


def _solve_patterns(sigma: ConductivityField,
                    excitation_current: float) -> tuple[np.ndarray, _MeshOperators]:
    """Solve all 16 drive patterns; returns (size, 16) solution block."""
    ops = _operators(sigma.mesh)
    matrix = ops.assemble(sigma.values)
    try:
        lu = spla.splu(matrix)
        solutions = lu.solve(ops.unit_rhs * excitation_current)
    except RuntimeError as exc:
        raise ForwardSolveError(f"forward FEM solve failed: {exc}") from exc
    if not np.all(np.isfinite(solutions)):
        raise ForwardSolveError("forward FEM solve produced non-finite values")
    return solutions, ops


def _electrode_potentials(sigma: ConductivityField,
                          excitation_current: float) -> np.ndarray:
    solutions, ops = _solve_patterns(sigma, excitation_current)
    return solutions[ops.n_nodes:ops.n_nodes + N_ELECTRODES, :]


def solve_forward(mesh: SensorMesh, sigma: ConductivityField,
                  excitation_current: float = DEFAULT_CURRENT) -> MeasurementFrame:
    """Simulate one full adjacent-protocol frame (all 208 readings).

    Returns a RAW208 frame ordered drive-major; see the module docstring
    for the slot and sign conventions.
    """
    if sigma.mesh is not mesh:
        raise ValueError("conductivity field belongs to a different mesh")
    if excitation_current <= 0:
        raise ValueError("excitation_current must be > 0")
    potentials = _electrode_potentials(sigma, excitation_current)

    readings = np.empty((protocol.N_PAIRS, protocol.N_MEAS_PER_DRIVE))
    for j in range(protocol.N_PAIRS):
        for m in range(protocol.N_MEAS_PER_DRIVE):
            i = protocol.measurement_pair(j, m)
            readings[j, m] = potentials[i, j] - potentials[(i + 1) % N_ELECTRODES, j]
    return MeasurementFrame(readings.ravel(), RAW208,
                            excitation_current=excitation_current)


def to_nonredundant(frame: MeasurementFrame) -> MeasurementFrame:
    """Keep one reading per reciprocal pair, in the canonical sequence."""
    if frame.form != RAW208:
        raise ValueError(f"expected a {RAW208} frame, got {frame.form}")
    seq = frame.values[protocol.EXTRACTION_ORDERS[0]]
    return MeasurementFrame(seq, NONREDUNDANT104,
                            excitation_current=frame.excitation_current)


def reciprocity_mismatch(frame: MeasurementFrame) -> float:
    """Worst |V(drive, meas) - V(meas, drive)| over max |V| of the frame."""
    if frame.form != RAW208:
        raise ValueError(f"expected a {RAW208} frame, got {frame.form}")
    grid = frame.values.reshape(protocol.N_PAIRS, protocol.N_MEAS_PER_DRIVE)
    worst = 0.0
    for j in range(protocol.N_PAIRS):
        for m in range(protocol.N_MEAS_PER_DRIVE):
            i = protocol.measurement_pair(j, m)
            # slot of pair j when pair i drives
            m_back = (j - i - 2) % protocol.N_PAIRS
            worst = max(worst, abs(grid[j, m] - grid[i, m_back]))
    return worst / np.abs(frame.values).max()


def compute_jacobian(mesh: SensorMesh, sigma0: ConductivityField,
                     excitation_current: float = DEFAULT_CURRENT) -> JacobianMatrix:
    """Sensitivity matrix at the reference conductivity.

    Row (drive j, measurement i), column k is
    ``-area_k * grad(u_j) . grad(w_i)`` on element k, where u_j is the
    drive-pattern potential at the excitation current and w_i the
    measurement-pattern potential at unit current; rows follow the
    canonical 104 ordering.
    """
    if sigma0.mesh is not mesh:
        raise ValueError("conductivity field belongs to a different mesh")
    solutions, ops = _solve_patterns(sigma0, excitation_current)
    nodal = solutions[:ops.n_nodes, :]

    # per-element gradient of each drive pattern: (16, n_elements, 2)
    grads = np.einsum("eic,eip->pec", ops.grad_coeff, nodal[mesh.elements])
    drive_g = grads[protocol.CANON_DRIVE]
    meas_g = grads[protocol.CANON_MEAS]
    entries = -(drive_g * meas_g).sum(axis=2) * mesh.areas[None, :] \
        / excitation_current
    return JacobianMatrix(entries=entries, reference_field=sigma0,
                          excitation_current=excitation_current)

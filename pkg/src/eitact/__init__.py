"""EIT tactile-sensor simulation, augmentation and reconstruction toolkit."""

from .mesh import SensorMesh, SymmetryPermutation, build_mesh, symmetry_permutation
from .forward import (
    ConductivityField,
    JacobianMatrix,
    MeasurementFrame,
    compute_jacobian,
    homogeneous_field,
    solve_forward,
    to_nonredundant,
)

__version__ = "0.1.0"

__all__ = [
    "SensorMesh",
    "SymmetryPermutation",
    "build_mesh",
    "symmetry_permutation",
    "ConductivityField",
    "JacobianMatrix",
    "MeasurementFrame",
    "compute_jacobian",
    "homogeneous_field",
    "solve_forward",
    "to_nonredundant",
]

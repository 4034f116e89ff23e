"""Analytic circle phantoms and their 64x64 conductivity-change labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import ConductivityField
from .mesh import SensorMesh

LABEL_SIZE = 64
BACKGROUND_CONDUCTIVITY = 0.05     # S/m
CONDUCTIVITY_MIN = 0.0001          # S/m, strongest touch
CONDUCTIVITY_MAX = 0.05            # S/m, no touch

_COORD = -1.0 + (np.arange(LABEL_SIZE) + 0.5) * (2.0 / LABEL_SIZE)
PIXEL_X = np.broadcast_to(_COORD[None, :], (LABEL_SIZE, LABEL_SIZE))
PIXEL_Y = np.broadcast_to(-_COORD[:, None], (LABEL_SIZE, LABEL_SIZE))


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float
    conductivity: float


@dataclass(frozen=True, eq=False)
class TouchPhantom:
    """A set of non-overlapping conductive circles inside the unit disk."""

    circles: tuple[Circle, ...]
    background_conductivity: float = BACKGROUND_CONDUCTIVITY

    def __post_init__(self):
        if len(self.circles) > 4:
            raise ValueError("at most 4 circles per phantom")
        tol = 1e-9
        for c in self.circles:
            if c.radius <= 0:
                raise ValueError("circle radius must be > 0")
            if np.hypot(*c.center) + c.radius > 1.0 + tol:
                raise ValueError("circle extends outside the unit disk")
            if not (CONDUCTIVITY_MIN - tol <= c.conductivity
                    <= CONDUCTIVITY_MAX + tol):
                raise ValueError(
                    f"circle conductivity {c.conductivity} outside "
                    f"[{CONDUCTIVITY_MIN}, {CONDUCTIVITY_MAX}]")
        for a in range(len(self.circles)):
            for b in range(a + 1, len(self.circles)):
                ca, cb = self.circles[a], self.circles[b]
                gap = np.hypot(ca.center[0] - cb.center[0],
                               ca.center[1] - cb.center[1])
                if gap < ca.radius + cb.radius - tol:
                    raise ValueError("circles overlap")

    @property
    def n_circles(self) -> int:
        return len(self.circles)


def rasterize(phantom: TouchPhantom) -> np.ndarray:
    """64x64 map of normalised |conductivity change|.

    A pixel inside a circle gets ``|sigma_c - background| / scale`` where
    the scale maps the strongest possible touch to 1.0; background pixels
    and pixels outside the disk are 0.  Pixel membership is decided at the
    pixel centre.
    """
    scale = phantom.background_conductivity - CONDUCTIVITY_MIN
    img = np.zeros((LABEL_SIZE, LABEL_SIZE))
    inside_disk = PIXEL_X * PIXEL_X + PIXEL_Y * PIXEL_Y <= 1.0
    for c in phantom.circles:
        dx = PIXEL_X - c.center[0]
        dy = PIXEL_Y - c.center[1]
        covered = (dx * dx + dy * dy <= c.radius * c.radius) & inside_disk
        img[covered] = abs(c.conductivity - phantom.background_conductivity) / scale
    return img


def conductivity_field(phantom: TouchPhantom, mesh: SensorMesh) -> ConductivityField:
    """Piecewise-constant element conductivities: each element takes the
    value of the circle covering its centroid, else the background."""
    values = np.full(mesh.n_elements, phantom.background_conductivity)
    cx, cy = mesh.centroids[:, 0], mesh.centroids[:, 1]
    for c in phantom.circles:
        dx = cx - c.center[0]
        dy = cy - c.center[1]
        values[dx * dx + dy * dy <= c.radius * c.radius] = c.conductivity
    return ConductivityField(values, mesh)

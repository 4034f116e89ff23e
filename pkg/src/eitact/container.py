"""On-disk dataset container: JSON manifest + raw little-endian float32 blobs.

Layout of a container directory::

    manifest.json       counts, splits, generation parameters, provenance
    measurements.f32    n_samples x 104 float32, row-major
    labels.f32          n_samples x 64 x 64 float32, row-major

The blobs are plain arrays with no header, so any language can map them;
the manifest is the single source of truth for the sample count and split
boundaries.  Samples are ordered train, then validation, then test.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .phantoms import LABEL_SIZE
from . import protocol

MANIFEST_NAME = "manifest.json"
MEASUREMENTS_NAME = "measurements.f32"
LABELS_NAME = "labels.f32"
FORMAT_VERSION = 1

MEASUREMENT_LEN = protocol.N_NONREDUNDANT
LABEL_LEN = LABEL_SIZE * LABEL_SIZE


class ContainerError(RuntimeError):
    """Malformed or inconsistent container on disk."""


@dataclass(frozen=True, eq=False)
class DatasetContainer:
    path: Path
    manifest: dict
    measurements: np.ndarray  # (n, 104) float32
    labels: np.ndarray        # (n, 64, 64) float32

    @property
    def n_samples(self) -> int:
        return int(self.manifest["n_samples"])

    def split_slice(self, name: str) -> slice:
        info = self.manifest["splits"][name]
        return slice(info["start"], info["start"] + info["count"])

    def split_measurements(self, name: str) -> np.ndarray:
        return self.measurements[self.split_slice(name)]

    def split_labels(self, name: str) -> np.ndarray:
        return self.labels[self.split_slice(name)]


def write_container(path, manifest: dict, measurements: np.ndarray,
                    labels: np.ndarray) -> DatasetContainer:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n = int(manifest["n_samples"])
    measurements = np.ascontiguousarray(measurements, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<f4")
    if measurements.shape != (n, MEASUREMENT_LEN):
        raise ContainerError(
            f"measurements shape {measurements.shape} does not match "
            f"manifest count {n}")
    if labels.shape != (n, LABEL_SIZE, LABEL_SIZE):
        raise ContainerError(
            f"labels shape {labels.shape} does not match manifest count {n}")
    (path / MEASUREMENTS_NAME).write_bytes(measurements.tobytes())
    (path / LABELS_NAME).write_bytes(labels.tobytes())
    with open(path / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return DatasetContainer(path, manifest, measurements, labels)


def read_container(path) -> DatasetContainer:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise ContainerError(f"no {MANIFEST_NAME} in {path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerError(
            f"unsupported container format_version "
            f"{manifest.get('format_version')!r}")
    n = int(manifest["n_samples"])

    raw_m = np.frombuffer((path / MEASUREMENTS_NAME).read_bytes(), dtype="<f4")
    raw_l = np.frombuffer((path / LABELS_NAME).read_bytes(), dtype="<f4")
    if raw_m.size != n * MEASUREMENT_LEN:
        raise ContainerError(
            f"measurements blob holds {raw_m.size} floats, expected "
            f"{n * MEASUREMENT_LEN}")
    if raw_l.size != n * LABEL_LEN:
        raise ContainerError(
            f"labels blob holds {raw_l.size} floats, expected {n * LABEL_LEN}")

    starts = sorted((s["start"], s["count"]) for s in manifest["splits"].values())
    covered = 0
    for start, count in starts:
        if start != covered:
            raise ContainerError("split ranges must tile the sample range")
        covered += count
    if covered != n:
        raise ContainerError("split counts do not sum to n_samples")

    return DatasetContainer(
        path, manifest,
        raw_m.reshape(n, MEASUREMENT_LEN),
        raw_l.reshape(n, LABEL_SIZE, LABEL_SIZE))

"""Synthetic dataset generation: phantoms, noise, splits, augmentation.

Each sample is the time-difference signal of one touch scene: the frame of
the touched sensor minus the frame of the untouched (homogeneous)
background, both in canonical 104-sequence form, paired with the 64x64
normalised conductivity-change label.  Training samples carry 1-3 circles,
validation and test samples carry 4, mirroring the usual benchmark split.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, protocol
from .augment import ALL_TRANSFORMS, augment_frame, transform_phantom
from .container import (
    FORMAT_VERSION,
    DatasetContainer,
    read_container,
    write_container,
)
from .forward import (
    DEFAULT_CURRENT,
    NONREDUNDANT104,
    MeasurementFrame,
    homogeneous_field,
    solve_forward,
    to_nonredundant,
)
from .mesh import build_mesh
from .phantoms import (
    BACKGROUND_CONDUCTIVITY,
    CONDUCTIVITY_MAX,
    CONDUCTIVITY_MIN,
    Circle,
    TouchPhantom,
    conductivity_field,
    rasterize,
)

log = logging.getLogger(__name__)

DEFAULT_RADIUS_RANGE = (0.05, 0.25)
DEFAULT_BOUNDARY_MARGIN = 0.02
_REJECTION_BUDGET = 20_000


class PhantomSamplingError(RuntimeError):
    """Rejection sampling could not place the requested circles."""


def sample_phantom(rng_seed: int, n_circles: int,
                   radius_range: tuple[float, float] = DEFAULT_RADIUS_RANGE,
                   boundary_margin: float = DEFAULT_BOUNDARY_MARGIN,
                   background: float = BACKGROUND_CONDUCTIVITY) -> TouchPhantom:
    """Draw a random touch scene: 1-4 disjoint circles inside the disk.

    Centres are uniform over the disk, radii uniform over ``radius_range``
    (in disk radii) and conductivities uniform over the touch range.
    Deterministic for a given seed.
    """
    if not 1 <= n_circles <= 4:
        raise ValueError("n_circles must be in 1..4")
    rng = np.random.default_rng(rng_seed)
    circles: list[Circle] = []
    attempts = 0
    while len(circles) < n_circles:
        if attempts >= _REJECTION_BUDGET:
            raise PhantomSamplingError(
                f"could not place {n_circles} circles after {attempts} "
                "attempts; loosen radius_range or boundary_margin")
        attempts += 1
        radius = rng.uniform(*radius_range)
        # uniform position over the admissible centre disk
        reach = 1.0 - boundary_margin - radius
        if reach <= 0:
            continue
        r_pos = reach * math.sqrt(rng.uniform())
        ang = rng.uniform(0.0, 2.0 * math.pi)
        centre = (r_pos * math.cos(ang), r_pos * math.sin(ang))
        clear = all(
            math.hypot(centre[0] - c.center[0], centre[1] - c.center[1])
            >= radius + c.radius
            for c in circles)
        if not clear:
            continue
        conductivity = rng.uniform(CONDUCTIVITY_MIN, CONDUCTIVITY_MAX)
        circles.append(Circle(centre, radius, conductivity))
    return TouchPhantom(tuple(circles), background)


def add_awgn(frame: MeasurementFrame, snr_db: float,
             rng_seed: int) -> MeasurementFrame:
    """Add white Gaussian noise scaled to the frame's own power.

    The noise variance is ``mean(v^2) / 10^(snr_db/10)``; pass
    ``snr_db = inf`` (or None) for a no-op.  Deterministic per seed.
    """
    if snr_db is None or math.isinf(snr_db):
        return frame
    if not np.all(np.isfinite(frame.values)):
        raise ValueError("frame contains non-finite values")
    power = float(np.mean(frame.values ** 2))
    sd = math.sqrt(power / (10.0 ** (snr_db / 10.0)))
    noise = np.random.default_rng(rng_seed).normal(0.0, sd, frame.values.shape)
    return MeasurementFrame(frame.values + noise, frame.form,
                            excitation_current=frame.excitation_current)


@dataclass(frozen=True)
class GenerationConfig:
    """Everything that determines a generated container, bit for bit."""

    seed: int
    train_counts: dict = field(default_factory=lambda: {1: 0, 2: 0, 3: 0})
    val_count: int = 0
    test_count: int = 0
    snr_db: float | None = 50.0
    refinement_level: int = 2
    contact_impedance: float = 0.01
    excitation_current: float = DEFAULT_CURRENT
    background_conductivity: float = BACKGROUND_CONDUCTIVITY
    radius_range: tuple[float, float] = DEFAULT_RADIUS_RANGE
    boundary_margin: float = DEFAULT_BOUNDARY_MARGIN
    noise_on: str = "difference"  # or "absolute": noise added to V before differencing

    def sample_plan(self) -> list[tuple[str, int]]:
        plan = []
        for k in (1, 2, 3):
            plan += [("train", k)] * int(self.train_counts.get(k, 0))
        plan += [("val", 4)] * int(self.val_count)
        plan += [("test", 4)] * int(self.test_count)
        return plan


def _phantom_seed(seed: int, index: int, attempt: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, index, 0, attempt])


def _noise_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index, 1]).generate_state(1)[0])


_WORKER_STATE: dict = {}


def _worker_init(cfg: GenerationConfig):
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["mesh"] = build_mesh(cfg.refinement_level,
                                       cfg.contact_impedance)
    bg = homogeneous_field(_WORKER_STATE["mesh"], cfg.background_conductivity)
    _WORKER_STATE["v_bg"] = to_nonredundant(solve_forward(
        _WORKER_STATE["mesh"], bg, cfg.excitation_current)).values


def _generate_sample(args: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, list]:
    index, n_circles = args
    cfg: GenerationConfig = _WORKER_STATE["cfg"]
    mesh = _WORKER_STATE["mesh"]
    v_bg = _WORKER_STATE["v_bg"]
    for attempt in range(8):
        phantom_seed = _phantom_seed(cfg.seed, index, attempt)
        try:
            phantom = sample_phantom(
                phantom_seed, n_circles, cfg.radius_range,
                cfg.boundary_margin, cfg.background_conductivity)
            raw = solve_forward(mesh, conductivity_field(phantom, mesh),
                                cfg.excitation_current)
        except Exception as exc:  # resample with fresh entropy
            log.warning("sample %d attempt %d failed (%s); resampling",
                        index, attempt, exc)
            continue
        v_touch = to_nonredundant(raw)
        if cfg.noise_on == "absolute":
            v_touch = add_awgn(v_touch, cfg.snr_db, _noise_seed(cfg.seed, index))
            dv = v_touch.values - v_bg
        else:
            dv_frame = MeasurementFrame(v_touch.values - v_bg, NONREDUNDANT104,
                                        excitation_current=cfg.excitation_current)
            dv = add_awgn(dv_frame, cfg.snr_db,
                          _noise_seed(cfg.seed, index)).values
        circles = [[c.center[0], c.center[1], c.radius, c.conductivity]
                   for c in phantom.circles]
        return dv, rasterize(phantom), circles
    raise RuntimeError(f"sample {index}: all generation attempts failed")


def generate_dataset(config: GenerationConfig, out_path,
                     jobs: int = 1) -> DatasetContainer:
    """Simulate, label and persist a dataset per the configuration."""
    plan = config.sample_plan()
    n = len(plan)
    measurements = np.zeros((n, protocol.N_NONREDUNDANT), dtype="<f4")
    labels = np.zeros((n, 64, 64), dtype="<f4")
    sample_meta = []

    args = list(enumerate(k for _, k in plan))
    if n > 0:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init,
                                     initargs=(config,)) as pool:
                results = list(pool.map(_generate_sample, args, chunksize=8))
        else:
            _worker_init(config)
            results = [_generate_sample(a) for a in args]
        for i, (dv, label, circles) in enumerate(results):
            measurements[i] = dv
            labels[i] = label
            sample_meta.append({"n_circles": len(circles), "circles": circles})

    splits = {}
    cursor = 0
    for name in ("train", "val", "test"):
        count = sum(1 for s, _ in plan if s == name)
        by_circles = {}
        for s, k in plan:
            if s == name:
                by_circles[str(k)] = by_circles.get(str(k), 0) + 1
        splits[name] = {"start": cursor, "count": count,
                        "by_circles": by_circles}
        cursor += count

    manifest = {
        "format_version": FORMAT_VERSION,
        "generator": f"eitact {__version__}",
        "kind": "raw",
        "n_samples": n,
        "seed": config.seed,
        "snr_db": None if (config.snr_db is None or math.isinf(config.snr_db))
                  else config.snr_db,
        "noise_on": config.noise_on,
        "refinement_level": config.refinement_level,
        "contact_impedance": config.contact_impedance,
        "excitation_current": config.excitation_current,
        "background_conductivity": config.background_conductivity,
        "radius_range": list(config.radius_range),
        "boundary_margin": config.boundary_margin,
        "measurement_length": protocol.N_NONREDUNDANT,
        "label_shape": [64, 64],
        "dtype": "float32-le",
        "splits": splits,
        "samples": sample_meta,
        "augmentation": None,
    }
    return write_container(out_path, manifest, measurements, labels)


def augment_dataset(container: DatasetContainer, out_path) -> DatasetContainer:
    """Expand every sample into its 32 variants (source order preserved:
    sample s maps to output rows 32*s .. 32*s+31)."""
    if container.manifest.get("augmentation") is not None:
        raise ValueError("container is already augmented")
    n = container.n_samples
    factor = len(ALL_TRANSFORMS)
    current = container.manifest.get("excitation_current", DEFAULT_CURRENT)
    measurements = np.zeros((n * factor, protocol.N_NONREDUNDANT), dtype="<f4")
    labels = np.zeros((n * factor, 64, 64), dtype="<f4")

    sample_meta = container.manifest.get("samples") or [None] * n
    background = container.manifest.get("background_conductivity",
                                        BACKGROUND_CONDUCTIVITY)
    for s in range(n):
        frame = MeasurementFrame(container.measurements[s].astype(float),
                                 NONREDUNDANT104, excitation_current=current)
        meta = sample_meta[s]
        if meta and meta.get("circles") is not None:
            label = TouchPhantom(
                tuple(Circle((cx, cy), r, cond)
                      for cx, cy, r, cond in meta["circles"]),
                background)
        else:
            label = container.labels[s].astype(float)
        aset = augment_frame(frame, label)
        measurements[s * factor:(s + 1) * factor] = aset.frame_values
        labels[s * factor:(s + 1) * factor] = aset.labels

    splits = {}
    for name, info in container.manifest["splits"].items():
        entry = {"start": info["start"] * factor,
                 "count": info["count"] * factor}
        if "by_circles" in info:
            entry["by_circles"] = {k: v * factor
                                   for k, v in info["by_circles"].items()}
        splits[name] = entry

    manifest = dict(container.manifest)
    manifest["kind"] = "augmented"
    manifest["n_samples"] = n * factor
    manifest["splits"] = splits
    manifest["samples"] = None  # per-sample provenance is positional
    manifest["augmentation"] = {
        "factor": factor,
        "order": "rotations shift 0..15, then mirrored rotations shift 0..15",
        "transform": "output 32*s+k is source sample s under transform k",
        "source_n_samples": n,
        "source_seed": container.manifest.get("seed"),
    }
    return write_container(out_path, manifest, measurements, labels)

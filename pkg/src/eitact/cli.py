"""Batch command-line front end.

Subcommands::

    generate     simulate a dataset container
    augment      expand a raw container 32x
    reconstruct  Tikhonov-reconstruct a split and report CC/RE/SSIM
    metrics      metric fixtures over label pairs (cross-implementation checks)
    selftest     run the physical-consistency property suite
    dump-mesh    plain-text node/element listing

Exit codes: 0 success, 1 usage error, 2 runtime failure.  All randomness
derives from the mandatory --seed of the generating commands; JSON outputs
embed the fully resolved configuration.  ``EITACT_THREADS`` sets the default
worker count for generation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import __version__
from .container import read_container
from .dataset import GenerationConfig, augment_dataset, generate_dataset
from .forward import compute_jacobian, homogeneous_field, solve_forward, to_nonredundant
from .inverse import DEFAULT_TAU, ReconstructionConfig, reconstruct
from .mesh import build_mesh
from .metrics import correlation_coefficient, relative_error, ssim
from .selftest import run_selftest

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _default_jobs() -> int:
    env = os.environ.get("EITACT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _output_lock(path) -> FileLock:
    return FileLock(str(Path(path)) + ".lock")


def write_pgm(path, image: np.ndarray) -> None:
    """8-bit binary PGM, scaled so the image maximum maps to 255."""
    img = np.asarray(image, dtype=float)
    peak = img.max()
    scaled = np.zeros_like(img) if peak <= 0 else np.clip(img / peak, 0, 1)
    data = (scaled * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(data.tobytes())


def _pgm_grid(pairs: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Stack (ground truth | reconstruction) pairs into one image grid."""
    rows = []
    sep = np.full((64, 2), 0.5)
    for gt, rec in pairs:
        rows.append(np.hstack([gt, sep, rec]))
        rows.append(np.full((2, rows[-1].shape[1]), 0.5))
    return np.vstack(rows[:-1])


def cmd_generate(args) -> int:
    snr = None if args.no_noise else args.snr
    config = GenerationConfig(
        seed=args.seed,
        train_counts={1: args.train_1, 2: args.train_2, 3: args.train_3},
        val_count=args.val_4,
        test_count=args.test_4,
        snr_db=snr,
        refinement_level=args.refinement,
        noise_on=args.noise_on,
    )
    try:
        with _output_lock(args.out).acquire(timeout=0.1):
            container = generate_dataset(config, args.out, jobs=args.jobs)
    except Timeout:
        print(f"error: output directory {args.out} is locked by another "
              "eitact process", file=sys.stderr)
        return RUNTIME_ERROR
    m = container.manifest
    print(f"wrote {m['n_samples']} samples to {args.out}")
    for name, info in m["splits"].items():
        print(f"  {name}: {info['count']} samples {info.get('by_circles', {})}")
    return 0


def cmd_augment(args) -> int:
    container = read_container(args.input)
    try:
        with _output_lock(args.out).acquire(timeout=0.1):
            out = augment_dataset(container, args.out)
    except Timeout:
        print(f"error: output directory {args.out} is locked", file=sys.stderr)
        return RUNTIME_ERROR
    print(f"augmented {container.n_samples} -> {out.n_samples} samples "
          f"at {args.out}")
    return 0


def cmd_reconstruct(args) -> int:
    container = read_container(args.container)
    manifest = container.manifest
    mesh = build_mesh(manifest["refinement_level"],
                      manifest.get("contact_impedance", 0.01))
    background = homogeneous_field(
        mesh, manifest.get("background_conductivity", 0.05))
    jac = compute_jacobian(mesh, background,
                           manifest.get("excitation_current", 1e-3))
    config = ReconstructionConfig(tau=args.tau, regularizer=args.regularizer)

    dvs = container.split_measurements(args.split).astype(float)
    gts = container.split_labels(args.split).astype(float)
    per_sample = []
    images = []
    for dv, gt in zip(dvs, gts):
        img = reconstruct(jac, dv, config)
        images.append(img)
        entry = {"cc": correlation_coefficient(img, gt),
                 "ssim": ssim(img, gt)}
        entry["re"] = relative_error(img, gt) if gt.any() else None
        per_sample.append(entry)

    def _mean(key):
        vals = [s[key] for s in per_sample if s[key] is not None]
        return float(np.mean(vals)) if vals else None

    result = {
        "config": {
            "container": str(args.container),
            "split": args.split,
            "tau": config.tau,
            "regularizer": config.regularizer,
            "refinement_level": manifest["refinement_level"],
            "n_samples": len(per_sample),
            "version": __version__,
        },
        "per_sample": per_sample,
        "mean": {k: _mean(k) for k in ("cc", "re", "ssim")},
    }
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    if args.export_pgm > 0 and images:
        n = min(args.export_pgm, len(images))
        grid = _pgm_grid([(gts[i], images[i]) for i in range(n)])
        write_pgm(out_dir / "reconstructions.pgm", grid)
    mean = result["mean"]
    print(f"{len(per_sample)} samples: mean CC {mean['cc']:.4f}  "
          f"RE {mean['re']:.4f}  SSIM {mean['ssim']:.4f}")
    return 0


def cmd_metrics(args) -> int:
    """Metric values over label pairs (2i, 2i+1) of a container; serves as
    a language-independent fixture for external implementations."""
    container = read_container(args.container)
    labels = container.labels.astype(float)
    pairs = []
    for i in range(container.n_samples // 2):
        est, gt = labels[2 * i], labels[2 * i + 1]
        if not gt.any():
            continue
        pairs.append({
            "index": i,
            "cc": correlation_coefficient(est, gt),
            "re": relative_error(est, gt),
            "ssim": ssim(est, gt),
        })
    payload = {"config": {"container": str(args.container),
                          "pairing": "est=label[2i], gt=label[2i+1]",
                          "version": __version__},
               "pairs": pairs}
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(pairs)} metric fixtures to {args.out}")
    return 0


def cmd_selftest(args) -> int:
    failed = False
    for refinement in args.refinement:
        results = run_selftest(refinement=refinement, seed=args.seed,
                               inject_eim_transpose=args.inject_eim_transpose)
        print(f"refinement {refinement}:")
        for name, ok, detail in results:
            print(f"  {'PASS' if ok else 'FAIL'}  {name}: {detail}")
            failed = failed or not ok
    return RUNTIME_ERROR if failed else 0


def cmd_dump_mesh(args) -> int:
    mesh = build_mesh(args.refinement)
    if args.out:
        with open(args.out, "w") as fh:
            mesh.dump(fh)
    else:
        mesh.dump(sys.stdout)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="eitact", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a dataset container")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--train-1", type=int, default=0, metavar="N")
    g.add_argument("--train-2", type=int, default=0, metavar="N")
    g.add_argument("--train-3", type=int, default=0, metavar="N")
    g.add_argument("--val-4", type=int, default=0, metavar="N")
    g.add_argument("--test-4", type=int, default=0, metavar="N")
    g.add_argument("--snr", type=float, default=50.0,
                   help="AWGN level in dB (default 50)")
    g.add_argument("--no-noise", action="store_true")
    g.add_argument("--noise-on", choices=("difference", "absolute"),
                   default="difference")
    g.add_argument("--refinement", type=int, default=2)
    g.add_argument("--jobs", type=int, default=_default_jobs())
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("augment", help="expand a raw container 32x")
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_augment)

    r = sub.add_parser("reconstruct", help="reconstruct and evaluate a split")
    r.add_argument("--container", required=True)
    r.add_argument("--split", default="test", choices=("train", "val", "test"))
    r.add_argument("--tau", type=float, default=DEFAULT_TAU)
    r.add_argument("--regularizer", default="identity",
                   choices=("identity", "laplacian"))
    r.add_argument("--export-pgm", type=int, default=8, metavar="N",
                   help="export the first N (GT | reconstruction) pairs")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reconstruct)

    m = sub.add_parser("metrics", help="metric fixtures over label pairs")
    m.add_argument("--container", required=True)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_metrics)

    s = sub.add_parser("selftest", help="physical-consistency property suite")
    s.add_argument("--refinement", type=int, nargs="+", default=[1])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--inject-eim-transpose", action="store_true",
                   help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_selftest)

    d = sub.add_parser("dump-mesh", help="plain-text node/element listing")
    d.add_argument("--refinement", type=int, default=1)
    d.add_argument("--out")
    d.set_defaults(func=cmd_dump_mesh)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands:

* ``generate``  -- optimize one (element, degree) pair and write a node file.
* ``evaluate``  -- print the metrics CSV row for an existing node file.
* ``compare``   -- metrics CSV across degrees and distributions.
* ``tabulate``  -- batch-generate node files plus a JSON-lines manifest.

Cross-element compatibility is handled bottom-up: with ``--compat auto``
(the default) the lower-dimensional optimized distributions are generated
first (or loaded from the cache directory) and used as face prescriptions.

Exit codes: 0 success, 1 internal failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .baselines import BaselineKind, baseline_distribution
from .basis import FunctionSpace
from .compatibility import FacePrescription, point_prescription
from .errors import NodeFileError, SymnodesError
from .geometry import ElementKind, reference_element
from .metrics import default_resolution, evaluate_metrics
from .nodefile import (
    FORMAT_VERSION,
    config_hash,
    format_float,
    read_node_file,
    write_node_file,
)
from .optimizer import OptimizerConfig, optimize_nodes

__all__ = ["main"]

CSV_HEADER = (
    "element,degree,distribution,lebesgue_constant,lebesgue_objective,"
    "mass_condition,resolution"
)

_ALIASES = {
    "line": ElementKind.LINE,
    "tri": ElementKind.TRIANGLE,
    "triangle": ElementKind.TRIANGLE,
    "quad": ElementKind.QUADRILATERAL,
    "quadrilateral": ElementKind.QUADRILATERAL,
    "tet": ElementKind.TETRAHEDRON,
    "tetrahedron": ElementKind.TETRAHEDRON,
    "hex": ElementKind.HEXAHEDRON,
    "hexahedron": ElementKind.HEXAHEDRON,
    "prism": ElementKind.PRISM,
    "pyramid": ElementKind.PYRAMID,
}

# Generated ranges supported by default; --force-degree lifts the cap.
_DEGREE_CAPS = {
    ElementKind.LINE: 30,
    ElementKind.TRIANGLE: 23,
    ElementKind.QUADRILATERAL: 23,
    ElementKind.TETRAHEDRON: 9,
    ElementKind.HEXAHEDRON: 9,
    ElementKind.PRISM: 9,
    ElementKind.PYRAMID: 9,
}

# Face kinds whose optimized distributions feed each element's prescription.
_FACE_DEPS = {
    ElementKind.LINE: (),
    ElementKind.TRIANGLE: (ElementKind.LINE,),
    ElementKind.QUADRILATERAL: (ElementKind.LINE,),
    ElementKind.TETRAHEDRON: (ElementKind.TRIANGLE,),
    ElementKind.HEXAHEDRON: (ElementKind.QUADRILATERAL,),
    ElementKind.PRISM: (ElementKind.TRIANGLE, ElementKind.QUADRILATERAL),
    ElementKind.PYRAMID: (ElementKind.TRIANGLE, ElementKind.QUADRILATERAL),
}


class InputError(Exception):
    """User-facing errors mapped to exit code 2."""


def _parse_element(name):
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise InputError(
            f"unknown element {name!r} (choose from "
            f"{', '.join(sorted(set(_ALIASES)))})"
        ) from None


def _parse_degree_range(spec):
    try:
        if ":" in spec:
            a, b = spec.split(":", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(spec)
    except ValueError:
        raise InputError(f"bad degree range {spec!r} (use A:B)") from None
    if lo < 1 or hi < lo:
        raise InputError(f"bad degree range {spec!r}")
    return range(lo, hi + 1)


def _check_degree(kind, degree, force):
    if degree < 1:
        raise InputError(f"degree must be >= 1, got {degree}")
    cap = _DEGREE_CAPS[kind]
    if degree > cap and not force:
        raise InputError(
            f"degree {degree} exceeds the supported cap {cap} for "
            f"{kind.value}; pass --force-degree to accept a long runtime"
        )


def _optimizer_config(args):
    return OptimizerConfig(
        kkt_tol=args.kkt_tol,
        max_major_iterations=args.max_iters,
        seed=args.seed,
        resolution=args.resolution,
    )


def _config_payload(kind, degree, args, compat):
    return {
        "format": FORMAT_VERSION,
        "element": kind.value,
        "degree": degree,
        "compat": compat,
        "seed": args.seed,
        "kkt_tol": args.kkt_tol,
        "max_iters": args.max_iters,
    }


def _cache_path(cache_dir, kind, degree):
    return os.path.join(cache_dir, f"{kind.value}_p{degree}.nodes")


def _load_cached(path, expect_hash):
    if not os.path.exists(path):
        return None
    try:
        dist, header = read_node_file(path)
    except (NodeFileError, OSError):
        return None
    if header.config != expect_hash:
        return None
    return dist


def _prescriptions_for(kind, degree, args, ensure):
    """Bottom-up prescriptions for ``kind``: line endpoints are intrinsic,
    2D elements inherit the optimized line, 3D elements the optimized
    2D distributions."""
    if kind is ElementKind.LINE:
        return [point_prescription(degree)]
    out = []
    for face_kind in _FACE_DEPS[kind]:
        dist = ensure(face_kind, degree)
        out.append(FacePrescription(face_kind, dist))
    return out


def _make_ensure(args, cache_dir):
    """Recursive generate-or-load over the cache directory."""

    def ensure(kind, degree):
        cfg_hash = config_hash(_config_payload(kind, degree, args, "auto"))
        path = _cache_path(cache_dir, kind, degree)
        cached = _load_cached(path, cfg_hash)
        if cached is not None:
            return cached
        prescriptions = _prescriptions_for(kind, degree, args, ensure)
        result = optimize_nodes(
            kind, degree, prescriptions, _optimizer_config(args)
        )
        os.makedirs(cache_dir, exist_ok=True)
        write_node_file(path, result.distribution, config=cfg_hash)
        return result.distribution

    return ensure


def _metrics_row(kind, degree, name, dist, resolution):
    space = FunctionSpace(kind, degree)
    report = evaluate_metrics(space, dist, resolution=resolution)
    return (
        f"{kind.value},{degree},{name},"
        f"{format_float(report.lebesgue_constant)},"
        f"{format_float(report.lebesgue_objective)},"
        f"{format_float(report.mass_condition)},"
        f"{report.resolution}"
    ), report


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args):
    kind = _parse_element(args.element)
    _check_degree(kind, args.degree, args.force_degree)
    cache_dir = args.cache_dir
    compat = args.compat

    if compat == "auto":
        ensure = _make_ensure(args, cache_dir)
        prescriptions = _prescriptions_for(kind, args.degree, args, ensure)
    elif compat == "off":
        prescriptions = []
    else:
        prescriptions = []
        for path in compat.split(","):
            try:
                dist, _ = read_node_file(path.strip())
            except OSError as exc:
                raise InputError(f"cannot read {path}: {exc}") from exc
            prescriptions.append(FacePrescription(dist.kind, dist))
        if kind is ElementKind.LINE and not prescriptions:
            prescriptions = [point_prescription(args.degree)]

    result = optimize_nodes(
        kind, args.degree, prescriptions, _optimizer_config(args)
    )
    cfg_hash = config_hash(
        _config_payload(kind, args.degree, args, compat)
    )
    out = args.out or _cache_path(cache_dir, kind, args.degree)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    write_node_file(out, result.distribution, config=cfg_hash)
    m = result.metrics
    print(
        f"{kind.value} p={args.degree}: {result.distribution.count} nodes, "
        f"lebesgue {format_float(m.lebesgue_constant)}, "
        f"objective {format_float(m.lebesgue_objective)}, "
        f"mass condition {format_float(m.mass_condition)}, "
        f"{result.status}, wrote {out}"
    )
    return 0


def cmd_evaluate(args):
    try:
        dist, header = read_node_file(args.nodefile)
    except OSError as exc:
        raise InputError(f"cannot read {args.nodefile}: {exc}") from exc
    row, _ = _metrics_row(
        dist.kind, dist.degree, header.source, dist, args.resolution
    )
    print(row)
    return 0


def _external_distribution(name, directory, kind, degree):
    path = _cache_path(directory, kind, degree)
    dist, _ = read_node_file(path)
    return dist


def cmd_compare(args):
    kind = _parse_element(args.element)
    degrees = _parse_degree_range(args.degree_range)
    for d in degrees:
        _check_degree(kind, d, args.force_degree)
    dists = args.dist or ["optimized", "gll", "uniform"]
    ensure = _make_ensure(args, args.cache_dir)

    rows = [CSV_HEADER]
    n_ok = 0
    for degree in degrees:
        for spec in dists:
            name, builder = spec, None
            try:
                if spec == "optimized":
                    builder = lambda: ensure(kind, degree)
                elif spec in ("gll", "uniform"):
                    builder = lambda: baseline_distribution(
                        kind, degree, BaselineKind(spec)
                    )
                elif "=" in spec:
                    name, directory = spec.split("=", 1)
                    builder = lambda: _external_distribution(
                        name, directory, kind, degree
                    )
                else:
                    print(
                        f"warning: unknown distribution {spec!r}, skipped",
                        file=sys.stderr,
                    )
                    continue
                dist = builder()
                row, _ = _metrics_row(kind, degree, name, dist, args.resolution)
                rows.append(row)
                n_ok += 1
            except (SymnodesError, OSError) as exc:
                print(
                    f"warning: {kind.value} p={degree} {name}: {exc}",
                    file=sys.stderr,
                )
                rows.append(f"{kind.value},{degree},{name},,,,")
    payload = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return 0 if n_ok > 0 else 1


def cmd_tabulate(args):
    kinds = [_parse_element(e) for e in args.element.split(",")]
    degrees = _parse_degree_range(args.degree_range)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    tab_args = argparse.Namespace(**vars(args))
    tab_args.cache_dir = out_dir
    ensure = _make_ensure(tab_args, out_dir)

    records = []
    for kind in kinds:
        for degree in degrees:
            _check_degree(kind, degree, args.force_degree)
            cfg_hash = config_hash(
                _config_payload(kind, degree, tab_args, "auto")
            )
            path = _cache_path(out_dir, kind, degree)
            record = {
                "element": kind.value,
                "degree": degree,
                "file": os.path.basename(path),
                "config": cfg_hash,
            }
            try:
                dist = ensure(kind, degree)
                row, report = _metrics_row(
                    kind, degree, "optimized", dist, args.resolution
                )
                record.update(
                    status="ok",
                    count=dist.count,
                    lebesgue_constant=format_float(report.lebesgue_constant),
                    lebesgue_objective=format_float(report.lebesgue_objective),
                    mass_condition=format_float(report.mass_condition),
                    resolution=report.resolution,
                )
            except SymnodesError as exc:
                record.update(status="failed", error=str(exc))
            records.append(record)
            print(
                f"{record['element']} p={record['degree']}: "
                f"{record['status']}"
            )
    manifest = os.path.join(out_dir, "manifest.jsonl")
    tmp = manifest + ".tmp"
    with open(tmp, "w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    os.replace(tmp, manifest)
    return 0 if all(r["status"] == "ok" for r in records) else 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--max-iters", type=int, default=50)
    sub.add_argument("--kkt-tol", type=float, default=1e-10)
    sub.add_argument("--resolution", type=int, default=None)
    sub.add_argument("--cache-dir", default=".symnodes-cache")
    sub.add_argument(
        "--force-degree",
        action="store_true",
        help="allow degrees beyond the supported caps (long runtimes)",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="symnodes",
        description=(
            "Generate, evaluate, and tabulate symmetric optimized nodal "
            "distributions for reference finite elements."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="optimize one element/degree pair")
    g.add_argument("--element", required=True)
    g.add_argument("--degree", type=int, required=True)
    g.add_argument(
        "--compat",
        default="auto",
        help="auto (default), off, or comma-separated prescription files",
    )
    g.add_argument("--out", default=None)
    _add_common(g)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="metrics CSV row for a node file")
    e.add_argument("nodefile")
    e.add_argument("--resolution", type=int, default=None)
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="metrics CSV across distributions")
    c.add_argument("--element", required=True)
    c.add_argument("--degree-range", required=True)
    c.add_argument(
        "--dist",
        action="append",
        help="optimized | gll | uniform | NAME=DIR (repeatable)",
    )
    c.add_argument("--out", default=None)
    _add_common(c)
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("tabulate", help="batch generation with a manifest")
    t.add_argument("--element", required=True, help="comma-separated kinds")
    t.add_argument("--degree-range", required=True)
    t.add_argument("--out", required=True)
    _add_common(t)
    t.set_defaults(func=cmd_tabulate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NodeFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SymnodesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

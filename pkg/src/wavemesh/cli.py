"""Command-line front end: transform fields, build meshes from coefficient
streams, sweep stream orderings, and export VTK."""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from . import formats
from .formats import FormatError, ManifestError
from .lifting import Basis, forward_transform
from .mesh import AdaptiveMesh, MeshStateError
from .stream import StreamOrder, ingest, make_stream, psnr
from .tree import TreeStructureError
from .vstore import IntegrityError

EXIT_MANIFEST = 2
EXIT_FORMAT = 3
EXIT_INTERNAL = 4

ORDERS = {o.value: o for o in StreamOrder}


def _add_stream_flags(p):
    p.add_argument("--order", choices=sorted(ORDERS), default="subband")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--budget-bytes", type=int, default=None)
    p.add_argument("--budget-count", type=int, default=None)
    p.add_argument("--chunk-bytes", type=int, default=131072)
    p.add_argument("--mode", choices=("amm", "suppressed"), default="amm")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wavemesh",
        description="adaptive multilinear meshes from wavelet coefficient streams")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="forward transform a raw field")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("build", help="build a mesh from a coefficient file")
    p.add_argument("coefficients")
    _add_stream_flags(p)
    p.add_argument("--compare", action="store_true",
                   help="build both modes and report the cell-count ratio")
    p.add_argument("--manifest", help="raw field for PSNR reporting")
    p.add_argument("--export-vtk", metavar="PATH")
    p.add_argument("--csv", metavar="PATH")

    p = sub.add_parser("eval-streams", help="PSNR-vs-footprint curves")
    p.add_argument("manifest")
    p.add_argument("--orders", default="subband,energy,bit,rowmajor")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--chunk-bytes", type=int, default=131072)
    p.add_argument("--csv", required=True)

    p = sub.add_parser("export-vtk", help="build a mesh and write legacy VTK")
    p.add_argument("coefficients")
    _add_stream_flags(p)
    p.add_argument("-o", "--output", required=True)

    return parser


def cmd_transform(args) -> int:
    manifest = formats.load_manifest(args.manifest)
    field = formats.load_field(manifest)
    coeffs = forward_transform(field, manifest.levels, manifest.basis)
    formats.write_coefficients(args.output, coeffs)
    for axis, (n, e) in enumerate(zip(manifest.dims, coeffs.ext_dims)):
        print(f"axis {axis}: {n} -> {e} (+{e - n})")
    print(f"wrote {args.output}: ext_dims={coeffs.ext_dims} "
          f"levels={coeffs.levels} basis={manifest.basis.value}")
    return 0


def _budget_prefix(stream, budget_bytes, budget_count):
    if budget_count is not None:
        stream = stream[:budget_count]
    if budget_bytes is not None:
        prefix, total = [], 0
        for el in stream:
            if total + el.nbytes > budget_bytes:
                break
            prefix.append(el)
            total += el.nbytes
        stream = prefix
    return stream


def _build_one(coeffs, args, suppressed, reference):
    mesh = AdaptiveMesh(coeffs.input_dims, basis=coeffs.basis,
                        suppressed=suppressed)
    stream = make_stream(coeffs, ORDERS[args.order], threshold=args.threshold)
    stream = _budget_prefix(stream, args.budget_bytes, args.budget_count)
    reports = ingest(mesh, stream, chunk_bytes=args.chunk_bytes,
                     reference=reference)
    return mesh, reports


def cmd_build(args) -> int:
    coeffs = formats.read_coefficients(args.coefficients)
    if coeffs.ndim not in (2, 3):
        raise FormatError("mesh construction needs a 2D or 3D field")
    reference = None
    if args.manifest:
        reference = formats.load_field(formats.load_manifest(args.manifest))
    mesh, reports = _build_one(coeffs, args, args.mode == "suppressed", reference)
    final = reports[-1]
    print(f"cells={final.n_cells} vertices={final.n_vertices} "
          f"bytes={final.bytes_estimate}"
          + (f" psnr={final.psnr_db:.2f}dB" if final.psnr_db is not None else ""))
    if args.compare:
        other, _ = _build_one(coeffs, args, args.mode != "suppressed", None)
        a, b = mesh.stats(), other.stats()
        amm, wl = (a, b) if args.mode == "amm" else (b, a)
        ratio = amm.n_cells / wl.n_cells if wl.n_cells else float("nan")
        print(f"cell ratio (adaptive/full-split): {ratio:.4f} "
              f"({amm.n_cells}/{wl.n_cells})")
    if args.csv:
        formats.write_report_csv(args.csv, reports)
    if args.export_vtk:
        formats.write_vtk(args.export_vtk, mesh)
    return 0


def cmd_eval_streams(args) -> int:
    manifest = formats.load_manifest(args.manifest)
    field = formats.load_field(manifest)
    coeffs = forward_transform(field, manifest.levels, manifest.basis)
    orders = []
    for name in args.orders.split(","):
        name = name.strip()
        if name not in ORDERS:
            raise ManifestError(f"unknown order {name!r}")
        orders.append(ORDERS[name])
    with open(args.csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["order"] + formats.REPORT_HEADER)
        for order in orders:
            mesh = AdaptiveMesh(coeffs.input_dims, basis=coeffs.basis)
            stream = make_stream(coeffs, order, threshold=args.threshold)
            reports = ingest(mesh, stream, chunk_bytes=args.chunk_bytes,
                             reference=field)
            formats.append_report_rows(writer, {"order": order.value}, reports)
            print(f"{order.value}: {len(reports)} chunks, final "
                  f"psnr={reports[-1].psnr_db:.2f}dB")
    return 0


def cmd_export_vtk(args) -> int:
    coeffs = formats.read_coefficients(args.coefficients)
    if coeffs.ndim not in (2, 3):
        raise FormatError("VTK export needs a 2D or 3D field")
    mesh, _ = _build_one(coeffs, args, args.mode == "suppressed", None)
    formats.write_vtk(args.output, mesh)
    stats = mesh.stats()
    print(f"wrote {args.output}: {stats.n_cells} cells")
    return 0


COMMANDS = {
    "transform": cmd_transform,
    "build": cmd_build,
    "eval-streams": cmd_eval_streams,
    "export-vtk": cmd_export_vtk,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return EXIT_MANIFEST
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (IntegrityError, TreeStructureError, MeshStateError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

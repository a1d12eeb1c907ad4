"""File formats: raw-field manifests, coefficient and stream binaries,
legacy VTK export, and CSV reports."""

from __future__ import annotations

import csv
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .lifting import Arithmetic, AxisPlan, Basis, CoefficientField, axis_plan
from .mesh import AdaptiveMesh
from .stencil import CoeffKey
from .stream import ChunkReport, StreamElement, StreamOrder

COEFF_MAGIC = b"AMMC"
STREAM_MAGIC = b"AMMS"


class ManifestError(ValueError):
    pass


class FormatError(ValueError):
    pass


@dataclass
class Manifest:
    path: str
    dims: tuple[int, ...]
    width: int
    basis: Basis
    levels: int

    @property
    def d(self) -> int:
        return len(self.dims)


def load_manifest(path: str) -> Manifest:
    fields = {}
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ManifestError(f"bad manifest line: {line!r}")
                key, _, value = line.partition("=")
                fields[key.strip()] = value.strip()
    except OSError as exc:
        raise ManifestError(str(exc)) from exc
    try:
        dims = tuple(int(v) for v in fields["dims"].split(","))
        width = int(fields.get("width", "64"))
        basis = Basis.APPROXIMATING if fields.get("basis", "approx").startswith("a") \
            else Basis.INTERPOLATING
        levels = int(fields["levels"])
        data_path = fields["path"]
    except KeyError as exc:
        raise ManifestError(f"manifest missing key {exc}") from exc
    if width not in (32, 64):
        raise ManifestError(f"unsupported scalar width {width}")
    if not os.path.isabs(data_path):
        data_path = os.path.join(os.path.dirname(os.path.abspath(path)), data_path)
    expect = math.prod(dims) * width // 8
    try:
        actual = os.path.getsize(data_path)
    except OSError as exc:
        raise ManifestError(str(exc)) from exc
    if actual != expect:
        raise ManifestError(
            f"{data_path}: size {actual} != dims {dims} x {width}-bit = {expect}")
    return Manifest(data_path, dims, width, basis, levels)


def load_field(manifest: Manifest) -> np.ndarray:
    dtype = "<f4" if manifest.width == 32 else "<f8"
    data = np.fromfile(manifest.path, dtype=dtype)
    return data.reshape(manifest.dims).astype(np.float64)


def write_coefficients(path: str, coeffs: CoefficientField) -> None:
    dims3 = list(coeffs.input_dims) + [0] * (3 - coeffs.ndim)
    ext3 = list(coeffs.ext_dims) + [0] * (3 - coeffs.ndim)
    header = struct.pack(
        "<4sBBBB6I", COEFF_MAGIC, 1, coeffs.ndim, coeffs.levels,
        0 if coeffs.basis is Basis.INTERPOLATING else 1, *dims3, *ext3)
    header = header.ljust(64, b"\0")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(coeffs.values, dtype="<f8").tobytes())


def read_coefficients(path: str) -> CoefficientField:
    with open(path, "rb") as fh:
        header = fh.read(64)
        if len(header) < 64 or header[:4] != COEFF_MAGIC:
            raise FormatError(f"{path}: not a coefficient file")
        _, version, d, levels, basis_code, *dims = struct.unpack(
            "<4sBBBB6I", header[: 8 + 24])
        if version != 1:
            raise FormatError(f"unsupported version {version}")
        input_dims = tuple(dims[:d])
        ext_dims = tuple(dims[3:3 + d])
        basis = Basis.INTERPOLATING if basis_code == 0 else Basis.APPROXIMATING
        try:
            plans = tuple(axis_plan(n, levels, keep_deep_frozen=d > 1)
                          for n in input_dims)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
        if tuple(p.ext_len for p in plans) != ext_dims:
            raise FormatError(f"{path}: inconsistent dims in header")
        count = math.prod(ext_dims)
        data = np.frombuffer(fh.read(count * 8), dtype="<f8")
        if data.size != count:
            raise FormatError(f"{path}: truncated payload")
    return CoefficientField(data.reshape(ext_dims).copy(), input_dims,
                            levels, basis, plans)


_ORDER_CODES = {StreamOrder.SUBBAND: 0, StreamOrder.ENERGY: 1,
                StreamOrder.BIT: 2, StreamOrder.ROWMAJOR: 3}


def _pack_key(key: CoeffKey) -> bytes:
    pos = list(key.pos) + [0] * (3 - len(key.pos))
    mask = sum(1 << a for a in key.wavelet_axes)
    return struct.pack("<HHHBB", *pos, key.level, mask)


def _unpack_key(raw: bytes, d: int) -> CoeffKey:
    x, y, z, level, mask = struct.unpack("<HHHBB", raw)
    pos = (x, y, z)[:d]
    axes = tuple(a for a in range(d) if mask & (1 << a))
    return CoeffKey(pos, level, axes)


def write_stream(path: str, elements, order: StreamOrder, d: int) -> None:
    payload_kind = 1 if elements and elements[0].value is None else 0
    header = struct.pack("<4sBBBB", STREAM_MAGIC, 1, _ORDER_CODES[order],
                         payload_kind, d).ljust(16, b"\0")
    with open(path, "wb") as fh:
        fh.write(header)
        for el in elements:
            fh.write(_pack_key(el.key))
            if el.value is not None:
                fh.write(struct.pack("<d", el.value))
            else:
                flags = (el.bit or 0) | (0 if el.sign is None else 2) \
                    | (4 if el.sign == -1 else 0)
                fh.write(struct.pack("<bB", el.plane, flags))


def read_stream(path: str) -> tuple[list[StreamElement], StreamOrder]:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16 or header[:4] != STREAM_MAGIC:
            raise FormatError(f"{path}: not a stream file")
        _, version, order_code, payload_kind, d = struct.unpack("<4sBBBB", header[:8])
        if version != 1:
            raise FormatError(f"unsupported version {version}")
        order = {v: k for k, v in _ORDER_CODES.items()}[order_code]
        out = []
        while True:
            raw = fh.read(8)
            if not raw:
                break
            if len(raw) < 8:
                raise FormatError(f"{path}: truncated record")
            key = _unpack_key(raw, d)
            if payload_kind == 0:
                (value,) = struct.unpack("<d", fh.read(8))
                out.append(StreamElement(key, value=value))
            else:
                plane, flags = struct.unpack("<bB", fh.read(2))
                sign = (-1 if flags & 4 else 1) if flags & 2 else None
                out.append(StreamElement(key, plane=plane, bit=flags & 1,
                                         sign=sign))
    return out, order


# VTK corner orders for quads (type 9) and hexahedra (type 12) from the
# lexicographic corner enumeration
_VTK_QUAD = (0, 2, 3, 1)
_VTK_HEX = (0, 4, 6, 2, 1, 5, 7, 3)


def write_vtk(path: str, mesh: AdaptiveMesh, title: str = "adaptive mesh") -> None:
    from .tree import box_corners

    cells = list(mesh.cells())
    points: dict[tuple, int] = {}
    conn = []
    values = []
    order = _VTK_QUAD if mesh.grid.d == 2 else _VTK_HEX
    for cell in cells:
        corners = box_corners(cell.box)
        ids = []
        for corner, val in zip(corners, cell.corner_values):
            if corner not in points:
                points[corner] = len(points)
                values.append(val)
            ids.append(points[corner])
        conn.append([ids[i] for i in order])
    cell_type = 9 if mesh.grid.d == 2 else 12
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(points)} double\n")
        for corner in points:
            coords = list(corner) + [0] * (3 - len(corner))
            fh.write(" ".join(str(float(c)) for c in coords) + "\n")
        n = len(conn)
        width = len(order)
        fh.write(f"CELLS {n} {n * (width + 1)}\n")
        for ids in conn:
            fh.write(f"{width} " + " ".join(map(str, ids)) + "\n")
        fh.write(f"CELL_TYPES {n}\n")
        for _ in conn:
            fh.write(f"{cell_type}\n")
        fh.write(f"POINT_DATA {len(points)}\n")
        fh.write("SCALARS value double 1\nLOOKUP_TABLE default\n")
        for val in values:
            fh.write(f"{val}\n")


REPORT_HEADER = ["chunk", "bytes_in", "n_cells", "n_vertices",
                 "bytes_estimate", "psnr_db"]


def write_report_csv(path: str, reports: list[ChunkReport],
                     extra: dict | None = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(extra) + REPORT_HEADER)
        for r in reports:
            quality = "" if r.psnr_db is None else f"{r.psnr_db:.6f}"
            writer.writerow(list(extra.values()) +
                            [r.chunk, r.bytes_in, r.n_cells, r.n_vertices,
                             r.bytes_estimate, quality])


def append_report_rows(writer, label: dict, reports: list[ChunkReport]) -> None:
    for r in reports:
        quality = "" if r.psnr_db is None else f"{r.psnr_db:.6f}"
        writer.writerow(list(label.values()) +
                        [r.chunk, r.bytes_in, r.n_cells, r.n_vertices,
                         r.bytes_estimate, quality])

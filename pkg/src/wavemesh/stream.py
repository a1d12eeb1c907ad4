"""Coefficient streams: deterministic orderings, bitplane decomposition,
incremental ingestion into a mesh, and reconstruction-quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lifting import Basis, CoefficientField, basis_norm
from .mesh import AdaptiveMesh, iter_coefficients
from .stencil import CoeffKey

VALUE_BYTES = 8
BIT_BYTES = 2
BIT_PLANES = 52


class StreamOrder(Enum):
    SUBBAND = "subband"
    ENERGY = "energy"
    BIT = "bit"
    ROWMAJOR = "rowmajor"


@dataclass(frozen=True)
class StreamElement:
    """One unit of incremental data: a whole coefficient value, or a single
    bit of one (sign rides on the coefficient's first bit)."""

    key: CoeffKey
    value: float | None = None
    plane: int | None = None
    bit: int | None = None
    sign: int | None = None

    @property
    def nbytes(self) -> int:
        return VALUE_BYTES if self.value is not None else BIT_BYTES


def _vid_of(key: CoeffKey, side: int) -> int:
    out = 0
    for c in key.pos:
        out = out * side + c
    return out


def _norm(key: CoeffKey, d: int, basis: Basis) -> float:
    return basis_norm(d, key.kind, key.level, basis)


def make_stream(coeffs: CoefficientField, order: StreamOrder,
                threshold: float = 0.0,
                bit_planes: int = BIT_PLANES) -> list[StreamElement]:
    """Total ordering of a field's coefficients (ties broken row-major).

    The coarsest scaling subband always leads and is never thresholded.
    ``BIT`` emits sign-magnitude bitplanes of every coefficient, globally
    interleaved by 2^plane times the basis-function norm, which makes the
    emitted (key, plane) sequence data-independent.
    """
    d = coeffs.ndim
    basis = coeffs.basis
    side = max(p.virtual_len for p in coeffs.plans)
    items = list(iter_coefficients(coeffs))

    def keep(key: CoeffKey, value: float) -> bool:
        if key.kind == 0:
            return True
        if abs(value) < threshold:
            return False
        return value != 0.0

    if order is StreamOrder.BIT:
        emax_val = max((abs(v) for _, v in items), default=0.0)
        emax = math.frexp(emax_val)[1] if emax_val else 0
        ranked = sorted(
            ((key, value) for key, value in items),
            key=lambda kv: (-_norm(kv[0], d, basis), _vid_of(kv[0], side)))
        out = []
        scored = []
        for key, value in ranked:
            norm = _norm(key, d, basis)
            sign = 1 if value >= 0 else -1
            mag = abs(value)
            for i in range(bit_planes):
                plane = emax - 1 - i
                bit = 1 if mag >= 2.0 ** plane else 0
                if bit:
                    mag -= 2.0 ** plane
                scored.append((-(2.0 ** plane) * norm, _vid_of(key, side), i,
                               StreamElement(key, plane=plane, bit=bit,
                                             sign=sign if i == 0 else None)))
        scored.sort(key=lambda t: t[:3])
        return [el for *_, el in scored]

    kept = [(key, value) for key, value in items if keep(key, value)]
    if order is StreamOrder.SUBBAND:
        kept.sort(key=lambda kv: (-kv[0].level, kv[0].kind, kv[0].wavelet_axes,
                                  _vid_of(kv[0], side)))
    elif order is StreamOrder.ENERGY:
        kept.sort(key=lambda kv: (kv[0].kind != 0,
                                  -abs(kv[1]) * _norm(kv[0], d, basis),
                                  _vid_of(kv[0], side)))
    elif order is StreamOrder.ROWMAJOR:
        kept.sort(key=lambda kv: (kv[0].kind != 0, _vid_of(kv[0], side)))
    else:
        raise ValueError(f"unknown order {order}")
    return [StreamElement(key, value=value) for key, value in kept]


@dataclass
class ChunkReport:
    chunk: int
    bytes_in: int
    n_cells: int
    n_vertices: int
    bytes_estimate: int
    psnr_db: float | None


def psnr(reference: np.ndarray, reconstructed: np.ndarray) -> float:
    """20*log10(range/rmse) in dB; +inf for exact, -inf for a flat reference
    reconstructed with error."""
    reference = np.asarray(reference, dtype=float)
    reconstructed = np.asarray(reconstructed, dtype=float)
    if reference.shape != reconstructed.shape:
        raise ValueError("shape mismatch")
    rmse = float(np.sqrt(np.mean((reference - reconstructed) ** 2)))
    rng = float(reference.max() - reference.min())
    if rmse == 0.0:
        return math.inf
    if rng == 0.0:
        return -math.inf
    return 20.0 * math.log10(rng / rmse)


class StreamIngestor:
    """Applies stream elements to a mesh, finalizing at chunk boundaries."""

    def __init__(self, mesh: AdaptiveMesh, reference: np.ndarray | None = None):
        self.mesh = mesh
        self.reference = reference
        self.applied: dict[CoeffKey, float] = {}
        self.acc: dict[CoeffKey, tuple[int, float]] = {}

    def apply(self, element: StreamElement) -> None:
        key = element.key
        if element.value is not None:
            # a whole-value element replaces whatever has been applied
            new = element.value
        else:
            sign, mag = self.acc.get(key, (element.sign or 1, 0.0))
            if element.sign is not None:
                sign = element.sign
            if element.bit:
                mag += 2.0 ** element.plane
            self.acc[key] = (sign, mag)
            new = sign * mag
        old = self.applied.get(key, 0.0)
        if new != old:
            self.mesh.add_coefficient(key, new - old)
            self.applied[key] = new

    def checkpoint(self) -> tuple[int, int, int]:
        self.mesh.resolve_improper()
        self.mesh.aggregate()
        s = self.mesh.stats()
        return s.n_cells, s.n_vertices, s.bytes_estimate


def ingest(mesh: AdaptiveMesh, stream, chunk_bytes: int = 131072,
           reference: np.ndarray | None = None) -> list[ChunkReport]:
    """Feed a stream in chunks of roughly ``chunk_bytes`` payload bytes,
    aggregating and reporting after each chunk."""
    if chunk_bytes <= 0:
        raise ValueError("chunk_bytes must be positive")
    ing = StreamIngestor(mesh, reference)
    reports = []
    pending = 0
    chunk = 0

    def emit():
        nonlocal chunk, pending
        n_cells, n_vertices, nbytes = ing.checkpoint()
        quality = None
        if reference is not None:
            quality = psnr(reference, mesh.evaluate_grid())
        reports.append(ChunkReport(chunk, pending, n_cells, n_vertices,
                                   nbytes, quality))
        chunk += 1
        pending = 0

    for element in stream:
        ing.apply(element)
        pending += element.nbytes
        if pending >= chunk_bytes:
            emit()
    if pending or not reports:
        emit()
    return reports

"""Spatial stencils: one wavelet/scaling coefficient becomes tree refinement
plus staged vertex deltas.

A coefficient at level ``l`` lives on the lattice of stride ``2^(l-1)`` in
virtual-grid units; its stencil spans the cells of size ``2^l`` around it.
Scaling stencils create the incident cells; wavelet stencils split the
centered cell along all axes (approximating bases additionally create the
neighboring cells split along the axes they share with the center); mixed
stencils split the incident cells along the wavelet axes, with a second ring
along the wavelet directions for approximating bases.  Piece corners with
nonzero tensor weight receive the weighted delta at the subgrid level.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .lifting import PHI_WEIGHTS, PSI_A_WEIGHTS, PSI_I_WEIGHTS, Basis
from .tree import box_corners


@dataclass(frozen=True)
class CoeffKey:
    """Identity of one coefficient: virtual-grid position, level (1 =
    finest), and the axes carrying a wavelet factor."""

    pos: tuple[int, ...]
    level: int
    wavelet_axes: tuple[int, ...]

    @property
    def kind(self) -> int:
        return len(self.wavelet_axes)


def _dyadic_valuation(n: int) -> int:
    if n == 0:
        return 1 << 30
    return (n & -n).bit_length() - 1


def classify(pos, levels: int) -> CoeffKey:
    """Level and wavelet axes of a coefficient from index parity alone."""
    pos = tuple(int(p) for p in pos)
    vals = [_dyadic_valuation(p) for p in pos]
    m = min(vals)
    if m >= levels:
        return CoeffKey(pos, levels, ())
    axes = tuple(a for a, v in enumerate(vals) if v == m)
    return CoeffKey(pos, m + 1, axes)


def matching_axes(a, b) -> tuple[int, ...]:
    return tuple(i for i, (x, y) in enumerate(zip(a, b)) if x == y)


def _axis_weight(offset_halves: int, is_wavelet: bool, basis: Basis) -> float:
    if not is_wavelet:
        return PHI_WEIGHTS.get(offset_halves, 0.0)
    table = PSI_A_WEIGHTS if basis is Basis.APPROXIMATING else PSI_I_WEIGHTS
    return table.get(offset_halves, 0.0)


def _cell_plans(key: CoeffKey, d: int, basis: Basis):
    """Yield (cell_box_offset_pair, split_axes) in absolute coordinates."""
    p = key.pos
    h = 1 << key.level
    half = h // 2
    W = set(key.wavelet_axes)
    k = key.kind
    plans = []
    if k == 0:
        for signs in itertools.product((-1, 0), repeat=d):
            lo = tuple(p[a] + signs[a] * h for a in range(d))
            hi = tuple(lo[a] + h for a in range(d))
            plans.append(((lo, hi), ()))
        return plans

    def incident_cells():
        side_choices = []
        for a in range(d):
            if a in W:
                side_choices.append((-half,))
            else:
                side_choices.append((-h, 0))
        for offs in itertools.product(*side_choices):
            lo = tuple(p[a] + offs[a] for a in range(d))
            hi = tuple(lo[a] + h for a in range(d))
            yield (lo, hi)

    waxes = tuple(sorted(W))
    for cell in incident_cells():
        plans.append((cell, waxes))
    if basis is Basis.APPROXIMATING:
        ring = set()
        for cell in incident_cells():
            for deltas in itertools.product((-1, 0, 1), repeat=k):
                if not any(deltas):
                    continue
                lo = list(cell[0])
                for a, dv in zip(waxes, deltas):
                    lo[a] += dv * h
                nb = (tuple(lo), tuple(x + h for x in lo))
                if nb in ring:
                    continue
                ring.add(nb)
                split = tuple(a for a, dv in zip(waxes, deltas) if dv == 0)
                if k < d and d < 3:
                    # the second ring of a mixed stencil splits only in 3D
                    split = ()
                plans.append((nb, split))
    return plans


def _piece_boxes(cell, axes):
    """Sub-boxes of a cell halved along the given axes."""
    lo, hi = cell
    if not axes:
        yield cell
        return
    mids = {a: (lo[a] + hi[a]) // 2 for a in axes}
    for bits in itertools.product((0, 1), repeat=len(axes)):
        plo, phi = list(lo), list(hi)
        for a, b in zip(axes, bits):
            if b:
                plo[a] = mids[a]
            else:
                phi[a] = mids[a]
        yield tuple(plo), tuple(phi)


def add_coefficient(mesh, key: CoeffKey, value: float) -> None:
    """Phase one: refine the tree for this coefficient's stencil and stage
    the weighted corner deltas."""
    d = mesh.grid.d
    basis = mesh.basis
    root_lo, root_hi = mesh.grid.root_box
    h = 1 << key.level
    half = h // 2
    stage_level = mesh.grid.L - key.level + (1 if key.kind else 0)

    for (lo, hi), axes in _cell_plans(key, d, basis):
        if any(lo[a] < root_lo[a] or hi[a] > root_hi[a] for a in range(d)):
            continue
        if mesh.tree.suppressed and axes:
            axes = tuple(range(d))
        for piece in _piece_boxes((lo, hi), axes):
            anchors, created = mesh.tree.cover_region(piece)
            mesh._materialize(created)
            for code, _ in created:
                mesh._tag(code)
            for anchor in anchors:
                mesh._tag(anchor)
                if anchor in mesh.tree.internal:
                    for child in mesh.tree.children(anchor):
                        mesh.vstore.tag(child)

    # the update field sampled on the stencil's subgrid lattice; samples not
    # owned by a node corner stay implicit and evaporate at aggregation
    spacing = half if key.kind else h
    for offs in itertools.product(range(-2, 3), repeat=d):
        w = 1.0
        for a in range(d):
            w *= _axis_weight(offs[a] * (1 if key.kind else 2),
                              a in key.wavelet_axes, basis)
            if w == 0.0:
                break
        if w == 0.0:
            continue
        q = tuple(key.pos[a] + offs[a] * spacing for a in range(d))
        if any(q[a] < root_lo[a] or q[a] > root_hi[a] for a in range(d)):
            continue
        mesh.vstore.stage(mesh.grid.vid(q), stage_level, w * value)

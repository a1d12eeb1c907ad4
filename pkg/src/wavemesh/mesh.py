"""The user-facing adaptive mesh: boundary-cropped cells over the spatial
tree, multilinear evaluation, finalization passes and footprint statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stencil
from .lifting import Basis, CoefficientField
from .tree import (
    AdaptiveTree,
    Box,
    VirtualGrid,
    box_contains,
    box_corners,
    child_box,
    child_type,
    code_child,
    code_last,
    completion,
)
from .vstore import VertexStore, corner_weights, interpolate


class MeshStateError(RuntimeError):
    """Operation requires a finalized mesh."""


@dataclass
class Cell:
    box: Box
    corner_values: tuple[float, ...]
    level: int
    cell_type: int


@dataclass
class MeshStats:
    n_cells: int
    n_leaf_nodes: int
    n_internal_nodes: int
    n_vertices: int
    n_improper: int

    @property
    def bytes_estimate(self) -> int:
        # 16 bytes per vertex (value + index), two 8-byte bounding indices
        # per cell
        return 16 * self.n_vertices + 16 * self.n_cells


class AdaptiveMesh:
    def __init__(self, true_dims, basis: Basis = Basis.APPROXIMATING,
                 suppressed: bool = False):
        self.grid = VirtualGrid.for_dims(tuple(true_dims))
        self.basis = basis
        self.tree = AdaptiveTree(self.grid, suppressed=suppressed)
        self.vstore = VertexStore(self.grid)
        self.tree.on_replace = self._on_rect_split

    def _on_rect_split(self, old_code: int, new_codes) -> None:
        """A rectangular leaf was replaced by same-depth siblings: its
        pending-update tag moves to the replacements."""
        if old_code in self.vstore.tagged:
            self.vstore.tagged.discard(old_code)
            self.vstore.tagged.update(new_codes)

    def _tag(self, code: int) -> None:
        # nodes created and then replaced within one covering pass are stale
        if self.tree.exists(code):
            self.vstore.tag(code)

    # -- construction --------------------------------------------------------

    def _materialize(self, created) -> None:
        """New nodes' corners take the multilinear interpolant of the region
        they were carved from (the pre-update function)."""
        for code, src_box in created:
            src_vals = [self.vstore.lookup(self.grid.vid(c))
                        for c in box_corners(src_box)]
            if not any(src_vals):
                continue
            for corner in box_corners(self.tree.node_box(code)):
                vid = self.grid.vid(corner)
                if vid not in self.vstore.master:
                    self.vstore.put(vid, interpolate(src_box, src_vals, corner))

    def add_coefficient(self, key: stencil.CoeffKey, value: float) -> None:
        stencil.add_coefficient(self, key, value)

    def add_field(self, coeffs: CoefficientField, threshold: float = 0.0) -> None:
        """Add every stored coefficient whose magnitude clears the threshold
        (the coarsest scaling coefficients are never thresholded)."""
        for key, value in iter_coefficients(coeffs):
            if value == 0.0:
                continue
            if key.kind and abs(value) < threshold:
                continue
            self.add_coefficient(key, value)

    def add_cell(self, box: Box, corner_values) -> None:
        anchors, created = self.tree.cover_region(box)
        self._materialize(created)
        sides = [hi - lo for lo, hi in zip(*box)]
        level = self.grid.L - min(sides).bit_length() + 1
        for code, _ in created:
            self._tag(code)
        for anchor in anchors:
            self._tag(anchor)
        for corner, value in zip(box_corners(box), corner_values):
            vid = self.grid.vid(corner)
            self.vstore.restage(vid, level, value - self.vstore.lookup(vid))

    def aggregate(self) -> int:
        return self.vstore.aggregate(self.tree)

    def resolve_improper(self) -> int:
        """Tile every improper node's uncovered region with the fewest
        children; new corners interpolate the node's current function."""
        created_total = 0
        pending = any(self.vstore.staged.values())
        for code in sorted(self.tree.improper, key=self.tree.depth):
            cfg = self.tree.config(code)
            for cid in completion(self.grid.d, frozenset(cfg)):
                created = self.tree.create_child(code, cid)
                self._materialize(created)
                if pending:
                    for c, _ in created:
                        self.vstore.tag(c)
                created_total += len(created)
        return created_total

    def enforce_continuity(self) -> int:
        """Pin every hanging vertex to the coarser side's interpolant."""
        leaves = [(leaf, self.tree.node_box(leaf)) for leaf in self.tree.leaves]
        vertices = set()
        for _, box in leaves:
            for corner in box_corners(box):
                vertices.add(corner)
        # coarsest hosts first so chained T-junctions settle deterministically
        leaves.sort(key=lambda item: -min(h - l for l, h in zip(*item[1])))
        adjusted = 0
        for leaf, box in leaves:
            corners = set(box_corners(box))
            vals = [self.vstore.lookup(self.grid.vid(c)) for c in box_corners(box)]
            for v in vertices:
                if v in corners or not on_boundary(box, v):
                    continue
                want = interpolate(box, vals, v)
                vid = self.grid.vid(v)
                if self.vstore.lookup(vid) != want:
                    self.vstore.put(vid, want)
                    adjusted += 1
        return adjusted

    def balance(self, max_level_diff: int = 1) -> int:
        created = self.tree.balance(max_level_diff)
        self._materialize(created)
        return len(created)

    def finalize(self, continuity: bool = False, balance: bool = False) -> None:
        """Resolve improper nodes, aggregate pending updates, then optional
        continuity/balance passes (in that order)."""
        self.resolve_improper()
        self.aggregate()
        if continuity:
            self.enforce_continuity()
        if balance:
            self.balance()
            self.enforce_continuity()

    # -- queries ---------------------------------------------------------------

    def _check_final(self) -> None:
        if self.tree.improper:
            raise MeshStateError("mesh has unresolved improper nodes")
        if self.vstore.has_pending:
            raise MeshStateError("mesh has staged updates; aggregate first")

    def evaluate(self, point) -> float:
        self._check_final()
        bound = [n - 1 for n in self.grid.true_dims]
        if any(not 0 <= p <= b for p, b in zip(point, bound)):
            raise ValueError(f"point {point} outside the domain")
        leaf = self.tree.find_leaf(point, crop=False)
        box = self.tree.node_box(leaf)
        vals = [self.vstore.lookup(self.grid.vid(c)) for c in box_corners(box)]
        return interpolate(box, vals, point)

    def evaluate_grid(self) -> np.ndarray:
        """The mesh function sampled at every true-domain grid point."""
        self._check_final()
        dims = self.grid.true_dims
        out = np.zeros(dims)
        for leaf in self.tree.leaves:
            box = self.tree.node_box(leaf)
            crop = crop_box(box, dims)
            if crop is None:
                continue
            vals = [self.vstore.lookup(self.grid.vid(c))
                    for c in box_corners(box)]
            lo, hi = box
            axes_t = [np.arange(crop[0][a], crop[1][a] + 1) for a in range(len(dims))]
            ts = [(ax - lo[a]) / (hi[a] - lo[a]) for a, ax in enumerate(axes_t)]
            patch = np.zeros([len(ax) for ax in axes_t])
            for widx, corner in enumerate(box_corners(box)):
                w = np.ones_like(patch)
                for a in range(len(dims)):
                    shape = [1] * len(dims)
                    shape[a] = -1
                    t = ts[a] if corner[a] == hi[a] else 1.0 - ts[a]
                    w = w * t.reshape(shape)
                patch += vals[widx] * w
            sel = tuple(slice(crop[0][a], crop[1][a] + 1) for a in range(len(dims)))
            out[sel] = patch
        return out

    def cells(self):
        """Boundary-cropped leaves intersecting the true domain."""
        self._check_final()
        dims = self.grid.true_dims
        for leaf in sorted(self.tree.leaves):
            box = self.tree.node_box(leaf)
            crop = crop_box(box, dims)
            if crop is None:
                continue
            vals = [self.vstore.lookup(self.grid.vid(c))
                    for c in box_corners(box)]
            cvals = tuple(interpolate(box, vals, c) for c in box_corners(crop))
            last = code_last(self.grid.d, leaf) if leaf != self.tree.root else 0
            yield Cell(crop, cvals, self.tree.depth(leaf),
                       child_type(self.grid.d, last) if leaf != self.tree.root else 0)

    def vertices(self):
        """(vertex id, value) pairs over the corners of the yielded cells."""
        seen = {}
        for cell in self.cells():
            for corner, val in zip(box_corners(cell.box), cell.corner_values):
                seen.setdefault(self.grid.vid(corner), val)
        return sorted(seen.items())

    def stats(self, box: Box | None = None) -> MeshStats:
        dims = self.grid.true_dims
        n_cells = 0
        for leaf in self.tree.leaves:
            lbox = self.tree.node_box(leaf)
            crop = crop_box(lbox, dims)
            if crop is None:
                continue
            if box is not None and not box_contains(box, lbox):
                continue
            n_cells += 1
        n_vertices = 0
        for vid in self.vstore.master:
            if box is not None and not point_in(box, self.grid.coords(vid)):
                continue
            n_vertices += 1
        return MeshStats(
            n_cells=n_cells,
            n_leaf_nodes=len(self.tree.leaves),
            n_internal_nodes=len(self.tree.internal),
            n_vertices=n_vertices,
            n_improper=len(self.tree.improper),
        )


def on_boundary(box: Box, point) -> bool:
    inside = all(box[0][a] <= point[a] <= box[1][a] for a in range(len(point)))
    if not inside:
        return False
    return any(point[a] == box[0][a] or point[a] == box[1][a]
               for a in range(len(point)))


def point_in(box: Box, point) -> bool:
    return all(box[0][a] <= point[a] <= box[1][a] for a in range(len(point)))


def crop_box(box: Box, dims) -> Box | None:
    lo = tuple(max(box[0][a], 0) for a in range(len(dims)))
    hi = tuple(min(box[1][a], dims[a] - 1) for a in range(len(dims)))
    if any(l >= h for l, h in zip(lo, hi)):
        return None
    return lo, hi


def iter_coefficients(coeffs: CoefficientField):
    """(CoeffKey, value) for every true coefficient in a field (frozen
    extrapolation slots carry no coefficient and are skipped)."""
    plans = coeffs.plans
    d = len(plans)
    frozen = [dict(p.frozen) for p in plans]
    live = [p.live for p in plans]

    def structural_zero(pos):
        for a in range(d):
            lev = frozen[a].get(pos[a])
            if lev is None:
                continue
            stride = 1 << (lev - 1)
            if all(pos[b] % stride == 0 for b in range(d) if b != a):
                return True
        return False

    for idx in np.ndindex(*coeffs.values.shape):
        pos = tuple(live[a][idx[a]] for a in range(d))
        if structural_zero(pos):
            continue
        yield stencil.classify(pos, coeffs.levels), float(coeffs.values[idx])


def mesh_from_field(coeffs: CoefficientField, threshold: float = 0.0,
                    suppressed: bool = False) -> AdaptiveMesh:
    mesh = AdaptiveMesh(coeffs.input_dims, basis=coeffs.basis,
                        suppressed=suppressed)
    mesh.add_field(coeffs, threshold=threshold)
    mesh.finalize()
    return mesh

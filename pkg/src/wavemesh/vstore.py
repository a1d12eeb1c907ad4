"""Vertex value storage with per-level staged updates and lazy aggregation.

Phase one of an update stages per-vertex deltas keyed by hierarchy level and
tags the affected nodes.  ``aggregate`` then runs a single depth-first pass:
each visited node derives its corner deltas by multilinear interpolation of
its parent's corner deltas plus its own level's staged entries, and the
master value of a vertex is its pre-pass value plus the delta from the
deepest node owning it.  Per-level caches keep shared corners from being
finalized twice.

Contract: a nonzero delta staged at (vertex, level) must be accompanied by
tags on every level-`level` node that has the vertex as a corner, so the
delta ramps into all of them.  The stencil layer satisfies this by tagging
the nodes returned by ``cover_region`` for every cell it touches.
"""

from __future__ import annotations

from .tree import AdaptiveTree, Box, box_corners


class IntegrityError(RuntimeError):
    """A tagged node is missing from the tree."""


def corner_weights(box: Box, point) -> list[float]:
    """Multilinear weights of a box's corners at a point, in
    ``box_corners`` order.  Dyadic inputs keep the weights exact."""
    lo, hi = box
    axis_w = []
    for a in range(len(lo)):
        span = hi[a] - lo[a]
        t = (point[a] - lo[a]) / span
        axis_w.append((1.0 - t, t))
    weights = [1.0]
    for a in range(len(lo)):
        weights = [w * axis_w[a][bit] for w in weights for bit in (0, 1)]
    return weights


def interpolate(box: Box, values, point) -> float:
    return sum(w * v for w, v in zip(corner_weights(box, point), values))


class VertexStore:
    def __init__(self, grid):
        self.grid = grid
        self.master: dict[int, float] = {}
        self.staged: dict[int, dict[int, float]] = {}
        self.tagged: set[int] = set()

    # -- phase one ----------------------------------------------------------

    def lookup(self, vid: int) -> float:
        return self.master.get(vid, 0.0)

    def put(self, vid: int, value: float) -> None:
        if value == 0.0:
            self.master.pop(vid, None)
        else:
            self.master[vid] = value

    def stage(self, vid: int, level: int, delta: float) -> None:
        level_map = self.staged.setdefault(level, {})
        level_map[vid] = level_map.get(vid, 0.0) + delta

    def restage(self, vid: int, level: int, delta: float) -> None:
        self.staged.setdefault(level, {})[vid] = delta

    def tag(self, code: int) -> None:
        self.tagged.add(code)

    @property
    def has_pending(self) -> bool:
        return bool(self.tagged) or any(self.staged.values())

    # -- phase two ----------------------------------------------------------

    def aggregate(self, tree: AdaptiveTree) -> int:
        """Fold all staged deltas into the master list; returns the number
        of vertices finalized."""
        for code in self.tagged:
            if not tree.exists(code):
                raise IntegrityError(f"dangling tag {code:#x}")
        if not self.has_pending:
            self.staged.clear()
            self.tagged.clear()
            return 0

        hot: set[int] = set()
        for code in self.tagged:
            node = code
            while node and node not in hot:
                hot.add(node)
                node >>= tree._bits
        # nodes whose corners carry staged data must be reachable even when
        # the tag was placed only on a sibling at the same level
        old: dict[int, float] = {}
        done: dict[int, dict[int, float]] = {}

        def visit(code: int, parent_box, parent_deltas) -> None:
            box = tree.node_box(code)
            level = tree.depth(code)
            lev_done = done.setdefault(level, {})
            staged_here = self.staged.get(level, ())
            deltas = []
            for corner in box_corners(box):
                vid = self.grid.vid(corner)
                if vid in lev_done:
                    deltas.append(lev_done[vid])
                    continue
                base = (interpolate(parent_box, parent_deltas, corner)
                        if parent_deltas is not None else 0.0)
                delta = base + (self.staged[level].get(vid, 0.0)
                                if staged_here else 0.0)
                lev_done[vid] = delta
                if vid not in old:
                    old[vid] = self.master.get(vid, 0.0)
                self.put(vid, old[vid] + delta)
                deltas.append(delta)
            push = any(deltas)
            for child in tree.children(code):
                if push or child in hot:
                    visit(child, box, deltas)

        visit(tree.root, None, None)
        count = len(old)
        self.staged.clear()
        self.tagged.clear()
        return count

    def nonzero_count(self) -> int:
        return len(self.master)

"""Pointerless spatial tree over a (2^L+1)^d vertex grid.

Nodes are identified by location codes: a sentinel 1-bit followed by
(2d-1) bits per level holding that level's child id.  Internal nodes are
always cubes (ids below 2^d); only the last step of a path may select a
rectangular child.  Child ids encode a per-axis state (lower half, upper
half, or full span):

    2D  0..3   quadrants, id = x_bit + 2*y_bit
        4,5    x-full slabs (lower/upper y)
        6,7    y-full slabs (lower/upper x)
    3D  0..7   octants, id = x_bit + 2*y_bit + 4*z_bit
        8..11  long-x columns, (y,z) anchors row-major
        12..15 long-y columns, (x,z) anchors row-major
        16..19 long-z columns, (x,y) anchors row-major
        20..25 slabs grouped by short axis (z, y, x), lower before upper

This table reproduces the quoted configurations {24,25}, {16,17,18,19},
{0,4,17,18,19}, {13,15,16,18}, {0,4,18,25} and {10,11,12,13}.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

LO, HI, FULL = 0, 1, 2


class UnresolvedRegionError(LookupError):
    """A query hit the uncovered part of an improper node."""


class TreeStructureError(ValueError):
    """Request conflicts with the current tree structure."""


@lru_cache(maxsize=None)
def child_states(d: int) -> tuple[tuple[int, ...], ...]:
    if d == 2:
        return (
            (LO, LO), (HI, LO), (LO, HI), (HI, HI),
            (FULL, LO), (FULL, HI), (LO, FULL), (HI, FULL),
        )
    if d == 3:
        # id = x + 2y + 4z
        type0 = [None] * 8
        for z in (0, 1):
            for y in (0, 1):
                for x in (0, 1):
                    type0[x + 2 * y + 4 * z] = (x, y, z)
        long_x = [(FULL, y, z) for z in (0, 1) for y in (0, 1)]
        long_y = [(x, FULL, z) for z in (0, 1) for x in (0, 1)]
        long_z = [(x, y, FULL) for y in (0, 1) for x in (0, 1)]
        type2 = [(FULL, FULL, LO), (FULL, FULL, HI),
                 (FULL, LO, FULL), (FULL, HI, FULL),
                 (LO, FULL, FULL), (HI, FULL, FULL)]
        return tuple(type0 + long_x + long_y + long_z + type2)
    raise ValueError(f"unsupported dimension {d}")


@lru_cache(maxsize=None)
def state_to_id(d: int) -> dict[tuple[int, ...], int]:
    return {s: i for i, s in enumerate(child_states(d))}


def child_type(d: int, cid: int) -> int:
    """0 = cube, 1 = one long axis, 2 = two long axes (3D only)."""
    return sum(1 for s in child_states(d)[cid] if s == FULL)


def _axes_compatible(a: int, b: int) -> bool:
    return a == FULL or b == FULL or a == b


def ids_overlap(d: int, a: int, b: int) -> bool:
    sa, sb = child_states(d)[a], child_states(d)[b]
    return all(_axes_compatible(x, y) for x, y in zip(sa, sb))


def is_valid_config(children, d: int) -> bool:
    """True iff the children's boxes are pairwise disjoint."""
    ids = sorted(children)
    return all(not ids_overlap(d, a, b)
               for i, a in enumerate(ids) for b in ids[i + 1:])


def _config_volume(d: int, children) -> int:
    # in units of 2^-d of the parent
    return sum(1 << child_type(d, c) for c in children)


def config_covers(d: int, children) -> bool:
    return _config_volume(d, children) == (1 << d)


@lru_cache(maxsize=None)
def _all_valid_configs(d: int) -> tuple[frozenset[int], ...]:
    n = 3 ** d - 1
    out: list[frozenset[int]] = []

    def extend(start: int, chosen: tuple[int, ...]):
        if chosen:
            out.append(frozenset(chosen))
        for c in range(start, n):
            if all(not ids_overlap(d, c, p) for p in chosen):
                extend(c + 1, chosen + (c,))

    extend(0, ())
    return tuple(out)


def enumerate_configs(d: int, include_improper: bool) -> int:
    """Count valid node configurations; the leaf counts as one."""
    configs = _all_valid_configs(d)
    if include_improper:
        return len(configs) + 1
    return sum(1 for c in configs if config_covers(d, c)) + 1


@lru_cache(maxsize=None)
def _tilings(d: int) -> tuple[frozenset[int], ...]:
    return tuple(c for c in _all_valid_configs(d) if config_covers(d, c))


@lru_cache(maxsize=None)
def completion(d: int, config: frozenset[int]) -> tuple[int, ...]:
    """Fewest child ids that tile the uncovered remainder of a config; ties
    break toward the highest ids (largest rectangular pieces last)."""
    best: tuple[int, ...] | None = None
    for t in _tilings(d):
        if config <= t:
            extra = tuple(sorted(t - config))
            key = (len(extra), tuple(-i for i in reversed(extra)))
            if best is None or key < best_key:
                best, best_key = extra, key
    if best is None:
        raise TreeStructureError(f"no tiling extends config {sorted(config)}")
    return best


def split_cube_ids(d: int, axes) -> tuple[int, ...]:
    """Child ids produced by splitting a cube along the given axes."""
    axes = tuple(sorted(axes))
    if not axes:
        raise TreeStructureError("empty axis set")
    table = state_to_id(d)
    out = []
    for bits in itertools.product((LO, HI), repeat=len(axes)):
        state = [FULL] * d
        for ax, b in zip(axes, bits):
            state[ax] = b
        out.append(table[tuple(state)])
    return tuple(sorted(out))


def split_rect_ids(d: int, cid: int, axes) -> tuple[int, ...]:
    """Sibling ids produced by splitting a rectangular child along axes."""
    state = child_states(d)[cid]
    axes = tuple(sorted(axes))
    if not axes or any(state[a] != FULL for a in axes):
        raise TreeStructureError(f"cannot split child {cid} along {axes}")
    table = state_to_id(d)
    out = []
    for bits in itertools.product((LO, HI), repeat=len(axes)):
        new = list(state)
        for ax, b in zip(axes, bits):
            new[ax] = b
        out.append(table[tuple(new)])
    return tuple(sorted(out))


# --- location codes -------------------------------------------------------

def code_bits(d: int) -> int:
    return 2 * d - 1


def encode(d: int, path) -> int:
    code = 1
    bits = code_bits(d)
    path = tuple(path)
    for i, cid in enumerate(path):
        if not 0 <= cid < 3 ** d - 1:
            raise ValueError(f"child id {cid} out of range")
        if i < len(path) - 1 and cid >= (1 << d):
            raise ValueError("rectangular id in non-final position")
        code = (code << bits) | cid
    return code


def decode(d: int, code: int) -> tuple[int, ...]:
    bits = code_bits(d)
    level = code_level(d, code)
    mask = (1 << bits) - 1
    return tuple((code >> (bits * (level - 1 - i))) & mask for i in range(level))


def code_level(d: int, code: int) -> int:
    n = code.bit_length() - 1
    if n % code_bits(d):
        raise ValueError(f"malformed code {code:#x}")
    return n // code_bits(d)


def code_parent(d: int, code: int) -> int:
    return code >> code_bits(d)


def code_child(d: int, code: int, cid: int) -> int:
    return (code << code_bits(d)) | cid


def code_last(d: int, code: int) -> int:
    return code & ((1 << code_bits(d)) - 1)


Box = tuple[tuple[int, ...], tuple[int, ...]]


def child_box(d: int, box: Box, cid: int) -> Box:
    lo, hi = box
    state = child_states(d)[cid]
    nlo, nhi = list(lo), list(hi)
    for a, s in enumerate(state):
        if s == FULL:
            continue
        mid = (lo[a] + hi[a]) // 2
        if s == LO:
            nhi[a] = mid
        else:
            nlo[a] = mid
    return tuple(nlo), tuple(nhi)


def box_contains(outer: Box, inner: Box) -> bool:
    return all(outer[0][a] <= inner[0][a] and inner[1][a] <= outer[1][a]
               for a in range(len(outer[0])))


def box_volume(box: Box) -> int:
    v = 1
    for lo, hi in zip(*box):
        v *= hi - lo
    return v


def point_in_box(box: Box, point) -> bool:
    return all(box[0][a] <= point[a] <= box[1][a] for a in range(len(point)))


@dataclass(frozen=True)
class VirtualGrid:
    """The (2^L+1)^d index space holding the true domain plus its margin."""

    d: int
    L: int
    true_dims: tuple[int, ...]

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"unsupported dimension {self.d}")
        side = (1 << self.L) + 1
        if any(n > side for n in self.true_dims):
            raise ValueError("true dims exceed the virtual grid")

    @property
    def side(self) -> int:
        return (1 << self.L) + 1

    @property
    def root_box(self) -> Box:
        return (0,) * self.d, (1 << self.L,) * self.d

    def vid(self, coords) -> int:
        out = 0
        for c in coords:
            out = out * self.side + c
        return out

    def coords(self, vid: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.d):
            out.append(vid % self.side)
            vid //= self.side
        return tuple(reversed(out))

    @staticmethod
    def for_dims(true_dims) -> "VirtualGrid":
        true_dims = tuple(true_dims)
        from .lifting import ceil_log2
        L = max(ceil_log2(n - 1) for n in true_dims)
        return VirtualGrid(len(true_dims), max(L, 1), true_dims)


def box_corners(box: Box) -> list[tuple[int, ...]]:
    return [c for c in itertools.product(*zip(*box))]


class AdaptiveTree:
    """Hashed-storage tree: leaves as a set, internal nodes as code->config
    maps, improper nodes tracked separately."""

    def __init__(self, grid: VirtualGrid, suppressed: bool = False):
        self.grid = grid
        self.d = grid.d
        self.suppressed = suppressed
        self.root = 1
        self.leaves: set[int] = {self.root}
        self.internal: dict[int, frozenset[int]] = {}
        self.improper: set[int] = set()
        self._bits = code_bits(self.d)
        # called as on_replace(old_code, new_codes) when a rectangular leaf
        # is replaced by sibling pieces (its code disappears)
        self.on_replace = None

    # -- basic queries -----------------------------------------------------

    def depth(self, code: int) -> int:
        return code_level(self.d, code)

    def exists(self, code: int) -> bool:
        return code in self.leaves or code in self.internal

    def node_box(self, code: int) -> Box:
        box = self.grid.root_box
        for cid in decode(self.d, code):
            box = child_box(self.d, box, cid)
        return box

    def config(self, code: int) -> frozenset[int]:
        return self.internal[code]

    def children(self, code: int):
        for cid in sorted(self.internal.get(code, ())):
            yield code_child(self.d, code, cid)

    def _set_config(self, code: int, cfg: frozenset[int]) -> None:
        if not is_valid_config(cfg, self.d):
            raise TreeStructureError(f"overlapping children {sorted(cfg)}")
        self.internal[code] = cfg
        if config_covers(self.d, cfg):
            self.improper.discard(code)
        else:
            self.improper.add(code)

    # -- mutations ----------------------------------------------------------
    # Mutations return [(created_code, interp_source_box)] so callers can
    # materialize split-point vertices from the function they subdivide.

    def split_leaf(self, code: int, axes) -> list[tuple[int, Box]]:
        if code not in self.leaves:
            raise TreeStructureError(f"{code:#x} is not a leaf")
        box = self.node_box(code)
        last = code_last(self.d, code) if code != self.root else None
        if code == self.root or child_type(self.d, last) == 0:
            if self.suppressed:
                axes = range(self.d)
            ids = split_cube_ids(self.d, tuple(axes))
            self.leaves.discard(code)
            self._set_config(code, frozenset(ids))
            created = [(code_child(self.d, code, cid), box) for cid in ids]
        else:
            parent = code_parent(self.d, code)
            ids = split_rect_ids(self.d, last, tuple(axes))
            cfg = (self.config(parent) - {last}) | set(ids)
            self.leaves.discard(code)
            self._set_config(parent, frozenset(cfg))
            created = [(code_child(self.d, parent, cid), box) for cid in ids]
            if self.on_replace is not None:
                self.on_replace(code, [c for c, _ in created])
        for c, _ in created:
            self.leaves.add(c)
        return created

    def create_child(self, parent: int, cid: int) -> list[tuple[int, Box]]:
        if self.suppressed:
            return self._create_child_suppressed(parent, cid)
        box = self.node_box(parent)
        if parent in self.leaves:
            self.leaves.discard(parent)
            self._set_config(parent, frozenset((cid,)))
        elif parent in self.internal:
            cfg = self.config(parent)
            if any(ids_overlap(self.d, cid, c) for c in cfg):
                raise TreeStructureError(
                    f"child {cid} overlaps config {sorted(cfg)}")
            self._set_config(parent, cfg | {cid})
        else:
            raise TreeStructureError(f"parent {parent:#x} does not exist")
        child = code_child(self.d, parent, cid)
        self.leaves.add(child)
        return [(child, box)]

    def _create_child_suppressed(self, parent: int, cid: int) -> list[tuple[int, Box]]:
        if cid >= (1 << self.d):
            raise TreeStructureError("rectangular children are disabled")
        if parent in self.leaves:
            created = self.split_leaf(parent, range(self.d))
            return created
        cfg = self.config(parent)
        if cid in cfg:
            return []
        raise TreeStructureError("suppressed nodes are always fully split")

    # -- region covering ----------------------------------------------------

    def _legal_box(self, box: Box) -> bool:
        sides = [hi - lo for lo, hi in zip(*box)]
        if any(s <= 0 or s & (s - 1) for s in sides):
            return False
        if max(sides) > min(sides) * 2 or max(sides) // min(sides) not in (1, 2):
            return False
        return all(lo % s == 0 for lo, s in zip(box[0], sides))

    def cover_region(self, box: Box):
        """Cover ``box`` with leaves contained in it.

        Returns (anchors, created): ``anchors`` are the nodes at or directly
        tiling ``box`` (for update tagging), ``created`` the new nodes with
        the box each was carved from.
        """
        if not self._legal_box(box):
            raise TreeStructureError(f"box {box} is not grid-aligned")
        created: list[tuple[int, Box]] = []
        anchors = self._cover(self.root, box, created)
        return anchors, created

    def _is_rect_leaf(self, code: int) -> bool:
        return (code in self.leaves and code != self.root
                and child_type(self.d, code_last(self.d, code)) > 0)

    def _piece_state(self, node_box: Box, box: Box) -> tuple[int, ...]:
        state = []
        for a in range(self.d):
            lo, hi = node_box[0][a], node_box[1][a]
            mid = (lo + hi) // 2
            if box[0][a] == lo and box[1][a] == hi:
                state.append(FULL)
            elif box[1][a] <= mid:
                state.append(LO)
            elif box[0][a] >= mid:
                state.append(HI)
            else:
                raise TreeStructureError(f"box {box} straddles {node_box}")
        return tuple(state)

    def _split_rect_toward(self, code: int, box: Box, created) -> int:
        """Tile a rectangular leaf one axis at a time until a node whose box
        contains ``box`` with cube shape (or equals it) emerges."""
        while self._is_rect_leaf(code):
            node_box = self.node_box(code)
            if node_box == box:
                return code
            last = code_last(self.d, code)
            axis = None
            for a, s in enumerate(child_states(self.d)[last]):
                mid = (node_box[0][a] + node_box[1][a]) // 2
                if s == FULL and (box[1][a] <= mid or box[0][a] >= mid):
                    axis = a
                    break
            if axis is None:
                return code
            new = self.split_leaf(code, (axis,))
            created.extend(new)
            code = next(c for c, _ in new
                        if box_contains(self.node_box(c), box))
        return code

    def _cover(self, code: int, box: Box, created) -> list[int]:
        node_box = self.node_box(code)
        if node_box == box:
            return [code]
        if self._is_rect_leaf(code):
            new_code = self._split_rect_toward(code, box, created)
            if new_code == code:
                raise TreeStructureError(f"box {box} unreachable in {node_box}")
            return self._cover(new_code, box, created)
        if code in self.leaves:
            # defer complete subdivision: create only the requested child
            if self.suppressed:
                new = self.split_leaf(code, range(self.d))
                created.extend(new)
                return self._cover(code, box, created)
            cid = state_to_id(self.d)[self._piece_state(node_box, box)]
            new = self.create_child(code, cid)
            created.extend(new)
            return self._cover(new[0][0], box, created)

        # internal node: descend through a containing child when one exists
        while True:
            for cid in sorted(self.config(code)):
                cbox = child_box(self.d, node_box, cid)
                child = code_child(self.d, code, cid)
                if box_contains(cbox, box):
                    if self._is_rect_leaf(child):
                        child = self._split_rect_toward(child, box, created)
                    return self._cover(child, box, created)
            # split any rectangular child crossing the box boundary
            crossing = None
            for cid in self.config(code):
                cbox = child_box(self.d, node_box, cid)
                if box_contains(box, cbox) or not self.boxes_overlap(cbox, box):
                    continue
                axes = [a for a in range(self.d)
                        if not (box[0][a] <= cbox[0][a] and cbox[1][a] <= box[1][a])
                        and child_states(self.d)[cid][a] == FULL]
                crossing = (code_child(self.d, code, cid), axes)
                break
            if crossing is None:
                break
            created.extend(self.split_leaf(*crossing))

        # remaining children are inside the box or disjoint; tile the rest
        cfg = self.config(code)
        anchors = [code_child(self.d, code, cid) for cid in sorted(cfg)
                   if box_contains(box, child_box(self.d, node_box, cid))]
        covered = _config_volume(self.d, [code_last(self.d, a) for a in anchors])
        want = box_volume(box) * (1 << self.d) // box_volume(node_box)
        order = sorted(range(3 ** self.d - 1), key=lambda c: -child_type(self.d, c))
        if self.suppressed:
            order = [c for c in order if c < (1 << self.d)]
        target_state = self._piece_state(node_box, box)
        target_cid = state_to_id(self.d).get(target_state)
        octant = None
        if target_cid is not None and FULL in target_state:
            pass
        elif target_cid is not None and child_type(self.d, target_cid) == 0 \
                and child_box(self.d, node_box, target_cid) != box:
            octant = target_cid
        if octant is not None:
            # box is strictly inside one octant: create it and descend
            new = self.create_child(code, octant)
            created.extend(new)
            return self._cover(new[0][0], box, created)
        for cid in order:
            if covered >= want:
                break
            cbox = child_box(self.d, node_box, cid)
            if not box_contains(box, cbox):
                continue
            if any(ids_overlap(self.d, cid, c) for c in self.config(code)):
                continue
            new = self.create_child(code, cid)
            created.extend(new)
            anchors.extend(c for c, _ in new)
            covered += 1 << child_type(self.d, cid)
        if covered != want:
            raise TreeStructureError(f"could not tile {box}")
        return anchors

    def boxes_overlap(self, a: Box, b: Box) -> bool:
        return all(max(a[0][i], b[0][i]) < min(a[1][i], b[1][i])
                   for i in range(self.d))

    def cut_region(self, box: Box, axes) -> list[tuple[int, Box]]:
        """Split every leaf inside ``box`` that crosses one of its mid-planes
        along the given axes."""
        created: list[tuple[int, Box]] = []
        mids = {a: (box[0][a] + box[1][a]) // 2 for a in axes}
        again = True
        while again:
            again = False
            for leaf in list(self.leaves):
                lbox = self.node_box(leaf)
                if not box_contains(box, lbox):
                    continue
                cut_axes = [a for a, m in mids.items()
                            if lbox[0][a] < m < lbox[1][a]]
                if not cut_axes:
                    continue
                if self.suppressed:
                    cut_axes = range(self.d)
                created.extend(self.split_leaf(leaf, cut_axes))
                again = True
        return created

    # -- geometric queries ---------------------------------------------------

    def find_leaf(self, point, crop: bool = True) -> int:
        bound = ([n - 1 for n in self.grid.true_dims] if crop
                 else list(self.grid.root_box[1]))
        if any(not 0 <= p <= b for p, b in zip(point, bound)):
            raise ValueError(f"point {point} outside bounds")
        code = self.root
        while code not in self.leaves:
            node_box = self.node_box(code)
            nxt = None
            for cid in sorted(self.internal[code]):
                if point_in_box(child_box(self.d, node_box, cid), point):
                    nxt = code_child(self.d, code, cid)
                    break
            if nxt is None:
                raise UnresolvedRegionError(
                    f"point {point} lies in an unresolved region")
            code = nxt
        return code

    def boxes_touch(self, a: Box, b: Box) -> bool:
        return all(max(a[0][i], b[0][i]) <= min(a[1][i], b[1][i])
                   for i in range(self.d))

    def face_adjacent(self, a: Box, b: Box) -> bool:
        touch_axes = overlap_axes = 0
        for i in range(self.d):
            lo = max(a[0][i], b[0][i])
            hi = min(a[1][i], b[1][i])
            if lo > hi:
                return False
            if lo == hi:
                touch_axes += 1
            else:
                overlap_axes += 1
        return touch_axes == 1 and overlap_axes == self.d - 1

    def neighbors(self, code: int):
        """Leaves adjacent to the node across faces, edges and corners."""
        box = self.node_box(code)
        for leaf in self.leaves:
            if leaf == code:
                continue
            if self.boxes_touch(box, self.node_box(leaf)):
                yield leaf

    def balance(self, max_level_diff: int = 1) -> list[tuple[int, Box]]:
        """Refine until face-adjacent leaves differ by at most the given
        number of levels; returns the created nodes."""
        if self.improper:
            raise TreeStructureError("balance requires a resolved tree")
        created: list[tuple[int, Box]] = []
        changed = True
        while changed:
            changed = False
            leaf_boxes = {c: self.node_box(c) for c in self.leaves}
            codes = sorted(leaf_boxes, key=self.depth)
            for i, a in enumerate(codes):
                if a not in self.leaves:
                    continue
                for b in codes[i + 1:]:
                    if b not in self.leaves or a not in self.leaves:
                        continue
                    if not self.face_adjacent(leaf_boxes[a], leaf_boxes[b]):
                        continue
                    da, db = self.depth(a), self.depth(b)
                    if abs(da - db) <= max_level_diff:
                        continue
                    coarse = a if da < db else b
                    last = (None if coarse == self.root
                            else code_last(self.d, coarse))
                    if coarse != self.root and child_type(self.d, last):
                        axes = [ax for ax, s in
                                enumerate(child_states(self.d)[last]) if s == FULL]
                    else:
                        axes = range(self.d)
                    created.extend(self.split_leaf(coarse, axes))
                    changed = True
                    break
        return created

    # -- diagnostics ---------------------------------------------------------

    def check_valid(self) -> None:
        for code, cfg in self.internal.items():
            if not is_valid_config(cfg, self.d):
                raise TreeStructureError(f"invalid config at {code:#x}")
            if (code in self.improper) == config_covers(self.d, cfg):
                raise TreeStructureError(f"improper flag wrong at {code:#x}")

    def dump(self) -> str:
        lines = []
        for code in sorted(self.leaves | set(self.internal)):
            box = self.node_box(code)
            cfg = sorted(self.internal.get(code, ()))
            lines.append(f"{code:x} {self.depth(code)} {cfg} "
                         f"{code in self.improper} {box}")
        return "\n".join(lines)

import numpy as np
import pytest

from wavemesh.lifting import Basis, forward_transform, inverse_transform
from wavemesh.mesh import AdaptiveMesh, iter_coefficients
from wavemesh.stencil import CoeffKey, classify, matching_axes
from wavemesh.tree import box_contains, box_corners

RNG = np.random.default_rng(314)


def test_classify_examples():
    key = classify((0, 0), 2)
    assert key.level == 2 and key.kind == 0
    key = classify((1, 2), 1)
    assert key.level == 1 and key.kind == 1 and key.wavelet_axes == (0,)
    key = classify((2, 6), 3)
    assert key.level == 2 and key.wavelet_axes == (0, 1)


def test_classify_partitions_small_grid():
    levels = 2
    counts = {}
    for x in range(9):
        for y in range(9):
            key = classify((x, y), levels)
            counts[(key.level, key.kind)] = counts.get((key.level, key.kind), 0) + 1
    # level-1 subbands: 4*8 + 4*8 + 16 positions with at least one odd index
    assert counts[(1, 1)] == 2 * 4 * 5 + 0  # edges: odd-even and even-odd
    assert counts[(1, 2)] == 16
    assert counts[(2, 0)] == 9  # stride-4 lattice
    assert sum(counts.values()) == 81


def test_matching_axes():
    assert matching_axes((1, 2), (1, 2)) == (0, 1)
    assert matching_axes((0, 1), (2, 1)) == (1,)
    assert matching_axes((0, 1), (2, 3)) == ()
    assert matching_axes((0, 1), (2, 1)) == matching_axes((2, 1), (0, 1))


def footprint(mesh, support):
    cells = [c for c in mesh.tree.leaves
             if box_contains(support, mesh.tree.node_box(c))]
    corners = set()
    for c in cells:
        corners.update(box_corners(mesh.tree.node_box(c)))
    nonzero = sum(1 for v in mesh.vstore.master.values() if v != 0.0)
    return len(cells), len(corners), nonzero


def support_box(key, d):
    h = 1 << key.level
    half = h // 2
    lo, hi = [], []
    for a in range(d):
        r = 3 * half if a in key.wavelet_axes else h
        lo.append(key.pos[a] - r)
        hi.append(key.pos[a] + r)
    return tuple(lo), tuple(hi)


FIG8_2D = [
    # (wavelet axes, amm (#C,#Vc,#V), suppressed (#C,#Vc,#V))
    ((), (4, 9, 1), (4, 9, 1)),
    ((1,), (8, 15, 3), (12, 21, 9)),
    ((0, 1), (16, 25, 9), (24, 37, 21)),
]

FIG8_3D = [
    ((), (8, 27, 1), (8, 27, 1)),
    ((2,), (16, 45, 3), (40, 93, 27)),
    ((1, 2), (32, 75, 9), (88, 177, 63)),
    ((0, 1, 2), (64, 125, 27), (160, 287, 117)),
]


@pytest.mark.parametrize("axes,amm,wl", FIG8_2D)
def test_fig8_table_2d(axes, amm, wl):
    for suppressed, want in ((False, amm), (True, wl)):
        mesh = AdaptiveMesh((17, 17), Basis.APPROXIMATING, suppressed=suppressed)
        pos = tuple(7 if a in axes else 8 for a in range(2))
        key = CoeffKey(pos, 1, axes)
        mesh.add_coefficient(key, 1.0)
        mesh.aggregate()
        assert footprint(mesh, support_box(key, 2)) == want


@pytest.mark.parametrize("axes,amm,wl", FIG8_3D)
def test_fig8_table_3d(axes, amm, wl):
    for suppressed, want in ((False, amm), (True, wl)):
        mesh = AdaptiveMesh((17, 17, 17), Basis.APPROXIMATING, suppressed=suppressed)
        pos = tuple(7 if a in axes else 8 for a in range(3))
        key = CoeffKey(pos, 1, axes)
        mesh.add_coefficient(key, 1.0)
        mesh.aggregate()
        assert footprint(mesh, support_box(key, 3)) == want


def test_interpolating_wavelet_center_only():
    mesh = AdaptiveMesh((17, 17), Basis.INTERPOLATING)
    key = CoeffKey((7, 7), 1, (0, 1))
    mesh.add_coefficient(key, 2.0)
    mesh.aggregate()
    assert footprint(mesh, support_box(key, 2))[0] == 4
    assert mesh.vstore.master == {mesh.grid.vid((7, 7)): 2.0}


def test_zero_value_refines_but_stages_nothing():
    mesh = AdaptiveMesh((17, 17), Basis.APPROXIMATING)
    mesh.add_coefficient(CoeffKey((7, 7), 1, (0, 1)), 0.0)
    mesh.aggregate()
    assert len(mesh.tree.leaves) > 1
    assert mesh.vstore.master == {}


def test_opposite_values_cancel():
    mesh = AdaptiveMesh((17, 17), Basis.APPROXIMATING)
    key = CoeffKey((7, 7), 1, (0, 1))
    mesh.add_coefficient(key, 1.5)
    mesh.add_coefficient(key, -1.5)
    mesh.finalize()
    assert not mesh.vstore.master


def test_boundary_clipping_stays_inside():
    for pos in ((1, 1), (15, 1), (1, 15), (15, 15), (1, 8)):
        mesh = AdaptiveMesh((17, 17), Basis.APPROXIMATING)
        key = classify(pos, 4)
        mesh.add_coefficient(key, 1.0)
        root = mesh.grid.root_box
        for leaf in mesh.tree.leaves:
            assert box_contains(root, mesh.tree.node_box(leaf))


def test_single_coefficient_matches_inverse_oracle():
    shape = (9, 9)
    base = forward_transform(np.zeros(shape), 2, Basis.APPROXIMATING)
    keys = [k for k, _ in iter_coefficients(base)]
    picks = RNG.choice(len(keys), size=12, replace=False)
    for i in picks:
        key = keys[int(i)]
        val = float(RNG.normal())
        mesh = AdaptiveMesh(shape, Basis.APPROXIMATING)
        mesh.add_coefficient(key, val)
        mesh.finalize()
        lone = forward_transform(np.zeros(shape), 2, Basis.APPROXIMATING)
        vals = np.zeros_like(lone.values)
        ix = tuple(lone.plans[a].live.index(key.pos[a]) for a in range(2))
        vals[ix] = val
        lone.values = vals
        want = inverse_transform(lone)[: shape[0], : shape[1]]
        np.testing.assert_allclose(mesh.evaluate_grid(), want, atol=1e-12)


def test_superposition_order_independent():
    shape = (9, 9)
    x = RNG.normal(size=shape)
    field = forward_transform(x, 2, Basis.APPROXIMATING)
    items = [(k, v) for k, v in iter_coefficients(field) if v != 0.0]
    sel = [items[int(i)] for i in RNG.choice(len(items), size=8, replace=False)]

    def build(order):
        mesh = AdaptiveMesh(shape, Basis.APPROXIMATING)
        for key, val in order:
            mesh.add_coefficient(key, val)
        mesh.finalize()
        return mesh.evaluate_grid()

    a = build(sel)
    b = build(sel[::-1])
    np.testing.assert_allclose(a, b, atol=1e-12)

"""Linear B-spline lifting transforms with boundary extrapolation.

The forward transform runs level by level.  Within a level each axis is
processed last-axis-first (z, then y, then x).  A 1D pass on an active
subsequence of even length first appends one linearly extrapolated sample
(``[... a, b]`` becomes ``[... a, b, 2b - a]``), which makes the wavelet
coefficient at the last odd position identically zero.  Those structural
zeros are not stored: an original sample position that becomes one is
dropped from the output, while an extrapolated position keeps the value it
had when it was created.  The stored array therefore grows by at most one
sample per axis per level.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Basis(Enum):
    INTERPOLATING = "interp"
    APPROXIMATING = "approx"


class Arithmetic(Enum):
    """FLOAT is the production mode.  INT reproduces integer lifting where
    every lift term is rounded to the nearest integer, ties away from zero."""

    FLOAT = "float"
    INT = "int"


def ceil_log2(n: int) -> int:
    if n <= 1:
        return 0
    return int(n - 1).bit_length()


@dataclass(frozen=True)
class AxisPlan:
    """Data-independent per-axis schedule of a lifted transform.

    ``live`` lists the virtual positions that are stored, ``frozen`` the
    (position, level) pairs whose wavelet coefficient is structurally zero
    at that level's subgrid, and ``extents`` the post-extrapolation extent
    after each level.
    """

    n: int
    levels: int
    virtual_exponent: int
    extents: tuple[int, ...]
    extrapolated: tuple[int, ...]
    frozen: tuple[tuple[int, int], ...]
    live: tuple[int, ...]

    @property
    def virtual_len(self) -> int:
        return (1 << self.virtual_exponent) + 1

    @property
    def ext_len(self) -> int:
        return len(self.live)

    @property
    def frozen_positions(self) -> frozenset[int]:
        return frozenset(p for p, _ in self.frozen)


def axis_plan(n: int, levels: int, keep_deep_frozen: bool = False) -> AxisPlan:
    """Schedule for one axis.  A frozen original sample is dropped from
    storage when its whole hyperplane is structurally zero; for nD fields
    that holds only for level-1 freezes (``keep_deep_frozen=True`` retains
    the deeper ones, which still carry finer cross-coefficients)."""
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if levels < 1:
        raise ValueError(f"need at least 1 level, got {levels}")
    max_levels = ceil_log2(n - 1)
    if levels > max_levels:
        raise ValueError(f"{levels} levels exceed the limit {max_levels} for {n} samples")

    extent = n - 1
    extents = []
    extrapolated = []
    frozen = []
    dropped = set()
    for lev in range(1, levels + 1):
        stride = 1 << (lev - 1)
        count = extent // stride + 1
        if count % 2 == 0:
            last_odd = extent
            extent += stride
            extrapolated.append(extent)
            frozen.append((last_odd, lev))
            if last_odd < n and (lev == 1 or not keep_deep_frozen):
                dropped.add(last_odd)
        extents.append(extent)

    live = sorted((set(range(n)) - dropped) | set(extrapolated))
    return AxisPlan(
        n=n,
        levels=levels,
        virtual_exponent=max(max_levels, ceil_log2(extent)),
        extents=tuple(extents),
        extrapolated=tuple(extrapolated),
        frozen=tuple(frozen),
        live=tuple(live),
    )


def _round_div_int(num: np.ndarray, den: int) -> np.ndarray:
    """Nearest integer of num/den (den a power of two), ties away from zero."""
    q = num // den
    r = num - q * den
    up = (2 * r > den) | ((2 * r == den) & (num > 0))
    return q + up


def _half(total, arith: Arithmetic):
    if arith is Arithmetic.INT:
        return _round_div_int(total, 2)
    return total * 0.5


def _quarter(total, arith: Arithmetic):
    if arith is Arithmetic.INT:
        return _round_div_int(total, 4)
    return total * 0.25


def _lift_lines(sub: np.ndarray, axis: int, basis: Basis, arith: Arithmetic,
                inverse: bool, zero_last_odd: bool) -> None:
    """Lifting steps on a gathered subgrid whose target-axis samples are
    contiguous (unit stride); count along the axis is odd."""
    s = np.moveaxis(sub, axis, 0)
    count = s.shape[0]
    zeros = np.zeros_like(s[0])

    def w_pass(sign):
        s[1::2] += sign * _half(s[0:-2:2] + s[2::2], arith)
        if zero_last_odd:
            s[-2] = 0

    def s_pass(sign):
        wav = s[1::2]
        n_even = (count + 1) // 2
        left = np.concatenate([zeros[None], wav], axis=0)[:n_even]
        right = np.concatenate([wav, zeros[None]], axis=0)[:n_even]
        s[0::2] += sign * _quarter(left + right, arith)

    if inverse:
        if basis is Basis.APPROXIMATING:
            s_pass(-1)
        w_pass(+1)
    else:
        w_pass(-1)
        if basis is Basis.APPROXIMATING:
            s_pass(+1)


def _subgrid_indices(extents, stride, axis, tgt_actives):
    out = []
    for a, extent in enumerate(extents):
        if a == axis:
            out.append(np.array(tgt_actives))
        else:
            out.append(np.arange(0, extent + 1, stride))
    return out


def _forward_axis_pass(data, axis, extents, lev: int, basis: Basis,
                       arith: Arithmetic, freezes) -> None:
    """One forward pass along an axis, restricted to the level's subgrid."""
    stride = 1 << (lev - 1)
    extent = extents[axis]
    tgt = list(range(0, extent + 1, stride))
    zero_last = False
    if len(tgt) % 2 == 0:
        new = extent + stride
        sel_new = _subgrid_indices(extents, stride, axis, [new])
        sel_last = _subgrid_indices(extents, stride, axis, [extent])
        sel_prev = _subgrid_indices(extents, stride, axis, [extent - stride])
        data[np.ix_(*sel_new)] = (2 * data[np.ix_(*sel_last)]
                                  - data[np.ix_(*sel_prev)])
        # the wavelet slot next to the extrapolated sample is structurally
        # zero; its creation-time hyperplane is what storage keeps
        freezes.append((axis, extent,
                        np.copy(np.moveaxis(data, axis, 0)[extent])))
        extents[axis] = new
        tgt.append(new)
        zero_last = True
    sel = _subgrid_indices(extents, stride, axis, tgt)
    sub = data[np.ix_(*sel)]
    _lift_lines(sub, axis, basis, arith, inverse=False, zero_last_odd=zero_last)
    data[np.ix_(*sel)] = sub


def _inverse_axis_pass(data, axis, lev: int, basis: Basis, arith: Arithmetic) -> None:
    stride = 1 << (lev - 1)
    sel = [np.arange(0, n, stride) for n in data.shape]
    sub = data[np.ix_(*sel)]
    _lift_lines(sub, axis, basis, arith, inverse=True, zero_last_odd=False)
    data[np.ix_(*sel)] = sub


@dataclass
class CoefficientField:
    """Dense array of lifted coefficients plus the transform bookkeeping.

    ``values`` has shape ``ext_dims`` (at most input + levels per axis) and
    holds, per axis, the original positions that kept a coefficient plus the
    extrapolated samples.  ``plans`` maps storage indices back to virtual
    grid positions.
    """

    values: np.ndarray
    input_dims: tuple[int, ...]
    levels: int
    basis: Basis
    plans: tuple[AxisPlan, ...]

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def ext_dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def virtual_dims(self) -> tuple[int, ...]:
        return tuple(p.virtual_len for p in self.plans)


def forward_lift_1d(signal, levels: int, basis: Basis,
                    arith: Arithmetic = Arithmetic.FLOAT) -> np.ndarray:
    """Forward 1D lifting; returns the stored coefficient array."""
    field = forward_transform(np.asarray(signal), levels, basis, arith)
    return field.values


def inverse_lift_1d(coeffs, levels: int, basis: Basis,
                    arith: Arithmetic = Arithmetic.FLOAT,
                    input_len: int | None = None) -> np.ndarray:
    """Inverse 1D lifting; returns the full extrapolated function.

    When ``input_len`` is omitted, the smallest input length consistent with
    the coefficient count is used.
    """
    coeffs = np.asarray(coeffs)
    if input_len is None:
        input_len = _infer_input_len(len(coeffs), levels)
    plan = axis_plan(input_len, levels)
    if plan.ext_len != len(coeffs):
        raise ValueError(
            f"{len(coeffs)} coefficients inconsistent with input length "
            f"{input_len} at {levels} levels (expected {plan.ext_len})")
    field = CoefficientField(coeffs, (input_len,), levels, basis, (plan,))
    return inverse_transform(field, arith)


def _infer_input_len(ext_len: int, levels: int) -> int:
    for n in range(2, ext_len + 1):
        try:
            if axis_plan(n, levels).ext_len == ext_len:
                return n
        except ValueError:
            continue
    raise ValueError(f"no input length yields {ext_len} coefficients at {levels} levels")


def forward_transform(field: np.ndarray, levels: int, basis: Basis,
                      arith: Arithmetic = Arithmetic.FLOAT) -> CoefficientField:
    """Forward transform for 1D/2D/3D arrays, extrapolating as needed."""
    field = np.asarray(field)
    d = field.ndim
    if d not in (1, 2, 3):
        raise ValueError(f"unsupported dimensionality {d}")
    plans = tuple(axis_plan(n, levels, keep_deep_frozen=d > 1)
                  for n in field.shape)

    dtype = np.int64 if arith is Arithmetic.INT else np.float64
    work = np.zeros(tuple(p.virtual_len for p in plans), dtype=dtype)
    work[tuple(slice(0, n) for n in field.shape)] = field

    freezes: list[tuple[int, int, np.ndarray]] = []
    extents = [n - 1 for n in field.shape]
    for lev in range(1, levels + 1):
        for axis in reversed(range(d)):
            _forward_axis_pass(work, axis, extents, lev, basis, arith, freezes)

    stored = work[np.ix_(*[np.array(p.live) for p in plans])].copy()
    # Frozen positions keep the value they had when created; earlier freezes
    # win where frozen hyperplanes intersect.
    for axis, pos, saved in reversed(freezes):
        if pos not in plans[axis].live:
            continue
        idx = plans[axis].live.index(pos)
        sel = [np.array(p.live) for p in plans]
        saved_sel = saved[np.ix_(*[s for a, s in enumerate(sel) if a != axis])] if d > 1 else saved
        dst = [slice(None)] * d
        dst[axis] = idx
        stored[tuple(dst)] = saved_sel
    return CoefficientField(stored, field.shape, levels, basis, plans)


def inverse_transform(coeffs: CoefficientField,
                      arith: Arithmetic = Arithmetic.FLOAT) -> np.ndarray:
    """Inverse transform over the full virtual domain.

    Callers crop to ``input_dims`` for the true-domain samples; this routine
    is the reconstruction oracle for the mesh modules.
    """
    plans = coeffs.plans
    d = len(plans)
    if coeffs.values.shape != tuple(p.ext_len for p in plans):
        raise ValueError("coefficient array does not match its plans")
    dtype = np.int64 if arith is Arithmetic.INT else np.float64
    work = np.zeros(tuple(p.virtual_len for p in plans), dtype=dtype)
    work[np.ix_(*[np.array(p.live) for p in plans])] = coeffs.values
    for axis, plan in enumerate(plans):
        for pos, lev in plan.frozen:
            stride = 1 << (lev - 1)
            sel = [np.arange(0, n, stride) for n in work.shape]
            sel[axis] = np.array([pos])
            work[np.ix_(*sel)] = 0
    for lev in range(coeffs.levels, 0, -1):
        for axis in range(d):
            _inverse_axis_pass(work, axis, lev, coeffs.basis, arith)
    return work


def reconstruct(coeffs: CoefficientField, arith: Arithmetic = Arithmetic.FLOAT) -> np.ndarray:
    """Inverse transform cropped to the original sample grid."""
    full = inverse_transform(coeffs, arith)
    return full[tuple(slice(0, n) for n in coeffs.input_dims)]


# Synthesis stencil weights on the half-spacing subgrid.
PHI_WEIGHTS = {-2: 0.0, -1: 0.5, 0: 1.0, 1: 0.5, 2: 0.0}
PSI_A_WEIGHTS = {-3: 0.0, -2: -0.125, -1: -0.25, 0: 0.75, 1: -0.25, 2: -0.125, 3: 0.0}
PSI_I_WEIGHTS = {-1: 0.0, 0: 1.0, 1: 0.0}

# L2 norms of the unit-spacing synthesis shapes (exact piecewise-linear
# integrals): hat = sqrt(2/3), approximating wavelet = sqrt(3/8).
_PHI_NORM1 = np.sqrt(2.0 / 3.0)
_PSI_A_NORM1 = np.sqrt(3.0 / 8.0)
_PSI_I_NORM1 = _PHI_NORM1


def basis_norm(d: int, k_wavelet_axes: int, level: int, basis: Basis) -> float:
    """L2 norm of the tensor-product synthesis function.

    The scaling factor at level ``l`` spans +-2^l fine samples and the
    wavelet factor +-3*2^(l-1); both dilate the unit-spacing norm by
    2^(level/2) per level.
    """
    if not 0 <= k_wavelet_axes <= d:
        raise ValueError(f"kind {k_wavelet_axes} out of range for d={d}")
    psi1 = _PSI_A_NORM1 if basis is Basis.APPROXIMATING else _PSI_I_NORM1
    phi = _PHI_NORM1 * 2.0 ** (level / 2.0)
    psi = psi1 * 2.0 ** ((level - 1) / 2.0)
    return phi ** (d - k_wavelet_axes) * psi ** k_wavelet_axes

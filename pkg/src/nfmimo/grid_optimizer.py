"""Exhaustive grid search over receiver spacings maximizing effective rank.

This is the independent oracle for the closed-form designs: receiver
positions are an affine function of the free spacing parameters (mirrored
sub-arrays share one parameter), so each grid point is one channel build
plus a Hermitian eigensolve, dispatched to the numba/numpy kernels.
Iteration order is fixed and there is no randomness; ties are broken by the
smallest total spacing, then by grid index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channel import partition_block_arrays
from .geometry import (
    ArrayGeometry,
    SubArrayPartition,
    Waveband,
    centered_indices,
    principal_axes,
)

OBJECTIVE_EXACT = "exact"
OBJECTIVE_QUARTIC_SUBARRAY = "quartic-subarray"

MAX_GRID_POINTS = 1_000_000
_TIE_TOL = 1e-12

# Paper-default sweep: covers every tabulated receiver spacing with margin.
DEFAULT_MIN_LAM = 0.5
DEFAULT_MAX_LAM = 80.0
DEFAULT_STEP_LAM = 0.25


class GridSearchError(ValueError):
    """Degenerate grid specification."""


@dataclass(frozen=True)
class GridAxis:
    """One free spacing dimension, bounds and step in wavelength multiples."""

    min_lam: float = DEFAULT_MIN_LAM
    max_lam: float = DEFAULT_MAX_LAM
    step_lam: float = DEFAULT_STEP_LAM

    def __post_init__(self):
        if not (self.min_lam < self.max_lam):
            raise GridSearchError("grid axis needs min < max")
        if not self.step_lam > 0.0:
            raise GridSearchError("grid axis needs a positive step")

    def values(self) -> np.ndarray:
        n = int(np.floor((self.max_lam - self.min_lam) / self.step_lam + 1e-9)) + 1
        return self.min_lam + self.step_lam * np.arange(n)


@dataclass(frozen=True)
class GridSpec:
    axes: tuple[GridAxis, ...]
    objective_channel: str = OBJECTIVE_EXACT
    tie_break: str = "smallest-spacing"
    keep_trace: bool = False

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not 1 <= len(self.axes) <= 3:
            raise GridSearchError("grid search supports 1 to 3 free spacing dimensions")
        if self.objective_channel not in (OBJECTIVE_EXACT, OBJECTIVE_QUARTIC_SUBARRAY):
            raise GridSearchError(f"unknown objective channel {self.objective_channel!r}")
        if self.tie_break != "smallest-spacing":
            raise GridSearchError(f"unknown tie break {self.tie_break!r}")
        total = 1
        for axis in self.axes:
            total *= axis.values().size
        if total > MAX_GRID_POINTS:
            raise GridSearchError(f"grid has {total} points, above the "
                                  f"{MAX_GRID_POINTS} guard")


@dataclass(frozen=True, eq=False)
class GridResult:
    best_params_lam: tuple[float, ...]
    best_effective_rank: float
    trace: np.ndarray | None  # (N, K+1): params in lambda, then N_eff


def _uniform_problem(rx: ArrayGeometry, tx_center: np.ndarray, lam: float):
    """Affine receiver positions for a uniform template: free d1 (and d2 if 2-D)."""
    u1, u2 = principal_axes(rx.alpha, rx.beta)
    i1c = np.repeat(centered_indices(rx.n1), rx.n2)
    i2c = np.tile(centered_indices(rx.n2), rx.n1)
    base = np.tile(np.asarray(rx.center, dtype=float) - tx_center, (rx.size, 1))
    dirs = [lam * i1c[:, None] * u1[None, :]]
    if rx.n2 > 1:
        dirs.append(lam * i2c[:, None] * u2[None, :])
    block_starts = np.array([0, rx.size], dtype=np.int64)
    block_centers = (np.asarray(rx.center, dtype=float) - tx_center)[None, :]
    return base, np.array(dirs), block_starts, block_centers


def _partition_problem(p: SubArrayPartition, tx: ArrayGeometry, lam: float):
    """Affine positions for a partition: one free d1 per mirrored pair
    (or per sub-array when not symmetric); d2 stays fixed."""
    tx_center = np.asarray(tx.center, dtype=float)
    n = len(p.subarrays)
    if p.symmetric:
        groups = [(i, n - 1 - i) for i in range(n // 2)]
    else:
        groups = [(i,) for i in range(n)]
    sizes = [s.size for s in p.subarrays]
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    total = offsets[-1]
    base = np.empty((total, 3))
    dirs = np.zeros((len(groups), total, 3))
    for i, spec in enumerate(p.subarrays):
        u1, u2 = principal_axes(spec.alpha, spec.beta)
        i1c = np.repeat(centered_indices(spec.n1), spec.n2)
        i2c = np.tile(centered_indices(spec.n2), spec.n1)
        lo, hi = offsets[i], offsets[i + 1]
        base[lo:hi] = (np.asarray(spec.center, dtype=float) - tx_center
                       + spec.d2 * i2c[:, None] * u2[None, :])
        for k, group in enumerate(groups):
            if i in group:
                dirs[k, lo:hi] = lam * i1c[:, None] * u1[None, :]
    block_starts, block_centers = partition_block_arrays(tx, p)
    return base, dirs, block_starts, block_centers


def _cartesian(axes: tuple[GridAxis, ...]) -> np.ndarray:
    grids = np.meshgrid(*(axis.values() for axis in axes), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def grid_search(tx: ArrayGeometry, rx_template: ArrayGeometry | SubArrayPartition,
                w: Waveband, spec: GridSpec) -> GridResult:
    """Evaluate the effective rank of the selected channel model at every
    grid point and return the argmax (ties: smallest total spacing)."""
    lam = w.wavelength
    tx_center = np.asarray(tx.center, dtype=float)
    tx_local = _tx_local_positions(tx)
    if isinstance(rx_template, ArrayGeometry):
        base, dirs, bstarts, bcenters = _uniform_problem(rx_template, tx_center, lam)
        if spec.objective_channel == OBJECTIVE_QUARTIC_SUBARRAY:
            raise GridSearchError("quartic-subarray objective needs a partition template")
    else:
        base, dirs, bstarts, bcenters = _partition_problem(rx_template, tx, lam)
    if dirs.shape[0] != len(spec.axes):
        raise GridSearchError(f"template has {dirs.shape[0]} free spacing "
                              f"dimensions, grid spec has {len(spec.axes)}")

    points = _cartesian(spec.axes)
    model = (_kernels.MODEL_EXACT if spec.objective_channel == OBJECTIVE_EXACT
             else _kernels.MODEL_QUARTIC_SUBARRAY)
    neff = _kernels.grid_effective_rank(points, base, dirs, tx_local,
                                        w.wavenumber, model, bstarts, bcenters)
    best = float(neff.max())
    tied = np.flatnonzero(neff >= best - _TIE_TOL)
    totals = points[tied].sum(axis=1)
    winner = tied[np.lexsort((tied, totals))[0]]
    trace = np.column_stack([points, neff]) if spec.keep_trace else None
    return GridResult(
        best_params_lam=tuple(float(v) for v in points[winner]),
        best_effective_rank=float(neff[winner]),
        trace=trace,
    )


def _tx_local_positions(tx: ArrayGeometry) -> np.ndarray:
    u1, u2 = principal_axes(tx.alpha, tx.beta)
    i1c = np.repeat(centered_indices(tx.n1), tx.n2)
    i2c = np.tile(centered_indices(tx.n2), tx.n1)
    return tx.d1 * i1c[:, None] * u1[None, :] + tx.d2 * i2c[:, None] * u2[None, :]


def write_trace_csv(result: GridResult, path, axis_names: list[str] | None = None) -> None:
    """Full trace CSV: one row per grid point, params then N_eff."""
    if result.trace is None:
        raise GridSearchError("grid search was run without keep_trace")
    ndim = result.trace.shape[1] - 1
    names = axis_names or [f"param{k + 1}_lam" for k in range(ndim)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + ",neff\n")
        for row in result.trace:
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")

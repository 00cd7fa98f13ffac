"""Line-of-sight channel matrices: exact spherical-wave model and its
quartic-approximation factorization, for whole arrays and sub-array partitions.

The exact entry between receive element m and transmit element l is
exp(j*k0*d)/(4*pi*d) with d their distance. The quartic model factors the
channel as scale * e^{j*k0*|c_o|} * diag(f_rx) * P * diag(f_tx), a
second-order Taylor expansion of d about the center distance |c_o| that
keeps the squared-linear correction term; every factor entry is
unit-modulus. Phases are accumulated in double precision and reduced only
by the final complex exponential, since k0*|c_o| is large.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import (
    ArrayGeometry,
    DeploymentRegime,
    ElementLayout,
    GeometryError,
    SubArrayPartition,
    Waveband,
    classify_paraxial,
    expand_uniform,
)

MODEL_EXACT = "exact"
MODEL_QUARTIC = "quartic"
MODEL_QUARTIC_SUBARRAY = "quartic-subarray"


class ChannelError(ValueError):
    """Degenerate channel geometry (coincident elements or centers)."""


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Complex M x L channel with wavelength and model provenance."""

    entries: np.ndarray
    waveband: Waveband
    model_tag: str

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.complex128)
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise ChannelError("channel entries must form an M x L matrix")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def num_rx(self) -> int:
        return self.entries.shape[0]

    @property
    def num_tx(self) -> int:
        return self.entries.shape[1]

    def write_csv(self, path) -> None:
        """Export as CSV with header ``m,l,re,im``, 17 significant digits."""
        with open(path, "w", newline="") as fh:
            fh.write("m,l,re,im\n")
            for m in range(self.num_rx):
                for l in range(self.num_tx):
                    v = self.entries[m, l]
                    fh.write(f"{m},{l},{v.real:.17g},{v.imag:.17g}\n")


@dataclass(frozen=True, eq=False)
class QuarticFactors:
    """Unit-modulus factors of the quartic channel model.

    ``assemble()`` reproduces the channel entries as
    scale * center_phase * diag(f_rx) * p * diag(f_tx).
    """

    f_tx: np.ndarray  # (L,) unit modulus
    f_rx: np.ndarray  # (M,) unit modulus
    p: np.ndarray     # (M, L) unit modulus
    scale: float      # 1 / (4*pi*|c_o|)
    center_phase: complex  # e^{j*k0*|c_o|}

    def assemble(self) -> np.ndarray:
        return (self.scale * self.center_phase
                * (self.f_rx[:, None] * self.p * self.f_tx[None, :]))


def exact_channel(tx: ElementLayout, rx: ElementLayout, w: Waveband) -> ChannelMatrix:
    """Exact free-space channel between explicit element layouts."""
    diff = rx.positions[:, None, :] - tx.positions[None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    if np.any(d2 == 0.0):
        raise ChannelError("a transmit and a receive element coincide (zero distance)")
    entries = _kernels.exact_channel_entries(rx.positions, tx.positions, w.wavenumber)
    return ChannelMatrix(entries, w, MODEL_EXACT)


def _quartic_factors(tx_local: np.ndarray, rx_local: np.ndarray,
                     c_vec: np.ndarray, k0: float) -> QuarticFactors:
    cn2 = float(c_vec @ c_vec)
    if cn2 == 0.0:
        raise ChannelError("array centers coincide; quartic expansion undefined")
    cn = np.sqrt(cn2)
    cxz = np.array([c_vec[0], 0.0, c_vec[2]])
    ct = tx_local @ c_vec
    cr = rx_local @ c_vec
    ftx_phase = (k0 / (2.0 * cn)) * ((tx_local * tx_local).sum(axis=1)
                                     - 2.0 * ct - (tx_local @ cxz) ** 2 / cn2)
    frx_phase = (k0 / (2.0 * cn)) * ((rx_local * rx_local).sum(axis=1)
                                     + 2.0 * cr - (rx_local @ cxz) ** 2 / cn2)
    p_phase = (-k0 / cn) * (rx_local @ tx_local.T - np.outer(cr, ct) / cn2)
    return QuarticFactors(
        f_tx=np.exp(1j * ftx_phase),
        f_rx=np.exp(1j * frx_phase),
        p=np.exp(1j * p_phase),
        scale=1.0 / (4.0 * np.pi * cn),
        center_phase=complex(np.exp(1j * k0 * cn)),
    )


def _local_layout(geom: ArrayGeometry) -> np.ndarray:
    centered = ArrayGeometry(geom.n1, geom.n2, geom.d1, geom.d2,
                             (0.0, 0.0, 0.0), geom.alpha, geom.beta)
    return expand_uniform(centered).positions


def quartic_channel(tx: ArrayGeometry, rx: ArrayGeometry, w: Waveband,
                    paraxial_threshold: float = 0.1,
                    ) -> tuple[ChannelMatrix, QuarticFactors]:
    """Quartic-approximation channel between two uniform arrays.

    Warns (without failing) when the deployment is not paraxial at the given
    threshold, since the breakdown regime is deliberately probed by the
    experiments.
    """
    tx_layout = expand_uniform(tx)
    rx_layout = expand_uniform(rx)
    regime = classify_paraxial(tx_layout, rx_layout, paraxial_threshold)
    if regime is not DeploymentRegime.PARAXIAL:
        warnings.warn("quartic_channel applied outside the paraxial regime",
                      stacklevel=2)
    c_vec = np.asarray(rx.center, dtype=float) - np.asarray(tx.center, dtype=float)
    factors = _quartic_factors(_local_layout(tx), _local_layout(rx),
                               c_vec, w.wavenumber)
    return ChannelMatrix(factors.assemble(), w, MODEL_QUARTIC), factors


def subarray_channel(tx: ArrayGeometry, partition: SubArrayPartition,
                     w: Waveband, paraxial_threshold: float = 0.1) -> ChannelMatrix:
    """Vertical stack of per-sub-array quartic channels, in partition order.

    Each block uses its own center distance |c_o^i| in both the amplitude
    and the phase terms.
    """
    tx_layout = expand_uniform(tx)
    tx_local = _local_layout(tx)
    tx_center = np.asarray(tx.center, dtype=float)
    blocks = []
    for i, spec in enumerate(partition.subarrays):
        block_layout = expand_uniform(spec.as_array())
        try:
            regime = classify_paraxial(tx_layout, block_layout, paraxial_threshold)
        except GeometryError as exc:
            raise ChannelError(f"sub-array {i}: {exc}") from exc
        if regime is not DeploymentRegime.PARAXIAL:
            warnings.warn(f"sub-array {i} violates the paraxial predicate",
                          stacklevel=2)
        c_vec = np.asarray(spec.center, dtype=float) - tx_center
        rx_local = block_layout.positions - np.asarray(spec.center, dtype=float)
        factors = _quartic_factors(tx_local, rx_local, c_vec, w.wavenumber)
        blocks.append(factors.assemble())
    return ChannelMatrix(np.vstack(blocks), w, MODEL_QUARTIC_SUBARRAY)


def partition_block_arrays(tx: ArrayGeometry, partition: SubArrayPartition,
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Block start offsets and centers (relative to the tx center) for kernels."""
    counts = [s.size for s in partition.subarrays]
    starts = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    tx_center = np.asarray(tx.center, dtype=float)
    centers = np.array([np.asarray(s.center, dtype=float) - tx_center
                        for s in partition.subarrays])
    return starts, centers

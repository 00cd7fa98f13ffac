"""Antenna array geometry: uniform arrays, sub-array partitions, element layouts.

All lengths are SI meters internally; CLI/configs express lengths in
wavelength multiples. The transmitter convention is center at the origin
with zero rotation/tilt (array in the xz-plane); the receiver is placed by
its center vector, a rotation ``alpha`` about the z-axis applied to the
first principal direction and a tilt ``beta`` applied to the second.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s


class GeometryError(ValueError):
    """Invalid geometric configuration (degenerate or out of domain)."""


@dataclass(frozen=True)
class Waveband:
    """Carrier frequency with derived wavelength and wavenumber."""

    carrier_frequency: float  # Hz

    def __post_init__(self):
        if not self.carrier_frequency > 0.0:
            raise GeometryError("carrier frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @classmethod
    def from_ghz(cls, frequency_ghz: float) -> "Waveband":
        return cls(carrier_frequency=frequency_ghz * 1e9)


def _as_vec3(value) -> tuple[float, float, float]:
    v = tuple(float(x) for x in value)
    if len(v) != 3:
        raise GeometryError("expected a 3-vector")
    return v


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar uniform array: counts, spacings, center, rotation and tilt.

    ``n1``/``d1`` describe the first principal direction, ``n2``/``d2`` the
    second. ``alpha`` is the rotation and ``beta`` the tilt, in radians.
    """

    n1: int
    n2: int
    d1: float
    d2: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center))
        if self.n1 < 1 or self.n2 < 1:
            raise GeometryError("element counts must be >= 1")
        if not (self.d1 > 0.0 and self.d2 > 0.0):
            raise GeometryError("element spacings must be positive")

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    def with_spacings(self, d1: float, d2: float | None = None) -> "ArrayGeometry":
        return replace(self, d1=d1, d2=self.d2 if d2 is None else d2)


@dataclass(frozen=True)
class SubArraySpec:
    """One sub-array of a partitioned receiver (own center, counts, spacings)."""

    center: tuple[float, float, float]
    n1: int
    n2: int
    d1: float
    d2: float
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center))
        if self.n1 < 1 or self.n2 < 1:
            raise GeometryError("sub-array counts must be >= 1")
        if not (self.d1 > 0.0 and self.d2 > 0.0):
            raise GeometryError("sub-array spacings must be positive")

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    def as_array(self) -> ArrayGeometry:
        return ArrayGeometry(self.n1, self.n2, self.d1, self.d2,
                             self.center, self.alpha, self.beta)


_MIRROR_RTOL = 1e-9


@dataclass(frozen=True)
class SubArrayPartition:
    """Ordered sub-arrays forming one receiver.

    When ``symmetric`` the partition must mirror about the yz-plane:
    sub-array i and sub-array N_r+1-i have opposite center x-coordinates and
    identical counts, spacings, and remaining center coordinates.
    """

    subarrays: tuple[SubArraySpec, ...]
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "subarrays", tuple(self.subarrays))
        if not self.subarrays:
            raise GeometryError("partition must contain at least one sub-array")
        if self.symmetric:
            n = len(self.subarrays)
            if n % 2 != 0:
                raise GeometryError("symmetric partition needs an even sub-array count")
            scale = max(abs(s.center[0]) for s in self.subarrays) or 1.0
            for i in range(n // 2):
                a, b = self.subarrays[i], self.subarrays[n - 1 - i]
                ok = (
                    a.n1 == b.n1 and a.n2 == b.n2
                    and np.isclose(a.d1, b.d1, rtol=_MIRROR_RTOL)
                    and np.isclose(a.d2, b.d2, rtol=_MIRROR_RTOL)
                    and abs(a.center[0] + b.center[0]) <= _MIRROR_RTOL * scale
                    and np.isclose(a.center[1], b.center[1], rtol=_MIRROR_RTOL)
                    and np.isclose(a.center[2], b.center[2], rtol=_MIRROR_RTOL)
                )
                if not ok:
                    raise GeometryError(
                        f"sub-arrays {i} and {n - 1 - i} violate yz-plane mirror symmetry"
                    )

    @property
    def size(self) -> int:
        return sum(s.size for s in self.subarrays)


@dataclass(frozen=True, eq=False)
class ElementLayout:
    """Explicit element positions plus the flattening convention.

    ``blocks`` records (n1, n2) per sub-array; within each block elements are
    flattened row-major, u = i1*n2 + i2 (0-based indices).
    """

    positions: np.ndarray  # (N, 3) float
    blocks: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise GeometryError("positions must be an (N, 3) array")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        blocks = tuple((int(a), int(b)) for a, b in self.blocks)
        if sum(a * b for a, b in blocks) != pos.shape[0]:
            raise GeometryError("flattening blocks do not cover all elements")
        object.__setattr__(self, "blocks", blocks)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def center(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def flat_index(self, block: int, i1: int, i2: int) -> int:
        """Global index of element (i1, i2) of the given block."""
        n1, n2 = self.blocks[block]
        if not (0 <= i1 < n1 and 0 <= i2 < n2):
            raise GeometryError("principal indices out of range")
        offset = sum(a * b for a, b in self.blocks[:block])
        return offset + i1 * n2 + i2

    def grid_index(self, u: int) -> tuple[int, int, int]:
        """Inverse of :meth:`flat_index`: global index -> (block, i1, i2)."""
        if not 0 <= u < len(self):
            raise GeometryError("element index out of range")
        for b, (n1, n2) in enumerate(self.blocks):
            if u < n1 * n2:
                return b, u // n2, u % n2
            u -= n1 * n2
        raise GeometryError("unreachable")  # pragma: no cover


class DeploymentRegime(enum.Enum):
    PARAXIAL = "paraxial"
    NON_PARAXIAL = "non-paraxial"


def principal_axes(alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors of the two principal directions for rotation/tilt angles."""
    u1 = np.array([np.cos(alpha), np.sin(alpha), 0.0])
    u2 = np.array([-np.sin(beta) * np.sin(alpha),
                   np.sin(beta) * np.cos(alpha),
                   np.cos(beta)])
    return u1, u2


def centered_indices(n: int) -> np.ndarray:
    """Symmetric element indices i - (n-1)/2 for i = 0..n-1."""
    return np.arange(n, dtype=float) - (n - 1) / 2.0


def expand_uniform(array: ArrayGeometry) -> ElementLayout:
    """Expand a uniform array into explicit element positions.

    Element (i1, i2) sits at center + d1*i1c*u1 + d2*i2c*u2 with centered
    indices i_ac = i_a - (n_a-1)/2, flattened row-major.
    """
    u1, u2 = principal_axes(array.alpha, array.beta)
    i1c = centered_indices(array.n1)
    i2c = centered_indices(array.n2)
    local = (array.d1 * i1c[:, None, None] * u1[None, None, :]
             + array.d2 * i2c[None, :, None] * u2[None, None, :])
    pos = np.asarray(array.center) + local.reshape(array.size, 3)
    return ElementLayout(pos, blocks=((array.n1, array.n2),))


def expand_partition(partition: SubArrayPartition) -> ElementLayout:
    """Concatenate per-sub-array centered layouts, preserving partition order."""
    parts = [expand_uniform(s.as_array()) for s in partition.subarrays]
    pos = np.vstack([p.positions for p in parts])
    blocks = tuple((s.n1, s.n2) for s in partition.subarrays)
    return ElementLayout(pos, blocks=blocks)


def classify_paraxial(tx: ElementLayout, rx: ElementLayout,
                      ratio_threshold: float = 0.1) -> DeploymentRegime:
    """Classify a deployment by comparing array extents against the link distance.

    Paraxial iff every element of both arrays lies within
    ``ratio_threshold * |c_o|`` of its own array center, |c_o| being the
    distance between array centers.
    """
    if not 0.0 < ratio_threshold < 1.0:
        raise GeometryError("ratio threshold must lie in (0, 1)")
    c_o = rx.center - tx.center
    dist = float(np.linalg.norm(c_o))
    if dist == 0.0:
        raise GeometryError("array centers coincide; deployment is undefined")
    max_offset = 0.0
    for layout in (tx, rx):
        offsets = np.linalg.norm(layout.positions - layout.center, axis=1)
        max_offset = max(max_offset, float(offsets.max()))
    if max_offset / dist <= ratio_threshold:
        return DeploymentRegime.PARAXIAL
    return DeploymentRegime.NON_PARAXIAL

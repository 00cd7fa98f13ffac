"""Command-line front end and experiment harness.

Subcommands: ``design paraxial|two-sub|four-sub|chain``, ``evaluate``,
``grid-search``, and ``reproduce fig-elevation|fig-antennas|fig-spacing|
fig-ortho|table2``. Configuration is JSON (lengths in wavelength multiples,
frequency in GHz, angles in degrees); all numeric output is CSV, written in
deterministic sweep order. ``--plots`` renders each CSV to SVG. Exit codes:
0 success, 2 config error, 3 infeasible design.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .channel import exact_channel
from .geometry import (
    ArrayGeometry,
    GeometryError,
    SubArrayPartition,
    SubArraySpec,
    Waveband,
    classify_paraxial,
    expand_partition,
    expand_uniform,
)
from .grid_optimizer import (
    GridAxis,
    GridSpec,
    GridSearchError,
    OBJECTIVE_EXACT,
    OBJECTIVE_QUARTIC_SUBARRAY,
    grid_search,
    write_trace_csv,
)
from .nonparaxial_design import (
    NonParaxialSolution,
    SOLUTION_CSV_HEADER as NONPARAXIAL_CSV_HEADER,
    equal_partition_total_threshold,
    solution_csv_rows,
    solve_chain,
    solve_four_subarrays,
    solve_two_subarrays,
)
from .paraxial_design import (
    SOLUTION_CSV_HEADER as PARAXIAL_CSV_HEADER,
    solution_csv,
    solve_spacings,
)
from .spectral_metrics import SpectralReport, effective_rank_of, spectral_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


# ---------------------------------------------------------------------------
# configuration schema (documented in README.md)
# ---------------------------------------------------------------------------

def _check_keys(data: dict, allowed: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ConfigError(f"missing key {key!r} in {where}")
    return data[key]


@dataclass(frozen=True)
class GridConfig:
    min_lam: float = 0.5
    max_lam: float = 80.0
    step_lam: float = 0.25

    @classmethod
    def from_dict(cls, data: dict, where: str = "grid") -> "GridConfig":
        _check_keys(data, {"min_lam", "max_lam", "step_lam"}, where)
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> dict:
        return {"min_lam": self.min_lam, "max_lam": self.max_lam,
                "step_lam": self.step_lam}

    def axes(self, ndim: int) -> tuple[GridAxis, ...]:
        return tuple(GridAxis(self.min_lam, self.max_lam, self.step_lam)
                     for _ in range(ndim))


@dataclass(frozen=True)
class ArrayConfig:
    n1: int
    n2: int = 1
    d1_lam: float = 0.5
    d2_lam: float = 0.5
    center_lam: tuple[float, float, float] = (0.0, 0.0, 0.0)
    alpha_deg: float = 0.0
    beta_deg: float = 0.0

    @classmethod
    def from_dict(cls, data: dict, where: str = "array") -> "ArrayConfig":
        _check_keys(data, {"n1", "n2", "d1_lam", "d2_lam", "center_lam",
                           "alpha_deg", "beta_deg"}, where)
        kwargs = dict(data)
        if "center_lam" in kwargs:
            kwargs["center_lam"] = tuple(float(v) for v in kwargs["center_lam"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {"n1": self.n1, "n2": self.n2, "d1_lam": self.d1_lam,
                "d2_lam": self.d2_lam, "center_lam": list(self.center_lam),
                "alpha_deg": self.alpha_deg, "beta_deg": self.beta_deg}

    def to_geometry(self, lam: float) -> ArrayGeometry:
        return ArrayGeometry(
            self.n1, self.n2, self.d1_lam * lam, self.d2_lam * lam,
            tuple(c * lam for c in self.center_lam),
            math.radians(self.alpha_deg), math.radians(self.beta_deg))


@dataclass(frozen=True)
class SubArrayConfig:
    center_lam: tuple[float, float, float]
    n1: int
    n2: int = 1
    d1_lam: float = 0.5
    d2_lam: float = 0.5
    alpha_deg: float = 0.0
    beta_deg: float = 0.0

    @classmethod
    def from_dict(cls, data: dict, where: str = "subarray") -> "SubArrayConfig":
        _check_keys(data, {"center_lam", "n1", "n2", "d1_lam", "d2_lam",
                           "alpha_deg", "beta_deg"}, where)
        kwargs = dict(data)
        kwargs["center_lam"] = tuple(float(v) for v in _require(data, "center_lam", where))
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {"center_lam": list(self.center_lam), "n1": self.n1, "n2": self.n2,
                "d1_lam": self.d1_lam, "d2_lam": self.d2_lam,
                "alpha_deg": self.alpha_deg, "beta_deg": self.beta_deg}

    def to_spec(self, lam: float) -> SubArraySpec:
        return SubArraySpec(
            tuple(c * lam for c in self.center_lam), self.n1, self.n2,
            self.d1_lam * lam, self.d2_lam * lam,
            math.radians(self.alpha_deg), math.radians(self.beta_deg))


@dataclass(frozen=True)
class PartitionConfig:
    subarrays: tuple[SubArrayConfig, ...]
    symmetric: bool = False

    @classmethod
    def from_dict(cls, data: dict, where: str = "partition") -> "PartitionConfig":
        _check_keys(data, {"subarrays", "symmetric"}, where)
        subs = tuple(SubArrayConfig.from_dict(d, f"{where}.subarrays[{i}]")
                     for i, d in enumerate(_require(data, "subarrays", where)))
        return cls(subarrays=subs, symmetric=bool(data.get("symmetric", False)))

    def to_dict(self) -> dict:
        return {"subarrays": [s.to_dict() for s in self.subarrays],
                "symmetric": self.symmetric}

    def to_partition(self, lam: float) -> SubArrayPartition:
        return SubArrayPartition(tuple(s.to_spec(lam) for s in self.subarrays),
                                 symmetric=self.symmetric)


@dataclass(frozen=True)
class ElevationConfig:
    tx_counts: tuple[int, int] = (4, 4)
    rx_counts: tuple[int, int] = (4, 4)
    distance_lam: float = 256.0
    theta_deg: tuple[float, ...] = (0.0,)
    delta_t_lam: tuple[float, ...] = (0.5, 1.0, 2.0)
    grid: GridConfig = GridConfig(step_lam=0.5)

    @classmethod
    def from_dict(cls, data: dict, where: str = "elevation") -> "ElevationConfig":
        _check_keys(data, {"tx_counts", "rx_counts", "distance_lam", "theta_deg",
                           "delta_t_lam", "grid"}, where)
        kwargs = dict(data)
        for key in ("tx_counts", "rx_counts"):
            if key in kwargs:
                kwargs[key] = tuple(int(v) for v in kwargs[key])
        for key in ("theta_deg", "delta_t_lam"):
            if key in kwargs:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        if "grid" in kwargs:
            kwargs["grid"] = GridConfig.from_dict(kwargs["grid"], f"{where}.grid")
        cfg = cls(**kwargs)
        if not cfg.theta_deg or not cfg.delta_t_lam:
            raise ConfigError(f"{where}: sweep ranges must be non-empty")
        return cfg

    def to_dict(self) -> dict:
        return {"tx_counts": list(self.tx_counts), "rx_counts": list(self.rx_counts),
                "distance_lam": self.distance_lam, "theta_deg": list(self.theta_deg),
                "delta_t_lam": list(self.delta_t_lam), "grid": self.grid.to_dict()}


@dataclass(frozen=True)
class AntennasConfig:
    l1: int = 16
    delta_t_lam: float = 0.5
    distance_lam: float = 256.0
    m1_values: tuple[int, ...] = (16, 24, 28, 32, 40, 48, 56, 64)
    grid: GridConfig = GridConfig()

    @classmethod
    def from_dict(cls, data: dict, where: str = "antennas") -> "AntennasConfig":
        _check_keys(data, {"l1", "delta_t_lam", "distance_lam", "m1_values", "grid"}, where)
        kwargs = dict(data)
        if "m1_values" in kwargs:
            kwargs["m1_values"] = tuple(int(v) for v in kwargs["m1_values"])
        if "grid" in kwargs:
            kwargs["grid"] = GridConfig.from_dict(kwargs["grid"], f"{where}.grid")
        cfg = cls(**kwargs)
        if not cfg.m1_values:
            raise ConfigError(f"{where}: m1_values must be non-empty")
        if any(m % 4 != 0 for m in cfg.m1_values):
            raise ConfigError(f"{where}: m1_values must be multiples of 4 "
                              "(equal four-sub-array partition)")
        return cfg

    def to_dict(self) -> dict:
        return {"l1": self.l1, "delta_t_lam": self.delta_t_lam,
                "distance_lam": self.distance_lam,
                "m1_values": list(self.m1_values), "grid": self.grid.to_dict()}


@dataclass(frozen=True)
class SpacingConfig:
    l1: int = 16
    m1_table: int = 48
    m1_values: tuple[int, ...] = (16, 48)
    distance_lam: float = 256.0
    table_delta_t_lam: tuple[float, ...] = (0.5, 1.0, 2.0)
    fine_delta_t_lam: tuple[float, ...] = (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
    grid: GridConfig = GridConfig()

    @classmethod
    def from_dict(cls, data: dict, where: str = "spacing") -> "SpacingConfig":
        _check_keys(data, {"l1", "m1_table", "m1_values", "distance_lam",
                           "table_delta_t_lam", "fine_delta_t_lam", "grid"}, where)
        kwargs = dict(data)
        if "m1_values" in kwargs:
            kwargs["m1_values"] = tuple(int(v) for v in kwargs["m1_values"])
        for key in ("table_delta_t_lam", "fine_delta_t_lam"):
            if key in kwargs:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        if "grid" in kwargs:
            kwargs["grid"] = GridConfig.from_dict(kwargs["grid"], f"{where}.grid")
        cfg = cls(**kwargs)
        if not cfg.table_delta_t_lam:
            raise ConfigError(f"{where}: table_delta_t_lam must be non-empty")
        return cfg

    def to_dict(self) -> dict:
        return {"l1": self.l1, "m1_table": self.m1_table,
                "m1_values": list(self.m1_values),
                "distance_lam": self.distance_lam,
                "table_delta_t_lam": list(self.table_delta_t_lam),
                "fine_delta_t_lam": list(self.fine_delta_t_lam),
                "grid": self.grid.to_dict()}


@dataclass(frozen=True)
class OrthoConfig:
    l1: int = 16
    m1: int = 48
    delta_t_lam: float = 0.5
    distance_lam: float = 256.0
    grid: GridConfig = GridConfig()

    @classmethod
    def from_dict(cls, data: dict, where: str = "ortho") -> "OrthoConfig":
        _check_keys(data, {"l1", "m1", "delta_t_lam", "distance_lam", "grid"}, where)
        kwargs = dict(data)
        if "grid" in kwargs:
            kwargs["grid"] = GridConfig.from_dict(kwargs["grid"], f"{where}.grid")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {"l1": self.l1, "m1": self.m1, "delta_t_lam": self.delta_t_lam,
                "distance_lam": self.distance_lam, "grid": self.grid.to_dict()}


_STRATEGIES = ("paraxial", "two-sub", "four-sub", "chain")


@dataclass(frozen=True)
class DesignConfig:
    strategy: str
    tx: ArrayConfig
    rx: ArrayConfig | None = None              # paraxial template
    distance_lam: float | None = None          # y_o for sub-array strategies
    m1: int | None = None                      # two-sub total count
    subarray_counts: tuple[int, int] | None = None  # four-sub (outer, inner)
    chain_counts: tuple[int, ...] | None = None

    @classmethod
    def from_dict(cls, data: dict, where: str = "design") -> "DesignConfig":
        _check_keys(data, {"strategy", "tx", "rx", "distance_lam", "m1",
                           "subarray_counts", "chain_counts"}, where)
        strategy = _require(data, "strategy", where)
        if strategy not in _STRATEGIES:
            raise ConfigError(f"{where}: strategy must be one of {_STRATEGIES}")
        tx = ArrayConfig.from_dict(_require(data, "tx", where), f"{where}.tx")
        rx = (ArrayConfig.from_dict(data["rx"], f"{where}.rx")
              if "rx" in data else None)
        counts = (tuple(int(v) for v in data["subarray_counts"])
                  if "subarray_counts" in data else None)
        chain = (tuple(int(v) for v in data["chain_counts"])
                 if "chain_counts" in data else None)
        cfg = cls(strategy=strategy, tx=tx, rx=rx,
                  distance_lam=data.get("distance_lam"),
                  m1=data.get("m1"), subarray_counts=counts, chain_counts=chain)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.strategy == "paraxial":
            if self.rx is None:
                raise ConfigError("design.paraxial needs an rx template")
        else:
            if self.tx.n2 != 1:
                raise ConfigError(f"design.{self.strategy} needs a linear transmitter")
            if self.distance_lam is None:
                raise ConfigError(f"design.{self.strategy} needs distance_lam")
            if self.strategy == "two-sub" and self.m1 is None:
                raise ConfigError("design.two-sub needs m1")
            if self.strategy == "four-sub" and self.subarray_counts is None:
                raise ConfigError("design.four-sub needs subarray_counts")
            if self.strategy == "chain" and self.chain_counts is None:
                raise ConfigError("design.chain needs chain_counts")

    def to_dict(self) -> dict:
        out: dict = {"strategy": self.strategy, "tx": self.tx.to_dict()}
        if self.rx is not None:
            out["rx"] = self.rx.to_dict()
        if self.distance_lam is not None:
            out["distance_lam"] = self.distance_lam
        if self.m1 is not None:
            out["m1"] = self.m1
        if self.subarray_counts is not None:
            out["subarray_counts"] = list(self.subarray_counts)
        if self.chain_counts is not None:
            out["chain_counts"] = list(self.chain_counts)
        return out


@dataclass(frozen=True)
class EvaluateConfig:
    tx: ArrayConfig
    rx: ArrayConfig | None = None
    partition: PartitionConfig | None = None

    @classmethod
    def from_dict(cls, data: dict, where: str = "evaluate") -> "EvaluateConfig":
        _check_keys(data, {"tx", "rx", "partition"}, where)
        tx = ArrayConfig.from_dict(_require(data, "tx", where), f"{where}.tx")
        rx = ArrayConfig.from_dict(data["rx"], f"{where}.rx") if "rx" in data else None
        part = (PartitionConfig.from_dict(data["partition"], f"{where}.partition")
                if "partition" in data else None)
        if (rx is None) == (part is None):
            raise ConfigError(f"{where}: exactly one of rx or partition is required")
        return cls(tx=tx, rx=rx, partition=part)

    def to_dict(self) -> dict:
        out: dict = {"tx": self.tx.to_dict()}
        if self.rx is not None:
            out["rx"] = self.rx.to_dict()
        if self.partition is not None:
            out["partition"] = self.partition.to_dict()
        return out


@dataclass(frozen=True)
class GridSearchCommandConfig:
    tx: ArrayConfig
    rx_template: ArrayConfig | None = None
    partition_template: PartitionConfig | None = None
    objective: str = OBJECTIVE_EXACT
    axes: tuple[GridConfig, ...] = (GridConfig(),)
    trace: bool = False

    @classmethod
    def from_dict(cls, data: dict, where: str = "grid_search") -> "GridSearchCommandConfig":
        _check_keys(data, {"tx", "rx_template", "partition_template",
                           "objective", "axes", "trace"}, where)
        tx = ArrayConfig.from_dict(_require(data, "tx", where), f"{where}.tx")
        rx = (ArrayConfig.from_dict(data["rx_template"], f"{where}.rx_template")
              if "rx_template" in data else None)
        part = (PartitionConfig.from_dict(data["partition_template"],
                                          f"{where}.partition_template")
                if "partition_template" in data else None)
        if (rx is None) == (part is None):
            raise ConfigError(f"{where}: exactly one template is required")
        objective = data.get("objective", OBJECTIVE_EXACT)
        if objective not in (OBJECTIVE_EXACT, OBJECTIVE_QUARTIC_SUBARRAY):
            raise ConfigError(f"{where}: unknown objective {objective!r}")
        axes = tuple(GridConfig.from_dict(a, f"{where}.axes[{i}]")
                     for i, a in enumerate(data.get("axes", [{}])))
        return cls(tx=tx, rx_template=rx, partition_template=part,
                   objective=objective, axes=axes,
                   trace=bool(data.get("trace", False)))

    def to_dict(self) -> dict:
        out: dict = {"tx": self.tx.to_dict(), "objective": self.objective,
                     "axes": [a.to_dict() for a in self.axes], "trace": self.trace}
        if self.rx_template is not None:
            out["rx_template"] = self.rx_template.to_dict()
        if self.partition_template is not None:
            out["partition_template"] = self.partition_template.to_dict()
        return out


_SECTION_TYPES = {
    "elevation": ElevationConfig,
    "antennas": AntennasConfig,
    "spacing": SpacingConfig,
    "ortho": OrthoConfig,
    "design": DesignConfig,
    "evaluate": EvaluateConfig,
    "grid_search": GridSearchCommandConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    frequency_ghz: float = 28.0
    noise_power_w: float = 1.0
    total_power_w: float = 1.0
    paraxial_threshold: float = 0.1
    elevation: ElevationConfig | None = None
    antennas: AntennasConfig | None = None
    spacing: SpacingConfig | None = None
    ortho: OrthoConfig | None = None
    design: DesignConfig | None = None
    evaluate: EvaluateConfig | None = None
    grid_search: GridSearchCommandConfig | None = None

    @property
    def waveband(self) -> Waveband:
        return Waveband.from_ghz(self.frequency_ghz)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        scalars = ("frequency_ghz", "noise_power_w", "total_power_w",
                   "paraxial_threshold")
        _check_keys(data, set(scalars) | set(_SECTION_TYPES), "config")
        kwargs: dict = {}
        for key in scalars:
            if key in data:
                kwargs[key] = float(data[key])
        for key, typ in _SECTION_TYPES.items():
            if key in data:
                kwargs[key] = typ.from_dict(data[key], key)
        cfg = cls(**kwargs)
        if not 0.0 < cfg.paraxial_threshold < 1.0:
            raise ConfigError("paraxial_threshold must lie in (0, 1)")
        return cfg

    def to_dict(self) -> dict:
        out = {"frequency_ghz": self.frequency_ghz,
               "noise_power_w": self.noise_power_w,
               "total_power_w": self.total_power_w,
               "paraxial_threshold": self.paraxial_threshold}
        for key in _SECTION_TYPES:
            section = getattr(self, key)
            if section is not None:
                out[key] = section.to_dict()
        return out

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(text)


# ---------------------------------------------------------------------------
# shared experiment machinery
# ---------------------------------------------------------------------------

def worker_count() -> int:
    env = os.environ.get("NFMIMO_THREADS", "").strip()
    cpus = os.cpu_count() or 1
    if env:
        return max(1, min(int(env), cpus))
    return cpus


def _ordered_map(fn, items):
    """Map preserving item order. Thread pool only on the numpy backend;
    the numba kernels own the parallelism otherwise."""
    items = list(items)
    threads = worker_count()
    if _kernels.active_backend() == "numpy" and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _linear_tx(l1: int, delta_t_lam: float, lam: float) -> ArrayGeometry:
    d = delta_t_lam * lam
    return ArrayGeometry(l1, 1, d, d)


def _exact_channel_for(tx: ArrayGeometry, rx, w: Waveband):
    tx_layout = expand_uniform(tx)
    rx_layout = (expand_partition(rx) if isinstance(rx, SubArrayPartition)
                 else expand_uniform(rx))
    return exact_channel(tx_layout, rx_layout, w)


def _partition_with_spacings(sol: NonParaxialSolution,
                             spacings_lam: tuple[float, ...],
                             lam: float) -> SubArrayPartition:
    """Rebuild the solved partition with per-pair spacings replaced."""
    k = len(sol.counts)
    specs = list(sol.partition.subarrays)
    new = []
    for i, spec in enumerate(specs):
        pair = i if i < k else (2 * k - 1 - i)
        d = spacings_lam[pair] * lam
        new.append(SubArraySpec(spec.center, spec.n1, spec.n2, d, d,
                                spec.alpha, spec.beta))
    return SubArrayPartition(tuple(new), symmetric=True)


@dataclass(frozen=True)
class _DesignPoint:
    """Designs 1-4 evaluated at one (M1, delta_t) broadside-linear setup."""

    m1: int
    delta_t_lam: float
    neff: dict            # design number -> exact-channel N_eff
    spacings: dict        # design number -> per-pair spacings (lambda)
    solution: NonParaxialSolution


def _evaluate_designs(l1: int, m1: int, delta_t_lam: float, distance_lam: float,
                      grid: GridConfig, w: Waveband,
                      designs: tuple[int, ...] = (1, 2, 3, 4)) -> _DesignPoint:
    lam = w.wavelength
    tx = _linear_tx(l1, delta_t_lam, lam)
    y_o = distance_lam * lam
    sol = solve_four_subarrays(tx, m1 // 4, m1 // 4, y_o, w)
    neff: dict = {}
    spacings: dict = {}

    if sol.partition is not None:
        for design in (1, 2):
            if design not in designs:
                continue
            objective = OBJECTIVE_EXACT if design == 1 else OBJECTIVE_QUARTIC_SUBARRAY
            spec = GridSpec(axes=grid.axes(2), objective_channel=objective)
            result = grid_search(tx, sol.partition, w, spec)
            spacings[design] = result.best_params_lam
            best = _partition_with_spacings(sol, result.best_params_lam, lam)
            neff[design] = effective_rank_of(_exact_channel_for(tx, best, w))
        if 3 in designs:
            spacings[3] = tuple(d / lam for d in sol.spacings)
            neff[3] = effective_rank_of(_exact_channel_for(tx, sol.partition, w))
    else:
        for design in (1, 2, 3):
            if design in designs:
                spacings[design] = (math.nan, math.nan)
                neff[design] = math.nan

    if 4 in designs:
        rx_template = ArrayGeometry(m1, 1, lam, lam, center=(0.0, y_o, 0.0))
        par = solve_spacings(tx, rx_template, w)
        if par.feasible:
            spacings[4] = (par.d1_r / lam,)
            neff[4] = effective_rank_of(_exact_channel_for(tx, par.receiver, w))
        else:
            spacings[4] = (math.nan,)
            neff[4] = math.nan
    return _DesignPoint(m1=m1, delta_t_lam=delta_t_lam, neff=neff,
                        spacings=spacings, solution=sol)


# ---------------------------------------------------------------------------
# reproduce operations
# ---------------------------------------------------------------------------

def run_elevation_sweep(cfg: ExperimentConfig, out_dir: Path) -> list[Path]:
    """Paraxial-design vs grid-optimized effective rank over elevation angles."""
    section = cfg.elevation
    if section is None:
        raise ConfigError("config has no 'elevation' section")
    w = cfg.waveband
    lam = w.wavelength
    dist = section.distance_lam * lam

    def one(point):
        theta_deg, dt = point
        theta = math.radians(theta_deg)
        center = (0.0, dist * math.cos(theta), dist * math.sin(theta))
        tx = ArrayGeometry(section.tx_counts[0], section.tx_counts[1],
                           dt * lam, dt * lam)
        rx_template = ArrayGeometry(section.rx_counts[0], section.rx_counts[1],
                                    lam, lam, center=center)
        sol = solve_spacings(tx, rx_template, w)
        if sol.feasible:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                neff_design = effective_rank_of(_exact_channel_for(tx, sol.receiver, w))
            d1, d2 = sol.d1_r / lam, sol.d2_r / lam
        else:
            neff_design, d1, d2 = math.nan, math.nan, math.nan
        ndim = 1 if rx_template.n2 == 1 else 2
        spec = GridSpec(axes=section.grid.axes(ndim))
        result = grid_search(tx, rx_template, w, spec)
        best = list(result.best_params_lam) + [math.nan] * (2 - ndim)
        return (theta_deg, dt, d1, d2, neff_design,
                result.best_effective_rank, best[0], best[1])

    points = [(theta, dt) for theta in section.theta_deg
              for dt in section.delta_t_lam]
    rows = _ordered_map(one, points)
    path = out_dir / "fig_elevation.csv"
    with open(path, "w", newline="") as fh:
        fh.write("theta_deg,delta_t_lam,design_dr1_lam,design_dr2_lam,"
                 "neff_paraxial_design,neff_grid_exact,grid_dr1_lam,grid_dr2_lam\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return [path]


def run_antenna_sweep(cfg: ExperimentConfig, out_dir: Path) -> list[Path]:
    """Designs 1-4 effective rank versus the receiver element count."""
    section = cfg.antennas
    if section is None:
        raise ConfigError("config has no 'antennas' section")
    w = cfg.waveband
    threshold = equal_partition_total_threshold(section.l1)

    def one(m1):
        return _evaluate_designs(section.l1, m1, section.delta_t_lam,
                                 section.distance_lam, section.grid, w)

    points = _ordered_map(one, section.m1_values)
    path = out_dir / "fig_antennas.csv"
    with open(path, "w", newline="") as fh:
        fh.write("m1,neff_design1,neff_design2,neff_design3,neff_design4,"
                 "min_total_threshold\n")
        for pt in points:
            fh.write(f"{pt.m1},{_fmt(pt.neff[1])},{_fmt(pt.neff[2])},"
                     f"{_fmt(pt.neff[3])},{_fmt(pt.neff[4])},{_fmt(threshold)}\n")
    return [path]


def run_spacing_sweep(cfg: ExperimentConfig, out_dir: Path) -> list[Path]:
    """Effective rank versus transmit spacing, plus the receiver-spacing table."""
    section = cfg.spacing
    if section is None:
        raise ConfigError("config has no 'spacing' section")
    w = cfg.waveband
    table_dts = section.table_delta_t_lam

    def fine_one(point):
        m1, dt = point
        pt = _evaluate_designs(section.l1, m1, dt, section.distance_lam,
                               section.grid, w, designs=(3, 4))
        return (m1, dt, pt.neff[3], pt.neff[4])

    fine_points = [(m1, dt) for m1 in section.m1_values
                   for dt in section.fine_delta_t_lam]
    fine_rows = _ordered_map(fine_one, fine_points)

    def table_one(dt):
        return _evaluate_designs(section.l1, section.m1_table, dt,
                                 section.distance_lam, section.grid, w)

    table_rows = _ordered_map(table_one, table_dts)

    fig_path = out_dir / "fig_spacing.csv"
    with open(fig_path, "w", newline="") as fh:
        fh.write("m1,delta_t_lam,neff_design3,neff_design4\n")
        for row in fine_rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")

    table_path = out_dir / "table2.csv"
    with open(table_path, "w", newline="") as fh:
        fh.write("delta_t_lam,design1_dr1_lam,design1_dr2_lam,"
                 "design2_dr1_lam,design2_dr2_lam,design3_dr1_lam,"
                 "design3_dr2_lam,design4_dr_lam,"
                 "neff_design1,neff_design2,neff_design3,neff_design4\n")
        for pt in table_rows:
            row = [pt.delta_t_lam,
                   pt.spacings[1][0], pt.spacings[1][1],
                   pt.spacings[2][0], pt.spacings[2][1],
                   pt.spacings[3][0], pt.spacings[3][1],
                   pt.spacings[4][0],
                   pt.neff[1], pt.neff[2], pt.neff[3], pt.neff[4]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return [fig_path, table_path]


def run_ortho_map(cfg: ExperimentConfig, out_dir: Path) -> list[Path]:
    """Orthogonality-ratio maps (dB) of Designs 1-3 on the exact channel."""
    section = cfg.ortho
    if section is None:
        raise ConfigError("config has no 'ortho' section")
    w = cfg.waveband
    lam = w.wavelength
    tx = _linear_tx(section.l1, section.delta_t_lam, lam)
    pt = _evaluate_designs(section.l1, section.m1, section.delta_t_lam,
                           section.distance_lam, section.grid, w,
                           designs=(1, 2, 3))
    sol = pt.solution
    if sol.partition is None:
        raise ConfigError("ortho map needs a solvable four-sub-array partition")

    partitions = {
        1: _partition_with_spacings(sol, pt.spacings[1], lam),
        2: _partition_with_spacings(sol, pt.spacings[2], lam),
        3: sol.partition,
    }
    paths = []
    summary = []
    for design in (1, 2, 3):
        report = spectral_report(_exact_channel_for(tx, partitions[design], w),
                                 cfg.noise_power_w, cfg.total_power_w)
        path = out_dir / f"ortho_design{design}.csv"
        _write_matrix_csv(report.ortho_ratio_db, path)
        paths.append(path)
        summary.append((design, report.max_offdiagonal_db()))
    summary_path = out_dir / "ortho_summary.csv"
    with open(summary_path, "w", newline="") as fh:
        fh.write("design,max_offdiag_db\n")
        for design, value in summary:
            fh.write(f"{design},{_fmt(value)}\n")
    paths.append(summary_path)
    return paths


def _write_matrix_csv(matrix: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        for row in matrix:
            fh.write(",".join(f"{v:.6f}" for v in row) + "\n")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return f"{v:.12g}"


# ---------------------------------------------------------------------------
# plotting (optional SVG rendering of the CSV outputs)
# ---------------------------------------------------------------------------

def render_plots(csv_paths: list[Path]) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = []
    for path in csv_paths:
        svg = path.with_suffix(".svg")
        with open(path) as fh:
            first = fh.readline()
        has_header = any(c.isalpha() for c in first.split(",")[0])
        data = np.genfromtxt(path, delimiter=",", skip_header=1 if has_header else 0)
        fig, ax = plt.subplots(figsize=(6, 4))
        if not has_header and data.ndim == 2 and data.shape[0] == data.shape[1]:
            im = ax.imshow(data, cmap="viridis")
            fig.colorbar(im, ax=ax, label="dB")
        elif data.ndim == 2 and data.shape[1] >= 2:
            names = first.strip().split(",")
            for col in range(1, data.shape[1]):
                label = names[col] if has_header and col < len(names) else f"col{col}"
                ax.plot(data[:, 0], data[:, col], marker="o", label=label)
            ax.set_xlabel(names[0] if has_header else "x")
            ax.legend(fontsize=7)
            ax.grid(alpha=0.3)
        ax.set_title(path.stem)
        fig.savefig(svg, format="svg", bbox_inches="tight")
        plt.close(fig)
        out.append(svg)
    return out


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_design(cfg: ExperimentConfig, strategy: str, out_dir: Path) -> int:
    section = cfg.design
    if section is None:
        raise ConfigError("config has no 'design' section")
    if section.strategy != strategy:
        raise ConfigError(f"config design.strategy is {section.strategy!r}, "
                          f"command asked for {strategy!r}")
    w = cfg.waveband
    lam = w.wavelength
    tx = section.tx.to_geometry(lam)

    if strategy == "paraxial":
        rx_template = section.rx.to_geometry(lam)
        sol = solve_spacings(tx, rx_template, w)
        path = out_dir / "design_paraxial.csv"
        with open(path, "w", newline="") as fh:
            fh.write(PARAXIAL_CSV_HEADER + "\n")
            fh.write(solution_csv(tx, rx_template, w, sol) + "\n")
        print(f"wrote {path}")
        if not sol.feasible:
            for msg in sol.diagnostics:
                print(f"infeasible: {msg}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"delta_r = ({sol.d1_r / lam:.6g}, {sol.d2_r / lam:.6g}) lambda")
        return EXIT_OK

    y_o = section.distance_lam * lam
    if strategy == "two-sub":
        sol = solve_two_subarrays(tx, section.m1, y_o, w)
    elif strategy == "four-sub":
        outer, inner = section.subarray_counts
        sol = solve_four_subarrays(tx, outer, inner, y_o, w)
    else:
        sol = solve_chain(tx, list(section.chain_counts), y_o, w)
    path = out_dir / f"design_{strategy.replace('-', '_')}.csv"
    with open(path, "w", newline="") as fh:
        fh.write(NONPARAXIAL_CSV_HEADER + "\n")
        for row in solution_csv_rows(sol, w):
            fh.write(row + "\n")
    print(f"wrote {path}")
    if not sol.feasible:
        for msg in sol.diagnostics:
            print(f"infeasible: {msg}", file=sys.stderr)
        return EXIT_INFEASIBLE
    pairs = ", ".join(f"(x={x / lam:.6g}, d={d / lam:.6g})"
                      for x, d in zip(sol.centers_x, sol.spacings))
    print(f"pairs [lambda]: {pairs}")
    return EXIT_OK


def _cmd_evaluate(cfg: ExperimentConfig, out_dir: Path | None) -> int:
    section = cfg.evaluate
    if section is None:
        raise ConfigError("config has no 'evaluate' section")
    w = cfg.waveband
    lam = w.wavelength
    tx = section.tx.to_geometry(lam)
    rx = (section.rx.to_geometry(lam) if section.rx is not None
          else section.partition.to_partition(lam))
    tx_layout = expand_uniform(tx)
    rx_layout = (expand_partition(rx) if isinstance(rx, SubArrayPartition)
                 else expand_uniform(rx))
    regime = classify_paraxial(tx_layout, rx_layout, cfg.paraxial_threshold)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = spectral_report(exact_channel(tx_layout, rx_layout, w),
                                 cfg.noise_power_w, cfg.total_power_w)
    print(f"regime = {regime.value} (threshold {cfg.paraxial_threshold:g})")
    print(f"N_eff = {report.effective_rank:.6g}")
    print(f"rank = {report.rank_numeric}")
    print(f"capacity_equipower = {report.capacity_equipower:.6g} bit/s/Hz")
    print(f"capacity_waterfilling = {report.capacity_waterfilling:.6g} bit/s/Hz")
    if out_dir is not None:
        csv_path = out_dir / "evaluate.csv"
        with open(csv_path, "w", newline="") as fh:
            fh.write(SpectralReport.csv_header() + "\n")
            fh.write(report.csv_row("evaluate") + "\n")
        (out_dir / "evaluate.json").write_text(report.to_json("evaluate") + "\n")
        print(f"wrote {csv_path}")
    return EXIT_OK


def _cmd_grid_search(cfg: ExperimentConfig, out_dir: Path) -> int:
    section = cfg.grid_search
    if section is None:
        raise ConfigError("config has no 'grid_search' section")
    w = cfg.waveband
    lam = w.wavelength
    tx = section.tx.to_geometry(lam)
    template = (section.rx_template.to_geometry(lam)
                if section.rx_template is not None
                else section.partition_template.to_partition(lam))
    axes = tuple(GridAxis(a.min_lam, a.max_lam, a.step_lam) for a in section.axes)
    spec = GridSpec(axes=axes, objective_channel=section.objective,
                    keep_trace=section.trace)
    result = grid_search(tx, template, w, spec)
    path = out_dir / "grid_result.csv"
    names = [f"param{k + 1}_lam" for k in range(len(axes))]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + ",neff\n")
        fh.write(",".join(_fmt(v) for v in result.best_params_lam)
                 + f",{_fmt(result.best_effective_rank)}\n")
    print(f"wrote {path}")
    if section.trace:
        trace_path = out_dir / "grid_trace.csv"
        write_trace_csv(result, trace_path, names)
        print(f"wrote {trace_path}")
    print(f"best: {result.best_params_lam} lambda, N_eff = "
          f"{result.best_effective_rank:.6g}")
    return EXIT_OK


_REPRODUCE_TARGETS = {
    "fig-elevation": run_elevation_sweep,
    "fig-antennas": run_antenna_sweep,
    "fig-spacing": run_spacing_sweep,
    "fig-ortho": run_ortho_map,
    "table2": run_spacing_sweep,
}


def _cmd_reproduce(cfg: ExperimentConfig, target: str, out_dir: Path,
                   plots: bool) -> int:
    runner = _REPRODUCE_TARGETS[target]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        paths = runner(cfg, out_dir)
    if target == "table2":
        paths = [p for p in paths if p.name == "table2.csv"]
    for path in paths:
        print(f"wrote {path}")
    if plots:
        for svg in render_plots(paths):
            print(f"wrote {svg}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfmimo",
        description="Near-field LoS MIMO array placement design and experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="solve a placement design")
    p_design.add_argument("strategy", choices=_STRATEGIES)
    _common_io(p_design)

    p_eval = sub.add_parser("evaluate", help="spectral report of a geometry")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--out", default=None)

    p_grid = sub.add_parser("grid-search", help="exhaustive spacing search")
    _common_io(p_grid)

    p_rep = sub.add_parser("reproduce", help="rerun a numerical study")
    p_rep.add_argument("target", choices=sorted(_REPRODUCE_TARGETS))
    _common_io(p_rep)
    p_rep.add_argument("--plots", action="store_true",
                       help="also render SVG plots of the CSV outputs")
    return parser


def _common_io(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default="out", help="output directory")


def cli_entry(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        cfg = ExperimentConfig.load(args.config)
        out_dir = None
        if args.out is not None:
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "design":
            return _cmd_design(cfg, args.strategy, out_dir)
        if args.command == "evaluate":
            return _cmd_evaluate(cfg, out_dir)
        if args.command == "grid-search":
            return _cmd_grid_search(cfg, out_dir)
        return _cmd_reproduce(cfg, args.target, out_dir, args.plots)
    except (ConfigError, GridSearchError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> int:
    return cli_entry(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())

"""Spectral figures of merit: Gram matrix, effective rank, capacity, and the
orthogonality-ratio map.

Eigenvalues come from a Hermitian eigendecomposition of G = H*H; the
effective rank follows the singular-value entropy convention (sigma_i =
sqrt(lambda_i)), which attains its upper bound exactly when all mode gains
are equal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channel import ChannelMatrix

EIGENVALUE_CUTOFF = 1e-12  # relative to the largest eigenvalue
ORTHO_DB_FLOOR = -300.0

POLICY_EQUIPOWER = "equipower"
POLICY_WATERFILLING = "waterfilling"


class SpectralError(ValueError):
    """Degenerate spectrum or invalid power parameters."""


def _entries(h: ChannelMatrix | np.ndarray) -> np.ndarray:
    if isinstance(h, ChannelMatrix):
        return h.entries
    return np.asarray(h)


def gram(h: ChannelMatrix | np.ndarray) -> np.ndarray:
    """G = H^H H (L x L Hermitian)."""
    e = _entries(h)
    return e.conj().T @ e


def gram_eigenvalues(g: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian Gram matrix, descending, clamped to >= 0."""
    ev = np.linalg.eigvalsh(g)[::-1]
    return np.clip(ev, 0.0, None)


def numeric_rank(eigenvalues: np.ndarray) -> int:
    """Count of eigenvalues above the relative noise-floor cutoff."""
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size == 0:
        raise SpectralError("empty spectrum")
    top = ev.max()
    if top <= 0.0:
        return 0
    return int((ev > EIGENVALUE_CUTOFF * top).sum())


def effective_rank(eigenvalues: np.ndarray) -> float:
    """exp of the entropy of the normalized singular-value distribution."""
    ev = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    sigma = np.sqrt(ev)
    total = sigma.sum()
    if total <= 0.0:
        raise SpectralError("effective rank undefined for an all-zero spectrum")
    p = sigma[sigma > 0.0] / total
    return float(np.exp(-(p * np.log(p)).sum()))


def effective_rank_of(h: ChannelMatrix | np.ndarray) -> float:
    return effective_rank(gram_eigenvalues(gram(h)))


def waterfilling_powers(eigenvalues: np.ndarray, noise_power: float,
                        total_power: float) -> np.ndarray:
    """Optimal power allocation: P_i = max(0, mu - sigma^2/lambda_i), sum = P_T."""
    if not (noise_power > 0.0 and total_power > 0.0):
        raise SpectralError("noise and total power must be positive")
    ev = np.asarray(eigenvalues, dtype=float)
    r = numeric_rank(ev)
    if r == 0:
        raise SpectralError("waterfilling undefined for an all-zero spectrum")
    inv_gain = noise_power / ev[:r]  # ev sorted descending -> inv_gain ascending
    powers = np.zeros(ev.size)
    for active in range(r, 0, -1):
        level = (total_power + inv_gain[:active].sum()) / active
        if level > inv_gain[active - 1]:
            powers[:active] = level - inv_gain[:active]
            break
    return powers


def capacity(eigenvalues: np.ndarray, noise_power: float, total_power: float,
             policy: str = POLICY_EQUIPOWER) -> float:
    """Capacity sum log2(1 + P_i*lambda_i/sigma^2) under the chosen policy."""
    if not (noise_power > 0.0 and total_power > 0.0):
        raise SpectralError("noise and total power must be positive")
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size == 0:
        raise SpectralError("empty spectrum")
    if policy == POLICY_EQUIPOWER:
        r = numeric_rank(ev)
        if r == 0:
            raise SpectralError("capacity undefined for an all-zero spectrum")
        per_mode = total_power / r
        return float(np.log2(1.0 + per_mode * ev[:r] / noise_power).sum())
    if policy == POLICY_WATERFILLING:
        powers = waterfilling_powers(ev, noise_power, total_power)
        active = powers > 0.0
        return float(np.log2(1.0 + powers[active] * ev[active] / noise_power).sum())
    raise SpectralError(f"unknown power policy {policy!r}")


def orthogonality_ratio(g: np.ndarray) -> np.ndarray:
    """20*log10(|G(u,v)| / sqrt(G(u,u)*G(v,v))) with the diagonal pinned to 0 dB."""
    g = np.asarray(g)
    diag = np.real(np.diag(g))
    if np.any(diag <= 0.0):
        raise SpectralError("orthogonality ratio needs a strictly positive diagonal")
    denom = np.sqrt(np.outer(diag, diag))
    ratio = np.abs(g) / denom
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(ratio)
    db = np.maximum(db, ORTHO_DB_FLOOR)
    np.fill_diagonal(db, 0.0)
    return db


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Spectrum summary of one channel matrix."""

    eigenvalues: np.ndarray
    effective_rank: float
    rank_numeric: int
    capacity_equipower: float
    capacity_waterfilling: float
    ortho_ratio_db: np.ndarray

    def csv_row(self, geometry_id: str) -> str:
        return (f"{geometry_id},{self.effective_rank:.12g},{self.rank_numeric},"
                f"{self.capacity_equipower:.12g},{self.capacity_waterfilling:.12g}")

    @staticmethod
    def csv_header() -> str:
        return "geometry_id,n_eff,rank,capacity_equipower_bpshz,capacity_waterfilling_bpshz"

    def to_json(self, geometry_id: str) -> str:
        return json.dumps({
            "geometry_id": geometry_id,
            "effective_rank": self.effective_rank,
            "rank_numeric": self.rank_numeric,
            "capacity_equipower_bpshz": self.capacity_equipower,
            "capacity_waterfilling_bpshz": self.capacity_waterfilling,
            "eigenvalues": list(map(float, self.eigenvalues)),
            "max_offdiag_db": float(self.max_offdiagonal_db()),
        }, indent=2, sort_keys=True)

    def max_offdiagonal_db(self) -> float:
        db = self.ortho_ratio_db
        if db.shape[0] < 2:
            return ORTHO_DB_FLOOR
        mask = ~np.eye(db.shape[0], dtype=bool)
        return float(db[mask].max())


def spectral_report(h: ChannelMatrix | np.ndarray, noise_power: float = 1.0,
                    total_power: float = 1.0) -> SpectralReport:
    g = gram(h)
    ev = gram_eigenvalues(g)
    # eigensolver noise floor: sub-cutoff values count as zero throughout,
    # keeping effective_rank <= rank_numeric
    ev[ev <= EIGENVALUE_CUTOFF * ev.max()] = 0.0
    return SpectralReport(
        eigenvalues=ev,
        effective_rank=effective_rank(ev),
        rank_numeric=numeric_rank(ev),
        capacity_equipower=capacity(ev, noise_power, total_power, POLICY_EQUIPOWER),
        capacity_waterfilling=capacity(ev, noise_power, total_power, POLICY_WATERFILLING),
        ortho_ratio_db=orthogonality_ratio(g),
    )

"""Sub-array placement design for non-paraxial receivers.

A large receiver is split into mirrored sub-array pairs; each pair i is
described by the normalized center offset eta_i = 2*x_i*d1t/(lambda*|c_i|)
and the Dirichlet coefficient gamma_i of its own paraxial expansion. The
generalized orthogonality condition couples the pairs; matching zeros and
peak amplitudes of consecutive pairs yields the closed forms below (a
quadratic for d1t = lambda/2, a cubic solved by Cardano in general, and a
damped fixed-point iteration for longer chains).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    ArrayGeometry,
    GeometryError,
    SubArrayPartition,
    SubArraySpec,
    Waveband,
)
from .paraxial_design import compute_tau_gamma, dirichlet_ratio

# Strict count inequalities M1_i > gamma_i*(L1-1) are made deterministic on
# integers via ceil(. + EPS).
_COUNT_EPS = 1e-9

# Open-interval margin for root selection in (0, 2*d1t/lambda).
_ROOT_MARGIN = 1e-9

_CHAIN_TOL = 1e-10
_CHAIN_MAX_ITER = 10_000


@dataclass(frozen=True, eq=False)
class EtaGamma:
    """Per-sub-array coefficients of the generalized orthogonality condition."""

    eta_x: np.ndarray   # (Nr,)
    eta_z: np.ndarray   # (Nr,)
    gamma: np.ndarray   # (Nr, 2, 2)
    tau: np.ndarray     # (Nr, 2, 2)
    center_dist: np.ndarray  # (Nr,) |c_o^i|


@dataclass(frozen=True)
class NonParaxialSolution:
    """Solved sub-array centers/spacings with feasibility diagnostics.

    ``eta``/``gamma11``/``spacings``/``centers_x``/``counts`` hold one entry
    per mirrored pair, outermost first. ``partition`` is None when no
    geometric solution exists (no admissible root).
    """

    partition: SubArrayPartition | None
    eta: tuple[float, ...]
    gamma11: tuple[float, ...]
    spacings: tuple[float, ...]
    centers_x: tuple[float, ...]
    counts: tuple[int, ...]
    min_counts: tuple[int, ...]
    feasible: bool
    unique_root: bool
    diagnostics: tuple[str, ...]
    y_o: float
    delta_t: float


def compute_eta_gamma(tx: ArrayGeometry, partition: SubArrayPartition,
                      w: Waveband) -> EtaGamma:
    """Evaluate eta/gamma/tau for every sub-array of an arbitrary partition."""
    tx_center = np.asarray(tx.center, dtype=float)
    n = len(partition.subarrays)
    eta_x = np.empty(n)
    eta_z = np.empty(n)
    gamma = np.empty((n, 2, 2))
    tau = np.empty((n, 2, 2))
    dist = np.empty(n)
    for i, spec in enumerate(partition.subarrays):
        coeffs = compute_tau_gamma(tx, spec.as_array(), w)
        c_vec = np.asarray(spec.center, dtype=float) - tx_center
        cn = float(np.linalg.norm(c_vec))
        eta_x[i] = 2.0 * c_vec[0] * tx.d1 / (w.wavelength * cn)
        eta_z[i] = 2.0 * c_vec[2] * tx.d2 / (w.wavelength * cn)
        gamma[i] = coeffs.gamma
        tau[i] = coeffs.tau
        dist[i] = cn
    return EtaGamma(eta_x=eta_x, eta_z=eta_z, gamma=gamma, tau=tau,
                    center_dist=dist)


def nonparaxial_orthogonality_residual(tx: ArrayGeometry,
                                       partition: SubArrayPartition,
                                       w: Waveband) -> float:
    """Max normalized magnitude of the generalized orthogonality condition.

    Zero means the partition is orthogonal under the sub-array quartic model.
    """
    eg = compute_eta_gamma(tx, partition, w)
    weights = 1.0 / eg.center_dist ** 2
    norm = sum(wi * s.size for wi, s in zip(weights, partition.subarrays))
    worst = 0.0
    for du1 in range(-(tx.n1 - 1), tx.n1):
        for du2 in range(-(tx.n2 - 1), tx.n2):
            if du1 == 0 and du2 == 0:
                continue
            total = 0.0 + 0.0j
            for i, spec in enumerate(partition.subarrays):
                g = eg.gamma[i]
                g1 = g[0, 0] * du1 + g[0, 1] * du2
                g2 = g[1, 0] * du1 + g[1, 1] * du2
                phase = -math.pi * (eg.eta_x[i] * du1 + eg.eta_z[i] * du2)
                total += (weights[i] * complex(math.cos(phase), math.sin(phase))
                          * dirichlet_ratio(g1, spec.n1)
                          * dirichlet_ratio(g2, spec.n2))
            worst = max(worst, abs(total) / norm)
    return worst


def cubic_real_roots(a3: float, a2: float, a1: float, a0: float) -> list[float]:
    """Real roots of a3 x^3 + a2 x^2 + a1 x + a0 via Cardano's formula."""
    if a3 == 0.0:
        raise ValueError("leading cubic coefficient must be nonzero")
    b, c, d = a2 / a3, a1 / a3, a0 / a3
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    disc = -4.0 * p ** 3 - 27.0 * q * q
    scale = max(abs(4.0 * p ** 3), abs(27.0 * q * q), 1e-300)
    if abs(disc) < 1e-12 * scale:
        # repeated roots; exact multiple-root formulas
        if abs(p) < 1e-300:
            return [shift]
        return [3.0 * q / p + shift, -1.5 * q / p + shift]
    if disc > 0.0:
        # three distinct real roots (trigonometric form)
        m = 2.0 * math.sqrt(-p / 3.0)
        theta = math.acos(max(-1.0, min(1.0, 3.0 * q / (p * m)))) / 3.0
        return sorted(m * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift
                      for k in range(3))
    half_q = -q / 2.0
    root = math.sqrt(q * q / 4.0 + p ** 3 / 27.0)
    t = math.copysign(abs(half_q + root) ** (1.0 / 3.0), half_q + root) \
        + math.copysign(abs(half_q - root) ** (1.0 / 3.0), half_q - root)
    return [t + shift]


def four_subarray_cubic(m11: int, m12: int, s: float) -> tuple[float, float, float, float]:
    """Coefficients of the cubic in eta_1; s = (2*d1t/lambda)^2.

    Expanded from matching zeros and peak amplitudes of the two mirrored
    pair conditions (the lambda/2 case divides out the eta=1 root).
    """
    a = float(m11)
    b = float(m12)
    return (2.0 * (a + b),
            -(a + 4.0 * b),
            -2.0 * s * (a + b) + 2.5 * b,
            s * (a + 2.0 * b) - 0.5 * b)


def _bisect_roots(f, lo: float, hi: float, samples: int = 4096) -> list[float]:
    """All sign-change roots of f on (lo, hi) via dense scan + bisection."""
    xs = np.linspace(lo, hi, samples)
    vals = np.array([f(x) for x in xs])
    roots = []
    for i in range(samples - 1):
        va, vb = vals[i], vals[i + 1]
        if va == 0.0:
            roots.append(float(xs[i]))
            continue
        if va * vb < 0.0:
            a_, b_ = float(xs[i]), float(xs[i + 1])
            for _ in range(200):
                mid = 0.5 * (a_ + b_)
                if f(a_) * f(mid) <= 0.0:
                    b_ = mid
                else:
                    a_ = mid
            roots.append(0.5 * (a_ + b_))
    return roots


def _roots_in_range(roots: list[float], hi: float) -> list[float]:
    margin = _ROOT_MARGIN * hi
    return [r for r in roots if margin < r < hi - margin]


def _pair_geometry(eta: float, gamma: float, count: int, delta_t: float,
                   y_o: float, lam: float) -> tuple[float, float]:
    """(center x, spacing) of one mirrored pair from its eta/gamma."""
    two_dt = 2.0 * delta_t
    x = eta * lam * y_o / math.sqrt(two_dt ** 2 - (eta * lam) ** 2)
    cn = math.hypot(y_o, x)
    tau11 = y_o ** 2 / cn ** 2  # broadside line: tau11^i = 1 - x^2/|c|^2
    spacing = gamma * lam * cn / (tau11 * count * delta_t)
    return x, spacing


def _min_count(gamma: float, l1: int) -> int:
    return int(math.ceil(gamma * (l1 - 1) + _COUNT_EPS))


def _build_partition(centers_x, spacings, counts, y_o) -> SubArrayPartition:
    """Mirrored linear partition ordered left to right (outermost pair first)."""
    left = [SubArraySpec(center=(-x, y_o, 0.0), n1=m, n2=1, d1=d, d2=d)
            for x, d, m in zip(centers_x, spacings, counts)]
    right = [SubArraySpec(center=(x, y_o, 0.0), n1=m, n2=1, d1=d, d2=d)
             for x, d, m in reversed(list(zip(centers_x, spacings, counts)))]
    return SubArrayPartition(tuple(left + right), symmetric=True)


def _require_broadside_linear(tx: ArrayGeometry) -> None:
    if tx.n2 != 1:
        raise GeometryError("broadside sub-array design needs a linear transmitter")
    if tx.alpha != 0.0 or tx.beta != 0.0:
        raise GeometryError("broadside design assumes zero rotation and tilt")


def solve_two_subarrays(tx: ArrayGeometry, m1: int, y_o: float,
                        w: Waveband) -> NonParaxialSolution:
    """Two mirrored sub-arrays: gamma = |eta| = 1/2 gives the closed form
    |x| = y_o / sqrt((4*d1t/lambda)^2 - 1)."""
    _require_broadside_linear(tx)
    lam = w.wavelength
    delta_t = tx.d1
    diagnostics: list[str] = []
    if m1 % 2 != 0:
        diagnostics.append("M1 must be even for two mirrored sub-arrays")
    if m1 < tx.n1:
        diagnostics.append(f"M1={m1} < L1={tx.n1}")
    ratio = 4.0 * delta_t / lam
    if ratio <= 1.0:
        diagnostics.append("4*delta_t <= lambda: center offset is imaginary")
        return NonParaxialSolution(
            partition=None, eta=(0.5,), gamma11=(0.5,), spacings=(),
            centers_x=(), counts=(m1 // 2,), min_counts=(_min_count(0.5, tx.n1),),
            feasible=False, unique_root=True, diagnostics=tuple(diagnostics),
            y_o=y_o, delta_t=delta_t)

    x = y_o / math.sqrt(ratio ** 2 - 1.0)
    cn = math.hypot(y_o, x)
    tau11 = y_o ** 2 / cn ** 2
    spacing = lam * cn / (tau11 * m1 * delta_t)
    half = m1 // 2
    need = _min_count(0.5, tx.n1)
    if half < need:
        diagnostics.append(f"pair count {half} below minimum {need}")
    partition = _build_partition([x], [spacing], [half], y_o) if m1 % 2 == 0 else None
    return NonParaxialSolution(
        partition=partition, eta=(0.5,), gamma11=(0.5,),
        spacings=(spacing,), centers_x=(x,), counts=(half,),
        min_counts=(need,), feasible=not diagnostics, unique_root=True,
        diagnostics=tuple(diagnostics), y_o=y_o, delta_t=delta_t)


def _four_subarray_eta(m11: int, m12: int, delta_t: float, lam: float,
                       ) -> tuple[float | None, bool, list[str]]:
    """Root eta_1 of the pair-matching system, with uniqueness flag."""
    diagnostics: list[str] = []
    hi = 2.0 * delta_t / lam
    if abs(delta_t - lam / 2.0) <= 1e-12 * lam:
        m1 = 2.0 * (m11 + m12)
        eta = ((2.0 * m12 - m11) / (2.0 * m1)
               + math.sqrt(9.0 * m11 ** 2 + 16.0 * m11 * m12 + 16.0 * m12 ** 2)
               / (2.0 * m1))
        if 3 * m12 >= 4 * m11:
            diagnostics.append(
                f"3*M1_2={3 * m12} >= 4*M1_1={4 * m11}: eta >= 1, partition infeasible")
            return None, True, diagnostics
        return eta, True, diagnostics

    s = (2.0 * delta_t / lam) ** 2
    a3, a2, a1, a0 = four_subarray_cubic(m11, m12, s)
    roots = cubic_real_roots(a3, a2, a1, a0)
    in_range = _roots_in_range(roots, hi)
    if not in_range:
        # marginal-discriminant fallback: bracketed bisection over the interval
        def f(x):
            return ((a3 * x + a2) * x + a1) * x + a0
        in_range = _roots_in_range(_bisect_roots(f, _ROOT_MARGIN * hi,
                                                 hi * (1.0 - _ROOT_MARGIN)), hi)
    if not in_range:
        diagnostics.append("no root of the pair-matching cubic lies in (0, 2*delta_t/lambda)")
        return None, True, diagnostics
    unique = len(in_range) == 1
    physical = [r for r in in_range if 0.5 < r < 1.0]
    eta = physical[0] if physical else in_range[0]
    if not physical:
        diagnostics.append("selected root leaves no positive gamma/eta pair")
    return eta, unique, diagnostics


def solve_four_subarrays(tx: ArrayGeometry, m11: int, m12: int, y_o: float,
                         w: Waveband) -> NonParaxialSolution:
    """Four mirrored sub-arrays (counts m11 outer, m12 inner per side).

    Solves the cubic in |eta_1| (quadratic closed form at d1t = lambda/2),
    then converts eta -> centers and gamma -> spacings, flagging count and
    partition feasibility. Infeasibility is a value, not an error.
    """
    _require_broadside_linear(tx)
    if m11 < 1 or m12 < 1:
        raise GeometryError("sub-array counts must be >= 1")
    if y_o <= 0.0:
        raise GeometryError("receiver line offset y_o must be positive")
    lam = w.wavelength
    delta_t = tx.d1
    l1 = tx.n1
    counts = (m11, m12)
    total = 2 * (m11 + m12)

    eta1, unique, diagnostics = _four_subarray_eta(m11, m12, delta_t, lam)
    if eta1 is None:
        return NonParaxialSolution(
            partition=None, eta=(), gamma11=(), spacings=(), centers_x=(),
            counts=counts, min_counts=(), feasible=False, unique_root=unique,
            diagnostics=tuple(diagnostics), y_o=y_o, delta_t=delta_t)

    eta2 = eta1 - 0.5
    gamma1 = 1.0 - eta1
    gamma2 = eta2
    if eta2 <= 0.0 or gamma1 <= 0.0:
        diagnostics.append("root yields a non-positive gamma or eta; no geometry")
        return NonParaxialSolution(
            partition=None, eta=(eta1, eta2), gamma11=(gamma1, gamma2),
            spacings=(), centers_x=(), counts=counts, min_counts=(),
            feasible=False, unique_root=unique, diagnostics=tuple(diagnostics),
            y_o=y_o, delta_t=delta_t)

    x1, d1 = _pair_geometry(eta1, gamma1, m11, delta_t, y_o, lam)
    x2, d2 = _pair_geometry(eta2, gamma2, m12, delta_t, y_o, lam)
    min_counts = (_min_count(gamma1, l1), _min_count(gamma2, l1))
    if total < l1:
        diagnostics.append(f"total receiver count {total} < L1={l1}")
    if m11 < min_counts[0]:
        diagnostics.append(f"outer pair count {m11} below minimum {min_counts[0]}")
    if m12 < min_counts[1]:
        diagnostics.append(f"inner pair count {m12} below minimum {min_counts[1]}")
    partition = _build_partition([x1, x2], [d1, d2], [m11, m12], y_o)
    return NonParaxialSolution(
        partition=partition, eta=(eta1, eta2), gamma11=(gamma1, gamma2),
        spacings=(d1, d2), centers_x=(x1, x2), counts=counts,
        min_counts=min_counts, feasible=not diagnostics, unique_root=unique,
        diagnostics=tuple(diagnostics), y_o=y_o, delta_t=delta_t)


def _chain_seed(counts: list[int]) -> np.ndarray:
    """Paraxial-limit seed: sub-arrays tile one uniform array."""
    m1 = 2.0 * sum(counts)
    eta = np.empty(len(counts))
    before = 0.0
    for i, mi in enumerate(counts):
        eta[i] = (m1 - 2.0 * before - mi) / m1
        before += mi
    return eta


def solve_chain(tx: ArrayGeometry, counts: list[int] | tuple[int, ...],
                y_o: float, w: Waveband) -> NonParaxialSolution:
    """Generic even chain of mirrored sub-array pairs (counts per pair,
    outermost first), solved by damped fixed-point iteration.

    The amplitude-matching links force M1_i/(gamma_i*|c_i|^2) constant, so a
    single unknown eta_1 remains: gammas follow, the zero-matching chain
    propagates the remaining etas, and the tail boundary residual
    gamma_K - eta_K updates eta_1 under an adaptive damping factor. Seeded
    from the paraxial-limit solution.
    """
    _require_broadside_linear(tx)
    counts = [int(c) for c in counts]
    if not counts or any(c < 1 for c in counts):
        raise GeometryError("chain needs positive per-pair counts")
    if y_o <= 0.0:
        raise GeometryError("receiver line offset y_o must be positive")
    lam = w.wavelength
    delta_t = tx.d1
    l1 = tx.n1
    k = len(counts)
    hi = 2.0 * delta_t / lam
    lo_c = _ROOT_MARGIN * hi
    hi_c = hi * (1.0 - _ROOT_MARGIN)
    m = np.array(counts, dtype=float)

    def weight(eta_i: float) -> float:
        """1/|c_i|^2 as a function of the pair's eta."""
        e = min(max(eta_i, lo_c), hi_c)
        return (1.0 - (e * lam / (2.0 * delta_t)) ** 2) / y_o ** 2

    def propagate(eta1):
        """Gammas and chained etas for a trial eta_1; returns boundary residual."""
        eta = np.empty(k)
        gam = np.empty(k)
        eta[0] = eta1
        gam[0] = 1.0 - eta1
        w0 = weight(eta1)
        for i in range(1, k):
            # gamma_i depends on eta_i through |c_i|; inner scalar fixed point
            e = eta[i - 1] - gam[i - 1]  # start: gamma_i ~ 0
            for _ in range(200):
                g = gam[0] * m[i] * weight(e) / (m[0] * w0)
                e_new = eta[i - 1] - gam[i - 1] - g
                if abs(e_new - e) < 1e-14:
                    e = e_new
                    break
                e = e_new
            eta[i] = e
            gam[i] = gam[0] * m[i] * weight(e) / (m[0] * w0)
        return gam[k - 1] - eta[k - 1], eta, gam

    seed = _chain_seed(counts)
    eta1 = float(min(max(seed[0], lo_c), min(hi_c, 1.0 - 1e-12)))
    damp = 0.5
    converged = False
    residual, eta, gam = propagate(eta1)
    for _ in range(_CHAIN_MAX_ITER):
        if abs(residual) < _CHAIN_TOL:
            converged = True
            break
        trial = eta1 + damp * residual
        trial = min(max(trial, lo_c), min(hi_c, 1.0 - 1e-12))
        new_residual, new_eta, new_gam = propagate(trial)
        if abs(new_residual) < abs(residual):
            eta1, residual, eta, gam = trial, new_residual, new_eta, new_gam
            damp = min(damp * 1.2, 0.5)
        else:
            damp *= 0.5
            if damp < 1e-6:
                break

    diagnostics: list[str] = []
    if not converged:
        diagnostics.append("chain iteration did not converge")
        return NonParaxialSolution(
            partition=None, eta=tuple(eta), gamma11=tuple(gam), spacings=(),
            centers_x=(), counts=tuple(counts), min_counts=(), feasible=False,
            unique_root=False, diagnostics=tuple(diagnostics),
            y_o=y_o, delta_t=delta_t)

    if np.any(eta <= 0.0) or np.any(eta >= hi) or np.any(gam <= 0.0):
        diagnostics.append("converged chain leaves the admissible eta/gamma domain")
        return NonParaxialSolution(
            partition=None, eta=tuple(eta), gamma11=tuple(gam), spacings=(),
            centers_x=(), counts=tuple(counts), min_counts=(), feasible=False,
            unique_root=True, diagnostics=tuple(diagnostics),
            y_o=y_o, delta_t=delta_t)

    xs, ds, mins = [], [], []
    for i in range(k):
        x, d = _pair_geometry(float(eta[i]), float(gam[i]), counts[i],
                              delta_t, y_o, lam)
        xs.append(x)
        ds.append(d)
        mins.append(_min_count(float(gam[i]), l1))
    if 2 * sum(counts) < l1:
        diagnostics.append(f"total receiver count {2 * sum(counts)} < L1={l1}")
    for i in range(k):
        if counts[i] < mins[i]:
            diagnostics.append(f"pair {i + 1} count {counts[i]} below minimum {mins[i]}")
    partition = _build_partition(xs, ds, counts, y_o)
    return NonParaxialSolution(
        partition=partition, eta=tuple(map(float, eta)),
        gamma11=tuple(map(float, gam)), spacings=tuple(ds),
        centers_x=tuple(xs), counts=tuple(counts), min_counts=tuple(mins),
        feasible=not diagnostics, unique_root=True,
        diagnostics=tuple(diagnostics), y_o=y_o, delta_t=delta_t)


@dataclass(frozen=True)
class ParaxialLimitReport:
    """Solved spacings/centers against their paraxial-limit counterparts."""

    limit_spacing: float               # lambda*|c_o| / (M1*delta_t)
    solved_spacings: tuple[float, ...]
    spacing_rel_dev: tuple[float, ...]
    limit_centers: tuple[float, ...]
    solved_centers: tuple[float, ...]


def paraxial_limit_check(sol: NonParaxialSolution, tx: ArrayGeometry,
                         w: Waveband) -> ParaxialLimitReport:
    """Recompute the design under |c_o^i| -> |c_o| and tau_11^i -> 1.

    In that limit every pair shares the uniform spacing
    lambda*|c_o|/(M1*delta_t) and the pairs tile one contiguous array; the
    deviations quantify the non-paraxial correction.
    """
    if sol.partition is None:
        raise GeometryError("paraxial limit check needs a solved partition")
    m1_total = 2 * sum(sol.counts)
    limit_spacing = w.wavelength * sol.y_o / (m1_total * sol.delta_t)
    limit_centers = []
    before = 0
    for mi in sol.counts:
        limit_centers.append((m1_total - 2 * before - mi) * limit_spacing / 2.0)
        before += mi
    rel_dev = tuple(abs(d - limit_spacing) / limit_spacing for d in sol.spacings)
    return ParaxialLimitReport(
        limit_spacing=limit_spacing,
        solved_spacings=sol.spacings,
        spacing_rel_dev=rel_dev,
        limit_centers=tuple(limit_centers),
        solved_centers=sol.centers_x,
    )


def equal_partition_total_threshold(l1: int) -> float:
    """Minimum total receiver count for the equal four-sub-array design,
    1.7*(L1-1) (two-significant-digit constant from 4*(sqrt(41)-3)/8)."""
    return 1.7 * (l1 - 1)


SOLUTION_CSV_HEADER = "Nr,i,M1_i,x_center_lam,delta_r_lam,eta,gamma,feasible,min_count"


def solution_csv_rows(sol: NonParaxialSolution, w: Waveband) -> list[str]:
    """One row per mirrored pair (positive-x side), outermost first."""
    lam = w.wavelength
    nr = 2 * len(sol.counts)
    rows = []
    for i in range(len(sol.counts)):
        x = sol.centers_x[i] / lam if sol.centers_x else math.nan
        d = sol.spacings[i] / lam if sol.spacings else math.nan
        eta = sol.eta[i] if sol.eta else math.nan
        gam = sol.gamma11[i] if sol.gamma11 else math.nan
        mc = sol.min_counts[i] if sol.min_counts else 0
        rows.append(f"{nr},{i + 1},{sol.counts[i]},{x:.12g},{d:.12g},"
                    f"{eta:.12g},{gam:.12g},{int(sol.feasible)},{mc}")
    return rows

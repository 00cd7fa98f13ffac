"""Paraxial orthogonality algebra and spacing design.

The quartic channel's inner products over a uniform receiver collapse into
products of two Dirichlet-kernel ratios whose coefficients are the tau/gamma
quantities below. When at least one off-diagonal tau vanishes, setting
|gamma_aa| = 1 with enough receive elements zeroes every ratio, and the
spacings follow in closed form: delta_a^r * delta_a^t = lambda*|c_o| / (M_a*|tau_aa|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, GeometryError, Waveband

# Off-diagonal tau entries are "zero" below this, relative to max |tau|;
# exact zeros arise analytically in the alignment cases, near-zeros from
# numeric angles are accepted here.
TAU_ZERO_RTOL = 1e-9

# Condition values below this, relative to M1*M2, count as orthogonal.
CONDITION_RTOL = 1e-9

# Arguments closer than this to a multiple of M are evaluated by limit.
_SINGULARITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ParaxialCoefficients:
    """tau (2x2), the tau_1/tau_2 intermediates, and gamma (2x2).

    gamma_ab = tau_ab * M_a * delta_a^r * delta_b^t / (lambda*|c_o|): row a is
    the receive direction of the geometric sum, column b the transmit
    difference index, the pairing that reproduces the inner products of the
    parametrized P matrix (diagonals and vanishing off-diagonals are
    unaffected by the convention).
    """

    tau: np.ndarray
    tau1: float
    tau2: float
    gamma: np.ndarray


@dataclass(frozen=True)
class ParaxialSolution:
    """Solved receiver spacings with feasibility diagnostics."""

    d1_r: float
    d2_r: float
    feasible: bool
    required_counts: tuple[bool, bool]  # M1 >= n1*L1, M2 >= n2*L2
    zero_tau_offdiag: str               # "tau12" | "tau21" | "both" | "none"
    receiver: ArrayGeometry | None
    diagnostics: tuple[str, ...] = ()


def compute_tau_gamma(tx: ArrayGeometry, rx: ArrayGeometry, w: Waveband,
                      ) -> ParaxialCoefficients:
    """Orientation/offset coefficients of the paraxial orthogonality condition."""
    c_vec = np.asarray(rx.center, dtype=float) - np.asarray(tx.center, dtype=float)
    cn2 = float(c_vec @ c_vec)
    if cn2 == 0.0:
        raise GeometryError("array centers coincide")
    cn = math.sqrt(cn2)
    x_o, y_o, z_o = c_vec
    a, b = rx.alpha, rx.beta
    tau1 = (x_o * math.cos(a) + y_o * math.sin(a)) / cn2
    tau2 = (-x_o * math.sin(b) * math.sin(a) + y_o * math.sin(b) * math.cos(a)
            + z_o * math.cos(b)) / cn2
    tau = np.array([
        [math.cos(a) - x_o * tau1, -z_o * tau1],
        [-math.sin(b) * math.sin(a) - x_o * tau2, math.cos(b) - z_o * tau2],
    ])
    counts = (rx.n1, rx.n2)
    d_r = (rx.d1, rx.d2)
    d_t = (tx.d1, tx.d2)
    gamma = np.empty((2, 2))
    for ia in range(2):
        for ib in range(2):
            gamma[ia, ib] = (tau[ia, ib] * counts[ia] * d_r[ia] * d_t[ib]
                             / (w.wavelength * cn))
    return ParaxialCoefficients(tau=tau, tau1=tau1, tau2=tau2, gamma=gamma)


def dirichlet_ratio(x: float, m: int) -> float:
    """sin(pi*x)/sin(pi*x/m), evaluating the removable 0/0 limit (+-m) at
    arguments that are integer multiples of m."""
    r = x / m
    if abs(r - round(r)) < _SINGULARITY_TOL:
        return m * math.cos(math.pi * x) / math.cos(math.pi * r)
    return math.sin(math.pi * x) / math.sin(math.pi * x / m)


@dataclass(frozen=True)
class OrthogonalityCheck:
    orthogonal: bool
    violations: tuple[tuple[int, int, float], ...]  # (du1, du2, |value|)


def condition_value(gamma: np.ndarray, m1: int, m2: int,
                    du1: int, du2: int) -> float:
    """Closed-form inner product sum for one transmit index difference pair."""
    g1 = gamma[0, 0] * du1 + gamma[0, 1] * du2
    g2 = gamma[1, 0] * du1 + gamma[1, 1] * du2
    return dirichlet_ratio(g1, m1) * dirichlet_ratio(g2, m2)


def verify_orthogonality_condition(coeffs: ParaxialCoefficients,
                                   l1: int, l2: int, m1: int, m2: int,
                                   rel_tol: float = CONDITION_RTOL,
                                   ) -> OrthogonalityCheck:
    """Evaluate the double Dirichlet ratio at every difference pair != (0,0)."""
    limit = rel_tol * m1 * m2
    violations = []
    for du1 in range(-(l1 - 1), l1):
        for du2 in range(-(l2 - 1), l2):
            if du1 == 0 and du2 == 0:
                continue
            value = condition_value(coeffs.gamma, m1, m2, du1, du2)
            if abs(value) > limit:
                violations.append((du1, du2, abs(value)))
    return OrthogonalityCheck(orthogonal=not violations,
                              violations=tuple(violations))


def solve_spacings(tx: ArrayGeometry, rx_template: ArrayGeometry, w: Waveband,
                   periods: tuple[int, int] = (1, 1)) -> ParaxialSolution:
    """Receiver spacings making |gamma_aa| = n_a (default 1).

    Requires one vanishing off-diagonal tau and M_a >= n_a * L_a; failures
    are reported through the feasible flag rather than raised.
    """
    coeffs = compute_tau_gamma(tx, rx_template, w)
    tau = coeffs.tau
    c_vec = (np.asarray(rx_template.center, dtype=float)
             - np.asarray(tx.center, dtype=float))
    cn = float(np.linalg.norm(c_vec))
    n1, n2 = periods
    if n1 < 1 or n2 < 1:
        raise GeometryError("gamma periods must be positive integers")

    diagnostics: list[str] = []
    tau_scale = float(np.abs(tau).max())
    zero12 = abs(tau[0, 1]) <= TAU_ZERO_RTOL * tau_scale
    zero21 = abs(tau[1, 0]) <= TAU_ZERO_RTOL * tau_scale
    zero_offdiag = {(True, True): "both", (True, False): "tau12",
                    (False, True): "tau21", (False, False): "none"}[(zero12, zero21)]
    if zero_offdiag == "none":
        diagnostics.append("no off-diagonal tau vanishes; no explicit solution")

    counts_ok = (rx_template.n1 >= n1 * tx.n1, rx_template.n2 >= n2 * tx.n2)
    if not counts_ok[0]:
        diagnostics.append(f"M1={rx_template.n1} < {n1}*L1={n1 * tx.n1}")
    if not counts_ok[1]:
        diagnostics.append(f"M2={rx_template.n2} < {n2}*L2={n2 * tx.n2}")

    d_r = [math.nan, math.nan]
    receiver = None
    degenerate = False
    for axis, (count, d_t, n_per) in enumerate(
            [(rx_template.n1, tx.d1, n1), (rx_template.n2, tx.d2, n2)]):
        t = abs(tau[axis, axis])
        if t <= TAU_ZERO_RTOL * tau_scale:
            diagnostics.append(f"tau{axis + 1}{axis + 1} = 0 (degenerate deployment)")
            degenerate = True
            continue
        d_r[axis] = n_per * w.wavelength * cn / (count * t * d_t)

    feasible = (zero_offdiag != "none") and all(counts_ok) and not degenerate
    if feasible:
        receiver = rx_template.with_spacings(d_r[0], d_r[1])
    return ParaxialSolution(
        d1_r=d_r[0], d2_r=d_r[1], feasible=feasible,
        required_counts=counts_ok, zero_tau_offdiag=zero_offdiag,
        receiver=receiver, diagnostics=tuple(diagnostics),
    )


def solution_csv(tx: ArrayGeometry, rx_template: ArrayGeometry, w: Waveband,
                 sol: ParaxialSolution) -> str:
    """One CSV row: counts, spacings in wavelength multiples, feasibility."""
    lam = w.wavelength
    return (f"{rx_template.n1},{rx_template.n2},{tx.n1},{tx.n2},"
            f"{tx.d1 / lam:.12g},{tx.d2 / lam:.12g},"
            f"{sol.d1_r / lam:.12g},{sol.d2_r / lam:.12g},{int(sol.feasible)}")


SOLUTION_CSV_HEADER = ("M1,M2,L1,L2,delta_t1_lam,delta_t2_lam,"
                       "delta_r1_lam,delta_r2_lam,feasible")

import math

import numpy as np
import pytest

from nfmimo import (
    ArrayGeometry,
    DeploymentRegime,
    classify_paraxial,
    compute_tau_gamma,
    effective_rank_of,
    exact_channel,
    expand_uniform,
    gram,
    quartic_channel,
    solve_spacings,
    verify_orthogonality_condition,
)
from nfmimo.paraxial_design import (
    SOLUTION_CSV_HEADER,
    condition_value,
    dirichlet_ratio,
    solution_csv,
)


def rx_centered(n1, n2, d1, d2, center, alpha=0.0, beta=0.0):
    return ArrayGeometry(n1, n2, d1, d2, center, alpha, beta)


class TestTauGamma:
    def test_broadside_gives_identity(self, w, lam):
        tx = ArrayGeometry(4, 4, lam, lam)
        rx = rx_centered(8, 8, lam, lam, (0.0, 256 * lam, 0.0))
        c = compute_tau_gamma(tx, rx, w)
        np.testing.assert_allclose(c.tau, np.eye(2), atol=1e-15)

    def test_z_axis_alignment_zeroes_tau12(self, w, lam):
        tx = ArrayGeometry(4, 4, lam, lam)
        for alpha, beta in [(0.3, 0.7), (-1.0, 0.2), (0.9, -0.4)]:
            rx = rx_centered(8, 8, lam, lam, (40 * lam, 250 * lam, 0.0), alpha, beta)
            c = compute_tau_gamma(tx, rx, w)
            assert abs(c.tau[0, 1]) < 1e-15

    def test_x_axis_alignment_with_zero_rotation_zeroes_both(self, w, lam):
        tx = ArrayGeometry(4, 4, lam, lam)
        rx = rx_centered(8, 8, lam, lam, (0.0, 250 * lam, 40 * lam), 0.0, 0.5)
        c = compute_tau_gamma(tx, rx, w)
        assert abs(c.tau[0, 1]) < 1e-15
        assert abs(c.tau[1, 0]) < 1e-15
        assert c.tau[0, 0] == pytest.approx(1.0)

    def test_case_study_patterns_exchange_under_axis_swap(self, w, lam):
        # z-aligned deployments zero tau12 for any angles; x-aligned ones with
        # zero rotation zero both off-diagonals, and the diagonal formulas of
        # the two cases map onto each other when offset axis and angle swap
        tx = ArrayGeometry(2, 2, lam, lam)
        y = 200 * lam
        for p_lam, a in [(30.0, 0.25), (80.0, -0.6), (10.0, 1.1)]:
            p = p_lam * lam
            cn2 = p * p + y * y
            tau_z = compute_tau_gamma(
                tx, rx_centered(4, 4, lam, lam, (p, y, 0.0), a, 0.4), w).tau
            tau_x = compute_tau_gamma(
                tx, rx_centered(4, 4, lam, lam, (0.0, y, p), 0.0, a), w).tau
            expected = math.cos(a) - p * (p * math.cos(a) + y * math.sin(a)) / cn2
            assert tau_z[0, 0] == pytest.approx(expected, rel=1e-12)
            assert tau_x[1, 1] == pytest.approx(expected, rel=1e-12)
            assert tau_z[0, 1] == pytest.approx(0.0, abs=1e-15)
            assert tau_x[1, 0] == pytest.approx(0.0, abs=1e-15)

    def test_gamma_definition(self, w, lam):
        tx = ArrayGeometry(3, 5, 1.5 * lam, 0.5 * lam)
        rx = rx_centered(6, 7, 2 * lam, 3 * lam, (10 * lam, 300 * lam, -5 * lam),
                         0.2, 0.6)
        c = compute_tau_gamma(tx, rx, w)
        cn = np.linalg.norm(rx.center)
        counts = (rx.n1, rx.n2)
        d_r = (rx.d1, rx.d2)
        d_t = (tx.d1, tx.d2)
        for a in range(2):
            for b in range(2):
                expected = c.tau[a, b] * counts[a] * d_r[a] * d_t[b] / (lam * cn)
                assert c.gamma[a, b] == pytest.approx(expected, rel=1e-12)
        # diagonal entries are convention-independent
        assert c.gamma[0, 0] == pytest.approx(
            c.tau[0, 0] * rx.n1 * rx.d1 * tx.d1 / (lam * cn), rel=1e-12)


class TestDirichletRatio:
    def test_regular_values(self):
        assert dirichlet_ratio(0.5, 4) == pytest.approx(
            math.sin(0.5 * math.pi) / math.sin(0.5 * math.pi / 4))

    def test_removable_singularities(self):
        assert dirichlet_ratio(0.0, 7) == pytest.approx(7.0)
        # limit of sin(pi*x)/sin(pi*x/m) at x -> k*m is m*cos(pi*x)/cos(pi*k)
        assert dirichlet_ratio(4.0, 4) == pytest.approx(-4.0)
        assert dirichlet_ratio(-8.0, 4) == pytest.approx(4.0)
        # the limit continues the ratio from nearby regular points
        assert dirichlet_ratio(4.0 - 1e-7, 4) == pytest.approx(-4.0, abs=1e-5)

    def test_unit_denominator_when_single_element(self):
        # M = 1 collapses the ratio to 1 for every argument
        for x in (0.0, 0.3, 1.0, 2.7):
            assert dirichlet_ratio(x, 1) == pytest.approx(1.0)


class TestVerifyOrthogonality:
    def test_identity_gamma_is_orthogonal(self):
        from nfmimo.paraxial_design import ParaxialCoefficients
        coeffs = ParaxialCoefficients(tau=np.eye(2), tau1=0.0, tau2=0.0,
                                      gamma=np.eye(2))
        check = verify_orthogonality_condition(coeffs, 4, 4, 8, 8)
        assert check.orthogonal

    def test_zero_gamma_hits_maximum_everywhere(self):
        from nfmimo.paraxial_design import ParaxialCoefficients
        coeffs = ParaxialCoefficients(tau=np.zeros((2, 2)), tau1=0.0, tau2=0.0,
                                      gamma=np.zeros((2, 2)))
        check = verify_orthogonality_condition(coeffs, 3, 2, 6, 5)
        assert not check.orthogonal
        assert len(check.violations) == (2 * 3 - 1) * (2 * 2 - 1) - 1
        assert all(v == pytest.approx(30.0) for _, _, v in check.violations)

    def test_matches_brute_force_inner_products(self, w, lam):
        # oracle: inner products of the P matrix built from element positions
        import warnings
        tx = ArrayGeometry(3, 2, 1.5 * lam, lam)
        geometries = [
            rx_centered(5, 4, 2 * lam, 3 * lam, (30 * lam, 280 * lam, 15 * lam),
                        0.4, 0.6),
            rx_centered(6, 3, lam, 2 * lam, (0.0, 256 * lam, 40 * lam), -0.7, 0.2),
            rx_centered(4, 4, 3 * lam, lam, (-20 * lam, 300 * lam, 0.0), 0.0, 1.0),
        ]
        for rx in geometries:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                _, fac = quartic_channel(tx, rx, w)
            gamma = compute_tau_gamma(tx, rx, w).gamma
            p = fac.p
            for u in range(tx.size):
                for v in range(tx.size):
                    u1, u2 = divmod(u, tx.n2)
                    v1, v2 = divmod(v, tx.n2)
                    brute = np.sum(np.conj(p[:, u]) * p[:, v])
                    value = condition_value(gamma, rx.n1, rx.n2,
                                            u1 - v1, u2 - v2)
                    assert brute.real == pytest.approx(value, abs=1e-9 * rx.size)
                    assert abs(brute.imag) < 1e-9 * rx.size


class TestSolveSpacings:
    def test_design4_table_values(self, w, lam):
        tx_spacings = [0.5, 1.0, 2.0]
        expected = [10.6667, 5.3333, 2.6667]
        for dt, want in zip(tx_spacings, expected):
            tx = ArrayGeometry(16, 1, dt * lam, dt * lam)
            rx = rx_centered(48, 1, lam, lam, (0.0, 256 * lam, 0.0))
            sol = solve_spacings(tx, rx, w)
            assert sol.feasible
            assert sol.d1_r == pytest.approx(256 * lam / (48 * dt), rel=1e-9)
            assert sol.d1_r / lam == pytest.approx(want, abs=5e-5)

    def test_insufficient_counts_flagged(self, w, lam):
        tx = ArrayGeometry(16, 1, lam, lam)
        rx = rx_centered(8, 1, lam, lam, (0.0, 256 * lam, 0.0))
        sol = solve_spacings(tx, rx, w)
        assert not sol.feasible
        assert sol.required_counts[0] is False
        assert any("M1" in d for d in sol.diagnostics)

    def test_generic_oblique_deployment_infeasible(self, w, lam):
        tx = ArrayGeometry(2, 2, lam, lam)
        rx = rx_centered(4, 4, lam, lam, (30 * lam, 200 * lam, 50 * lam), 0.7, 0.4)
        sol = solve_spacings(tx, rx, w)
        assert sol.zero_tau_offdiag == "none"
        assert not sol.feasible

    def test_solution_satisfies_orthogonality_condition(self, w, lam):
        tx = ArrayGeometry(3, 2, 2 * lam, 2 * lam)
        rx = rx_centered(6, 4, lam, lam, (20 * lam, 256 * lam, 0.0), 0.3, 0.5)
        sol = solve_spacings(tx, rx, w)
        assert sol.feasible
        coeffs = compute_tau_gamma(tx, sol.receiver, w)
        assert abs(abs(coeffs.gamma[0, 0]) - 1.0) < 1e-9
        assert abs(abs(coeffs.gamma[1, 1]) - 1.0) < 1e-9
        check = verify_orthogonality_condition(coeffs, tx.n1, tx.n2,
                                               rx.n1, rx.n2)
        assert check.orthogonal

    def test_integer_period_designs_also_orthogonal(self, w, lam):
        # |gamma_aa| = n works as long as M_a covers n*L_a
        tx = ArrayGeometry(3, 2, 2 * lam, 2 * lam)
        rx = rx_centered(8, 6, lam, lam, (0.0, 256 * lam, 0.0))
        sol = solve_spacings(tx, rx, w, periods=(2, 3))
        assert sol.feasible
        coeffs = compute_tau_gamma(tx, sol.receiver, w)
        assert abs(coeffs.gamma[0, 0]) == pytest.approx(2.0, rel=1e-12)
        assert abs(coeffs.gamma[1, 1]) == pytest.approx(3.0, rel=1e-12)
        check = verify_orthogonality_condition(coeffs, tx.n1, tx.n2, rx.n1, rx.n2)
        assert check.orthogonal

    def test_quartic_gram_is_scaled_identity_for_solved_design(self, w, lam):
        tx = ArrayGeometry(4, 4, 2 * lam, 2 * lam)
        rx = rx_centered(4, 4, lam, lam, (0.0, 256 * lam, 0.0))
        sol = solve_spacings(tx, rx, w)
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            hq, _ = quartic_channel(tx, sol.receiver, w)
        g = gram(hq)
        lam0 = np.real(np.trace(g)) / g.shape[0]
        np.testing.assert_allclose(g, lam0 * np.eye(g.shape[0]),
                                   atol=1e-9 * lam0)

    def test_feasible_design_near_full_rank_within_strict_paraxial(self, w, lam):
        # geometry chosen to pass the 0.05 predicate after solving
        tx = ArrayGeometry(2, 2, 8 * lam, 8 * lam)
        rx = rx_centered(2, 2, lam, lam, (0.0, 256 * lam, 0.0))
        sol = solve_spacings(tx, rx, w)
        assert sol.feasible
        tx_layout = expand_uniform(tx)
        rx_layout = expand_uniform(sol.receiver)
        assert classify_paraxial(tx_layout, rx_layout, 0.05) is DeploymentRegime.PARAXIAL
        neff = effective_rank_of(exact_channel(tx_layout, rx_layout, w))
        assert neff >= 0.95 * tx.size

    def test_csv_row_schema(self, w, lam):
        tx = ArrayGeometry(16, 1, 0.5 * lam, 0.5 * lam)
        rx = rx_centered(48, 1, lam, lam, (0.0, 256 * lam, 0.0))
        sol = solve_spacings(tx, rx, w)
        assert SOLUTION_CSV_HEADER.split(",")[0] == "M1"
        row = solution_csv(tx, rx, w, sol).split(",")
        assert row[0] == "48" and row[2] == "16"
        assert float(row[6]) == pytest.approx(10.6667, abs=5e-5)
        assert row[8] == "1"

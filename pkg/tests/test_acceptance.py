"""Acceptance suite: one test per criterion, each printing a pass line
(run with ``pytest tests/test_acceptance.py -v -s`` to see them).

Shared heavy computations (the M1=48 design comparison with the default
half-quarter-wavelength grid) are module-scoped fixtures.
"""

import json
import math
import warnings

import numpy as np
import pytest

from nfmimo import (
    ArrayGeometry,
    GridAxis,
    GridSpec,
    effective_rank,
    effective_rank_of,
    exact_channel,
    expand_uniform,
    grid_search,
    quartic_channel,
    solve_four_subarrays,
    solve_spacings,
    spectral_report,
)
from nfmimo.experiments_cli import (
    GridConfig,
    _evaluate_designs,
    _exact_channel_for,
    _linear_tx,
    _partition_with_spacings,
    cli_entry,
)
from nfmimo.nonparaxial_design import (
    cubic_real_roots,
    equal_partition_total_threshold,
    four_subarray_cubic,
)
from nfmimo.spectral_metrics import (
    POLICY_EQUIPOWER,
    POLICY_WATERFILLING,
    capacity,
    gram,
    gram_eigenvalues,
    waterfilling_powers,
)

DIST_LAM = 256.0


def _report(criterion: str, message: str) -> None:
    print(f"[criterion {criterion}] PASS - {message}")


@pytest.fixture(scope="module")
def designs_m48(w):
    """Designs 1-3 at M1=48, L1=16, delta_t=lambda/2 with the default grid."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _evaluate_designs(16, 48, 0.5, DIST_LAM, GridConfig(), w,
                                 designs=(1, 2, 3))


class TestCriterion1ParaxialClosedForm:
    def test_design4_spacings_exact(self, w, lam):
        for dt, want in [(0.5, 10.6667), (1.0, 5.3333), (2.0, 2.6667)]:
            tx = _linear_tx(16, dt, lam)
            rx = ArrayGeometry(48, 1, lam, lam, center=(0, DIST_LAM * lam, 0))
            sol = solve_spacings(tx, rx, w)
            assert sol.feasible
            exact = DIST_LAM * lam / (48 * dt)
            assert sol.d1_r == pytest.approx(exact, rel=1e-9)
            assert sol.d1_r / lam == pytest.approx(want, abs=1e-4)
        _report("1", "paraxial closed form gives 10.6667/5.3333/2.6667 lambda "
                     "for delta_t = 0.5/1/2 lambda (1e-9 relative)")


class TestCriterion2FourSubArrayConstants:
    def test_eta_and_threshold(self, w, lam):
        tx = _linear_tx(16, 0.5, lam)
        sol = solve_four_subarrays(tx, 12, 12, DIST_LAM * lam, w)
        eta_exact = (1 + math.sqrt(41)) / 8
        assert sol.eta[0] == pytest.approx(eta_exact, rel=1e-12)
        assert sol.eta[0] == pytest.approx(0.925, abs=1e-3)
        assert equal_partition_total_threshold(16) == pytest.approx(25.5, abs=1e-12)
        _report("2", f"equal-partition |eta_1| = (1+sqrt(41))/8 = {sol.eta[0]:.6f} "
                     "(0.925 +- 1e-3); min-count threshold 1.7*(16-1) = 25.5")


class TestCriterion3TableDesign3:
    def test_solved_spacings(self, w, lam):
        expected = {0.5: (58.46, 24.48), 1.0: (6.30, 5.87), 2.0: (2.77, 2.72)}
        for dt, (r1, r2) in expected.items():
            tx = _linear_tx(16, dt, lam)
            sol = solve_four_subarrays(tx, 12, 12, DIST_LAM * lam, w)
            assert sol.feasible
            assert sol.spacings[0] / lam == pytest.approx(r1, abs=0.05)
            assert sol.spacings[1] / lam == pytest.approx(r2, abs=0.05)
        _report("3", "four-sub-array spacings hit (58.46, 24.48), (6.30, 5.87), "
                     "(2.77, 2.72) lambda within +-0.05")


class TestCriterion4ExactChannelRank:
    def test_full_rank_above_threshold_only(self, w, lam):
        tx = _linear_tx(16, 0.5, lam)
        high = solve_four_subarrays(tx, 12, 12, DIST_LAM * lam, w)
        neff_high = effective_rank_of(_exact_channel_for(tx, high.partition, w))
        assert neff_high >= 15.0
        low = solve_four_subarrays(tx, 4, 4, DIST_LAM * lam, w)
        assert not low.feasible  # 16 < 25.5 threshold
        neff_low = effective_rank_of(_exact_channel_for(tx, low.partition, w))
        assert neff_low < 15.0
        _report("4", f"exact-channel N_eff = {neff_high:.3f} >= 15 at M1=48; "
                     f"{neff_low:.3f} < 15 at M1=16")


class TestCriterion5OrthogonalityMaps:
    def test_all_offdiagonals_below_minus_10db(self, w, lam, designs_m48):
        tx = _linear_tx(16, 0.5, lam)
        sol = designs_m48.solution
        worst = {}
        for design in (1, 2, 3):
            part = (sol.partition if design == 3 else
                    _partition_with_spacings(sol, designs_m48.spacings[design], lam))
            rep = spectral_report(_exact_channel_for(tx, part, w))
            worst[design] = rep.max_offdiagonal_db()
            assert worst[design] <= -10.0
            assert np.all(np.diag(rep.ortho_ratio_db) == 0.0)
            # near-full rank for all three designs at M1=48
            assert designs_m48.neff[design] >= 15.0
        _report("5", "orthogonality maps at M1=48: max off-diagonal "
                     + ", ".join(f"design {d}: {v:.1f} dB" for d, v in worst.items()))


class TestCriterion6ElevationStudy:
    def test_broadside_design_vs_grid_limit(self, w, lam):
        # theta = 0, delta_t = 2 lambda: the paraxial design reaches near-full rank
        tx = ArrayGeometry(4, 4, 2 * lam, 2 * lam)
        rx = ArrayGeometry(4, 4, lam, lam, center=(0, DIST_LAM * lam, 0))
        sol = solve_spacings(tx, rx, w)
        assert sol.feasible
        neff_design = effective_rank_of(_exact_channel_for(tx, sol.receiver, w))
        assert neff_design >= 15.0

        # delta_t = lambda/2: no receiver spacing reaches near-full rank
        tx_half = ArrayGeometry(4, 4, 0.5 * lam, 0.5 * lam)
        spec = GridSpec(axes=(GridAxis(0.5, 80.0, 0.5), GridAxis(0.5, 80.0, 0.5)))
        result = grid_search(tx_half, rx, w, spec)
        assert result.best_effective_rank < 15.0
        _report("6", f"theta=0: paraxial design N_eff = {neff_design:.3f} >= 15 at "
                     f"delta_t=2 lambda; grid optimum {result.best_effective_rank:.3f}"
                     " < 15 at delta_t=lambda/2")


class TestCriterion7PropertySuite:
    def test_effective_rank_bounds_on_random_channels(self, rng):
        l = 6
        for _ in range(1000):
            m = int(rng.integers(l, 12))
            h = rng.normal(size=(m, l)) + 1j * rng.normal(size=(m, l))
            neff = effective_rank(gram_eigenvalues(gram(h)))
            assert 1.0 - 1e-12 <= neff <= l + 1e-9
        q, _ = np.linalg.qr(rng.normal(size=(12, l)) + 1j * rng.normal(size=(12, l)))
        assert effective_rank(gram_eigenvalues(gram(q))) == pytest.approx(l, abs=1e-9)
        _report("7a", "1 <= N_eff <= L on 1000 random channels; orthonormal "
                      "columns attain L")

    def test_quartic_vs_exact_on_paraxial_family(self, w, lam):
        # parallel-array deployments (the paper's geometry family), apertures
        # <= |c_o|/20, off-axis centers to 0.2|c_o|
        rng = np.random.default_rng(42)
        c = DIST_LAM
        worst_phase = worst_neff = 0.0
        for _ in range(12):
            n1, n2 = int(rng.integers(2, 5)), int(rng.integers(1, 5))
            m1, m2 = int(rng.integers(2, 6)), int(rng.integers(1, 5))
            cap = c / 20
            spacing = lambda n: rng.uniform(0.5, cap / max(1, n - 1) / 1.4)
            xo, zo = rng.uniform(-0.2 * c, 0.2 * c, 2)
            yo = math.sqrt(c ** 2 - xo ** 2 - zo ** 2)
            tx = ArrayGeometry(n1, n2, spacing(n1) * lam, spacing(n2) * lam)
            rx = ArrayGeometry(m1, m2, spacing(m1) * lam, spacing(m2) * lam,
                               center=(xo * lam, yo * lam, zo * lam))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                hq, _ = quartic_channel(tx, rx, w)
            he = exact_channel(expand_uniform(tx), expand_uniform(rx), w)
            worst_phase = max(worst_phase,
                              float(np.abs(np.angle(hq.entries / he.entries)).max()))
            na, nb = effective_rank_of(hq), effective_rank_of(he)
            worst_neff = max(worst_neff, abs(na - nb) / nb)
        assert worst_phase < 0.05
        assert worst_neff < 0.01
        _report("7b", f"quartic vs exact: worst phase {worst_phase:.4f} rad < 0.05, "
                      f"worst N_eff rel diff {worst_neff:.2e} < 1%")

    def test_far_field_limit(self, w, lam):
        tx = ArrayGeometry(4, 4, lam / 2, lam / 2)
        rx = ArrayGeometry(4, 4, lam / 2, lam / 2, center=(0, 1e6 * lam, 0))
        neff = effective_rank_of(exact_channel(expand_uniform(tx),
                                               expand_uniform(rx), w))
        assert neff <= 1.1
        _report("7c", f"far-field 4x4 pair at 1e6 lambda: N_eff = {neff:.4f} <= 1.1")

    def test_cardano_bisection_agreement(self):
        rng = np.random.default_rng(99)
        agreements = 0
        for _ in range(100):
            m11 = int(rng.integers(2, 30))
            m12 = int(rng.integers(2, 30))
            dt = float(rng.uniform(0.3, 4.0))
            a3, a2, a1, a0 = four_subarray_cubic(m11, m12, (2 * dt) ** 2)

            def f(x):
                return ((a3 * x + a2) * x + a1) * x + a0

            cardano = sorted(r for r in cubic_real_roots(a3, a2, a1, a0)
                             if 1e-9 < r < 2 * dt - 1e-9)
            xs = np.linspace(1e-9, 2 * dt - 1e-9, 20001)
            vals = f(xs)
            marks = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
            bisected = []
            for i in marks:
                a_, b_ = xs[i], xs[i + 1]
                for _ in range(100):
                    mid = 0.5 * (a_ + b_)
                    if f(a_) * f(mid) <= 0:
                        b_ = mid
                    else:
                        a_ = mid
                bisected.append(0.5 * (a_ + b_))
            assert len(cardano) == len(bisected)
            for r, o in zip(cardano, sorted(bisected)):
                assert r == pytest.approx(o, abs=1e-9)
                assert abs(f(r)) < 1e-9 * max(abs(a3), abs(a0), 1.0)
                agreements += 1
        assert agreements > 50
        _report("7d", f"Cardano and bisection agree to 1e-9 on {agreements} roots "
                      "over 100 random instances; back-substitution < 1e-9")

    def test_grid_refinement_and_convergence(self, w, lam):
        tx = ArrayGeometry(4, 1, 8 * lam, 8 * lam)
        rx = ArrayGeometry(8, 1, lam, lam, center=(0, DIST_LAM * lam, 0))
        target = DIST_LAM / 64.0
        best = []
        for step in (0.25, 0.125, 0.0625):
            result = grid_search(tx, rx, w,
                                 GridSpec(axes=(GridAxis(0.5, 6.0, step),)))
            assert abs(result.best_params_lam[0] - target) <= step + 0.02
            best.append(result.best_effective_rank)
        assert best[1] >= best[0] - 1e-12
        assert best[2] >= best[1] - 1e-12
        _report("7e", "grid refinement lambda/4 -> lambda/16 is monotone and "
                      f"stays within one step of the closed form {target} lambda")

    def test_waterfilling_properties(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 8))
            ev = np.sort(rng.uniform(1e-3, 10.0, size=n))[::-1]
            noise = float(rng.uniform(0.1, 2.0))
            total = float(rng.uniform(0.1, 5.0))
            p = waterfilling_powers(ev, noise, total)
            inv = noise / ev
            active = p > 0
            levels = p[active] + inv[active]
            assert np.ptp(levels) <= 1e-9 * levels.max()
            if np.any(~active):
                assert inv[~active].min() >= levels.max() - 1e-9
            wf = capacity(ev, noise, total, POLICY_WATERFILLING)
            eq = capacity(ev, noise, total, POLICY_EQUIPOWER)
            assert wf >= eq - 1e-12
        _report("7f", "waterfilling satisfies KKT complementarity and dominates "
                      "equipower on 50 random spectra")


class TestCriterion8Determinism:
    def test_reproduce_table2_byte_identical(self, tmp_path):
        config = {
            "frequency_ghz": 28.0,
            "spacing": {
                "l1": 16, "m1_table": 48, "m1_values": [48],
                "distance_lam": DIST_LAM,
                "table_delta_t_lam": [0.5, 2.0],
                "fine_delta_t_lam": [0.5, 2.0],
                "grid": {"min_lam": 0.5, "max_lam": 80.0, "step_lam": 2.0},
            },
        }
        cfg_path = tmp_path / "table2.json"
        cfg_path.write_text(json.dumps(config))
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert cli_entry(["reproduce", "table2", "--config", str(cfg_path),
                              "--out", str(out)]) == 0
            outs.append((out / "table2.csv").read_bytes())
        assert outs[0] == outs[1]
        _report("8", f"reproduce table2 twice -> byte-identical CSV "
                     f"({len(outs[0])} bytes)")

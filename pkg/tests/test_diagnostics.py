import numpy as np
import pytest

import oracles
from ergolab.core import Partition
from ergolab.diagnostics import (
    DiagnosticReport,
    ea_statistic,
    default_pair_family,
    factor_rwm_statistic,
    fiber_half_set,
    k_property_check,
    product_set,
    relative_mixing_statistic,
    rwm_verdict,
    vlb_statistic,
    vlb_zero_entropy,
    vwb_statistic,
)
from ergolab.errors import DimensionError, ParameterError
from ergolab.metrics import lcs_length
from ergolab.systems import (
    BernoulliShift,
    SkewProduct,
    cell_driven_cocycle,
    frozen_cocycle,
    random_rotation_cocycle,
)

BASE = BernoulliShift([0.5, 0.5])
HALF8 = fiber_half_set(2, 8)


def rotation_ext(steps, m=8):
    return SkewProduct(BASE, cell_driven_cocycle(Partition.identity(2), m, steps=list(steps)))


@pytest.fixture(scope="module")
def period2():
    return np.tile(np.array([0, 1]), 2000)


class TestSetHelpers:
    def test_product_set(self):
        table = product_set([0], [1, 3], 2, 4)
        assert table.shape == (2, 4)
        assert table.sum() == 2
        assert table[0, 1] and table[0, 3]

    def test_fiber_half_set(self):
        table = fiber_half_set(3, 4, half=1)
        assert np.array_equal(table.sum(axis=1), [2, 2, 2])
        assert table[:, 2:].all()
        with pytest.raises(ParameterError):
            fiber_half_set(3, 4, half=2)

    def test_default_pair_family_shapes(self):
        ext = rotation_ext([1, 2])
        pairs = default_pair_family(ext)
        assert len(pairs) == 2
        for c, d in pairs:
            assert c.shape == (2, 8) and d.shape == (2, 8)


class TestEaStatistic:
    def test_identity_cocycle_keeps_exact_gap(self):
        """A frozen fiber pins the halves statistic at exactly 3/16."""
        ext = SkewProduct(BASE, frozen_cocycle(2, 8))
        val = ea_statistic(ext, HALF8, HALF8, 64, 2, seed=5)
        assert val == pytest.approx(0.1875, abs=1e-12)
        assert val == pytest.approx(float(oracles.frozen_halves_gap(8)), abs=1e-12)

    def test_constant_rotation_matches_offset_law(self):
        c_mask = np.zeros(8, dtype=bool)
        c_mask[:4] = True
        ext = rotation_ext([6, 6])
        val = ea_statistic(ext, HALF8, HALF8, 64, 2, seed=5)
        ref = oracles.ea_rotation_pair_limit(8, 6, 6, c_mask, c_mask, horizon=64)
        assert val == pytest.approx(ref, abs=1e-12)
        assert val == pytest.approx(0.03125, abs=1e-12)

    def test_mixing_rotation_tracks_offset_law(self):
        """Two-step walks only match the enumerated limit to sampling noise."""
        c_mask = np.zeros(8, dtype=bool)
        c_mask[:4] = True
        for steps in [(1, 2), (5, 2)]:
            ext = rotation_ext(steps)
            val = ea_statistic(ext, HALF8, HALF8, 64, 2, seed=5)
            ref = oracles.ea_rotation_pair_limit(8, steps[0], steps[1], c_mask, c_mask, horizon=64)
            assert val == pytest.approx(ref, abs=0.02)

    def test_whole_space_pair_is_exactly_zero(self):
        ext = rotation_ext([1, 2])
        full = product_set(range(2), range(8), 2, 8)
        assert ea_statistic(ext, full, full, 16, 2, seed=3) == 0.0

    def test_validation(self):
        ext = rotation_ext([1, 2])
        with pytest.raises(ParameterError):
            ea_statistic(ext, HALF8, HALF8, 0, 2)
        with pytest.raises(DimensionError):
            ea_statistic(ext, np.ones((3, 3)), HALF8, 8, 1)


class TestRwmVerdict:
    def test_random_rotation_cocycle_mixes(self):
        spec = random_rotation_cocycle(Partition.identity(2), 8, seed=5)
        assert sorted(spec.steps.tolist()) == [1, 2]
        ext = SkewProduct(BASE, spec)
        rep = rwm_verdict(ext, L_schedule=(64, 256), M=2,
                          sample_length=1 << 15, seed=1, n_anchors=96)
        assert rep.verdict
        assert all(v < 0.05 for v in rep.values.values())

    def test_frozen_cocycle_fails_with_pinned_value(self):
        ext = SkewProduct(BASE, frozen_cocycle(2, 8))
        rep = rwm_verdict(ext, L_schedule=(16, 64), M=2,
                          sample_length=1 << 14, seed=1, n_anchors=96)
        assert not rep.verdict
        assert rep.values["pair_0_min_ea"] == pytest.approx(0.1875, abs=1e-12)
        assert rep.values["pair_1_min_ea"] == pytest.approx(0.1875, abs=1e-12)

    def test_trace_covers_full_schedule_without_early_stop(self):
        spec = random_rotation_cocycle(Partition.identity(2), 8, seed=5)
        ext = SkewProduct(BASE, spec)
        rep = rwm_verdict(ext, L_schedule=(16, 64), M=1, sample_length=1 << 13,
                          seed=1, n_anchors=48, early_stop=False)
        assert len(rep.trace) == 2 * 2
        assert {row["L"] for row in rep.trace} == {16, 64}
        assert set(rep.trace[0]) == {"pair", "L", "ea"}

    def test_empty_schedule_rejected(self):
        ext = SkewProduct(BASE, frozen_cocycle(2, 8))
        with pytest.raises(ParameterError):
            rwm_verdict(ext, L_schedule=())


class TestFactorRwm:
    def test_frozen_coordinate_table_is_enumerable(self):
        """With the identity cocycle the statistic is a finite moment sum
        independent of the averaging horizon: E[u^2]^2 - (E[u]^2)^2."""
        ext = SkewProduct(BASE, frozen_cocycle(2, 4))
        coord = np.tile(np.arange(4.0), (2, 1))
        for n_steps in (4, 32):
            val = factor_rwm_statistic(ext, coord, coord, n_steps,
                                       sample_length=1 << 14, seed=2)
            assert val == pytest.approx(7.1875, abs=1e-12)

    def test_constant_function_gives_zero(self):
        ext = SkewProduct(BASE, frozen_cocycle(2, 4))
        ones = np.ones((2, 4))
        assert factor_rwm_statistic(ext, ones, ones, 8, sample_length=1 << 14, seed=2) == 0.0

    def test_rotation_cocycle_decays(self):
        spec = random_rotation_cocycle(Partition.identity(2), 8, seed=5)
        ext = SkewProduct(BASE, spec)
        half = HALF8.astype(float)
        near = factor_rwm_statistic(ext, half, half, 4, sample_length=1 << 14, seed=3)
        far = factor_rwm_statistic(ext, half, half, 256, sample_length=1 << 14, seed=3)
        assert far < near

    def test_validation(self):
        ext = SkewProduct(BASE, frozen_cocycle(2, 4))
        with pytest.raises(ParameterError):
            factor_rwm_statistic(ext, np.ones((2, 4)), np.ones((2, 4)), 0)


class TestConditionalLawChecks:
    def test_iid_is_very_weak_bernoulli(self, iid_traj):
        good_mass, worst, verdict = vwb_statistic(iid_traj, 6, 6, 0.1)
        assert verdict
        assert good_mass > 0.9

    def test_periodic_orbit_fails_both(self, period2):
        good_mass, worst, verdict = vwb_statistic(period2, 4, 2, 0.1)
        assert not verdict
        assert good_mass == 0.0
        assert worst == pytest.approx(0.5, abs=0.01)
        _, worst_f, verdict_f = vlb_statistic(period2, 4, 2, 0.1)
        assert not verdict_f
        # one index shift realigns the alternating blocks up to one symbol
        assert worst_f == pytest.approx(0.125, abs=0.01)

    def test_periodic_orbit_passes_at_loose_eps(self, period2):
        good_mass, worst, verdict = vlb_statistic(period2, 4, 2, 0.3)
        assert verdict
        assert good_mass == pytest.approx(1.0)
        assert worst == 0.0

    def test_occupancy_floor_leaves_mass_unresolved(self, period2):
        rep = vwb_statistic(period2, 4, 2, 0.1, occupancy_floor=10**9)
        assert not rep.verdict
        assert rep.unresolved_mass == pytest.approx(1.0)
        assert rep.n_resolved == 0
        assert any("unresolved" in f for f in rep.flags)

    def test_trace_accounts_for_every_window(self, period2):
        rep = vwb_statistic(period2, 4, 2, 0.1)
        windows = period2.size - 6 + 1
        assert sum(row["count"] for row in rep.trace) == windows
        assert rep.n_pasts == len(rep.trace)

    def test_parameter_validation(self, period2):
        with pytest.raises(ParameterError):
            vwb_statistic(period2, 0, 2, 0.1)
        with pytest.raises(ParameterError):
            vwb_statistic(period2, 4, 2, 1.5)


class TestZeroEntropyVlb:
    def test_periodic_orbit(self, period2):
        tight = vlb_zero_entropy(period2, 4, 0.1)
        assert not tight.verdict
        assert tight.clique_size == 1
        assert tight.good_mass == pytest.approx(0.5, abs=0.01)
        loose = vlb_zero_entropy(period2, 4, 0.3)
        assert loose.verdict
        assert loose.clique_size == 2

    def test_rotation_coding_blocks_form_one_clique(self, sturmian_traj):
        rep = vlb_zero_entropy(sturmian_traj.labels, 32, 0.25)
        assert rep.verdict
        assert rep.good_mass == pytest.approx(1.0)
        assert rep.clique_size == rep.support == 64

    def test_clique_is_pairwise_close(self, sturmian_traj):
        rep = vlb_zero_entropy(sturmian_traj.labels[:200_000], 32, 0.25)
        accepted = [row["word"] for row in rep.trace if row["accepted"]]
        assert len(accepted) == rep.clique_size
        for i in range(0, len(accepted), 7):
            for j in range(i + 1, len(accepted), 11):
                fbar = 1.0 - lcs_length(accepted[i], accepted[j]) / 32
                assert fbar < 0.25

    def test_support_guard(self, iid_traj):
        with pytest.raises(ParameterError):
            vlb_zero_entropy(iid_traj.labels[:100_000], 20, 0.25)

    def test_mass_never_exceeds_one(self, period2):
        rep = vlb_zero_entropy(period2, 4, 0.3)
        assert 0.0 <= rep.good_mass <= 1.0 + 1e-12


class TestKPropertyCheck:
    def test_iid_satisfies_both_conditions(self, iid_traj):
        rep = k_property_check(iid_traj, 4, 2, 8)
        assert rep.verdict and rep.cond_growth and rep.cond_remote

    def test_lhs_values_are_plain_conditional_entropies(self, iid_traj):
        from ergolab.entropy import conditional_block_entropy

        sample = iid_traj.labels[:200_000]
        rep = k_property_check(sample, 4, 2, 8)
        assert rep.growth_lhs == conditional_block_entropy(sample, 4, 8).value
        assert rep.remote_lhs == conditional_block_entropy(sample, 4, 7, gap=1).value
        assert rep.h_hat == conditional_block_entropy(sample, 1, 8).value

    def test_rotation_coding_fails_remote_condition(self, sturmian_traj):
        rep = k_property_check(sturmian_traj.labels[:300_000], 4, 2, 8)
        assert not rep.verdict
        assert rep.cond_growth
        assert not rep.cond_remote

    def test_periodic_orbit_fails(self, period2):
        rep = k_property_check(period2, 4, 2, 8)
        assert not rep.verdict

    def test_window_ordering_validation(self, period2):
        with pytest.raises(ParameterError):
            k_property_check(period2, 4, 9, 8)

    def test_report_unpacks(self, period2):
        verdict, growth, remote = k_property_check(period2, 4, 2, 8)
        assert isinstance(verdict, bool)


class TestRelativeMixing:
    def test_two_forms_agree_on_random_tables(self):
        spec = random_rotation_cocycle(Partition.identity(2), 8, seed=5)
        ext = SkewProduct(BASE, spec)
        rng = np.random.default_rng(55)
        for _ in range(10):
            f = rng.random((2, 8))
            g = rng.random((2, 8))
            res = relative_mixing_statistic(ext, f, g, 12, sample_length=1 << 13,
                                            seed=6, n_anchors=128)
            assert res.agreement_gap < 1e-9

    def test_base_measurable_g_vanishes(self):
        spec = random_rotation_cocycle(Partition.identity(2), 16, seed=9)
        ext = SkewProduct(BASE, spec)
        fh = fiber_half_set(2, 16).astype(float)
        g = np.tile(np.array([[0.3], [0.8]]), (1, 16))
        res = relative_mixing_statistic(ext, fh, g, 8, sample_length=1 << 14, seed=4)
        assert res.centered_value == 0.0
        assert res.value < 1e-12

    def test_frozen_fiber_keeps_full_covariance(self):
        ext = SkewProduct(BASE, frozen_cocycle(2, 16))
        fh = fiber_half_set(2, 16).astype(float)
        res = relative_mixing_statistic(ext, fh, fh, 16, sample_length=1 << 14, seed=4)
        assert res.value == pytest.approx(0.25, abs=1e-12)
        assert res.centered_value == pytest.approx(0.25, abs=1e-12)

    def test_rotation_cocycle_stays_rigid(self):
        spec = random_rotation_cocycle(Partition.identity(2), 16, seed=9)
        ext = SkewProduct(BASE, spec)
        fh = fiber_half_set(2, 16).astype(float)
        res = relative_mixing_statistic(ext, fh, fh, 64, sample_length=1 << 15, seed=4)
        assert res.value > 0.05

    def test_result_conversions(self):
        ext = SkewProduct(BASE, frozen_cocycle(2, 4))
        ones = fiber_half_set(2, 4).astype(float)
        res = relative_mixing_statistic(ext, ones, ones, 4, sample_length=1 << 13, seed=1)
        value, centered = res
        assert float(res) == value


class TestReportSerialization:
    def test_to_dict_trace_toggle(self):
        ext = SkewProduct(BASE, frozen_cocycle(2, 8))
        rep = rwm_verdict(ext, L_schedule=(16,), M=1, sample_length=1 << 13,
                          seed=1, n_anchors=32)
        bare = rep.to_dict()
        assert "trace" not in bare
        assert bare["statistic"] == "rwm"
        assert bare["verdict"] is False
        full = rep.to_dict(with_trace=True)
        assert full["trace"] == rep.trace

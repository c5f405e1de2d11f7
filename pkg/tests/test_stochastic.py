"""Unit tests for thzchan.stochastic module."""

import logging
import math

import numpy as np
import pytest
from scipy import stats
from scipy.constants import c

from thzchan.models import Cluster, PathOrigin
from thzchan.raytracer import geometry_preset, trace
from thzchan.scenario import VALIDATION_LOG_ASA, VALIDATION_LOG_DS, ScenarioKind, SystemParams, preset
from thzchan.stochastic import (
    CalibrationTargets,
    calibrate,
    cluster_power_decay,
    cluster_powers,
    compose,
    draw_drop,
    drop_seeds,
    ensemble_spreads,
    exponential_gaps,
    free_space_realization,
    generate,
    inverse_gaussian_offsets,
    prepare_drops,
    resolved_reflections,
    sample_cluster_aoas,
    sample_cluster_delays,
    sample_cluster_powers,
    sample_num_clusters,
    sample_subpaths,
    validation_targets,
)


def _signed(angle_deg):
    return (np.asarray(angle_deg) + 180.0) % 360.0 - 180.0


class TestDropSeeds:
    """Tests for drop_seeds function."""

    def test_reproducible(self):
        """drop_seeds should return the same seeds for the same inputs."""
        assert drop_seeds(42, 3) == drop_seeds(42, 3)

    def test_distinct_streams(self):
        """drop_seeds should give distinct seeds per stream and per drop."""
        seeds = drop_seeds(42, 0)
        assert len(set(seeds)) == 3
        assert drop_seeds(42, 0) != drop_seeds(42, 1)

    def test_unsigned_64_bit(self):
        """drop_seeds should return 64-bit non-negative integers."""
        for seed in drop_seeds(2**63, 7):
            assert 0 <= seed < 2**64


class TestSampleNumClusters:
    """Tests for sample_num_clusters function."""

    def test_poisson_mean(self):
        """sample_num_clusters should average 5.94 within 2% over 1e5 draws."""
        rng = np.random.default_rng(1)
        counts = [sample_num_clusters(5.94, rng) for _ in range(100_000)]
        assert np.mean(counts) == pytest.approx(5.94, rel=0.02)

    def test_pmf(self):
        """sample_num_clusters should draw N = 2 with probability about 0.270 for lambda 2.10."""
        rng = np.random.default_rng(2)
        counts = np.array([sample_num_clusters(2.10, rng) for _ in range(100_000)])
        assert np.mean(counts == 2) == pytest.approx(stats.poisson.pmf(2, 2.10), abs=0.01)
        assert stats.poisson.pmf(2, 2.10) == pytest.approx(0.270, abs=1e-3)

    def test_los_clamp(self):
        """sample_num_clusters should keep at least one cluster in LoS."""
        rng = np.random.default_rng(3)
        assert min(sample_num_clusters(1e-6, rng, los=True) for _ in range(100)) == 1

    def test_vanishing_lambda(self):
        """sample_num_clusters should draw zero clusters as lambda goes to zero in NLoS."""
        rng = np.random.default_rng(4)
        assert max(sample_num_clusters(1e-9, rng) for _ in range(100)) == 0

    def test_rejects_non_positive(self):
        """sample_num_clusters should reject lambda <= 0."""
        with pytest.raises(ValueError):
            sample_num_clusters(0.0, np.random.default_rng(0))


class TestSampleClusterDelays:
    """Tests for sample_cluster_delays function."""

    def test_mean_gap_meeting_room(self):
        """sample_cluster_delays should give a mean gap within 2% of 11.89 ns."""
        delays = sample_cluster_delays(100_001, 2.0, 11.89 / 2, np.random.default_rng(5))
        assert np.diff(delays).mean() == pytest.approx(11.89, rel=0.02)

    def test_mean_gap_hallway(self):
        """sample_cluster_delays should give a mean gap within 2% of 40.68 ns."""
        delays = sample_cluster_delays(100_001, 3.0, 40.68 / 3, np.random.default_rng(6))
        assert np.diff(delays).mean() == pytest.approx(40.68, rel=0.02)

    def test_gaps_pass_ks(self):
        """sample_cluster_delays gaps should pass a KS test against the exponential at 1%."""
        delays = sample_cluster_delays(10_001, 2.0, 18.48 / 2, np.random.default_rng(7))
        result = stats.kstest(np.diff(delays), "expon", args=(0, 18.48))
        assert result.pvalue > 0.01

    def test_anchor_and_order(self):
        """sample_cluster_delays should start at the anchor and increase strictly."""
        delays = sample_cluster_delays(50, 2.0, 5.0, np.random.default_rng(8), anchor_ns=16.7)
        assert delays[0] == 16.7
        assert np.all(np.diff(delays) > 0)

    def test_single_cluster(self):
        """sample_cluster_delays with n = 1 should return only the anchor."""
        assert sample_cluster_delays(1, 2.0, 5.0, np.random.default_rng(0)).tolist() == [0.0]

    def test_rejects_zero(self):
        """sample_cluster_delays should reject n < 1."""
        with pytest.raises(ValueError):
            sample_cluster_delays(0, 2.0, 5.0, np.random.default_rng(0))


class TestExponentialGaps:
    """Tests for exponential_gaps function."""

    def test_unit_uniform(self):
        """exponential_gaps should map X = 1 to a zero gap."""
        assert exponential_gaps(1.0, 11.89) == 0.0

    def test_inverse_cdf(self):
        """exponential_gaps should map X = e^-1 to the mean."""
        assert exponential_gaps(math.exp(-1), 11.89) == pytest.approx(11.89)


class TestClusterPowers:
    """Tests for cluster power functions."""

    def test_decay_law(self):
        """cluster_power_decay should give exp(-1) one mean gap later when r_tau = 2."""
        assert cluster_power_decay(11.89, 2.0, 11.89 / 2) == pytest.approx(math.exp(-1))

    def test_decay_law_sigma(self):
        """cluster_power_decay should give exp(-0.5) when sigma_tau is 11.89 ns."""
        assert cluster_power_decay(11.89, 2.0, 11.89) == pytest.approx(math.exp(-0.5))

    def test_nlos_normalized(self):
        """cluster_powers should sum to 1 in NLoS."""
        powers = cluster_powers([0.0, 5.0, 20.0, 31.0], 2.0, 6.0, [1.0, -2.0, 0.5, 3.0], 10.0, los=False)
        assert powers.sum() == pytest.approx(1.0, abs=1e-12)

    def test_k_factor_split(self):
        """cluster_powers should give the LoS cluster K/(K+1)."""
        powers = cluster_powers([0.0, 5.0, 20.0], 2.0, 6.0, 0.0, 10.0, los=True)
        assert powers[0] == pytest.approx(10 / 11)
        assert powers[1:].sum() == pytest.approx(1 / 11)

    def test_large_k(self):
        """cluster_powers should give the LoS cluster all the power as K grows."""
        powers = cluster_powers([0.0, 5.0, 20.0], 2.0, 6.0, 0.0, 100.0, los=True)
        assert powers[0] == pytest.approx(1.0, abs=1e-9)

    def test_single_los_cluster(self):
        """cluster_powers should give a lone LoS cluster unit power."""
        assert cluster_powers([3.0], 2.0, 6.0, 0.0, 10.0, los=True).tolist() == [1.0]

    def test_empty(self):
        """cluster_powers should return an empty array for no clusters."""
        assert cluster_powers([], 2.0, 6.0, 0.0, 10.0, los=False).size == 0

    def test_linear_in_db_without_shadowing(self):
        """cluster_powers in dB should lie on the analytic line when xi = 0."""
        r_tau, sigma_tau = 2.5, 4.0
        delays = np.array([0.0, 3.0, 11.0, 25.0, 40.0])
        power_db = 10 * np.log10(cluster_powers(delays, r_tau, sigma_tau, 0.0, 0.0, los=False))
        slope = -10 * (r_tau - 1) / (r_tau * sigma_tau * math.log(10))
        np.testing.assert_allclose(np.diff(power_db) / np.diff(delays), slope, rtol=1e-9)

    def test_sampled_rejects_negative_xi(self):
        """sample_cluster_powers should reject a negative shadowing std."""
        with pytest.raises(ValueError):
            sample_cluster_powers([0.0, 5.0], 2.0, 6.0, -1.0, 10.0, False, np.random.default_rng(0))

    def test_sampled_sum(self):
        """sample_cluster_powers should sum to 1 with shadowing on."""
        powers = sample_cluster_powers([0.0, 5.0, 9.0], 2.0, 6.0, 3.0, 10.0, True, np.random.default_rng(9))
        assert powers.sum() == pytest.approx(1.0, abs=1e-12)


class TestClusterAoas:
    """Tests for inverse_gaussian_offsets and sample_cluster_aoas."""

    def test_strongest_at_boresight(self):
        """inverse_gaussian_offsets should put the strongest cluster at 0 degrees."""
        offsets = inverse_gaussian_offsets([0.2, 1.0, 0.5], 29.0, [1, -1, 1])
        assert offsets[1] == 0.0

    def test_scale(self):
        """inverse_gaussian_offsets should give 29 degrees for a power ratio of e^-1."""
        offsets = inverse_gaussian_offsets([1.0, math.exp(-1)], 29.0, [1, 1])
        assert offsets[1] == pytest.approx(29.0)

    def test_negative_sign_wraps(self):
        """inverse_gaussian_offsets should wrap negative offsets into [0, 360)."""
        offsets = inverse_gaussian_offsets([1.0, math.exp(-1)], 29.0, [1, -1])
        assert offsets[1] == pytest.approx(331.0)

    def test_rejects_empty(self):
        """inverse_gaussian_offsets should reject empty powers."""
        with pytest.raises(ValueError):
            inverse_gaussian_offsets([], 29.0, [])

    def test_sign_symmetry(self):
        """sample_cluster_aoas offsets should average to zero."""
        rng = np.random.default_rng(10)
        signed = [_signed(sample_cluster_aoas([1.0, math.exp(-1)], 1.0, 29.0, rng))[1] for _ in range(10_000)]
        assert abs(np.mean(signed)) < 1.0
        assert np.abs(signed) == pytest.approx(np.full(10_000, 29.0))


class TestSampleSubpaths:
    """Tests for sample_subpaths function."""

    @pytest.fixture
    def cluster(self):
        return Cluster(0, 10.0, 0.5, 30.0, (), PathOrigin.STATISTICAL)

    def test_single_subpath(self, cluster):
        """sample_subpaths with m = 1 should return one subpath carrying the cluster power."""
        subs = sample_subpaths(cluster, 1, 0.5, 5.0, np.random.default_rng(0))
        assert len(subs) == 1
        assert subs[0].toa_ns == 10.0
        assert subs[0].aoa_az_deg == 30.0
        assert subs[0].power_frac_within_cluster == 1.0
        assert subs[0].amplitude == pytest.approx(math.sqrt(0.5))

    def test_structure(self, cluster):
        """sample_subpaths should start at the cluster ToA with non-decreasing ToAs."""
        subs = sample_subpaths(cluster, 20, 0.5, 5.0, np.random.default_rng(1))
        toas = [s.toa_ns for s in subs]
        assert toas[0] == 10.0
        assert toas == sorted(toas)
        assert sum(s.power_frac_within_cluster for s in subs) == pytest.approx(1.0)

    def test_strongest_on_cluster_aoa(self, cluster):
        """sample_subpaths should put the strongest subpath on the cluster AoA."""
        subs = sample_subpaths(cluster, 20, 0.5, 5.0, np.random.default_rng(2))
        strongest = max(subs, key=lambda s: s.power_frac_within_cluster)
        assert strongest.aoa_az_deg == pytest.approx(30.0)

    def test_amplitude_scaled_by_path_loss(self, cluster):
        """sample_subpaths amplitudes squared times PL should equal the power shares."""
        subs = sample_subpaths(cluster, 8, 0.5, 5.0, np.random.default_rng(3), pl_linear=1e9)
        for s in subs:
            assert s.amplitude**2 * 1e9 == pytest.approx(0.5 * s.power_frac_within_cluster)

    def test_phases_in_range(self, cluster):
        """sample_subpaths phases should lie in [0, 2 pi)."""
        subs = sample_subpaths(cluster, 50, 0.5, 5.0, np.random.default_rng(4))
        assert all(0.0 <= s.phase_rad < 2 * math.pi for s in subs)

    def test_mean_intra_gap(self, cluster):
        """sample_subpaths intra-cluster gaps should average r_tau_c within 2%."""
        subs = sample_subpaths(cluster, 100_001, 0.5, 5.0, np.random.default_rng(5))
        gaps = np.diff([s.toa_ns for s in subs])
        assert gaps.mean() == pytest.approx(0.5, rel=0.02)

    def test_rejects_zero(self, cluster):
        """sample_subpaths should reject m < 1."""
        with pytest.raises(ValueError):
            sample_subpaths(cluster, 0, 0.5, 5.0, np.random.default_rng(0))


class TestGenerate:
    """Tests for generate and compose functions."""

    def test_reproducible(self, meeting_params, meeting_geometry):
        """generate should return identical realizations for the same seed."""
        assert generate(meeting_params, meeting_geometry, 123) == generate(meeting_params, meeting_geometry, 123)

    def test_seed_changes_result(self, meeting_params, meeting_geometry):
        """generate should return different realizations for different seeds."""
        assert generate(meeting_params, meeting_geometry, 1) != generate(meeting_params, meeting_geometry, 2)

    @pytest.mark.parametrize("kind", list(ScenarioKind))
    def test_power_fractions_sum_to_one(self, kind):
        """generate should normalize cluster power fractions to 1."""
        params = preset(kind)
        geom = geometry_preset(kind)
        for seed in range(5):
            realization = generate(params, geom, seed)
            if realization.clusters:
                assert sum(c.power_frac for c in realization.clusters) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("kind", list(ScenarioKind))
    def test_ordering(self, kind):
        """generate should sort clusters by ToA and subpaths within each cluster."""
        realization = generate(preset(kind), geometry_preset(kind), 17)
        toas = [cl.toa_ns for cl in realization.clusters]
        assert toas == sorted(toas)
        for cluster in realization.clusters:
            sub_toas = [s.toa_ns for s in cluster.subpaths]
            assert sub_toas[0] == pytest.approx(cluster.toa_ns)
            assert sub_toas == sorted(sub_toas)

    def test_hallway_first_arrival(self, hallway_params):
        """generate should anchor the hallway LoS at 30 m / c = 100.07 ns."""
        geom = geometry_preset(ScenarioKind.HALLWAY, 30.0)
        first = generate(hallway_params, geom, 0).clusters[0]
        assert first.origin is PathOrigin.LOS
        assert first.toa_ns == pytest.approx(100.07, abs=0.01)

    def test_meeting_room_has_wall_clusters(self, meeting_params, meeting_geometry):
        """generate should add deterministic wall clusters in the meeting room."""
        realization = generate(meeting_params, meeting_geometry, 5)
        walls = [cl for cl in realization.clusters if cl.origin is PathOrigin.DETERMINISTIC]
        assert walls
        assert all(cl.traced and cl.reflection_order >= 1 and cl.rl_db > 0 for cl in walls)

    def test_cubicle_is_statistical(self):
        """generate should leave out traced clusters when the deterministic part is off."""
        realization = generate(preset(ScenarioKind.CUBICLE_AREA), geometry_preset(ScenarioKind.CUBICLE_AREA), 5)
        assert not any(cl.traced for cl in realization.clusters)
        assert realization.clusters[0].origin is PathOrigin.LOS

    def test_statistical_amplitudes_follow_ci_model(self):
        """generate should scale statistical subpath powers by the omni CI path loss."""
        realization = generate(preset(ScenarioKind.CUBICLE_AREA), geometry_preset(ScenarioKind.CUBICLE_AREA), 9)
        pl_linear = 10 ** (realization.pl_omni_db / 10)
        assert realization.total_power * pl_linear == pytest.approx(1.0, rel=1e-9)
        for cluster in realization.clusters:
            for s in cluster.subpaths:
                expected = cluster.power_frac * s.power_frac_within_cluster
                assert s.amplitude**2 * pl_linear == pytest.approx(expected, rel=1e-9)

    def test_nlos_anchor_after_geometric_delay(self, nlos_params):
        """generate should place every NLoS cluster after the geometric delay."""
        geom = geometry_preset(ScenarioKind.NLOS, 10.0)
        for seed in range(10):
            realization = generate(nlos_params, geom, seed)
            assert all(cl.origin is PathOrigin.STATISTICAL for cl in realization.clusters)
            assert all(cl.toa_ns >= 10.0 / c * 1e9 for cl in realization.clusters)

    def test_large_k_factor(self):
        """generate should put almost all power in the LoS cluster for a huge K."""
        params = preset(ScenarioKind.CUBICLE_AREA).model_copy(update={"k_factor_db": 60.0})
        realization = generate(params, geometry_preset(ScenarioKind.CUBICLE_AREA), 3)
        assert realization.clusters[0].power_frac > 0.999

    def test_compose_reuses_draws(self, meeting_params, meeting_geometry):
        """compose over draw_drop should reproduce generate exactly."""
        traced = trace(meeting_geometry, meeting_params.max_reflection_order)
        draws = draw_drop(meeting_params, np.random.default_rng(77), len(traced))
        composed = compose(meeting_params, meeting_geometry, draws, 77, traced=traced)
        assert composed == generate(meeting_params, meeting_geometry, 77)

    def test_double_count_guard(self, meeting_params, meeting_geometry):
        """generate should draw fewer statistical clusters when the guard is on."""
        unguarded = meeting_params.model_copy(update={"double_count_guard": False})
        for seed in range(10):
            on = generate(meeting_params, meeting_geometry, seed)
            off = generate(unguarded, meeting_geometry, seed)
            count_on = sum(cl.origin is not PathOrigin.DETERMINISTIC for cl in on.clusters)
            count_off = sum(cl.origin is not PathOrigin.DETERMINISTIC for cl in off.clusters)
            assert count_on <= count_off

    def test_guard_keeps_statistical_clusters(self, hallway_params):
        """compose should keep statistical clusters in every hallway drop that draws more than the LoS."""
        drops = prepare_drops(hallway_params, geometry_preset(ScenarioKind.HALLWAY), 60, 0)
        multi = [d for d in drops if d.draws.n_clusters >= 2]
        assert multi
        for drop in multi:
            realization = compose(hallway_params, drop.geometry, drop.draws, drop.seed, traced=drop.traced)
            assert any(cl.origin is PathOrigin.STATISTICAL for cl in realization.clusters)

    def test_resolved_reflections_skip_los_azimuth(self, hallway_params, hallway_geometry):
        """resolved_reflections should not count floor and ceiling bounces that share the LoS azimuth."""
        realization = generate(hallway_params, hallway_geometry, 0)
        walls = [cl for cl in realization.clusters if cl.origin is PathOrigin.DETERMINISTIC]
        los_toa = realization.clusters[0].toa_ns
        count = resolved_reflections(walls, los_toa, realization.los_az_deg, 0.0, SystemParams())
        assert 0 <= count < len(walls)

    def test_resolved_reflections_need_delay_resolution(self, meeting_params, meeting_geometry):
        """resolved_reflections should count nothing when the band cannot resolve any excess delay."""
        realization = generate(meeting_params, meeting_geometry, 0)
        walls = [cl for cl in realization.clusters if cl.origin is PathOrigin.DETERMINISTIC]
        narrow = SystemParams(f_start_ghz=204.99, f_end_ghz=205.0, n_sweep=2, window_w=1)
        los_toa = realization.clusters[0].toa_ns
        assert resolved_reflections(walls, los_toa, realization.los_az_deg, 0.0, narrow) == 0

    def test_los_cluster_keeps_friis_ray(self, meeting_params, meeting_geometry):
        """generate should put the traced LoS ray at its Friis amplitude as the strongest LoS subpath."""
        los = generate(meeting_params, meeting_geometry, 6).clusters[0]
        friis = free_space_realization(meeting_params, meeting_geometry).clusters[0].subpaths[0]
        strongest = max(los.subpaths, key=lambda s: s.amplitude)
        assert los.origin is PathOrigin.LOS
        assert len(los.subpaths) == meeting_params.m_subpaths
        assert strongest.amplitude == pytest.approx(friis.amplitude, rel=1e-12)
        assert strongest.toa_ns == pytest.approx(friis.toa_ns)

    def test_per_bounce_reflection_loss(self, meeting_params, meeting_geometry):
        """generate should multiply the reflection loss by the order when applied per bounce."""
        per_bounce = meeting_params.model_copy(update={"rl_per_bounce": True})
        once = {cl.toa_ns: cl for cl in generate(meeting_params, meeting_geometry, 4).clusters if cl.traced}
        twice = {cl.toa_ns: cl for cl in generate(per_bounce, meeting_geometry, 4).clusters if cl.traced}
        for toa, cluster in once.items():
            if cluster.origin is PathOrigin.DETERMINISTIC:
                assert twice[toa].rl_db == pytest.approx(cluster.rl_db * cluster.reflection_order)


class TestFreeSpaceRealization:
    """Tests for free_space_realization function."""

    def test_single_los_cluster(self, hallway_params, hallway_geometry):
        """free_space_realization should contain only the LoS path."""
        realization = free_space_realization(hallway_params, hallway_geometry)
        assert len(realization.clusters) == 1
        assert realization.clusters[0].origin is PathOrigin.LOS
        assert realization.clusters[0].power_frac == 1.0

    def test_friis_loss(self, hallway_params, hallway_geometry):
        """free_space_realization should carry the Friis loss at the reference frequency."""
        realization = free_space_realization(hallway_params, hallway_geometry)
        toa = 10.0 / c * 1e9
        assert realization.pl_omni_db == pytest.approx(20 * math.log10(4 * math.pi * 205.0 * toa))


class TestCalibrationTargets:
    """Tests for CalibrationTargets."""

    def test_from_spreads(self):
        """from_spreads should store natural logs."""
        targets = CalibrationTargets.from_spreads(math.exp(1.5), math.exp(3.38))
        assert targets.mu_log_ds == pytest.approx(1.5)
        assert targets.mu_log_asa == pytest.approx(3.38)

    def test_rejects_zero_spread(self):
        """from_spreads should reject a zero delay spread as infeasible."""
        with pytest.raises(ValueError):
            CalibrationTargets.from_spreads(0.0, 30.0)

    def test_rejects_non_finite(self):
        """CalibrationTargets should reject non-finite targets."""
        with pytest.raises(ValueError):
            CalibrationTargets(math.nan, 3.0)


class TestCalibrate:
    """Tests for calibrate function."""

    @pytest.fixture
    def cubicle(self):
        return preset(ScenarioKind.CUBICLE_AREA), geometry_preset(ScenarioKind.CUBICLE_AREA)

    def test_rejects_small_ensembles(self, cubicle):
        """calibrate should require at least 500 Monte-Carlo drops."""
        params, base = cubicle
        with pytest.raises(ValueError):
            calibrate(params, base, n_mc=100)

    def test_prepared_drops_are_common(self, cubicle):
        """prepare_drops should give identical drops for the same seed."""
        params, base = cubicle
        assert ensemble_spreads(params, prepare_drops(params, base, 20, 3)) == ensemble_spreads(
            params, prepare_drops(params, base, 20, 3)
        )

    def test_converged_at_start(self, cubicle):
        """calibrate should stop at once when the start point already meets the targets."""
        params, base = cubicle
        ds, asa = ensemble_spreads(params, prepare_drops(params, base, 500, 0))
        result = calibrate(params, base, CalibrationTargets(ds, asa), n_mc=500, seed=0)
        assert result.converged is True
        assert result.n_evals == 1
        assert result.params == params
        assert result.achieved_log_ds == pytest.approx(ds)

    def test_reports_non_convergence(self, cubicle, caplog):
        """calibrate should return the best parameters and warn when targets are unreachable."""
        params, base = cubicle
        with caplog.at_level(logging.WARNING, logger="thzchan.stochastic"):
            result = calibrate(
                params, base, CalibrationTargets(10.0, 10.0), n_mc=500, seed=0,
                ds_axes=("xi_db",), asa_axes=("r_phi",), grid_points=2,
            )
        assert result.converged is False
        assert result.n_evals == 5
        assert len(result.history) == 5
        assert "did not converge" in caplog.text

    def test_result_to_dict(self, cubicle):
        """CalibrationResult.to_dict should carry params, targets and achieved values."""
        params, base = cubicle
        ds, asa = ensemble_spreads(params, prepare_drops(params, base, 500, 1))
        data = calibrate(params, base, CalibrationTargets(ds, asa), n_mc=500, seed=1).to_dict()
        assert data["params"]["kind"] == "cubicle_area"
        assert data["targets"] == {"mu_log_ds": ds, "mu_log_asa": asa}
        assert data["converged"] is True

    def test_default_targets_are_validation_values(self, cubicle):
        """calibrate should aim at the scenario's validation log DS/ASA when no targets are given."""
        params, base = cubicle
        result = calibrate(params, base, n_mc=500, seed=0, ds_axes=(), asa_axes=())
        assert result.targets == validation_targets(ScenarioKind.CUBICLE_AREA)
        assert result.targets.mu_log_asa == 3.55
        assert result.n_evals == 1

    def test_bisects_bracketed_axis(self, cubicle):
        """calibrate should bisect the K-factor onto a DS target reached inside its bounds."""
        params, base = cubicle
        drops = prepare_drops(params, base, 500, 2)
        ds, asa = ensemble_spreads(params.model_copy(update={"k_factor_db": 18.0}), drops)
        result = calibrate(params, base, CalibrationTargets(ds, asa), n_mc=500, seed=2,
                           ds_axes=("k_factor_db",), asa_axes=())
        assert abs(result.achieved_log_ds - ds) <= 0.05
        assert 15.0 <= result.params.k_factor_db <= 23.34

    @pytest.mark.parametrize("kind", [ScenarioKind.MEETING_ROOM, ScenarioKind.HALLWAY, ScenarioKind.NLOS])
    def test_reaches_validation_targets(self, kind):
        """calibrate should bring the scenario to its validation mean log DS and ASA."""
        result = calibrate(preset(kind), geometry_preset(kind), n_mc=500, seed=0)
        assert result.converged is True
        assert result.achieved_log_ds == pytest.approx(VALIDATION_LOG_DS[kind], abs=0.05)
        assert result.achieved_log_asa == pytest.approx(VALIDATION_LOG_ASA[kind], abs=0.05)

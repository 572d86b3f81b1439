import logging

import numpy as np
import pandas as pd
import pytest

from annealrbm.config import SamplerConfig, TrainConfig
from annealrbm.errors import EstimationError
from annealrbm.rbm import RbmParams
from annealrbm.samplers.annealing import SimulatedAnnealingSampler
from annealrbm.samplers.base import ConstantSampler, TemperedSampler, UniformSampler
from annealrbm.samplers.exact import ExactSampler, exact_sample
from annealrbm.thermometry import (
    TempEstimate,
    beta_report,
    bin_by_coupling,
    estimate_beta,
    ks_two_sample,
    ks_vs_coupling_report,
    reference_samples,
    seed_advantage,
    steps_curve,
    steps_to_boltzmann,
    trend_correlation,
    wilson_interval,
)
from annealrbm.training import Trainer


def test_ks_identical_and_disjoint_samples():
    same = ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert same.statistic == 0.0
    assert same.p_value == 1.0

    apart = ks_two_sample(np.zeros(100), np.ones(100))
    assert apart.statistic == 1.0
    assert apart.p_value < 1e-10


def test_ks_is_symmetric(rng):
    xs, ys = rng.normal(size=50), rng.normal(0.3, 1.0, size=80)
    forward, backward = ks_two_sample(xs, ys), ks_two_sample(ys, xs)
    assert forward.statistic == backward.statistic
    assert forward.p_value == pytest.approx(backward.p_value)
    assert (forward.n1, forward.n2) == (50, 80)


def test_ks_rejects_empty_samples():
    with pytest.raises(ValueError):
        ks_two_sample([], [1.0])


def test_ks_false_rejection_rate_is_calibrated(rng):
    rejections = sum(
        ks_two_sample(rng.normal(size=500), rng.normal(size=500)).p_value < 0.05 for _ in range(2000)
    )
    assert 0.035 <= rejections / 2000 <= 0.065


@pytest.mark.slow
def test_annealer_output_is_not_boltzmann_at_low_temperature(small_params, rng):
    cold = SimulatedAnnealingSampler(
        SamplerConfig(kind="simulated_annealing", beta_start=1.0, beta_end=20.0, n_sweeps=100, gibbs_postprocess_sweeps=0)
    )
    drawn = cold.sample(small_params, rng, n_samples=2000)
    reference = exact_sample(small_params, 2000, rng)
    assert ks_two_sample(drawn.energies, reference.energies).p_value < 0.01


@pytest.mark.parametrize("beta_true", [1.0, 2.0, 3.0])
def test_estimate_beta_recovers_known_temperature(beta_true):
    rng = np.random.default_rng(int(beta_true * 10))
    params = RbmParams.random(8, 8, np.random.default_rng(31), scale=0.5)
    sampler = TemperedSampler(ExactSampler(), beta_true)
    estimates = [estimate_beta(params, sampler, 2.0, 4000, rng).beta_eff for _ in range(20)]
    assert np.mean(estimates) == pytest.approx(beta_true, rel=0.1)


def test_estimate_beta_fields(small_params, rng):
    estimate = estimate_beta(small_params, ExactSampler(), 3.0, 1000, rng)
    assert estimate.beta_0 == 3.0
    assert estimate.x == pytest.approx(1.0 + 1.0 / (3.0 * estimate.sigma))
    assert estimate.n_bins_used >= 2


@pytest.mark.slow
def test_estimate_beta_spread_stays_small_across_beta_0():
    params = RbmParams.random(8, 8, np.random.default_rng(31), scale=0.5)
    sampler = TemperedSampler(ExactSampler(), 1.0)
    for beta_0 in (1.0, 2.0, 3.0, 4.0):
        rng = np.random.default_rng(int(beta_0 * 100))
        estimates = [estimate_beta(params, sampler, beta_0, 4000, rng).beta_eff for _ in range(15)]
        assert np.std(estimates) < 0.2, beta_0
        assert np.mean(estimates) == pytest.approx(1.0, rel=0.1)


def test_sigma_is_measured_in_the_first_draw_couplings():
    params = RbmParams.random(4, 4, np.random.default_rng(35), scale=1.0)
    plain = estimate_beta(params, ExactSampler(), 1.0, 2000, np.random.default_rng(9))
    doubled = estimate_beta(params.scaled(2.0), ExactSampler(), 2.0, 2000, np.random.default_rng(9))
    assert doubled.sigma == pytest.approx(plain.sigma)
    assert plain.x == pytest.approx(1.0 + 1.0 / plain.sigma)


@pytest.mark.slow
def test_estimate_beta_is_consistent_under_joint_rescaling():
    params = RbmParams.random(6, 6, np.random.default_rng(36), scale=0.5)
    sampler = TemperedSampler(ExactSampler(), 1.0)
    rng = np.random.default_rng(37)
    plain = [estimate_beta(params, sampler, 3.0, 4000, rng).beta_eff for _ in range(15)]
    doubled = [estimate_beta(params.scaled(2.0), sampler, 6.0, 4000, rng).beta_eff for _ in range(15)]
    assert np.mean(plain) == pytest.approx(1.0, rel=0.15)
    assert np.mean(doubled) == pytest.approx(np.mean(plain), rel=0.15)


def test_estimate_beta_failures(rng):
    with pytest.raises(EstimationError):
        estimate_beta(RbmParams.zeros(3, 3), ExactSampler(), 3.0, 100, rng)
    with pytest.raises(ValueError):
        estimate_beta(RbmParams.random(3, 3, rng), ExactSampler(), 3.0, 49, rng)


def test_reference_falls_back_to_a_long_chain_over_budget(rng, caplog):
    with caplog.at_level(logging.WARNING):
        drawn = reference_samples(RbmParams.zeros(14, 13), 10, rng, burn_in=10, thin=1)
    assert drawn.metadata["reference"] == "long_chain"
    assert len(drawn) == 10
    assert "enumeration budget" in caplog.text
    assert reference_samples(RbmParams.zeros(3, 3), 10, rng).metadata["reference"] == "exact"


def test_exact_seeds_need_no_sweeps(small_params, rng):
    zero_steps = 0
    for _ in range(100):
        seeds = exact_sample(small_params, 500, rng)
        reference = exact_sample(small_params, 500, rng)
        zero_steps += steps_to_boltzmann(small_params, seeds, reference, 10, rng) == 0
    assert zero_steps >= 90


def test_steps_cap_and_far_seeds(strong_params, rng):
    reference = exact_sample(strong_params, 500, rng)
    zeros = ConstantSampler(500).sample(strong_params, rng)
    assert steps_to_boltzmann(strong_params, zeros, reference, 0, rng) == 1
    assert steps_to_boltzmann(strong_params, zeros, reference, 100, rng) > 0
    with pytest.raises(ValueError):
        steps_to_boltzmann(strong_params, zeros, reference, -1, rng)


def test_wilson_interval():
    low, high = wilson_interval(50, 100)
    assert low < 0.5 < high
    narrow_low, narrow_high = wilson_interval(200, 400)
    assert (high - low) / (narrow_high - narrow_low) == pytest.approx(2.0, rel=0.05)
    assert wilson_interval(0, 10)[0] == pytest.approx(0.0, abs=1e-12)
    assert wilson_interval(10, 10)[1] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        wilson_interval(11, 10)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_identical_seed_samplers_tie(small_params, rng):
    snapshots = [small_params, small_params.scaled(0.5), small_params.scaled(1.5)]
    result = seed_advantage(snapshots, ExactSampler(), ExactSampler(), rng, n_samples=200, max_sweeps=20)
    assert result.ties == 3
    assert result.p_hat is None
    assert result.mean_ratio == pytest.approx(1.0)


def test_exact_seeds_beat_constant_seeds(rng):
    snapshot_rng = np.random.default_rng(32)
    snapshots = [
        RbmParams(2.0 * np.ones((3, 3)) + 0.1 * snapshot_rng.normal(size=(3, 3)), -np.ones(3), -np.ones(3))
        for _ in range(10)
    ]
    result = seed_advantage(snapshots, ExactSampler(), ConstantSampler(), rng, n_samples=300, max_sweeps=50)
    assert result.p_hat > 0.9
    assert result.ci_low <= result.p_hat <= result.ci_high
    assert result.wins_a + result.wins_b + result.ties == 10


def test_seed_advantage_needs_two_snapshots(small_params, rng):
    with pytest.raises(ValueError):
        seed_advantage([small_params], ExactSampler(), ExactSampler(), rng)


def test_ks_report_tracks_coupling_strength(strong_params, rng):
    weak = RbmParams.random(3, 3, np.random.default_rng(33), scale=0.01)
    report = ks_vs_coupling_report([(0, weak), (1, strong_params)], UniformSampler(), rng, n_samples=1000)
    assert list(report["epoch"]) == [0, 1]
    assert report.loc[0, "ks_statistic"] < 0.1
    assert report.loc[1, "ks_statistic"] > report.loc[0, "ks_statistic"]
    assert set(report["reference"]) == {"exact"}

    binned = bin_by_coupling(report, n_bins=2)
    assert binned["count"].sum() == 2
    assert "mean_abs_coupling_bin" in binned.columns
    with pytest.raises(ValueError):
        bin_by_coupling(report.iloc[0:0])


@pytest.mark.slow
def test_ks_report_separates_equilibrium_from_quenched_annealing(rng):
    params = RbmParams.random(4, 4, np.random.default_rng(41), scale=1.0)
    checkpoints = [(0, params.scaled(0.01)), (1, params), (2, params.scaled(2.0))]
    equilibrium = SimulatedAnnealingSampler(
        SamplerConfig(kind="simulated_annealing", beta_start=1.0, beta_end=1.0, n_sweeps=100)
    )
    quenched = SimulatedAnnealingSampler(
        SamplerConfig(kind="simulated_annealing", beta_start=1.0, beta_end=10.0, n_sweeps=100, gibbs_postprocess_sweeps=0)
    )
    calm = ks_vs_coupling_report(checkpoints, equilibrium, rng, n_samples=1000)
    cold = ks_vs_coupling_report(checkpoints, quenched, rng, n_samples=1000)
    assert calm.loc[0, "ks_statistic"] < 0.1
    assert (cold["ks_statistic"].iloc[1:].to_numpy() > calm["ks_statistic"].iloc[1:].to_numpy()).all()


def _two_cluster_rows(rng, n, n_visible):
    """Mostly near-all-ones rows, the rest near-all-zeros, with 5% of bits flipped."""
    ones = rng.random(n) < 0.7
    rows = np.repeat(ones[:, None], n_visible, axis=1).astype(np.float64)
    flips = rng.random(rows.shape) < 0.05
    return np.where(flips, 1.0 - rows, rows)


@pytest.mark.slow
def test_mixing_from_zeros_slows_as_training_proceeds(rng):
    rows = _two_cluster_rows(np.random.default_rng(43), 100, 12)
    config = TrainConfig(algorithm="sampler_generative", learning_rate=0.1, n_epochs=50, batch_size=20, rng_seed=3)
    checkpoints = []

    def keep(epoch, params, _metrics):
        if epoch % 5 == 0:
            checkpoints.append((epoch, params))

    initial = RbmParams.random(12, 12, np.random.default_rng(44), scale=0.01)
    Trainer(config, sampler=ExactSampler(200)).fit(initial, rows, on_epoch_end=keep)
    curve = steps_curve(checkpoints, ConstantSampler(), rng, n_trials=3, n_samples=300, max_sweeps=30)
    assert len(curve) == 10
    assert trend_correlation(curve) > 0.5


def test_steps_curve_columns(small_params, rng):
    curve = steps_curve([(0, small_params), (5, small_params.scaled(2.0))], ExactSampler(), rng, n_trials=2, n_samples=200)
    assert list(curve.columns) == ["epoch", "mean_steps", "stderr", "median_coupling"]
    assert list(curve["epoch"]) == [0, 5]
    assert (curve["mean_steps"] >= 0).all()
    with pytest.raises(ValueError):
        steps_curve([(0, small_params)], ExactSampler(), rng, n_trials=0)


def test_trend_correlation():
    curve = pd.DataFrame({"epoch": [0, 1, 2, 3], "mean_steps": [1.0, 2.0, 4.0, 8.0]})
    assert trend_correlation(curve) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        trend_correlation(curve.iloc[:1])


def test_beta_report_keeps_failed_steps_empty():
    estimate = TempEstimate(beta_eff=2.0, beta_0=3.0, x=1.2, sigma=1.0, slope=-0.1, intercept=0.0, n_bins_used=5)
    later = estimate.model_copy(update={"beta_eff": 4.0})
    report = beta_report([(0, estimate), (1, None), (2, later)], window=2)
    assert list(report["step"]) == [0, 1, 2]
    assert np.isnan(report.loc[1, "beta_eff"])
    assert list(report["n_bins_used"]) == [5, 0, 5]
    assert list(report["beta_rolling"]) == [2.0, 2.0, 4.0]

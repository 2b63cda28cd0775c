import math

import numpy as np
import pytest

from dsula import metric, model, rng, sim
from dsula.model import ConstantDiffusion, CustomDrift, ModelSpec, RegressionData
from dsula.schedule import StepSchedule, prefix_times, time_at
from dsula.sim import SamplerConfig

OU = model.ou_model()
THETA2 = StepSchedule.polynomial(2.0)


def test_ula_step_examples():
    assert sim.ula_step([1.0], OU, 0.0, 0.5, [0.0])[0] == 0.5
    zero = ModelSpec(2, CustomDrift(np.zeros_like), ConstantDiffusion(np.eye(2)), 1.0)
    assert np.array_equal(sim.ula_step([3.0, -1.0], zero, 0.0, 0.1, [0.0, 0.0]), [3.0, -1.0])
    assert sim.ula_step([0.0], OU, 0.0, 0.25, [2.0])[0] == pytest.approx(math.sqrt(2), rel=1e-15)


def test_ula_step_errors():
    with pytest.raises(ValueError):
        sim.ula_step([0.0], OU, 0.0, 0.0, [0.0])
    with pytest.raises(ValueError):
        sim.ula_step([0.0], OU, 0.0, 0.1, [0.0, 1.0])
    with pytest.raises(FloatingPointError):
        sim.ula_step([1e300], OU, 0.0, 1e10, [0.0])


def test_run_batch_single_step_equals_ula_step():
    cfg = SamplerConfig(OU, THETA2, [1.0], 1, 3, seed=9)
    b = sim.run_batch(cfg)
    z = rng.normals(rng.chain_keys(9, range(3)), 0, 1)
    assert np.array_equal(b.values, sim.ula_step(np.ones((3, 1)), OU, 0.0, 2.0, z))
    assert b.step_index == 1 and b.time == 2.0


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(OU, THETA2, [1.0], 0, 3)
    with pytest.raises(ValueError):
        SamplerConfig(OU, THETA2, [1.0], 5, 0)


def test_determinism():
    cfg = SamplerConfig(model.holder_model(0.5, dim=2), THETA2, [1.0, -1.0], 200, 64, seed=3)
    assert np.array_equal(sim.run_batch(cfg).values, sim.run_batch(cfg).values)


def test_chain_permutation_moves_rows():
    ids = np.arange(8)
    perm = np.array([5, 2, 7, 0, 1, 6, 3, 4])
    a = sim.run_batch(SamplerConfig(OU, THETA2, [1.0], 50, 8, 4, chain_ids=ids)).values
    b = sim.run_batch(SamplerConfig(OU, THETA2, [1.0], 50, 8, 4, chain_ids=perm)).values
    assert np.array_equal(b, a[perm])


def test_zero_noise_is_explicit_euler():
    m = model.holder_model(0.5, dim=1, sigma=0.0)
    cfg = SamplerConfig(m, THETA2, [3.0], 100, 2, seed=1)
    got = sim.run_batch(cfg).values
    y = np.array([3.0])
    for k in range(1, 101):
        y = y + (2.0 / k) * model.holder_drift(0.5, y)
    assert np.array_equal(got[0], y) and np.array_equal(got[1], y)


def test_snapshot_series_consistency():
    cfg = SamplerConfig(OU, THETA2, [1.0], 64, 10, seed=2)
    series = sim.snapshot_series(cfg, [1, 2, 64])
    assert np.array_equal(series[-1].values, sim.run_batch(cfg).values)
    z = rng.normals(rng.chain_keys(2, range(10)), 1, 1)
    step2 = sim.ula_step(series[0].values, OU, time_at(THETA2, 1), 1.0, z)
    assert np.array_equal(series[1].values, step2)
    for b in series:
        assert b.time == time_at(THETA2, b.step_index)
        assert b.provenance["generator"] == rng.GENERATOR_TAG


def test_snapshot_series_rejects_bad_checkpoints():
    cfg = SamplerConfig(OU, THETA2, [1.0], 64, 10)
    with pytest.raises(ValueError):
        sim.snapshot_series(cfg, [4, 4])
    with pytest.raises(ValueError):
        sim.snapshot_series(cfg, [65])


def test_invalid_schedule_needs_override():
    with pytest.raises(sim.ScheduleError, match="monotonicity"):
        sim.run_batch(SamplerConfig(OU, StepSchedule.explicit([0.1, 0.2]), [0.0], 2, 2))
    sim.run_batch(SamplerConfig(OU, StepSchedule.explicit([0.1, 0.2]), [0.0], 2, 2,
                                allow_invalid_schedule=True))


def test_time_inhomogeneous_coefficients_use_left_point():
    seen = []

    def drift(t, x):
        seen.append(t)
        return np.zeros_like(x)

    m = ModelSpec(1, CustomDrift(drift, time_dependent=True), ConstantDiffusion(np.zeros((1, 1))), 1.0)
    sim.run_batch(SamplerConfig(m, THETA2, [0.0], 4, 1))
    assert seen == list(prefix_times(THETA2, 3))


def test_divergence_is_counted_and_budgeted():
    m = ModelSpec(1, CustomDrift(lambda x: np.where(x > 2.0, np.inf, 0.0)), ConstantDiffusion(np.eye(1)), 1.0)
    b = sim.run_batch(SamplerConfig(m, THETA2, [0.0], 20, 200, seed=0))
    assert b.diverged_count > 0
    assert b.n_chains == 200 - b.diverged_count
    assert set(b.chain_ids).isdisjoint(c for c, _ in b.diverged)
    with pytest.raises(sim.DivergenceError):
        sim.enforce_divergence_budget(b, 200)


def test_ou_mean_matches_exact_law():
    cfg = SamplerConfig(OU, THETA2, [1.0], 4096, 100_000, seed=11)
    vals = sim.run_batch(cfg).values[:, 0]
    exact = metric.ou_em_law(1.0, math.sqrt(2), THETA2, 1.0, 4096)
    assert abs(vals.mean() - exact.mean[0]) <= 4 * vals.std() / math.sqrt(len(vals))
    assert abs(vals.var() - exact.cov[0]) < 0.02


def test_ou_exact_distances_decrease():
    cps = [2 ** k for k in range(6, 15)]
    laws = metric.ou_em_laws(1.0, math.sqrt(2), THETA2, 1.0, cps)
    stat = metric.ou_stationary(1.0, math.sqrt(2))
    d = [metric.w2_gaussian(g, stat) for g in laws]
    assert all(b < a for a, b in zip(d[2:], d[3:]))


def test_holder_second_moment_bounded():
    m = model.holder_model(0.5)
    cps = [2 ** k for k in range(1, 13)]
    series = sim.snapshot_series(SamplerConfig(m, StepSchedule.polynomial(4.0), [1.0], cps[-1], 4000, 8), cps)
    second = [float(np.mean(b.values ** 2)) for b in series]
    early = max(second[:4])
    assert max(second) <= 1.2 * early


def test_noisy_gd_without_noise_is_gradient_descent(one_point):
    # L(b) = (1 - b)^2, so each step maps the error e to (1 - 2 eta_k) e exactly
    sched = StepSchedule.polynomial(0.25)
    series = sim.run_noisy_gd(one_point, 0.0, 2.0, sched, np.zeros(400), [0.0], 400, 2,
                              checkpoints=[10, 100, 400])
    errs = [abs(1.0 - b.values[0, 0]) for b in series]
    assert errs[0] > errs[1] > errs[2]
    expected = np.prod(1 - 2 * sched.etas(1, 401))
    assert errs[2] == pytest.approx(expected, rel=1e-10)
    assert np.array_equal(series[2].values[0], series[2].values[1])


def test_noisy_gd_single_step(one_point):
    sched = StepSchedule.polynomial(0.25)
    b = sim.run_noisy_gd(one_point, 0.5, 1.5, sched, sim.bridge_noise_scale(1.0, 1.0, 2.0), [0.3], 1, 4, 6)
    z = rng.normals(rng.chain_keys(6, range(4)), 0, 1)
    g = model.bridge_loss_grad(one_point, 0.5, 1.5, [0.3])
    assert np.allclose(b.values, 0.3 - 0.25 * g + math.sqrt(0.25) * 1.0 * z, rtol=1e-15, atol=1e-15)


def test_noise_scale_sequence():
    sig = sim.bridge_noise_scale(2.0, 1.0, 2.0)(np.arange(1, 6))
    assert sig[0] == 1.0 and sig[1] == 1.0
    k = 5
    assert sig[4] == pytest.approx(min(k ** -1.0 / math.log(k), 1.0))


def test_noisy_gd_ridge_moment_decays():
    data = model.synthetic_regression()
    target = model.ridge_solution(data, 1.0)
    sched = StepSchedule.polynomial(0.084)
    sig = sim.bridge_noise_scale(12.5, 0.084, 2.0)
    series = sim.run_noisy_gd(data, 1.0, 2.0, sched, sig, [0.0, 0.0, 0.0], 4096, 500, 1,
                              checkpoints=[256, 1024, 4096])
    m = [metric.point_mass_moment(b.values, target).value for b in series]
    assert m[0] > m[1] > m[2]


def test_reference_exact_gaussian():
    b = sim.reference_samples(sim.ReferenceSpec(sim.ExactGaussian((0.0,), (1.0,)), 10**6), 0)
    assert abs(b.values.var() - 1) < 0.01


def test_reference_rejection():
    spec = sim.Rejection1D(0.5)
    logM = sim.rejection_envelope(0.5, spec.proposal_sd)
    xs = np.linspace(-50, 50, 200_001)
    ratio = sim.holder_log_target(0.5, xs) + xs ** 2 / 4 - logM
    assert ratio.max() <= 1e-12
    b = sim.reference_samples(sim.ReferenceSpec(spec, 10**6), 0)
    assert b.values.shape == (10**6, 1)
    assert 0.001 < b.provenance["acceptance_rate"] <= 1


def test_rejection_low_acceptance_aborts():
    with pytest.raises(ValueError, match="acceptance"):
        sim.reference_samples(sim.ReferenceSpec(sim.Rejection1D(0.5, 5000.0), 1000), 0)


def test_reference_fine_grid_on_ou():
    spec = sim.ReferenceSpec(sim.FineGridEM(OU, 1e-3, 20.0, 1.0, 1000), 2000)
    v = sim.reference_samples(spec, 0).values[:, 0]
    se = 1 / math.sqrt(len(v))
    assert abs(v.mean()) < 3 * se
    assert abs(v.var() - 1) < 3 * math.sqrt(2) * se


def test_binary_and_csv_roundtrip(tmp_path):
    b = sim.run_batch(SamplerConfig(model.ou_model(dim=2), THETA2, [1.0, 0.0], 5, 7, 1))
    sim.write_binary(b, tmp_path / "b.ulab")
    raw = (tmp_path / "b.ulab").read_bytes()
    assert raw[:5] == b"ULAB1" and len(raw) == 5 + 8 + 7 * 2 * 8
    assert np.array_equal(sim.read_binary(tmp_path / "b.ulab"), b.values)
    sim.write_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_text().splitlines()[0] == "chain,x_1,x_2"
    ids, vals = sim.read_csv(tmp_path / "b.csv")
    assert np.array_equal(vals, b.values) and np.array_equal(ids, np.arange(7))

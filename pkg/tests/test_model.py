import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dsula import model
from dsula.model import (
    ConstantDiffusion,
    CustomDrift,
    DecayingScalarDiffusion,
    ModelSpec,
    RegressionData,
    bridge_loss,
    bridge_loss_grad,
    diffusion_eval,
    drift_eval,
)

ZERO = ModelSpec(1, CustomDrift(np.zeros_like), ConstantDiffusion(np.eye(1)), 1.0)


def test_drift_examples():
    h = model.holder_model(0.5)
    assert np.array_equal(drift_eval(h, 0.0, np.zeros(1)), np.zeros(1))
    assert np.array_equal(drift_eval(model.holder_model(0.5, dim=3), 0.0, np.zeros(3)), np.zeros(3))
    assert np.allclose(drift_eval(model.ou_model(1.0, dim=2), 0.0, [2.0, 0.0]), [-2.0, 0.0])
    assert drift_eval(h, 0.0, [4.0])[0] == pytest.approx(-3.25, rel=1e-15)


def test_drift_dimension_mismatch():
    with pytest.raises(ValueError):
        drift_eval(model.ou_model(dim=2), 0.0, np.zeros(3))


def test_diffusion_examples():
    assert diffusion_eval(model.ou_model(), 3.0, [7.0])[0, 0] == pytest.approx(math.sqrt(2))
    dm = ModelSpec(1, CustomDrift(np.zeros_like), DecayingScalarDiffusion(1.0, 2.0), 1.0)
    assert diffusion_eval(dm, 0.1, [0.0])[0, 0] == 1.0
    assert diffusion_eval(dm, 0.0, [0.0])[0, 0] == 1.0
    assert diffusion_eval(dm, 10.0, [0.0])[0, 0] == pytest.approx(math.exp(-5) / 10, rel=1e-12)
    assert diffusion_eval(dm, 10.0, [0.0])[0, 0] == pytest.approx(6.7379e-4, rel=1e-4)


def test_decaying_monotone_and_clamped():
    ts = np.linspace(0, 50, 2001)
    vals = [model.decaying_scale(0.7, 1.5, t) for t in ts]
    assert max(vals) == 1.0
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_bridge_loss_examples(one_point):
    empty = RegressionData.empty(2)
    assert bridge_loss(empty, 0.0, 1.5, [3.0, -1.0]) == 0.0
    assert bridge_loss(one_point, 0.0, 2.0, [0.0]) == 1.0
    assert bridge_loss(one_point, 2.0, 2.0, [0.5]) == pytest.approx(0.75, rel=1e-15)


def test_bridge_grad_examples(one_point):
    assert bridge_loss_grad(one_point, 0.0, 2.0, [0.0]) == pytest.approx([-2.0])
    assert bridge_loss_grad(RegressionData.empty(1), 2.0, 2.0, [1.0]) == pytest.approx([4.0])
    assert bridge_loss_grad(RegressionData.empty(1), 1.0, 1.5, [0.0])[0] == 0.0


def test_bridge_grad_batched_matches_rows():
    data = model.synthetic_regression()
    B = np.random.default_rng(0).normal(size=(5, 3))
    batched = bridge_loss_grad(data, 1.0, 1.3, B)
    for i in range(5):
        assert np.allclose(batched[i], bridge_loss_grad(data, 1.0, 1.3, B[i]), rtol=1e-14)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gamma=st.sampled_from([1.1, 1.5, 2.0]),
       lam=st.floats(0.0, 5.0))
def test_bridge_grad_finite_differences(seed, gamma, lam):
    g = np.random.default_rng(seed)
    n, d = g.integers(1, 10), g.integers(1, 4)
    data = RegressionData(g.normal(size=(n, d)), g.normal(size=n))
    beta = g.choice([-1, 1], size=d) * g.uniform(0.1, 3.0, size=d)
    grad = bridge_loss_grad(data, lam, gamma, beta)
    for j in range(d):
        h = 1e-5
        e = np.zeros(d)
        e[j] = h
        fd = (bridge_loss(data, lam, gamma, beta + e) - bridge_loss(data, lam, gamma, beta - e)) / (2 * h)
        assert abs(grad[j] - fd) <= 1e-6 * max(1.0, abs(fd))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(1.01, 2.0), lam=st.floats(0.0, 5.0))
def test_gradient_monotone(seed, gamma, lam):
    g = np.random.default_rng(seed)
    data = RegressionData(g.normal(size=(5, 3)), g.normal(size=5))
    b1, b2 = g.normal(size=3) * 2, g.normal(size=3) * 2
    inner = (bridge_loss_grad(data, lam, gamma, b1) - bridge_loss_grad(data, lam, gamma, b2)) @ (b1 - b2)
    assert inner >= -1e-10


def test_ridge_without_data_is_exactly_quadratic():
    lam = 1.7
    b1, b2 = np.array([0.3, -2.0]), np.array([1.1, 0.4])
    empty = RegressionData.empty(2)
    inner = (bridge_loss_grad(empty, lam, 2.0, b1) - bridge_loss_grad(empty, lam, 2.0, b2)) @ (b1 - b2)
    assert inner == pytest.approx(2 * lam * np.sum((b1 - b2) ** 2), rel=1e-14)


def test_holder_drift_is_odd():
    x = np.random.default_rng(1).normal(size=(1000, 3)) * 10
    b = drift_eval(model.holder_model(0.5, dim=3), 0.0, x)
    assert np.array_equal(drift_eval(model.holder_model(0.5, dim=3), 0.0, -x), -b)


def test_ridge_and_descent_solutions_agree():
    data = model.synthetic_regression()
    r = model.ridge_solution(data, 1.0)
    assert np.linalg.norm(bridge_loss_grad(data, 1.0, 2.0, r)) < 1e-10
    b = model.bridge_solution_gd(data, 1.0, 2.0)
    assert np.allclose(b, r, atol=1e-12)
    b15 = model.bridge_solution_gd(data, 1.0, 1.5)
    assert np.linalg.norm(bridge_loss_grad(data, 1.0, 1.5, b15)) <= 1e-12


def test_dissipation_probe_examples():
    ou = model.probe_partial_dissipation(model.ou_model(), 5000, 10.0, 0)
    step = model.K2_GRID[1] / model.K2_GRID[0]
    assert ou.K2_hat >= 1 / step
    assert ou.K1_hat <= 1e-6
    h = model.probe_partial_dissipation(model.holder_model(0.5), 5000, 10.0, 0)
    assert h.K2_hat > 0 and np.isfinite(h.K1_hat)
    z = model.probe_partial_dissipation(ZERO, 5000, 10.0, 0)
    assert z.K2_hat == model.K2_GRID[0]
    # the smallest K2 on the grid still costs K2_min * max |x - y|^2
    assert z.K1_hat <= model.K2_GRID[0] * (2 * 10.0) ** 2 * 1.1


def test_holder_dissipation_holds_on_fresh_points():
    m = model.holder_model(0.5)
    probe = model.probe_partial_dissipation(m, 20_000, 100.0, 0)
    x = np.random.default_rng(3).uniform(-100, 100, size=(100_000, 1))
    lhs = np.sum(drift_eval(m, 0.0, x) * x, axis=1)
    # pairs (x, 0) probe the same inequality at y = 0
    assert np.all(lhs <= probe.K1_hat - probe.K2_hat * np.sum(x * x, axis=1) + 1e-9)


def test_holder_modulus_examples():
    assert model.probe_holder_modulus(model.ou_model(dim=2), 5000, 10.0, 1.0) <= 1.0 + 1e-12
    const = ModelSpec(2, CustomDrift(lambda x: np.ones_like(x)), ConstantDiffusion(np.eye(2)), 1.0)
    assert model.probe_holder_modulus(const, 5000, 10.0, 0.5) == 0.0
    vals = [model.probe_holder_modulus(model.holder_model(0.5), 20_000, r, 0.5) for r in (1, 10, 100)]
    assert all(np.isfinite(vals))
    assert max(vals) < 2.0


def test_regression_csv_roundtrip(tmp_path):
    data = model.synthetic_regression(7, 2)
    data.to_csv(tmp_path / "d.csv")
    back = RegressionData.from_csv(tmp_path / "d.csv")
    assert np.array_equal(back.X, data.X) and np.array_equal(back.y, data.y)


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(0, CustomDrift(np.zeros_like), ConstantDiffusion(np.eye(1)), 1.0)
    with pytest.raises(ValueError):
        ModelSpec(2, model.OUDrift(np.eye(3)), ConstantDiffusion(np.eye(2)), 2.0)
    with pytest.raises(ValueError):
        model.bridge_model(model.synthetic_regression(), 1.0, 1.0)

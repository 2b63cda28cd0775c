import numpy as np
import pytest

from dsula import pipeline
from dsula.config import ConfigError, bundled_config, load_config, parse_config

OU = """
seed = 2
x0 = 1.0
n_chains = 2000
model = { drift = "ou", rate = 1.0, dim = 1 }
schedule = { kind = "polynomial", theta = 1.0 }
checkpoints = { lo = 16, hi = 1024, factor = 2 }
reference = { method = "ou_stationary" }
"""


def test_exact_ou_rate_passes():
    res = pipeline.run_rate(load_config(bundled_config("ou_exact.cfg")))
    assert res.check.passed
    assert abs(res.fit.slope + 1) < 0.1


def test_wrong_prediction_fails():
    text = OU + 'distances = [ { estimator = "ExactOULaw" } ]\nrate = { exponent = -2.0, tol = 0.05 }\n'
    res = pipeline.run_rate(parse_config(text))
    assert not res.check.passed and res.check.predicted == -2.0


def test_sample_estimators_run():
    text = OU + ('distances = [ { estimator = "Sorted1D", p = 1.0 }, { estimator = "GaussianClosedForm" },'
                 ' { estimator = "TVHistogram" } ]\n'
                 'rate = { theorem = "T21_W1W0", alpha = 2.0, tol = 0.5 }\n')
    res = pipeline.run_rate(parse_config(text))
    assert len(res.reports) == 7 and all(len(r) == 3 for r in res.reports)
    assert [r.estimator for r in res.reports[0]] == ["Sorted1D", "GaussianClosedForm", "TVHistogram"]


def test_sliced_in_two_dimensions():
    text = OU.replace("dim = 1", "dim = 2").replace(
        'reference = { method = "ou_stationary" }',
        'reference = { method = "exact_gaussian", mean = 0.0, cov_diag = 1.0 }')
    text += 'distances = [ { estimator = "Sliced", p = 2.0, n_proj = 8 } ]\n'
    text += 'rate = { theorem = "T21_W1W0", alpha = 2.0, tol = 1.0 }\n'
    res = pipeline.run_rate(parse_config(text))
    assert all(r[0].estimator == "Sliced" for r in res.reports)


def test_point_estimator_needs_point_reference():
    text = OU + 'distances = [ { estimator = "PointMass" } ]\nrate = { exponent = -1.0, tol = 0.1 }\n'
    with pytest.raises(ConfigError, match="PointMass"):
        pipeline.run_rate(parse_config(text))


def test_unstable_exact_law_is_config_error():
    text = OU.replace("theta = 1.0", "theta = 3.0")
    text += 'distances = [ { estimator = "ExactOULaw" } ]\nrate = { exponent = -1.0, tol = 0.1 }\n'
    with pytest.raises(ConfigError, match="unstable"):
        pipeline.run_rate(parse_config(text))


def test_bridge_resolution():
    cfg = load_config(bundled_config("bridge_gamma15.cfg"))
    res = pipeline.resolve(cfg)
    assert res.K_prime == pytest.approx(res.strong_convexity / 2)
    assert res.theta * res.K_prime == pytest.approx(1.05 * 0.5)
    assert pipeline.predicted_exponent(cfg, res) == pytest.approx(-0.5)


def test_check_report_lines():
    lines = pipeline.run_check(load_config(bundled_config("holder_alpha05.cfg")), 5000).lines
    k2 = float(lines[1].split("K2_hat=")[1])
    assert k2 > 0
    assert any("satisfies" in line for line in lines)

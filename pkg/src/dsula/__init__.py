"""Decreasing-step Euler-Maruyama / unadjusted Langevin sampling with
Wasserstein distance estimators and a convergence-rate harness."""

from .config import ConfigError, ExperimentConfig, bundled_config, load_config, parse_config
from .metric import (
    DistanceReport,
    GaussianLaw,
    ou_em_law,
    ou_em_laws,
    ou_sde_law,
    ou_stationary,
    point_mass_moment,
    sliced_wp,
    tv_histogram,
    w2_gaussian,
    w_p_1d,
    w_p_bruteforce,
)
from .model import (
    ModelSpec,
    RegressionData,
    bridge_loss,
    bridge_loss_grad,
    bridge_model,
    bridge_solution_gd,
    holder_model,
    ou_model,
    probe_holder_modulus,
    probe_partial_dissipation,
    ridge_solution,
    synthetic_regression,
)
from .ratefit import RateCheck, RateFit, RatePrediction, check_rate, fit_rate, predict_exponent
from .schedule import StepSchedule, eta, prefix_times, time_at, validate
from .sim import (
    DivergenceError,
    SampleBatch,
    SamplerConfig,
    ScheduleError,
    reference_samples,
    run_batch,
    run_noisy_gd,
    snapshot_series,
    ula_step,
)

__version__ = "0.1.0"

"""Experiment orchestration: sampling, reference laws, distances and rate checks.

The functions here are what the command-line front end runs; they return
in-memory results and leave file output to :mod:`dsula.cli`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import metric, sim
from .config import ConfigError, ExperimentConfig
from .model import (
    ConstantDiffusion,
    OUDrift,
    bridge_solution_gd,
    probe_holder_modulus,
    probe_partial_dissipation,
    ridge_solution,
)
from .ratefit import RateCheck, RateFit, check_rate, fit_rate, predict_exponent
from .schedule import StepSchedule, prefix_times, validate

SAMPLE_ESTIMATORS = {"Sorted1D", "Sliced", "TVHistogram", "GaussianClosedForm", "PointMass"}


@dataclass
class Resolved:
    """Quantities fixed before sampling (schedule, noise constants)."""

    schedule: StepSchedule
    K_prime: float | None = None
    p_noise: float | None = None
    theta: float | None = None
    strong_convexity: float | None = None


@dataclass
class RateResult:
    ns: list
    times: list
    reports: list  # one list of DistanceReport per checkpoint
    fit: RateFit
    check: RateCheck
    resolved: Resolved
    diverged: int = 0
    extra: dict = field(default_factory=dict)


def resolve(cfg: ExperimentConfig) -> Resolved:
    """Fix the schedule and, for noisy GD, the noise constants.

    With ``noise.K_prime = "auto"`` the constant is half the strong-convexity
    constant reported by the dissipation probe of the gradient flow; with
    ``schedule.theta = "auto"`` the step constant is
    ``theta_factor * (gamma - 1) p / (2 K')``.
    """
    if cfg.bridge is None:
        sched = cfg.build_schedule()
        _validate(sched)
        return Resolved(sched)
    b = cfg.bridge
    p = float(cfg.noise.get("p", 2.0))
    kp = cfg.noise.get("K_prime", "auto")
    K = None
    if kp == "auto":
        probe = probe_partial_dissipation(cfg.model, n_pairs=int(cfg.noise.get("probe_pairs", 20_000)),
                                          radius=float(cfg.noise.get("probe_radius", 5.0)), seed=cfg.seed)
        K = probe.K2_hat
        kp = K / 2.0
    kp = float(kp)
    theta = cfg.schedule.get("theta")
    if theta == "auto":
        theta = float(cfg.schedule.get("theta_factor", 1.05)) * (b["gamma"] - 1.0) * p / (2.0 * kp)
    sched = cfg.build_schedule(theta=float(theta))
    _validate(sched)
    return Resolved(sched, kp, p, float(theta), K)


def _validate(sched: StepSchedule) -> None:
    rep = validate(sched)
    if not rep.valid:
        raise ConfigError(rep.summary())


def _needs_samples(cfg: ExperimentConfig) -> bool:
    return any(d["estimator"] in SAMPLE_ESTIMATORS for d in cfg.distances) or not cfg.distances


def sample_batches(cfg: ExperimentConfig, res: Resolved | None = None) -> list:
    """Batches at every checkpoint from a single run."""
    res = res or resolve(cfg)
    n_steps = cfg.checkpoints[-1]
    if cfg.bridge is not None:
        b = cfg.bridge
        sig = sim.bridge_noise_scale(res.K_prime, res.theta, res.p_noise)
        batches = sim.run_noisy_gd(b["data"], b["lam"], b["gamma"], res.schedule, sig, cfg.x0,
                                   n_steps, cfg.n_chains, cfg.seed, checkpoints=cfg.checkpoints)
    else:
        sc = sim.SamplerConfig(cfg.model, res.schedule, cfg.x0, n_steps, cfg.n_chains, cfg.seed)
        batches = sim.snapshot_series(sc, cfg.checkpoints)
    for batch in batches:
        sim.enforce_divergence_budget(batch, cfg.n_chains)
    return batches


def _ou_params(cfg: ExperimentConfig) -> tuple[float, float]:
    m = cfg.model
    if not isinstance(m.drift, OUDrift) or not isinstance(m.diffusion, ConstantDiffusion):
        raise ConfigError("ExactOULaw needs an OU model with constant diffusion")
    A, S = np.asarray(m.drift.A), np.asarray(m.diffusion.sigma)
    a, s = float(A[0, 0]), float(S[0, 0])
    if not (np.allclose(A, a * np.eye(m.dim)) and np.allclose(S, s * np.eye(m.dim))):
        raise ConfigError("ExactOULaw needs an isotropic OU model (A = a I, sigma = s I)")
    return a, s


@dataclass
class Reference:
    samples: np.ndarray | None = None
    law: metric.GaussianLaw | None = None
    target: np.ndarray | None = None


def build_reference(cfg: ExperimentConfig) -> Reference:
    r = cfg.reference
    method = r["method"]
    n = int(r.get("n_samples", cfg.n_chains))
    ref = Reference()
    if method == "ou_stationary":
        a, s = _ou_params(cfg)
        ref.law = metric.ou_stationary(a, s, cfg.model.dim)
        if any(d["estimator"] in SAMPLE_ESTIMATORS - {"GaussianClosedForm", "PointMass"} for d in cfg.distances):
            spec = sim.ReferenceSpec(sim.ExactGaussian(tuple(ref.law.mean), tuple(ref.law.diagonal())), n)
            ref.samples = sim.reference_samples(spec, cfg.seed).values
    elif method == "exact_gaussian":
        mean = np.broadcast_to(np.asarray(r.get("mean", 0.0), dtype=float), (cfg.model.dim,))
        cov = np.broadcast_to(np.asarray(r.get("cov_diag", 1.0), dtype=float), (cfg.model.dim,))
        ref.law = metric.GaussianLaw(mean.copy(), cov.copy())
        spec = sim.ReferenceSpec(sim.ExactGaussian(tuple(mean), tuple(cov)), n)
        ref.samples = sim.reference_samples(spec, cfg.seed).values
    elif method == "rejection1d":
        if cfg.model.dim != 1:
            raise ConfigError("rejection1d reference is one-dimensional")
        alpha = float(r.get("alpha", getattr(cfg.model.drift, "alpha", 1.0)))
        spec = sim.ReferenceSpec(sim.Rejection1D(alpha, float(r.get("proposal_sd", math.sqrt(2.0)))), n)
        try:
            ref.samples = sim.reference_samples(spec, cfg.seed).values
        except ValueError as exc:
            raise ConfigError(f"reference: {exc}") from exc
    elif method == "fine_grid_em":
        fg = sim.FineGridEM(cfg.model, float(r.get("eta", 1e-3)), float(r.get("t_burn", 20.0)),
                            float(r.get("spacing", 1.0)), int(r.get("n_chains", 1000)))
        ref.samples = sim.reference_samples(sim.ReferenceSpec(fg, n), cfg.seed).values
    elif method == "ridge_closed_form":
        b = cfg.bridge
        if b is None or b["gamma"] != 2.0:
            raise ConfigError("ridge_closed_form needs a bridge model with gamma = 2")
        ref.target = ridge_solution(b["data"], b["lam"])
    elif method == "bridge_gd":
        b = cfg.bridge
        if b is None:
            raise ConfigError("bridge_gd needs a bridge model")
        ref.target = bridge_solution_gd(b["data"], b["lam"], b["gamma"], tol=float(r.get("tol", 1e-12)))
    return ref


def _distance(spec: dict, batch: np.ndarray | None, ref: Reference, seed: int) -> metric.DistanceReport:
    est = spec["estimator"]
    p = float(spec.get("p", 1.0))
    need_samples = est in ("Sorted1D", "Sliced", "TVHistogram")
    if need_samples and ref.samples is None:
        raise ConfigError(f"{est} needs a sample-based reference")
    with warnings.catch_warnings():
        # unequal sizes are trimmed and recorded in the report meta
        warnings.simplefilter("ignore")
        if est == "Sorted1D":
            if batch.shape[1] != 1:
                raise ConfigError("Sorted1D needs d = 1; use Sliced")
            return metric.w_p_1d(batch[:, 0], ref.samples[:, 0], p)
        if est == "Sliced":
            return metric.sliced_wp(batch, ref.samples, p, int(spec.get("n_proj", 64)), seed)
        if est == "TVHistogram":
            return metric.tv_histogram(batch, ref.samples, spec.get("bins"))
    if est == "GaussianClosedForm":
        if ref.law is None:
            raise ConfigError("GaussianClosedForm needs a Gaussian reference law")
        fitted = metric.GaussianLaw(batch.mean(axis=0), batch.var(axis=0))
        return metric.DistanceReport(2.0, est, metric.w2_gaussian(fitted, ref.law), None,
                                     {"n_a": len(batch), "n_b": 0})
    if est == "PointMass":
        if ref.target is None:
            raise ConfigError("PointMass needs a point reference (ridge_closed_form or bridge_gd)")
        return metric.point_mass_moment(batch, ref.target, float(spec.get("p", 2.0)))
    raise ConfigError(f"estimator {est} not available here")


def distance_table(cfg: ExperimentConfig, res: Resolved, batches, ref: Reference) -> list:
    """One list of reports per checkpoint, in config order."""
    rows = []
    ou_laws = None
    if any(d["estimator"] == "ExactOULaw" for d in cfg.distances):
        a, s = _ou_params(cfg)
        try:
            ou_laws = metric.ou_em_laws(a, s, res.schedule, cfg.x0, cfg.checkpoints)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        stationary = metric.ou_stationary(a, s, cfg.model.dim)
    for i, n in enumerate(cfg.checkpoints):
        reports = []
        for spec in cfg.distances:
            if spec["estimator"] == "ExactOULaw":
                w = metric.w2_gaussian(ou_laws[i], stationary)
                reports.append(metric.DistanceReport(2.0, "ExactOULaw", w, None, {"n": int(n)}))
            else:
                reports.append(_distance(spec, batches[i].values, ref, cfg.seed))
        rows.append(reports)
    return rows


def predicted_exponent(cfg: ExperimentConfig, res: Resolved) -> float:
    r = cfg.rate
    if "exponent" in r:
        return float(r["exponent"])
    theta_K2 = res.theta * res.K_prime if res.theta is not None else None
    pred = cfg.prediction(theta_K2)
    e = predict_exponent(pred)
    if r.get("moment", False):
        e *= pred.p
    return e


def run_rate(cfg: ExperimentConfig) -> RateResult:
    """Full pipeline: snapshots, reference, distances, slope fit, rate check."""
    if cfg.rate is None:
        raise ConfigError("config has no [rate] section")
    res = resolve(cfg)
    batches = sample_batches(cfg, res) if _needs_samples(cfg) else [None] * len(cfg.checkpoints)
    ref = build_reference(cfg)
    table = distance_table(cfg, res, batches, ref)
    idx = int(cfg.rate.get("distance", 0))
    values = [row[idx].value for row in table]
    try:
        fit = fit_rate(cfg.checkpoints, values, float(cfg.rate.get("drop_fraction", 0.25)))
    except ValueError as exc:
        raise ConfigError(f"rate fit: {exc}") from exc
    check = check_rate(fit, predicted_exponent(cfg, res), float(cfg.rate["tol"]))
    times = prefix_times(res.schedule, cfg.checkpoints[-1])[cfg.checkpoints].tolist()
    diverged = max((b.diverged_count for b in batches if b is not None), default=0)
    extra = {"batches": batches, "reference": ref}
    return RateResult(list(cfg.checkpoints), times, table, fit, check, res, diverged, extra)


@dataclass
class CheckReport:
    lines: list

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def run_check(cfg: ExperimentConfig, n_pairs: int = 20_000, radius: float = 10.0) -> CheckReport:
    """Assumption probes and schedule validation, as text lines."""
    m = cfg.model
    lines = [f"model: {m.name} (dim={m.dim}, declared alpha={m.declared_alpha}, "
             f"dissipation={m.dissipation_class})"]
    probe = probe_partial_dissipation(m, n_pairs, radius, cfg.seed)
    lines.append(f"partial dissipation probe (radius {radius:g}, {n_pairs} pairs): "
                 f"K1_hat={probe.K1_hat:.6g} K2_hat={probe.K2_hat:.6g}")
    alpha = min(1.0, m.declared_alpha)
    mod = probe_holder_modulus(m, n_pairs, radius, alpha, cfg.seed)
    lines.append(f"holder modulus probe (alpha={alpha:g}): K1_hat={mod:.6g}")
    if cfg.schedule.get("theta") == "auto":
        try:
            res = resolve(cfg)
            lines.append(f"schedule: {res.schedule.describe()} (K'={res.K_prime:.6g})")
            rep = validate(res.schedule)
        except ConfigError as exc:
            lines.append(f"schedule: {exc}")
            return CheckReport(lines)
    else:
        rep = validate(cfg.build_schedule())
        lines.append(f"schedule: {cfg.build_schedule().describe()}")
    lines.append(rep.summary())
    return CheckReport(lines)

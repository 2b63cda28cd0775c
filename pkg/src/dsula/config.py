"""Experiment configuration files.

A config is a TOML document. Unknown keys anywhere are errors. Example::

    name = "ou_exact"
    seed = 1
    x0 = 1.0
    n_chains = 1000
    model = { drift = "ou", rate = 1.0, dim = 1, diffusion = { kind = "constant", scale = 1.4142135623730951 } }
    schedule = { kind = "polynomial", theta = 2.0, a = 1.0 }
    checkpoints = { lo = 64, hi = 65536, factor = 2 }
    reference = { method = "ou_stationary" }
    distances = [ { estimator = "ExactOULaw", p = 2.0 } ]
    rate = { theorem = "T21_W1W0", alpha = 2.0, tol = 0.1 }
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .metric import ESTIMATORS
from .model import (
    ConstantDiffusion,
    CustomDrift,
    DecayingScalarDiffusion,
    ModelSpec,
    RegressionData,
    bridge_model,
    holder_model,
    ou_model,
)
from .ratefit import THEOREMS, RatePrediction
from .schedule import StepSchedule


class ConfigError(ValueError):
    """Malformed or inconsistent experiment config."""


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return section[key]


@dataclass
class ExperimentConfig:
    name: str
    model: ModelSpec
    schedule: dict
    n_chains: int
    checkpoints: list
    reference: dict
    distances: list
    rate: dict | None
    seed: int
    output_dir: Path
    x0: np.ndarray
    noise: dict | None = None
    bridge: dict | None = None
    source: Path | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def build_schedule(self, theta: float | None = None) -> StepSchedule:
        s = self.schedule
        kind = s["kind"]
        if kind == "polynomial":
            return StepSchedule.polynomial(theta if theta is not None else s["theta"], s.get("a", 1.0))
        if kind == "constant":
            return StepSchedule.constant(s["eta"])
        return StepSchedule.explicit(s["values"])

    def prediction(self, theta_K2: float | None = None) -> RatePrediction:
        r = self.rate
        tk = r.get("theta_K2", math.inf)
        if tk == "auto":
            if theta_K2 is None:
                raise ConfigError("rate.theta_K2 = 'auto' needs a noisy-GD experiment")
            tk = theta_K2
        return RatePrediction(r["theorem"], float(r["alpha"]), float(r.get("p", 1.0)), float(tk))


def _model(sec: dict, base: Path) -> tuple[ModelSpec, dict | None]:
    where = "model"
    if not isinstance(sec, dict):
        raise ConfigError("model must be a table")
    drift = _require(sec, "drift", where)
    dim = int(sec.get("dim", 1))
    diff = sec.get("diffusion", {"kind": "constant", "scale": math.sqrt(2.0)})
    if not isinstance(diff, dict):
        raise ConfigError("model.diffusion must be a table")
    kind = _require(diff, "kind", "model.diffusion")
    if kind == "constant":
        _check_keys(diff, ["kind", "scale", "matrix"], "model.diffusion")
        if "matrix" in diff:
            sigma = np.asarray(diff["matrix"], dtype=float)
        else:
            sigma = float(diff.get("scale", math.sqrt(2.0))) * np.eye(dim)
        diffusion = ConstantDiffusion(sigma)
    elif kind == "decaying":
        _check_keys(diff, ["kind", "K_prime", "p"], "model.diffusion")
        diffusion = DecayingScalarDiffusion(float(_require(diff, "K_prime", "model.diffusion")),
                                            float(diff.get("p", 2.0)))
    else:
        raise ConfigError(f"model.diffusion.kind must be 'constant' or 'decaying', got {kind!r}")

    bridge = None
    try:
        if drift == "ou":
            _check_keys(sec, ["drift", "dim", "rate", "diffusion"], where)
            rate = sec.get("rate", 1.0)
            m = ou_model(np.asarray(rate, dtype=float), 1.0, dim)
            m = ModelSpec(dim, m.drift, diffusion, 2.0, "Uniform", "ou")
        elif drift == "holder":
            _check_keys(sec, ["drift", "dim", "alpha", "diffusion"], where)
            m = holder_model(float(_require(sec, "alpha", where)), dim)
            m = ModelSpec(dim, m.drift, diffusion, m.declared_alpha, "Partial", "holder")
        elif drift == "zero":
            _check_keys(sec, ["drift", "dim", "diffusion"], where)
            m = ModelSpec(dim, CustomDrift(np.zeros_like), diffusion, 1.0, "Unknown", "zero")
        elif drift == "bridge":
            _check_keys(sec, ["drift", "dim", "dataset", "lambda", "gamma"], where)
            path = base / _require(sec, "dataset", where)
            try:
                data = RegressionData.from_csv(path)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"model.dataset: {exc}") from exc
            lam = float(sec.get("lambda", 0.0))
            gamma = float(_require(sec, "gamma", where))
            m = bridge_model(data, lam, gamma)
            if "dim" in sec and dim != data.dim:
                raise ConfigError(f"model.dim = {dim} but dataset has {data.dim} features")
            bridge = {"data": data, "lam": lam, "gamma": gamma}
        else:
            raise ConfigError(f"model.drift must be one of ou, holder, zero, bridge; got {drift!r}")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    return m, bridge


def _schedule(sec) -> dict:
    if not isinstance(sec, dict):
        raise ConfigError("schedule must be a table")
    kind = _require(sec, "kind", "schedule")
    if kind == "polynomial":
        _check_keys(sec, ["kind", "theta", "a", "theta_factor"], "schedule")
        theta = _require(sec, "theta", "schedule")
        if theta != "auto" and not (isinstance(theta, (int, float)) and theta > 0):
            raise ConfigError("schedule.theta must be positive or 'auto'")
        if "theta_factor" in sec and theta != "auto":
            raise ConfigError("schedule.theta_factor only applies with theta = 'auto'")
    elif kind == "constant":
        _check_keys(sec, ["kind", "eta"], "schedule")
        if not float(_require(sec, "eta", "schedule")) > 0:
            raise ConfigError("schedule.eta must be positive")
    elif kind == "explicit":
        _check_keys(sec, ["kind", "values"], "schedule")
        vals = _require(sec, "values", "schedule")
        if not isinstance(vals, list) or not vals:
            raise ConfigError("schedule.values must be a non-empty list")
    else:
        raise ConfigError(f"schedule.kind must be polynomial, constant or explicit; got {kind!r}")
    return dict(sec)


def _checkpoints(sec) -> list:
    if isinstance(sec, list):
        cps = [int(c) for c in sec]
    elif isinstance(sec, dict):
        _check_keys(sec, ["lo", "hi", "factor"], "checkpoints")
        lo, hi = int(_require(sec, "lo", "checkpoints")), int(_require(sec, "hi", "checkpoints"))
        factor = int(sec.get("factor", 2))
        if lo < 1 or hi < lo or factor < 2:
            raise ConfigError("checkpoints need 1 <= lo <= hi and integer factor >= 2")
        cps, c = [], lo
        while c <= hi:
            cps.append(c)
            c *= factor
    else:
        raise ConfigError("checkpoints must be a list or a {lo, hi, factor} table")
    if not cps or cps[0] < 1 or any(b <= a for a, b in zip(cps, cps[1:])):
        raise ConfigError("checkpoints must be positive and strictly increasing")
    return cps


REFERENCE_KEYS = {
    "ou_stationary": [],
    "exact_gaussian": ["mean", "cov_diag", "n_samples"],
    "rejection1d": ["alpha", "proposal_sd", "n_samples"],
    "fine_grid_em": ["eta", "t_burn", "spacing", "n_chains", "n_samples"],
    "ridge_closed_form": [],
    "bridge_gd": ["tol"],
}


def _reference(sec) -> dict:
    if not isinstance(sec, dict):
        raise ConfigError("reference must be a table")
    method = _require(sec, "method", "reference")
    if method not in REFERENCE_KEYS:
        raise ConfigError(f"reference.method must be one of {', '.join(REFERENCE_KEYS)}; got {method!r}")
    _check_keys(sec, ["method"] + REFERENCE_KEYS[method], "reference")
    return dict(sec)


DISTANCE_KEYS = {
    "Sorted1D": ["p"],
    "Sliced": ["p", "n_proj"],
    "TVHistogram": ["bins"],
    "GaussianClosedForm": [],
    "ExactOULaw": ["p"],
    "PointMass": ["p"],
}


def _distances(sec) -> list:
    if not isinstance(sec, list):
        raise ConfigError("distances must be a list of tables")
    out = []
    for i, d in enumerate(sec):
        where = f"distances[{i}]"
        if not isinstance(d, dict):
            raise ConfigError(f"{where} must be a table")
        est = _require(d, "estimator", where)
        if est not in ESTIMATORS:
            raise ConfigError(f"{where}.estimator must be one of {', '.join(ESTIMATORS)}")
        _check_keys(d, ["estimator"] + DISTANCE_KEYS[est], where)
        if est == "ExactOULaw" and float(d.get("p", 2.0)) != 2.0:
            raise ConfigError(f"{where}: ExactOULaw is a W_2 distance (p = 2)")
        out.append(dict(d))
    return out


def _rate(sec, n_distances: int) -> dict:
    if not isinstance(sec, dict):
        raise ConfigError("rate must be a table")
    _check_keys(sec, ["theorem", "alpha", "p", "theta_K2", "tol", "distance", "drop_fraction",
                      "moment", "exponent"], "rate")
    if "exponent" not in sec:
        th = _require(sec, "theorem", "rate")
        if th not in THEOREMS:
            raise ConfigError(f"rate.theorem must be one of {', '.join(THEOREMS)}")
        _require(sec, "alpha", "rate")
    _require(sec, "tol", "rate")
    if n_distances == 0:
        raise ConfigError("rate requested but no distances configured")
    idx = int(sec.get("distance", 0))
    if not 0 <= idx < n_distances:
        raise ConfigError(f"rate.distance = {idx} does not name a configured distance")
    df = float(sec.get("drop_fraction", 0.25))
    if not 0 <= df < 1:
        raise ConfigError("rate.drop_fraction must lie in [0, 1)")
    return dict(sec)


def _noise(sec) -> dict:
    if not isinstance(sec, dict):
        raise ConfigError("noise must be a table")
    _check_keys(sec, ["K_prime", "p", "probe_radius", "probe_pairs"], "noise")
    kp = sec.get("K_prime", "auto")
    if kp != "auto" and not (isinstance(kp, (int, float)) and kp > 0):
        raise ConfigError("noise.K_prime must be positive or 'auto'")
    return dict(sec)


TOP_KEYS = ["name", "seed", "x0", "n_chains", "model", "schedule", "checkpoints", "reference",
            "distances", "rate", "noise", "output_dir"]


def parse_config(text: str, base: Path | str = ".", source: Path | None = None) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from exc
    base = Path(base)
    _check_keys(raw, TOP_KEYS, "config")
    model, bridge = _model(_require(raw, "model", "config"), base)
    schedule = _schedule(_require(raw, "schedule", "config"))
    if schedule.get("theta") == "auto" and bridge is None:
        raise ConfigError("schedule.theta = 'auto' is only defined for bridge models")
    cps = _checkpoints(_require(raw, "checkpoints", "config"))
    reference = _reference(raw.get("reference", {"method": "ou_stationary"}))
    distances = _distances(raw.get("distances", []))
    rate = _rate(raw["rate"], len(distances)) if "rate" in raw else None
    noise = _noise(raw["noise"]) if "noise" in raw else None
    if bridge is not None and noise is None:
        noise = {"K_prime": "auto", "p": 2.0}
    if noise is not None and bridge is None:
        raise ConfigError("noise only applies to bridge models")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    n_chains = raw.get("n_chains", 1000)
    if not isinstance(n_chains, int) or n_chains < 1:
        raise ConfigError("n_chains must be a positive integer")
    x0 = np.asarray(raw.get("x0", 0.0), dtype=float)
    if x0.ndim == 0:
        x0 = np.full(model.dim, float(x0))
    if x0.shape != (model.dim,):
        raise ConfigError(f"x0 must be a scalar or a list of length {model.dim}")
    name = str(raw.get("name", source.stem if source else "experiment"))
    out = Path(raw.get("output_dir", f"out/{name}"))
    return ExperimentConfig(name, model, schedule, n_chains, cps, reference, distances, rate,
                            seed, out, x0, noise, bridge, source, raw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base=path.parent, source=path)


def bundled_config(name: str) -> Path:
    """Path of one of the configs shipped with the package."""
    return Path(__file__).parent / "configs" / name

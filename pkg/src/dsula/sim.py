"""Decreasing-step Euler-Maruyama (ULA) chains, noisy gradient descent and
reference samplers.

All chains of a run are advanced together as an ``(n_chains, d)`` array.
Chain ``c`` draws its Gaussian increments from the counter-based stream keyed
by ``(seed, chain_ids[c])`` (see :mod:`dsula.rng`); the increment of step
``k`` occupies stream positions ``(k-1)*d .. k*d - 1``. A chain's trajectory
is therefore a function of its own key only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .model import (
    ModelSpec,
    RegressionData,
    diffusion_eval,
    drift_eval,
    state_independent_diffusion,
)
from .schedule import StepSchedule, prefix_times, validate

MAX_DIVERGED_FRACTION = 1e-3
# noise block size in array elements; bounds memory per block
_BLOCK_ELEMS = 1 << 22


class DivergenceError(RuntimeError):
    """Too many chains produced non-finite states."""


class ScheduleError(ValueError):
    """The schedule fails validation and no override was given."""


@dataclass
class SamplerConfig:
    model: ModelSpec
    schedule: StepSchedule
    x0: np.ndarray
    n_steps: int
    n_chains: int
    seed: int = 0
    chain_ids: np.ndarray | None = None
    allow_invalid_schedule: bool = False

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        x0 = np.asarray(self.x0, dtype=float)
        if x0.ndim == 0:
            x0 = np.full(self.model.dim, float(x0))
        if x0.shape != (self.model.dim,):
            raise ValueError(f"x0 must have dimension {self.model.dim}")
        self.x0 = x0
        if self.chain_ids is None:
            self.chain_ids = np.arange(self.n_chains)
        self.chain_ids = np.asarray(self.chain_ids, dtype=np.int64)
        if self.chain_ids.shape != (self.n_chains,):
            raise ValueError("chain_ids must have one entry per chain")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class SampleBatch:
    """States of the surviving chains at step ``step_index``.

    ``values`` has one row per surviving chain; ``chain_ids`` names them.
    Chains that produced non-finite states are listed in ``diverged`` as
    ``(chain_id, step)`` pairs and excluded.
    """

    values: np.ndarray
    step_index: int
    time: float
    provenance: dict
    chain_ids: np.ndarray | None = None
    diverged: list = field(default_factory=list)

    @property
    def n_chains(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def diverged_count(self) -> int:
        return len(self.diverged)


# ---------------------------------------------------------------- single step


def ula_step(y, m: ModelSpec, t_prev: float, eta_next: float, noise) -> np.ndarray:
    """One Euler-Maruyama step ``y + eta b(y) + sigma(y) sqrt(eta) noise``.

    Works on a point ``(d,)`` or a batch ``(n, d)``. Raises ``FloatingPointError``
    if the result is not finite.
    """
    if not eta_next > 0:
        raise ValueError("step size must be positive")
    y = np.asarray(y, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != y.shape:
        raise ValueError(f"noise shape {noise.shape} does not match state shape {y.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = y + eta_next * drift_eval(m, t_prev, y) + _apply_sigma(
            diffusion_eval(m, t_prev, y), np.sqrt(eta_next) * noise)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("ULA step produced a non-finite state")
    return out


def _apply_sigma(sigma: np.ndarray, z: np.ndarray) -> np.ndarray:
    if sigma.ndim == 3:
        return np.einsum("nij,nj->ni", sigma, z)
    return z @ sigma.T


# ---------------------------------------------------------------- engine


def _provenance(model_name: str, schedule: StepSchedule, seed: int, **extra) -> dict:
    prov = {"model": model_name, "schedule": schedule.describe(), "seed": int(seed),
            "generator": rng.GENERATOR_TAG}
    prov.update(extra)
    return prov


def _evolve(x0, chain_ids, seed, schedule, n_steps, checkpoints, advance, dim, provenance):
    """Shared chain loop.

    ``advance(k, t_prev, eta, y, z)`` returns the state after step ``k`` for the
    active rows ``y`` given standard-normal increments ``z``.
    """
    keys = rng.chain_keys(seed, chain_ids)
    ids = np.asarray(chain_ids).copy()
    y = np.tile(np.asarray(x0, dtype=float), (len(ids), 1))
    times = prefix_times(schedule, n_steps)
    etas = schedule.etas(1, n_steps + 1)
    diverged = []
    out = []
    cps = list(checkpoints)
    ci = 0
    block = max(1, min(n_steps, _BLOCK_ELEMS // max(1, len(ids) * dim)))
    k = 1
    while k <= n_steps:
        kb = min(block, n_steps - k + 1)
        z_block = rng.normals(keys, (k - 1) * dim, kb * dim).reshape(len(ids), kb, dim)
        for j in range(kb):
            step = k + j
            with np.errstate(over="ignore", invalid="ignore"):
                y = advance(step, times[step - 1], etas[step - 1], y, z_block[:, j, :])
            finite = np.isfinite(y).all(axis=1)
            if not finite.all():
                bad = np.nonzero(~finite)[0]
                diverged.extend((int(ids[b]), step) for b in bad)
                keep = finite
                y, ids, keys = y[keep], ids[keep], keys[keep]
                z_block = z_block[keep]
            if ci < len(cps) and step == cps[ci]:
                out.append(SampleBatch(y.copy(), step, float(times[step]), dict(provenance),
                                       ids.copy(), list(diverged)))
                ci += 1
        k += kb
    return out


def _ula_advance(m: ModelSpec):
    fixed_sigma = state_independent_diffusion(m)

    def advance(step, t_prev, eta_k, y, z):
        b = drift_eval(m, t_prev, y)
        sig = diffusion_eval(m, t_prev, y if not fixed_sigma else y[:1])
        return y + eta_k * b + _apply_sigma(sig, np.sqrt(eta_k) * z)

    return advance


def _check_schedule(cfg: SamplerConfig) -> None:
    if cfg.allow_invalid_schedule:
        return
    rep = validate(cfg.schedule)
    if not rep.valid:
        raise ScheduleError(rep.summary())


def snapshot_series(cfg: SamplerConfig, checkpoints) -> list[SampleBatch]:
    """Batches at each checkpoint step, all taken from one run of ``cfg``."""
    cps = [int(c) for c in checkpoints]
    if not cps or any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1 or cps[-1] > cfg.n_steps:
        raise ValueError("checkpoints must be strictly increasing within 1..n_steps")
    _check_schedule(cfg)
    m = cfg.model
    prov = _provenance(m.name, cfg.schedule, cfg.seed, sampler="ula")
    return _evolve(cfg.x0, cfg.chain_ids, cfg.seed, cfg.schedule, cps[-1], cps,
                   _ula_advance(m), m.dim, prov)


def run_batch(cfg: SamplerConfig) -> SampleBatch:
    """Run ``cfg.n_chains`` independent chains for ``cfg.n_steps`` steps."""
    return snapshot_series(cfg, [cfg.n_steps])[0]


def enforce_divergence_budget(batch: SampleBatch, n_chains: int,
                              max_fraction: float = MAX_DIVERGED_FRACTION) -> None:
    if batch.diverged_count > max_fraction * n_chains:
        first = batch.diverged[0]
        raise DivergenceError(
            f"{batch.diverged_count} of {n_chains} chains diverged "
            f"(first: chain {first[0]} at step {first[1]})")


# ---------------------------------------------------------------- noisy GD


def bridge_noise_scale(K_prime: float, theta: float, p: float):
    """Noise sequence ``sigma_k = min(k^(-K' theta/p) (theta ln k)^(-2/p), 1)``.

    ``sigma_1 = sigma_2 = 1`` since ``ln 1 = 0``.
    """

    def sigma(k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        out = np.ones_like(k)
        big = k > 2
        kb = k[big]
        out[big] = np.minimum(kb ** (-K_prime * theta / p) * (theta * np.log(kb)) ** (-2.0 / p), 1.0)
        return out

    return sigma


def run_noisy_gd(data: RegressionData, lam: float, gamma: float, schedule: StepSchedule,
                 noise_scale, beta0, n_steps: int, n_chains: int, seed: int = 0,
                 checkpoints=None, chain_ids=None):
    """Gradient descent with decaying Gaussian noise on the bridge objective.

    Iterates ``beta_{k+1} = beta_k - eta_{k+1} grad L(beta_k)
    + sqrt(eta_{k+1}) sigma_{k+1} zeta_{k+1}``. ``noise_scale`` is a callable
    mapping an integer array ``k`` to ``sigma_k`` or an explicit sequence with
    ``sigma_1`` first. Returns one batch, or a list if ``checkpoints`` is given.
    """
    if not 1 < gamma <= 2:
        raise ValueError("gamma must lie in (1, 2]")
    d = data.dim
    ks = np.arange(1, n_steps + 1)
    if callable(noise_scale):
        sig = np.asarray(noise_scale(ks), dtype=float)
    else:
        sig = np.asarray(noise_scale, dtype=float)[:n_steps]
        if sig.shape[0] < n_steps:
            raise ValueError(f"noise_scale provides {sig.shape[0]} values, need {n_steps}")
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.ndim == 0:
        beta0 = np.full(d, float(beta0))
    if chain_ids is None:
        chain_ids = np.arange(n_chains)
    rep = validate(schedule)
    if not rep.valid:
        raise ScheduleError(rep.summary())

    XtX = data.X.T @ data.X
    Xty = data.X.T @ data.y

    def advance(step, t_prev, eta_k, y, z):
        g = 2.0 * (y @ XtX - Xty)
        if lam:
            if gamma == 2.0:
                g = g + 2.0 * lam * y
            else:
                ab = np.abs(y)
                g = g + lam * gamma * ab ** (gamma - 1.0) * np.sign(y)
        return y - eta_k * g + (np.sqrt(eta_k) * sig[step - 1]) * z

    cps = [n_steps] if checkpoints is None else [int(c) for c in checkpoints]
    prov = _provenance("bridge", schedule, seed, sampler="noisy_gd", lam=float(lam), gamma=float(gamma))
    out = _evolve(beta0, chain_ids, seed, schedule, cps[-1], cps, advance, d, prov)
    return out[0] if checkpoints is None else out


# ---------------------------------------------------------------- references


@dataclass(frozen=True)
class FineGridEM:
    model: ModelSpec
    eta: float = 1e-3
    t_burn: float = 20.0
    spacing: float = 1.0
    n_chains: int = 1000
    x0: float = 0.0


@dataclass(frozen=True)
class Rejection1D:
    alpha: float
    proposal_sd: float = float(np.sqrt(2.0))


@dataclass(frozen=True)
class ExactGaussian:
    mean: tuple
    cov_diag: tuple


@dataclass(frozen=True)
class ReferenceSpec:
    method: object
    n_samples: int


def holder_log_target(alpha: float, x) -> np.ndarray:
    """Unnormalised log density ``-x^2/2 + |x|^(alpha+1)/4`` (1-D)."""
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x + 0.25 * np.abs(x) ** (alpha + 1.0)


def _golden_max(f, lo: float, hi: float, tol: float = 1e-12) -> tuple[float, float]:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def rejection_envelope(alpha: float, proposal_sd: float) -> float:
    """Log of ``M = max_x target(x) / exp(-x^2 / (2 s^2))`` over ``|x| <= 50``.

    The log-ratio is even and unimodal on ``[0, 50]`` so golden-section search
    on the half line finds the maximum; the endpoints are checked as well.
    """
    s2 = proposal_sd ** 2

    def g(x):
        return float(holder_log_target(alpha, x) + x * x / (2.0 * s2))

    x, gx = _golden_max(g, 0.0, 50.0)
    return max(gx, g(0.0), g(50.0))


def _rejection_1d(spec: Rejection1D, n: int, seed: int) -> tuple[np.ndarray, float]:
    s = rng.Stream(seed, domain=31)
    s2 = spec.proposal_sd ** 2
    if s2 <= 0:
        raise ValueError("proposal_sd must be positive")
    logM = rejection_envelope(spec.alpha, spec.proposal_sd) + 1e-12
    out = []
    have = 0
    tried = 0
    while have < n:
        m = max(1024, int(1.2 * (n - have)) + 64)
        z = spec.proposal_sd * s.normal(m)
        u = s.uniform(m)
        log_ratio = holder_log_target(spec.alpha, z) + z * z / (2.0 * s2) - logM
        if np.any(log_ratio > 0):
            raise ValueError("rejection envelope violated; increase proposal_sd")
        acc = z[np.log(u) < log_ratio]
        tried += m
        out.append(acc)
        have += len(acc)
        if tried >= 100_000 and have / tried < 1e-3:
            raise ValueError(f"rejection acceptance rate {have / tried:.2e} below 1e-3")
    return np.concatenate(out)[:n], have / tried


def reference_samples(spec: ReferenceSpec, seed: int = 0) -> SampleBatch:
    """Samples standing in for the invariant law."""
    method, n = spec.method, int(spec.n_samples)
    if n < 1:
        raise ValueError("n_samples must be >= 1")
    prov = {"reference": type(method).__name__, "seed": int(seed), "generator": rng.GENERATOR_TAG}
    if isinstance(method, ExactGaussian):
        mean = np.asarray(method.mean, dtype=float)
        sd = np.sqrt(np.asarray(method.cov_diag, dtype=float))
        z = rng.Stream(seed, domain=32).normal(n * len(mean)).reshape(n, len(mean))
        return SampleBatch(mean + sd * z, 0, 0.0, prov)
    if isinstance(method, Rejection1D):
        vals, rate = _rejection_1d(method, n, seed)
        prov["acceptance_rate"] = rate
        return SampleBatch(vals[:, None], 0, 0.0, prov)
    if isinstance(method, FineGridEM):
        return _fine_grid(method, n, seed, prov)
    raise TypeError(f"unknown reference method {type(method).__name__}")


def _fine_grid(method: FineGridEM, n: int, seed: int, prov: dict) -> SampleBatch:
    m = method.model
    chains = min(method.n_chains, n)
    per_chain = -(-n // chains)
    burn_steps = int(np.ceil(method.t_burn / method.eta))
    gap = max(1, int(np.ceil(method.spacing / method.eta)))
    cps = [burn_steps + i * gap for i in range(per_chain)]
    cfg = SamplerConfig(m, StepSchedule.constant(method.eta), np.full(m.dim, method.x0),
                        cps[-1], chains, seed, allow_invalid_schedule=True)
    batches = snapshot_series(cfg, cps)
    vals = np.concatenate([b.values for b in batches])[:n]
    prov["burn_steps"], prov["gap_steps"] = burn_steps, gap
    return SampleBatch(vals, 0, 0.0, prov)


# ---------------------------------------------------------------- persistence

MAGIC = b"ULAB1"


def write_binary(batch: SampleBatch, path) -> None:
    """``ULAB1`` magic, little-endian ``u32 n_chains, u32 d``, then f64 rows."""
    vals = np.ascontiguousarray(batch.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", vals.shape[0], vals.shape[1]))
        fh.write(vals.tobytes(order="C"))


def read_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(5) != MAGIC:
            raise ValueError(f"{path}: not a ULAB1 batch file")
        n, d = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(8 * n * d), dtype="<f8")
    if data.size != n * d:
        raise ValueError(f"{path}: truncated batch file")
    return data.reshape(n, d).astype(float)


def write_csv(batch: SampleBatch, path) -> None:
    """CSV with header ``chain, x_1, ..., x_d``; floats in 17-digit scientific form."""
    ids = batch.chain_ids if batch.chain_ids is not None else np.arange(batch.n_chains)
    with open(path, "w") as fh:
        fh.write(",".join(["chain"] + [f"x_{j + 1}" for j in range(batch.dim)]) + "\n")
        for cid, row in zip(ids, batch.values):
            fh.write(str(int(cid)) + "," + ",".join(format(v, ".16e") for v in row) + "\n")


def read_csv(path) -> tuple[np.ndarray, np.ndarray]:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, 0].astype(np.int64), arr[:, 1:]

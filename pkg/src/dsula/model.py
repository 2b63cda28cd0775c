"""Drift/diffusion models and numerical probes of their regularity.

Drifts and diffusions are small frozen dataclasses. :func:`drift_eval` and
:func:`diffusion_eval` accept a single point of shape ``(d,)`` or a batch of
shape ``(n, d)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng


# ---------------------------------------------------------------- data


@dataclass(frozen=True)
class RegressionData:
    """Points ``(x_i, y_i)`` for the bridge-regression objective."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} responses")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def empty(cls, dim: int) -> "RegressionData":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def count(self) -> int:
        return self.X.shape[0]

    @classmethod
    def from_csv(cls, path) -> "RegressionData":
        """Read a CSV with header ``x_1, ..., x_d, y``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            rows = [[float(v) for v in row] for row in reader if row]
        d = len(header) - 1
        expected = [f"x_{j + 1}" for j in range(d)] + ["y"]
        if header != expected:
            raise ValueError(f"dataset header must be {expected}, got {header}")
        arr = np.array(rows, dtype=float).reshape(-1, d + 1)
        return cls(arr[:, :d], arr[:, d])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x_{j + 1}" for j in range(self.dim)] + ["y"])
            for xi, yi in zip(self.X, self.y):
                w.writerow([format(v, ".17g") for v in (*xi, yi)])


def synthetic_regression(n_points: int = 20, dim: int = 3, seed: int = 2024,
                         beta=(1.5, -2.0, 0.8), noise: float = 0.3) -> RegressionData:
    """Gaussian design with a fixed coefficient vector plus Gaussian noise."""
    s = rng.Stream(seed, domain=11)
    X = s.normal(n_points * dim).reshape(n_points, dim)
    beta = np.asarray(beta, dtype=float)[:dim]
    y = X @ beta + noise * s.normal(n_points)
    return RegressionData(X, y)


# ---------------------------------------------------------------- drifts


@dataclass(frozen=True)
class OUDrift:
    """``b(x) = -A x``."""

    A: np.ndarray
    time_dependent = False


@dataclass(frozen=True)
class HolderConfiningDrift:
    """``b(x) = -x + (alpha+1)/4 |x|^(alpha-1) x``, zero at the origin."""

    alpha: float
    time_dependent = False


@dataclass(frozen=True)
class BridgeGradientFlowDrift:
    """``b(beta) = -grad L(beta)`` for the bridge-regression loss."""

    data: RegressionData
    lam: float
    gamma: float
    time_dependent = False


@dataclass(frozen=True)
class CustomDrift:
    """User drift. ``fn(x)`` (or ``fn(t, x)`` if ``time_dependent``) must
    accept ``(n, d)`` arrays and be reentrant."""

    fn: Callable
    time_dependent: bool = False


@dataclass(frozen=True)
class ConstantDiffusion:
    sigma: np.ndarray


@dataclass(frozen=True)
class DecayingScalarDiffusion:
    """``min(exp(-(K'/p) t) t^(-2/p), 1) * I``."""

    K_prime: float
    p: float


@dataclass(frozen=True)
class CustomDiffusion:
    """``fn(t, x)`` returning ``(d, d)`` or, for a batch, ``(n, d, d)``."""

    fn: Callable


@dataclass(frozen=True)
class ModelSpec:
    dim: int
    drift: object
    diffusion: object
    declared_alpha: float
    dissipation_class: str = "Unknown"
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not 0 < self.declared_alpha <= 2:
            raise ValueError("declared_alpha must lie in (0, 2]")
        if self.dissipation_class not in ("Partial", "Uniform", "Unknown"):
            raise ValueError(f"unknown dissipation class {self.dissipation_class!r}")
        if isinstance(self.drift, OUDrift) and np.shape(self.drift.A) != (self.dim, self.dim):
            raise ValueError("OU rate matrix must be d x d")
        if isinstance(self.drift, BridgeGradientFlowDrift) and self.drift.data.dim != self.dim:
            raise ValueError("regression data dimension does not match model dim")
        if isinstance(self.diffusion, ConstantDiffusion) and np.shape(self.diffusion.sigma) != (self.dim, self.dim):
            raise ValueError("diffusion matrix must be d x d")

    @property
    def time_homogeneous(self) -> bool:
        return not getattr(self.drift, "time_dependent", False)


def ou_model(rate=1.0, sigma=np.sqrt(2.0), dim: int = 1) -> ModelSpec:
    """Isotropic (or matrix) OU model ``dX = -A X dt + sigma dB``."""
    A = np.asarray(rate, dtype=float)
    A = A * np.eye(dim) if A.ndim == 0 else A
    S = np.asarray(sigma, dtype=float)
    S = S * np.eye(dim) if S.ndim == 0 else S
    return ModelSpec(dim, OUDrift(A), ConstantDiffusion(S), declared_alpha=2.0,
                     dissipation_class="Uniform", name="ou")


def holder_model(alpha: float, dim: int = 1, sigma=np.sqrt(2.0)) -> ModelSpec:
    """The non-convex Holder-drift sampling example, target density
    ``exp(-|x|^2/2 + |x|^(alpha+1)/4)`` when ``sigma = sqrt(2)``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    S = np.asarray(sigma, dtype=float)
    S = S * np.eye(dim) if S.ndim == 0 else S
    return ModelSpec(dim, HolderConfiningDrift(float(alpha)), ConstantDiffusion(S),
                     declared_alpha=float(alpha), dissipation_class="Partial", name="holder")


def bridge_model(data: RegressionData, lam: float, gamma: float,
                 diffusion=None) -> ModelSpec:
    if not 1 < gamma <= 2:
        raise ValueError("gamma must lie in (1, 2]")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if diffusion is None:
        diffusion = ConstantDiffusion(np.zeros((data.dim, data.dim)))
    return ModelSpec(data.dim, BridgeGradientFlowDrift(data, float(lam), float(gamma)), diffusion,
                     declared_alpha=float(gamma) - 1.0 if gamma > 1 else 1.0,
                     dissipation_class="Uniform", name="bridge")


# ---------------------------------------------------------------- evaluation


def _check_dim(m: ModelSpec, x: np.ndarray) -> None:
    if x.shape[-1] != m.dim or x.ndim > 2:
        raise ValueError(f"expected points of dimension {m.dim}, got shape {x.shape}")


def holder_drift(alpha: float, x: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r > 0, r ** (alpha - 1.0), 0.0)
    return -x + (alpha + 1.0) / 4.0 * scale * x


def drift_eval(m: ModelSpec, t: float, x) -> np.ndarray:
    """Drift ``b_t(x)``; ``t`` is ignored by time-homogeneous drifts."""
    x = np.asarray(x, dtype=float)
    _check_dim(m, x)
    b = m.drift
    if isinstance(b, OUDrift):
        return -x @ np.asarray(b.A).T
    if isinstance(b, HolderConfiningDrift):
        return holder_drift(b.alpha, x)
    if isinstance(b, BridgeGradientFlowDrift):
        return -bridge_loss_grad(b.data, b.lam, b.gamma, x)
    if isinstance(b, CustomDrift):
        out = b.fn(t, x) if b.time_dependent else b.fn(x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()
    raise TypeError(f"unsupported drift {type(b).__name__}")


def decaying_scale(K_prime: float, p: float, t: float) -> float:
    if t <= 0:
        return 1.0
    return min(np.exp(-(K_prime / p) * t) * t ** (-2.0 / p), 1.0)


def diffusion_eval(m: ModelSpec, t: float, x) -> np.ndarray:
    """Diffusion matrix ``sigma_t(x)`` of shape ``(d, d)``.

    For a batch ``x`` of shape ``(n, d)`` a state-independent diffusion still
    returns one ``(d, d)`` matrix; custom diffusions may return ``(n, d, d)``.
    """
    x = np.asarray(x, dtype=float)
    _check_dim(m, x)
    s = m.diffusion
    if isinstance(s, ConstantDiffusion):
        return np.asarray(s.sigma, dtype=float)
    if isinstance(s, DecayingScalarDiffusion):
        return decaying_scale(s.K_prime, s.p, t) * np.eye(m.dim)
    if isinstance(s, CustomDiffusion):
        return np.asarray(s.fn(t, x), dtype=float)
    raise TypeError(f"unsupported diffusion {type(s).__name__}")


def state_independent_diffusion(m: ModelSpec) -> bool:
    return isinstance(m.diffusion, (ConstantDiffusion, DecayingScalarDiffusion))


# ---------------------------------------------------------------- bridge loss


def bridge_loss(data: RegressionData, lam: float, gamma: float, beta) -> float:
    """``sum_i (y_i - x_i^T beta)^2 + lam * sum_j |beta_j|^gamma``."""
    beta = np.asarray(beta, dtype=float)
    resid = data.y - data.X @ beta
    return float(resid @ resid + lam * np.sum(np.abs(beta) ** gamma))


def bridge_loss_grad(data: RegressionData, lam: float, gamma: float, beta) -> np.ndarray:
    """Gradient of :func:`bridge_loss`; accepts ``(d,)`` or ``(n, d)``.

    The penalty term is continued by 0 at ``beta_j = 0`` (valid for gamma > 1).
    """
    beta = np.asarray(beta, dtype=float)
    X, y = data.X, data.y
    if X.shape[0]:
        grad = 2.0 * ((beta @ X.T - y) @ X)
    else:
        grad = np.zeros_like(beta)
    if lam:
        ab = np.abs(beta)
        if gamma == 2.0:
            pen = 2.0 * beta
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                pen = np.where(ab > 0, gamma * ab ** (gamma - 1.0) * np.sign(beta), 0.0)
        grad = grad + lam * pen
    return grad


def ridge_solution(data: RegressionData, lam: float) -> np.ndarray:
    """Closed-form minimiser of the gamma = 2 objective, ``(X^T X + lam I)^-1 X^T y``."""
    d = data.dim
    return np.linalg.solve(data.X.T @ data.X + lam * np.eye(d), data.X.T @ data.y)


def bridge_solution_gd(data: RegressionData, lam: float, gamma: float, beta0=None,
                       tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Minimiser of the bridge objective by deterministic full-gradient descent.

    Uses a step ``1 / L`` from the data-term Lipschitz constant with Armijo
    backtracking (the penalty gradient is not Lipschitz near 0), iterating
    until the gradient norm is at most ``tol``.
    """
    d = data.dim
    beta = np.zeros(d) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    if data.count:
        beta = np.linalg.lstsq(data.X.T @ data.X + max(lam, 1e-12) * np.eye(d),
                               data.X.T @ data.y, rcond=None)[0]
    lip = 2.0 * np.linalg.eigvalsh(data.X.T @ data.X).max() if data.count else 1.0
    step = 1.0 / max(lip + 2.0 * lam, 1e-12)
    f = bridge_loss(data, lam, gamma, beta)
    for _ in range(max_iter):
        g = bridge_loss_grad(data, lam, gamma, beta)
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            return beta
        s = step
        while True:
            cand = beta - s * g
            fc = bridge_loss(data, lam, gamma, cand)
            if fc <= f - 0.5 * s * gn * gn or s < 1e-300:
                break
            s *= 0.5
        if fc >= f and np.array_equal(cand, beta):
            break
        beta, f = cand, fc
    g = bridge_loss_grad(data, lam, gamma, beta)
    # descent stalls in floating point slightly above tol; finish with Newton
    for _ in range(50):
        if np.linalg.norm(g) <= tol:
            break
        H = 2.0 * data.X.T @ data.X
        ab = np.abs(beta)
        with np.errstate(divide="ignore"):
            H = H + np.diag(lam * gamma * (gamma - 1.0) * np.where(ab > 0, ab ** (gamma - 2.0), 0.0))
        beta = beta - np.linalg.solve(H, g)
        g = bridge_loss_grad(data, lam, gamma, beta)
    if np.linalg.norm(g) > tol:
        raise RuntimeError(f"gradient descent stalled at |grad| = {np.linalg.norm(g):.3e}")
    return beta


# ---------------------------------------------------------------- probes


K1_GRID = np.logspace(-8, 8, 512)
K2_GRID = np.logspace(-6, 3, 512)


@dataclass
class DissipationProbe:
    K1_hat: float
    K2_hat: float
    worst_pair: tuple
    n_pairs: int
    radius: float


def _ball_pairs(dim: int, n_pairs: int, radius: float, seed: int):
    s = rng.Stream(seed, domain=21)
    pts = []
    for _ in range(2):
        g = s.normal(n_pairs * dim).reshape(n_pairs, dim)
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = radius * s.uniform(n_pairs) ** (1.0 / dim)
        pts.append(g * r[:, None])
    return pts[0], pts[1]


def _snap_up(grid: np.ndarray, value: float) -> float:
    i = np.searchsorted(grid, value, side="left")
    return float(grid[min(i, len(grid) - 1)]) if value > grid[0] else float(grid[0])


def probe_partial_dissipation(m: ModelSpec, n_pairs: int = 20_000, radius: float = 10.0,
                              seed: int = 0) -> DissipationProbe:
    """Scan a log grid of ``(K1, K2)`` for ``<b(x)-b(y), x-y> <= K1 - K2 |x-y|^2``.

    For each grid ``K2`` the required ``K1`` is the maximum of
    ``<b(x)-b(y), x-y> + K2 |x-y|^2`` over sampled pairs, rounded up to the
    ``K1`` grid. The reported ``K2`` is the largest grid value whose required
    ``K1`` stays within twice the ``K1`` needed with ``K2 = 0`` (plus the grid
    floor). Besides the uniform pairs, every sampled ``x`` is also paired with
    the origin, where confining drifts tend to be least regular. This is a
    sample-based report, not a certificate.
    """
    if not m.time_homogeneous:
        raise ValueError("dissipation probe needs a time-homogeneous drift")
    x, y = _ball_pairs(m.dim, n_pairs, radius, seed)
    x, y = np.concatenate([x, x]), np.concatenate([y, np.zeros_like(y)])
    diff = x - y
    inner = np.einsum("ij,ij->i", drift_eval(m, 0.0, x) - drift_eval(m, 0.0, y), diff)
    sq = np.einsum("ij,ij->i", diff, diff)
    # required K1 for every grid K2, computed in chunks to bound memory
    need = np.empty(len(K2_GRID))
    for lo in range(0, len(K2_GRID), 64):
        k2 = K2_GRID[lo:lo + 64]
        need[lo:lo + 64] = np.max(inner[None, :] + k2[:, None] * sq[None, :], axis=1)
    budget = 2.0 * max(float(inner.max()), 0.0) + K1_GRID[0]
    ok = np.nonzero(need <= budget)[0]
    j = int(ok[-1]) if len(ok) else 0
    K2 = float(K2_GRID[j])
    K1 = _snap_up(K1_GRID, need[j])
    worst = int(np.argmax(inner + K2 * sq))
    return DissipationProbe(K1, K2, (x[worst].copy(), y[worst].copy()), n_pairs, radius)


def probe_holder_modulus(m: ModelSpec, n_pairs: int = 20_000, radius: float = 10.0,
                         alpha: float = 1.0, seed: int = 0) -> float:
    """Largest sampled ``|b(x)-b(y)| / (|x-y| + |x-y|^alpha)``; pairs with x = y are skipped."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    x, y = _ball_pairs(m.dim, n_pairs, radius, seed)
    dist = np.linalg.norm(x - y, axis=1)
    keep = dist > 0
    num = np.linalg.norm(drift_eval(m, 0.0, x[keep]) - drift_eval(m, 0.0, y[keep]), axis=1)
    den = dist[keep] + dist[keep] ** alpha
    return float(np.max(num / den)) if keep.any() else 0.0

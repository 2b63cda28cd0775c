"""Distances between sample batches and between Gaussian laws.

Conventions
-----------
``W_p`` uses the exponent ``1/max(p, 1)``: for ``p < 1`` no root is taken, so
``W_p`` is itself a metric. ``W_0`` is half the total-variation norm, and
:func:`tv_histogram` reports values on that scale (in ``[0, 1]``).

Final aggregates are summed with :func:`math.fsum`, so results do not depend
on summation order; in particular every estimator is exactly symmetric.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.optimize import linear_sum_assignment

from . import rng
from .schedule import StepSchedule

ESTIMATORS = ("Sorted1D", "Sliced", "TVHistogram", "GaussianClosedForm", "ExactOULaw", "PointMass")

# exact assignment for concave costs is cubic; above this size fall back to
# the monotone coupling (an upper bound) and say so in the report
EXACT_CONCAVE_MAX = 2048
BRUTEFORCE_MAX = 8


@dataclass
class DistanceReport:
    p: float
    estimator: str
    value: float
    stderr: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if not self.value >= 0:
            raise ValueError(f"distance must be non-negative, got {self.value}")

    def csv_row(self) -> list[str]:
        """``estimator, p, value, stderr, n_a, n_b, meta-json``."""
        meta = {k: v for k, v in self.meta.items() if k not in ("n_a", "n_b")}
        return [
            self.estimator,
            fmt(self.p),
            fmt(self.value),
            "" if self.stderr is None else fmt(self.stderr),
            str(self.meta.get("n_a", "")),
            str(self.meta.get("n_b", "")),
            json.dumps(meta, sort_keys=True, separators=(",", ":")),
        ]


CSV_HEADER = ["estimator", "p", "value", "stderr", "n_a", "n_b", "meta"]


def fmt(x: float) -> str:
    """Fixed 17-significant-digit scientific notation."""
    return format(float(x), ".16e")


def _as_1d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 2 and a.shape[1] == 1:
        a = a[:, 0]
    if a.ndim != 1:
        raise ValueError(f"expected one-dimensional samples, got shape {a.shape}")
    if a.size == 0:
        raise ValueError("empty sample")
    return a


def _trim(a: np.ndarray, b: np.ndarray, meta: dict):
    if len(a) != len(b):
        m = min(len(a), len(b))
        warnings.warn(f"unequal sample sizes {len(a)} and {len(b)}; trimming both to {m}", stacklevel=3)
        meta["trimmed_to"] = m
        a, b = a[:m], b[:m]
    return a, b


def _root(total: float, p: float) -> float:
    return total ** (1.0 / p) if p > 1 else total


def w_p_1d(a, b, p: float) -> DistanceReport:
    """Empirical ``W_p`` between two one-dimensional samples of equal size.

    For ``p >= 1`` the monotone (sorted) coupling is optimal. For ``p < 1`` the
    cost ``|x - y|^p`` is concave and the sorted coupling can be beaten, so the
    optimal permutation is found by linear assignment up to
    :data:`EXACT_CONCAVE_MAX` points.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    a, b = _as_1d(a), _as_1d(b)
    meta = {"n_a": len(a), "n_b": len(b)}
    a, b = _trim(a, b, meta)
    n = len(a)
    if p >= 1 or n == 1:
        cost = np.abs(np.sort(a) - np.sort(b)) ** p
    elif n <= EXACT_CONCAVE_MAX:
        C = np.abs(a[:, None] - b[None, :]) ** p
        r, c = linear_sum_assignment(C)
        cost = C[r, c]
    else:
        warnings.warn(f"p={p} < 1 with n={n}: using the sorted coupling, an upper bound", stacklevel=2)
        meta["exact"] = False
        cost = np.abs(np.sort(a) - np.sort(b)) ** p
    total = math.fsum(np.sort(cost)) / n
    return DistanceReport(p, "Sorted1D", _root(total, p), None, meta)


def w_p_bruteforce(a, b, p: float) -> float:
    """Exact ``W_p`` by enumerating every permutation coupling (n <= 8)."""
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    b = np.asarray(b, dtype=float).reshape(len(b), -1)
    n = len(a)
    if n != len(b) or n == 0:
        raise ValueError("brute force needs two non-empty samples of equal size")
    if n > BRUTEFORCE_MAX:
        raise ValueError(f"brute force limited to {BRUTEFORCE_MAX} points, got {n}")
    D = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2) ** p
    perms = _permutations(n)
    costs = D[np.arange(n), perms]
    rough = costs.sum(axis=1)
    # re-sum the near-optimal couplings exactly so ties resolve independently of order
    near = np.nonzero(rough <= rough.min() * (1 + 1e-9) + 1e-300)[0]
    best = min(math.fsum(costs[i]) for i in near)
    return _root(best / n, p)


_PERMS: dict = {}


def _permutations(n: int) -> np.ndarray:
    if n not in _PERMS:
        _PERMS[n] = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    return _PERMS[n]


def sliced_wp(a, b, p: float = 2.0, n_proj: int = 64, seed: int = 0) -> DistanceReport:
    """Average of 1-D ``W_p`` over ``n_proj`` seeded random unit directions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("sliced distance needs (n, d) samples with matching d")
    d = a.shape[1]
    if d < 2:
        raise ValueError("sliced distance needs d >= 2; use w_p_1d")
    if p < 1:
        raise ValueError("sliced distance needs p >= 1")
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample")
    meta = {"n_a": len(a), "n_b": len(b), "projections": int(n_proj), "seed": int(seed)}
    if len(a) != len(b):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a, b = _trim(a, b, meta)
        warnings.warn(f"unequal sample sizes; trimming to {meta['trimmed_to']}", stacklevel=2)
    U = rng.Stream(seed, domain=41).normal(n_proj * d).reshape(n_proj, d)
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    pa, pb = a @ U.T, b @ U.T
    vals = np.array([w_p_1d(pa[:, j], pb[:, j], p).value for j in range(n_proj)])
    mean = math.fsum(vals) / n_proj
    se = float(np.std(vals, ddof=1) / np.sqrt(n_proj)) if n_proj > 1 else None
    return DistanceReport(p, "Sliced", mean, se, meta)


def default_bins(n: int) -> int:
    return int(min(256, max(8, math.ceil(n ** (1.0 / 3.0) - 1e-9))))


def tv_histogram(a, b, bins_per_dim: int | None = None) -> DistanceReport:
    """Half the L1 distance between histograms on a shared bounding box.

    Reported on the ``W_0`` scale, i.e. in ``[0, 1]``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample")
    d = a.shape[1]
    if d > 2 or b.shape[1] != d:
        raise ValueError("histogram TV supports d <= 2 with matching dimensions")
    bins = bins_per_dim or default_bins(min(len(a), len(b)))
    lo = np.minimum(a.min(axis=0), b.min(axis=0))
    hi = np.maximum(a.max(axis=0), b.max(axis=0))
    flat = hi <= lo
    lo, hi = np.where(flat, lo - 0.5, lo), np.where(flat, hi + 0.5, hi)
    rng_ = list(zip(lo, hi))
    ha, _ = np.histogramdd(a, bins=bins, range=rng_)
    hb, _ = np.histogramdd(b, bins=bins, range=rng_)
    diff = np.abs(ha.ravel() / len(a) - hb.ravel() / len(b))
    value = 0.5 * math.fsum(np.sort(diff))
    return DistanceReport(0.0, "TVHistogram", min(value, 1.0), None,
                          {"n_a": len(a), "n_b": len(b), "bins": int(bins)})


def point_mass_moment(a, target, p: float = 2.0) -> DistanceReport:
    """``E|X - target|^p`` over the sample, i.e. ``W_p(law, delta_target)^p``."""
    a = np.asarray(a, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    if len(a) == 0:
        raise ValueError("empty sample")
    dist = np.linalg.norm(a - np.asarray(target, dtype=float), axis=1) ** p
    value = math.fsum(np.sort(dist)) / len(a)
    se = float(np.std(dist, ddof=1) / np.sqrt(len(a))) if len(a) > 1 else None
    return DistanceReport(p, "PointMass", value, se, {"n_a": len(a), "n_b": 1})


# ---------------------------------------------------------------- Gaussian laws


@dataclass
class GaussianLaw:
    """Gaussian with ``mean`` (d,) and covariance given as a (d,) diagonal or (d, d) matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.ndim == 0:
            self.cov = np.full(self.mean.shape, float(self.cov))
        d = self.mean.shape[0]
        if self.cov.ndim == 1:
            if self.cov.shape != (d,) or np.any(self.cov < -1e-10):
                raise ValueError("diagonal covariance must be non-negative with length d")
        else:
            C = self.cov
            if C.shape != (d, d) or not np.allclose(C, C.T, atol=1e-10):
                raise ValueError("covariance must be a symmetric d x d matrix")
            if np.linalg.eigvalsh(C).min() < -1e-10:
                raise ValueError("covariance must be positive semidefinite")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def diagonal(self) -> np.ndarray:
        if self.cov.ndim == 1:
            return np.clip(self.cov, 0.0, None)
        off = self.cov - np.diag(np.diag(self.cov))
        if np.any(np.abs(off) > 1e-12 * max(1.0, np.abs(self.cov).max())):
            raise ValueError("only diagonal covariances are supported")
        return np.clip(np.diag(self.cov), 0.0, None)


def w2_gaussian(g1: GaussianLaw, g2: GaussianLaw) -> float:
    """Closed-form ``W_2`` between Gaussians with diagonal covariances."""
    if g1.dim != g2.dim:
        raise ValueError("Gaussian laws have different dimensions")
    c1, c2 = g1.diagonal(), g2.diagonal()
    dm = g1.mean - g2.mean
    terms = np.concatenate([dm * dm, (np.sqrt(c1) - np.sqrt(c2)) ** 2])
    return math.sqrt(math.fsum(np.sort(terms)))


@nb.njit(cache=True)
def _ou_em_recursion(a, sigma2, x0, etas, checkpoints):
    m = x0
    v = 0.0
    out_m = np.empty(checkpoints.shape[0])
    out_v = np.empty(checkpoints.shape[0])
    ci = 0
    while ci < checkpoints.shape[0] and checkpoints[ci] == 0:
        out_m[ci] = m
        out_v[ci] = v
        ci += 1
    for i in range(etas.shape[0]):
        f = 1.0 - etas[i] * a
        m = f * m
        v = f * f * v + etas[i] * sigma2
        while ci < checkpoints.shape[0] and checkpoints[ci] == i + 1:
            out_m[ci] = m
            out_v[ci] = v
            ci += 1
    return out_m, out_v


def ou_em_laws(a: float, sigma: float, sched: StepSchedule, x0, checkpoints) -> list[GaussianLaw]:
    """Exact laws of the scalar OU Euler-Maruyama chain at several steps.

    Uses ``m_k = (1 - eta_k a) m_{k-1}`` and
    ``v_k = (1 - eta_k a)^2 v_{k-1} + eta_k sigma^2`` from ``(x0, 0)``; a
    vector ``x0`` is treated coordinate-wise (isotropic OU). Requires
    ``|1 - eta_k a| <= 1`` for every step used.
    """
    if not a > 0 or not sigma > 0:
        raise ValueError("rate and sigma must be positive")
    cps = np.asarray(checkpoints, dtype=np.int64)
    if np.any(np.diff(cps) <= 0) or (len(cps) and cps[0] < 0):
        raise ValueError("checkpoints must be non-negative and strictly increasing")
    n = int(cps[-1]) if len(cps) else 0
    etas = sched.etas(1, n + 1) if n else np.zeros(0)
    unstable = np.nonzero(np.abs(1.0 - etas * a) > 1.0)[0]
    if len(unstable):
        k = int(unstable[0]) + 1
        raise ValueError(f"OU Euler chain unstable at step k={k}: |1 - eta_k a| = {abs(1 - etas[k - 1] * a):.6g} > 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    laws = []
    ms, vs = [], None
    for x in x0:
        m, v = _ou_em_recursion(float(a), float(sigma) ** 2, float(x), etas, cps)
        ms.append(m)
        vs = v
    ms = np.array(ms)
    for i in range(len(cps)):
        laws.append(GaussianLaw(ms[:, i], np.full(len(x0), vs[i])))
    return laws


def ou_em_law(a: float, sigma: float, sched: StepSchedule, x0, n: int) -> GaussianLaw:
    """Exact law of the OU Euler-Maruyama chain after ``n`` steps."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return ou_em_laws(a, sigma, sched, x0, [n])[0]


def ou_sde_law(a: float, sigma: float, x0, t: float) -> GaussianLaw:
    """Exact OU transition law ``N(x0 e^{-at}, sigma^2/(2a) (1 - e^{-2at}))``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if math.isinf(t):
        return GaussianLaw(np.zeros_like(x0), np.full(len(x0), sigma ** 2 / (2 * a)))
    var = sigma ** 2 / (2 * a) * -math.expm1(-2 * a * t)
    return GaussianLaw(x0 * math.exp(-a * t), np.full(len(x0), var))


def ou_stationary(a: float, sigma: float, dim: int = 1) -> GaussianLaw:
    return GaussianLaw(np.zeros(dim), np.full(dim, sigma ** 2 / (2 * a)))

"""Built-in oracle suites: independent recomputations of library results.

Each suite returns an :class:`OracleResult`. Library functions are looked up
through their modules at call time, so a test double patched into
:mod:`dsula.metric` or :mod:`dsula.model` is what gets checked.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import metric, model, rng
from .schedule import StepSchedule

P_VALUES = (0.5, 1.0, 2.0)
ENTRY_RANGE = range(-3, 4)


@dataclass
class OracleResult:
    name: str
    passed: bool
    cases: int
    worst: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.cases} cases, worst error {self.worst:.3e}{self.detail}"


def _multisets(size: int):
    return list(itertools.combinations_with_replacement(ENTRY_RANGE, size))


def wp_oracle(random_pairs: int = 10_000, max_exhaustive: int = 3, max_size: int = 6,
              tol: float = 1e-12, seed: int = 0) -> OracleResult:
    """``w_p_1d`` against permutation brute force on integer multisets.

    Every pair of multisets of size ``<= max_exhaustive`` with entries in
    ``-3..3``, plus ``random_pairs`` random pairs for each larger size, for
    each ``p`` in (0.5, 1, 2). Distances are compared on the scale the
    estimator reports (no root for ``p < 1``).
    """
    worst = 0.0
    cases = 0
    failure = ""
    pairs = []
    for size in range(1, max_exhaustive + 1):
        ms = _multisets(size)
        pairs.extend(itertools.product(ms, ms))
    u = rng.Stream(seed, domain=51)
    for size in range(max_exhaustive + 1, max_size + 1):
        draws = np.floor(u.uniform(random_pairs * 2 * size) * 7).astype(int) - 3
        draws = draws.reshape(random_pairs, 2, size)
        pairs.extend((tuple(r[0]), tuple(r[1])) for r in draws)
    for a, b in pairs:
        a = np.array(a, dtype=float)
        b = np.array(b, dtype=float)
        for p in P_VALUES:
            got = metric.w_p_1d(a, b, p).value
            want = metric.w_p_bruteforce(a, b, p)
            err = abs(got - want)
            cases += 1
            if err > worst:
                worst = err
            if err > tol and not failure:
                failure = f"; first failure a={a.tolist()} b={b.tolist()} p={p}: {got!r} vs {want!r}"
    return OracleResult("w_p_1d vs brute force", worst <= tol, cases, worst, failure)


def gradient_oracle(n_cases: int = 1000, tol: float = 1e-6, seed: int = 0) -> OracleResult:
    """``bridge_loss_grad`` against central finite differences.

    Random datasets (N in 1..20, d in 1..5), ``lambda`` in [0, 5], ``gamma`` in
    (1, 2] and ``|beta_j| >= 0.1``. The relative error is taken against
    ``max(|grad|, 1)`` componentwise.
    """
    s = rng.Stream(seed, domain=52)
    worst = 0.0
    failure = ""
    for i in range(n_cases):
        n = 1 + int(s.uniform(1)[0] * 20)
        d = 1 + int(s.uniform(1)[0] * 5)
        X = s.normal(n * d).reshape(n, d)
        y = s.normal(n)
        data = model.RegressionData(X, y)
        lam = 5.0 * float(s.uniform(1)[0])
        gamma = 1.0 + max(1e-3, float(s.uniform(1)[0]))
        mag = 0.1 + 2.9 * s.uniform(d)
        sign = np.where(s.uniform(d) < 0.5, -1.0, 1.0)
        beta = sign * mag
        g = model.bridge_loss_grad(data, lam, gamma, beta)
        fd = np.empty(d)
        for j in range(d):
            h = 1e-5 * max(1.0, abs(beta[j]))
            e = np.zeros(d)
            e[j] = h
            fd[j] = (model.bridge_loss(data, lam, gamma, beta + e)
                     - model.bridge_loss(data, lam, gamma, beta - e)) / (2 * h)
        err = float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1.0)))
        worst = max(worst, err)
        if err >= tol and not failure:
            failure = f"; first failure at case {i} (gamma={gamma:.4f}, lambda={lam:.4f})"
    return OracleResult("bridge_loss_grad vs finite differences", worst < tol, n_cases, worst, failure)


def ou_limit_oracle(n: int = 1_000_000, theta: float = 1.0, tol: float = 1e-3) -> OracleResult:
    """``ou_em_law`` variance at large ``n`` against the stationary variance.

    With ``a = 1`` and ``sigma^2 = 2`` the stationary variance is 1.
    """
    law = metric.ou_em_law(1.0, math.sqrt(2.0), StepSchedule.polynomial(theta), 1.0, n)
    var = float(law.diagonal()[0])
    err = abs(var - 1.0)
    return OracleResult("ou_em_law stationary limit", err < tol, 1, err,
                        f"; variance at n={n}: {var:.12f}")


def run_all(random_pairs: int = 10_000, n_grad: int = 1000) -> list[OracleResult]:
    return [wp_oracle(random_pairs), gradient_oracle(n_grad), ou_limit_oracle()]

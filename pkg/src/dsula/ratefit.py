"""Log-log slope fits and the decay exponents they are checked against."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_DROP_FRACTION = 0.25
R2_GATE = 0.9


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    n_points: int

    def csv_row(self) -> list[str]:
        f = lambda x: format(float(x), ".16e")  # noqa: E731
        return [f(self.slope), f(self.intercept), f(self.r_squared), str(self.n_points),
                str(self.window[0]), str(self.window[1])]


RATEFIT_HEADER = ["slope", "intercept", "r2", "n_points", "window_lo", "window_hi"]


def fit_rate(ns, values, drop_fraction: float = DEFAULT_DROP_FRACTION) -> RateFit:
    """Least-squares line through ``(log n, log value)`` after dropping the
    first ``floor(drop_fraction * len)`` points."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.ndim != 1:
        raise ValueError("ns and values must be 1-D lists of equal length")
    if not 0 <= drop_fraction < 1:
        raise ValueError("drop_fraction must lie in [0, 1)")
    if np.any(np.diff(ns) <= 0):
        raise ValueError("ns must be strictly increasing")
    if np.any(ns <= 0):
        raise ValueError("ns must be positive")
    if np.any(~(values > 0)):
        raise ValueError("values must be positive to take logarithms")
    lo = int(math.floor(drop_fraction * len(ns)))
    x, y = np.log(ns[lo:]), np.log(values[lo:])
    if len(x) < 3:
        raise ValueError(f"only {len(x)} points left after dropping; need at least 3")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    if ss_tot > 0:
        r2 = max(0.0, 1.0 - ss_res / ss_tot)
    else:
        r2 = 1.0
    return RateFit(slope, intercept, r2, (lo, len(ns) - 1), len(x))


THEOREMS = ("T21_W1W0", "T21_Wp_interp", "T32_Wp")


@dataclass(frozen=True)
class RatePrediction:
    """Predicted exponent of ``n`` in an upper bound on a distance.

    ``T21_W1W0``: ``W_1`` and ``W_0`` under partial dissipation, exponent
    ``-alpha/2``. ``T21_Wp_interp``: ``W_p`` for ``p`` in (0, 1), same
    exponent. ``T32_Wp``: ``W_p`` for ``p > 1`` under uniform dissipation with
    ``eta_k = theta/k``, exponent ``-min(theta*K2', alpha*p/2) / p``.
    """

    theorem: str
    alpha: float
    p: float = 1.0
    theta_K2: float = math.inf


def predict_exponent(pred: RatePrediction) -> float:
    a = pred.alpha
    if pred.theorem == "T21_W1W0":
        if not 0 < a <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        return -a / 2.0
    if pred.theorem == "T21_Wp_interp":
        if not 0 < a <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        if not 0 < pred.p < 1:
            raise ValueError("interpolation bound needs p in (0, 1)")
        return -a / 2.0
    if pred.theorem == "T32_Wp":
        if not 0 < a <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not pred.p > 1:
            raise ValueError("uniform-dissipation bound needs p > 1")
        if not pred.theta_K2 > 0:
            raise ValueError("theta*K2' must be positive")
        return -min(pred.theta_K2, a * pred.p / 2.0) / pred.p
    raise ValueError(f"unknown theorem {pred.theorem!r}")


@dataclass
class RateCheck:
    passed: bool
    slope: float
    predicted: float
    tol: float
    r_squared: float

    def csv_row(self) -> list[str]:
        f = lambda x: format(float(x), ".16e")  # noqa: E731
        return [f(self.slope), f(self.predicted), f(self.tol), f(self.r_squared),
                "true" if self.passed else "false"]


VERDICT_HEADER = ["slope", "predicted", "tol", "r2", "pass"]


def check_rate(fit: RateFit, pred, tol: float) -> RateCheck:
    """Pass iff the slope is within ``tol`` of the prediction and ``r^2 >= 0.9``.

    ``pred`` may be a :class:`RatePrediction` or an exponent.
    """
    expo = predict_exponent(pred) if isinstance(pred, RatePrediction) else float(pred)
    ok = abs(fit.slope - expo) <= tol and fit.r_squared >= R2_GATE
    return RateCheck(bool(ok), fit.slope, expo, float(tol), fit.r_squared)

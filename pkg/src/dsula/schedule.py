"""Step-size schedules ``eta_k`` and their accumulated times ``t_n``."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _kahan_extend(etas, start_sum, start_comp):
    out = np.empty(etas.shape[0])
    s = start_sum
    c = start_comp
    for i in range(etas.shape[0]):
        y = etas[i] - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i] = s
    return out, s, c


@dataclass(frozen=True)
class StepSchedule:
    """A step-size sequence ``eta_1, eta_2, ...``.

    Build instances with :meth:`polynomial`, :meth:`constant` or
    :meth:`explicit`. Instances are immutable; the prefix-sum cache used by
    :func:`time_at` is extended under a lock.
    """

    kind: str
    theta: float = 0.0
    a: float = 0.0
    values: tuple = ()
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind == "polynomial":
            if not self.theta > 0:
                raise ValueError("polynomial schedule needs theta > 0")
        elif self.kind == "constant":
            if not self.theta > 0:
                raise ValueError("constant schedule needs eta > 0")
        elif self.kind == "explicit":
            if len(self.values) == 0:
                raise ValueError("explicit schedule needs at least one step")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        self._cache["lock"] = threading.Lock()
        self._cache["prefix"] = np.zeros(1)
        self._cache["carry"] = (0.0, 0.0)

    @classmethod
    def polynomial(cls, theta: float, a: float = 1.0) -> "StepSchedule":
        return cls("polynomial", theta=float(theta), a=float(a))

    @classmethod
    def constant(cls, eta: float) -> "StepSchedule":
        return cls("constant", theta=float(eta))

    @classmethod
    def explicit(cls, values) -> "StepSchedule":
        return cls("explicit", values=tuple(float(v) for v in values))

    @property
    def length(self):
        """Number of available steps (``None`` for unbounded schedules)."""
        return len(self.values) if self.kind == "explicit" else None

    def etas(self, start: int, stop: int) -> np.ndarray:
        """Vector of ``eta_k`` for ``k = start .. stop - 1`` (1-based)."""
        if start < 1:
            raise IndexError("step indices start at 1")
        if self.kind == "polynomial":
            k = np.arange(start, stop, dtype=float)
            if self.a == 1.0:
                return self.theta / k
            return self.theta * k ** (-self.a)
        if self.kind == "constant":
            return np.full(max(stop - start, 0), self.theta)
        if stop - 1 > len(self.values):
            raise IndexError(f"explicit schedule has {len(self.values)} steps, asked for {stop - 1}")
        return np.asarray(self.values[start - 1:stop - 1], dtype=float)

    def describe(self) -> str:
        if self.kind == "polynomial":
            return f"polynomial(theta={self.theta!r},a={self.a!r})"
        if self.kind == "constant":
            return f"constant(eta={self.theta!r})"
        return f"explicit(n={len(self.values)})"


def eta(sched: StepSchedule, k: int) -> float:
    """Step size ``eta_k`` for ``k >= 1``."""
    if k < 1:
        raise IndexError("step indices start at 1")
    if sched.kind == "polynomial":
        if sched.a == 1.0:
            return sched.theta / k
        return sched.theta * float(k) ** (-sched.a)
    if sched.kind == "constant":
        return sched.theta
    if k > len(sched.values):
        raise IndexError(f"explicit schedule has {len(sched.values)} steps, asked for step {k}")
    return sched.values[k - 1]


def prefix_times(sched: StepSchedule, n: int) -> np.ndarray:
    """Array ``[t_0, t_1, ..., t_n]`` with compensated summation."""
    cache = sched._cache
    with cache["lock"]:
        prefix = cache["prefix"]
        have = prefix.shape[0] - 1
        if n > have:
            target = max(n, 2 * have)
            if sched.length is not None:
                target = min(target, sched.length)
                if n > target:
                    raise IndexError(f"explicit schedule has {sched.length} steps, asked for t_{n}")
            s, c = cache["carry"]
            ext, s, c = _kahan_extend(sched.etas(have + 1, target + 1), s, c)
            prefix = np.concatenate([prefix, ext])
            cache["prefix"] = prefix
            cache["carry"] = (s, c)
        return prefix[: n + 1]


def time_at(sched: StepSchedule, n: int) -> float:
    """Accumulated time ``t_n = eta_1 + ... + eta_n`` (``t_0 = 0``)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 0.0
    return float(prefix_times(sched, n)[n])


@dataclass
class ScheduleReport:
    positive: bool
    non_increasing: bool
    decaying: bool | None
    divergent: bool | None
    violations: list

    @property
    def valid(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.valid:
            return "schedule satisfies step-size assumptions"
        return "schedule violates: " + "; ".join(self.violations)


def validate(sched: StepSchedule, scan: int = 10_000) -> ScheduleReport:
    """Check a schedule against the step-size assumptions.

    The assumptions are: ``eta_k > 0``, non-increasing, ``eta_k -> 0`` and
    ``sum eta_k = inf``. Explicit lists are checked element-wise for the first
    two; their tail behaviour is unknown and reported as ``None``.
    """
    violations = []
    if sched.kind == "polynomial":
        positive, non_inc = True, sched.a >= 0
        decaying = sched.a > 0
        divergent = sched.a <= 1
        if not decaying:
            violations.append("decay: eta_k -> 0 requires a > 0")
        if not divergent:
            violations.append(f"divergence: sum of theta*k^-a converges for a={sched.a} > 1")
    elif sched.kind == "constant":
        positive, non_inc, decaying, divergent = True, True, False, True
        violations.append("decay: constant step does not tend to 0")
    else:
        vals = np.asarray(sched.values[:scan] if scan else sched.values)
        positive = bool(np.all(vals > 0))
        non_inc = bool(np.all(np.diff(vals) <= 0))
        decaying = divergent = None
    if not positive:
        violations.insert(0, "positivity: some eta_k <= 0")
    if not non_inc:
        violations.insert(1 if not positive else 0, "monotonicity: eta_k increases somewhere")
    return ScheduleReport(positive, non_inc, decaying, divergent, violations)

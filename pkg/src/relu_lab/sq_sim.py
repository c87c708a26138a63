"""Statistical-query oracles and gradient descent driven only by their answers.

A query is either a correlation query ``E[y g(x)]`` or a target-independent
query ``E[h(x)]``. The ``i``-th coordinate of the square-loss gradient is

    E[2 1_+(w.x) (ReLU(w.x) - y) x_i] = E[h(x)] + E[y g(x)]

with ``h = 2 1_+(w.x) ReLU(w.x) x_i`` and ``g = -2 1_+(w.x) x_i``, so every
gradient step costs exactly ``2 d`` queries.

Tolerances apply to queries normalized to unit second moment: an oracle may
answer ``E[q]`` anywhere within ``tau * ||q||`` where ``||q|| = sqrt(E[q^2])``
is measured on the distribution and logged with each query.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from relu_lab._rng import substream
from relu_lab.gaussian_stats import OPT_THRESHOLD
from relu_lab.learners import project_unit_ball

QUERY_KINDS = ("correlation", "target-independent")
ADVERSARY_RULES = ("plus", "minus", "flip", "null")


@dataclass(frozen=True)
class SqQuery:
    kind: str
    fn: Callable[[np.ndarray], np.ndarray]
    tau: float
    normalize: bool = True
    label: str = ""

    def __post_init__(self):
        if self.kind not in QUERY_KINDS:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if not self.tau > 0:
            raise ValueError("tolerance must be positive")


class EmpiricalDistribution:
    """Uniform distribution over a fixed sample; expectations are exact means."""

    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.size = self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def values(self, q: SqQuery, X=None, y=None) -> np.ndarray:
        X = self.X if X is None else X
        y = self.y if y is None else y
        v = np.asarray(q.fn(X), dtype=np.float64)
        return y * v if q.kind == "correlation" else v

    def truth(self, q: SqQuery) -> tuple[float, float]:
        """``(E[q], sqrt(E[q^2]))`` under this distribution."""
        v = self.values(q)
        return float(v.mean()), float(math.sqrt(np.mean(v * v)))

    def null_value(self, q: SqQuery) -> float:
        """``E[q]`` if labels were independent of x with the same mean."""
        v = np.asarray(q.fn(self.X), dtype=np.float64)
        return float(self.y.mean() * v.mean()) if q.kind == "correlation" else float(v.mean())

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=n)
        return self.X[idx], self.y[idx]


class SamplerDistribution(EmpiricalDistribution):
    """Distribution given by a sampler ``(n, rng) -> (X, y)``.

    Exact expectations are unavailable, so truth is estimated once from
    ``truth_samples`` draws (seeded); the sampling oracle draws fresh samples.
    """

    def __init__(self, sampler: Callable, truth_samples: int = 1_000_000, seed: int = 0):
        self.sampler = sampler
        X, y = sampler(truth_samples, substream(seed, "sq-truth"))
        super().__init__(X, y)

    def sample(self, n: int, rng: np.random.Generator):
        return self.sampler(n, rng)


class OracleBudgetError(RuntimeError):
    """The sampling oracle could not meet its tolerance within its sample cap."""


@dataclass
class QueryLog:
    label: str
    kind: str
    answer: float
    norm: float
    samples: int


@dataclass
class SqOracle:
    """``mode="sampling"``: answer with a sample mean whose ``z``-sigma error is
    at most ``tau * ||q||``; the sample size doubles from ``n0`` up to
    ``max_samples``. On a finite distribution smaller than the needed sample,
    the exact mean is returned instead.

    ``mode="adversarial"``: answer ``truth + delta`` with ``|delta| = tau * ||q||``
    chosen by ``rule``: ``plus``/``minus`` always shift up/down, ``flip`` shifts
    against the sign of the truth, ``null`` moves as far as allowed toward the
    answer the query would have if labels were independent of x, and
    ``random`` uses a seeded coin per query.
    """

    mode: str = "sampling"
    rule: str = "plus"
    seed: int = 0
    z: float = 3.0
    n0: int = 10_000
    max_samples: int = 10_000_000
    count: int = 0
    log: list[QueryLog] = field(default_factory=list)
    keep_log: bool = True

    def __post_init__(self):
        if self.mode not in ("sampling", "adversarial"):
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.mode == "adversarial" and self.rule not in ADVERSARY_RULES + ("random",):
            raise ValueError(f"unknown adversary rule {self.rule!r}")
        self._rng = substream(self.seed, "sq-oracle", self.mode, self.rule)

    def _record(self, q: SqQuery, answer: float, norm: float, samples: int) -> float:
        self.count += 1
        if self.keep_log:
            self.log.append(QueryLog(q.label, q.kind, answer, norm, samples))
        return answer

    def answer(self, q: SqQuery, dist: EmpiricalDistribution) -> float:
        if self.mode == "adversarial":
            truth, norm = dist.truth(q)
            slack = q.tau * (norm if q.normalize else 1.0)
            if self.rule == "plus":
                delta = slack
            elif self.rule == "minus":
                delta = -slack
            elif self.rule == "flip":
                delta = -slack if truth >= 0 else slack
            elif self.rule == "null":
                delta = float(np.clip(dist.null_value(q) - truth, -slack, slack))
            else:
                delta = slack if self._rng.random() < 0.5 else -slack
            return self._record(q, truth + delta, norm, dist.size)

        n = self.n0
        while True:
            if n >= dist.size and not isinstance(dist, SamplerDistribution):
                truth, norm = dist.truth(q)
                return self._record(q, truth, norm, dist.size)
            X, y = dist.sample(n, self._rng)
            v = dist.values(q, X, y)
            mean = float(v.mean())
            norm = float(math.sqrt(np.mean(v * v)))
            err = self.z * float(v.std(ddof=1)) / math.sqrt(n)
            if err <= q.tau * (norm if q.normalize else 1.0):
                return self._record(q, mean, norm, n)
            if n >= self.max_samples:
                raise OracleBudgetError(
                    f"query {q.label!r}: error {err:.3g} above tolerance after {n} samples")
            n = min(2 * n, self.max_samples)


def null_signal(q: SqQuery, dist: EmpiricalDistribution) -> float:
    """``|E[q] - E_null[q]| / ||q||``: how far an adversary must move to hide the labels."""
    truth, norm = dist.truth(q)
    return abs(dist.null_value(q) - truth) / norm if norm else 0.0


def sq_answer(o: SqOracle, q: SqQuery, dist: EmpiricalDistribution) -> float:
    return o.answer(q, dist)


def gradient_queries(w, i: int, tau: float) -> tuple[SqQuery, SqQuery]:
    """``(h, g)`` for coordinate ``i``: target-independent and correlation parts."""
    w = np.asarray(w, dtype=np.float64)

    def h(X):
        z = X @ w
        return 2.0 * (z >= 0) * np.maximum(z, 0.0) * X[:, i]

    def g(X):
        return -2.0 * (X @ w >= 0) * X[:, i]

    return (SqQuery("target-independent", h, tau, label=f"h[{i}]"),
            SqQuery("correlation", g, tau, label=f"g[{i}]"))


def gradient_via_sq(w, i: int, o: SqOracle, dist: EmpiricalDistribution, tau: float) -> float:
    """Coordinate ``i`` of the population square-loss gradient from two SQ answers."""
    if not 0 <= i < np.asarray(w).size:
        raise IndexError(f"coordinate {i} out of range")
    h, g = gradient_queries(w, i, tau)
    return o.answer(h, dist) + o.answer(g, dist)


def gd_via_sq(w0, steps: int, lr: float, o: SqOracle, dist: EmpiricalDistribution, tau: float,
              callback: Callable[[int, np.ndarray, int], None] | None = None) -> np.ndarray:
    """Projected gradient descent using only SQ answers; ``2 d`` queries per step.

    Returns the trajectory, shape ``(steps + 1, d)``. ``callback(step, w, queries)``
    runs after each step (and once for the start) and issues no queries.
    """
    if steps < 1:
        raise ValueError("need at least one step")
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    w = project_unit_ball(np.asarray(w0, dtype=np.float64).copy())
    traj = [w.copy()]
    start = o.count
    if callback:
        callback(0, w, 0)
    for step in range(1, steps + 1):
        grad = np.array([gradient_via_sq(w, i, o, dist, tau) for i in range(w.size)])
        w = project_unit_ball(w - lr * grad)
        traj.append(w.copy())
        if callback:
            callback(step, w, o.count - start)
    return np.array(traj)


def restricted_parity_query_truth(S, query: SqQuery, d: int, eta: float = 0.0, n: int = 1_000_000,
                                  seed: int = 0) -> float:
    """``E[q(x', y')]`` under the lifted parity distribution, through the map
    ``nu(x, g) = (x_1 g_1, ..., x_d g_d)`` and ``y' = (y + 1)/2``.

    A correlation query becomes ``E[(1/2) (g o nu) y] + E[(1/2) g o nu]`` over
    the hypercube-times-half-normal distribution; a target-independent query
    becomes ``2 E[(1/2) h o nu]``. Expectations are seeded MC over ``n`` draws.
    """
    S = sorted(int(i) for i in S)
    if not S:
        raise ValueError("relevant set must be non-empty")
    x = substream(seed, "restricted-parity", "x").choice(np.array([-1.0, 1.0]), size=(n, d))
    g = np.abs(substream(seed, "restricted-parity", "g").standard_normal((n, d)))
    y = np.prod(x[:, S], axis=1)
    if eta:
        y = np.where(substream(seed, "restricted-parity", "noise").random(n) < eta, -y, y)
    half = 0.5 * np.asarray(query.fn(x * g), dtype=np.float64)
    if query.kind == "correlation":
        return float(np.mean(half * y) + np.mean(half))
    return float(2.0 * np.mean(half))


def sq_query_lower_bound(s: int, tau: float) -> float:
    """``(s tau^2 - 1) / 2``: queries needed against a class of SQ dimension ``s``."""
    return (s * tau * tau - 1.0) / 2.0


def parity_sq_dimension(d: int, k: int) -> int:
    """Number of pairwise-orthogonal ``k``-sparse parities on ``d`` variables."""
    return math.comb(d, k)


def loss_reference() -> float:
    return OPT_THRESHOLD

"""Ground-truth engines for checking closed forms: Gaussian quadrature, seeded
Monte Carlo with standard errors, and a 2-D quadrature of the k = 2 correlation.

Kinked or discontinuous integrands (ReLU, sign) are integrated piecewise: the
line is split at 0 and each half uses a Gauss rule for the half-normal weight
``phi(x) 1{x >= 0}``, which keeps polynomial pieces exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import mpmath as mp
import numpy as np
from scipy.linalg import eigh_tridiagonal

from relu_lab._rng import substream

DEFAULT_NODES_1D = 128
DEFAULT_NODES_2D = 96


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights with ``sum_i w_i f(x_i) ~ E[f]`` for the rule's weight.

    ``support="full"``: weight is the N(0, 1) density on the real line.
    ``support="half"``: weight is the N(0, 1) density restricted to ``[0, inf)``
    (total mass 1/2). ``log_weights`` allow overflow-free high-degree sums.
    """

    nodes: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray
    support: str

    @property
    def n(self) -> int:
        return self.nodes.size


def _half_normal_moment(j: int):
    return mp.power(2, mp.mpf(j) / 2) * mp.gamma(mp.mpf(j + 1) / 2) / (2 * mp.sqrt(mp.pi))


def _chebyshev_recurrence(moments, n):
    """Monic three-term recurrence coefficients from ``2n`` moments (Chebyshev algorithm)."""
    a = [mp.mpf(0)] * n
    b = [mp.mpf(0)] * n
    sig_prev = [mp.mpf(0)] * (2 * n)
    sig = list(moments)
    a[0] = moments[1] / moments[0]
    b[0] = moments[0]
    for k in range(1, n):
        new = [mp.mpf(0)] * (2 * n)
        for l in range(k, 2 * n - k):
            new[l] = sig[l + 1] - a[k - 1] * sig[l] - b[k - 1] * sig_prev[l]
        a[k] = new[k + 1] / new[k] - sig[k] / sig[k - 1]
        b[k] = new[k] / sig[k - 1]
        sig_prev, sig = sig, new
    return a, b


def _gauss_from_recurrence(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Golub-Welsch nodes, Newton-polished in extended precision, with log Christoffel weights.

    ``a``, ``b`` are monic recurrence coefficients, ``pi_{k+1} = (x - a_k) pi_k - b_k pi_{k-1}``,
    with ``b_0`` the total mass of the weight.
    """
    n = len(a)
    x0, _ = eigh_tridiagonal(np.array([float(v) for v in a]),
                             np.array([float(mp.sqrt(v)) for v in b[1:]]))
    nodes = np.empty(n)
    log_w = np.empty(n)
    for i, xi in enumerate(x0):
        x = mp.mpf(xi)
        for _ in range(3):
            p_prev, p, dp_prev, dp = mp.mpf(0), mp.mpf(1), mp.mpf(0), mp.mpf(0)
            for k in range(n):
                p_prev, p, dp_prev, dp = p, (x - a[k]) * p - b[k] * p_prev, dp, p + (x - a[k]) * dp - b[k] * dp_prev
            x -= p / dp
        # 1 / w = sum_k pi_k(x)^2 / ||pi_k||^2 with ||pi_k||^2 = b_0 b_1 ... b_k
        p_prev, p, norm2 = mp.mpf(0), mp.mpf(1), b[0]
        acc = p * p / norm2
        for k in range(n - 1):
            p_prev, p = p, (x - a[k]) * p - b[k] * p_prev
            norm2 *= b[k + 1]
            acc += p * p / norm2
        nodes[i] = float(x)
        log_w[i] = float(-mp.log(acc))
    return nodes, log_w


@lru_cache(maxsize=32)
def half_normal_rule(n: int = DEFAULT_NODES_1D) -> QuadratureRule:
    """``n``-point Gauss rule for ``phi(x)`` on ``[0, inf)``."""
    if n < 1:
        raise ValueError("need at least one node")
    with mp.workdps(max(50, 3 * n)):
        moments = [_half_normal_moment(j) for j in range(2 * n)]
        a, b = _chebyshev_recurrence(moments, n)
        nodes, log_w = _gauss_from_recurrence(a, b)
    return QuadratureRule(nodes, np.exp(log_w), log_w, "half")


@lru_cache(maxsize=32)
def gauss_hermite_rule(n: int = DEFAULT_NODES_1D) -> QuadratureRule:
    """``n``-point Gauss rule for the standard normal density on the real line."""
    if n < 1:
        raise ValueError("need at least one node")
    with mp.workdps(max(30, n // 2 + 30)):
        a = [mp.mpf(0)] * n
        b = [mp.mpf(1)] + [mp.mpf(k) for k in range(1, n)]
        nodes, log_w = _gauss_from_recurrence(a, b)
    return QuadratureRule(nodes, np.exp(log_w), log_w, "full")


def quad_expectation(f: Callable, rule: QuadratureRule | None = None, split: bool = True) -> float:
    """``E_{x ~ N(0,1)}[f(x)]`` by quadrature.

    With ``split=True`` (default) the two half-lines are integrated separately
    with a half-normal rule, so a kink or jump at 0 costs no accuracy. ``f``
    must accept a float64 array.
    """
    if rule is None:
        rule = half_normal_rule() if split else gauss_hermite_rule()
    if split and rule.support != "half":
        raise ValueError("split integration needs a half-normal rule")
    if rule.support == "half":
        vals = np.concatenate([np.asarray(f(rule.nodes), dtype=np.float64),
                               np.asarray(f(-rule.nodes), dtype=np.float64)])
        w = np.concatenate([rule.weights, rule.weights])
    else:
        vals = np.asarray(f(rule.nodes), dtype=np.float64)
        w = rule.weights
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand is not finite on the node set")
    return float(np.dot(w, vals))


def monomial_moment(rule: QuadratureRule, j: int) -> tuple[float, float]:
    """``(log |sum_i w_i x_i^j|, sign)`` without overflow, for exactness checks."""
    x = rule.nodes
    if rule.support == "half":
        terms_log = rule.log_weights + j * np.log(x)
        return float(np.logaddexp.reduce(terms_log)), 1.0
    # a node at 0 contributes only to the j = 0 moment
    mask = np.ones(x.shape, dtype=bool) if j == 0 else x != 0
    if not mask.any():
        return -math.inf, 0.0
    with np.errstate(divide="ignore"):
        logs = rule.log_weights[mask] + (j * np.log(np.abs(x[mask])) if j else 0.0)
    signs = np.sign(x[mask]) ** j if j else np.ones(mask.sum())
    shift = logs.max()
    total = float(np.dot(signs, np.exp(logs - shift)))
    if total == 0.0:
        return -math.inf, 0.0
    return shift + math.log(abs(total)), math.copysign(1.0, total)


def exact_normal_moment(j: int, support: str = "full") -> float:
    """``log E[x^j]`` for N(0,1) (full line; odd ``j`` -> -inf) or its half-line piece."""
    if support == "half":
        return (j / 2) * math.log(2.0) + math.lgamma((j + 1) / 2) - math.log(2.0 * math.sqrt(math.pi))
    if j % 2:
        return -math.inf
    return math.lgamma(j + 1) - math.lgamma(j // 2 + 1) - (j // 2) * math.log(2.0)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    seed: int

    def contains(self, value: float, n_sigma: float = 3.0) -> bool:
        return abs(self.mean - value) <= n_sigma * self.stderr


def mc_expectation(f: Callable, m: int, n: int, seed: int, chunk: int = 1_000_000) -> McEstimate:
    """``E[f(z)]`` for ``z ~ N(0, I_m)`` from ``n`` seeded draws.

    ``f`` maps an array of shape ``(batch, m)`` to ``(batch,)``. Draws are taken
    in chunks from one stream, so the chunk size only changes summation order.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    rng = substream(seed, "mc-expectation")
    count, mean, m2 = 0, 0.0, 0.0
    remaining = n
    while remaining:
        b = min(chunk, remaining)
        vals = np.asarray(f(rng.standard_normal((b, m))), dtype=np.float64)
        b_mean = float(vals.mean())
        b_m2 = float(((vals - b_mean) ** 2).sum())
        # Chan et al. pairwise update
        delta = b_mean - mean
        total = count + b
        mean += delta * b / total
        m2 += b_m2 + delta * delta * count * b / total
        count = total
        remaining -= b
    var = m2 / (count - 1)
    return McEstimate(mean, math.sqrt(var / count), count, seed)


def correlation_2d_quadrature(n_nodes: int = DEFAULT_NODES_2D, signs: tuple[bool, bool] = (True, True)) -> float:
    """``E[ReLU((z1 + z2)/sqrt 2) * s1(z1) * s2(z2)]`` by split tensor quadrature.

    ``s_i`` is ``sign`` where ``signs[i]`` is true and 1 otherwise. The plane is
    split into quadrants at the sign jumps. In the (+,+) quadrant the integrand
    is linear; (-,-) contributes nothing. In a mixed quadrant the kink
    ``z1 = -z2`` is moved onto the boundary by ``t = |z2|, s = z1 - t``, which
    leaves the smooth integrand ``(s / sqrt 2) exp(-t s - t^2/2)`` against the
    product half-normal weight.
    """
    if n_nodes < 32:
        raise ValueError("need at least 32 nodes per axis")
    rule = half_normal_rule(n_nodes)
    x, w = rule.nodes, rule.weights
    S, T = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    plus_plus = float(np.sum(W * (S + T))) / math.sqrt(2.0)
    mixed = float(np.sum(W * S * np.exp(-T * S - 0.5 * T * T))) / math.sqrt(2.0)
    s1 = -1.0 if signs[0] else 1.0
    s2 = -1.0 if signs[1] else 1.0
    # (+,-) picks up s2's negative branch, (-,+) picks up s1's
    return plus_plus + (s2 + s1) * mixed


def correlation_closed_form() -> float:
    """``E[ReLU((z1+z2)/sqrt 2) sign(z1) sign(z2)] = (2 - sqrt 2) / (2 sqrt pi)``.

    Conditioning on ``z1`` gives ``sqrt 2 E[|z| (1 - Phi(|z|))]``, which
    integrates in closed form.
    """
    return (2.0 - math.sqrt(2.0)) / (2.0 * math.sqrt(math.pi))

"""Probabilists' Hermite polynomials and the Hermite analysis of sign and ReLU.

Conventions: ``H_n`` are the probabilists' polynomials (``H_2(x) = x^2 - 1``),
``Hbar_n = H_n / sqrt(n!)`` is the orthonormal family under N(0, 1), and the
coefficient of ``f`` at degree ``i`` is ``E[f(x) Hbar_i(x)]``.

The correlation series concerns, for ``k = 4l + 2``,

    E_z[ ReLU((z_1 + ... + z_k) / sqrt(k)) * sign(z_1) ... sign(z_k) ] = sum_{n >= k} T_n

where ``T_n`` gathers the degree-``n`` Hermite contributions. Only compositions
of ``n`` into odd parts contribute, and the sign of every such product is the
same, which lets the sum be accumulated in log space without cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

LOG_2PI = math.log(2.0 * math.pi)
DEFAULT_COMPOSITION_CAP = 10**7
EXACT_MAX_DEGREE = 30


class CompositionCapError(RuntimeError):
    """Raised when enumerating compositions would exceed the configured cap."""


def hermite_eval(n: int, x):
    """``H_n(x)`` via ``H_{n+1} = x H_n - n H_{n-1}``; ``x`` may be an array."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    h_prev, h = np.ones_like(x), x.copy()
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for j in range(1, n):
        h_prev, h = h, x * h - j * h_prev
    return h if h.ndim else float(h)


def hermite_table(n_max: int, x) -> np.ndarray:
    """All of ``H_0(x) .. H_{n_max}(x)``, stacked along a new leading axis."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = x
    for j in range(1, n_max):
        out[j + 1] = x * out[j] - j * out[j - 1]
    return out


def normalized_hermite(n: int, x):
    """``Hbar_n(x) = H_n(x) / sqrt(n!)``."""
    return hermite_eval(n, x) / math.exp(0.5 * math.lgamma(n + 1))


def hermite_at_zero(n: int, exact: bool = False):
    """``H_n(0)``: zero for odd ``n`` and ``(-1)^m (2m)! / (m! 2^m)`` for ``n = 2m``.

    With ``exact=True`` the value is a Python ``int`` (any ``n``); otherwise a
    float, raising ``OverflowError`` once the value leaves double range.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    if n % 2:
        return 0 if exact else 0.0
    m = n // 2
    value = (-1) ** m * (math.factorial(n) // (math.factorial(m) * 2**m))
    return value if exact else float(value)


def log_abs_hermite_at_zero(n: int) -> tuple[float, int]:
    """``(log|H_n(0)|, sign)``; ``(-inf, 0)`` for odd ``n``."""
    if n % 2:
        return -math.inf, 0
    m = n // 2
    return math.lgamma(n + 1) - math.lgamma(m + 1) - m * math.log(2.0), (-1) ** m


def sign_coefficient(i: int) -> float:
    """Hermite coefficient of ``sign`` at degree ``i``: ``sqrt(2/(pi i!)) H_{i-1}(0)``."""
    if i < 0:
        raise ValueError("degree must be non-negative")
    if i == 0 or i % 2 == 0:
        return 0.0
    log_h, s = log_abs_hermite_at_zero(i - 1)
    return s * math.exp(0.5 * (math.log(2.0 / math.pi) - math.lgamma(i + 1)) + log_h)


def _relu_numerator(n: int) -> tuple[float, int]:
    """``(log|H_n(0) + n H_{n-2}(0)|, sign)`` for even ``n >= 2``.

    The two terms combine into ``(-1)^(m-1) n! / (m! 2^m (n - 1))`` with ``n = 2m``.
    """
    m = n // 2
    return math.lgamma(n + 1) - math.lgamma(m + 1) - m * math.log(2.0) - math.log(n - 1), (-1) ** (m - 1)


def relu_coefficient(i: int) -> float:
    """Hermite coefficient of ``ReLU`` at degree ``i``.

    ``1/sqrt(2 pi)`` at 0, ``1/2`` at 1, ``(H_i(0) + i H_{i-2}(0)) / sqrt(2 pi i!)``
    beyond, which vanishes for odd ``i``.
    """
    if i < 0:
        raise ValueError("degree must be non-negative")
    if i == 0:
        return 1.0 / math.sqrt(2.0 * math.pi)
    if i == 1:
        return 0.5
    if i % 2:
        return 0.0
    log_num, s = _relu_numerator(i)
    return s * math.exp(log_num - 0.5 * (LOG_2PI + math.lgamma(i + 1)))


@dataclass
class CoefficientTable:
    function: str
    max_degree: int
    coefficients: dict[int, float]

    def as_array(self) -> np.ndarray:
        return np.array([self.coefficients[i] for i in range(self.max_degree + 1)])


def coefficient_table(function: str, max_degree: int) -> CoefficientTable:
    funcs = {"sign": sign_coefficient, "relu": relu_coefficient}
    if function not in funcs:
        raise ValueError(f"unknown function {function!r}; expected 'sign' or 'relu'")
    f = funcs[function]
    return CoefficientTable(function, max_degree, {i: f(i) for i in range(max_degree + 1)})


def _check_k(k: int) -> None:
    if k < 2 or k % 4 != 2:
        raise ValueError(f"k must be of the form 4l + 2, got {k}")


def composition_count(total: int, parts: int) -> int:
    """Number of ways to write ``total`` as an ordered sum of ``parts`` non-negative ints."""
    return math.comb(total + parts - 1, parts - 1)


def compositions(total: int, parts: int):
    """Yield every tuple of ``parts`` non-negative ints summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def _odd_part_log_weight(a: int) -> float:
    # log(|H_{2a}(0)| / (2a+1)!) for the odd part n_j = 2a + 1
    return -math.log(2 * a + 1) - math.lgamma(a + 1) - a * math.log(2.0)


@lru_cache(maxsize=None)
def _log_abs_correlation_term(k: int, n: int, cap: int) -> float:
    total = (n - k) // 2
    count = composition_count(total, k)
    if count > cap:
        raise CompositionCapError(
            f"T_{n} at k={k} needs {count} compositions, above the cap of {cap}")
    weights = np.array([_odd_part_log_weight(a) for a in range(total + 1)])
    logs = np.fromiter((weights[list(c)].sum() for c in compositions(total, k)), dtype=np.float64, count=count)
    log_num, _ = _relu_numerator(n)
    prefactor = -0.5 * LOG_2PI + 0.5 * k * math.log(2.0 / math.pi) - 0.5 * n * math.log(k)
    return prefactor + log_num + float(logsumexp(logs))


def correlation_term(k: int, n: int, cap: int = DEFAULT_COMPOSITION_CAP) -> float:
    """``T_n``: the degree-``n`` part of ``E[ReLU(sum z / sqrt(k)) prod sign(z)]``.

    Enumerates the compositions ``n = sum_j (2 a_j + 1)`` and sums the products
    ``ReLU_n k^{-n/2} sqrt(n! / prod n_j!) prod sign_{n_j}`` in log space.
    """
    _check_k(k)
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    if n % 2:
        return 0.0
    # sign of every composition product is (-1)^(1 + k/2) = +1 for k = 4l + 2
    return math.exp(_log_abs_correlation_term(k, n, cap))


def correlation_term_exact(k: int, n: int) -> Fraction:
    """Rational part ``R`` of ``T_n = R * (2/pi)^(k/2) / sqrt(2 pi)``, from exact integers.

    Test oracle for :func:`correlation_term`; restricted to ``n <= 30``.
    """
    _check_k(k)
    if not k <= n <= EXACT_MAX_DEGREE:
        raise ValueError(f"exact mode supports k <= n <= {EXACT_MAX_DEGREE}")
    if n % 2:
        return Fraction(0)
    numerator = hermite_at_zero(n, exact=True) + n * hermite_at_zero(n - 2, exact=True)
    acc = Fraction(0)
    for parts in compositions((n - k) // 2, k):
        term = Fraction(1)
        for a in parts:
            term *= Fraction(hermite_at_zero(2 * a, exact=True), math.factorial(2 * a + 1))
        acc += term
    return Fraction(numerator, k ** (n // 2)) * acc


def exact_to_float(k: int, rational: Fraction) -> float:
    """Attach the irrational prefactor ``(2/pi)^(k/2) / sqrt(2 pi)``."""
    return float(rational) * (2.0 / math.pi) ** (k / 2) / math.sqrt(2.0 * math.pi)


def correlation_lower_bound(k: int) -> float:
    """``T_k = k! / (sqrt(2 pi) k^(k/2) (k - 1) (k/2)! pi^(k/2))``, the first series term."""
    _check_k(k)
    log_val = (math.lgamma(k + 1) - 0.5 * LOG_2PI - 0.5 * k * math.log(k) - math.log(k - 1)
               - math.lgamma(k // 2 + 1) - 0.5 * k * math.log(math.pi))
    return math.exp(log_val)


def correlation_lower_bound_stirling(k: int) -> float:
    """Stirling approximation of ``T_k``: ``(2 / (e pi))^(2l+1) / (sqrt(pi) (4l + 1))``."""
    _check_k(k)
    l = (k - 2) // 4
    return (2.0 / (math.e * math.pi)) ** (2 * l + 1) / (math.sqrt(math.pi) * (4 * l + 1))


@dataclass
class CorrelationSeries:
    k: int
    n_max: int
    terms: dict[int, float] = field(default_factory=dict)

    @property
    def partial_sum(self) -> float:
        return math.fsum(self.terms.values())

    @property
    def last_term(self) -> float:
        """Magnitude of the last even term included; reported as the tail estimate."""
        last = self.n_max if self.n_max % 2 == 0 else self.n_max - 1
        return self.terms.get(last, 0.0)

    @property
    def leading_term(self) -> float:
        return self.terms[self.k]

    @property
    def inner_product(self) -> float:
        """``<ReLU_{w_S}, lifted parity>`` for ``|w_S| = 1/sqrt(2 pi)``: partial sum over sqrt(2 pi)."""
        return self.partial_sum / math.sqrt(2.0 * math.pi)


def correlation_series(k: int, n_max: int | None = None, cap: int = DEFAULT_COMPOSITION_CAP) -> CorrelationSeries:
    _check_k(k)
    n_max = k + 40 if n_max is None else n_max
    if n_max < k:
        raise ValueError(f"need n_max >= k, got n_max={n_max}, k={k}")
    return CorrelationSeries(k, n_max, {n: correlation_term(k, n, cap) for n in range(k, n_max + 1, 2)})


def relu_parity_inner_product(k: int, n_max: int | None = None, cap: int = DEFAULT_COMPOSITION_CAP) -> float:
    """``(1/sqrt(2 pi)) * sum_{n=k}^{n_max} T_n``, default ``n_max = k + 40``.

    This is the correlation between the lifted ``k``-parity and the ReLU with
    weight ``(1/sqrt(2 pi k)) * 1_S``; the truncated sum is a lower bound since
    every term is positive.
    """
    return correlation_series(k, n_max, cap).inner_product


def hermite_multinomial_rhs(n: int, betas, xs) -> np.ndarray:
    """``sum_{n_1+..+n_k=n} n!/(prod n_j!) prod beta_j^{n_j} H_{n_j}(x_j)``.

    Equals ``H_n(sum_j beta_j x_j)`` whenever ``sum_j beta_j^2 = 1``. ``xs`` has
    shape ``(k, ...)``.
    """
    betas = np.asarray(betas, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    k = betas.size
    tables = [hermite_table(n, xs[j]) for j in range(k)]
    out = np.zeros(xs.shape[1:])
    for parts in compositions(n, k):
        coeff = math.factorial(n)
        term = np.ones(xs.shape[1:])
        for j, nj in enumerate(parts):
            coeff //= math.factorial(nj)
            term = term * betas[j] ** nj * tables[j][nj]
        out += coeff * term
    return out

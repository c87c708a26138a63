"""Concrete learners standing in for the black-box oracles of both algorithms.

ReLU learners return ``w`` with ``|w| <= 1``; halfspace learners return unit
vectors. ``sign(0) = +1`` and the ReLU's derivative at 0 is taken as 1
(the right derivative), matching the indicator ``1_+(a) = 1{a >= 0}``.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from relu_lab._rng import substream
from relu_lab.datasets import LabeledDataset
from relu_lab.gaussian_stats import OPTIMAL_NORM

log = logging.getLogger(__name__)

RELU_KINDS = ("gradient-descent", "subset-scan")
HALFSPACE_KINDS = ("averaging", "band-localized")


def default_norm_grid() -> tuple[float, ...]:
    return tuple(sorted(set(np.round(np.linspace(0.0, 1.0, 41), 12)) | {OPTIMAL_NORM}))


@dataclass(frozen=True)
class ReluLearnerSpec:
    kind: str = "subset-scan"
    restarts: int = 4
    steps: int = 300
    step_size: float = 0.5
    k_max: int = 2
    epsilon: float | None = None
    norm_grid: tuple[float, ...] = field(default_factory=default_norm_grid)

    def __post_init__(self):
        if self.kind not in RELU_KINDS:
            raise ValueError(f"unknown ReLU learner {self.kind!r}")
        if self.k_max < 1 or self.restarts < 1 or self.steps < 0 or self.step_size <= 0:
            raise ValueError("learner budget must be positive")
        if any(not 0.0 <= c <= 1.0 for c in self.norm_grid):
            raise ValueError("norm grid must lie in [0, 1]")


def relu_predict(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.maximum(X @ w, 0.0)


def square_loss(w, X, y) -> float:
    return float(np.mean((relu_predict(X, w) - y) ** 2))


def square_loss_grad(w, X, y) -> np.ndarray:
    """Gradient of the empirical square loss: ``(2/m) sum 1_+(w.x) (ReLU(w.x) - y) x``."""
    z = X @ w
    r = np.where(z >= 0, np.maximum(z, 0.0) - y, 0.0)
    return (2.0 / X.shape[0]) * (r @ X)


def project_unit_ball(w: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(w)
    return w / n if n > 1.0 else w


def _check_real(ds: LabeledDataset) -> None:
    if ds.m == 0:
        raise ValueError("empty dataset")
    if ds.label_kind != "real":
        raise ValueError("ReLU learners need real labels in [0, 1]")


def projected_gd(ds: LabeledDataset, w0: np.ndarray, steps: int, step_size: float) -> np.ndarray:
    w = project_unit_ball(np.asarray(w0, dtype=np.float64).copy())
    for _ in range(steps):
        w = project_unit_ball(w - step_size * square_loss_grad(w, ds.X, ds.y))
    return w


@dataclass
class ScanResult:
    w: np.ndarray
    support: tuple[int, ...]
    scale: float
    loss: float
    n_subsets: int
    n_candidates: int


def scan_candidate_count(d: int, k_max: int, grid_size: int) -> int:
    """Candidates examined by :func:`subset_scan`: every nonempty ``T`` with
    ``|T| <= k_max`` times every grid norm."""
    return grid_size * sum(math.comb(d, t) for t in range(1, min(k_max, d) + 1))


def subset_scan(ds: LabeledDataset, k_max: int, norm_grid=None) -> ScanResult:
    """Exhaustive search over ``c * (1/sqrt|T|) * 1_T`` for ``|T| <= k_max``, ``c`` in the grid.

    For a fixed direction the loss is the quadratic ``c^2 A - 2 c B + E[y^2]``,
    so each support costs one pass over the data. Ties keep the first
    candidate in (size, lexicographic support, grid) order.
    """
    _check_real(ds)
    grid = np.asarray(default_norm_grid() if norm_grid is None else norm_grid, dtype=np.float64)
    y = ds.y
    y2 = float(np.mean(y * y))
    best = (y2, (), 0.0)  # the zero vector
    n_subsets = 0
    for t in range(1, min(k_max, ds.d) + 1):
        inv = 1.0 / math.sqrt(t)
        for T in itertools.combinations(range(ds.d), t):
            n_subsets += 1
            z = ds.X[:, T[0]].copy() if t == 1 else ds.X[:, T].sum(axis=1)
            np.maximum(z, 0.0, out=z)
            z *= inv
            A = float(np.dot(z, z)) / ds.m
            B = float(np.dot(z, y)) / ds.m
            losses = grid * grid * A - 2.0 * grid * B + y2
            i = int(np.argmin(losses))
            if losses[i] < best[0]:
                best = (float(losses[i]), T, float(grid[i]))
    loss, T, c = best
    w = np.zeros(ds.d)
    if T:
        w[list(T)] = c / math.sqrt(len(T))
    n_candidates = n_subsets * grid.size
    log.debug("subset scan: d=%d k_max=%d subsets=%d candidates=%d", ds.d, k_max, n_subsets, n_candidates)
    return ScanResult(w, T, c, loss, n_subsets, n_candidates)


def fit_relu(ds: LabeledDataset, spec: ReluLearnerSpec, seed: int, d: int | None = None) -> np.ndarray:
    """Approximate empirical-risk minimizer over ``{ReLU_w : |w| <= 1}``."""
    _check_real(ds)
    if d is not None and d != ds.d:
        raise ValueError(f"dimension mismatch: expected {d}, dataset has {ds.d}")
    if spec.kind == "subset-scan":
        return subset_scan(ds, spec.k_max, spec.norm_grid).w
    rng = substream(seed, "relu-gd-restarts")
    best_w, best_loss = np.zeros(ds.d), square_loss(np.zeros(ds.d), ds.X, ds.y)
    for _ in range(spec.restarts):
        w0 = rng.standard_normal(ds.d)
        w0 /= np.linalg.norm(w0)
        w = projected_gd(ds, w0, spec.steps, spec.step_size)
        loss = square_loss(w, ds.X, ds.y)
        if loss < best_loss:
            best_w, best_loss = w, loss
    return best_w


@dataclass(frozen=True)
class HalfspaceLearnerSpec:
    kind: str = "averaging"
    b0: float = 1.0
    iterations: int = 6
    hinge_steps: int = 200
    step_size: float = 0.1
    validation_fraction: float = 0.2
    min_band: int = 50

    def __post_init__(self):
        if self.kind not in HALFSPACE_KINDS:
            raise ValueError(f"unknown halfspace learner {self.kind!r}")
        if self.b0 <= 0 or self.iterations < 0 or self.hinge_steps < 0 or self.step_size <= 0:
            raise ValueError("band schedule parameters must be positive")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation fraction must lie in (0, 1)")


class ZeroMeanError(RuntimeError):
    """The label-weighted mean of the points is indistinguishable from zero."""


def _check_boolean(ds: LabeledDataset) -> None:
    if ds.m == 0:
        raise ValueError("empty dataset")
    if ds.label_kind != "boolean":
        raise ValueError("halfspace learners need labels in {-1, +1}")


def fit_halfspace_averaging(ds: LabeledDataset, significance: float = 1e-3) -> np.ndarray:
    """``normalize(mean(y * x))``.

    Raises :class:`ZeroMeanError` when ``m |mean|^2 / mean(y^2)`` does not
    exceed the ``1 - significance`` quantile of chi-square with ``d`` degrees
    of freedom, i.e. when the mean is consistent with labels carrying no
    information about x.
    """
    _check_boolean(ds)
    mu = ds.y @ ds.X / ds.m
    stat = ds.m * float(mu @ mu)
    if stat <= chi2.ppf(1.0 - significance, ds.d):
        raise ZeroMeanError(f"mean of y*x is not distinguishable from 0 (statistic {stat:.3g}, d={ds.d})")
    return mu / np.linalg.norm(mu)


def zero_one_error(ds: LabeledDataset, w: np.ndarray) -> float:
    return float(np.mean(np.where(ds.X @ w >= 0, 1.0, -1.0) != ds.y))


@dataclass
class HalfspaceFit:
    w: np.ndarray
    validation_error: float
    initial_validation_error: float
    iterations_run: int
    band_emptied: bool


def fit_halfspace_localized(ds: LabeledDataset, w0, spec: HalfspaceLearnerSpec, seed: int = 0) -> HalfspaceFit:
    """Refit inside shrinking bands ``|w_t . x| <= b0 2^-t``.

    Each round minimizes the hinge loss ``max(0, 1 - y v.x / b_t)`` over the
    band by full-batch subgradient descent, constrained to ``|v - w_t| <= b_t``,
    then renormalizes. The returned vector is the iterate (``w0`` included)
    with the lowest 0/1 error on a held-out split, so it is never worse than
    ``w0`` there.
    """
    _check_boolean(ds)
    w = np.asarray(w0, dtype=np.float64)
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise ValueError("w0 must be a unit vector")
    train, val = ds.random_split(spec.validation_fraction, substream(seed, "localize-split"))
    best_w, best_err = w.copy(), zero_one_error(val, w)
    initial = best_err
    emptied, t = False, 0
    for t in range(spec.iterations):
        b = spec.b0 * 2.0**-t
        inside = np.abs(train.X @ w) <= b
        if inside.sum() < spec.min_band:
            emptied = True
            break
        Xb, yb = train.X[inside], train.y[inside]
        v = w.copy()
        for _ in range(spec.hinge_steps):
            active = yb * (Xb @ v) < b
            if not active.any():
                break
            grad = -(yb[active] @ Xb[active]) / (b * Xb.shape[0])
            v = v - spec.step_size * b * grad
            step = v - w
            n = np.linalg.norm(step)
            if n > b:
                v = w + step * (b / n)
        w = v / np.linalg.norm(v)
        err = zero_one_error(val, w)
        if err < best_err:
            best_w, best_err = w.copy(), err
    else:
        t = spec.iterations
    return HalfspaceFit(best_w, best_err, initial, t, emptied)


def fit_halfspace(ds: LabeledDataset, spec: HalfspaceLearnerSpec, seed: int = 0) -> np.ndarray:
    """Averaging, followed by band localization when ``spec.kind`` asks for it."""
    w = fit_halfspace_averaging(ds)
    if spec.kind == "band-localized":
        w = fit_halfspace_localized(ds, w, spec, seed).w
    return w

"""ReLU regression through halfspace learning.

Real labels are hard-thresholded at ``alpha``; a halfspace fitted to the
Boolean labels gives the direction, and the returned hypothesis is the ReLU
with that unit weight vector. Because the loss-minimizing ``alpha`` depends on
the unknown ``opt``, :func:`select_alpha` picks it from a grid on a holdout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from relu_lab._rng import substream
from relu_lab.datasets import LabeledDataset
from relu_lab.learners import HalfspaceLearnerSpec, fit_halfspace, relu_predict


def default_alpha_grid() -> tuple[float, ...]:
    return tuple(float(a) for a in np.geomspace(1e-2, 0.5, 8))


@dataclass(frozen=True)
class ApproxConfig:
    alphas: tuple[float, ...] = field(default_factory=default_alpha_grid)
    halfspace: HalfspaceLearnerSpec = field(default_factory=HalfspaceLearnerSpec)
    holdout_fraction: float = 0.2

    def __post_init__(self):
        alphas = tuple(float(a) for a in np.atleast_1d(self.alphas))
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise ValueError("alpha grid is empty")
        if any(not 0.0 < a < 1.0 for a in alphas):
            raise ValueError("every alpha must lie in (0, 1)")
        if list(alphas) != sorted(alphas):
            raise ValueError("alpha grid must be sorted ascending")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout fraction must lie in (0, 1)")


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def threshold_labels(ds: LabeledDataset, alpha: float) -> LabeledDataset:
    """``(x, sign(y - alpha))`` with ``sign(0) = +1``."""
    _check_alpha(alpha)
    if ds.label_kind != "real":
        raise ValueError("thresholding needs real labels")
    return LabeledDataset(ds.X, np.where(ds.y >= alpha, 1.0, -1.0), "boolean", ds.marginal, ds.seed,
                          {**ds.meta, "alpha": alpha})


def empirical_square_loss(ds: LabeledDataset, w) -> float:
    if ds.m == 0:
        raise ValueError("empty dataset")
    return float(np.mean((relu_predict(ds.X, np.asarray(w, dtype=np.float64)) - ds.y) ** 2))


def fit_relu_via_halfspace(ds: LabeledDataset, alpha: float, halfspace: HalfspaceLearnerSpec | None = None,
                           seed: int = 0) -> np.ndarray:
    """Unit ``w`` from a halfspace fit to the labels thresholded at ``alpha``.

    Raises :class:`~relu_lab.learners.ZeroMeanError` when the thresholded labels
    carry no detectable direction.
    """
    spec = HalfspaceLearnerSpec() if halfspace is None else halfspace
    return fit_halfspace(threshold_labels(ds, alpha), spec, seed)


@dataclass
class AlphaSelection:
    w: np.ndarray
    alpha: float
    loss: float
    losses: dict[float, float]
    best_rescaling: float | None = None


def best_rescaling(ds: LabeledDataset, w) -> float:
    """Loss-minimizing ``c`` in ``[0, 1]`` for ``ReLU_{c w}`` (diagnostic only)."""
    r = relu_predict(ds.X, np.asarray(w, dtype=np.float64))
    A = float(r @ r)
    return 0.0 if A == 0 else float(np.clip((r @ ds.y) / A, 0.0, 1.0))


def select_alpha(ds: LabeledDataset, cfg: ApproxConfig, seed: int, diagnostic: bool = False) -> AlphaSelection:
    """Fit one direction per grid ``alpha`` on a training split and keep the one
    with the lowest holdout square loss; ties go to the smaller ``alpha``.

    Grid points whose thresholded labels carry no direction are skipped; if
    all are skipped the last error is raised.
    """
    train, holdout = ds.random_split(cfg.holdout_fraction, substream(seed, "alpha-holdout"))
    losses: dict[float, float] = {}
    best = None
    last_error = None
    for alpha in cfg.alphas:
        try:
            w = fit_relu_via_halfspace(train, alpha, cfg.halfspace, seed)
        except RuntimeError as exc:
            last_error = exc
            continue
        loss = empirical_square_loss(holdout, w)
        losses[alpha] = loss
        if best is None or loss < best[2]:
            best = (w, alpha, loss)
    if best is None:
        raise last_error
    w, alpha, loss = best
    sel = AlphaSelection(w, alpha, loss, losses)
    if diagnostic:
        sel.best_rescaling = best_rescaling(holdout, w)
    return sel


def markov_fraction(ds: LabeledDataset, w_star, alpha: float) -> float:
    """Fraction of samples with ``|y - ReLU(w*.x)| >= alpha``."""
    return float(np.mean(np.abs(ds.y - relu_predict(ds.X, np.asarray(w_star))) >= alpha))


def thresholded_disagreement(ds: LabeledDataset, w, alpha: float) -> float:
    """``err_01(w)``: fraction with ``sign(y - alpha) != sign(w.x)``."""
    labels = np.where(ds.y >= alpha, 1.0, -1.0)
    return float(np.mean(np.where(ds.X @ np.asarray(w) >= 0, 1.0, -1.0) != labels))

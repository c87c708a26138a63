"""Recovering a sparse noisy parity with an agnostic ReLU learner.

Every sample is lifted to Gaussian space once, its label mapped to {0, 1}, and
for each coordinate ``j`` a copy with column ``j`` removed is handed to the
learner. Removing a relevant coordinate makes the labels independent of the
remaining inputs, so no ReLU beats ``1/2 - 1/(4 pi)``; removing an irrelevant
one keeps the parity-correlated ReLU available. High validation error
therefore flags relevance.
"""
from __future__ import annotations

import logging
import math
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from relu_lab._rng import derive_seed
from relu_lab.datagen import gaussian_lift_sample, remap_label
from relu_lab.datasets import LabeledDataset
from relu_lab.gaussian_stats import OPT_THRESHOLD
from relu_lab.hermite import relu_parity_inner_product
from relu_lab.learners import ReluLearnerSpec, fit_relu, square_loss

log = logging.getLogger(__name__)


def auto_epsilon(k: int, eta: float, n_max: int | None = None) -> tuple[float, float]:
    """``(epsilon, expected_gap)`` with ``expected_gap = (1 - 2 eta) * <ReLU_{w_S}, parity>``
    and ``epsilon = 0.8 * expected_gap``."""
    gap = (1.0 - 2.0 * eta) * relu_parity_inner_product(k, n_max)
    return 0.8 * gap, gap


@dataclass(frozen=True)
class ReductionConfig:
    M1: int
    M2: int | None = None
    epsilon: float = 0.05
    learner: ReluLearnerSpec = field(default_factory=ReluLearnerSpec)
    repetitions: int = 1
    expected_gap: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.M2 is None:
            object.__setattr__(self, "M2", math.ceil(100.0 / self.epsilon**2))
        if self.M1 < 1 or self.M2 < 1:
            raise ValueError("M1 and M2 must be positive")
        if self.repetitions < 1:
            raise ValueError("need at least one repetition")

    @property
    def threshold(self) -> float:
        return OPT_THRESHOLD - self.epsilon / 4.0

    @property
    def samples_per_repetition(self) -> int:
        return self.M1 + self.M2

    @property
    def distinguishable(self) -> bool | None:
        """Whether the expected gap is wide enough for the threshold test (gap >= epsilon)."""
        if self.expected_gap is None:
            return None
        return self.expected_gap >= self.epsilon


class DroppedDatasets(Sequence):
    """``(S_j, V_j)`` pairs built on access from one shared lifted sample.

    Holding the lifted matrix once avoids ``d`` copies of the data.
    """

    def __init__(self, lifted: np.ndarray, labels: np.ndarray, M1: int, seed):
        self.lifted = lifted
        self.labels = labels
        self.M1 = M1
        self.seed = seed

    def __len__(self) -> int:
        return self.lifted.shape[1]

    def __getitem__(self, j: int) -> tuple[LabeledDataset, LabeledDataset]:
        if not -len(self) <= j < len(self):
            raise IndexError(j)
        j = j % len(self)
        Xj = np.delete(self.lifted, j, axis=1)
        meta = {"dropped": j}
        train = LabeledDataset(Xj[: self.M1], self.labels[: self.M1], "real", "lifted", self.seed, meta)
        val = LabeledDataset(Xj[self.M1:], self.labels[self.M1:], "real", "lifted", self.seed, meta)
        return train, val


def build_dropped_datasets(raw: LabeledDataset, cfg: ReductionConfig, seed: int) -> DroppedDatasets:
    """Lift each sample once, remap its label, and expose the per-coordinate drops."""
    if raw.label_kind != "boolean":
        raise ValueError("reduction needs boolean parity samples")
    if raw.m != cfg.samples_per_repetition:
        raise ValueError(f"expected M1 + M2 = {cfg.samples_per_repetition} samples, got {raw.m}")
    lifted = gaussian_lift_sample(raw.X, seed)
    return DroppedDatasets(lifted, remap_label(raw.y), cfg.M1, seed)


class CoordinateFailure(RuntimeError):
    def __init__(self, j: int, cause: BaseException):
        super().__init__(f"coordinate {j}: {cause}")
        self.j = j
        self.cause = cause


def detect_relevant(train: LabeledDataset, validation: LabeledDataset, cfg: ReductionConfig,
                    seed: int, j: int | None = None) -> tuple[bool, float]:
    """``(val_err >= 1/2 - 1/(4 pi) - epsilon/4, val_err)`` for the learner's fit on ``train``."""
    try:
        h = fit_relu(train, cfg.learner, seed)
    except Exception as exc:
        raise CoordinateFailure(-1 if j is None else j, exc) from exc
    val_err = square_loss(h, validation.X, validation.y)
    return val_err >= cfg.threshold, val_err


@dataclass
class ReductionReport:
    d: int
    threshold: float
    epsilon: float
    errors: list[list[float]]
    flags: list[list[bool]]
    recovered: tuple[int, ...]
    failures: dict[int, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    distinguishable: bool | None = None
    truth: tuple[int, ...] | None = None

    @property
    def status(self) -> str:
        if self.failures:
            return "partial"
        if self.distinguishable is False:
            return "indistinguishable"
        return "ok"

    @property
    def correct(self) -> bool | None:
        return None if self.truth is None else tuple(sorted(self.truth)) == self.recovered

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "threshold": self.threshold,
            "epsilon": self.epsilon,
            "validation_errors": self.errors,
            "flags": self.flags,
            "recovered": list(self.recovered),
            "truth": None if self.truth is None else list(self.truth),
            "correct": self.correct,
            "status": self.status,
            "failures": {str(k): v for k, v in self.failures.items()},
            "timings": self.timings,
        }


def recover_parity(raw: LabeledDataset, cfg: ReductionConfig, seed: int) -> ReductionReport:
    """Run the per-coordinate test on every coordinate and return the flagged set.

    With ``cfg.repetitions = R`` the sample is cut into ``R`` blocks of
    ``M1 + M2``, the test runs on each, and a coordinate is kept when more
    than half the blocks flag it.
    """
    R = cfg.repetitions
    if raw.m != R * cfg.samples_per_repetition:
        raise ValueError(f"expected {R} x (M1 + M2) = {R * cfg.samples_per_repetition} samples, got {raw.m}")
    errors = [[math.nan] * raw.d for _ in range(R)]
    flags = [[False] * raw.d for _ in range(R)]
    failures: dict[int, str] = {}
    timings = {"lift": 0.0, "learn": 0.0}
    for r in range(R):
        block = raw.take(slice(r * cfg.samples_per_repetition, (r + 1) * cfg.samples_per_repetition))
        t0 = time.perf_counter()
        drops = build_dropped_datasets(block, cfg, derive_seed(seed, "lift", r))
        timings["lift"] += time.perf_counter() - t0

        def run(j):
            train, val = drops[j]
            return detect_relevant(train, val, cfg, derive_seed(seed, "learner", r, j), j)

        t0 = time.perf_counter()
        with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
            futures = [pool.submit(run, j) for j in range(raw.d)]
            for j, fut in enumerate(futures):
                try:
                    flags[r][j], errors[r][j] = fut.result()
                except CoordinateFailure as exc:
                    failures[j] = str(exc)
        timings["learn"] += time.perf_counter() - t0
    votes = np.sum(flags, axis=0)
    recovered = tuple(int(j) for j in np.flatnonzero(votes * 2 > R) if j not in failures)
    truth = raw.meta.get("S")
    report = ReductionReport(raw.d, cfg.threshold, cfg.epsilon, errors, flags, recovered, failures, timings,
                             cfg.distinguishable, None if truth is None else tuple(truth))
    log.info("reduction: recovered %s (status %s)", recovered, report.status)
    return report

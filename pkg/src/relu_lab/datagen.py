"""Seeded generators: sparse noisy parities, their Gaussian lift, and agnostic
ReLU regression data with a known population loss for the generating ReLU.

Indices are 0-based throughout. Each generator draws from its own substream
of the seed (see :mod:`relu_lab._rng`), so e.g. label noise is unchanged when
a lift is redrawn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.stats import norm

from relu_lab._rng import substream
from relu_lab.datasets import LabeledDataset


@dataclass(frozen=True)
class SlpnInstance:
    """Hidden truth of a sparse parity problem: dimension, relevant set, noise rate."""

    d: int
    S: tuple[int, ...]
    eta: float = 0.0

    def __post_init__(self):
        S = tuple(sorted(int(i) for i in self.S))
        object.__setattr__(self, "S", S)
        if not S:
            raise ValueError("relevant set must be non-empty")
        if len(set(S)) != len(S) or S[0] < 0 or S[-1] >= self.d:
            raise ValueError(f"relevant set {S} is not a subset of range({self.d})")
        if not 0.0 <= self.eta < 0.5:
            raise ValueError(f"noise rate must lie in [0, 1/2), got {self.eta}")

    @property
    def k(self) -> int:
        return len(self.S)

    @classmethod
    def random(cls, d: int, k: int, eta: float, seed: int) -> SlpnInstance:
        rng = substream(seed, "slpn-support")
        return cls(d, tuple(rng.choice(d, size=k, replace=False)), eta)


def sample_slpn(inst: SlpnInstance, m: int, seed: int) -> LabeledDataset:
    """``m`` uniform points of {-1, +1}^d labelled by the parity on ``S``, each
    label negated independently with probability ``eta``."""
    if m < 1:
        raise ValueError("need at least one sample")
    X = substream(seed, "slpn-points").choice(np.array([-1.0, 1.0]), size=(m, inst.d))
    clean = np.prod(X[:, list(inst.S)], axis=1)
    flips = substream(seed, "slpn-noise").random(m) < inst.eta
    y = np.where(flips, -clean, clean)
    return LabeledDataset(X, y, "boolean", "boolean-cube", seed,
                          {"S": list(inst.S), "eta": inst.eta})


def gaussian_lift_sample(x, seed: int) -> np.ndarray:
    """Multiply each coordinate of a hypercube point (or a batch of them) by an
    independent half-normal draw. ``sign`` of every output coordinate equals
    the input coordinate, and over uniform inputs the output is N(0, I)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.abs(x) == 1.0):
        raise ValueError("lift expects points of {-1, +1}^d")
    g = np.abs(substream(seed, "lift").standard_normal(x.shape))
    return g * x


def gaussian_lift(ds: LabeledDataset, seed: int) -> LabeledDataset:
    return LabeledDataset(gaussian_lift_sample(ds.X, seed), ds.y, ds.label_kind, "lifted",
                          ds.seed, {**ds.meta, "lift_seed": seed})


def remap_label(y):
    """{-1, +1} -> {0, 1} via ``(y + 1) / 2``."""
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("remap expects labels in {-1, +1}")
    out = (y + 1.0) / 2.0
    return out if out.ndim else float(out)


def remap_dataset(ds: LabeledDataset) -> LabeledDataset:
    if ds.label_kind != "boolean":
        raise ValueError("remap needs boolean labels")
    return LabeledDataset(ds.X, remap_label(ds.y), "real", ds.marginal, ds.seed, ds.meta)


def drop_coordinate(ds: LabeledDataset, j: int) -> LabeledDataset:
    """The dataset with column ``j`` removed; labels untouched."""
    if not 0 <= j < ds.d:
        raise IndexError(f"coordinate {j} out of range for d={ds.d}")
    return LabeledDataset(np.delete(ds.X, j, axis=1), ds.y, ds.label_kind, ds.marginal,
                          ds.seed, {**ds.meta, "dropped": j})


CORRUPTION_KINDS = ("none", "flip-fraction", "additive-bounded", "clamp-shift")


@dataclass(frozen=True)
class CorruptionModel:
    """Label corruption applied after clamping the clean ReLU label to [0, 1].

    ``flip-fraction``: each label is replaced by ``1 - y`` with probability ``magnitude``.
    ``additive-bounded``: ``y + s * magnitude`` with a fair random sign ``s``, clipped to [0, 1].
    ``clamp-shift``: ``y + magnitude`` clipped to [0, 1] (magnitude may be negative).
    """

    kind: str = "none"
    magnitude: float = 0.0

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption {self.kind!r}")
        if self.kind == "flip-fraction" and not 0.0 <= self.magnitude <= 1.0:
            raise ValueError("flip fraction must lie in [0, 1]")
        if self.kind == "additive-bounded" and not 0.0 <= self.magnitude <= 1.0:
            raise ValueError("additive bound must lie in [0, 1]")
        if self.kind == "clamp-shift" and not -1.0 <= self.magnitude <= 1.0:
            raise ValueError("shift must lie in [-1, 1]")

    @classmethod
    def parse(cls, text: str) -> CorruptionModel:
        """``"kind:magnitude"`` or ``"none"``."""
        if text == "none":
            return cls()
        kind, _, mag = text.partition(":")
        if not mag:
            raise ValueError(f"expected kind:magnitude, got {text!r}")
        return cls(kind, float(mag))

    def apply(self, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "none":
            return y.copy()
        if self.kind == "flip-fraction":
            return np.where(rng.random(y.shape) < self.magnitude, 1.0 - y, y)
        if self.kind == "additive-bounded":
            s = np.where(rng.random(y.shape) < 0.5, -1.0, 1.0)
            return np.clip(y + s * self.magnitude, 0.0, 1.0)
        return np.clip(y + self.magnitude, 0.0, 1.0)

    def outcomes(self, y: float) -> list[tuple[float, float]]:
        """(probability, corrupted label) pairs for a clean label ``y``."""
        if self.kind == "none":
            return [(1.0, y)]
        if self.kind == "flip-fraction":
            return [(1.0 - self.magnitude, y), (self.magnitude, 1.0 - y)]
        if self.kind == "additive-bounded":
            return [(0.5, min(max(y - self.magnitude, 0.0), 1.0)), (0.5, min(max(y + self.magnitude, 0.0), 1.0))]
        return [(1.0, min(max(y + self.magnitude, 0.0), 1.0))]


@dataclass(frozen=True)
class OptReport:
    """Population losses of the generating ReLU (all exact, by 1-D quadrature).

    ``opt`` is the loss of ``ReLU_{w*}`` on the corrupted distribution, an
    upper bound on the best-ReLU loss. ``clamp_loss`` is the part already
    present without corruption (from clamping labels to [0, 1]);
    ``corruption_loss`` is ``E[(y_clean - y_corrupted)^2]``.
    """

    opt: float
    clamp_loss: float
    corruption_loss: float
    exact: bool = True
    upper_bound: bool = True

    @property
    def excess_opt(self) -> float:
        """``opt`` above the realizable baseline ``clamp_loss``."""
        return self.opt - self.clamp_loss


def _gauss_integral(f, s: float) -> float:
    """``E[f(s g)]`` for ``g ~ N(0,1)``, split at the kinks 0 and 1 of ``f``."""
    if s == 0:
        return f(0.0)
    pieces = [(-np.inf, 0.0), (0.0, 1.0 / s), (1.0 / s, np.inf)]
    total = 0.0
    for lo, hi in pieces:
        val, _ = integrate.quad(lambda g: f(s * g) * norm.pdf(g), lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
    return total


def clamp_loss(w_norm: float) -> float:
    """``E[(ReLU(w.x) - min(ReLU(w.x), 1))^2] = E[(s g - 1)^2; s g > 1]`` in closed form."""
    if w_norm == 0:
        return 0.0
    c = 1.0 / w_norm
    tail, dens = norm.sf(c), norm.pdf(c)
    # E[g^2; g>c] = c phi(c) + tail, E[g; g>c] = phi(c)
    return w_norm**2 * (c * dens + tail) - 2.0 * w_norm * dens + tail


def opt_report(w_norm: float, corruption: CorruptionModel) -> OptReport:
    def loss(z: float) -> float:
        r = max(z, 0.0)
        y = min(r, 1.0)
        return sum(p * (r - yc) ** 2 for p, yc in corruption.outcomes(y))

    def corr(z: float) -> float:
        y = min(max(z, 0.0), 1.0)
        return sum(p * (y - yc) ** 2 for p, yc in corruption.outcomes(y))

    return OptReport(_gauss_integral(loss, w_norm), clamp_loss(w_norm), _gauss_integral(corr, w_norm))


def flip_fraction_for_excess(w_norm: float, excess: float) -> float:
    """Flip probability whose corruption raises ``opt`` above the clamp loss by ``excess``.

    ``opt`` is affine in the flip probability, so two exact evaluations suffice.
    """
    base = opt_report(w_norm, CorruptionModel()).opt
    full = opt_report(w_norm, CorruptionModel("flip-fraction", 1.0)).opt
    p = excess / (full - base)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"excess {excess} is not reachable by label flips at |w*| = {w_norm}")
    return p


def make_agnostic_relu_dataset(w_star, corruption: CorruptionModel, m: int, seed: int) -> tuple[LabeledDataset, OptReport]:
    """Gaussian points, labels ``min(ReLU(w*.x), 1)`` then corrupted.

    Returns the dataset and the exact population losses of ``ReLU_{w*}``.
    """
    w_star = np.asarray(w_star, dtype=np.float64)
    w_norm = float(np.linalg.norm(w_star))
    if w_norm > 1.0 + 1e-12:
        raise ValueError(f"|w*| must be at most 1, got {w_norm}")
    if m < 1:
        raise ValueError("need at least one sample")
    X = substream(seed, "agnostic-points").standard_normal((m, w_star.size))
    clean = np.clip(X @ w_star, 0.0, 1.0)
    y = corruption.apply(clean, substream(seed, "agnostic-corruption"))
    if y.min() < 0.0 or y.max() > 1.0:
        raise ValueError("corruption produced labels outside [0, 1]")
    report = opt_report(w_norm, corruption)
    ds = LabeledDataset(X, y, "real", "gaussian", seed,
                        {"w_star": w_star.tolist(), "corruption": f"{corruption.kind}:{corruption.magnitude}",
                         "opt": report.opt, "clamp_loss": report.clamp_loss})
    return ds, report


def lifted_parity_dataset(inst: SlpnInstance, m: int, seed: int) -> LabeledDataset:
    """Lifted, label-remapped parity samples: Gaussian points with {0, 1} labels."""
    raw = sample_slpn(inst, m, seed)
    return remap_dataset(gaussian_lift(raw, seed))


def parity_relu_weight(d: int, S) -> np.ndarray:
    """``w_S = (1/sqrt(2 pi |S|)) * sum_{i in S} e_i``, the parity-correlated ReLU."""
    w = np.zeros(d)
    S = list(S)
    w[S] = 1.0 / math.sqrt(2.0 * math.pi * len(S))
    return w

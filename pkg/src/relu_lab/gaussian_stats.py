"""Closed-form Gaussian expectations shared by both algorithms."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

SQRT_2PI = math.sqrt(2.0 * math.pi)
OPTIMAL_NORM = 1.0 / SQRT_2PI
#: smallest population loss any ReLU attains against labels independent of x
OPT_THRESHOLD = 0.5 - 1.0 / (4.0 * math.pi)


def relu_moments(w_norm: float) -> tuple[float, float]:
    """``(E[ReLU(w.x)], E[ReLU(w.x)^2])`` for ``x ~ N(0, I)``: ``(|w|/sqrt(2 pi), |w|^2/2)``."""
    if w_norm < 0:
        raise ValueError("norm must be non-negative")
    return w_norm / SQRT_2PI, 0.5 * w_norm * w_norm


def random_label_loss(w_norm: float) -> float:
    """Square loss of ``ReLU_w`` against fair-coin {0, 1} labels independent of x."""
    first, second = relu_moments(w_norm)
    return second - first + 0.5


@dataclass(frozen=True)
class LossProfile:
    w_norm: float
    random_label_loss: float
    optimal_norm: float = OPTIMAL_NORM
    optimal_loss: float = OPT_THRESHOLD


def loss_profile(w_norm: float) -> LossProfile:
    return LossProfile(w_norm, random_label_loss(w_norm))


def parity_label_loss(w_norm: float, correlation: float, eta: float) -> float:
    """Loss of the parity-aligned ReLU on remapped noisy-parity labels.

    ``correlation`` is ``E[ReLU_{w_S}(z) * lifted parity(z)]``; labels flipped
    with probability ``eta`` shrink its effect by ``1 - 2 eta``.
    """
    if not 0.0 <= eta < 0.5:
        raise ValueError(f"noise rate must lie in [0, 1/2), got {eta}")
    return random_label_loss(w_norm) - (1.0 - 2.0 * eta) * correlation


def gaussian_band_mass(alpha: float) -> float:
    """``Pr[0 < g < 2 alpha]`` for ``g ~ N(0, 1)``; at most ``min(2 alpha, 1/2)``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return 0.5 * float(erf(math.sqrt(2.0) * alpha))


def angle_disagreement(a, b) -> tuple[float, float]:
    """Angle between ``a`` and ``b`` and ``Pr[sign(a.x) != sign(b.x)]`` under N(0, I).

    The disagreement is exactly ``angle / pi`` for Gaussian x.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("angle is undefined for a zero vector")
    ua, ub = a / na, b / nb
    chord = float(np.linalg.norm(ua - ub))
    angle = 2.0 * math.atan2(chord, float(np.linalg.norm(ua + ub)))
    # chord <= arc on the unit sphere
    assert chord <= angle + 1e-12
    return angle, angle / math.pi

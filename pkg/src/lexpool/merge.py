"""The three merging rules that fuse per-module forecasts into one distribution.

All rules take a weight vector with one entry per module and an instance's
forecasts, and return a normalized distribution over the choices:

* mixture:      D_j proportional to sum_i w_i * p_ij
* logarithmic:  D_j proportional to prod_i p_ij ** w_i   (on floored forecasts)
* product:      D_j proportional to prod_i (w_i * p_ij + (1 - w_i) / k)

A module with weight zero has no influence under any rule.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ForecastSet, LexpoolError

RULES = ("mixture", "logarithmic", "product")

# upper bound for logarithmic-rule weights; values above 1 let the rule
# sharpen distributions, and a finite box keeps weight optimization well-posed
W_MAX = 10.0

DEFAULT_EPSILON = 1e-6

# above this many modules the multiplicative rules run in log space to
# avoid underflowing products of many sub-1 factors
LOG_SPACE_THRESHOLD = 20


class AllZeroWeights(LexpoolError):
    """The mixture rule is undefined when every weight is zero."""


class BadEpsilon(LexpoolError):
    """The zero-probability floor must lie strictly between 0 and 1/k."""


@dataclass(frozen=True)
class WeightVector:
    """A merging rule plus one weight per module.

    Mixture and product weights live in [0, 1]; logarithmic weights in
    [0, W_MAX]. ``epsilon`` is the zero-probability floor applied inside the
    logarithmic rule before taking powers.
    """

    rule: str
    w: tuple[float, ...]
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown merging rule {self.rule!r}")
        object.__setattr__(self, "w", tuple(float(x) for x in self.w))
        if not self.w:
            raise ValueError("weight vector must not be empty")
        hi = W_MAX if self.rule == "logarithmic" else 1.0
        for x in self.w:
            if not 0.0 <= x <= hi:
                raise ValueError(f"weight {x} outside [0, {hi}] for rule {self.rule!r}")
        if self.rule == "mixture" and not any(x > 0 for x in self.w):
            raise AllZeroWeights("mixture rule needs at least one positive weight")
        if not 0.0 < self.epsilon < 1.0:
            raise BadEpsilon(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def n(self) -> int:
        return len(self.w)


def floor_distribution(dist, epsilon: float) -> np.ndarray:
    """Raise entries below ``epsilon`` to ``epsilon`` and renormalize.

    Distributions already at or above the floor everywhere are returned
    unchanged, so flooring is the identity on floored inputs.
    """
    vec = np.asarray(dist, dtype=float)
    k = vec.size
    if not 0.0 < epsilon < 1.0 / k:
        raise BadEpsilon(f"epsilon must lie in (0, 1/{k}), got {epsilon}")
    if not np.any(vec < epsilon):
        return vec.copy()
    floored = np.maximum(vec, epsilon)
    return floored / floored.sum()


def _stack(weights: WeightVector, forecasts: Sequence) -> np.ndarray:
    if len(forecasts) != weights.n:
        raise ValueError(f"{weights.n} weights but {len(forecasts)} forecasts")
    mat = np.asarray([np.asarray(f, dtype=float) for f in forecasts])
    if mat.ndim != 2 or mat.shape[1] < 2:
        raise ValueError("forecasts must share one choice count of at least 2")
    return mat


def _require_rule(weights: WeightVector, rule: str) -> None:
    if weights.rule != rule:
        raise ValueError(f"weight vector is for rule {weights.rule!r}, not {rule!r}")


def merge_mixture(weights: WeightVector, forecasts: Sequence) -> np.ndarray:
    """Weighted-average pool of the forecasts."""
    _require_rule(weights, "mixture")
    mat = _stack(weights, forecasts)
    w = np.asarray(weights.w)
    if w.sum() <= 0:
        raise AllZeroWeights("mixture weights sum to zero")
    combined = w @ mat
    return combined / combined.sum()


def merge_logarithmic(weights: WeightVector, forecasts: Sequence) -> np.ndarray:
    """Weighted geometric pool; forecasts are floored first so zero entries
    cannot annihilate a choice."""
    _require_rule(weights, "logarithmic")
    mat = _stack(weights, forecasts)
    floored = np.asarray([floor_distribution(row, weights.epsilon) for row in mat])
    w = np.asarray(weights.w)
    if weights.n <= LOG_SPACE_THRESHOLD:
        combined = np.prod(floored ** w[:, None], axis=0)
        return combined / combined.sum()
    log_combined = w @ np.log(floored)
    log_combined -= log_combined.max()
    combined = np.exp(log_combined)
    return combined / combined.sum()


def merge_product(weights: WeightVector, forecasts: Sequence, k: int | None = None) -> np.ndarray:
    """Product pool of forecasts individually mixed with the uniform distribution.

    Weight w_i slides module i between the uniform distribution (w_i = 0)
    and its raw forecast (w_i = 1). If fully-weighted contradictory modules
    cancel every choice, the merged result falls back to uniform.
    """
    _require_rule(weights, "product")
    mat = _stack(weights, forecasts)
    if k is None:
        k = mat.shape[1]
    elif k != mat.shape[1]:
        raise ValueError(f"k={k} but forecasts have {mat.shape[1]} choices")
    w = np.asarray(weights.w)
    factors = w[:, None] * mat + ((1.0 - w) / k)[:, None]
    if weights.n <= LOG_SPACE_THRESHOLD:
        combined = np.prod(factors, axis=0)
    else:
        with np.errstate(divide="ignore"):
            log_sum = np.log(factors).sum(axis=0)
        peak = log_sum.max()
        combined = np.exp(log_sum - peak) if np.isfinite(peak) else np.zeros(k)
    total = combined.sum()
    if total <= 0:
        return np.full(k, 1.0 / k)
    return combined / total


def merge(weights: WeightVector, fs: ForecastSet, instance_id: str) -> np.ndarray:
    """Apply the weight vector's rule to one instance of a forecast set."""
    if weights.n != fs.n_modules:
        raise ValueError(f"{weights.n} weights for {fs.n_modules} modules")
    forecasts = fs.forecasts_for(instance_id)
    if weights.rule == "mixture":
        return merge_mixture(weights, forecasts)
    if weights.rule == "logarithmic":
        return merge_logarithmic(weights, forecasts)
    return merge_product(weights, forecasts)

"""Maximum-likelihood weight fitting for the merging rules.

The objective is the log-likelihood of the correct answers under the merged
distribution, equivalently the log of the geometric-mean ("mean") likelihood
times the instance count. Fitting uses multi-restart coordinate hill-climbing
with a discrete gradient: probe each weight at +/- step, take the best
improving neighbor, halve the step on a plateau.

``grid_search_oracle`` is a brute-force lattice maximizer kept alongside the
climber so the two can verify each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import ForecastSet, LexpoolError
from .merge import DEFAULT_EPSILON, LOG_SPACE_THRESHOLD, RULES, W_MAX, WeightVector

# refuse lattices that would not fit in memory; the oracle's cost grows as
# (box/step)^n doubles
_MAX_LATTICE_POINTS = 500_000_000


class MissingAnswer(LexpoolError):
    """Training data must carry an answer for every instance."""


class TooManyModules(LexpoolError):
    """The grid oracle is exponential in the module count; capped at four."""


@dataclass(frozen=True)
class HillClimbConfig:
    """Knobs for the multi-restart hill climber.

    ``max_evaluations`` caps objective evaluations per restart. When
    ``include_deterministic_starts`` is on, an equal-weights start and one
    basis-vector start per module are climbed in addition to the
    ``restarts`` random starts; the basis starts guarantee the trained
    ensemble never scores below its best single module on training data.
    """

    restarts: int = 10
    initial_step: float = 0.05
    min_step: float = 1e-4
    max_evaluations: int = 100_000
    seed: int = 0
    include_deterministic_starts: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not 0 < self.min_step <= self.initial_step:
            raise ValueError("need 0 < min_step <= initial_step")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")


@dataclass(frozen=True)
class TrainedWeights:
    """A fitted weight vector plus training diagnostics."""

    weights: WeightVector
    train_log_likelihood: float
    train_mean_likelihood: float
    evaluations_used: int
    best_start: str


def _prepare(fs: ForecastSet, answers: Mapping[str, int]) -> tuple[np.ndarray, np.ndarray]:
    """Dense (m, n, k) forecast tensor plus 0-based answer indices."""
    if fs.n_instances < 1 or fs.n_modules < 1:
        raise ValueError("forecast set is empty")
    missing = [h for h in fs.instance_ids if h not in answers]
    if missing:
        raise MissingAnswer(f"no answer for instance(s): {missing[:5]}")
    try:
        tensor = np.asarray([fs.forecasts_for(h) for h in fs.instance_ids], dtype=float)
    except ValueError:
        raise ValueError("training requires every instance to share one choice count") from None
    if tensor.ndim != 3:
        raise ValueError("training requires every instance to share one choice count")
    k = tensor.shape[2]
    idx = np.asarray([answers[h] - 1 for h in fs.instance_ids])
    if np.any(idx < 0) or np.any(idx >= k):
        raise ValueError(f"answer index outside 1..{k}")
    return tensor, idx


def _floor_rows(tensor: np.ndarray, epsilon: float) -> np.ndarray:
    floored = np.maximum(tensor, epsilon)
    return floored / floored.sum(axis=-1, keepdims=True)


def _correct_choice_probs(rule: str, w: np.ndarray, tensor: np.ndarray,
                          answer_idx: np.ndarray, epsilon: float) -> np.ndarray:
    """Merged probability of the correct answer for every instance at once."""
    m, n, k = tensor.shape
    rows = np.arange(m)
    if rule == "mixture":
        total_w = w.sum()
        if total_w <= 0:
            raise ZeroDivisionError("mixture weights sum to zero")
        combined = np.einsum("i,hik->hk", w, tensor)
        return combined[rows, answer_idx] / combined.sum(axis=1)
    if rule == "logarithmic":
        floored = _floor_rows(tensor, epsilon)
        if n <= LOG_SPACE_THRESHOLD:
            combined = np.prod(floored ** w[None, :, None], axis=1)
            return combined[rows, answer_idx] / combined.sum(axis=1)
        log_combined = np.einsum("i,hik->hk", w, np.log(floored))
        log_combined -= log_combined.max(axis=1, keepdims=True)
        combined = np.exp(log_combined)
        return combined[rows, answer_idx] / combined.sum(axis=1)
    if rule == "product":
        factors = w[None, :, None] * tensor + ((1.0 - w) / k)[None, :, None]
        if n <= LOG_SPACE_THRESHOLD:
            combined = np.prod(factors, axis=1)
        else:
            with np.errstate(divide="ignore"):
                log_sum = np.log(factors).sum(axis=1)
            peak = log_sum.max(axis=1, keepdims=True)
            with np.errstate(invalid="ignore"):
                combined = np.where(np.isfinite(peak), np.exp(log_sum - peak), 0.0)
        totals = combined.sum(axis=1)
        # fully-weighted contradictory modules can cancel a whole row; such
        # rows merge to uniform, matching merge_product
        dead = totals <= 0
        if np.any(dead):
            out = np.empty(m)
            out[dead] = 1.0 / k
            live = ~dead
            out[live] = combined[live, answer_idx[live]] / totals[live]
            return out
        return combined[rows, answer_idx] / totals
    raise ValueError(f"unknown merging rule {rule!r}")


def log_likelihood(weights: WeightVector, fs: ForecastSet, answers: Mapping[str, int]) -> float:
    """Sum over instances of ln(merged probability of the correct answer).

    Returns -inf when the mixture rule assigns zero to some correct answer;
    the logarithmic rule's flooring and the product rule's uniform mixing
    keep the result finite for interior weights.
    """
    tensor, answer_idx = _prepare(fs, answers)
    probs = _correct_choice_probs(weights.rule, np.asarray(weights.w), tensor, answer_idx, weights.epsilon)
    with np.errstate(divide="ignore"):
        return float(np.log(probs).sum())


def _box_high(rule: str) -> float:
    return W_MAX if rule == "logarithmic" else 1.0


def _make_objective(rule, tensor, answer_idx, epsilon):
    def objective(w: np.ndarray) -> float:
        try:
            probs = _correct_choice_probs(rule, w, tensor, answer_idx, epsilon)
        except ZeroDivisionError:
            return -math.inf
        with np.errstate(divide="ignore"):
            return float(np.log(probs).sum())

    return objective


def _climb(objective, start: np.ndarray, cfg: HillClimbConfig, high: float) -> tuple[np.ndarray, float, int]:
    """Coordinate hill-climb from one start; returns (weights, value, evaluations)."""
    w = np.array(start, dtype=float)
    best = objective(w)
    evals = 1
    step = cfg.initial_step
    while step >= cfg.min_step:
        candidate = None
        candidate_val = best
        for i in range(w.size):
            for delta in (step, -step):
                moved = min(max(w[i] + delta, 0.0), high)  # probes clamp to the box
                if moved == w[i]:
                    continue
                if evals >= cfg.max_evaluations:
                    return w, best, evals
                trial = w.copy()
                trial[i] = moved
                val = objective(trial)
                evals += 1
                if val > candidate_val:
                    candidate, candidate_val = trial, val
        if candidate is not None:
            w, best = candidate, candidate_val
        else:
            step /= 2
    return w, best, evals


def hill_climb(rule: str, fs: ForecastSet, answers: Mapping[str, int],
               cfg: HillClimbConfig = HillClimbConfig(), *,
               epsilon: float = DEFAULT_EPSILON) -> TrainedWeights:
    """Fit weights by multi-restart discrete-gradient hill climbing.

    Deterministic given (cfg.seed, data): restarts run in a fixed order and
    ties keep the earliest start.
    """
    if rule not in RULES:
        raise ValueError(f"unknown merging rule {rule!r}")
    tensor, answer_idx = _prepare(fs, answers)
    m, n, _ = tensor.shape
    high = _box_high(rule)
    objective = _make_objective(rule, tensor, answer_idx, epsilon)

    starts: list[tuple[str, np.ndarray]] = []
    if cfg.include_deterministic_starts:
        starts.append(("uniform", np.ones(n)))
        for i, module_id in enumerate(fs.module_ids):
            basis = np.zeros(n)
            basis[i] = 1.0
            starts.append((f"basis:{module_id}", basis))
    rng = np.random.default_rng(cfg.seed)
    for r in range(cfg.restarts):
        w0 = rng.uniform(0.0, high, n)
        if rule == "mixture":
            while not np.any(w0 > 0):  # the all-zero corner is undefined
                w0 = rng.uniform(0.0, high, n)
        starts.append((f"random:{r}", w0))

    best: tuple[np.ndarray, float, str] | None = None
    total_evals = 0
    for label, w0 in starts:
        w, val, evals = _climb(objective, w0, cfg, high)
        total_evals += evals
        if best is None or val > best[1]:
            best = (w, val, label)
    assert best is not None
    ll = best[1]
    return TrainedWeights(
        weights=WeightVector(rule, tuple(best[0]), epsilon),
        train_log_likelihood=ll,
        train_mean_likelihood=math.exp(ll / m),
        evaluations_used=total_evals,
        best_start=best[2],
    )


def grid_search_oracle(rule: str, fs: ForecastSet, answers: Mapping[str, int],
                       step: float, *, epsilon: float = DEFAULT_EPSILON) -> TrainedWeights:
    """Exhaustively evaluate the log-likelihood on a weight lattice.

    Verification oracle for the hill climber: every lattice point
    {0, step, 2*step, ...}^n over the rule's weight box is evaluated, and the
    maximizer (ties to the lexicographically smallest weights) is returned.
    Memory grows as (box/step + 1)^n doubles.
    """
    if rule not in RULES:
        raise ValueError(f"unknown merging rule {rule!r}")
    tensor, answer_idx = _prepare(fs, answers)
    m, n, k = tensor.shape
    if n > 4:
        raise TooManyModules(f"grid search supports at most 4 modules, got {n}")
    high = _box_high(rule)
    points_f = high / step
    if abs(points_f - round(points_f)) > 1e-9:
        raise ValueError(f"step {step} must divide the weight box [0, {high}] evenly")
    points = int(round(points_f)) + 1
    if points ** n > _MAX_LATTICE_POINTS:
        raise ValueError(f"lattice of {points}^{n} points is too large to hold in memory")
    grid = np.linspace(0.0, high, points)

    lattice_ll = _lattice_log_likelihood(rule, grid, tensor, answer_idx, epsilon)
    flat = int(np.argmax(lattice_ll))  # first maximum = lexicographically smallest
    idx = np.unravel_index(flat, lattice_ll.shape)
    w = tuple(float(grid[i]) for i in idx)
    ll = float(lattice_ll[idx])
    return TrainedWeights(
        weights=WeightVector(rule, w, epsilon),
        train_log_likelihood=ll,
        train_mean_likelihood=math.exp(ll / m),
        evaluations_used=lattice_ll.size,
        best_start="grid",
    )


def _lattice_log_likelihood(rule, grid, tensor, answer_idx, epsilon):
    """Log-likelihood at every lattice point, shape (len(grid),) * n."""
    m, n, k = tensor.shape
    points = grid.size
    shape = (points,) * n

    if rule == "mixture":
        mesh = np.meshgrid(*([grid] * n), indexing="ij")
        lattice = np.stack([ax.ravel() for ax in mesh], axis=1)  # C order = lexicographic
        answer_probs = tensor[np.arange(m), :, answer_idx]  # (m, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            numer = np.log(lattice @ answer_probs.T).sum(axis=1)
            denom = m * np.log(lattice.sum(axis=1))
            ll = numer - denom
        ll[0] = -np.inf  # the all-zero corner is undefined
        return ll.reshape(shape)

    if rule == "logarithmic":
        floored = _floor_rows(tensor, epsilon)
        # per-dimension factor tables: factor[i][g, h, j] = p_hij ** grid[g]
        factor = [floored[:, i, :] ** grid[:, None, None] for i in range(n)]
        # ln of the unnormalized answer mass is linear in the weights, so it
        # collapses to an outer sum of per-dimension vectors
        coeff = np.log(floored[np.arange(m), :, answer_idx])  # (m, n)
        numer = _outer_sum([grid * coeff[:, i].sum() for i in range(n)])
        denom = np.zeros(shape)
        for h in range(m):
            denom += np.log(_per_instance_choice_sum(factor, h, points, k))
        return numer - denom

    # product rule: lattices are small (box [0, 1]); handle the w=1 corners,
    # where zero forecasts can cancel choices, instance by instance
    factor = [
        grid[:, None, None] * tensor[:, i, :] + (1.0 - grid[:, None, None]) / k
        for i in range(n)
    ]  # each (points, m, k), indexed [g, h, j]
    ll = np.zeros(shape)
    for h in range(m):
        answer_mass = _outer_product([factor[i][:, h, answer_idx[h]] for i in range(n)])
        choice_sum = _per_instance_choice_sum(factor, h, points, k)
        dead = choice_sum <= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = np.log(answer_mass) - np.log(choice_sum)
        if np.any(dead):
            contrib[dead] = -math.log(k)  # cancelled rows merge to uniform
        ll += contrib
    return ll


def _outer_sum(vectors):
    out = vectors[0]
    for vec in vectors[1:]:
        out = out[..., None] + vec
    return out


def _outer_product(vectors):
    out = vectors[0]
    for vec in vectors[1:]:
        out = out[..., None] * vec
    return out


def _per_instance_choice_sum(factor, h, points, k):
    """sum_j prod_i factor[i][g_i, h, j] over the full lattice, shape (points,)*n."""
    n = len(factor)
    if n == 1:
        return factor[0][:, h, :].sum(axis=1)
    partial = factor[0][:, h, :]  # (points, k)
    for i in range(1, n - 1):
        partial = partial[..., None, :] * factor[i][:, h, :]
    flat = partial.reshape(-1, k) @ factor[n - 1][:, h, :].T
    return flat.reshape((points,) * n)

"""Solver scoring: accuracy, mean likelihood, penalty scoring, exact binomial
confidence intervals, report tables, and a synthetic benchmark generator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from operator import index as as_int
from typing import Mapping, Sequence

import numpy as np

from .core import ForecastSet, LexpoolError, QuestionInstance, Term, argmax_choice
from .merge import floor_distribution

_BETA_CF_MAX_ITER = 300
_BETA_CF_EPS = 1e-15
_BETA_CF_FPMIN = 1e-300
_QUANTILE_TOL = 1e-10


class LengthMismatch(LexpoolError):
    """Distributions and answers must align one-to-one."""


class ZeroLikelihood(LexpoolError):
    """A correct answer received probability zero; floor the inputs first."""


class BadArguments(LexpoolError):
    """Invalid successes/trials/level for a binomial interval."""


class BadSpec(LexpoolError):
    """Invalid synthetic benchmark specification."""


@dataclass(frozen=True)
class PenaltyPolicy:
    """Reward/penalty scoring with skipping.

    An instance is answered only when the top probability strictly exceeds
    ``guess_threshold``; at the break-even threshold there is no information
    in guessing, so such instances are skipped.
    """

    reward: float = 1.0
    penalty: float = -0.5
    guess_threshold: float = 1.0 / 3.0

    def __post_init__(self):
        if self.reward <= 0:
            raise ValueError("reward must be positive")
        if self.penalty > 0:
            raise ValueError("penalty must be nonpositive")
        if not 0.0 <= self.guess_threshold < 1.0:
            raise ValueError("guess_threshold must lie in [0, 1)")


@dataclass(frozen=True)
class PenaltyResult:
    score: float
    answered: int
    skipped: int


def _check_aligned(dists: Sequence, answers: Sequence[int]) -> None:
    if len(dists) != len(answers):
        raise LengthMismatch(f"{len(dists)} distributions vs {len(answers)} answers")
    if not answers:
        raise LengthMismatch("need at least one instance")


def accuracy(dists: Sequence, answers: Sequence[int]) -> float:
    """Fraction of instances whose argmax choice equals the answer."""
    _check_aligned(dists, answers)
    hits = sum(1 for d, a in zip(dists, answers) if argmax_choice(d) == a)
    return hits / len(answers)


def mean_likelihood(dists: Sequence, answers: Sequence[int]) -> float:
    """Geometric mean of the probabilities assigned to correct answers."""
    _check_aligned(dists, answers)
    total = 0.0
    for d, a in zip(dists, answers):
        p = float(np.asarray(d)[a - 1])
        if p <= 0:
            raise ZeroLikelihood(f"correct answer has probability {p}")
        total += math.log(p)
    return math.exp(total / len(answers))


def penalty_score(dists: Sequence, answers: Sequence[int],
                  policy: PenaltyPolicy = PenaltyPolicy()) -> PenaltyResult:
    """Total reward/penalty over the instances, skipping under-confident ones."""
    _check_aligned(dists, answers)
    score = 0.0
    answered = skipped = 0
    for d, a in zip(dists, answers):
        arr = np.asarray(d)
        if float(arr.max()) > policy.guess_threshold:
            answered += 1
            score += policy.reward if argmax_choice(arr) == a else policy.penalty
        else:
            skipped += 1
    return PenaltyResult(score, answered, skipped)


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Lentz's continued fraction for the incomplete beta integral."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_CF_FPMIN:
        d = _BETA_CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_CF_FPMIN:
            d = _BETA_CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_CF_FPMIN:
            c = _BETA_CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_CF_FPMIN:
            d = _BETA_CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_CF_FPMIN:
            c = _BETA_CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_CF_EPS:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), the Beta(a, b) cumulative distribution function at x."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _beta_quantile(p: float, a: float, b: float) -> float:
    """Inverse of I_x(a, b) by bisection; interval narrowed below 1e-10."""
    lo, hi = 0.0, 1.0
    while hi - lo > _QUANTILE_TOL:
        mid = 0.5 * (lo + hi)
        if regularized_incomplete_beta(a, b, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def binomial_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Exact (Clopper-Pearson) two-sided binomial confidence interval.

    Endpoints come from Beta-distribution quantiles: the lower endpoint is 0
    at zero successes and the upper is 1 at zero failures.
    """
    try:
        s, t = as_int(successes), as_int(trials)
    except TypeError:
        raise BadArguments("successes and trials must be integers") from None
    if t < 1 or not 0 <= s <= t:
        raise BadArguments(f"need 0 <= successes <= trials >= 1, got {successes}/{trials}")
    if not 0.0 < level < 1.0:
        raise BadArguments(f"confidence level must lie in (0, 1), got {level}")
    alpha = 1.0 - level
    low = 0.0 if s == 0 else _beta_quantile(alpha / 2.0, s, t - s + 1)
    high = 1.0 if s == t else _beta_quantile(1.0 - alpha / 2.0, s + 1, t - s)
    return low, high


@dataclass(frozen=True)
class ReportRow:
    name: str
    accuracy: float
    ci_low: float
    ci_high: float
    mean_likelihood: float
    penalty_score: float
    answered: int
    skipped: int


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[ReportRow, ...]
    ci_level: float = 0.95


def build_report(solvers: Mapping[str, Sequence], answers: Sequence[int],
                 policy: PenaltyPolicy = PenaltyPolicy(), *,
                 ci_level: float = 0.95,
                 floor_epsilon: float = 1e-6) -> EvaluationReport:
    """One metric row per solver, in the given order.

    A solver that assigns probability zero to some correct answer has all of
    its distributions floored first, so the mean likelihood stays defined;
    flooring never changes the argmax.
    """
    rows = []
    for name, dists in solvers.items():
        _check_aligned(dists, answers)
        arrs = [np.asarray(d, dtype=float) for d in dists]
        if any(arr[a - 1] == 0 for arr, a in zip(arrs, answers)):
            arrs = [floor_distribution(arr, floor_epsilon) for arr in arrs]
        correct = sum(1 for arr, a in zip(arrs, answers) if argmax_choice(arr) == a)
        ci_low, ci_high = binomial_ci(correct, len(answers), ci_level)
        penalties = penalty_score(arrs, answers, policy)
        rows.append(ReportRow(
            name=name,
            accuracy=correct / len(answers),
            ci_low=ci_low,
            ci_high=ci_high,
            mean_likelihood=mean_likelihood(arrs, answers),
            penalty_score=penalties.score,
            answered=penalties.answered,
            skipped=penalties.skipped,
        ))
    return EvaluationReport(tuple(rows), ci_level)


REPORT_COLUMNS = ("solver", "accuracy", "ci_low", "ci_high",
                  "mean_likelihood", "penalty_score", "answered", "skipped")


def render_report(report: EvaluationReport, header_lines: Sequence[str] = ()) -> str:
    """Tab-separated table: percentages with two decimals, likelihoods with four."""
    lines = [f"# {line}" for line in header_lines]
    lines.append("\t".join(REPORT_COLUMNS))
    for row in report.rows:
        lines.append("\t".join([
            row.name,
            f"{100.0 * row.accuracy:.2f}",
            f"{100.0 * row.ci_low:.2f}",
            f"{100.0 * row.ci_high:.2f}",
            f"{row.mean_likelihood:.4f}",
            f"{row.penalty_score:.1f}",
            str(row.answered),
            str(row.skipped),
        ]))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SyntheticSpec:
    """Planted-accuracy benchmark: independent modules with known answers.

    Module i picks the correct choice with probability ``accuracies[i]`` and
    a uniformly random wrong choice otherwise; the picked choice receives
    probability ``mass`` and every other choice (1 - mass)/(k - 1).
    """

    accuracies: tuple[float, ...]
    instances: int
    choices: int
    mass: float = 0.7
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "accuracies", tuple(float(a) for a in self.accuracies))
        if not self.accuracies:
            raise BadSpec("need at least one module accuracy")
        if any(not 0.0 <= a <= 1.0 for a in self.accuracies):
            raise BadSpec("module accuracies must lie in [0, 1]")
        if self.instances < 1:
            raise BadSpec("need at least one instance")
        if self.choices < 2:
            raise BadSpec("need at least two choices")
        if not 1.0 / self.choices <= self.mass <= 1.0:
            raise BadSpec(f"mass must lie in [1/{self.choices}, 1]")
        if self.seed < 0:
            raise BadSpec("seed must be nonnegative")


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[QuestionInstance], ForecastSet, dict[str, int]]:
    """Materialize a synthetic benchmark, deterministic given the seed.

    Every (instance, module) cell draws from its own counter-seeded stream,
    so generation order cannot change the output.
    """
    n, m, k = len(spec.accuracies), spec.instances, spec.choices
    module_ids = [f"m{i + 1}" for i in range(n)]
    off_mass = (1.0 - spec.mass) / (k - 1)
    questions: list[QuestionInstance] = []
    answers: dict[str, int] = {}
    fs = ForecastSet()
    for h in range(m):
        qid = f"s{h + 1}"
        answer = int(np.random.default_rng((spec.seed, h, 0)).integers(1, k + 1))
        answers[qid] = answer
        questions.append(QuestionInstance(
            id=qid,
            kind="synonym",
            stem=Term((f"stem{h + 1}",)),
            choices=tuple(Term((f"s{h + 1}c{j + 1}",)) for j in range(k)),
            answer=answer,
        ))
        for i in range(n):
            rng = np.random.default_rng((spec.seed, h, i + 1))
            if rng.random() < spec.accuracies[i]:
                picked = answer
            else:
                wrong = rng.integers(1, k)  # 1..k-1, skipping the answer
                picked = wrong if wrong < answer else wrong + 1
            vec = np.full(k, off_mass)
            vec[picked - 1] = spec.mass
            fs.add(qid, module_ids[i], vec)
    return questions, fs, answers


def train_test_split(instance_ids: Sequence[str], train_fraction: float,
                     seed: int) -> tuple[list[str], list[str]]:
    """Seeded random split preserving the original ordering within each side."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    ids = list(instance_ids)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    n_train = int(round(train_fraction * len(ids)))
    train_set = {ids[i] for i in perm[:n_train]}
    train = [h for h in ids if h in train_set]
    test = [h for h in ids if h not in train_set]
    return train, test

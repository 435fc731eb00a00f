"""Shared domain types: terms, questions, forecast sets, and score normalization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

KINDS = ("synonym", "analogy")

# distributions produced in-process must sum to one within this tolerance
DISTRIBUTION_SUM_TOL = 1e-9
# forecasts read back from files are held to a looser tolerance
FORECAST_SUM_TOL = 1e-6


class LexpoolError(Exception):
    """Base class for every error this package raises on purpose."""


class NegativeScore(LexpoolError):
    """Raw solver scores must be nonnegative."""


class InvalidDistribution(LexpoolError):
    """A probability vector violated the distribution invariants."""


class ParseError(LexpoolError):
    """An input file line could not be parsed."""


class DataFileMissing(LexpoolError):
    """A required input file does not exist."""


@dataclass(frozen=True)
class Term:
    """A question term: a single token, or an ordered token pair written "a:b".

    Tokens are case-folded and may not contain whitespace or the pair
    separator. Synonym questions use single-token terms, analogy questions
    use pair terms.
    """

    tokens: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) not in (1, 2):
            raise ValueError(f"term needs one or two tokens, got {self.tokens!r}")
        for tok in self.tokens:
            if not tok:
                raise ValueError("empty token in term")
            if any(ch.isspace() for ch in tok) or ":" in tok:
                raise ValueError(f"token may not contain whitespace or ':': {tok!r}")
            if tok != tok.casefold():
                raise ValueError(f"token must be case-folded: {tok!r}")

    @classmethod
    def parse(cls, text: str) -> "Term":
        """Parse a term, case-folding it; "a:b" yields a pair term."""
        return cls(tuple(text.casefold().split(":")))

    @property
    def is_pair(self) -> bool:
        return len(self.tokens) == 2

    @property
    def text(self) -> str:
        return ":".join(self.tokens)

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class QuestionInstance:
    """One multiple-choice problem: a stem, k distinct choices, optional answer.

    The answer, when present, is a 1-based index into the choices.
    """

    id: str
    kind: str
    stem: Term
    choices: tuple[Term, ...]
    answer: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("question id must be non-empty")
        if self.kind not in KINDS:
            raise ValueError(f"unknown question kind {self.kind!r}")
        if len(self.choices) < 2:
            raise ValueError(f"{self.id}: need at least two choices")
        if len(set(self.choices)) != len(self.choices):
            raise ValueError(f"{self.id}: choices must be distinct")
        want_pair = self.kind == "analogy"
        for term in (self.stem, *self.choices):
            if term.is_pair != want_pair:
                shape = "pair" if want_pair else "single-token"
                raise ValueError(f"{self.id}: {self.kind} questions need {shape} terms, got {term.text!r}")
        if self.answer is not None and not 1 <= self.answer <= len(self.choices):
            raise ValueError(f"{self.id}: answer {self.answer} outside 1..{len(self.choices)}")

    @property
    def k(self) -> int:
        return len(self.choices)


@dataclass
class ForecastSet:
    """Per-module forecasts keyed by (instance_id, module_id).

    Module and instance orderings follow first insertion. Treated as
    immutable once populated; all downstream operations are pure.
    """

    module_ids: list[str] = field(default_factory=list)
    instance_ids: list[str] = field(default_factory=list)
    probs: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self._instances = set(self.instance_ids)
        self._modules = set(self.module_ids)

    def add(self, instance_id: str, module_id: str, probs) -> None:
        key = (instance_id, module_id)
        if key in self.probs:
            raise ValueError(f"duplicate forecast for instance {instance_id!r}, module {module_id!r}")
        if instance_id not in self._instances:
            self._instances.add(instance_id)
            self.instance_ids.append(instance_id)
        if module_id not in self._modules:
            self._modules.add(module_id)
            self.module_ids.append(module_id)
        self.probs[key] = np.asarray(probs, dtype=float)

    def get(self, instance_id: str, module_id: str) -> np.ndarray:
        return self.probs[(instance_id, module_id)]

    def forecasts_for(self, instance_id: str) -> list[np.ndarray]:
        """All module forecasts for one instance, in module order."""
        try:
            return [self.probs[(instance_id, m)] for m in self.module_ids]
        except KeyError:
            missing = [m for m in self.module_ids if (instance_id, m) not in self.probs]
            raise LexpoolError(
                f"incomplete forecasts for instance {instance_id!r}: missing modules {missing}"
            ) from None

    def restrict(self, instance_ids: Iterable[str]) -> "ForecastSet":
        """Sub-set holding only the given instances, in the given order."""
        out = ForecastSet()
        for h in instance_ids:
            for m in self.module_ids:
                vec = self.probs.get((h, m))
                if vec is not None:
                    out.add(h, m, vec)
        return out

    def select_modules(self, module_ids: Iterable[str]) -> "ForecastSet":
        """Sub-set holding only the given modules, in the given order."""
        wanted = list(module_ids)
        out = ForecastSet()
        for h in self.instance_ids:
            for m in wanted:
                vec = self.probs.get((h, m))
                if vec is not None:
                    out.add(h, m, vec)
        return out

    @property
    def n_modules(self) -> int:
        return len(self.module_ids)

    @property
    def n_instances(self) -> int:
        return len(self.instance_ids)


def normalize_scores(scores) -> np.ndarray:
    """Scale a nonnegative raw score vector into a probability distribution.

    An all-zero vector carries no evidence and becomes the uniform
    distribution (the module abstains).
    """
    vec = np.asarray(scores, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError("scores must be a non-empty vector")
    if not np.all(np.isfinite(vec)):
        raise ValueError("scores must be finite")
    if np.any(vec < 0):
        raise NegativeScore(f"negative score entry: {float(vec.min())}")
    total = vec.sum()
    if total <= 0:
        return np.full(vec.size, 1.0 / vec.size)
    return vec / total


def argmax_choice(dist) -> int:
    """1-based index of the highest-probability choice; ties go to the lowest index."""
    return int(np.argmax(np.asarray(dist))) + 1


def check_distribution(vec, *, tol: float = DISTRIBUTION_SUM_TOL) -> np.ndarray:
    """Assert the distribution invariants, returning the vector as an array."""
    arr = np.asarray(vec, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidDistribution("distribution must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidDistribution("distribution entries must be finite")
    if np.any(arr < 0):
        raise InvalidDistribution(f"negative probability: {float(arr.min())}")
    if abs(arr.sum() - 1.0) > tol:
        raise InvalidDistribution(f"probabilities sum to {arr.sum()!r}, not 1")
    return arr


@dataclass(frozen=True)
class Violation:
    """One forecast-data problem found by the validator."""

    code: str  # missing_cell | bad_sum | negative_entry | k_mismatch | unknown_instance
    instance_id: str
    module_id: str
    detail: str

    def __str__(self) -> str:
        where = f"{self.instance_id}/{self.module_id}" if self.module_id else self.instance_id
        return f"{self.code} at {where}: {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(str(v) for v in self.violations)


def validate_forecast_set(fs: ForecastSet, questions: Sequence[QuestionInstance]) -> ValidationReport:
    """Check a parsed forecast set against its question list.

    Violations are data, not exceptions: every problem is reported, and an
    empty report means the set is complete and consistent.
    """
    by_id = {q.id: q for q in questions}
    found: list[Violation] = []
    for h in fs.instance_ids:
        if h not in by_id:
            found.append(Violation("unknown_instance", h, "", "no such question"))
    for q in questions:
        for m in fs.module_ids:
            vec = fs.probs.get((q.id, m))
            if vec is None:
                found.append(Violation("missing_cell", q.id, m, "no forecast"))
                continue
            if np.any(vec < 0):
                found.append(Violation("negative_entry", q.id, m, f"min entry {float(vec.min())}"))
            if len(vec) != q.k:
                found.append(Violation("k_mismatch", q.id, m, f"got {len(vec)} entries, question has k={q.k}"))
            total = float(vec.sum())
            if abs(total - 1.0) > FORECAST_SUM_TOL:
                found.append(Violation("bad_sum", q.id, m, f"sum={total}"))
    return ValidationReport(tuple(found))


def answer_key(questions: Iterable[QuestionInstance]) -> dict[str, int]:
    """Map instance id to its 1-based answer, for answered questions only."""
    return {q.id: q.answer for q in questions if q.answer is not None}

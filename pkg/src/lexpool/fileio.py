"""Line-oriented UTF-8 file formats: questions, forecasts, weights, answers.

* questions: header ``#kind=<synonym|analogy> k=<int>``, then
  ``id<TAB>stem<TAB>choice_1<TAB>...<TAB>choice_k[<TAB>answer_index]``;
  analogy terms are written ``a:b`` and answer indices are 1-based
* forecasts: ``instance_id<TAB>module_id<TAB>p_1<TAB>...<TAB>p_k``
* weights:   key-value lines ``rule=``, ``epsilon=``, ``weight.<module_id>=``,
  plus diagnostics ``train_mean_likelihood=`` and ``seed=``
* answers:   ``instance_id<TAB>answer_index``
* solutions: ``instance_id<TAB>choice_index<TAB>probability`` with ``SKIP``
  in place of the index for skipped instances

All writers are atomic (write to a temporary file, then rename).
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import (
    KINDS,
    DataFileMissing,
    ForecastSet,
    LexpoolError,
    ParseError,
    QuestionInstance,
    Term,
)
from .merge import DEFAULT_EPSILON, RULES, WeightVector


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require_file(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise DataFileMissing(str(path))
    return path


def read_questions(path) -> list[QuestionInstance]:
    path = _require_file(path)
    with path.open(encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or not lines[0].startswith("#kind="):
        raise ParseError(f"{path}:1: expected header '#kind=<synonym|analogy> k=<int>'")
    header = lines[0][1:].split()
    fields = dict(part.split("=", 1) for part in header if "=" in part)
    kind = fields.get("kind")
    if kind not in KINDS or "k" not in fields:
        raise ParseError(f"{path}:1: expected header '#kind=<synonym|analogy> k=<int>'")
    try:
        k = int(fields["k"])
    except ValueError:
        raise ParseError(f"{path}:1: bad k value {fields['k']!r}") from None

    questions: list[QuestionInstance] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 2 + k:
            answer = None
        elif len(parts) == 3 + k:
            try:
                answer = int(parts[-1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad answer index {parts[-1]!r}") from None
        else:
            raise ParseError(f"{path}:{lineno}: expected {2 + k} or {3 + k} tab-separated fields")
        qid = parts[0]
        if qid in seen:
            raise ParseError(f"{path}:{lineno}: duplicate question id {qid!r}")
        seen.add(qid)
        try:
            question = QuestionInstance(
                id=qid,
                kind=kind,
                stem=Term.parse(parts[1]),
                choices=tuple(Term.parse(p) for p in parts[2:2 + k]),
                answer=answer,
            )
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        questions.append(question)
    if not questions:
        raise ParseError(f"{path}: no questions")
    return questions


def write_questions(path, questions: Sequence[QuestionInstance],
                    include_answers: bool = True) -> None:
    kinds = {q.kind for q in questions}
    ks = {q.k for q in questions}
    if len(kinds) != 1 or len(ks) != 1:
        raise ValueError("a question file holds one kind and one choice count")
    lines = [f"#kind={kinds.pop()} k={ks.pop()}"]
    for q in questions:
        parts = [q.id, q.stem.text, *(c.text for c in q.choices)]
        if include_answers and q.answer is not None:
            parts.append(str(q.answer))
        lines.append("\t".join(parts))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_forecasts(path) -> ForecastSet:
    path = _require_file(path)
    fs = ForecastSet()
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 4:
                raise ParseError(f"{path}:{lineno}: expected instance<TAB>module<TAB>p_1...p_k")
            try:
                probs = [float(p) for p in parts[2:]]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad probability") from None
            try:
                fs.add(parts[0], parts[1], probs)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    if fs.n_instances == 0:
        raise ParseError(f"{path}: no forecasts")
    return fs


def write_forecasts(path, fs: ForecastSet) -> None:
    lines = []
    for instance_id in fs.instance_ids:
        for module_id in fs.module_ids:
            vec = fs.probs.get((instance_id, module_id))
            if vec is None:
                continue
            probs = "\t".join(repr(float(p)) for p in vec)
            lines.append(f"{instance_id}\t{module_id}\t{probs}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_weights(path, weights: WeightVector, module_ids: Sequence[str],
                  train_mean_likelihood: float | None = None,
                  seed: int | None = None) -> None:
    if len(module_ids) != weights.n:
        raise ValueError(f"{weights.n} weights for {len(module_ids)} module ids")
    lines = [f"rule={weights.rule}", f"epsilon={weights.epsilon!r}"]
    for module_id, w in zip(module_ids, weights.w):
        lines.append(f"weight.{module_id}={w!r}")
    if train_mean_likelihood is not None:
        lines.append(f"train_mean_likelihood={train_mean_likelihood!r}")
    if seed is not None:
        lines.append(f"seed={seed}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_weights(path) -> tuple[WeightVector, list[str], dict[str, str]]:
    """Returns (weights, module ids in file order, diagnostics)."""
    path = _require_file(path)
    rule = None
    epsilon = DEFAULT_EPSILON
    module_ids: list[str] = []
    raw_weights: list[float] = []
    diagnostics: dict[str, str] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            if key == "rule":
                if value not in RULES:
                    raise ParseError(f"{path}:{lineno}: unknown rule {value!r}")
                rule = value
            elif key == "epsilon":
                try:
                    epsilon = float(value)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad epsilon") from None
            elif key.startswith("weight."):
                module_id = key[len("weight."):]
                if not module_id:
                    raise ParseError(f"{path}:{lineno}: empty module id")
                if module_id in module_ids:
                    raise ParseError(f"{path}:{lineno}: duplicate weight for {module_id!r}")
                try:
                    raw_weights.append(float(value))
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad weight") from None
                module_ids.append(module_id)
            else:
                diagnostics[key] = value
    if rule is None:
        raise ParseError(f"{path}: missing rule= line")
    if not module_ids:
        raise ParseError(f"{path}: no weight.<module_id> lines")
    try:
        weights = WeightVector(rule, tuple(raw_weights), epsilon)
    except (ValueError, LexpoolError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    return weights, module_ids, diagnostics


def read_answers(path) -> dict[str, int]:
    path = _require_file(path)
    answers: dict[str, int] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected instance_id<TAB>answer_index")
            try:
                answers[parts[0]] = int(parts[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad answer index") from None
    return answers


def write_answers(path, answers: Mapping[str, int]) -> None:
    lines = [f"{instance_id}\t{answer}" for instance_id, answer in answers.items()]
    atomic_write_text(path, "\n".join(lines) + "\n")


def format_solution_rows(rows: Iterable[tuple[str, int | None, float]]) -> str:
    lines = []
    for instance_id, choice, prob in rows:
        label = "SKIP" if choice is None else str(choice)
        lines.append(f"{instance_id}\t{label}\t{prob:.4f}")
    return "\n".join(lines) + "\n"


def read_config(path) -> dict[str, str]:
    """Key-value defaults file: ``key=value`` lines, ``#`` comments."""
    path = _require_file(path)
    config: dict[str, str] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            config[key.strip()] = value.strip()
    return config

"""Offline solver modules mapping questions to score vectors or distributions.

Synonym solvers: thesaurus overlap, corpus co-occurrence, embedding cosine.
Analogy solvers: phrase-pattern signatures, thesaurus path features, nine
relation filters, and definition-vector similarity.

Score vectors are normalized into distributions by ``run_module``; an
all-zero score vector (no evidence) becomes the uniform distribution, so
unknown vocabulary always yields abstention, never an error.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ForecastSet, LexpoolError, QuestionInstance, normalize_scores
from .lexdata import (
    RELATION_LABELS,
    CooccurrenceTable,
    DefinitionTable,
    EmbeddingTable,
    LexicalGraph,
    PatternTable,
    tokenize,
)

PATH_MAX_LINKS = 3

# a path's features: the multiset of (direction, relation) steps, stored as
# a sorted tuple so it hashes
PathFeatures = tuple[tuple[str, str], ...]


class KindMismatch(LexpoolError):
    """A solver was applied to the wrong kind of question."""


def _require_kind(q: QuestionInstance, kind: str) -> None:
    if q.kind != kind:
        raise KindMismatch(f"{q.id}: expected a {kind} question, got {q.kind}")


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; zero vectors compare as 0."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def thesaurus_overlap(q: QuestionInstance, graph: LexicalGraph) -> np.ndarray:
    """Score each choice by the size of its synonym-set overlap with the stem."""
    _require_kind(q, "synonym")
    stem_set = graph.synonym_neighbors(q.stem.tokens[0])
    return np.asarray(
        [len(stem_set & graph.synonym_neighbors(c.tokens[0])) for c in q.choices],
        dtype=float,
    )


def cooccurrence_score(q: QuestionInstance, table: CooccurrenceTable) -> np.ndarray:
    """Windowed co-occurrence with the stem, normalized by choice frequency.

    score = C(stem, choice) / (C(choice) + 1); the add-one denominator keeps
    unseen choices at zero without dividing by zero.
    """
    _require_kind(q, "synonym")
    stem = q.stem.tokens[0]
    return np.asarray(
        [table.pair(stem, c.tokens[0]) / (table.unigram(c.tokens[0]) + 1.0) for c in q.choices],
        dtype=float,
    )


def embedding_similarity(q: QuestionInstance, emb: EmbeddingTable) -> np.ndarray:
    """Clipped cosine between stem and choice vectors; missing vectors score 0."""
    _require_kind(q, "synonym")
    stem_vec = emb.get(q.stem.tokens[0])
    scores = []
    for choice in q.choices:
        vec = emb.get(choice.tokens[0])
        if stem_vec is None or vec is None:
            scores.append(0.0)
        else:
            scores.append(max(0.0, _cosine(stem_vec, vec)))
    return np.asarray(scores, dtype=float)


def pair_signature(x: str, y: str, patterns: PatternTable) -> np.ndarray:
    """Log-damped pattern-hit vector characterizing the relation of (x, y)."""
    return np.asarray(
        [math.log1p(patterns.hit(p, x, y)) for p in range(patterns.size)],
        dtype=float,
    )


def phrase_vector_score(q: QuestionInstance, patterns: PatternTable) -> np.ndarray:
    """Clipped cosine between the stem pair's signature and each choice pair's."""
    _require_kind(q, "analogy")
    stem_sig = pair_signature(q.stem.tokens[0], q.stem.tokens[1], patterns)
    scores = []
    for choice in q.choices:
        sig = pair_signature(choice.tokens[0], choice.tokens[1], patterns)
        scores.append(max(0.0, _cosine(stem_sig, sig)))
    return np.asarray(scores, dtype=float)


def _shortest_relation_paths(graph: LexicalGraph, src: str, dst: str,
                             max_links: int) -> list[tuple[str, ...]]:
    """Relation-label sequences of all shortest directed src->dst paths."""
    dist = {src: 0}
    frontier = [src]
    found_at = None
    for depth in range(1, max_links + 1):
        nxt = []
        for node in frontier:
            for _, tail in graph.out_edges(node):
                if tail not in dist:
                    dist[tail] = depth
                    nxt.append(tail)
        frontier = nxt
        if dst in dist:
            found_at = depth
            break
    if found_at is None:
        return []
    paths: list[tuple[str, ...]] = []

    def walk_back(node: str, depth: int, acc: list[str]) -> None:
        if depth == 0:
            if node == src:
                paths.append(tuple(acc))
            return
        for relation, head in graph.in_edges(node):
            if dist.get(head) == depth - 1:
                walk_back(head, depth - 1, [relation, *acc])

    walk_back(dst, found_at, [])
    return paths


def enumerate_paths(x: str, y: str, graph: LexicalGraph,
                    max_links: int = PATH_MAX_LINKS) -> set[PathFeatures]:
    """Feature multisets of all shortest paths between two words.

    Searches the directed graph from x to y (steps tagged ``forward``) and
    from y to x (steps tagged ``backward``); each direction contributes its
    own shortest paths of at most ``max_links`` links. Identical words have
    no relating path and yield the empty set.
    """
    if x == y:
        return set()
    features: set[PathFeatures] = set()
    for src, dst, direction in ((x, y, "forward"), (y, x, "backward")):
        for relations in _shortest_relation_paths(graph, src, dst, max_links):
            features.add(tuple(sorted((direction, rel) for rel in relations)))
    return features


def _shared_features(a: PathFeatures, b: PathFeatures) -> int:
    return sum((Counter(a) & Counter(b)).values())


def thesaurus_path_score(q: QuestionInstance, graph: LexicalGraph) -> np.ndarray:
    """Best shared-feature count between stem-pair paths and choice-pair paths."""
    _require_kind(q, "analogy")
    stem_paths = enumerate_paths(q.stem.tokens[0], q.stem.tokens[1], graph)
    scores = []
    for choice in q.choices:
        candidate_paths = enumerate_paths(choice.tokens[0], choice.tokens[1], graph)
        best = 0
        for stem_path in stem_paths:
            for cand_path in candidate_paths:
                best = max(best, _shared_features(stem_path, cand_path))
        scores.append(best)
    return np.asarray(scores, dtype=float)


def relation_filter(relation: str, q: QuestionInstance, graph: LexicalGraph) -> np.ndarray:
    """Keep only choices whose pair matches the stem's relation.

    Returns a distribution directly: uniform when the stem pair does not
    match the relation (no evidence), uniform over the surviving choices
    otherwise, and uniform over all choices when every choice is eliminated.
    """
    if relation not in RELATION_LABELS:
        raise ValueError(f"unknown relation label {relation!r}")
    _require_kind(q, "analogy")
    k = q.k
    head, tail = q.stem.tokens
    if not graph.has_edge(head, relation, tail):
        return np.full(k, 1.0 / k)
    survivors = [
        j for j, choice in enumerate(q.choices)
        if graph.has_edge(choice.tokens[0], relation, choice.tokens[1])
    ]
    if not survivors:
        return np.full(k, 1.0 / k)
    out = np.zeros(k)
    out[survivors] = 1.0 / len(survivors)
    return out


def _definition_vector(token: str, definitions: DefinitionTable) -> Counter:
    text = definitions.get(token)
    return Counter(tokenize(text)) if text else Counter()


def _counter_cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(count * b[word] for word, count in a.items())
    norm_a = math.sqrt(sum(c * c for c in a.values()))
    norm_b = math.sqrt(sum(c * c for c in b.values()))
    return dot / (norm_a * norm_b)


def definition_similarity(q: QuestionInstance, definitions: DefinitionTable) -> np.ndarray:
    """Definition-vector cosine of the first words plus that of the second words.

    Definition vectors are raw term-frequency counts of the definition text;
    missing definitions contribute a cosine of 0.
    """
    _require_kind(q, "analogy")
    first = _definition_vector(q.stem.tokens[0], definitions)
    second = _definition_vector(q.stem.tokens[1], definitions)
    scores = []
    for choice in q.choices:
        cos_first = _counter_cosine(first, _definition_vector(choice.tokens[0], definitions))
        cos_second = _counter_cosine(second, _definition_vector(choice.tokens[1], definitions))
        scores.append(max(0.0, cos_first) + max(0.0, cos_second))
    return np.asarray(scores, dtype=float)


@dataclass(frozen=True)
class SolverModule:
    """A named solver bound to its data; produces one forecast per question.

    Relation filters emit distributions directly and bypass normalization;
    every other solver emits raw scores that are normalized here.
    """

    id: str
    kind: str
    scorer: Callable[[QuestionInstance], np.ndarray]
    emits_distribution: bool = False

    def forecast(self, q: QuestionInstance) -> np.ndarray:
        if q.kind != self.kind:
            raise KindMismatch(
                f"module {self.id!r} solves {self.kind} questions, "
                f"got {q.kind} question {q.id!r}"
            )
        raw = self.scorer(q)
        if self.emits_distribution:
            return np.asarray(raw, dtype=float)
        return normalize_scores(raw)


def run_module(module: SolverModule, questions: Sequence[QuestionInstance]) -> list[tuple[str, np.ndarray]]:
    """Apply one module to every question, yielding forecast rows."""
    return [(q.id, module.forecast(q)) for q in questions]


def run_modules(modules: Sequence[SolverModule], questions: Sequence[QuestionInstance]) -> ForecastSet:
    """Apply every module to every question, collecting a forecast set."""
    fs = ForecastSet()
    for q in questions:
        for module in modules:
            fs.add(q.id, module.id, module.forecast(q))
    return fs


def synonym_modules(*, graph: LexicalGraph | None = None,
                    cooccurrence: CooccurrenceTable | None = None,
                    embeddings: EmbeddingTable | None = None) -> list[SolverModule]:
    """Build the synonym solvers for whichever data tables are present."""
    modules: list[SolverModule] = []
    if graph is not None:
        modules.append(SolverModule("thesaurus", "synonym", lambda q: thesaurus_overlap(q, graph)))
    if cooccurrence is not None:
        modules.append(SolverModule(
            "cooccurrence", "synonym", lambda q: cooccurrence_score(q, cooccurrence)))
    if embeddings is not None:
        modules.append(SolverModule(
            "embeddings", "synonym", lambda q: embedding_similarity(q, embeddings)))
    return modules


def analogy_modules(*, patterns: PatternTable | None = None,
                    graph: LexicalGraph | None = None,
                    definitions: Mapping[str, DefinitionTable] | None = None) -> list[SolverModule]:
    """Build the analogy solvers: phrase vectors, paths, the nine relation
    filters, and one similarity module per definition table."""
    modules: list[SolverModule] = []
    if patterns is not None:
        modules.append(SolverModule(
            "phrase-vectors", "analogy", lambda q: phrase_vector_score(q, patterns)))
    if graph is not None:
        modules.append(SolverModule(
            "thesaurus-paths", "analogy", lambda q: thesaurus_path_score(q, graph)))
        for label in RELATION_LABELS:
            modules.append(SolverModule(
                f"relation:{label}", "analogy",
                lambda q, _label=label: relation_filter(_label, q, graph),
                emits_distribution=True,
            ))
    for name, table in (definitions or {}).items():
        modules.append(SolverModule(
            f"similarity:{name}", "analogy",
            lambda q, _table=table: definition_similarity(q, _table)))
    return modules

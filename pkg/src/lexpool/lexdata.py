"""Offline lexical data tables backing the solver modules.

Each table loads from a small line-oriented UTF-8 file so that solvers run
without any live service. File formats:

* graph:        ``head<TAB>relation<TAB>tail``
* patterns:     one phrase template per line, placeholders ``X`` and ``Y``
* hits:         ``pattern_index<TAB>x<TAB>y<TAB>count`` (0-based indices)
* cooccurrence: ``#window=<int> tokens=<int>`` header, then
                ``x<TAB>y<TAB>count`` (pairs) or ``x<TAB>count`` (unigrams)
* embeddings:   ``token<TAB>v1 v2 ... vd``
* definitions:  ``token<TAB>definition text``
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .core import DataFileMissing, ParseError

# the nine relation labels understood by the relation-filter solvers;
# path search additionally accepts arbitrary labels
RELATION_LABELS = (
    "synonym", "antonym", "hypernym", "hyponym",
    "meronym-substance", "meronym-part", "meronym-member",
    "holonym-substance", "holonym-member",
)

_WORD_RE = re.compile(r"[a-z]+")


def tokenize(text: str) -> list[str]:
    """Case-fold and split into alphabetic runs."""
    return _WORD_RE.findall(text.casefold())


def _read_lines(path) -> Iterator[tuple[int, str]]:
    path = Path(path)
    if not path.exists():
        raise DataFileMissing(str(path))
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


class LexicalGraph:
    """Directed, relation-labeled word graph with set edge semantics."""

    def __init__(self, edges: Iterable[tuple[str, str, str]] = ()):
        self._edges: set[tuple[str, str, str]] = set()
        self._out: dict[str, list[tuple[str, str]]] = {}
        self._in: dict[str, list[tuple[str, str]]] = {}
        for head, relation, tail in edges:
            self.add_edge(head, relation, tail)

    def add_edge(self, head: str, relation: str, tail: str) -> None:
        edge = (head, relation, tail)
        if edge in self._edges:
            return
        self._edges.add(edge)
        self._out.setdefault(head, []).append((relation, tail))
        self._in.setdefault(tail, []).append((relation, head))

    def has_edge(self, head: str, relation: str, tail: str) -> bool:
        return (head, relation, tail) in self._edges

    def out_edges(self, node: str) -> list[tuple[str, str]]:
        """(relation, tail) pairs for edges leaving ``node``."""
        return self._out.get(node, [])

    def in_edges(self, node: str) -> list[tuple[str, str]]:
        """(relation, head) pairs for edges entering ``node``."""
        return self._in.get(node, [])

    def synonym_neighbors(self, token: str) -> set[str]:
        """Tokens joined to ``token`` by a synonym edge in either direction."""
        out = {tail for rel, tail in self._out.get(token, []) if rel == "synonym"}
        out |= {head for rel, head in self._in.get(token, []) if rel == "synonym"}
        return out

    def __len__(self) -> int:
        return len(self._edges)

    def __iter__(self) -> Iterator[tuple[str, str, str]]:
        return iter(sorted(self._edges))


def load_graph(path) -> LexicalGraph:
    graph = LexicalGraph()
    for lineno, line in _read_lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"{path}:{lineno}: expected head<TAB>relation<TAB>tail")
        head, relation, tail = (p.strip().casefold() for p in parts)
        if not head or not relation or not tail:
            raise ParseError(f"{path}:{lineno}: empty field")
        graph.add_edge(head, relation, tail)
    return graph


@dataclass
class PatternTable:
    """Phrase templates plus (pattern, x, y) hit counts.

    Each template is a short phrase containing the placeholders ``X`` and
    ``Y`` exactly once; hit counts record how often the instantiated phrase
    was observed for a word pair. Missing entries read as zero.
    """

    templates: tuple[str, ...]
    hits: dict[tuple[int, str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.templates)) != len(self.templates):
            raise ValueError("pattern templates must be distinct")
        for template in self.templates:
            words = template.split()
            if words.count("X") != 1 or words.count("Y") != 1:
                raise ValueError(f"template must use X and Y exactly once: {template!r}")

    @property
    def size(self) -> int:
        return len(self.templates)

    def hit(self, pattern: int, x: str, y: str) -> int:
        return self.hits.get((pattern, x, y), 0)


def default_patterns() -> tuple[str, ...]:
    """The bundled 128-template list (replace it by loading your own file)."""
    text = resources.files("lexpool").joinpath("data/patterns_default.txt").read_text("utf-8")
    return tuple(line for line in text.splitlines() if line.strip())


def load_patterns(path) -> tuple[str, ...]:
    templates = []
    for lineno, line in _read_lines(path):
        templates.append(line)
    if not templates:
        raise ParseError(f"{path}: no pattern templates")
    return tuple(templates)


def load_hits(path, n_patterns: int) -> dict[tuple[int, str, str], int]:
    hits: dict[tuple[int, str, str], int] = {}
    for lineno, line in _read_lines(path):
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"{path}:{lineno}: expected pattern_index<TAB>x<TAB>y<TAB>count")
        try:
            pattern = int(parts[0])
            count = int(parts[3])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad integer") from None
        if not 0 <= pattern < n_patterns:
            raise ParseError(f"{path}:{lineno}: pattern index {pattern} outside 0..{n_patterns - 1}")
        if count < 0:
            raise ParseError(f"{path}:{lineno}: negative count")
        hits[(pattern, parts[1].casefold(), parts[2].casefold())] = count
    return hits


def load_pattern_table(patterns_path=None, hits_path=None) -> PatternTable:
    templates = load_patterns(patterns_path) if patterns_path else default_patterns()
    hits = load_hits(hits_path, len(templates)) if hits_path else {}
    return PatternTable(templates, hits)


@dataclass
class CooccurrenceTable:
    """Symmetric windowed pair counts plus unigram counts over a corpus."""

    window: int
    total_tokens: int
    pair_counts: dict[tuple[str, str], int]
    unigram_counts: dict[str, int]

    def pair(self, x: str, y: str) -> int:
        key = (x, y) if x <= y else (y, x)
        return self.pair_counts.get(key, 0)

    def unigram(self, x: str) -> int:
        return self.unigram_counts.get(x, 0)


def ingest_corpus(text: str, window: int = 10) -> CooccurrenceTable:
    """Count unigrams and all token pairs at most ``window`` positions apart."""
    if window < 1:
        raise ValueError("window must be at least 1")
    tokens = tokenize(text)
    unigrams = Counter(tokens)
    pairs: Counter = Counter()
    last = len(tokens) - 1
    for i, tok in enumerate(tokens):
        for j in range(i + 1, min(i + window, last) + 1):
            other = tokens[j]
            key = (tok, other) if tok <= other else (other, tok)
            pairs[key] += 1
    return CooccurrenceTable(window, len(tokens), dict(pairs), dict(unigrams))


def _header_line(table: CooccurrenceTable) -> str:
    return f"#window={table.window} tokens={table.total_tokens}"


def write_cooccurrence(table: CooccurrenceTable, pairs_path, unigrams_path) -> None:
    from .fileio import atomic_write_text

    pair_lines = [_header_line(table)]
    for (x, y), count in sorted(table.pair_counts.items()):
        pair_lines.append(f"{x}\t{y}\t{count}")
    atomic_write_text(pairs_path, "\n".join(pair_lines) + "\n")
    unigram_lines = [_header_line(table)]
    for x, count in sorted(table.unigram_counts.items()):
        unigram_lines.append(f"{x}\t{count}")
    atomic_write_text(unigrams_path, "\n".join(unigram_lines) + "\n")


_HEADER_RE = re.compile(r"#window=(\d+) tokens=(\d+)")


def _read_header(path) -> tuple[int, int]:
    path = Path(path)
    if not path.exists():
        raise DataFileMissing(str(path))
    with path.open(encoding="utf-8") as handle:
        first = handle.readline().strip()
    match = _HEADER_RE.fullmatch(first)
    if not match:
        raise ParseError(f"{path}:1: expected header '#window=<int> tokens=<int>'")
    return int(match.group(1)), int(match.group(2))


def load_cooccurrence(pairs_path, unigrams_path) -> CooccurrenceTable:
    window, total = _read_header(pairs_path)
    if _read_header(unigrams_path) != (window, total):
        raise ParseError(f"{unigrams_path}: header disagrees with {pairs_path}")
    pair_counts: dict[tuple[str, str], int] = {}
    for lineno, line in _read_lines(pairs_path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"{pairs_path}:{lineno}: expected x<TAB>y<TAB>count")
        try:
            count = int(parts[2])
        except ValueError:
            raise ParseError(f"{pairs_path}:{lineno}: bad count") from None
        if count < 0:
            raise ParseError(f"{pairs_path}:{lineno}: negative count")
        x, y = parts[0].casefold(), parts[1].casefold()
        key = (x, y) if x <= y else (y, x)
        pair_counts[key] = pair_counts.get(key, 0) + count
    unigram_counts: dict[str, int] = {}
    for lineno, line in _read_lines(unigrams_path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{unigrams_path}:{lineno}: expected x<TAB>count")
        try:
            count = int(parts[1])
        except ValueError:
            raise ParseError(f"{unigrams_path}:{lineno}: bad count") from None
        if count < 0:
            raise ParseError(f"{unigrams_path}:{lineno}: negative count")
        unigram_counts[parts[0].casefold()] = count
    return CooccurrenceTable(window, total, pair_counts, unigram_counts)


@dataclass
class EmbeddingTable:
    """Fixed-dimension word vectors."""

    dim: int
    vectors: dict[str, np.ndarray]

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)


def load_embeddings(path) -> EmbeddingTable:
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    for lineno, line in _read_lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected token<TAB>v1 v2 ... vd")
        token = parts[0].casefold()
        try:
            vec = np.asarray([float(v) for v in parts[1].split()], dtype=float)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad vector component") from None
        if vec.size == 0 or not np.all(np.isfinite(vec)):
            raise ParseError(f"{path}:{lineno}: vector must be non-empty and finite")
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise ParseError(f"{path}:{lineno}: dimension {vec.size} != {dim}")
        vectors[token] = vec
    if dim is None:
        raise ParseError(f"{path}: no vectors")
    return EmbeddingTable(dim, vectors)


@dataclass
class DefinitionTable:
    """Token to definition-text mapping."""

    definitions: dict[str, str]

    def get(self, token: str) -> str | None:
        return self.definitions.get(token)


def load_definitions(path) -> DefinitionTable:
    definitions: dict[str, str] = {}
    for lineno, line in _read_lines(path):
        parts = line.split("\t", 1)
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected token<TAB>definition text")
        token = parts[0].casefold()
        if token in definitions:
            raise ParseError(f"{path}:{lineno}: duplicate definition for {token!r}")
        definitions[token] = parts[1]
    return DefinitionTable(definitions)

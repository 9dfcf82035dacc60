"""Labeled directed graphs on the mode alphabet {1, ..., M}.

A graph carries the structure of a path-complete Lyapunov certificate: one
quadratic per node and one inequality per labeled edge ``(a, b, i)``.
Nodes are indexed from 0, labels from 1.
"""

from __future__ import annotations

import itertools
import json
import sys
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Edge = tuple[int, int, int]


class GraphError(ValueError):
    """Raised for malformed graphs or graph documents."""


class CapacityError(GraphError):
    """Raised when a requested graph would not fit in memory addressing."""


def word_name(word: Sequence[int], alphabet_size: int) -> str:
    """Printable name of a De Bruijn word; ``"()"`` for the empty word."""
    if not word:
        return "()"
    if alphabet_size <= 9:
        return "".join(str(i) for i in word)
    return ",".join(str(i) for i in word)


@dataclass(frozen=True)
class LabeledGraph:
    """Immutable labeled digraph ``(S, E)`` on the alphabet ``<M>``.

    Attributes:
        alphabet_size: M, the number of labels.
        node_names: distinct printable node identifiers; their order is the
            tie-break order of the certificate selector.
        edges: ``(source, target, label)`` triples, source/target 0-based.
    """

    alphabet_size: int
    node_names: tuple[str, ...]
    edges: tuple[Edge, ...]
    _out: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        M = self.alphabet_size
        if not isinstance(M, int) or M < 1:
            raise GraphError(f"alphabet size must be a positive integer, got {M!r}")
        names = tuple(str(s) for s in self.node_names)
        if not names:
            raise GraphError("graph must have at least one node")
        if len(set(names)) != len(names):
            raise GraphError("node names must be pairwise distinct")
        edges = tuple((int(a), int(b), int(i)) for a, b, i in self.edges)
        seen = set()
        n = len(names)
        for e in edges:
            a, b, i = e
            if not (0 <= a < n and 0 <= b < n):
                raise GraphError(f"edge {e} references a node outside [0, {n})")
            if not 1 <= i <= M:
                raise GraphError(f"edge {e} has label outside [1, {M}]")
            if e in seen:
                raise GraphError(f"duplicate edge {e}")
            seen.add(e)
        out: dict[tuple[int, int], list[int]] = {}
        for a, b, i in edges:
            out.setdefault((a, i), []).append(b)
        object.__setattr__(self, "node_names", names)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_out", {k: tuple(v) for k, v in out.items()})

    @property
    def node_count(self) -> int:
        return len(self.node_names)

    @property
    def labels(self) -> range:
        return range(1, self.alphabet_size + 1)

    def successors(self, node: int, label: int) -> tuple[int, ...]:
        """Targets of the ``label``-edges leaving ``node``."""
        return self._out.get((node, label), ())

    def index(self, name: str) -> int:
        try:
            return self.node_names.index(name)
        except ValueError:
            raise GraphError(f"unknown node {name!r}") from None

    def without_edge(self, edge: Edge) -> "LabeledGraph":
        edges = tuple(e for e in self.edges if e != tuple(edge))
        return LabeledGraph(self.alphabet_size, self.node_names, edges)

    def to_dict(self) -> dict:
        return {
            "M": self.alphabet_size,
            "nodes": list(self.node_names),
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LabeledGraph":
        try:
            M = doc["M"]
            nodes = doc["nodes"]
            raw = doc["edges"]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"graph document missing field: {exc}") from None
        edges = []
        for e in raw:
            if len(e) != 3 or not all(isinstance(v, int) for v in e):
                raise GraphError(f"edge {e!r} must be [src, dst, label] integers")
            edges.append(tuple(e))
        if len(set(edges)) != len(edges):
            raise GraphError("graph document contains duplicate edges")
        return cls(M, tuple(nodes), tuple(edges))


def load_graph(text: str) -> LabeledGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"invalid graph JSON: {exc}") from None
    return LabeledGraph.from_dict(doc)


def save_graph(g: LabeledGraph) -> str:
    return json.dumps(g.to_dict())


def debruijn(M: int, l: int) -> LabeledGraph:
    """Primal De Bruijn graph of order ``l`` on ``M`` labels.

    Nodes are the words of length ``l`` in lexicographic order. From node
    ``(i_1, ..., i_l)`` the ``h``-labeled edge leads to ``(h, i_1, ..., i_{l-1})``,
    so a node records the most recent modes, newest first.
    """
    if M < 1 or l < 0:
        raise GraphError(f"need M >= 1 and l >= 0, got M={M}, l={l}")
    count = M**l
    if count * M > sys.maxsize:
        raise CapacityError(f"M^l = {M}^{l} exceeds platform capacity")
    words = list(itertools.product(range(1, M + 1), repeat=l))
    # lexicographic rank of a word: base-M digits (i - 1)
    def rank(word):
        r = 0
        for i in word:
            r = r * M + (i - 1)
        return r

    edges = []
    for a, word in enumerate(words):
        for h in range(1, M + 1):
            target = (h,) + word[:-1] if l else ()
            edges.append((a, rank(target), h))
    names = tuple(word_name(w, M) for w in words)
    return LabeledGraph(M, names, tuple(edges))


def is_complete(g: LabeledGraph) -> bool:
    """Every node has at least one outgoing edge for every label."""
    return all(g.successors(a, i) for a in range(g.node_count) for i in g.labels)


def is_deterministic(g: LabeledGraph) -> bool:
    """Every node has at most one outgoing edge for every label."""
    return all(len(v) <= 1 for v in g._out.values())


def is_path_complete(g: LabeledGraph) -> bool:
    """Decide whether every finite word is carried by some edge path.

    Subset construction: starting from the full node set, follow each label
    to the set of reachable targets. A word has no path exactly when it
    drives the full set to the empty set.
    """
    n = g.node_count
    targets = {}
    for a, b, i in g.edges:
        targets[(a, i)] = targets.get((a, i), 0) | (1 << b)
    start = (1 << n) - 1
    seen = {start}
    queue = deque([start])
    while queue:
        subset = queue.popleft()
        for i in g.labels:
            nxt = 0
            members = subset
            while members:
                low = members & -members
                nxt |= targets.get((low.bit_length() - 1, i), 0)
                members ^= low
            if nxt == 0:
                return False
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return True


def carries_word(g: LabeledGraph, word: Iterable[int]) -> bool:
    """True iff some edge path spells ``word`` (forward frontier search)."""
    frontier = set(range(g.node_count))
    for i in word:
        frontier = {b for a in frontier for b in g.successors(a, i)}
        if not frontier:
            return False
    return True

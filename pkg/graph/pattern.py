"""
Query patterns: parsing, span, and automorphism-based symmetry breaking.

Symmetry breaking follows the stabilizer-chain condition scheme: fix the
smallest query vertex whose orbit under the current stabilizer is
non-trivial, require its image to be smaller than the image of every other
orbit member, then restrict to the stabilizer of that vertex and repeat.
The result has the same shape as ISMAGS subgraph cosets: for each key, the
vertices it can be swapped with while every smaller vertex stays put.
Orbit membership is one networkx VF2 test per (vertex, target) pair with the
already-fixed vertices pinned by node labels, so large stars stay cheap.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Tuple

import networkx as nx
from networkx.algorithms.isomorphism import GraphMatcher, categorical_node_match

from utils.errors import (
    DisconnectedPatternError,
    DuplicateEdgeError,
    PatternParseError,
    PatternTooLargeError,
    SelfLoopError,
)

logger = logging.getLogger(__name__)

MAX_PATTERN_VERTICES = 16

Edge = Tuple[int, int]

# Patterns used by the acceptance harness and the CLI (`--pattern triangle`)
NAMED_PATTERNS: Dict[str, str] = {
    "edge": "0 1",
    "wedge": "0 1\n1 2",
    "triangle": "0 1\n1 2\n2 0",
    "square": "0 1\n1 2\n2 3\n3 0",
    "4-clique": "0 1\n0 2\n0 3\n1 2\n1 3\n2 3",
    "5-path": "0 1\n1 2\n2 3\n3 4",
    "p-star": (
        "# spanning tree\n"
        "0 1\n0 2\n0 7\n0 8\n0 9\n1 3\n1 4\n2 5\n2 6\n"
        "# verification edges\n"
        "1 2\n3 4\n4 5\n5 6\n8 9"
    ),
}


def canonical_edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class QueryPattern:
    vertices: Tuple[int, ...]
    edges: FrozenSet[Edge]
    adjacency: Dict[int, FrozenSet[int]] = field(compare=False, hash=False, repr=False)
    graph: nx.Graph = field(compare=False, hash=False, repr=False, default_factory=nx.Graph)

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[int, int]]) -> "QueryPattern":
        seen = set()
        adjacency: Dict[int, set] = {}
        for a, b in edges:
            if a == b:
                raise SelfLoopError(f"self-loop on query vertex {a}")
            e = canonical_edge(a, b)
            if e in seen:
                raise DuplicateEdgeError(f"edge {e} listed more than once")
            seen.add(e)
            adjacency.setdefault(a, set()).add(b)
            adjacency.setdefault(b, set()).add(a)
        if not seen:
            raise PatternParseError(0, "pattern has no edges")

        graph = nx.Graph()
        graph.add_nodes_from(sorted(adjacency))
        graph.add_edges_from(sorted(seen))
        if not nx.is_connected(graph):
            raise DisconnectedPatternError("query pattern is not connected")
        return cls(
            vertices=tuple(sorted(adjacency)),
            edges=frozenset(seen),
            adjacency={u: frozenset(n) for u, n in adjacency.items()},
            graph=graph,
        )

    def __len__(self) -> int:
        return len(self.vertices)

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def neighbors(self, u: int) -> FrozenSet[int]:
        return self.adjacency[u]

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.adjacency.get(a, ())

    def position(self, u: int) -> int:
        """Index of u in the sorted vertex tuple; embeddings are tuples in this order."""
        return self.vertices.index(u)


def parse_pattern(text: str) -> QueryPattern:
    edges = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise PatternParseError(line_no, f"expected 'u v', got {line!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise PatternParseError(line_no, f"non-integer vertex id in {line!r}") from None
        if a < 0 or b < 0:
            raise PatternParseError(line_no, "vertex ids must be non-negative")
        edges.append((a, b))
    return QueryPattern.from_edges(edges)


def load_pattern(source: str) -> QueryPattern:
    """Read a pattern file, or resolve one of NAMED_PATTERNS."""
    if source in NAMED_PATTERNS:
        return parse_pattern(NAMED_PATTERNS[source])
    with open(source, encoding="utf-8") as f:
        return parse_pattern(f.read())


def span(p: QueryPattern, u: int) -> int:
    """Eccentricity of u in P."""
    if u not in p.adjacency:
        raise KeyError(f"query vertex {u} not in pattern")
    return nx.eccentricity(p.graph, v=u)


# ===== SYMMETRY BREAKING =====

@dataclass(frozen=True)
class OrderConstraints:
    """(u, w) in pairs means f(u) < f(w)."""
    pairs: FrozenSet[Tuple[int, int]]

    def __post_init__(self):
        smaller: Dict[int, List[int]] = {}
        larger: Dict[int, List[int]] = {}
        for u, w in self.pairs:
            larger.setdefault(u, []).append(w)
            smaller.setdefault(w, []).append(u)
        object.__setattr__(self, "_must_be_below", {u: tuple(ws) for u, ws in larger.items()})
        object.__setattr__(self, "_must_be_above", {w: tuple(us) for w, us in smaller.items()})

    def admits(self, u: int, v: int, mapping: Mapping[int, int]) -> bool:
        """Can u be mapped to v given the already-mapped query vertices?"""
        for w in self._must_be_below.get(u, ()):
            image = mapping.get(w)
            if image is not None and not v < image:
                return False
        for w in self._must_be_above.get(u, ()):
            image = mapping.get(w)
            if image is not None and not image < v:
                return False
        return True

    def satisfied_by(self, mapping: Mapping[int, int]) -> bool:
        return all(mapping[u] < mapping[w] for u, w in self.pairs)


NO_CONSTRAINTS = OrderConstraints(frozenset())


_PIN = "pin"
_pinned_match = categorical_node_match(_PIN, None)


def _pinned(p: QueryPattern, pins: Mapping[int, str]) -> nx.Graph:
    g = p.graph.copy()
    nx.set_node_attributes(g, dict(pins), _PIN)
    return g


def _in_orbit(p: QueryPattern, fixed: Iterable[int], u: int, w: int) -> bool:
    """Is there an automorphism fixing every vertex in fixed and sending u to w?"""
    pins = {x: f"fixed-{x}" for x in fixed}
    source = _pinned(p, {**pins, u: "moved"})
    target = _pinned(p, {**pins, w: "moved"})
    return GraphMatcher(source, target, node_match=_pinned_match).is_isomorphic()


def _stabilizer_chain(p: QueryPattern) -> List[Tuple[int, List[int]]]:
    """[(fixed vertex, its orbit under the stabilizer of earlier fixed vertices)]"""
    if len(p.vertices) > MAX_PATTERN_VERTICES:
        raise PatternTooLargeError(
            f"pattern has {len(p.vertices)} vertices; at most {MAX_PATTERN_VERTICES} supported"
        )
    chain = []
    fixed: List[int] = []
    for u in p.vertices:
        orbit = [u] + [
            w for w in p.vertices
            if w != u and w not in fixed and p.degree(w) == p.degree(u) and _in_orbit(p, fixed, u, w)
        ]
        if len(orbit) > 1:
            chain.append((u, orbit))
        fixed.append(u)
    return chain


def automorphism_count(p: QueryPattern) -> int:
    """|Aut(P)| as the product of orbit sizes along the stabilizer chain."""
    count = 1
    for _, orbit in _stabilizer_chain(p):
        count *= len(orbit)
    return count


def symmetry_constraints(p: QueryPattern) -> OrderConstraints:
    pairs = set()
    for u, orbit in _stabilizer_chain(p):
        for w in orbit:
            if w != u:
                pairs.add((u, w))
    logger.debug(f"Symmetry constraints for {len(p.vertices)}-vertex pattern: {sorted(pairs)}")
    return OrderConstraints(frozenset(pairs))

import networkx as nx
import pytest
from networkx.algorithms.isomorphism import GraphMatcher

from graph.partition_view import PartitionView
from graph.pattern import QueryPattern, automorphism_count, load_pattern
from ingestion.partitioner_io import graph_from_edges, graph_from_networkx, hash_partition, partition_in_memory

PATTERN_NAMES = ["edge", "wedge", "triangle", "square", "4-clique", "5-path", "p-star"]


def random_graph(n: int, m: int, seed: int):
    return graph_from_networkx(nx.gnm_random_graph(n, m, seed=seed))


def split(graph, machines: int, cache_budget: int = 0):
    return partition_in_memory(graph, hash_partition(graph, machines), cache_budget, machines=machines)


def nx_embedding_count(graph, p: QueryPattern) -> int:
    """Embeddings up to automorphism, counted by networkx."""
    g = nx.Graph()
    g.add_nodes_from(graph)
    g.add_edges_from((v, n) for v, ns in graph.items() for n in ns)
    q = nx.Graph(list(p.edges))
    monomorphisms = sum(1 for _ in GraphMatcher(g, q).subgraph_monomorphisms_iter())
    return monomorphisms // automorphism_count(p)


@pytest.fixture
def p_star() -> QueryPattern:
    return load_pattern("p-star")


@pytest.fixture
def triangle() -> QueryPattern:
    return load_pattern("triangle")


@pytest.fixture
def k4():
    return graph_from_edges([(a, b) for a in range(4) for b in range(a + 1, 4)])


@pytest.fixture
def two_triangles():
    # 0-1-2 and 3-4-5, bridged by 2-3
    return graph_from_edges([(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)])


@pytest.fixture
def whole_view(k4) -> PartitionView:
    return PartitionView.whole_graph(k4)

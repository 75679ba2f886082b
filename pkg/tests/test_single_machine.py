import pytest

from conftest import nx_embedding_count, random_graph, split
from enumeration.single_machine import LocalStats, local_enumerate, oracle_enumerate, split_candidates
from graph.partition_view import PartitionView
from graph.pattern import load_pattern
from ingestion.partitioner_io import graph_from_edges, split_graph
from planner.execution_plan import select_plan


def test_oracle_small_cases(k4, triangle):
    assert oracle_enumerate(k4, triangle) == {(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)}
    star = graph_from_edges([(0, 1), (0, 2), (0, 3)])
    assert len(oracle_enumerate(star, load_pattern("wedge"))) == 3
    assert oracle_enumerate(star, triangle) == set()


def test_oracle_pattern_larger_than_graph(triangle):
    assert oracle_enumerate({0: [1], 1: [0]}, triangle) == set()


@pytest.mark.parametrize("name", ["edge", "wedge", "triangle", "square", "4-clique", "5-path", "p-star"])
def test_oracle_agrees_with_networkx(name):
    graph = random_graph(25, 70, seed=2)
    p = load_pattern(name)
    assert len(oracle_enumerate(graph, p)) == nx_embedding_count(graph, p)


def test_local_enumerate_on_whole_graph(whole_view, triangle):
    plan = select_plan(triangle)
    embeddings, stats = local_enumerate(whole_view, triangle, plan, whole_view.owned_vertices())
    assert sorted(embeddings) == [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    assert stats.node_counts == {0: 7, 1: 4, 2: 2, 3: 1}
    assert stats.average_bytes == pytest.approx(24 * 14 / 4)


def test_split_candidates_by_border_distance(two_triangles, triangle):
    ownership = {0: 0, 1: 0, 2: 0, 3: 1, 4: 1, 5: 1}
    parts = split_graph(two_triangles, ownership)
    pv0 = PartitionView(0, parts[0], ownership)
    local, distributed = split_candidates(pv0, triangle, 0)
    assert local == [0, 1]
    assert distributed == [2]


def test_local_results_use_owned_vertices_only():
    graph = random_graph(60, 200, seed=9)
    p = load_pattern("square")
    plan = select_plan(p)
    for pv in split(graph, 3):
        local, _ = split_candidates(pv, p, plan.matching_order[0])
        embeddings, stats = local_enumerate(pv, p, plan, local)
        assert set(stats.node_counts) == set(local)
        for embedding in embeddings:
            assert all(pv.is_owned(v) for v in embedding)


def test_degree_filter_drops_candidates():
    star = PartitionView.whole_graph(graph_from_edges([(0, 1), (0, 2), (0, 3)]))
    local, distributed = split_candidates(star, load_pattern("triangle"), 0)
    assert local == [0]
    assert distributed == []


def test_empty_stats_have_no_average():
    assert LocalStats().average_bytes is None
    assert LocalStats().total_nodes == 0

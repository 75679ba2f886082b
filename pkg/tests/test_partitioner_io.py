import pytest

from ingestion.partitioner_io import (
    OWNERSHIP_FILE,
    check_ownership,
    describe_partition,
    hash_partition,
    load_graph,
    load_metis_partition,
    load_ownership,
    load_partition_views,
    load_renumber_map,
    machine_file,
    merge_views,
    partition_in_memory,
    renumber,
    symmetrize,
    write_partition_views,
)
from utils.errors import BadPartIdError, GraphError, LengthMismatchError, ParseError, PartitionIOError


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_graph_symmetrizes(tmp_path):
    path = _write(tmp_path, "g.txt", "0 1 2\n1 2\n# comment\n\n3\n4 4\n")
    assert load_graph(path) == {0: [1, 2], 1: [0, 2], 2: [0, 1], 3: [], 4: []}


def test_load_graph_merges_repeated_vertex_lines(tmp_path):
    path = _write(tmp_path, "g.txt", "0 1\n0 2 1\n")
    assert load_graph(path) == {0: [1, 2], 1: [0], 2: [0]}


@pytest.mark.parametrize("text, line_no", [("0 1\n0 x\n", 2), ("0 -1\n", 1)])
def test_load_graph_parse_errors(tmp_path, text, line_no):
    with pytest.raises(ParseError) as info:
        load_graph(_write(tmp_path, "g.txt", text))
    assert info.value.line_no == line_no


def test_load_graph_missing_file(tmp_path):
    with pytest.raises(PartitionIOError):
        load_graph(str(tmp_path / "nope.txt"))


def test_symmetrize_drops_self_loops():
    assert symmetrize({0: [0, 1]}) == {0: [1], 1: [0]}


def test_hash_partition():
    assert hash_partition({0: [], 1: [], 5: [], 6: []}, 3) == {0: 0, 1: 1, 5: 2, 6: 0}
    with pytest.raises(ValueError):
        hash_partition({0: []}, 0)


def test_metis_partition(tmp_path):
    graph = {10: [20], 20: [10, 30], 30: [20]}
    assert load_metis_partition(_write(tmp_path, "g.part", "1\n0\n1\n"), graph) == {10: 1, 20: 0, 30: 1}


@pytest.mark.parametrize("text, error", [
    ("0\n1\n", LengthMismatchError),
    ("0\n1\n0\n1\n", LengthMismatchError),
    ("0\nx\n1\n", ParseError),
    ("0\n1.5\n1\n", ParseError),
    ("1\n2\n1\n", BadPartIdError),
    ("0\n2\n0\n", BadPartIdError),
])
def test_metis_partition_errors(tmp_path, text, error):
    graph = {0: [1], 1: [0, 2], 2: [1]}
    with pytest.raises(error):
        load_metis_partition(_write(tmp_path, "g.part", text), graph)


def test_renumber_is_dense_and_order_preserving():
    dense, mapping = renumber({10: [30], 30: [10, 50], 50: [30]})
    assert mapping == {10: 0, 30: 1, 50: 2}
    assert dense == {0: [1], 1: [0, 2], 2: [1]}


def test_write_then_load_partition(tmp_path):
    graph = {10: [21, 30], 21: [10, 30], 30: [10, 21, 41], 41: [30]}
    ownership = hash_partition(graph, 2)
    files = write_partition_views(graph, ownership, str(tmp_path / "parts"), machines=2)

    assert [p.name for p in files.machine_files] == [machine_file(0), machine_file(1)]
    assert files.ownership_file.name == OWNERSHIP_FILE

    parts_dir = str(files.out_dir)
    views = load_partition_views(parts_dir)
    dense, mapping = renumber(graph)
    assert merge_views(views) == dense
    assert load_ownership(parts_dir) == {mapping[v]: ownership[v] for v in graph}
    assert load_renumber_map(parts_dir) == {d: v for v, d in mapping.items()}
    assert [sorted(pv.local_adj) for pv in views] == [[mapping[10], mapping[30]], [mapping[21], mapping[41]]]


def test_empty_machine_still_gets_a_view(tmp_path):
    graph = {0: [2], 2: [0]}
    views_written = write_partition_views(graph, hash_partition(graph, 2), str(tmp_path), machines=2)
    assert len(views_written.machine_files) == 2
    views = load_partition_views(str(tmp_path))
    assert [len(pv.local_adj) for pv in views] == [2, 0]


def test_describe_partition():
    graph = {0: [1], 1: [0, 2], 2: [1]}
    df = describe_partition(partition_in_memory(graph, hash_partition(graph, 2)))
    assert list(df.columns) == ["machine", "vertices", "adjacency_entries", "border"]
    assert df["vertices"].tolist() == [2, 1]
    assert df["border"].tolist() == [2, 1]


def test_ownership_must_cover_every_vertex():
    with pytest.raises(PartitionIOError):
        check_ownership({0: [1], 1: [0]}, {0: 0})


def test_inconsistent_ownership_file(tmp_path):
    graph = {0: [1], 1: [0]}
    write_partition_views(graph, {0: 0, 1: 1}, str(tmp_path), machines=2)
    (tmp_path / OWNERSHIP_FILE).write_text("0 1\n1 1\n")
    with pytest.raises(GraphError):
        load_partition_views(str(tmp_path))

"""
Graph and partition files

Formats (whitespace separated, one record per line):
- graph:      "v n1 n2 ..."   first token is the vertex, the rest its neighbors
- ownership:  "v m"
- renumber:   "orig dense"
- METIS part: one part id per line, line i = part of the i-th vertex in
              ascending id order

write_partition_views lays a partition out as:

    out_dir/
      machine_0.adj ... machine_{m-1}.adj   owned vertices only
      ownership.txt
      renumber.txt

Ids inside out_dir are dense (0..n-1); renumber.txt maps them back.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import pandas as pd

from graph.partition_view import PartitionView
from utils.errors import BadPartIdError, LengthMismatchError, ParseError, PartitionIOError, PartitionWriteError

logger = logging.getLogger(__name__)

Graph = Dict[int, List[int]]

OWNERSHIP_FILE = "ownership.txt"
RENUMBER_FILE = "renumber.txt"


def machine_file(t: int) -> str:
    return f"machine_{t}.adj"


@dataclass
class PartitionFiles:
    out_dir: Path
    machine_files: List[Path]
    ownership_file: Path
    renumber_file: Path


# ===== GRAPH =====

def _parse_adjacency_lines(path: str, lines: Iterable[str]) -> Dict[int, set]:
    listed: Dict[int, set] = {}
    for line_no, raw in enumerate(lines, start=1):
        tokens = raw.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        try:
            ids = [int(t) for t in tokens]
        except ValueError:
            raise ParseError(path, line_no, f"expected integer vertex ids, got {raw.strip()!r}") from None
        if any(i < 0 for i in ids):
            raise ParseError(path, line_no, "vertex ids must be non-negative")
        v, neighbors = ids[0], ids[1:]
        listed.setdefault(v, set()).update(neighbors)
    return listed


def _finalize(adjacency: Mapping[int, Iterable[int]]) -> Graph:
    return {v: sorted(neighbors) for v, neighbors in sorted(adjacency.items())}


def symmetrize(listed: Mapping[int, Iterable[int]]) -> Graph:
    """Symmetric closure; self-loops are dropped since embeddings are injective."""
    closed: Dict[int, set] = {v: set() for v in listed}
    for v, neighbors in listed.items():
        for n in neighbors:
            if n == v:
                continue
            closed[v].add(n)
            closed.setdefault(n, set()).add(v)
    return _finalize(closed)


def load_graph(path: str) -> Graph:
    """Parse an adjacency-list text file into a symmetric, sorted, duplicate-free graph."""
    try:
        with open(path, encoding="utf-8") as f:
            listed = _parse_adjacency_lines(str(path), f)
    except OSError as e:
        raise PartitionIOError(f"cannot read graph {path}: {e}") from e
    graph = symmetrize(listed)
    logger.info(f"Loaded graph {path}: {len(graph)} vertices, {edge_count(graph)} edges")
    return graph


def edge_count(graph: Mapping[int, Iterable[int]]) -> int:
    return sum(len(list(n)) for n in graph.values()) // 2


def graph_from_edges(edges: Iterable[Tuple[int, int]], vertices: Iterable[int] = ()) -> Graph:
    listed: Dict[int, set] = {v: set() for v in vertices}
    for a, b in edges:
        listed.setdefault(a, set()).add(b)
    return symmetrize(listed)


def graph_from_networkx(g) -> Graph:
    return graph_from_edges(((int(a), int(b)) for a, b in g.edges()), (int(v) for v in g.nodes()))


def renumber(graph: Mapping[int, Iterable[int]]) -> Tuple[Graph, Dict[int, int]]:
    """Dense copy of graph (ids 0..n-1 in ascending original order) and the orig -> dense map."""
    mapping = {v: i for i, v in enumerate(sorted(graph))}
    dense = {mapping[v]: sorted(mapping[n] for n in neighbors) for v, neighbors in graph.items()}
    return _finalize(dense), mapping


# ===== OWNERSHIP =====

def hash_partition(graph: Mapping[int, Iterable[int]], m: int) -> Dict[int, int]:
    if m < 1:
        raise ValueError(f"need at least one machine, got {m}")
    return {v: v % m for v in sorted(graph)}


def load_metis_partition(path: str, graph: Mapping[int, Iterable[int]]) -> Dict[int, int]:
    """Ownership from a METIS part file; line i holds the part of the i-th smallest vertex id."""
    try:
        df = pd.read_csv(path, header=None, names=["part"], dtype=str, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        df = pd.DataFrame({"part": pd.Series([], dtype=str)})
    except OSError as e:
        raise PartitionIOError(f"cannot read METIS partition {path}: {e}") from e

    vertices = sorted(graph)
    if len(df) != len(vertices):
        raise LengthMismatchError(str(path), len(vertices), len(df))

    parts = pd.to_numeric(df["part"].str.strip(), errors="coerce")
    bad = parts.isna() | (parts != parts.round())
    if bad.any():
        line_no = int(bad.idxmax()) + 1
        raise ParseError(str(path), line_no, f"expected an integer part id, got {df['part'].iloc[line_no - 1]!r}")
    parts = parts.astype(int)

    used = sorted(int(x) for x in parts.unique())
    if used and (used[0] != 0 or used != list(range(len(used)))):
        raise BadPartIdError(f"{path}: part ids must be contiguous from 0, got {used}")

    ownership = dict(zip(vertices, parts.tolist()))
    logger.info(f"Loaded METIS partition {path}: {len(used)} parts")
    return ownership


def check_ownership(graph: Mapping[int, Iterable[int]], ownership: Mapping[int, int]):
    missing = [v for v in graph if v not in ownership]
    for neighbors in graph.values():
        missing.extend(n for n in neighbors if n not in ownership)
    if missing:
        raise PartitionIOError(f"ownership map misses {len(set(missing))} vertices, e.g. {min(missing)}")


def machine_count(ownership: Mapping[int, int]) -> int:
    return max(ownership.values(), default=-1) + 1


# ===== PARTITION VIEWS =====

def split_graph(graph: Mapping[int, Iterable[int]], ownership: Mapping[int, int],
                machines: Optional[int] = None) -> List[Graph]:
    """Per-machine adjacency of owned vertices."""
    machines = machines if machines is not None else machine_count(ownership)
    parts: List[Graph] = [{} for _ in range(machines)]
    for v, neighbors in graph.items():
        parts[ownership[v]][v] = sorted(neighbors)
    return parts


def partition_in_memory(graph: Mapping[int, Iterable[int]], ownership: Mapping[int, int],
                        cache_budget: int = 0, machines: Optional[int] = None) -> List[PartitionView]:
    check_ownership(graph, ownership)
    parts = split_graph(graph, ownership, machines)
    return [PartitionView(t, local, ownership, cache_budget) for t, local in enumerate(parts)]


def write_partition_views(graph: Mapping[int, Iterable[int]], ownership: Mapping[int, int],
                          out_dir: str, machines: Optional[int] = None) -> PartitionFiles:
    check_ownership(graph, ownership)
    dense, mapping = renumber(graph)
    dense_ownership = {mapping[v]: ownership[v] for v in graph}
    parts = split_graph(dense, dense_ownership, machines)

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        machine_files = []
        for t, local in enumerate(parts):
            path = out / machine_file(t)
            with open(path, "w", encoding="utf-8") as f:
                for v, neighbors in local.items():
                    f.write(" ".join(str(x) for x in [v, *neighbors]) + "\n")
            machine_files.append(path)

        pd.DataFrame(sorted(dense_ownership.items()), columns=["vertex", "machine"]).to_csv(
            out / OWNERSHIP_FILE, sep=" ", header=False, index=False
        )
        pd.DataFrame(sorted(mapping.items()), columns=["orig", "dense"]).to_csv(
            out / RENUMBER_FILE, sep=" ", header=False, index=False
        )
    except OSError as e:
        raise PartitionWriteError(f"cannot write partition to {out_dir}: {e}") from e

    logger.info(f"Wrote {len(parts)} partition views to {out_dir}")
    return PartitionFiles(out, machine_files, out / OWNERSHIP_FILE, out / RENUMBER_FILE)


def _read_pairs(path: Path, columns: List[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, sep=r"\s+", header=None, names=columns, comment="#")
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=columns, dtype=int)
    except (OSError, ValueError) as e:
        raise PartitionIOError(f"cannot read {path}: {e}") from e
    if df.isna().any().any():
        line_no = int(df.isna().any(axis=1).idxmax()) + 1
        raise ParseError(str(path), line_no, f"expected {len(columns)} integer columns")
    try:
        return df.astype(int)
    except ValueError as e:
        raise ParseError(str(path), 0, str(e)) from e


def load_ownership(parts_dir: str) -> Dict[int, int]:
    df = _read_pairs(Path(parts_dir) / OWNERSHIP_FILE, ["vertex", "machine"])
    return dict(zip(df["vertex"].tolist(), df["machine"].tolist()))


def load_renumber_map(parts_dir: str) -> Dict[int, int]:
    """dense -> original id"""
    path = Path(parts_dir) / RENUMBER_FILE
    if not path.exists():
        return {}
    df = _read_pairs(path, ["orig", "dense"])
    return dict(zip(df["dense"].tolist(), df["orig"].tolist()))


def load_partition_view(parts_dir: str, machine_id: int, cache_budget: int = 0,
                        ownership: Optional[Mapping[int, int]] = None) -> PartitionView:
    ownership = ownership if ownership is not None else load_ownership(parts_dir)
    path = Path(parts_dir) / machine_file(machine_id)
    try:
        with open(path, encoding="utf-8") as f:
            local = _parse_adjacency_lines(str(path), f)
    except OSError as e:
        raise PartitionIOError(f"cannot read partition view {path}: {e}") from e
    return PartitionView(machine_id, local, ownership, cache_budget)


def load_partition_views(parts_dir: str, cache_budget: int = 0) -> List[PartitionView]:
    ownership = load_ownership(parts_dir)
    machines = machine_count(ownership)
    present = sorted(p.name for p in Path(parts_dir).glob("machine_*.adj"))
    machines = max(machines, len(present))
    return [load_partition_view(parts_dir, t, cache_budget, ownership) for t in range(machines)]


def merge_views(views: Iterable[PartitionView]) -> Graph:
    """Union of the owned adjacency of every view."""
    merged: Dict[int, List[int]] = {}
    for pv in views:
        for v, neighbors in pv.local_adj.items():
            merged[v] = list(neighbors)
    return _finalize(merged)


def describe_partition(views: List[PartitionView]) -> pd.DataFrame:
    """One row per machine: owned vertices, owned edge endpoints, border vertices."""
    rows = [
        {
            "machine": pv.machine_id,
            "vertices": len(pv.local_adj),
            "adjacency_entries": sum(len(n) for n in pv.local_adj.values()),
            "border": len(pv.border),
        }
        for pv in views
    ]
    return pd.DataFrame(rows, columns=["machine", "vertices", "adjacency_entries", "border"])

import json
import socket

import pytest

from ops.rads_cli import EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, main

K4_WITH_TAIL = "10 11 12 13\n11 12 13\n12 13\n13 14\n"


@pytest.fixture
def graph_file(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text(K4_WITH_TAIL)
    return str(path)


def test_plan_text(capsys):
    assert main(["plan", "--pattern", "p-star"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "units: 3" in out
    assert "score: 3.33" in out


def test_plan_json(capsys):
    assert main(["plan", "--pattern", "triangle", "--json"]) == EXIT_OK
    plan = json.loads(capsys.readouterr().out)
    assert plan["units"] == [{"piv": 0, "leaves": [1, 2], "star": [[0, 1], [0, 2]], "sib": [[1, 2]], "cro": []}]
    assert plan["constraints"] == [[0, 1], [0, 2], [1, 2]]


def test_oracle_count_and_results(graph_file, capsys):
    assert main(["oracle", "--pattern", "triangle", "--graph", graph_file]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "4"

    assert main(["oracle", "--pattern", "edge", "--graph", graph_file, "--emit", "results"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "# u0 u1"
    assert "13 14" in lines
    assert len(lines) == 1 + 7


def test_partition_then_run(graph_file, tmp_path, capsys):
    parts = str(tmp_path / "parts")
    assert main(["partition", "--graph", graph_file, "--machines", "2", "--out", parts]) == EXIT_OK
    assert "Partitioned" in capsys.readouterr().out

    assert main(["run", "--pattern", "triangle", "--parts", parts, "--json"]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["count"] == 4
    assert len(summary["per_worker"]) == 2

    assert main(["run", "--pattern", "triangle", "--parts", parts, "--emit", "results"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["# u0 u1 u2", "10 11 12", "10 11 13", "10 12 13", "11 12 13"]


def test_run_over_tcp(graph_file, tmp_path, capsys):
    parts = str(tmp_path / "parts")
    main(["partition", "--graph", graph_file, "--machines", "2", "--out", parts])
    capsys.readouterr()
    assert main(["run", "--pattern", "wedge", "--parts", parts, "--transport", "tcp", "--json"]) == EXIT_OK
    # K4 has 12 wedges, plus 3 through the tail edge at 13
    assert json.loads(capsys.readouterr().out)["count"] == 15


def test_run_rejects_wrong_worker_count(graph_file, tmp_path, capsys):
    parts = str(tmp_path / "parts")
    main(["partition", "--graph", graph_file, "--machines", "2", "--out", parts])
    assert main(["run", "--pattern", "triangle", "--parts", parts, "--workers", "3"]) == EXIT_USAGE


def test_verify_random_graph(capsys):
    assert main(["verify", "--pattern", "square", "--machines", "3", "--vertices", "30",
                 "--edges", "80", "--seed", "4"]) == EXIT_OK
    assert "PASSED" in capsys.readouterr().out


def test_verify_catches_skipped_verification(tmp_path, capsys):
    path = tmp_path / "fault.txt"
    path.write_text("0 1 3\n")
    argv = ["verify", "--pattern", "triangle", "--graph", str(path), "--machines", "2"]
    assert main(argv) == EXIT_OK
    assert main(argv + ["--skip-verify", "--json"]) == EXIT_MISMATCH
    out = capsys.readouterr().out
    summary = json.loads(out[out.index("{"):])
    assert summary["extra"] == 1
    assert summary["passed"] is False


@pytest.mark.parametrize("argv", [
    ["plan", "--pattern", "no-such-pattern-file"],
    ["oracle", "--pattern", "triangle", "--graph", "/nonexistent/graph.txt"],
    ["plan", "--pattern", "triangle", "--rho", "-1"],
    [],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_argparse_rejects_missing_required_flag():
    with pytest.raises(SystemExit) as info:
        main(["run", "--pattern", "triangle"])
    assert info.value.code == 2


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_run_over_tcp_with_hosts_file(graph_file, tmp_path, capsys):
    parts = str(tmp_path / "parts")
    main(["partition", "--graph", graph_file, "--machines", "2", "--out", parts])
    hosts = tmp_path / "hosts.txt"
    hosts.write_text("".join(f"{t} 127.0.0.1:{_free_port()}\n" for t in range(2)))
    capsys.readouterr()
    argv = ["run", "--pattern", "wedge", "--parts", parts, "--transport", "tcp", "--hosts", str(hosts), "--json"]
    assert main(argv) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["count"] == 15


def test_run_hosts_file_missing_a_machine(graph_file, tmp_path, capsys):
    parts = str(tmp_path / "parts")
    main(["partition", "--graph", graph_file, "--machines", "2", "--out", parts])
    hosts = tmp_path / "hosts.txt"
    hosts.write_text(f"0 127.0.0.1:{_free_port()}\n")
    argv = ["run", "--pattern", "wedge", "--parts", parts, "--transport", "tcp", "--hosts", str(hosts)]
    assert main(argv) == EXIT_USAGE


def test_results_columns_follow_matching_order(graph_file, tmp_path, capsys):
    parts = str(tmp_path / "parts")
    main(["partition", "--graph", graph_file, "--machines", "2", "--out", parts])
    capsys.readouterr()
    assert main(["run", "--pattern", "wedge", "--parts", parts, "--emit", "results"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    # the wedge's center u1 is the first pivot
    assert lines[0] == "# u1 u0 u2"
    rows = [tuple(int(v) for v in line.split()) for line in lines[1:]]
    assert len(rows) == 15
    assert (13, 12, 14) in rows
    assert all(a < b for _, a, b in rows)

    assert main(["oracle", "--pattern", "wedge", "--graph", graph_file, "--emit", "results"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == lines


@pytest.mark.parametrize("strategy", ["rads", "ranm", "rans"])
def test_plan_strategies(strategy, capsys):
    argv = ["plan", "--pattern", "p-star", "--plan-strategy", strategy, "--seed", "5", "--json"]
    assert main(argv) == EXIT_OK
    plan = json.loads(capsys.readouterr().out)
    assert plan["strategy"] == strategy
    assert sorted(plan["matching_order"]) == list(range(10))
    if strategy != "rans":
        assert len(plan["units"]) == 3


@pytest.mark.parametrize("strategy", ["ranm", "rans"])
def test_verify_with_random_plan(strategy, capsys):
    assert main(["verify", "--pattern", "p-star", "--machines", "3", "--vertices", "40",
                 "--edges", "130", "--seed", "2", "--plan-strategy", strategy, "--json"]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["passed"] is True
    assert 0.0 <= summary["compression_ratio"] <= 1.0

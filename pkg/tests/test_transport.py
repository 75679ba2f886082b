import socket
import threading

import pytest

from enumeration.region_groups import GroupTable, RegionGroup
from graph.partition_view import PartitionView
from ingestion.partitioner_io import graph_from_edges, split_graph
from transport.client import broadcast_done, fetch_vertices, steal_work, verify_edges
from transport.daemon import DaemonHandler
from transport.factory import get_transport
from transport.loopback import LoopbackHub, LoopbackTransport
from transport.messages import Message, MessageKind, encode_message
from transport.tcp import TcpDaemon, TcpTransport, load_hosts
from utils.errors import ConfigError, TransportFailure

# 0-1-2-3-4-5; machine 0 owns {0, 1}
OWNERSHIP = {0: 0, 1: 0, 2: 1, 3: 1, 4: 1, 5: 1}


@pytest.fixture
def views():
    graph = graph_from_edges([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    parts = split_graph(graph, OWNERSHIP)
    return [PartitionView(t, parts[t], OWNERSHIP) for t in range(2)]


@pytest.fixture
def loopback(views):
    hub = LoopbackHub()
    tables = [GroupTable(), GroupTable()]
    handlers = [DaemonHandler(pv, table) for pv, table in zip(views, tables)]
    for handler in handlers:
        hub.register(handler)
    yield hub, handlers, LoopbackTransport(0, hub, timeout_s=5)
    hub.stop_all()


def test_verify_routes_to_owner(views, loopback):
    _, _, transport = loopback
    verdicts = verify_edges(transport, views[0], [(3, 2), (2, 4), (5, 4), (3, 5)], round_tag="r0")
    assert verdicts == {(2, 3): True, (2, 4): False, (4, 5): True, (3, 5): False}
    assert transport.counters.requests["VERIFY_E_REQ"] == 1
    assert transport.counters.max_verifications_per_round() == 1


def test_verify_nothing_sends_nothing(views, loopback):
    _, _, transport = loopback
    assert verify_edges(transport, views[0], []) == {}
    assert sum(transport.counters.requests.values()) == 0


def test_fetch_fills_cache_once(views, loopback):
    _, _, transport = loopback
    pv0 = views[0]
    assert fetch_vertices(transport, pv0, [2, 3, 1]) == 2
    assert pv0.adjacency(3) == (2, 4)
    assert fetch_vertices(transport, pv0, [2, 3]) == 0
    assert transport.counters.max_fetches_per_vertex() == 1


def test_daemon_leaves_out_vertices_it_does_not_own(views):
    handler = DaemonHandler(views[1])
    response = handler.handle(Message(MessageKind.FETCH_V_REQ, 4, 0, [0, 2]))
    assert response.kind is MessageKind.FETCH_V_RESP
    assert response.correlation_id == 4
    assert response.payload == [(2, (1, 3))]


def test_verify_of_foreign_edge_is_rejected(loopback):
    _, _, transport = loopback
    with pytest.raises(TransportFailure):
        transport.request(1, MessageKind.VERIFY_E_REQ, [(0, 1)])


def test_steal_takes_groups_from_the_back(loopback):
    _, handlers, transport = loopback
    handlers[1].groups.load([RegionGroup(members=[2], group_id=0), RegionGroup(members=[3, 4], group_id=1)])

    assert steal_work(transport) == [3, 4]
    assert steal_work(transport) == [2]
    assert steal_work(transport) is None
    assert handlers[1].groups.given_away == 2


def test_done_broadcast_releases_waiter(loopback):
    _, handlers, transport = loopback
    assert not handlers[1].wait_for_done(1, timeout_s=0.05)
    broadcast_done(transport)
    assert handlers[1].wait_for_done(1, timeout_s=1)


def test_done_broadcast_skips_unreachable_peers(loopback):
    hub, _, transport = loopback
    hub.stop_all()
    assert broadcast_done(transport) == 0


def test_stopped_peer_is_a_transport_failure(loopback):
    hub, _, transport = loopback
    hub.stop_all()
    with pytest.raises(TransportFailure):
        transport.request(1, MessageKind.CHECK_R_REQ)


def test_factory():
    hub = LoopbackHub()
    assert isinstance(get_transport("LOOPBACK", 0, hub=hub), LoopbackTransport)
    assert isinstance(get_transport("tcp", 0, hosts={0: ("127.0.0.1", 1)}), TcpTransport)
    with pytest.raises(ValueError):
        get_transport("loopback", 0)
    with pytest.raises(ValueError):
        get_transport("carrier-pigeon", 0)


# ===== TCP =====

@pytest.fixture
def tcp_daemon(views):
    daemon = TcpDaemon(DaemonHandler(views[1])).start()
    yield daemon
    daemon.stop()


def test_tcp_request_round_trip(views, tcp_daemon):
    transport = TcpTransport(0, {0: ("127.0.0.1", 1), 1: tcp_daemon.address}, timeout_s=5)
    try:
        assert verify_edges(transport, views[0], [(2, 3), (2, 5)]) == {(2, 3): True, (2, 5): False}
        assert fetch_vertices(transport, views[0], [4]) == 1
        assert views[0].adjacency(4) == (3, 5)
        assert transport.counters.bytes_sent > 0
    finally:
        transport.close()


def test_tcp_malformed_frame_drops_only_that_connection(views, tcp_daemon):
    with socket.create_connection(tcp_daemon.address, timeout=5) as raw:
        bad = encode_message(Message(MessageKind.CHECK_R_REQ, 1, 0))
        raw.sendall(bad[:4] + b"\x63" + bad[5:])
        assert raw.recv(1) == b""

    transport = TcpTransport(0, {1: tcp_daemon.address}, timeout_s=5)
    try:
        assert transport.request(1, MessageKind.CHECK_R_REQ).payload == 0
    finally:
        transport.close()


def test_tcp_unreachable_peer(views):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    transport = TcpTransport(0, {1: ("127.0.0.1", port)}, timeout_s=1, connect_retry_s=0.2)
    with pytest.raises(TransportFailure):
        transport.request(1, MessageKind.CHECK_R_REQ)


def test_load_hosts(tmp_path):
    path = tmp_path / "hosts.txt"
    path.write_text("# cluster\n0 127.0.0.1:7000\n\n1 10.0.0.2:7001\n")
    assert load_hosts(str(path)) == {0: ("127.0.0.1", 7000), 1: ("10.0.0.2", 7001)}


@pytest.mark.parametrize("text", ["0 127.0.0.1\n", "0 a:b\n", "0 h:1\n2 h:2\n"])
def test_load_hosts_rejects_bad_files(tmp_path, text):
    path = tmp_path / "hosts.txt"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_hosts(str(path))


@pytest.mark.parametrize("attempt", range(20))
def test_concurrent_thieves_race_for_the_last_group(attempt):
    # 0-1-2-3-4-5 over three machines; only machine 1 has work left
    ownership = {0: 0, 1: 0, 2: 1, 3: 1, 4: 2, 5: 2}
    graph = graph_from_edges([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    parts = split_graph(graph, ownership, machines=3)
    hub = LoopbackHub()
    handlers = [DaemonHandler(PartitionView(t, parts[t], ownership), GroupTable()) for t in range(3)]
    for handler in handlers:
        hub.register(handler)
    handlers[1].groups.load([RegionGroup(members=[2, 3], group_id=attempt)])

    start = threading.Barrier(2)
    stolen = {}

    def thief(machine_id):
        transport = LoopbackTransport(machine_id, hub, timeout_s=5)
        start.wait()
        stolen[machine_id] = steal_work(transport)

    threads = [threading.Thread(target=thief, args=(t,)) for t in (0, 2)]
    try:
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=10)
    finally:
        hub.stop_all()

    assert sorted(stolen.values(), key=lambda members: members is not None) == [None, [2, 3]]
    assert handlers[1].groups.given_away == 1
    assert handlers[1].groups.unprocessed_count() == 0

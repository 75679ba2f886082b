"""
TCP transport: one process per worker, addressed through a hosts file.

Frames go on the wire exactly as encoded, length prefix first. Each peer
connection is persistent and carries one request at a time. A daemon that
receives a malformed frame logs it and drops that connection only.
"""

import logging
import socket
import socketserver
import threading
import time
import traceback
from typing import Dict, List, Tuple

from transport.base import Transport
from transport.daemon import DaemonHandler
from transport.messages import read_frame
from utils.audit_logger import AuditLogger
from utils.errors import ConfigError, RadsError, TransportFailure

logger = logging.getLogger(__name__)

Address = Tuple[str, int]


def load_hosts(path: str) -> Dict[int, Address]:
    """Parse a hosts file: one 'machine_id host:port' per line, '#' comments allowed."""
    hosts: Dict[int, Address] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                machine, endpoint = line.split()
                host, port = endpoint.rsplit(":", 1)
                hosts[int(machine)] = (host, int(port))
            except ValueError:
                raise ConfigError(f"{path}:{line_no}: expected 'machine_id host:port', got {line!r}") from None
    if sorted(hosts) != list(range(len(hosts))):
        raise ConfigError(f"{path}: machine ids must be 0..{len(hosts) - 1}, got {sorted(hosts)}")
    return hosts


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class _FrameHandler(socketserver.BaseRequestHandler):
    def handle(self):
        daemon_handler: DaemonHandler = self.server.daemon_handler
        while True:
            try:
                frame = read_frame(lambda n: _recv_exact(self.request, n))
            except OSError:
                return
            except RadsError as e:
                self._drop(daemon_handler, e)
                return
            try:
                response = daemon_handler.handle_frame(frame)
            except RadsError as e:
                self._drop(daemon_handler, e)
                return
            self.request.sendall(response)

    def _drop(self, daemon_handler: DaemonHandler, error: Exception):
        AuditLogger.log_error(
            error_type=type(error).__name__,
            error_message=str(error),
            stack_trace=traceback.format_exc(),
            metadata={"machine_id": daemon_handler.machine_id, "peer": str(self.client_address)},
        )


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class TcpDaemon:
    def __init__(self, handler: DaemonHandler, host: str = "127.0.0.1", port: int = 0):
        self.handler = handler
        self.server = _Server((host, port), _FrameHandler)
        self.server.daemon_handler = handler
        self._thread = threading.Thread(
            target=self.server.serve_forever, name=f"daemon-{handler.machine_id}", daemon=True
        )

    @property
    def address(self) -> Address:
        host, port = self.server.server_address[:2]
        return host, port

    def start(self) -> "TcpDaemon":
        self._thread.start()
        logger.info(f"Machine {self.handler.machine_id} daemon listening on {self.address[0]}:{self.address[1]}")
        return self

    def stop(self):
        self.server.shutdown()
        self.server.server_close()


class TcpTransport(Transport):
    def __init__(self, machine_id: int, hosts: Dict[int, Address], timeout_s: float = 30.0,
                 connect_retry_s: float = 10.0):
        super().__init__(machine_id, timeout_s)
        self.hosts = dict(hosts)
        self.connect_retry_s = connect_retry_s
        self._connections: Dict[int, socket.socket] = {}

    def peers(self) -> List[int]:
        return [m for m in sorted(self.hosts) if m != self.machine_id]

    def _connection(self, target: int) -> socket.socket:
        sock = self._connections.get(target)
        if sock is None:
            if target not in self.hosts:
                raise TransportFailure(f"machine {target} missing from hosts file")
            deadline = time.monotonic() + self.connect_retry_s
            while True:
                try:
                    sock = socket.create_connection(self.hosts[target], timeout=self.timeout_s)
                    break
                except OSError as e:
                    # peers may still be starting up
                    if time.monotonic() >= deadline:
                        raise TransportFailure(
                            f"cannot connect to machine {target} at {self.hosts[target]}: {e}"
                        ) from e
                    time.sleep(0.1)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._connections[target] = sock
        return sock

    def _exchange(self, target: int, frame: bytes) -> bytes:
        sock = self._connection(target)
        try:
            sock.sendall(frame)
            return read_frame(lambda n: _recv_exact(sock, n))
        except OSError as e:
            self._drop(target)
            raise TransportFailure(f"exchange with machine {target} failed: {e}") from e

    def _drop(self, target: int):
        sock = self._connections.pop(target, None)
        if sock is not None:
            sock.close()

    def close(self):
        for target in list(self._connections):
            self._drop(target)

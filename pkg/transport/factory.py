from typing import Dict, Optional

from transport.base import Transport
from transport.loopback import LoopbackHub, LoopbackTransport
from transport.tcp import Address, TcpTransport


def get_transport(
    kind: str,
    machine_id: int,
    hub: Optional[LoopbackHub] = None,
    hosts: Optional[Dict[int, Address]] = None,
    timeout_s: float = 30.0,
    connect_retry_s: float = 10.0,
) -> Transport:
    kind = kind.lower()

    if kind == "loopback":
        if hub is None:
            raise ValueError("loopback transport needs a LoopbackHub")
        return LoopbackTransport(machine_id, hub, timeout_s)
    elif kind == "tcp":
        if not hosts:
            raise ValueError("tcp transport needs a hosts map")
        return TcpTransport(machine_id, hosts, timeout_s, connect_retry_s)
    else:
        raise ValueError(f"Unknown transport: {kind}")

"""Exception hierarchy shared by every package in the engine."""

from typing import Optional


class RadsError(Exception):
    """Root of all engine errors."""


class ConfigError(RadsError):
    pass


# ===== GRAPH =====

class GraphError(RadsError):
    pass


class UnknownVertexError(GraphError):
    def __init__(self, vertex: int, machine_id: Optional[int] = None):
        self.vertex = vertex
        self.machine_id = machine_id
        where = f" on machine {machine_id}" if machine_id is not None else ""
        super().__init__(f"vertex {vertex} is neither owned nor cached{where}")


class ZeroDegreeError(GraphError):
    def __init__(self, vertex: int):
        self.vertex = vertex
        super().__init__(f"vertex {vertex} has no neighbors")


# ===== PATTERN / PLAN =====

class PatternError(RadsError):
    pass


class PatternParseError(PatternError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"pattern line {line_no}: {message}")


class DisconnectedPatternError(PatternError):
    pass


class SelfLoopError(PatternError):
    pass


class DuplicateEdgeError(PatternError):
    pass


class PatternTooLargeError(PatternError):
    pass


class PlanError(RadsError):
    pass


class NotAPlanError(PlanError):
    pass


# ===== TRIE =====

class TrieError(RadsError):
    pass


class StaleIdError(TrieError):
    pass


class MissingAdjacencyError(TrieError):
    def __init__(self, vertex: int):
        self.vertex = vertex
        super().__init__(f"adjacency of pivot image {vertex} is neither owned nor cached")


class MissingVerdictError(TrieError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"no verdict supplied for undetermined edge {edge}")


# ===== TRANSPORT =====

class TransportError(RadsError):
    pass


class TransportFailure(TransportError):
    pass


class OwnerUnknownError(TransportError):
    def __init__(self, vertex: int):
        self.vertex = vertex
        super().__init__(f"no owner recorded for vertex {vertex}")


class NotOwnerError(TransportError):
    def __init__(self, vertices, machine_id: int):
        self.vertices = sorted(vertices)
        self.machine_id = machine_id
        super().__init__(f"machine {machine_id} does not own {self.vertices}")


class ProtocolError(TransportError):
    pass


# ===== PARTITION FILES =====

class PartitionIOError(RadsError):
    pass


class ParseError(PartitionIOError):
    def __init__(self, path: str, line_no: int, message: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class LengthMismatchError(PartitionIOError):
    def __init__(self, path: str, expected: int, actual: int):
        self.path = path
        self.expected = expected
        self.actual = actual
        super().__init__(f"{path}: expected {expected} lines, found {actual}")


class BadPartIdError(PartitionIOError):
    pass


class PartitionWriteError(PartitionIOError):
    pass

"""Typed interaction graph in CSR form with per-node cumulative edge weights.

Nodes are partitioned into two sides: Listing on one, Query/Shop/Tag on the
other. Every undirected edge is stored as two arcs. Arcs of a node are laid
out contiguously (``offsets``/``targets``) and carry a cumulative probability
array (``cdf``) normalized to 1.0 per node, so that drawing an edge is a
binary search over the node's cdf slice.

Binary file layout (little-endian throughout):

    magic "XWLK" | u32 version=1 | u64 node_count | u64 arc_count
    node table: (u8 kind tag, u32 key byte length, UTF-8 key) per node
    offsets: u64 x (node_count + 1)
    targets: u64 x arc_count
    cdf:     f64 x arc_count
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO

import numpy as np

MAGIC = b"XWLK"
FORMAT_VERSION = 1

# Per-node cdf must terminate within this distance of 1.0.
CDF_TOLERANCE = 1e-9


class NodeKind(Enum):
    QUERY = 0
    LISTING = 1
    SHOP = 2
    TAG = 3


def kind_side(kind: NodeKind) -> int:
    """Bipartition side of a node kind: listings on 1, everything else on 0."""
    return 1 if kind is NodeKind.LISTING else 0


@dataclass(frozen=True)
class NodeRef:
    id: int
    kind: NodeKind
    key: str


class GraphError(Exception):
    """Base for all graph construction and IO failures."""


class GraphValidationError(GraphError):
    """A structural invariant does not hold."""


class GraphLoadError(GraphError):
    """Base for byte-level deserialization failures."""


class BadMagicError(GraphLoadError):
    pass


class UnsupportedVersionError(GraphLoadError):
    pass


class TruncatedStreamError(GraphLoadError):
    pass


@dataclass(eq=False)
class CsrGraph:
    """Immutable CSR adjacency with per-node cumulative edge probabilities.

    ``offsets`` has length node_count + 1; the arcs of node ``n`` occupy
    ``targets[offsets[n]:offsets[n+1]]`` sorted by non-increasing weight,
    ties by ascending target id. ``cdf`` aligns with ``targets``.
    """

    nodes: list[NodeRef]
    offsets: np.ndarray
    targets: np.ndarray
    cdf: np.ndarray
    kind_index: dict[tuple[NodeKind, str], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.offsets = np.ascontiguousarray(self.offsets, dtype=np.int64)
        self.targets = np.ascontiguousarray(self.targets, dtype=np.int64)
        self.cdf = np.ascontiguousarray(self.cdf, dtype=np.float64)
        for arr in (self.offsets, self.targets, self.cdf):
            arr.setflags(write=False)
        if not self.kind_index:
            index: dict[tuple[NodeKind, str], int] = {}
            for node in self.nodes:
                index[(node.kind, node.key)] = node.id
            self.kind_index = index

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def arc_count(self) -> int:
        return int(self.targets.shape[0])

    def degree(self, node: int) -> int:
        return int(self.offsets[node + 1] - self.offsets[node])

    def arc_targets(self, node: int) -> np.ndarray:
        return self.targets[self.offsets[node] : self.offsets[node + 1]]

    def cdf_slice(self, node: int) -> np.ndarray:
        return self.cdf[self.offsets[node] : self.offsets[node + 1]]


def lookup_node(graph: CsrGraph, kind: NodeKind, key: str) -> int | None:
    """Resolve a (kind, key) pair to a node id, or None when absent."""
    return graph.kind_index.get((kind, key))


def edge_probability(graph: CsrGraph, node: int, index: int) -> float:
    """Probability of the node's index-th arc (difference of adjacent cdf entries)."""
    if not 0 <= node < graph.node_count:
        raise IndexError(f"node {node} out of range")
    degree = graph.degree(node)
    if not 0 <= index < degree:
        raise IndexError(f"arc index {index} out of range for degree {degree}")
    lo = int(graph.offsets[node])
    prev = float(graph.cdf[lo + index - 1]) if index > 0 else 0.0
    return float(graph.cdf[lo + index]) - prev


def validate_graph(graph: CsrGraph) -> list[str]:
    """Check structural invariants; raise GraphValidationError on violation.

    Returns soft findings (currently: isolated nodes) as warning strings.
    """
    n = graph.node_count
    offsets, targets, cdf = graph.offsets, graph.targets, graph.cdf
    m = graph.arc_count

    if offsets.shape[0] != n + 1:
        raise GraphValidationError("offsets length must be node_count + 1")
    if cdf.shape[0] != m:
        raise GraphValidationError("cdf and targets lengths differ")
    if n and any(node.id != i for i, node in enumerate(graph.nodes)):
        raise GraphValidationError("node ids must be dense and in order")
    if int(offsets[0]) != 0 or int(offsets[-1]) != m:
        raise GraphValidationError("offsets must start at 0 and end at arc_count")
    if n and np.any(np.diff(offsets) < 0):
        raise GraphValidationError("offsets must be non-decreasing")
    if m and (int(targets.min()) < 0 or int(targets.max()) >= n):
        raise GraphValidationError("arc target out of range")

    if len(graph.kind_index) != n:
        raise GraphValidationError("duplicate (kind, key) pair in node table")
    for node in graph.nodes:
        if graph.kind_index.get((node.kind, node.key)) != node.id:
            raise GraphValidationError("kind_index inconsistent with node table")

    degrees = np.diff(offsets)
    if m:
        starts = offsets[:-1][degrees > 0]
        ends = offsets[1:][degrees > 0] - 1
        if np.any(cdf[starts] <= 0.0):
            raise GraphValidationError("cdf entries must be strictly positive")
        if np.any(np.abs(cdf[ends] - 1.0) > CDF_TOLERANCE):
            raise GraphValidationError("per-node cdf must terminate at 1.0")
        # Within-node checks exclude positions that cross a node boundary.
        diffs = np.diff(cdf)
        boundary = np.zeros(m - 1, dtype=bool) if m > 1 else np.zeros(0, dtype=bool)
        inner_starts = offsets[1:-1]
        inner_starts = inner_starts[(inner_starts > 0) & (inner_starts < m)]
        if boundary.shape[0]:
            boundary[inner_starts - 1] = True
        if np.any(diffs[~boundary] <= 0.0):
            raise GraphValidationError("per-node cdf must be strictly increasing")
        # Implied weights (cdf differences) must be non-increasing per node.
        weights = cdf.copy()
        weights[1:] -= cdf[:-1]
        weights[offsets[:-1][degrees > 0]] = cdf[offsets[:-1][degrees > 0]]
        wdiffs = np.diff(weights)
        if np.any(wdiffs[~boundary] > 1e-12):
            raise GraphValidationError("per-node arc weights must be non-increasing")

        src = np.repeat(np.arange(n, dtype=np.int64), degrees)
        sides = np.fromiter(
            (kind_side(node.kind) for node in graph.nodes), dtype=np.int8, count=n
        )
        if np.any(sides[src] == sides[targets]):
            raise GraphValidationError("arc connects two nodes on the same side")
        forward = np.lexsort((targets, src))
        backward = np.lexsort((src, targets))
        if not (
            np.array_equal(src[forward], targets[backward])
            and np.array_equal(targets[forward], src[backward])
        ):
            raise GraphValidationError("arcs are not symmetric (graph not undirected)")

    warnings_found = []
    isolated = int(np.count_nonzero(degrees == 0)) if n else 0
    if isolated:
        warnings_found.append(f"{isolated} node(s) have no arcs")
    return warnings_found


def graphs_equal(a: CsrGraph, b: CsrGraph) -> bool:
    """Structural equality: same node table and identical CSR arrays."""
    return (
        a.nodes == b.nodes
        and np.array_equal(a.offsets, b.offsets)
        and np.array_equal(a.targets, b.targets)
        and np.array_equal(a.cdf, b.cdf)
    )


def serialize_graph(graph: CsrGraph, sink: BinaryIO) -> int:
    """Write the graph in the binary layout above; returns bytes written."""
    written = 0
    written += sink.write(MAGIC)
    written += sink.write(
        struct.pack("<IQQ", FORMAT_VERSION, graph.node_count, graph.arc_count)
    )
    for node in graph.nodes:
        key_bytes = node.key.encode("utf-8")
        written += sink.write(struct.pack("<BI", node.kind.value, len(key_bytes)))
        written += sink.write(key_bytes)
    written += sink.write(graph.offsets.astype("<u8").tobytes())
    written += sink.write(graph.targets.astype("<u8").tobytes())
    written += sink.write(graph.cdf.astype("<f8").tobytes())
    return written


def _read_exact(source: BinaryIO, count: int) -> bytes:
    data = source.read(count)
    if len(data) != count:
        raise TruncatedStreamError(
            f"expected {count} bytes, got {len(data)} (stream truncated)"
        )
    return data


def deserialize_graph(source: BinaryIO) -> CsrGraph:
    """Read a graph written by serialize_graph and validate it."""
    magic = source.read(len(MAGIC))
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, node_count, arc_count = struct.unpack(
        "<IQQ", _read_exact(source, 4 + 8 + 8)
    )
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")

    nodes: list[NodeRef] = []
    for node_id in range(node_count):
        kind_tag, key_len = struct.unpack("<BI", _read_exact(source, 5))
        try:
            kind = NodeKind(kind_tag)
        except ValueError as exc:
            raise GraphValidationError(f"unknown node kind tag {kind_tag}") from exc
        key = _read_exact(source, key_len).decode("utf-8")
        nodes.append(NodeRef(id=node_id, kind=kind, key=key))

    offsets = np.frombuffer(
        _read_exact(source, 8 * (node_count + 1)), dtype="<u8"
    ).astype(np.int64)
    targets = np.frombuffer(_read_exact(source, 8 * arc_count), dtype="<u8").astype(
        np.int64
    )
    cdf = np.frombuffer(_read_exact(source, 8 * arc_count), dtype="<f8").astype(
        np.float64
    )
    graph = CsrGraph(nodes=nodes, offsets=offsets, targets=targets, cdf=cdf)
    validate_graph(graph)
    return graph

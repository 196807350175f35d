"""Directed multigraphs, degree statistics, and bit-exact adjacency matrices.

A `DirectedGraph` is the raw output of the growth process: loops and parallel
edges are kept. An `AdjacencyMatrix` is its simple 0/1 projection, which is
what the classifiers consume and what gets serialized.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import CorruptMatrix, InsufficientTail

__all__ = [
    "DirectedGraph",
    "DegreeStatistics",
    "AdjacencyMatrix",
    "degree_statistics",
    "estimate_tail_exponent",
    "add_unconnected_nodes",
    "matrix_to_bytes",
    "matrix_from_bytes",
    "save_matrix",
    "load_matrix",
    "save_matrix_records",
    "load_matrix_records",
    "write_edge_list",
    "read_edge_list",
]


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Immutable directed multigraph over dense node indices 0..node_count-1.

    `edges` is an (E, 2) int64 array of (source, target) rows in insertion
    order; loops and duplicate rows are permitted.
    """

    node_count: int
    edges: np.ndarray

    def __post_init__(self):
        edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int64).reshape(-1, 2))
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        if self.node_count < 0:
            raise ValueError("node_count must be non-negative")
        if edges.size and (edges.min() < 0 or edges.max() >= self.node_count):
            raise ValueError("edge endpoint outside 0..node_count-1")

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self.node_count == other.node_count and np.array_equal(self.edges, other.edges)

    def __repr__(self) -> str:
        return f"DirectedGraph(node_count={self.node_count}, edge_count={self.edge_count})"


@dataclass(frozen=True, eq=False)
class DegreeStatistics:
    """Per-node degrees plus degree histograms and their node proportions."""

    in_degrees: np.ndarray
    out_degrees: np.ndarray
    in_histogram: dict[int, int]
    out_histogram: dict[int, int]
    in_proportions: dict[int, float]
    out_proportions: dict[int, float]


def degree_statistics(g: DirectedGraph) -> DegreeStatistics:
    """Count in/out degrees of every node; loops add one to each side."""
    n = g.node_count
    out_deg = np.bincount(g.edges[:, 0], minlength=n)
    in_deg = np.bincount(g.edges[:, 1], minlength=n)

    def histogram(deg: np.ndarray) -> tuple[dict[int, int], dict[int, float]]:
        values, counts = np.unique(deg, return_counts=True)
        hist = {int(v): int(c) for v, c in zip(values, counts)}
        props = {d: c / n for d, c in hist.items()} if n else {}
        return hist, props

    in_hist, in_props = histogram(in_deg)
    out_hist, out_props = histogram(out_deg)
    return DegreeStatistics(in_deg, out_deg, in_hist, out_hist, in_props, out_props)


def estimate_tail_exponent(histogram: Mapping[int, int], x_min: int = 5) -> float:
    """Maximum-likelihood estimate of a discrete power-law tail exponent.

    Uses the standard continuous approximation for discrete data:
    ``1 + n_tail / sum(count_d * ln(d / (x_min - 0.5)))`` over all degrees
    d >= x_min. Raises InsufficientTail when fewer than 10 observations
    (nodes) sit in the tail.
    """
    if x_min < 1:
        raise ValueError("x_min must be >= 1")
    tail = [(int(d), int(c)) for d, c in histogram.items() if d >= x_min and c > 0]
    n_tail = sum(c for _, c in tail)
    if n_tail < 10:
        raise InsufficientTail(f"{n_tail} observations with degree >= {x_min}, need at least 10")
    log_sum = sum(c * math.log(d / (x_min - 0.5)) for d, c in tail)
    return 1.0 + n_tail / log_sum


@dataclass(frozen=True, eq=False)
class AdjacencyMatrix:
    """Square 0/1 matrix; bits[i, j] == 1 iff a simple edge i -> j exists."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.ascontiguousarray(np.asarray(self.bits, dtype=np.uint8))
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
            raise ValueError("adjacency matrix must be square")
        if bits.size and bits.max() > 1:
            raise ValueError("adjacency matrix entries must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_graph(cls, g: DirectedGraph) -> "AdjacencyMatrix":
        """Project a multigraph: parallel edges collapse, loops hit the diagonal."""
        bits = np.zeros((g.node_count, g.node_count), dtype=np.uint8)
        if g.edge_count:
            bits[g.edges[:, 0], g.edges[:, 1]] = 1
        return cls(bits)

    @property
    def size(self) -> int:
        return int(self.bits.shape[0])

    def ones(self) -> int:
        return int(self.bits.sum())

    def zero_positions(self) -> np.ndarray:
        """(z, 2) array of zero cells in row-major order."""
        return np.argwhere(self.bits == 0)

    def flatten(self) -> np.ndarray:
        """Row-major float64 vector of 0.0/1.0 entries."""
        return self.bits.reshape(-1).astype(np.float64)

    def is_superset_of(self, other: "AdjacencyMatrix") -> bool:
        return self.size == other.size and bool(np.all(self.bits >= other.bits))

    def key(self) -> bytes:
        """Canonical byte string; lexicographic order == row-major bit order."""
        return self.bits.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, AdjacencyMatrix):
            return NotImplemented
        return self.size == other.size and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.size, self.key()))

    def __repr__(self) -> str:
        return f"AdjacencyMatrix(size={self.size}, ones={self.ones()})"


def add_unconnected_nodes(g: AdjacencyMatrix, m: int) -> AdjacencyMatrix:
    """Zero-pad with m extra nodes; existing entries keep their positions."""
    if m < 0:
        raise ValueError("m must be >= 0")
    s = g.size
    bits = np.zeros((s + m, s + m), dtype=np.uint8)
    bits[:s, :s] = g.bits
    return AdjacencyMatrix(bits)


# Binary matrix record: u32 little-endian size S, then ceil(S*S/8) bytes of the
# row-major bit string packed least-significant-bit first. Unused high bits of
# the final byte must be zero.

def matrix_to_bytes(m: AdjacencyMatrix) -> bytes:
    packed = np.packbits(m.bits.reshape(-1), bitorder="little")
    return struct.pack("<I", m.size) + packed.tobytes()


def matrix_from_bytes(data: bytes) -> AdjacencyMatrix:
    if len(data) < 4:
        raise CorruptMatrix("matrix record shorter than its header")
    (size,) = struct.unpack_from("<I", data, 0)
    expected = 4 + (size * size + 7) // 8
    if len(data) != expected:
        raise CorruptMatrix(f"matrix record is {len(data)} bytes, expected {expected} for size {size}")
    payload = np.frombuffer(data, dtype=np.uint8, offset=4)
    flat = np.unpackbits(payload, bitorder="little")
    if flat[size * size:].any():
        raise CorruptMatrix("nonzero padding bits in final byte")
    return AdjacencyMatrix(flat[: size * size].reshape(size, size))


def save_matrix(m: AdjacencyMatrix, path: str | Path) -> None:
    Path(path).write_bytes(matrix_to_bytes(m))


def load_matrix(path: str | Path) -> AdjacencyMatrix:
    return matrix_from_bytes(Path(path).read_bytes())


def save_matrix_records(matrices: "list[AdjacencyMatrix]", path: str | Path) -> None:
    """Concatenate matrix records into one file; order is preserved."""
    Path(path).write_bytes(b"".join(matrix_to_bytes(m) for m in matrices))


def load_matrix_records(path: str | Path) -> "list[AdjacencyMatrix]":
    """Read back a concatenated record file; framing must be exact."""
    data = Path(path).read_bytes()
    out = []
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise CorruptMatrix(f"record header truncated at byte {offset}")
        (size,) = struct.unpack_from("<I", data, offset)
        end = offset + 4 + (size * size + 7) // 8
        if end > len(data):
            raise CorruptMatrix(f"record at byte {offset} truncated")
        out.append(matrix_from_bytes(data[offset:end]))
        offset = end
    return out


def write_edge_list(m: AdjacencyMatrix, path: str | Path) -> None:
    """Plain-text interchange: one "src dst" line per 1-entry, row-major."""
    lines = [f"{i} {j}\n" for i, j in np.argwhere(m.bits == 1)]
    Path(path).write_text("".join(lines))


def read_edge_list(path: str | Path, size: int) -> AdjacencyMatrix:
    """Read "src dst" lines into a size x size matrix.

    The node count is declared by the caller so trailing isolated nodes
    survive the text round trip. Blank lines and '#' comments are skipped.
    """
    if size < 0:
        raise ValueError("size must be >= 0")
    bits = np.zeros((size, size), dtype=np.uint8)
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) != 2:
            raise CorruptMatrix(f"line {lineno}: expected 'src dst', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise CorruptMatrix(f"line {lineno}: non-integer endpoint in {line!r}") from exc
        if not (0 <= i < size and 0 <= j < size):
            raise CorruptMatrix(f"line {lineno}: endpoint outside 0..{size - 1}")
        bits[i, j] = 1
    return AdjacencyMatrix(bits)

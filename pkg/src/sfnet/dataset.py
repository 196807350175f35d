"""Labeled training corpora for the two classifiers, with full provenance.

Subtypes live on the 10x10 exponent grid (2.1..3.0 in steps of 0.1 on each
axis). Every sample records the seed and parameters that produced it, so any
sample can be regenerated bit-for-bit from its provenance alone.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptDataset, EmptyFeasibleSet, OffGridLabel, VersionMismatch
from .generator import GeneratorParams, feasible_triples, generate
from .graph import AdjacencyMatrix
from .seeding import derive_seed

__all__ = [
    "X_GRID",
    "SubtypeLabel",
    "GroupId",
    "group_of",
    "label_of",
    "all_subtypes",
    "feasible_subtypes",
    "Provenance",
    "Sample",
    "Dataset",
    "VALID_LABEL",
    "INVALID_LABEL",
    "build_ann1_dataset",
    "build_ann2_dataset",
    "save_dataset",
    "load_dataset",
    "write_manifest",
]

X_GRID = tuple(round(2.1 + 0.1 * i, 1) for i in range(10))
_GRID_TOL = 1e-9

VALID_LABEL = 0
INVALID_LABEL = 1


def _grid_index(x: float) -> int:
    i = int(round((x - X_GRID[0]) / 0.1))
    if not (0 <= i < len(X_GRID)) or abs(x - X_GRID[i]) > _GRID_TOL:
        raise OffGridLabel(f"{x!r} is not on the exponent grid {X_GRID[0]}..{X_GRID[-1]} step 0.1")
    return i


@dataclass(frozen=True)
class SubtypeLabel:
    """A cell of the exponent grid; values are canonicalized to grid floats."""

    x_in: float
    x_out: float

    def __post_init__(self):
        object.__setattr__(self, "x_in", X_GRID[_grid_index(self.x_in)])
        object.__setattr__(self, "x_out", X_GRID[_grid_index(self.x_out)])


@dataclass(frozen=True)
class GroupId:
    """Canonical subtype index: row-major over (x_in, x_out), 0..99."""

    index: int

    def __post_init__(self):
        if not (0 <= self.index < len(X_GRID) ** 2):
            raise OffGridLabel(f"group index must lie in 0..{len(X_GRID) ** 2 - 1}, got {self.index}")


def group_of(label: SubtypeLabel) -> GroupId:
    return GroupId(_grid_index(label.x_in) * len(X_GRID) + _grid_index(label.x_out))


def label_of(group: GroupId) -> SubtypeLabel:
    i_in, i_out = divmod(group.index, len(X_GRID))
    return SubtypeLabel(X_GRID[i_in], X_GRID[i_out])


def all_subtypes() -> list[SubtypeLabel]:
    """All 100 grid cells in group-index order."""
    return [label_of(GroupId(i)) for i in range(len(X_GRID) ** 2)]


def feasible_subtypes() -> list[SubtypeLabel]:
    """Grid cells that at least one (alpha, beta, gamma) triple can reach.

    The grid's extreme exponent 2.1 is unreachable (the smallest exponent any
    simplex triple supports is 1 + 1/0.9), so this is a proper subset.
    """
    out = []
    for st in all_subtypes():
        try:
            feasible_triples(st.x_in, st.x_out)
        except EmptyFeasibleSet:
            continue
        out.append(st)
    return out


@dataclass(frozen=True)
class Provenance:
    """Everything needed to regenerate a sample's matrix bit-for-bit."""

    seed: int
    params: GeneratorParams
    subtype: SubtypeLabel


@dataclass(eq=False)
class Sample:
    vector: np.ndarray
    label: int
    provenance: Provenance

    def equals(self, other: "Sample") -> bool:
        return (
            self.label == other.label
            and self.provenance == other.provenance
            and np.array_equal(self.vector, other.vector)
        )


@dataclass(eq=False)
class Dataset:
    """Fixed-side corpus of flattened 0/1 matrices with integer labels."""

    matrix_side: int
    label_arity: int
    samples: list[Sample]

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def inputs(self) -> np.ndarray:
        d = self.matrix_side * self.matrix_side
        if not self.samples:
            return np.zeros((0, d))
        return np.stack([s.vector for s in self.samples])

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.matrix_side == other.matrix_side
            and self.label_arity == other.label_arity
            and len(self.samples) == len(other.samples)
            and all(a.equals(b) for a, b in zip(self.samples, other.samples))
        )


def _make_sample(subtype: SubtypeLabel, triples: list[GeneratorParams], side: int,
                 label: int, seed_choice: int, seed_graph: int) -> Sample:
    rng = np.random.Generator(np.random.PCG64(seed_choice))
    params = triples[int(rng.integers(len(triples)))]
    graph = generate(params, side, seed_graph)
    vector = AdjacencyMatrix.from_graph(graph).flatten()
    return Sample(vector, label, Provenance(seed_graph, params, subtype))


def regenerate(sample: Sample, side: int) -> np.ndarray:
    """Replay a sample from its provenance; must reproduce the stored vector."""
    graph = generate(sample.provenance.params, side, sample.provenance.seed)
    return AdjacencyMatrix.from_graph(graph).flatten()


def build_ann1_dataset(side: int, per_group: int, seed: int,
                       subtypes: list[SubtypeLabel] | None = None) -> Dataset:
    """Per subtype, per_group networks labeled with the subtype's group index.

    Each sample draws its (alpha, beta, gamma) triple uniformly from the
    subtype's feasible set and its generator seed from (seed, sample index),
    so corpora are reproducible sample-by-sample. Subtypes whose feasible set
    is empty abort the build with EmptyFeasibleSet naming the group.
    """
    if per_group < 1:
        raise ValueError("per_group must be >= 1")
    chosen = all_subtypes() if subtypes is None else list(subtypes)
    samples: list[Sample] = []
    index = 0
    for st in chosen:
        try:
            triples = feasible_triples(st.x_in, st.x_out)
        except EmptyFeasibleSet as exc:
            raise EmptyFeasibleSet(
                f"group {group_of(st).index} (x_in={st.x_in}, x_out={st.x_out}): {exc}"
            ) from None
        label = group_of(st).index
        for _ in range(per_group):
            samples.append(
                _make_sample(st, triples, side, label,
                             derive_seed(seed, index, 0), derive_seed(seed, index, 1))
            )
            index += 1
    return Dataset(side, len(X_GRID) ** 2, samples)


def build_ann2_dataset(side: int, predicted: SubtypeLabel, per_class: int, seed: int,
                       invalid_subtypes: list[SubtypeLabel] | None = None) -> Dataset:
    """Balanced valid/invalid corpus for one predicted subtype.

    Valid samples (label 0) are generated at the predicted subtype. Invalid
    samples (label 1) draw their subtype uniformly from the other feasible
    grid cells (or from `invalid_subtypes` when given, minus the predicted
    cell). Classes are exactly balanced at per_class each.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    valid_triples = feasible_triples(predicted.x_in, predicted.x_out)
    pool = feasible_subtypes() if invalid_subtypes is None else list(invalid_subtypes)
    pool = [st for st in pool if st != predicted]
    if not pool:
        raise EmptyFeasibleSet("no subtypes left to draw invalid samples from")
    pool_triples = {st: feasible_triples(st.x_in, st.x_out) for st in pool}

    samples: list[Sample] = []
    for index in range(per_class):
        samples.append(
            _make_sample(predicted, valid_triples, side, VALID_LABEL,
                         derive_seed(seed, index, 0), derive_seed(seed, index, 1))
        )
    for offset in range(per_class):
        index = per_class + offset
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, index, 2)))
        st = pool[int(rng.integers(len(pool)))]
        samples.append(
            _make_sample(st, pool_triples[st], side, INVALID_LABEL,
                         derive_seed(seed, index, 0), derive_seed(seed, index, 1))
        )
    return Dataset(side, 2, samples)


# Dataset file format (all little-endian):
#   magic "SFDS" | u16 version | u32 side | u32 sample count | u16 label arity |
#   per sample: u16 label | u64 seed | f64 alpha,beta,gamma,delta_in,delta_out |
#               u8 x_in index | u8 x_out index | ceil(S*S/8) matrix bytes
#               (row-major bits, least-significant first)
_MAGIC = b"SFDS"
_VERSION = 1


def save_dataset(ds: Dataset, path: str | Path) -> None:
    side = ds.matrix_side
    parts = [
        _MAGIC,
        struct.pack("<HIIH", _VERSION, side, len(ds.samples), ds.label_arity),
    ]
    for s in ds.samples:
        p = s.provenance
        parts.append(struct.pack("<HQ", s.label, p.seed))
        parts.append(struct.pack("<5d", p.params.alpha, p.params.beta, p.params.gamma,
                                 p.params.delta_in, p.params.delta_out))
        parts.append(struct.pack("<BB", _grid_index(p.subtype.x_in), _grid_index(p.subtype.x_out)))
        bits = s.vector.astype(np.uint8)
        parts.append(np.packbits(bits, bitorder="little").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_dataset(path: str | Path) -> Dataset:
    data = Path(path).read_bytes()
    view = memoryview(data)
    offset = 0

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(data):
            raise CorruptDataset(f"dataset truncated at byte {offset}")
        chunk = view[offset: offset + n]
        offset += n
        return chunk

    if bytes(take(4)) != _MAGIC:
        raise CorruptDataset("bad magic bytes")
    version, side, count, arity = struct.unpack("<HIIH", take(12))
    if version != _VERSION:
        raise VersionMismatch(f"dataset version {version}, supported {_VERSION}")
    cell_count = side * side
    packed_len = (cell_count + 7) // 8
    samples: list[Sample] = []
    for _ in range(count):
        label, seed = struct.unpack("<HQ", take(10))
        if label >= arity:
            raise CorruptDataset(f"label {label} exceeds declared arity {arity}")
        alpha, beta, gamma, d_in, d_out = struct.unpack("<5d", take(40))
        i_in, i_out = struct.unpack("<BB", take(2))
        if i_in >= len(X_GRID) or i_out >= len(X_GRID):
            raise CorruptDataset("subtype index outside the exponent grid")
        packed = np.frombuffer(take(packed_len), dtype=np.uint8)
        flat = np.unpackbits(packed, count=cell_count, bitorder="little")
        samples.append(
            Sample(
                flat.astype(np.float64),
                label,
                Provenance(seed, GeneratorParams(alpha, beta, gamma, d_in, d_out),
                           SubtypeLabel(X_GRID[i_in], X_GRID[i_out])),
            )
        )
    if offset != len(data):
        raise CorruptDataset(f"{len(data) - offset} trailing bytes after {count} samples")
    return Dataset(side, arity, samples)


def write_manifest(ds: Dataset, path: str | Path) -> None:
    """Comma-separated per-sample summary for eyeballing a corpus."""
    lines = ["index,label,x_in,x_out,alpha,beta,gamma,delta_in,delta_out,seed\n"]
    for i, s in enumerate(ds.samples):
        p = s.provenance
        lines.append(
            f"{i},{s.label},{p.subtype.x_in!r},{p.subtype.x_out!r},"
            f"{p.params.alpha!r},{p.params.beta!r},{p.params.gamma!r},"
            f"{p.params.delta_in!r},{p.params.delta_out!r},{p.seed}\n"
        )
    Path(path).write_text("".join(lines))

"""Two-stage completion search for a query adjacency matrix.

Stage one classifies the padded query into a subtype cell; stage two trains
a valid/invalid discriminator for that subtype and scores candidate
completions of the query's zero positions. Accepted candidates must exceed
the probability threshold, preserve every existing edge, and differ from the
query itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .dataset import (
    SubtypeLabel,
    GroupId,
    VALID_LABEL,
    build_ann1_dataset,
    build_ann2_dataset,
    feasible_subtypes,
    label_of,
    save_dataset,
)
from .errors import BudgetExceeded, InvariantViolation, ShapeMismatch
from .generator import feasible_triples
from .graph import AdjacencyMatrix, add_unconnected_nodes, save_matrix, save_matrix_records
from .mlp import (
    GROUP_COUNT,
    MlpModel,
    TrainConfig,
    build_ann1,
    build_ann2,
    forward,
    forward_batch,
    load_model,
    save_model,
    train,
)
from .seeding import derive_seed

__all__ = [
    "SubtypePrediction",
    "CandidateBudget",
    "PredictionReport",
    "PipelineConfig",
    "PipelineResult",
    "predict_subtype",
    "enumerate_candidates",
    "filter_candidates",
    "run_pipeline",
    "write_report",
]


@dataclass(frozen=True)
class SubtypePrediction:
    """Argmax subtype for a query, with the full output distribution."""

    group: GroupId
    label: SubtypeLabel
    probability: float
    full_distribution: np.ndarray


def predict_subtype(ann1: MlpModel, g_new: AdjacencyMatrix) -> SubtypePrediction:
    """Classify a padded query matrix; ties break toward the lowest group index."""
    if ann1.output_size != GROUP_COUNT:
        raise ShapeMismatch(f"subtype classifier must have {GROUP_COUNT} outputs, got {ann1.output_size}")
    dist = forward(ann1, g_new.flatten())
    group = GroupId(int(np.argmax(dist)))
    return SubtypePrediction(group, label_of(group), float(dist[group.index]), dist)


@dataclass(frozen=True)
class CandidateBudget:
    """How to walk the candidate space over the query's zero positions."""

    mode: str = "sampled"
    max_candidates: int = 10_000
    seed: int = 0
    exhaustive_ceiling: int = 2 ** 20

    def __post_init__(self):
        if self.mode not in ("exhaustive", "sampled"):
            raise ValueError(f"mode must be 'exhaustive' or 'sampled', got {self.mode!r}")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        if self.exhaustive_ceiling < 1:
            raise ValueError("exhaustive_ceiling must be >= 1")


def _candidate(g_new: AdjacencyMatrix, zeros: np.ndarray, values: np.ndarray) -> AdjacencyMatrix:
    bits = g_new.bits.copy()
    bits[zeros[:, 0], zeros[:, 1]] = values
    return AdjacencyMatrix(bits)


def enumerate_candidates(g_new: AdjacencyMatrix, budget: CandidateBudget) -> Iterator[AdjacencyMatrix]:
    """Stream candidate completions; 1-entries of the query are never touched.

    Exhaustive mode yields all 2^z assignments over the z zero positions in
    ascending bit order (assignment bit t is the t-th zero position in
    row-major order), starting with the query itself. Sampled mode yields
    distinct assignments drawn from a seeded PCG64 stream: uniform draws with
    a seen-set while assignments fit in 64-bit integers, and a random
    XOR-mask walk over bit vectors beyond that.
    """
    zeros = g_new.zero_positions()
    z = int(zeros.shape[0])
    if budget.mode == "exhaustive":
        if 2 ** z > budget.exhaustive_ceiling:
            raise BudgetExceeded(
                f"exhaustive enumeration over {z} zero positions needs 2^{z} candidates, "
                f"ceiling is {budget.exhaustive_ceiling}"
            )
        shifts = np.arange(z, dtype=np.uint64)
        for k in range(2 ** z):
            values = ((np.uint64(k) >> shifts) & np.uint64(1)).astype(np.uint8)
            yield _candidate(g_new, zeros, values)
        return

    rng = np.random.Generator(np.random.PCG64(budget.seed))
    if z == 0:
        yield _candidate(g_new, zeros, np.zeros(0, dtype=np.uint8))
        return
    if z <= 62:
        count = min(budget.max_candidates, 2 ** z)
        shifts = np.arange(z, dtype=np.uint64)
        seen: set[int] = set()
        while len(seen) < count:
            k = int(rng.integers(0, 2 ** z, dtype=np.uint64))
            if k in seen:
                continue
            seen.add(k)
            values = ((np.uint64(k) >> shifts) & np.uint64(1)).astype(np.uint8)
            yield _candidate(g_new, zeros, values)
        return
    # Wide assignments: random-walk by XOR masks, deduplicated by byte string.
    current = rng.integers(0, 2, size=z, dtype=np.uint8)
    seen_bytes: set[bytes] = set()
    while len(seen_bytes) < budget.max_candidates:
        key = current.tobytes()
        if key not in seen_bytes:
            seen_bytes.add(key)
            yield _candidate(g_new, zeros, current)
        current = current ^ rng.integers(0, 2, size=z, dtype=np.uint8)


@dataclass
class PredictionReport:
    """Outcome of candidate filtering, sorted by descending valid probability."""

    accepted: list[tuple[AdjacencyMatrix, float]]
    rejected_count: int
    zero_positions: int
    mode: str
    threshold: float


def filter_candidates(ann2: MlpModel, candidates: Iterable[AdjacencyMatrix],
                      g_new: AdjacencyMatrix, threshold: float = 0.80,
                      mode: str = "exhaustive", batch_size: int = 4096) -> PredictionReport:
    """Score candidates with the discriminator and keep sound completions.

    A candidate is accepted iff its valid-class probability exceeds the
    threshold, it preserves every 1 of the query (violations raise, since
    enumeration guarantees this by construction), and it is not the query
    itself. Ties in probability order by the candidate's bit pattern, so the
    report is independent of evaluation order.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    if ann2.output_size != 2:
        raise ShapeMismatch(f"discriminator must have 2 outputs, got {ann2.output_size}")
    if ann2.input_size != g_new.size * g_new.size:
        raise ShapeMismatch(
            f"discriminator expects {ann2.input_size} inputs, query has {g_new.size * g_new.size}"
        )
    base = g_new.bits
    accepted: list[tuple[AdjacencyMatrix, float]] = []
    scanned = 0
    batch: list[AdjacencyMatrix] = []

    def flush() -> None:
        nonlocal scanned
        if not batch:
            return
        probs = forward_batch(ann2, np.stack([c.flatten() for c in batch]))[:, VALID_LABEL]
        for cand, p in zip(batch, probs):
            scanned += 1
            if not np.all(cand.bits >= base):
                raise InvariantViolation("candidate dropped a 1-entry of the query")
            if p > threshold and cand != g_new:
                accepted.append((cand, float(p)))
        batch.clear()

    for cand in candidates:
        batch.append(cand)
        if len(batch) >= batch_size:
            flush()
    flush()
    accepted.sort(key=lambda item: (-item[1], item[0].key()))
    zero_count = g_new.size * g_new.size - g_new.ones()
    return PredictionReport(accepted, scanned - len(accepted), zero_count, mode, threshold)


@dataclass
class PipelineConfig:
    """Everything a full run needs besides the query matrix itself."""

    outdir: str | Path
    subtypes: list[SubtypeLabel] | None = None
    per_group: int | None = None
    per_class: int = 200
    ann1_train: TrainConfig = field(default_factory=TrainConfig)
    ann2_train: TrainConfig = field(default_factory=TrainConfig)
    budget: CandidateBudget = field(default_factory=CandidateBudget)
    threshold: float = 0.80
    seed: int = 0
    ann1_checkpoint: str | Path | None = None
    ann2_checkpoint: str | Path | None = None


@dataclass
class PipelineResult:
    report: PredictionReport
    prediction: SubtypePrediction
    paths: dict[str, Path]
    ann1_source: str
    ann2_source: str


def write_report(report: PredictionReport, g_new: AdjacencyMatrix, m: int,
                 path: str | Path) -> None:
    """Structured text document: header plus one record per accepted candidate.

    Added links are the candidate's extra 1-entries relative to the query; a
    padded node counts as recovered when the candidate gives it at least one
    incident edge. Formatting is deterministic so equal runs produce equal
    bytes.
    """
    size = g_new.size
    padded = list(range(size - m, size))
    lines = [
        "completion-report v1\n",
        f"matrix-side: {size}\n",
        f"padded-nodes: {' '.join(str(k) for k in padded) if padded else '-'}\n",
        f"threshold: {report.threshold!r}\n",
        f"mode: {report.mode}\n",
        f"zero-positions: {report.zero_positions}\n",
        f"rejected: {report.rejected_count}\n",
        f"accepted: {len(report.accepted)}\n",
    ]
    for idx, (cand, prob) in enumerate(report.accepted):
        added = np.argwhere((cand.bits == 1) & (g_new.bits == 0))
        links = " ".join(f"{i}->{j}" for i, j in added)
        flags = " ".join(
            f"{k}:{'yes' if cand.bits[k, :].any() or cand.bits[:, k].any() else 'no'}"
            for k in padded
        )
        lines.append("---\n")
        lines.append(f"candidate: {idx}\n")
        lines.append(f"probability: {prob!r}\n")
        lines.append(f"added-links: {links if links else '-'}\n")
        lines.append(f"recovered-nodes: {flags if flags else '-'}\n")
    Path(path).write_text("".join(lines))


def run_pipeline(g: AdjacencyMatrix, m: int, config: PipelineConfig) -> PipelineResult:
    """Pad the query, train/load both classifiers, and filter candidates.

    All artifacts (corpora, checkpoints, the padded query, the report, and
    every accepted matrix) are written under config.outdir with fixed names;
    the result maps artifact names to paths. Per-stage seeds derive from
    config.seed, so a repeated run writes byte-identical files.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    g_new = add_unconnected_nodes(g, m)
    side = g_new.size
    per_group = config.per_group if config.per_group is not None else side
    paths: dict[str, Path] = {}

    if config.ann1_checkpoint is not None:
        ann1 = load_model(config.ann1_checkpoint)
        if ann1.input_size != side * side:
            raise ShapeMismatch(
                f"subtype classifier checkpoint expects {ann1.input_size} inputs, need {side * side}"
            )
        ann1_source = "loaded"
        paths["ann1_model"] = Path(config.ann1_checkpoint)
    else:
        ds1 = build_ann1_dataset(side, per_group, derive_seed(config.seed, 11),
                                 subtypes=config.subtypes)
        paths["ann1_dataset"] = outdir / "ann1.ds"
        save_dataset(ds1, paths["ann1_dataset"])
        ann1 = build_ann1(side, seed=derive_seed(config.seed, 12))
        ann1, _ = train(ann1, ds1.inputs, ds1.labels, config.ann1_train)
        ann1_source = "trained"
        paths["ann1_model"] = outdir / "ann1.ckpt"
        save_model(ann1, paths["ann1_model"])

    prediction = predict_subtype(ann1, g_new)
    feasible_triples(prediction.label.x_in, prediction.label.x_out)

    if config.ann2_checkpoint is not None:
        ann2 = load_model(config.ann2_checkpoint)
        if ann2.input_size != side * side:
            raise ShapeMismatch(
                f"discriminator checkpoint expects {ann2.input_size} inputs, need {side * side}"
            )
        ann2_source = "loaded"
        paths["ann2_model"] = Path(config.ann2_checkpoint)
    else:
        invalid_pool = None
        if config.subtypes is not None:
            invalid_pool = [st for st in config.subtypes if st != prediction.label]
        ds2 = build_ann2_dataset(side, prediction.label, config.per_class,
                                 derive_seed(config.seed, 21), invalid_subtypes=invalid_pool)
        paths["ann2_dataset"] = outdir / "ann2.ds"
        save_dataset(ds2, paths["ann2_dataset"])
        ann2 = build_ann2(side, seed=derive_seed(config.seed, 22))
        ann2, _ = train(ann2, ds2.inputs, ds2.labels, config.ann2_train)
        ann2_source = "trained"
        paths["ann2_model"] = outdir / "ann2.ckpt"
        save_model(ann2, paths["ann2_model"])

    candidates = enumerate_candidates(g_new, config.budget)
    report = filter_candidates(ann2, candidates, g_new, config.threshold,
                               mode=config.budget.mode)

    paths["g_new"] = outdir / "gnew.bin"
    save_matrix(g_new, paths["g_new"])
    paths["report"] = outdir / "report.txt"
    write_report(report, g_new, m, paths["report"])
    paths["accepted"] = outdir / "accepted.bin"
    save_matrix_records([cand for cand, _ in report.accepted], paths["accepted"])
    return PipelineResult(report, prediction, paths, ann1_source, ann2_source)

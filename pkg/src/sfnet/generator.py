"""Directed scale-free graph growth and its exponent/offset parameter algebra.

The growth process has three rules chosen i.i.d. per step with probabilities
(alpha, beta, gamma), alpha + beta + gamma = 1:

  alpha: append node v, add edge v -> w with w drawn from the in-attachment
         law  P(w) = (D_in(w) + delta_in) / (n + delta_in * N)
  beta:  add edge v -> w between existing nodes; v is drawn from the
         out-attachment law, w independently from the in-attachment law
  gamma: append node v, add edge w -> v with w drawn from the out-attachment
         law  P(w) = (D_out(w) + delta_out) / (n + delta_out * N)

where n and N are the edge and node counts of the graph before the step.
The in/out degree tails then follow power laws whose exponents are the
closed-form functions of (alpha, beta, gamma, delta_in, delta_out) below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistribution, DegenerateParams, EmptyFeasibleSet, InvalidParams
from .graph import DirectedGraph

__all__ = [
    "GeneratorParams",
    "ExponentTarget",
    "DELTA_MIN",
    "DELTA_MAX",
    "x_in_from_delta",
    "delta_in_from_x",
    "x_out_from_delta",
    "delta_out_from_x",
    "params_from_targets",
    "simplex_triples",
    "feasible_triples",
    "attachment_distribution_in",
    "attachment_distribution_out",
    "GrowthProcess",
    "generate",
]

SIMPLEX_TOL = 1e-9
DELTA_MIN = 0.0
DELTA_MAX = 4.0

# Parameter grids used for dataset synthesis. beta is implied by the simplex
# constraint, so only (alpha, gamma) vary freely.
GRID_ALPHA = tuple(i / 10 for i in range(1, 6))
GRID_BETA = tuple(i / 10 for i in range(1, 9))
GRID_GAMMA = tuple(i / 10 for i in range(1, 6))


@dataclass(frozen=True)
class GeneratorParams:
    """The five growth parameters with their simplex and sign invariants."""

    alpha: float
    beta: float
    gamma: float
    delta_in: float
    delta_out: float

    def __post_init__(self):
        probs = (self.alpha, self.beta, self.gamma)
        if not all(np.isfinite(probs)) or any(p < 0 for p in probs):
            raise InvalidParams(f"alpha/beta/gamma must be finite and >= 0, got {probs}")
        if abs(sum(probs) - 1.0) > SIMPLEX_TOL:
            raise InvalidParams(f"alpha + beta + gamma must equal 1, got {sum(probs)!r}")
        for name, d in (("delta_in", self.delta_in), ("delta_out", self.delta_out)):
            if not np.isfinite(d) or d < 0:
                raise InvalidParams(f"{name} must be finite and >= 0, got {d!r}")

    @property
    def x_in(self) -> float:
        return x_in_from_delta(self.alpha, self.beta, self.gamma, self.delta_in)

    @property
    def x_out(self) -> float:
        return x_out_from_delta(self.alpha, self.beta, self.gamma, self.delta_out)


@dataclass(frozen=True)
class ExponentTarget:
    """A pair of tail-exponent targets inside the supported closed range."""

    x_in: float
    x_out: float

    RANGE = (2.1, 3.0)

    def __post_init__(self):
        lo, hi = self.RANGE
        for name, x in (("x_in", self.x_in), ("x_out", self.x_out)):
            if not (lo <= x <= hi):
                raise InvalidParams(f"{name} must lie in [{lo}, {hi}], got {x!r}")


def x_in_from_delta(alpha: float, beta: float, gamma: float, delta_in: float) -> float:
    """In-degree tail exponent implied by delta_in.

    X_in = (alpha + beta + 1 + delta_in * (alpha + gamma)) / (alpha + beta).
    """
    if alpha + beta <= 0:
        raise DegenerateParams("x_in undefined: alpha + beta = 0")
    if alpha * delta_in + gamma <= 0:
        raise DegenerateParams("in-degree tail law invalid: alpha*delta_in + gamma = 0")
    return (alpha + beta + 1 + delta_in * (alpha + gamma)) / (alpha + beta)


def delta_in_from_x(alpha: float, beta: float, gamma: float, x_in: float) -> float:
    """Inverse of x_in_from_delta; result may be negative (caller checks range).

    delta_in = (X_in * (alpha + beta) - alpha - beta - 1) / (alpha + gamma).
    """
    if alpha + gamma <= 0:
        raise DegenerateParams("delta_in undefined: alpha + gamma = 0")
    return (x_in * (alpha + beta) - alpha - beta - 1) / (alpha + gamma)


def x_out_from_delta(alpha: float, beta: float, gamma: float, delta_out: float) -> float:
    """Out-degree tail exponent implied by delta_out (mirror of x_in_from_delta).

    X_out = (gamma + beta + 1 + delta_out * (alpha + gamma)) / (gamma + beta).
    """
    if gamma + beta <= 0:
        raise DegenerateParams("x_out undefined: gamma + beta = 0")
    if gamma * delta_out + alpha <= 0:
        raise DegenerateParams("out-degree tail law invalid: gamma*delta_out + alpha = 0")
    return (gamma + beta + 1 + delta_out * (alpha + gamma)) / (gamma + beta)


def delta_out_from_x(alpha: float, beta: float, gamma: float, x_out: float) -> float:
    """Inverse of x_out_from_delta; result may be negative (caller checks range).

    delta_out = (X_out * (gamma + beta) - gamma - beta - 1) / (alpha + gamma).
    """
    if alpha + gamma <= 0:
        raise DegenerateParams("delta_out undefined: alpha + gamma = 0")
    return (x_out * (gamma + beta) - gamma - beta - 1) / (alpha + gamma)


def params_from_targets(alpha: float, beta: float, gamma: float,
                        x_in: float, x_out: float) -> GeneratorParams:
    """Solve the offset relations for the requested tail exponents.

    Raises InvalidParams when either derived offset is negative, i.e. the
    target exponent is unreachable for this (alpha, beta, gamma).
    """
    d_in = delta_in_from_x(alpha, beta, gamma, x_in)
    d_out = delta_out_from_x(alpha, beta, gamma, x_out)
    if d_in < 0 or d_out < 0:
        raise InvalidParams(
            f"targets unreachable for alpha={alpha}, beta={beta}, gamma={gamma}: "
            f"derived delta_in={d_in:.6g}, delta_out={d_out:.6g} (both must be >= 0)"
        )
    return GeneratorParams(alpha, beta, gamma, d_in, d_out)


def simplex_triples() -> list[tuple[float, float, float]]:
    """All (alpha, beta, gamma) grid triples summing to 1, lexicographic by alpha then gamma."""
    out = []
    for ai in range(1, 6):
        for gi in range(1, 6):
            bi = 10 - ai - gi
            if 1 <= bi <= 8:
                out.append((ai / 10, bi / 10, gi / 10))
    return out


def feasible_triples(x_in: float, x_out: float) -> list[GeneratorParams]:
    """Grid triples whose derived offsets both land in [DELTA_MIN, DELTA_MAX].

    Boundary comparisons use the simplex tolerance so exact-boundary offsets
    (e.g. a derived delta of 0.0 or 4.0) are kept. Raises EmptyFeasibleSet
    when no triple qualifies, which means the exponent pair cannot be
    generated from the grid at all.
    """
    found = []
    for alpha, beta, gamma in simplex_triples():
        d_in = delta_in_from_x(alpha, beta, gamma, x_in)
        d_out = delta_out_from_x(alpha, beta, gamma, x_out)
        if (DELTA_MIN - SIMPLEX_TOL <= d_in <= DELTA_MAX + SIMPLEX_TOL
                and DELTA_MIN - SIMPLEX_TOL <= d_out <= DELTA_MAX + SIMPLEX_TOL):
            d_in = min(max(d_in, DELTA_MIN), DELTA_MAX)
            d_out = min(max(d_out, DELTA_MIN), DELTA_MAX)
            found.append(GeneratorParams(alpha, beta, gamma, d_in, d_out))
    if not found:
        raise EmptyFeasibleSet(
            f"no (alpha, beta, gamma) grid triple reaches x_in={x_in}, x_out={x_out} "
            f"with both offsets in [{DELTA_MIN}, {DELTA_MAX}]"
        )
    return found


def _attachment(degrees: np.ndarray, delta: float, edge_count: int, node_count: int) -> np.ndarray:
    if node_count == 0:
        raise DegenerateDistribution("attachment distribution over an empty graph")
    total = edge_count + delta * node_count
    if total <= 0:
        raise DegenerateDistribution("all attachment weights are zero (no edges and delta = 0)")
    return (degrees + delta) / total


def attachment_distribution_in(g: DirectedGraph, delta_in: float) -> np.ndarray:
    """P(w) = (D_in(w) + delta_in) / (n + delta_in * N) over all nodes of g."""
    in_deg = np.bincount(g.edges[:, 1], minlength=g.node_count).astype(np.float64)
    return _attachment(in_deg, delta_in, g.edge_count, g.node_count)


def attachment_distribution_out(g: DirectedGraph, delta_out: float) -> np.ndarray:
    """P(w) = (D_out(w) + delta_out) / (n + delta_out * N) over all nodes of g."""
    out_deg = np.bincount(g.edges[:, 0], minlength=g.node_count).astype(np.float64)
    return _attachment(out_deg, delta_out, g.edge_count, g.node_count)


class GrowthProcess:
    """Incremental growth state, one rule application per `step` call.

    The seed graph is a single node with a self-loop, which keeps both
    attachment laws well-defined from the first step even with zero offsets.
    Randomness comes from numpy's PCG64 stream seeded once at construction;
    endpoint draws invert the cumulative weight sum exactly, and a beta step
    draws the source before the target. Equal (params, seed) therefore
    replays the identical edge sequence.
    """

    def __init__(self, params: GeneratorParams, seed: int):
        self.params = params
        self._rng = np.random.Generator(np.random.PCG64(seed))
        cap = 1024
        self._in = np.zeros(cap, dtype=np.float64)
        self._out = np.zeros(cap, dtype=np.float64)
        self._src = np.zeros(cap, dtype=np.int64)
        self._tgt = np.zeros(cap, dtype=np.int64)
        self._in[0] = 1.0
        self._out[0] = 1.0
        self._nodes = 1
        self._edges = 1

    @property
    def node_count(self) -> int:
        return self._nodes

    @property
    def edge_count(self) -> int:
        return self._edges

    def snapshot(self) -> DirectedGraph:
        edges = np.column_stack((self._src[: self._edges], self._tgt[: self._edges]))
        return DirectedGraph(self._nodes, edges)

    def _grow(self, arr: np.ndarray) -> np.ndarray:
        new = np.zeros(arr.shape[0] * 2, dtype=arr.dtype)
        new[: arr.shape[0]] = arr
        return new

    def _draw(self, degrees: np.ndarray, delta: float) -> int:
        weights = degrees[: self._nodes] + delta
        cum = np.cumsum(weights)
        r = self._rng.random() * cum[-1]
        return int(np.searchsorted(cum, r, side="right"))

    def _append_node(self) -> int:
        if self._nodes == self._in.shape[0]:
            self._in = self._grow(self._in)
            self._out = self._grow(self._out)
        idx = self._nodes
        self._nodes += 1
        return idx

    def _append_edge(self, src: int, tgt: int) -> None:
        if self._edges == self._src.shape[0]:
            self._src = self._grow(self._src)
            self._tgt = self._grow(self._tgt)
        self._src[self._edges] = src
        self._tgt[self._edges] = tgt
        self._edges += 1
        self._out[src] += 1.0
        self._in[tgt] += 1.0

    def step(self) -> str:
        """Apply one growth rule; returns which rule fired ('alpha'/'beta'/'gamma')."""
        p = self.params
        u = self._rng.random()
        if u < p.alpha:
            w = self._draw(self._in, p.delta_in)
            v = self._append_node()
            self._append_edge(v, w)
            return "alpha"
        if u < p.alpha + p.beta:
            v = self._draw(self._out, p.delta_out)
            w = self._draw(self._in, p.delta_in)
            self._append_edge(v, w)
            return "beta"
        w = self._draw(self._out, p.delta_out)
        v = self._append_node()
        self._append_edge(w, v)
        return "gamma"


def generate(params: GeneratorParams, target_nodes: int, seed: int) -> DirectedGraph:
    """Run the growth process until the graph has exactly target_nodes nodes.

    Stops the first time the node count reaches the target (a beta step never
    terminates growth). Deterministic: equal (params, target_nodes, seed)
    produce equal edge sequences.
    """
    if target_nodes < 1:
        raise InvalidParams(f"target_nodes must be >= 1, got {target_nodes}")
    if target_nodes > 1 and params.alpha + params.gamma <= 0:
        raise InvalidParams("node count cannot grow: alpha + gamma = 0")
    proc = GrowthProcess(params, seed)
    while proc.node_count < target_nodes:
        proc.step()
    return proc.snapshot()

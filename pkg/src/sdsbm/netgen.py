"""Block-structured dynamic network generation and the network file format.

Nodes carry one of k types; each unordered type pair (a, b) with a <= b is
a block whose edge density follows its own seasonal process. Networks are
undirected with no self-loops. Counts are the primary observation; full
adjacency snapshots are optional payload.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .rng import RngStream, block_stream
from .seasonal import (
    NoiseParams,
    SeasonalState,
    init_state,
    process_value,
    sample_density,
    state_vector,
    step_state,
)

SCHEMA_VERSION = 1


def possible_edges(na: int, nb: int, same_type: bool) -> int:
    """Dyad count for a block: na*(na-1)/2 within a type, na*nb across."""
    if na < 1 or nb < 1:
        raise ValidationError(f"node counts must be >= 1, got ({na}, {nb})")
    if same_type:
        if na != nb:
            raise ValidationError(f"same-type block needs na == nb, got ({na}, {nb})")
        return na * (na - 1) // 2
    return na * nb


def enumerate_block_pairs(k: int) -> list[tuple[int, int]]:
    """All unordered type pairs including self-pairs, lexicographic."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    return [(a, b) for a in range(k) for b in range(a, k)]


@dataclass(frozen=True)
class BlockSpec:
    """Generation parameters for one block pair."""

    type_a: int
    type_b: int
    n: int
    init_state: SeasonalState
    noise: NoiseParams

    def __post_init__(self):
        if self.type_a < 0 or self.type_b < self.type_a:
            raise ValidationError(
                f"block pair must satisfy 0 <= a <= b, got ({self.type_a}, {self.type_b})"
            )
        if self.n < 1:
            raise ValidationError(
                f"block ({self.type_a}, {self.type_b}) needs n >= 1, got {self.n}"
            )


@dataclass
class NetworkConfig:
    """Full generation configuration.

    ``blocks`` may cover all k*(k+1)/2 pairs or any subset of them; each
    block draws from its own random stream, so subsets regenerate
    identically. ``nodes_per_type`` is required for adjacency sampling and,
    when present, each block's ``n`` must match :func:`possible_edges`.
    """

    k: int
    d: int
    T: int
    seed: int
    blocks: list[BlockSpec]
    nodes_per_type: tuple[int, ...] | None = None
    with_adjacency: bool = False
    with_truth: bool = True
    generator_params: dict = field(default_factory=dict)

    def validate(self):
        errors = []
        if self.k < 1:
            errors.append(f"k must be >= 1, got {self.k}")
        if self.T < 1:
            errors.append(f"T must be >= 1, got {self.T}")
        if self.d < 2:
            errors.append(f"d must be >= 2, got {self.d}")
        if self.seed < 0:
            errors.append(f"seed must be >= 0, got {self.seed}")
        if not self.blocks:
            errors.append("no blocks configured")
        pairs = [(b.type_a, b.type_b) for b in self.blocks]
        if len(set(pairs)) != len(pairs):
            errors.append("duplicate block pairs")
        if pairs != sorted(pairs):
            errors.append("blocks must be in lexicographic pair order")
        for b in self.blocks:
            if b.type_b >= self.k:
                errors.append(f"block pair ({b.type_a}, {b.type_b}) out of range for k={self.k}")
            if b.init_state.period != self.d:
                errors.append(
                    f"block ({b.type_a}, {b.type_b}) has period {b.init_state.period}, expected {self.d}"
                )
        if self.nodes_per_type is not None:
            if len(self.nodes_per_type) != self.k:
                errors.append(
                    f"nodes_per_type has {len(self.nodes_per_type)} entries for k={self.k}"
                )
            else:
                for b in self.blocks:
                    expected = possible_edges(
                        self.nodes_per_type[b.type_a],
                        self.nodes_per_type[b.type_b],
                        b.type_a == b.type_b,
                    )
                    if b.n != expected:
                        errors.append(
                            f"block ({b.type_a}, {b.type_b}) has n={b.n}, "
                            f"but node counts give {expected}"
                        )
        if self.with_adjacency and self.nodes_per_type is None:
            errors.append("adjacency sampling requires nodes_per_type")
        if errors:
            raise ValidationError("; ".join(errors))

    @classmethod
    def uniform(cls, k: int, d: int, T: int, seed: int, m0: float,
                period_offsets, noise: NoiseParams,
                block_n: int | None = None,
                nodes_per_type: tuple[int, ...] | None = None,
                with_adjacency: bool = False,
                with_truth: bool = True) -> "NetworkConfig":
        """Same seasonal process and size for every pair of the k types."""
        if (block_n is None) == (nodes_per_type is None):
            raise ValidationError("give exactly one of block_n or nodes_per_type")
        state0 = init_state(m0, period_offsets)
        blocks = []
        for a, b in enumerate_block_pairs(k):
            if block_n is not None:
                n = block_n
            else:
                n = possible_edges(nodes_per_type[a], nodes_per_type[b], a == b)
            blocks.append(BlockSpec(a, b, n, state0, noise))
        params = {
            "m0": float(m0),
            "period_offsets": [float(v) for v in period_offsets],
            "q_m": noise.q_m,
            "q_s": noise.q_s,
            "r": noise.r,
        }
        if block_n is not None:
            params["block_n"] = block_n
        if nodes_per_type is not None:
            params["nodes_per_type"] = list(nodes_per_type)
        cfg = cls(k=k, d=d, T=T, seed=seed, blocks=blocks,
                  nodes_per_type=tuple(nodes_per_type) if nodes_per_type else None,
                  with_adjacency=with_adjacency, with_truth=with_truth,
                  generator_params=params)
        cfg.validate()
        return cfg


@dataclass(eq=False)
class BlockSeries:
    """Observed edge counts for one block."""

    type_a: int
    type_b: int
    n: int
    counts: np.ndarray  # int64, shape (T,)


@dataclass(eq=False)
class TruthBlock:
    """Generation-time ground truth for one block."""

    type_a: int
    type_b: int
    states: np.ndarray     # (T, d) latent state per step
    densities: np.ndarray  # (T,) sampled density per step


@dataclass(eq=False)
class DynamicNetwork:
    """Per-block count series with optional adjacency and ground truth."""

    k: int
    d: int
    T: int
    seed: int
    blocks: list[BlockSeries]
    adjacency: list[list[tuple[str, str]]] | None = None
    truth: list[TruthBlock] | None = None
    generator_params: dict = field(default_factory=dict)

    def block(self, type_a: int, type_b: int) -> BlockSeries:
        for b in self.blocks:
            if (b.type_a, b.type_b) == (type_a, type_b):
                return b
        raise ValidationError(f"no block ({type_a}, {type_b}) in network")

    def truth_block(self, type_a: int, type_b: int) -> TruthBlock:
        if self.truth is None:
            raise ValidationError("network carries no ground-truth record")
        for tb in self.truth:
            if (tb.type_a, tb.type_b) == (type_a, type_b):
                return tb
        raise ValidationError(f"no truth for block ({type_a}, {type_b})")


def sample_block_count(E: float, n: int, rng: RngStream) -> int:
    """Number of formed edges: one Binomial(n, E) draw."""
    if not 0.0 <= E <= 1.0:
        raise ValidationError(f"density must be in [0, 1], got {E}")
    return int(rng.binomial(n, E))


def sample_block_adjacency(E: float, na: int, nb: int, same_type: bool,
                           rng: RngStream) -> list[tuple[int, int]]:
    """Independent Bernoulli(E) draw per dyad; returns local index pairs.

    Same-type blocks draw only i < j dyads (undirected, no self-loops).
    """
    if not 0.0 <= E <= 1.0:
        raise ValidationError(f"density must be in [0, 1], got {E}")
    m = possible_edges(na, nb, same_type)
    keep = np.nonzero(rng.random(m) < E)[0]
    return _dyads(keep, na, nb, same_type)


def _dyads(indices: np.ndarray, na: int, nb: int, same_type: bool) -> list[tuple[int, int]]:
    """Map flat dyad indices to (i, j) pairs of the canonical enumeration:
    row-major (i, j) across types, lexicographic i < j within a type."""
    if not same_type:
        return list(zip((indices // nb).tolist(), (indices % nb).tolist()))
    starts = np.zeros(na, dtype=np.int64)
    np.cumsum(np.arange(na - 1, 0, -1), out=starts[1:])
    i = np.searchsorted(starts, indices, side="right") - 1
    j = indices - starts[i] + i + 1
    return list(zip(i.tolist(), j.tolist()))


def _edges_for_count(count: int, na: int, nb: int, same_type: bool,
                     rng: RngStream) -> list[tuple[int, int]]:
    """Uniform subset of dyads of the given size.

    Conditioned on the count, independent Bernoulli dyads are uniform over
    subsets, so drawing the count first and the subset second matches the
    per-dyad model while keeping counts identical whether or not adjacency
    is recorded.
    """
    m = possible_edges(na, nb, same_type)
    chosen = np.sort(rng.choice(m, size=count, replace=False))
    return _dyads(chosen, na, nb, same_type)


def generate(config: NetworkConfig) -> DynamicNetwork:
    """Sample a dynamic network (and its truth record) from the model.

    Blocks evolve independently on streams derived from (seed, pair), so
    results do not depend on block iteration order or on which other
    blocks are present.
    """
    config.validate()
    T, d = config.T, config.d
    blocks: list[BlockSeries] = []
    truths: list[TruthBlock] = []
    adjacency: list[list[tuple[str, str]]] | None = None
    if config.with_adjacency:
        adjacency = [[] for _ in range(T)]

    for spec in config.blocks:
        rng = block_stream(config.seed, spec.type_a, spec.type_b)
        state = spec.init_state
        counts = np.empty(T, dtype=np.int64)
        states = np.empty((T, d))
        densities = np.empty(T)
        same = spec.type_a == spec.type_b
        if config.with_adjacency:
            na = config.nodes_per_type[spec.type_a]
            nb = config.nodes_per_type[spec.type_b]
        for t in range(T):
            state = step_state(state, spec.noise, rng)
            c = process_value(state)
            E = sample_density(c, spec.noise.r, rng)
            w = sample_block_count(E, spec.n, rng)
            counts[t] = w
            states[t] = state_vector(state)
            densities[t] = E
            if config.with_adjacency:
                for i, j in _edges_for_count(w, na, nb, same, rng):
                    adjacency[t].append(
                        (f"{spec.type_a}:{i}", f"{spec.type_b}:{j}")
                    )
        blocks.append(BlockSeries(spec.type_a, spec.type_b, spec.n, counts))
        if config.with_truth:
            truths.append(TruthBlock(spec.type_a, spec.type_b, states, densities))

    return DynamicNetwork(
        k=config.k, d=d, T=T, seed=config.seed, blocks=blocks,
        adjacency=adjacency, truth=truths if config.with_truth else None,
        generator_params=dict(config.generator_params),
    )


def block_counts_from_adjacency(snapshots, node_types, k: int | None = None):
    """Recompute per-block count series from adjacency snapshots.

    ``snapshots`` is a sequence over time of edge lists; ``node_types``
    maps node id to type. Returns {(a, b): int64 array of length T} over
    all pairs of the k observed (or given) types.
    """
    node_types = dict(node_types)
    if k is None:
        k = max(node_types.values(), default=-1) + 1
        if k < 1:
            raise ValidationError("node typing is empty")
    T = len(snapshots)
    counts = {pair: np.zeros(T, dtype=np.int64) for pair in enumerate_block_pairs(k)}
    for t, edges in enumerate(snapshots):
        for u, v in edges:
            for node in (u, v):
                if node not in node_types:
                    raise ValidationError(f"unknown node id {node!r} at step {t + 1}")
            a, b = sorted((node_types[u], node_types[v]))
            counts[(a, b)][t] += 1
    return counts


def network_node_types(net: DynamicNetwork) -> dict[str, int]:
    """Node typing for a generated network's ``<type>:<index>`` ids."""
    if net.adjacency is None:
        raise ValidationError("network has no adjacency record")
    types: dict[str, int] = {}
    for edges in net.adjacency:
        for u, v in edges:
            for node in (u, v):
                types[node] = int(node.split(":", 1)[0])
    return types


def _require(mapping, key, context):
    if key not in mapping:
        raise ValidationError(f"network file: missing {key!r} in {context}")
    return mapping[key]


def write_network(net: DynamicNetwork, path) -> None:
    """Serialize to the versioned JSON network format (lossless)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "meta": {
            "k": net.k, "d": net.d, "T": net.T, "seed": net.seed,
            "generator_params": net.generator_params,
        },
        "blocks": [
            {"type_a": b.type_a, "type_b": b.type_b, "n": b.n,
             "counts": [int(c) for c in b.counts]}
            for b in net.blocks
        ],
    }
    if net.adjacency is not None:
        doc["adjacency"] = [
            {"t": t + 1, "edges": [[u, v] for u, v in edges]}
            for t, edges in enumerate(net.adjacency)
        ]
    if net.truth is not None:
        doc["truth"] = {
            "blocks": [
                {"type_a": tb.type_a, "type_b": tb.type_b,
                 "states": [[float(x) for x in row] for row in tb.states],
                 "densities": [float(v) for v in tb.densities]}
                for tb in net.truth
            ]
        }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def read_network(path) -> DynamicNetwork:
    """Parse and validate a network file written by :func:`write_network`."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"network file: invalid JSON at line {exc.lineno}: {exc.msg}") from exc

    version = _require(doc, "schema_version", "document")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"network file: schema_version {version} unsupported (expected {SCHEMA_VERSION})"
        )
    meta = _require(doc, "meta", "document")
    k = int(_require(meta, "k", "meta"))
    d = int(_require(meta, "d", "meta"))
    T = int(_require(meta, "T", "meta"))
    seed = int(_require(meta, "seed", "meta"))

    blocks = []
    for entry in _require(doc, "blocks", "document"):
        a = int(_require(entry, "type_a", "block"))
        b = int(_require(entry, "type_b", "block"))
        context = f"block ({a}, {b})"
        n = int(_require(entry, "n", context))
        counts = np.asarray(_require(entry, "counts", context), dtype=np.int64)
        if counts.shape != (T,):
            raise ValidationError(
                f"network file: {context} has {counts.size} counts, expected T={T}"
            )
        if counts.min(initial=0) < 0 or counts.max(initial=0) > n:
            raise ValidationError(
                f"network file: {context} has counts outside [0, n={n}]"
            )
        blocks.append(BlockSeries(a, b, n, counts))

    adjacency = None
    if "adjacency" in doc:
        adjacency = [[] for _ in range(T)]
        for snap in doc["adjacency"]:
            t = int(_require(snap, "t", "adjacency snapshot"))
            if not 1 <= t <= T:
                raise ValidationError(f"network file: adjacency step {t} outside 1..{T}")
            adjacency[t - 1] = [tuple(e) for e in _require(snap, "edges", f"adjacency t={t}")]

    truth = None
    if "truth" in doc:
        truth = []
        for entry in _require(doc["truth"], "blocks", "truth"):
            a = int(_require(entry, "type_a", "truth block"))
            b = int(_require(entry, "type_b", "truth block"))
            context = f"truth block ({a}, {b})"
            states = np.asarray(_require(entry, "states", context), dtype=float)
            densities = np.asarray(_require(entry, "densities", context), dtype=float)
            if states.shape != (T, d):
                raise ValidationError(
                    f"network file: {context} states shape {states.shape}, expected ({T}, {d})"
                )
            if densities.shape != (T,):
                raise ValidationError(
                    f"network file: {context} has {densities.size} densities, expected {T}"
                )
            truth.append(TruthBlock(a, b, states, densities))

    return DynamicNetwork(
        k=k, d=d, T=T, seed=seed, blocks=blocks, adjacency=adjacency,
        truth=truth, generator_params=dict(meta.get("generator_params", {})),
    )

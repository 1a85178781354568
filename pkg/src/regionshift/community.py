"""Modularity and Louvain community detection on :class:`WeightedGraph`.

The Louvain procedure alternates two phases: nodes are moved one at a time
to the neighbouring community with the largest modularity gain until no
move gains at least ``min_gain``, then every community is collapsed into a
single node and the process repeats on the smaller graph. It stops when a
level produces no move.

Runs are fully deterministic. Nodes are visited in lexicographic order
unless ``node_order="shuffled"``, in which case each restart draws its own
order from a child of the root seed. Equal gains go to the smallest
community id.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import GraphError, WeightedGraph

__all__ = [
    "Partition",
    "LouvainConfig",
    "LouvainRun",
    "PartitionSummary",
    "modularity",
    "louvain",
    "louvain_run",
    "aggregate_by_partition",
    "partition_summary",
    "read_partition_csv",
    "write_partition_csv",
]


def canonical_labels(labels: Sequence[int] | np.ndarray) -> np.ndarray:
    """Relabel so ids are 0..k-1 in order of first occurrence."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.reshape(-1)]


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of every node to one community.

    ``nodes`` is sorted and ``labels[i]`` is the community of ``nodes[i]``.
    Labels are canonical: community ``c`` is the ``c``-th distinct community
    met when walking the nodes in lexicographic order.
    """

    nodes: tuple[str, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.nodes) != len(self.labels):
            raise GraphError("partition nodes and labels differ in length")

    @classmethod
    def from_mapping(cls, assignment: Mapping[str, object]) -> "Partition":
        """Build a canonical partition from any ``{unit: label}`` mapping."""
        nodes = tuple(sorted(assignment))
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate unit ids in partition")
        codes: dict[object, int] = {}
        raw = [codes.setdefault(assignment[n], len(codes)) for n in nodes]
        return cls(nodes, tuple(raw))

    @classmethod
    def from_labels(cls, nodes: Sequence[str], labels: Sequence[int] | np.ndarray) -> "Partition":
        return cls.from_mapping(dict(zip(nodes, np.asarray(labels).tolist())))

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[str]]) -> "Partition":
        assignment: dict[str, int] = {}
        for c, group in enumerate(groups):
            for node in group:
                if node in assignment:
                    raise GraphError(f"unit {node!r} appears in more than one group")
                assignment[node] = c
        return cls.from_mapping(assignment)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_communities(self) -> int:
        return max(self.labels) + 1 if self.labels else 0

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.nodes, self.labels))

    def labels_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int64)

    def groups(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.n_communities)]
        for node, c in zip(self.nodes, self.labels):
            out[c].append(node)
        return out

    def sizes(self) -> list[int]:
        return np.bincount(self.labels_array(), minlength=self.n_communities).tolist()

    def restrict(self, keep: Iterable[str]) -> "Partition":
        keep = set(keep)
        return Partition.from_mapping({n: c for n, c in zip(self.nodes, self.labels) if n in keep})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.nodes == other.nodes and self.labels == other.labels

    def __hash__(self) -> int:
        return hash((self.nodes, self.labels))


@dataclass(frozen=True)
class LouvainConfig:
    resolution: float = 1.0
    seed: int = 0
    restarts: int = 10
    min_gain: float = 1e-10
    node_order: str = "fixed"

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not self.min_gain > 0:
            raise ValueError("min_gain must be positive")
        if self.node_order not in ("fixed", "shuffled"):
            raise ValueError("node_order must be 'fixed' or 'shuffled'")


@dataclass
class LouvainRun:
    """Outcome of a single Louvain run.

    ``trace`` holds one ``(incremental_q, recomputed_q)`` pair per level:
    the modularity tracked from accumulated move gains and the same value
    recomputed from scratch on the original graph.
    """

    partition: Partition
    quality: float
    trace: list[tuple[float, float]] = field(default_factory=list)


# -- modularity ----------------------------------------------------------------


def _check_partition(graph: WeightedGraph, partition: Partition) -> np.ndarray:
    if partition.nodes != graph.nodes:
        missing = set(graph.nodes) - set(partition.nodes)
        extra = set(partition.nodes) - set(graph.nodes)
        raise GraphError(
            f"partition does not cover the graph: {len(missing)} node(s) missing "
            f"{sorted(missing)[:5]}, {len(extra)} unknown {sorted(extra)[:5]}"
        )
    return partition.labels_array()


def _modularity_arrays(u, v, w, labels, k_communities, m, resolution) -> float:
    """Q = sum_c [L_c/m - gamma (K_c/2m)^2] with order-independent sums."""
    cu, cv = labels[u], labels[v]
    internal = cu == cv
    order = np.argsort(cu[internal], kind="stable")
    inside_w = w[internal][order]
    bounds = np.searchsorted(cu[internal][order], np.arange(k_communities + 1))
    inner = [math.fsum(inside_w[bounds[c]:bounds[c + 1]].tolist()) for c in range(k_communities)]

    ends = np.concatenate([cu, cv])
    ends_w = np.concatenate([w, w])
    order = np.argsort(ends, kind="stable")
    ends_w = ends_w[order]
    bounds = np.searchsorted(ends[order], np.arange(k_communities + 1))
    totals = [math.fsum(ends_w[bounds[c]:bounds[c + 1]].tolist()) for c in range(k_communities)]

    two_m = 2.0 * m
    return math.fsum(x / m for x in inner) - resolution * math.fsum((t / two_m) ** 2 for t in totals)


def modularity(graph: WeightedGraph, partition: Partition, resolution: float = 1.0) -> float:
    """Weighted modularity of ``partition`` at the given resolution.

    Self-loops count once towards the internal weight of their community and
    twice towards its total strength, so placing every node in a single
    community always scores zero at resolution 1.
    """
    labels = _check_partition(graph, partition)
    m = graph.total_weight
    if m <= 0:
        raise GraphError("modularity is undefined on a graph with zero total weight")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    return _modularity_arrays(graph.u, graph.v, graph.weight, labels, partition.n_communities, m, resolution)


# -- Louvain -------------------------------------------------------------------


def _neighbours(u, v, w, n):
    mask = u != v
    a, b, x = u[mask], v[mask], w[mask]
    rows = np.concatenate([a, b])
    cols = np.concatenate([b, a])
    data = np.concatenate([x, x])
    order = np.lexsort((cols, rows))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return indptr, cols[order], data[order]


def _strengths(u, v, w, n):
    return np.bincount(u, weights=w, minlength=n) + np.bincount(v, weights=w, minlength=n)


def _local_moving(indptr, cols, data, k, m, resolution, order, min_gain):
    """Greedy single-node moves; returns (labels, n_moves, gain)."""
    n = len(k)
    comm = np.arange(n)
    tot = k.astype(np.float64).copy()
    scale = resolution / (2.0 * m)
    # plain lists: per-node work is small and Python scalars beat numpy here
    comm_l = comm.tolist()
    tot_l = tot.tolist()
    k_l = k.tolist()
    indptr_l = indptr.tolist()
    cols_l = cols.tolist()
    data_l = data.tolist()
    moves = 0
    gained = 0.0
    while True:
        pass_moves = 0
        for i in order:
            ci = comm_l[i]
            ki = k_l[i]
            links: dict[int, float] = {}
            for p in range(indptr_l[i], indptr_l[i + 1]):
                c = comm_l[cols_l[p]]
                links[c] = links.get(c, 0.0) + data_l[p]
            tot_l[ci] -= ki
            own = (links.get(ci, 0.0) - scale * tot_l[ci] * ki) / m
            best_c, best = ci, -math.inf
            for c, kin in links.items():
                g = (kin - scale * tot_l[c] * ki) / m
                if g > best or (g == best and c < best_c):
                    best_c, best = c, g
            if best_c != ci and best - own >= min_gain:
                comm_l[i] = best_c
                tot_l[best_c] += ki
                gained += best - own
                pass_moves += 1
            else:
                tot_l[ci] += ki
        moves += pass_moves
        if pass_moves == 0:
            break
    return np.asarray(comm_l, dtype=np.int64), moves, gained


def _collapse(u, v, w, labels, k_new):
    a, b = labels[u], labels[v]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    key = lo * k_new + hi
    uniq, inverse = np.unique(key, return_inverse=True)
    weights = np.bincount(inverse.reshape(-1), weights=w, minlength=len(uniq))
    return uniq // k_new, uniq % k_new, weights


def louvain_run(graph: WeightedGraph, config: LouvainConfig, order_rng: np.random.Generator | None = None) -> LouvainRun:
    """One Louvain run; ``order_rng`` shuffles the visit order at every level."""
    m = graph.total_weight
    if graph.n_nodes == 0 or m <= 0:
        raise GraphError("louvain needs a non-empty graph with positive total weight")
    u, v, w = graph.u, graph.v, graph.weight
    n = graph.n_nodes
    membership = np.arange(n)
    singletons = Partition(graph.nodes, tuple(range(n)))
    q = modularity(graph, singletons, config.resolution)
    trace: list[tuple[float, float]] = []

    while True:
        indptr, cols, data = _neighbours(u, v, w, n)
        k = _strengths(u, v, w, n)
        order = order_rng.permutation(n).tolist() if order_rng is not None else list(range(n))
        labels, moves, gained = _local_moving(indptr, cols, data, k, m, config.resolution, order, config.min_gain)
        if moves == 0:
            break
        labels = canonical_labels(labels)
        n_new = int(labels.max()) + 1
        membership = labels[membership]
        q += gained
        recomputed = _modularity_arrays(graph.u, graph.v, graph.weight, membership, n_new, m, config.resolution)
        trace.append((q, recomputed))
        q = recomputed
        u, v, w = _collapse(u, v, w, labels, n_new)
        if n_new == n:
            break
        n = n_new

    partition = Partition.from_labels(graph.nodes, membership)
    return LouvainRun(partition, modularity(graph, partition, config.resolution), trace)


def _seed_sequence(seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed & 0xFFFFFFFFFFFFFFFF)


def louvain(graph: WeightedGraph, config: LouvainConfig = LouvainConfig(), workers: int = 1) -> tuple[Partition, float]:
    """Best of ``config.restarts`` Louvain runs.

    With ``node_order="fixed"`` every restart would repeat the same run, so
    a single run is made. Shuffled restarts may run on ``workers`` threads;
    the winner (highest modularity, then the smaller canonical label
    sequence) does not depend on completion order.
    """
    if graph.n_nodes == 0:
        raise GraphError("louvain needs a non-empty graph")
    if config.node_order == "fixed":
        run = louvain_run(graph, config)
        return run.partition, run.quality

    rngs = [np.random.default_rng(s) for s in _seed_sequence(config.seed).spawn(config.restarts)]
    if workers > 1 and config.restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda r: louvain_run(graph, config, r), rngs))
    else:
        runs = [louvain_run(graph, config, r) for r in rngs]
    best = min(runs, key=lambda r: (-r.quality, r.partition.labels))
    return best.partition, best.quality


def aggregate_by_partition(graph: WeightedGraph, partition: Partition) -> WeightedGraph:
    """Collapse each community into one node.

    Community ``c`` becomes node ``str(c)`` zero-padded to a common width,
    so lexicographic node order matches community order. Edges inside a
    community (self-loops included) become its self-loop.
    """
    labels = _check_partition(graph, partition)
    k = partition.n_communities
    width = len(str(max(k - 1, 0)))
    names = [str(c).zfill(width) for c in range(k)]
    # fsum keeps the coarse weights independent of edge order
    pairs: dict[tuple[str, str], list[float]] = {}
    la, lb = labels[graph.u].tolist(), labels[graph.v].tolist()
    for x, y, wt in zip(la, lb, graph.weight.tolist()):
        key = (names[min(x, y)], names[max(x, y)])
        pairs.setdefault(key, []).append(wt)
    return WeightedGraph._build(names, {key: math.fsum(ws) for key, ws in pairs.items()})


@dataclass(frozen=True)
class PartitionSummary:
    num_communities: int
    sizes: list[int]
    modularity: float
    resolution: float

    def as_dict(self) -> dict:
        return {
            "num_communities": self.num_communities,
            "modularity": self.modularity,
            "resolution": self.resolution,
            "sizes": list(self.sizes),
        }


def partition_summary(partition: Partition, graph: WeightedGraph, resolution: float = 1.0) -> PartitionSummary:
    return PartitionSummary(
        num_communities=partition.n_communities,
        sizes=partition.sizes(),
        modularity=modularity(graph, partition, resolution),
        resolution=resolution,
    )


# -- partition files -----------------------------------------------------------


def write_partition_csv(partition: Partition, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["unit_id", "community_id"])
        writer.writerows(zip(partition.nodes, partition.labels))


def read_partition_csv(path: str | os.PathLike, unit: str = "unit_id", community: str = "community_id") -> Partition:
    assignment: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or unit not in reader.fieldnames or community not in reader.fieldnames:
            raise GraphError(f"{path}: expected columns {unit!r}, {community!r}, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            node = (row[unit] or "").strip()
            label = (row[community] or "").strip()
            if not node or not label:
                raise GraphError(f"{path} line {lineno}: empty value")
            if node in assignment:
                raise GraphError(f"{path} line {lineno}: duplicate unit {node!r}")
            assignment[node] = label
    if not assignment:
        raise GraphError(f"{path}: empty partition")
    return Partition.from_mapping(assignment)

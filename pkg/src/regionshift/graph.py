"""Undirected weighted graphs over geographic unit ids.

Flow tables (origin, destination, weight) are folded into an undirected
graph, optionally rolled up to a coarser geography with a crosswalk, and
restricted to the node set two periods share before their partitions are
compared.
"""

from __future__ import annotations

import csv
import io
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, TextIO

import numpy as np

__all__ = [
    "GraphError",
    "WeightedGraph",
    "Crosswalk",
    "ingest_edge_list",
    "read_edge_list",
    "aggregate",
    "restrict_to_common",
    "dump_edge_list",
    "SYMMETRIZE_MODES",
    "SCI_COLUMNS",
]

SYMMETRIZE_MODES = ("sum", "mean", "max")

# Column names of the Facebook Social Connectedness Index county files.
SCI_COLUMNS = ("user_loc", "fr_loc", "scaled_sci")


class GraphError(ValueError):
    """Raised for invalid graph input or an impossible graph operation."""


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Immutable undirected weighted graph.

    Nodes are kept in lexicographic order and edges are stored as parallel
    arrays ``(u, v, weight)`` of node indices with ``u <= v``, sorted by
    ``(u, v)``. A self-loop ``(i, i, w)`` adds ``2w`` to the strength of
    ``i`` and ``w`` to the total weight, so ``strength.sum() == 2 * m``.
    """

    nodes: tuple[str, ...]
    u: np.ndarray
    v: np.ndarray
    weight: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.nodes)})
        for arr in (self.u, self.v, self.weight):
            arr.setflags(write=False)

    @classmethod
    def from_edges(
        cls, edges: Mapping[tuple[str, str], float] | Iterable[tuple[str, str, float]],
        nodes: Iterable[str] = (),
    ) -> "WeightedGraph":
        """Build a graph from ``{(a, b): w}`` or ``(a, b, w)`` triples.

        Repeated unordered pairs are summed. Extra isolated ``nodes`` may be
        supplied; every edge endpoint is added automatically.
        """
        items = edges.items() if isinstance(edges, Mapping) else (((a, b), w) for a, b, w in edges)
        acc: dict[tuple[str, str], list[float]] = defaultdict(list)
        for (a, b), w in items:
            w = float(w)
            if not w >= 0 or math.isinf(w):
                raise GraphError(f"invalid edge weight {w!r} for ({a}, {b})")
            if w == 0:
                continue
            acc[(a, b) if a <= b else (b, a)].append(w)
        names = set(nodes)
        for a, b in acc:
            names.add(a)
            names.add(b)
        return cls._build(names, {k: math.fsum(ws) for k, ws in acc.items()})

    @classmethod
    def _build(cls, names: Iterable[str], pairs: Mapping[tuple[str, str], float]) -> "WeightedGraph":
        ordered = tuple(sorted(names))
        if any(not n for n in ordered):
            raise GraphError("empty unit id")
        index = {n: i for i, n in enumerate(ordered)}
        triples = sorted((index[a], index[b], w) for (a, b), w in pairs.items())
        if triples:
            u, v, w = (np.array(col) for col in zip(*triples))
        else:
            u = v = np.zeros(0, dtype=np.int64)
            w = np.zeros(0, dtype=np.float64)
        return cls(ordered, u.astype(np.int64), v.astype(np.int64), w.astype(np.float64))

    # -- basic queries ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.weight)

    def index(self, node: str) -> int:
        return self._index[node]

    def __contains__(self, node: str) -> bool:
        return node in self._index

    @cached_property
    def total_weight(self) -> float:
        """Total edge weight ``m`` (self-loops counted once)."""
        return math.fsum(self.weight.tolist())

    @cached_property
    def strength(self) -> np.ndarray:
        s = np.zeros(self.n_nodes)
        # bincount sums in edge order; good enough for strengths, m uses fsum
        s += np.bincount(self.u, weights=self.weight, minlength=self.n_nodes)
        s += np.bincount(self.v, weights=self.weight, minlength=self.n_nodes)
        s.setflags(write=False)
        return s

    @cached_property
    def self_loops(self) -> np.ndarray:
        loops = np.zeros(self.n_nodes)
        mask = self.u == self.v
        loops[self.u[mask]] = self.weight[mask]
        loops.setflags(write=False)
        return loops

    @cached_property
    def edges(self) -> dict[tuple[str, str], float]:
        """Edge map keyed by lexicographically ordered unit-id pairs."""
        nodes = self.nodes
        return {
            (nodes[a], nodes[b]): w
            for a, b, w in zip(self.u.tolist(), self.v.tolist(), self.weight.tolist())
        }

    def weight_between(self, a: str, b: str) -> float:
        key = (a, b) if a <= b else (b, a)
        return self.edges.get(key, 0.0)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Neighbour lists without self-loops as ``(indptr, indices, data)``.

        Neighbours of each node appear in increasing index order.
        """
        mask = self.u != self.v
        a, b, w = self.u[mask], self.v[mask], self.weight[mask]
        rows = np.concatenate([a, b])
        cols = np.concatenate([b, a])
        data = np.concatenate([w, w])
        order = np.lexsort((cols, rows))
        rows, cols, data = rows[order], cols[order], data[order]
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.n_nodes), out=indptr[1:])
        return indptr, cols, data

    def subgraph(self, keep: Iterable[str]) -> "WeightedGraph":
        keep = set(keep)
        missing = keep - set(self.nodes)
        if missing:
            raise GraphError(f"unknown nodes: {sorted(missing)[:5]}")
        pairs = {k: w for k, w in self.edges.items() if k[0] in keep and k[1] in keep}
        return WeightedGraph._build(keep, pairs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.weight, other.weight)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"WeightedGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges}, m={self.total_weight:.6g})"


# -- ingestion ---------------------------------------------------------------


def _symmetrize(directed: Mapping[tuple[str, str], float], mode: str) -> dict[tuple[str, str], float]:
    if mode not in SYMMETRIZE_MODES:
        raise GraphError(f"unknown symmetrization mode {mode!r}; expected one of {SYMMETRIZE_MODES}")
    out: dict[tuple[str, str], float] = {}
    for (a, b), w in directed.items():
        if a == b:
            out[(a, a)] = w
            continue
        key = (a, b) if a < b else (b, a)
        if key in out:
            continue
        back = directed.get((b, a), 0.0)
        if mode == "sum":
            out[key] = math.fsum((w, back))
        elif mode == "mean":
            out[key] = (w + back) / 2.0
        else:
            out[key] = max(w, back)
    return out


def ingest_edge_list(
    rows: Iterable[Mapping[str, str]] | TextIO,
    origin: str = "origin",
    destination: str = "destination",
    weight: str = "weight",
    delimiter: str = ",",
    symmetrize: str = "sum",
    start_line: int = 2,
) -> WeightedGraph:
    """Fold directed flow rows into an undirected :class:`WeightedGraph`.

    ``rows`` is either an open text stream with a header row or an iterable
    of mappings (such as :class:`csv.DictReader`). Repeated rows for the
    same directed pair are summed, then the two directions of each pair are
    combined with ``symmetrize`` (``sum``, ``mean`` or ``max``; a missing
    direction counts as zero). Zero-weight rows are dropped.

    Errors carry the 1-based line number of the offending row.
    """
    if isinstance(rows, io.TextIOBase) or hasattr(rows, "read"):
        reader = csv.DictReader(rows, delimiter=delimiter)  # type: ignore[arg-type]
        header = reader.fieldnames or []
        missing = [c for c in (origin, destination, weight) if c not in header]
        if missing:
            raise GraphError(f"missing column(s) {missing}; header is {header}")
        rows = reader

    directed: dict[tuple[str, str], list[float]] = defaultdict(list)
    for lineno, row in enumerate(rows, start=start_line):
        try:
            a = (row[origin] or "").strip()
            b = (row[destination] or "").strip()
            raw = row[weight]
        except KeyError as exc:
            raise GraphError(f"line {lineno}: missing column {exc}") from None
        if not a or not b:
            raise GraphError(f"line {lineno}: empty unit id")
        try:
            w = float(raw)
        except (TypeError, ValueError):
            raise GraphError(f"line {lineno}: non-numeric weight {raw!r}") from None
        if math.isnan(w) or math.isinf(w):
            raise GraphError(f"line {lineno}: non-finite weight {raw!r}")
        if w < 0:
            raise GraphError(f"line {lineno}: negative weight {w}")
        if w == 0:
            continue
        directed[(a, b)].append(w)

    combined = _symmetrize({k: math.fsum(ws) for k, ws in directed.items()}, symmetrize)
    combined = {k: w for k, w in combined.items() if w > 0}
    if not combined:
        raise GraphError("edge list produced an empty graph")
    names = {n for pair in combined for n in pair}
    return WeightedGraph._build(names, combined)


def read_edge_list(path: str | os.PathLike, **options) -> WeightedGraph:
    """Read a delimited edge-list file; TSV is assumed for ``.tsv`` files."""
    path = Path(path)
    if "delimiter" not in options and path.suffix.lower() == ".tsv":
        options["delimiter"] = "\t"
    with open(path, newline="", encoding="utf-8") as fh:
        return ingest_edge_list(fh, **options)


# -- geography ---------------------------------------------------------------


@dataclass(frozen=True)
class Crosswalk:
    """Maps fine unit ids to coarse ones, by id prefix or lookup table.

    >>> Crosswalk(prefix_len=5)("550250001001")
    '55025'
    """

    prefix_len: int | None = None
    table: Mapping[str, str] | None = None

    def __post_init__(self):
        if (self.prefix_len is None) == (self.table is None):
            raise GraphError("crosswalk needs exactly one of prefix_len or table")
        if self.prefix_len is not None and self.prefix_len < 1:
            raise GraphError("prefix_len must be positive")

    def __call__(self, unit: str) -> str:
        if self.table is not None:
            try:
                return self.table[unit]
            except KeyError:
                raise GraphError(f"unit {unit!r} is not in the crosswalk") from None
        if len(unit) < self.prefix_len:
            raise GraphError(f"unit {unit!r} is shorter than the crosswalk prefix {self.prefix_len}")
        return unit[: self.prefix_len]

    @classmethod
    def from_csv(cls, path: str | os.PathLike, fine: str = "fine_id", coarse: str = "coarse_id") -> "Crosswalk":
        table: dict[str, str] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or fine not in reader.fieldnames or coarse not in reader.fieldnames:
                raise GraphError(f"crosswalk {path} needs columns {fine!r}, {coarse!r}")
            for lineno, row in enumerate(reader, start=2):
                f, c = row[fine].strip(), row[coarse].strip()
                if not f or not c:
                    raise GraphError(f"crosswalk line {lineno}: empty id")
                if table.get(f, c) != c:
                    raise GraphError(f"crosswalk line {lineno}: {f!r} maps to both {table[f]!r} and {c!r}")
                table[f] = c
        return cls(table=table)


def aggregate(graph: WeightedGraph, crosswalk: Crosswalk) -> WeightedGraph:
    """Roll a graph up to the coarse units of ``crosswalk``.

    Weights between coarse units are summed over their preimages; edges
    inside one coarse unit become its self-loop, so the total weight is
    unchanged.
    """
    image = [crosswalk(n) for n in graph.nodes]
    acc: dict[tuple[str, str], list[float]] = defaultdict(list)
    for a, b, w in zip(graph.u.tolist(), graph.v.tolist(), graph.weight.tolist()):
        ca, cb = image[a], image[b]
        acc[(ca, cb) if ca <= cb else (cb, ca)].append(w)
    return WeightedGraph._build(set(image), {k: math.fsum(ws) for k, ws in acc.items()})


def restrict_to_common(
    g1: WeightedGraph, g2: WeightedGraph
) -> tuple[WeightedGraph, WeightedGraph, tuple[list[str], list[str]]]:
    """Restrict two graphs to their shared node set.

    Returns both restricted graphs and the sorted ids dropped from each.
    """
    common = set(g1.nodes) & set(g2.nodes)
    if not common:
        raise GraphError("empty intersection: the graphs share no nodes")
    dropped = (
        [n for n in g1.nodes if n not in common],
        [n for n in g2.nodes if n not in common],
    )
    out1 = g1 if not dropped[0] else g1.subgraph(common)
    out2 = g2 if not dropped[1] else g2.subgraph(common)
    return out1, out2, dropped


def iter_edge_lines(graph: WeightedGraph) -> Iterator[str]:
    for (a, b), w in graph.edges.items():
        yield f"{a},{b},{w:.12g}"


def dump_edge_list(graph: WeightedGraph, out: TextIO) -> None:
    """Write the canonical edge list (sorted pairs, 12 significant digits)."""
    out.write("unit_a,unit_b,weight\n")
    for line in iter_edge_lines(graph):
        out.write(line + "\n")

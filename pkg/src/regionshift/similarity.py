"""Partition similarity from a contingency table.

Every index here is computed from the cross-tabulation of two partitions
over the same node set. Pair counts are exact Python integers and the
pair-counting indices are formed as :class:`fractions.Fraction` before the
single final conversion to float.

Degenerate inputs follow one rule: when an index is undefined because both
partitions are the same trivial partition, it is 1.0 and the case is
flagged; otherwise :class:`DegenerateError` is raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .community import Partition
from .graph import GraphError

__all__ = [
    "DegenerateError",
    "NodeSetMismatch",
    "ContingencyTable",
    "PairCounts",
    "SimilarityReport",
    "contingency",
    "rand_index",
    "adjusted_rand",
    "z_rand",
    "z_rand_moments",
    "nmi",
    "jaccard",
    "compare",
    "NMI_VARIANTS",
]

NMI_VARIANTS = ("sum", "max", "sqrt")


class DegenerateError(ArithmeticError):
    """An index is undefined for the given pair of partitions."""


class NodeSetMismatch(GraphError):
    def __init__(self, only_x: list[str], only_y: list[str]):
        self.only_x = only_x
        self.only_y = only_y
        super().__init__(
            f"partitions cover different node sets: {len(only_x)} only in first "
            f"{only_x[:5]}, {len(only_y)} only in second {only_y[:5]}"
        )


def comb2(n: int) -> int:
    return n * (n - 1) // 2


class PairCounts(NamedTuple):
    n11: int
    n10: int
    n01: int
    n00: int

    @property
    def total(self) -> int:
        return self.n11 + self.n10 + self.n01 + self.n00


@dataclass(frozen=True)
class ContingencyTable:
    """``counts[i][j]``: nodes in community i of X and community j of Y."""

    counts: tuple[tuple[int, ...], ...]
    row_sums: tuple[int, ...] = field(init=False)
    col_sums: tuple[int, ...] = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        rows = tuple(sum(r) for r in self.counts)
        cols = tuple(sum(c) for c in zip(*self.counts)) if self.counts else ()
        object.__setattr__(self, "row_sums", rows)
        object.__setattr__(self, "col_sums", cols)
        object.__setattr__(self, "n", sum(rows))

    @classmethod
    def from_array(cls, counts) -> "ContingencyTable":
        return cls(tuple(tuple(int(x) for x in row) for row in np.asarray(counts)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_sums), len(self.col_sums)

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(tuple(zip(*self.counts)))

    def pair_counts(self) -> PairCounts:
        same_both = sum(comb2(x) for row in self.counts for x in row)
        same_x = sum(comb2(x) for x in self.row_sums)
        same_y = sum(comb2(x) for x in self.col_sums)
        n10 = same_x - same_both
        n01 = same_y - same_both
        return PairCounts(same_both, n10, n01, comb2(self.n) - same_both - n10 - n01)


def contingency(px: Partition, py: Partition) -> ContingencyTable:
    """Cross-tabulate two partitions of the same node set."""
    if px.nodes != py.nodes:
        sx, sy = set(px.nodes), set(py.nodes)
        raise NodeSetMismatch(sorted(sx - sy), sorted(sy - sx))
    kx, ky = px.n_communities, py.n_communities
    flat = px.labels_array() * ky + py.labels_array()
    table = np.bincount(flat, minlength=kx * ky).reshape(kx, ky)
    return ContingencyTable.from_array(table)


def _need_pairs(t: ContingencyTable) -> None:
    if t.n < 2:
        raise DegenerateError(f"index needs at least 2 nodes, got {t.n}")


def _identical(t: ContingencyTable) -> bool:
    """True when the table is a permuted diagonal, i.e. the partitions agree."""
    return all(sum(1 for x in row if x) == 1 for row in t.counts) and all(
        sum(1 for x in col if x) == 1 for col in zip(*t.counts)
    )


def rand_index(t: ContingencyTable) -> float:
    _need_pairs(t)
    pc = t.pair_counts()
    return float(Fraction(pc.n11 + pc.n00, comb2(t.n)))


def adjusted_rand_fraction(t: ContingencyTable) -> Fraction:
    _need_pairs(t)
    index = sum(comb2(x) for row in t.counts for x in row)
    a = sum(comb2(x) for x in t.row_sums)
    b = sum(comb2(x) for x in t.col_sums)
    expected = Fraction(a * b, comb2(t.n))
    denom = Fraction(a + b, 2) - expected
    if denom == 0:
        if _identical(t):
            return Fraction(1)
        raise DegenerateError("adjusted Rand index is degenerate for these partitions")
    return (index - expected) / denom


def adjusted_rand(t: ContingencyTable) -> float:
    """Hubert-Arabie adjusted Rand index."""
    return float(adjusted_rand_fraction(t))


def z_rand_moments(t: ContingencyTable) -> tuple[Fraction, Fraction]:
    """Exact mean and variance of the same-pair count ``n11``.

    The null model draws a uniformly random assignment of nodes with both
    partitions' community sizes held fixed (Hubert 1977, as used for the
    z-Rand score by Traud et al. 2011).
    """
    n = t.n
    if n < 4:
        raise DegenerateError(f"z-Rand needs at least 4 nodes, got {n}")
    M = comb2(n)
    M1 = sum(comb2(x) for x in t.row_sums)
    M2 = sum(comb2(x) for x in t.col_sums)
    C1 = n * (n * n - 3 * n - 2) - 8 * (n + 1) * M1 + 4 * sum(x**3 for x in t.row_sums)
    C2 = n * (n * n - 3 * n - 2) - 8 * (n + 1) * M2 + 4 * sum(x**3 for x in t.col_sums)
    a1 = 4 * M1 - 2 * M
    a2 = 4 * M2 - 2 * M
    mean = Fraction(M1 * M2, M)
    var = (
        Fraction(M, 16)
        - Fraction(a1 * a1 * a2 * a2, 256 * M * M)
        + Fraction(C1 * C2, 16 * n * (n - 1) * (n - 2))
        + Fraction((a1 * a1 - 4 * C1 - 4 * M) * (a2 * a2 - 4 * C2 - 4 * M), 64 * n * (n - 1) * (n - 2) * (n - 3))
    )
    return mean, var


def z_rand(t: ContingencyTable) -> float:
    """z-score of the same-community pair count under the fixed-sizes null."""
    mean, var = z_rand_moments(t)
    if var <= 0:
        raise DegenerateError("degenerate null model: same-pair count has zero variance")
    w = sum(comb2(x) for row in t.counts for x in row)
    return float(w - mean) / math.sqrt(var)


def _entropy(counts, n: int) -> float:
    return -math.fsum(c / n * math.log(c / n) for c in counts if c)


def nmi(t: ContingencyTable, variant: str = "sum") -> float:
    """Normalized mutual information with natural-log plug-in entropies.

    ``variant`` picks the normalizer: ``sum`` (2I/(H_x+H_y)), ``max``
    (I/max(H_x, H_y)) or ``sqrt`` (I/sqrt(H_x H_y)).
    """
    if variant not in NMI_VARIANTS:
        raise ValueError(f"unknown NMI variant {variant!r}; expected one of {NMI_VARIANTS}")
    n = t.n
    if n < 1:
        raise DegenerateError("NMI needs at least one node")
    hx = _entropy(t.row_sums, n)
    hy = _entropy(t.col_sums, n)
    if hx == 0 and hy == 0:
        return 1.0
    mi = math.fsum(
        x / n * math.log(x * n / (t.row_sums[i] * t.col_sums[j]))
        for i, row in enumerate(t.counts)
        for j, x in enumerate(row)
        if x
    )
    mi = max(mi, 0.0)
    if variant == "sum":
        value = 2.0 * mi / (hx + hy)
    elif variant == "max":
        value = mi / max(hx, hy)
    else:
        if hx == 0 or hy == 0:
            return 0.0
        value = mi / math.sqrt(hx * hy)
    return min(value, 1.0)


def jaccard(t: ContingencyTable) -> float:
    """Pair-counting Jaccard coefficient ``n11 / (n11 + n10 + n01)``."""
    _need_pairs(t)
    pc = t.pair_counts()
    union = pc.n11 + pc.n10 + pc.n01
    if union == 0:
        return 1.0
    return float(Fraction(pc.n11, union))


@dataclass
class SimilarityReport:
    """All indices for one pair of partitions plus degenerate-case flags.

    An index that could not be computed is ``None`` and its reason is in
    ``flags``.
    """

    n: int
    k_x: int
    k_y: int
    rand: float | None
    adjusted_rand: float | None
    z_rand: float | None
    jaccard: float | None
    nmi: float | None
    nmi_variant: str = "sum"
    flags: dict[str, str] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "k_pre": self.k_x,
            "k_post": self.k_y,
            "z_rand": self.z_rand,
            "adjusted_rand": self.adjusted_rand,
            "jaccard": self.jaccard,
            "nmi": self.nmi,
            "rand": self.rand,
            "nmi_variant": self.nmi_variant,
            "flags": dict(sorted(self.flags.items())),
        }


def compare(px: Partition, py: Partition, nmi_variant: str = "sum") -> SimilarityReport:
    """Compute every index, recording degenerate cases instead of raising."""
    t = contingency(px, py)
    flags: dict[str, str] = {}
    values: dict[str, float | None] = {}
    pc = t.pair_counts() if t.n >= 2 else None
    identical = _identical(t)
    for name, fn in (
        ("rand", rand_index),
        ("adjusted_rand", adjusted_rand),
        ("z_rand", z_rand),
        ("jaccard", jaccard),
        ("nmi", lambda tab: nmi(tab, nmi_variant)),
    ):
        try:
            values[name] = fn(t)
        except DegenerateError as exc:
            values[name] = None
            flags[name] = str(exc)
    if pc is not None:
        a = pc.n11 + pc.n10
        b = pc.n11 + pc.n01
        if identical and a in (0, pc.total) and b in (0, pc.total):
            flags.setdefault("adjusted_rand", "both partitions trivial; defined as 1.0")
        if pc.n11 + pc.n10 + pc.n01 == 0:
            flags.setdefault("jaccard", "no same-community pairs in either partition; defined as 1.0")
    if len(t.row_sums) == 1 and len(t.col_sums) == 1:
        flags.setdefault("nmi", "both partitions have one community; defined as 1.0")
    return SimilarityReport(
        n=t.n,
        k_x=len(t.row_sums),
        k_y=len(t.col_sums),
        rand=values["rand"],
        adjusted_rand=values["adjusted_rand"],
        z_rand=values["z_rand"],
        jaccard=values["jaccard"],
        nmi=values["nmi"],
        nmi_variant=nmi_variant,
        flags=flags,
    )

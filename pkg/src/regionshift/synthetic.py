"""Synthetic two-period networks on a square-cell grid.

Used for the bundled demo fixture and for scale tests: units are grid
cells with ids ``r{row}c{col}``, planted regions are rectangular blocks
of cells, and flows are drawn preferentially inside each block.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

__all__ = ["grid_ids", "block_regions", "planted_flows", "grid_geojson", "write_fixture"]


def grid_ids(rows: int, cols: int) -> list[str]:
    width = len(str(max(rows, cols) - 1))
    return [f"r{r:0{width}d}c{c:0{width}d}" for r in range(rows) for c in range(cols)]


def block_regions(rows: int, cols: int, block_rows: int, block_cols: int) -> np.ndarray:
    """Region index of every cell (row-major) for a tiling into rectangular blocks."""
    r = np.repeat(np.arange(rows), cols)
    c = np.tile(np.arange(cols), rows)
    per_row = -(-cols // block_cols)
    return (r // block_rows) * per_row + c // block_cols


def planted_flows(
    regions: np.ndarray,
    n_edges: int,
    p_within: float = 0.8,
    seed: int = 0,
    max_weight: int = 50,
) -> dict[tuple[int, int], float]:
    """Random undirected flows, a fraction ``p_within`` inside a region.

    Returns ``{(i, j): weight}`` over cell indices with ``i < j``; weights are
    integers, heavier inside regions. Exactly ``n_edges`` distinct pairs are
    returned unless the graph would have to be complete.
    """
    rng = np.random.default_rng(seed)
    n = len(regions)
    order = np.argsort(regions, kind="stable")
    starts = np.searchsorted(regions[order], np.arange(regions.max() + 2))
    keys = np.zeros(0, dtype=np.int64)
    weights = np.zeros(0)
    batch = n_edges
    # draw in batches until enough distinct pairs exist
    while True:
        n_within = int(batch * p_within)
        a = rng.integers(0, n, size=n_within)
        reg = regions[a]
        lo, hi = starts[reg], starts[reg + 1]
        b = order[lo + (rng.random(n_within) * (hi - lo)).astype(np.int64)]
        w_in = rng.integers(max_weight // 2, max_weight + 1, size=n_within)
        c = rng.integers(0, n, size=batch - n_within)
        d = rng.integers(0, n, size=batch - n_within)
        w_out = rng.integers(1, max_weight // 5 + 1, size=batch - n_within)

        src = np.concatenate([a, c])
        dst = np.concatenate([b, d])
        wts = np.concatenate([w_in, w_out]).astype(np.float64)
        keep = src != dst
        src, dst, wts = src[keep], dst[keep], wts[keep]
        keys = np.concatenate([keys, np.minimum(src, dst) * n + np.maximum(src, dst)])
        weights = np.concatenate([weights, wts])
        uniq, inverse = np.unique(keys, return_inverse=True)
        if len(uniq) >= n_edges or len(uniq) == n * (n - 1) // 2:
            break
        batch = max(1000, 2 * (n_edges - len(uniq)))
    summed = np.bincount(inverse.reshape(-1), weights=weights)
    if len(uniq) > n_edges:
        pick = np.sort(rng.choice(len(uniq), size=n_edges, replace=False))
        uniq, summed = uniq[pick], summed[pick]
    return {(int(k // n), int(k % n)): float(w) for k, w in zip(uniq, summed)}


def grid_geojson(rows: int, cols: int, cell: float = 10_000.0) -> dict:
    """Square cells of side ``cell`` (metres) as a FeatureCollection keyed by ``GEOID``."""
    features = []
    for uid, idx in zip(grid_ids(rows, cols), range(rows * cols)):
        r, c = divmod(idx, cols)
        x0, y0 = c * cell, r * cell
        ring = [[x0, y0], [x0 + cell, y0], [x0 + cell, y0 + cell], [x0, y0 + cell], [x0, y0]]
        features.append({"type": "Feature", "properties": {"GEOID": uid}, "geometry": {"type": "Polygon", "coordinates": [ring]}})
    return {"type": "FeatureCollection", "features": features}


def _write_edges(path: Path, ids: list[str], flows: dict[tuple[int, int], float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["origin", "destination", "weight"])
        for (i, j), w in sorted(flows.items()):
            writer.writerow([ids[i], ids[j], int(w) if w.is_integer() else w])


def write_fixture(
    out_dir: str | os.PathLike,
    rows: int = 12,
    cols: int = 12,
    n_edges: int = 3000,
    seed: int = 2024,
) -> Path:
    """Write a two-period fixture: edge lists, grid GeoJSON and a pipeline config.

    The first period has 3x4-cell regions; in the second, every other block
    row is shifted sideways by two cells, so the planted regions differ.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = grid_ids(rows, cols)
    pre_regions = block_regions(rows, cols, 3, 4)
    shifted = np.roll(np.arange(rows * cols).reshape(rows, cols), 2, axis=1)
    post_regions = pre_regions.copy()
    for r in range(rows):
        if (r // 3) % 2 == 1:
            post_regions[r * cols:(r + 1) * cols] = pre_regions[shifted[r]]
    _write_edges(out / "flows_pre.csv", ids, planted_flows(pre_regions, n_edges, seed=seed))
    _write_edges(out / "flows_post.csv", ids, planted_flows(post_regions, n_edges, seed=seed + 1))
    with open(out / "grid.geojson", "w", encoding="utf-8") as fh:
        json.dump(grid_geojson(rows, cols), fh)
        fh.write("\n")
    (out / "pipeline.yaml").write_text(
        "# Synthetic two-period demo; run with: regionshift pipeline -c pipeline.yaml\n"
        "network: synthetic-grid\n"
        "output_dir: out\n"
        "workers: 1\n"
        "periods:\n"
        "  - label: period-a\n"
        "    path: flows_pre.csv\n"
        "  - label: period-b\n"
        "    path: flows_post.csv\n"
        "louvain:\n"
        "  resolution: 1.0\n"
        "  seed: 7\n"
        "  restarts: 10\n"
        "  node_order: shuffled\n"
        "similarity:\n"
        "  nmi_variant: sum\n"
        "spatial:\n"
        "  geojson: grid.geojson\n"
        "  id_property: GEOID\n"
        "  length_unit: m\n",
        encoding="utf-8",
    )
    return out

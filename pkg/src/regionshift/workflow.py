"""Two-period region comparison pipeline.

Both periods are ingested (and optionally rolled up with a crosswalk),
restricted to their common units, partitioned with Louvain, and compared
with every similarity index. When geometry is configured, each partition
also gets its border-length and compactness summary.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import __version__
from .community import LouvainConfig, Partition, louvain, write_partition_csv
from .graph import Crosswalk, WeightedGraph, aggregate, read_edge_list, restrict_to_common
from .similarity import NMI_VARIANTS, SimilarityReport, compare
from .spatial import (
    DEFAULT_SNAP,
    SharedBorderTable,
    UnitGeometry,
    check_border_consistency,
    partition_shape_report,
    preprocess_geometry,
    read_adjacency_csv,
    read_geojson,
    read_units_csv,
    write_region_geojson,
)

__all__ = [
    "ConfigError",
    "PipelineError",
    "PeriodInput",
    "SpatialInput",
    "PipelineConfig",
    "load_config",
    "run_pipeline",
    "load_geometry",
    "similarity_row",
    "SIMILARITY_COLUMNS",
    "REPORT_SCHEMA_VERSION",
]

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1

SIMILARITY_COLUMNS = (
    "network", "pre_label", "post_label", "z_rand", "adjusted_rand", "jaccard",
    "nmi", "rand", "n", "k_pre", "k_post",
)
PERIOD_COLUMNS = (
    "n_nodes", "n_edges", "m", "region_count", "modularity",
    "mean_compactness", "median_compactness", "avg_border_per_region",
)


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``cause`` is the original exception."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


@dataclass
class PeriodInput:
    label: str
    path: str
    origin: str = "origin"
    destination: str = "destination"
    weight: str = "weight"
    delimiter: str | None = None
    symmetrize: str = "sum"
    prefix_len: int | None = None
    crosswalk_csv: str | None = None

    def crosswalk(self) -> Crosswalk | None:
        if self.prefix_len is not None and self.crosswalk_csv is not None:
            raise ConfigError(f"period {self.label!r}: prefix_len and crosswalk_csv are mutually exclusive")
        if self.prefix_len is not None:
            return Crosswalk(prefix_len=self.prefix_len)
        if self.crosswalk_csv is not None:
            return Crosswalk.from_csv(self.crosswalk_csv)
        return None

    def load(self) -> WeightedGraph:
        options: dict[str, Any] = dict(
            origin=self.origin, destination=self.destination, weight=self.weight, symmetrize=self.symmetrize
        )
        if self.delimiter is not None:
            options["delimiter"] = self.delimiter
        graph = read_edge_list(self.path, **options)
        cw = self.crosswalk()
        return aggregate(graph, cw) if cw is not None else graph


@dataclass
class SpatialInput:
    geojson: str | None = None
    id_property: str = "GEOID"
    snap_tolerance: float = DEFAULT_SNAP
    adjacency: str | None = None
    units: str | None = None
    length_unit: str = "m"

    def __post_init__(self):
        if self.geojson and (self.adjacency or self.units):
            raise ConfigError("spatial: give either geojson or adjacency+units, not both")
        if bool(self.adjacency) != bool(self.units):
            raise ConfigError("spatial: adjacency and units tables must be given together")

    @property
    def configured(self) -> bool:
        return bool(self.geojson or self.adjacency)


@dataclass
class PipelineConfig:
    periods: tuple[PeriodInput, PeriodInput]
    louvain: LouvainConfig = field(default_factory=LouvainConfig)
    nmi_variant: str = "sum"
    spatial: SpatialInput = field(default_factory=SpatialInput)
    output_dir: str = "regionshift-out"
    network: str = "network"
    workers: int = 1

    def __post_init__(self):
        if len(self.periods) != 2:
            raise ConfigError(f"exactly two periods are required, got {len(self.periods)}")
        if self.periods[0].label == self.periods[1].label:
            raise ConfigError("the two periods need distinct labels")
        if self.nmi_variant not in NMI_VARIANTS:
            raise ConfigError(f"nmi_variant must be one of {NMI_VARIANTS}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for period in self.periods:
            if not Path(period.path).is_file():
                raise ConfigError(f"period {period.label!r}: edge list {period.path} does not exist")
        for name in ("geojson", "adjacency", "units"):
            path = getattr(self.spatial, name)
            if path and not Path(path).is_file():
                raise ConfigError(f"spatial.{name}: {path} does not exist")


def _section(raw: Mapping, key: str) -> dict:
    value = raw.get(key) or {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"config section {key!r} must be a mapping")
    return dict(value)


def _build(cls, values: Mapping, where: str):
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path: str | os.PathLike | None = None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Read a YAML config and apply flag overrides (flags win).

    Relative paths in the file resolve against the file's directory.
    ``overrides`` uses dotted keys, e.g. ``{"louvain.seed": 7}``.
    """
    raw: dict = {}
    base = Path(".")
    if path is not None:
        base = Path(path).parent
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping")
    raw = copy.deepcopy(raw)
    overrides = dict(overrides or {})
    output_dir = overrides.pop("output_dir", None)
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = raw
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value

    def resolve(p):
        return str(p) if p is None or os.path.isabs(p) else str(base / p)

    periods_raw = raw.get("periods")
    if not isinstance(periods_raw, list):
        raise ConfigError("config needs a 'periods' list with two entries")
    periods = []
    for i, entry in enumerate(periods_raw):
        if not isinstance(entry, Mapping):
            raise ConfigError(f"periods[{i}] must be a mapping")
        entry = dict(entry)
        entry.setdefault("label", ("pre", "post")[i] if i < 2 else f"period{i}")
        if "path" not in entry:
            raise ConfigError(f"periods[{i}] needs a path")
        entry["label"] = str(entry["label"])
        entry["path"] = resolve(entry["path"])
        if entry.get("crosswalk_csv"):
            entry["crosswalk_csv"] = resolve(entry["crosswalk_csv"])
        periods.append(_build(PeriodInput, entry, f"periods[{i}]"))

    spatial = _section(raw, "spatial")
    for key in ("geojson", "adjacency", "units"):
        if spatial.get(key):
            spatial[key] = resolve(spatial[key])
    if output_dir is None:
        output_dir = resolve(raw.get("output_dir", "regionshift-out"))
    return _build(
        PipelineConfig,
        dict(
            periods=tuple(periods),
            louvain=_build(LouvainConfig, _section(raw, "louvain"), "louvain"),
            nmi_variant=_section(raw, "similarity").get("nmi_variant", "sum"),
            spatial=_build(SpatialInput, spatial, "spatial"),
            output_dir=str(output_dir),
            network=str(raw.get("network", "network")),
            workers=int(raw.get("workers", 1)),
        ),
        "config",
    )


def load_geometry(spatial: SpatialInput) -> tuple[dict[str, UnitGeometry], SharedBorderTable]:
    if spatial.geojson:
        geoms, borders = preprocess_geometry(read_geojson(spatial.geojson, spatial.id_property), spatial.snap_tolerance)
        return {g.unit: g for g in geoms}, borders
    geoms, borders = read_units_csv(spatial.units), read_adjacency_csv(spatial.adjacency)
    check_border_consistency(geoms, borders)
    return geoms, borders


def similarity_row(report: SimilarityReport, network: str, pre_label: str, post_label: str) -> dict:
    values = report.as_dict()
    row = {"network": network, "pre_label": pre_label, "post_label": post_label}
    row.update({k: values[k] for k in SIMILARITY_COLUMNS[3:]})
    return row


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv_rows(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage: %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def run_pipeline(config: PipelineConfig, write: bool = True) -> dict:
    """Run the full comparison; returns the report and writes the artifacts.

    Artifacts land in ``config.output_dir``: one partition CSV per period,
    ``report.json``, ``report.csv`` and, when polygons are available, one
    region GeoJSON per period. On failure every file written so far is
    removed and a :class:`PipelineError` names the failing stage.
    """
    pre_in, post_in = config.periods
    pool = ThreadPoolExecutor(max_workers=2) if config.workers > 1 else None
    try:
        with _Stage("ingest"):
            if pool is not None:
                g_pre, g_post = pool.map(lambda p: p.load(), (pre_in, post_in))
            else:
                g_pre, g_post = pre_in.load(), post_in.load()
        with _Stage("restrict_to_common"):
            g_pre, g_post, dropped = restrict_to_common(g_pre, g_post)
        with _Stage("louvain"):
            inner = max(1, config.workers // 2) if pool is not None else 1
            detect = lambda g: louvain(g, config.louvain, workers=inner)  # noqa: E731
            if pool is not None:
                (p_pre, q_pre), (p_post, q_post) = pool.map(detect, (g_pre, g_post))
            else:
                (p_pre, q_pre), (p_post, q_post) = detect(g_pre), detect(g_post)
    finally:
        if pool is not None:
            pool.shutdown()

    with _Stage("similarity"):
        sim = compare(p_pre, p_post, config.nmi_variant)

    shapes = {}
    geoms = None
    if config.spatial.configured:
        with _Stage("spatial"):
            geoms, borders = load_geometry(config.spatial)
            for key, part in (("pre", p_pre), ("post", p_post)):
                shapes[key] = partition_shape_report(part, geoms, borders, config.spatial.length_unit)

    def period_block(period: PeriodInput, graph: WeightedGraph, part: Partition, quality: float, key: str):
        block = {
            "label": period.label,
            "source": os.path.basename(period.path),
            "n_nodes": graph.n_nodes,
            "n_edges": graph.n_edges,
            "m": graph.total_weight,
            "region_count": part.n_communities,
            "modularity": quality,
            "community_sizes": part.sizes(),
            "mean_compactness": None,
            "median_compactness": None,
            "avg_border_per_region": None,
            "total_border": None,
        }
        if key in shapes:
            s = shapes[key]
            block.update(
                mean_compactness=s.mean_compactness,
                median_compactness=s.median_compactness,
                avg_border_per_region=s.avg_border_per_region,
                total_border=s.total_border,
                spatial=s.as_dict(),
            )
        return block

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "network": config.network,
        "periods": {
            "pre": period_block(pre_in, g_pre, p_pre, q_pre, "pre"),
            "post": period_block(post_in, g_post, p_post, q_post, "post"),
        },
        "comparison": {
            **similarity_row(sim, config.network, pre_in.label, post_in.label),
            "flags": dict(sorted(sim.flags.items())),
            "dropped_nodes": {"pre": dropped[0], "post": dropped[1]},
        },
        "metadata": {
            "seed": config.louvain.seed,
            "restarts": config.louvain.restarts,
            "resolution": config.louvain.resolution,
            "min_gain": config.louvain.min_gain,
            "node_order": config.louvain.node_order,
            "nmi_variant": config.nmi_variant,
            "length_unit": config.spatial.length_unit if config.spatial.configured else None,
            "spatial": config.spatial.configured,
            "software_version": __version__,
            "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        },
    }
    if not write:
        return report

    out = Path(config.output_dir)
    written: list[Path] = []
    try:
        with _Stage("write"):
            out.mkdir(parents=True, exist_ok=True)
            for key, part in (("pre", p_pre), ("post", p_post)):
                path = out / f"partition_{key}.csv"
                written.append(path)
                write_partition_csv(part, path)
            if geoms is not None and any(g.polygons for g in geoms.values()):
                for key, part in (("pre", p_pre), ("post", p_post)):
                    path = out / f"regions_{key}.geojson"
                    written.append(path)
                    write_region_geojson(part, geoms, path, config.spatial.length_unit)
            path = out / "report.json"
            written.append(path)
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(report, fh, indent=2, sort_keys=False)
                fh.write("\n")
            path = out / "report.csv"
            written.append(path)
            write_csv_rows(path, report_csv_columns(), [flat_report_row(report)])
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return report


def report_csv_columns() -> tuple[str, ...]:
    extra = tuple(f"{c}_{key}" for key in ("pre", "post") for c in PERIOD_COLUMNS)
    return SIMILARITY_COLUMNS + extra + ("schema_version",)


def flat_report_row(report: Mapping) -> dict:
    row = {c: report["comparison"][c] for c in SIMILARITY_COLUMNS}
    for key in ("pre", "post"):
        for c in PERIOD_COLUMNS:
            row[f"{c}_{key}"] = report["periods"][key][c]
    row["schema_version"] = report["schema_version"]
    return row


def strip_timestamp(report: Mapping) -> dict:
    """Copy of ``report`` without the run timestamp, for reproducibility checks."""
    clean = copy.deepcopy(dict(report))
    clean.get("metadata", {}).pop("generated_at", None)
    return clean

"""Command line entry point: ``regionshift detect|compare|spatial|pipeline|dump``.

Exit codes: 0 on success, 1 for invalid input (bad flags, missing or
malformed files, mismatched node sets), 2 when a computation fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .community import LouvainConfig, louvain, partition_summary, read_partition_csv, write_partition_csv
from .graph import SCI_COLUMNS, SYMMETRIZE_MODES, Crosswalk, GraphError, aggregate, dump_edge_list, read_edge_list
from .similarity import NMI_VARIANTS, NodeSetMismatch, compare
from .spatial import DEFAULT_SNAP, partition_shape_report, write_region_geojson
from .workflow import (
    SIMILARITY_COLUMNS,
    ConfigError,
    PipelineError,
    SpatialInput,
    load_config,
    load_geometry,
    run_pipeline,
    similarity_row,
    write_csv_rows,
)

EXIT_OK, EXIT_INPUT, EXIT_COMPUTE = 0, 1, 2

log = logging.getLogger("regionshift")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for computation errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_ingest_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("edge list")
    g.add_argument("--origin", default="origin", help="origin column (default: %(default)s)")
    g.add_argument("--destination", default="destination", help="destination column (default: %(default)s)")
    g.add_argument("--weight", default="weight", help="weight column (default: %(default)s)")
    g.add_argument("--sci", action="store_true", help=f"use the Facebook SCI columns {', '.join(SCI_COLUMNS)}")
    g.add_argument("--delimiter", help="field delimiter (default: ',' or tab for .tsv)")
    g.add_argument("--symmetrize", choices=SYMMETRIZE_MODES, default="sum")
    cw = g.add_mutually_exclusive_group()
    cw.add_argument("--prefix-len", type=int, help="aggregate unit ids to their first N characters")
    cw.add_argument("--crosswalk", help="two-column CSV (fine_id, coarse_id) for aggregation")


def _add_louvain_options(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    g = p.add_argument_group("louvain")
    d = LouvainConfig()
    g.add_argument("--resolution", type=float, default=d.resolution if defaults else None)
    g.add_argument("--seed", type=int, default=d.seed if defaults else None)
    g.add_argument("--restarts", type=int, default=d.restarts if defaults else None)
    g.add_argument("--min-gain", type=float, default=d.min_gain if defaults else None)
    g.add_argument("--node-order", choices=("fixed", "shuffled"), default=d.node_order if defaults else None)
    g.add_argument("--workers", type=int, default=1 if defaults else None, help="threads for restarts")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regionshift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="partition one network with Louvain")
    p.add_argument("edges", help="edge-list CSV/TSV with a header row")
    p.add_argument("-o", "--out", required=True, help="partition CSV to write")
    p.add_argument("--summary", help="also write a JSON summary here")
    _add_ingest_options(p)
    _add_louvain_options(p)

    p = sub.add_parser("compare", help="compare two partition CSVs")
    p.add_argument("pre")
    p.add_argument("post")
    p.add_argument("--restrict-common", action="store_true", help="compare on the shared units only")
    p.add_argument("--nmi-variant", choices=NMI_VARIANTS, default="sum")
    p.add_argument("--network", default="network")
    p.add_argument("--pre-label", default="pre")
    p.add_argument("--post-label", default="post")
    p.add_argument("--json", dest="json_out", help="write the JSON report here (default: stdout)")
    p.add_argument("--csv", dest="csv_out", help="write a one-row CSV here")

    p = sub.add_parser("spatial", help="border length and compactness of a partition")
    p.add_argument("partition")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--geojson", help="GeoJSON FeatureCollection of unit polygons (projected)")
    src.add_argument("--adjacency", help="CSV unit_a,unit_b,shared_length (needs --units)")
    p.add_argument("--units", help="CSV unit_id,area,perimeter")
    p.add_argument("--id-property", default="GEOID")
    p.add_argument("--snap", type=float, default=DEFAULT_SNAP, help="endpoint snap tolerance")
    p.add_argument("--length-unit", default="m")
    p.add_argument("--json", dest="json_out", help="write the JSON report here (default: stdout)")
    p.add_argument("--export-geojson", help="write units tagged with community ids here")

    p = sub.add_parser("pipeline", help="run the full two-period comparison")
    p.add_argument("-c", "--config", required=True, help="YAML pipeline config")
    p.add_argument("--output-dir")
    p.add_argument("--nmi-variant", choices=NMI_VARIANTS)
    _add_louvain_options(p, defaults=False)

    p = sub.add_parser("dump", help="print the canonical edge list of a network")
    p.add_argument("edges")
    _add_ingest_options(p)
    return parser


def _load_graph(args):
    if args.sci:
        origin, destination, weight = SCI_COLUMNS
    else:
        origin, destination, weight = args.origin, args.destination, args.weight
    options = dict(origin=origin, destination=destination, weight=weight, symmetrize=args.symmetrize)
    if args.delimiter:
        options["delimiter"] = args.delimiter
    graph = read_edge_list(args.edges, **options)
    if args.prefix_len is not None:
        graph = aggregate(graph, Crosswalk(prefix_len=args.prefix_len))
    elif args.crosswalk:
        graph = aggregate(graph, Crosswalk.from_csv(args.crosswalk))
    return graph


def _louvain_config(args) -> LouvainConfig:
    try:
        return LouvainConfig(
            resolution=args.resolution, seed=args.seed, restarts=args.restarts,
            min_gain=args.min_gain, node_order=args.node_order,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit_json(doc, path) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_detect(args) -> int:
    graph = _load_graph(args)
    config = _louvain_config(args)
    partition, _ = louvain(graph, config, workers=args.workers)
    write_partition_csv(partition, args.out)
    summary = partition_summary(partition, graph, config.resolution)
    if args.summary:
        doc = summary.as_dict()
        doc["seed"] = config.seed
        _emit_json(doc, args.summary)
    log.info("%d communities, modularity %.6f", summary.num_communities, summary.modularity)
    return EXIT_OK


def cmd_compare(args) -> int:
    pre = read_partition_csv(args.pre)
    post = read_partition_csv(args.post)
    dropped = ([], [])
    if pre.nodes != post.nodes:
        if not args.restrict_common:
            sx, sy = set(pre.nodes), set(post.nodes)
            raise NodeSetMismatch(sorted(sx - sy), sorted(sy - sx))
        common = set(pre.nodes) & set(post.nodes)
        if not common:
            raise GraphError("empty intersection: the partitions share no units")
        dropped = (sorted(set(pre.nodes) - common), sorted(set(post.nodes) - common))
        pre, post = pre.restrict(common), post.restrict(common)
    report = compare(pre, post, args.nmi_variant)
    doc = similarity_row(report, args.network, args.pre_label, args.post_label)
    doc["nmi_variant"] = args.nmi_variant
    doc["flags"] = dict(sorted(report.flags.items()))
    doc["dropped_nodes"] = {"pre": dropped[0], "post": dropped[1]}
    _emit_json(doc, args.json_out)
    if args.csv_out:
        write_csv_rows(Path(args.csv_out), SIMILARITY_COLUMNS, [doc])
    return EXIT_OK


def cmd_spatial(args) -> int:
    if args.adjacency and not args.units:
        raise UsageError("--adjacency requires --units")
    if args.units and not args.adjacency:
        raise UsageError("--units requires --adjacency")
    spatial = SpatialInput(
        geojson=args.geojson, id_property=args.id_property, snap_tolerance=args.snap,
        adjacency=args.adjacency, units=args.units, length_unit=args.length_unit,
    )
    partition = read_partition_csv(args.partition)
    geoms, borders = load_geometry(spatial)
    report = partition_shape_report(partition, geoms, borders, args.length_unit)
    _emit_json(report.as_dict(), args.json_out)
    if args.export_geojson:
        write_region_geojson(partition, geoms, args.export_geojson, args.length_unit)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    overrides = {
        "output_dir": args.output_dir,
        "similarity.nmi_variant": args.nmi_variant,
        "louvain.resolution": args.resolution,
        "louvain.seed": args.seed,
        "louvain.restarts": args.restarts,
        "louvain.min_gain": args.min_gain,
        "louvain.node_order": args.node_order,
        "workers": args.workers,
    }
    config = load_config(args.config, overrides)
    report = run_pipeline(config)
    cmp = report["comparison"]
    log.info(
        "ARI %s, NMI %s, z-Rand %s -> %s",
        cmp["adjusted_rand"], cmp["nmi"], cmp["z_rand"], config.output_dir,
    )
    return EXIT_OK


def cmd_dump(args) -> int:
    dump_edge_list(_load_graph(args), sys.stdout)
    return EXIT_OK


COMMANDS = {
    "detect": cmd_detect,
    "compare": cmd_compare,
    "spatial": cmd_spatial,
    "pipeline": cmd_pipeline,
    "dump": cmd_dump,
}

INPUT_ERRORS = (UsageError, ConfigError, GraphError, OSError, UnicodeDecodeError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help/--version exit 0, bad flags exit 1
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    warnings.simplefilter("default")
    try:
        return COMMANDS[args.command](args)
    except PipelineError as exc:
        code = EXIT_INPUT if isinstance(exc.cause, INPUT_ERRORS) else EXIT_COMPUTE
        print(f"regionshift {args.command}: error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return code
    except INPUT_ERRORS as exc:
        print(f"regionshift {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"regionshift {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())

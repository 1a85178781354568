"""Detect regions in interaction networks and compare them across two periods."""

__version__ = "0.1.0"

from .community import LouvainConfig, Partition, louvain, modularity, partition_summary  # noqa: E402
from .graph import Crosswalk, GraphError, WeightedGraph, aggregate, ingest_edge_list, restrict_to_common  # noqa: E402
from .similarity import (  # noqa: E402
    ContingencyTable,
    DegenerateError,
    adjusted_rand,
    compare,
    contingency,
    jaccard,
    nmi,
    rand_index,
    z_rand,
)
from .spatial import (  # noqa: E402
    SharedBorderTable,
    UnitGeometry,
    avg_border_length,
    compactness,
    partition_shape_report,
    preprocess_geometry,
)

__all__ = [
    "__version__",
    "ContingencyTable",
    "Crosswalk",
    "DegenerateError",
    "GraphError",
    "LouvainConfig",
    "Partition",
    "SharedBorderTable",
    "UnitGeometry",
    "WeightedGraph",
    "adjusted_rand",
    "aggregate",
    "avg_border_length",
    "compactness",
    "compare",
    "contingency",
    "ingest_edge_list",
    "jaccard",
    "louvain",
    "modularity",
    "nmi",
    "partition_shape_report",
    "partition_summary",
    "preprocess_geometry",
    "rand_index",
    "restrict_to_common",
    "z_rand",
]

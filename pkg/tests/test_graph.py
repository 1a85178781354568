import io
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regionshift.graph import (
    Crosswalk,
    GraphError,
    WeightedGraph,
    aggregate,
    dump_edge_list,
    ingest_edge_list,
    read_edge_list,
    restrict_to_common,
)


def csv_stream(rows, header=("origin", "destination", "weight"), delimiter=","):
    lines = [delimiter.join(header)] + [delimiter.join(str(x) for x in r) for r in rows]
    return io.StringIO("\n".join(lines) + "\n")


def test_symmetrize_sum():
    g = ingest_edge_list(csv_stream([("A", "B", 2), ("B", "A", 3)]))
    assert g.edges == {("A", "B"): 5.0}


def test_self_loop_convention():
    g = ingest_edge_list(csv_stream([("A", "A", 4)]))
    assert g.edges == {("A", "A"): 4.0}
    assert g.strength.tolist() == [8.0]
    assert g.total_weight == 4.0


def test_parallel_rows_summed():
    g = ingest_edge_list(csv_stream([("A", "B", 1), ("A", "B", 2)]))
    assert g.edges == {("A", "B"): 3.0}


@pytest.mark.parametrize(
    "mode, expected",
    [("sum", 5.0), ("mean", 2.5), ("max", 3.0)],
)
def test_symmetrize_modes(mode, expected):
    g = ingest_edge_list(csv_stream([("A", "B", 2), ("B", "A", 3), ("C", "D", 4)]), symmetrize=mode)
    assert g.weight_between("A", "B") == expected
    one_way = {"sum": 4.0, "mean": 2.0, "max": 4.0}[mode]
    assert g.weight_between("D", "C") == one_way


def test_zero_weight_rows_dropped():
    g = ingest_edge_list(csv_stream([("A", "B", 0), ("B", "C", 1)]))
    assert g.nodes == ("B", "C")


@pytest.mark.parametrize(
    "rows, message",
    [
        ([("A", "B", 1), ("A", "C", "x")], "line 3"),
        ([("A", "B", -1)], "negative weight"),
        ([("A", "B", 0)], "empty graph"),
        ([("A", "", 1)], "line 2"),
        ([("A", "B", "nan")], "non-finite"),
    ],
)
def test_ingest_errors(rows, message):
    with pytest.raises(GraphError, match=message):
        ingest_edge_list(csv_stream(rows))


def test_missing_column():
    with pytest.raises(GraphError, match="missing column"):
        ingest_edge_list(csv_stream([("A", "B", 1)], header=("o", "d", "weight")))


def test_sci_columns_and_tsv(tmp_path):
    path = tmp_path / "sci.tsv"
    path.write_text("user_loc\tfr_loc\tscaled_sci\n01001\t01003\t120\n01003\t01001\t120\n01001\t01001\t9000\n")
    g = read_edge_list(path, origin="user_loc", destination="fr_loc", weight="scaled_sci", symmetrize="mean")
    assert g.edges == {("01001", "01001"): 9000.0, ("01001", "01003"): 120.0}


def test_strength_identity_exact():
    rng = random.Random(3)
    for _ in range(50):
        names = [f"n{i}" for i in range(rng.randint(2, 12))]
        edges = [(rng.choice(names), rng.choice(names), rng.randint(1, 9)) for _ in range(rng.randint(1, 40))]
        g = WeightedGraph.from_edges(edges)
        total = sum(Fraction(w) for w in g.weight.tolist())
        assert sum(Fraction(s) for s in g.strength.tolist()) == 2 * total
        assert Fraction(g.total_weight) == total


def test_ingest_order_independent():
    rng = random.Random(11)
    names = [f"{i:05d}" for i in range(30)]
    rows = [(rng.choice(names), rng.choice(names), round(rng.uniform(0.1, 100), 3)) for _ in range(400)]
    base = ingest_edge_list(csv_stream(rows))
    for _ in range(5):
        rng.shuffle(rows)
        assert ingest_edge_list(csv_stream(rows)) == base


def test_crosswalk_prefix():
    cw = Crosswalk(prefix_len=5)
    assert cw("550250001001") == "55025"
    assert cw("550250001002") == "55025"


def test_aggregate_sums_preimages():
    g = WeightedGraph.from_edges([("X1", "Y1", 2), ("X2", "Y1", 3)])
    cw = Crosswalk(table={"X1": "X", "X2": "X", "Y1": "Y"})
    assert aggregate(g, cw).edges == {("X", "Y"): 5.0}


def test_aggregate_internal_flow_becomes_loop():
    g = WeightedGraph.from_edges([("X1", "X2", 7)])
    out = aggregate(g, Crosswalk(table={"X1": "X", "X2": "X"}))
    assert out.edges == {("X", "X"): 7.0}
    assert out.total_weight == g.total_weight


def test_aggregate_unmapped():
    g = WeightedGraph.from_edges([("X1", "Z9", 1)])
    with pytest.raises(GraphError, match="Z9"):
        aggregate(g, Crosswalk(table={"X1": "X"}))


def test_crosswalk_csv(tmp_path):
    path = tmp_path / "cw.csv"
    path.write_text("fine_id,coarse_id\na1,A\na2,A\nb1,B\n")
    cw = Crosswalk.from_csv(path)
    assert cw("a2") == "A"
    path.write_text("fine_id,coarse_id\na1,A\na1,B\n")
    with pytest.raises(GraphError, match="maps to both"):
        Crosswalk.from_csv(path)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40), st.floats(1e-3, 1e6)), min_size=1, max_size=80))
def test_aggregate_conserves_weight(rows):
    g = WeightedGraph.from_edges([(f"{a:04d}", f"{b:04d}", w) for a, b, w in rows])
    out = aggregate(g, Crosswalk(prefix_len=3))
    assert math.isclose(out.total_weight, g.total_weight, rel_tol=1e-9)
    assert math.isclose(out.strength.sum(), 2 * out.total_weight, rel_tol=1e-12)


def test_restrict_identity():
    g = WeightedGraph.from_edges([("A", "B", 1), ("B", "C", 1)])
    h = WeightedGraph.from_edges([("A", "C", 2), ("B", "B", 1)])
    r1, r2, dropped = restrict_to_common(g, h)
    assert r1 == g and r2 == h
    assert dropped == ([], [])


def test_restrict_intersection():
    g = WeightedGraph.from_edges([("A", "B", 1), ("B", "C", 1)])
    h = WeightedGraph.from_edges([("B", "C", 1), ("C", "D", 4)])
    r1, r2, dropped = restrict_to_common(g, h)
    assert r1.nodes == r2.nodes == ("B", "C")
    assert r1.edges == {("B", "C"): 1.0}
    assert r2.edges == {("B", "C"): 1.0}
    assert dropped == (["A"], ["D"])


def test_restrict_idempotent():
    g = WeightedGraph.from_edges([("A", "B", 1), ("B", "C", 1), ("C", "E", 2)])
    h = WeightedGraph.from_edges([("B", "C", 1), ("C", "D", 4), ("E", "B", 1)])
    once = restrict_to_common(g, h)
    twice = restrict_to_common(once[0], once[1])
    assert twice[0] == once[0] and twice[1] == once[1]
    assert twice[2] == ([], [])


def test_restrict_disjoint():
    g = WeightedGraph.from_edges([("A", "B", 1)])
    h = WeightedGraph.from_edges([("C", "D", 1)])
    with pytest.raises(GraphError, match="empty intersection"):
        restrict_to_common(g, h)


def test_dump_canonical():
    g = WeightedGraph.from_edges([("b", "a", 1 / 3), ("c", "a", 2.0)])
    out = io.StringIO()
    dump_edge_list(g, out)
    assert out.getvalue() == "unit_a,unit_b,weight\na,b,0.333333333333\na,c,2\n"


def test_graph_is_read_only():
    g = WeightedGraph.from_edges([("a", "b", 1)])
    with pytest.raises(ValueError):
        g.weight[0] = 5

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dppdml import dataio
from dppdml.errors import (
    DimensionMismatch,
    DuplicateEdge,
    MissingEdge,
    ParseError,
    SelfLoop,
    UnknownNode,
)
from dppdml.pairgraph import (
    PairwiseDatum,
    build_graph,
    read_pairs_file,
    write_pairs_file,
)

from .conftest import graph_from_edges
from . import oracles


def datum(i, j, y=0, dx=(1.0,)):
    return PairwiseDatum(i, j, np.array(dx), y)


class TestConstruction:
    def test_empty_input_gives_empty_graph(self):
        g = build_graph([])
        assert g.num_nodes == 0
        assert g.num_edges == 0
        assert g.component_count() == 0

    def test_path_graph_degrees(self):
        g = build_graph([datum("a", "b"), datum("b", "c")])
        assert g.degree("a") == 1
        assert g.degree("b") == 2
        assert g.degree("c") == 1

    def test_toy_dataset_shape_and_acyclicity(self):
        samples = dataio.normalize(dataio.synth_two_gaussians(100, seed=1))
        pairs = dataio.toy_pairs(samples, 50, 50, seed=1)
        g = build_graph(pairs, extra_nodes=samples.ids.tolist())
        assert g.num_edges == 150
        assert g.num_nodes == 200
        # acyclic: every component contributes nodes - 1 edges
        assert g.num_edges == g.num_nodes - g.component_count()

    def test_self_loop_rejected(self):
        with pytest.raises(SelfLoop):
            datum("a", "a")

    def test_duplicate_edge_rejected_either_orientation(self):
        with pytest.raises(DuplicateEdge):
            build_graph([datum("a", "b"), datum("b", "a", y=1)])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionMismatch):
            build_graph([datum("a", "b"), datum("b", "c", dx=(1.0, 2.0))])

    def test_label_domain_checked(self):
        with pytest.raises(ValueError):
            PairwiseDatum("a", "b", np.array([1.0]), 2)

    def test_non_finite_features_rejected(self):
        with pytest.raises(ValueError):
            PairwiseDatum("a", "b", np.array([np.nan]), 0)

    def test_isolated_nodes_retained(self):
        g = build_graph([datum("a", "b")], extra_nodes=["z"])
        assert g.has_node("z")
        assert g.degree("z") == 0

    def test_mixed_id_types_supported(self):
        from dppdml.kappa import kappa_exact

        g = build_graph([datum(0, "alice"), datum("alice", 1), datum(1, 0)])
        assert g.degree("alice") == 2
        assert kappa_exact(g).kappa == 2
        keys = {p.key() for p in g.pairs()}
        assert (0, "alice") in keys  # ints order before strings


class TestQueries:
    def test_degree_unknown_node(self):
        g = build_graph([datum("a", "b")])
        with pytest.raises(UnknownNode):
            g.degree("nope")

    def test_star_center_degree(self):
        g = graph_from_edges([("c", f"l{k}") for k in range(4)])
        assert g.degree("c") == 4

    def test_fig5_degree_of_b(self, fig5_graph):
        assert fig5_graph.degree("b") == 2

    def test_component_count_two_disjoint_edges(self):
        g = build_graph([datum("a", "b"), datum("c", "d")])
        assert g.component_count() == 2

    def test_component_count_matches_union_find_oracle(self, rng):
        for _ in range(40):
            n, edges = oracles.random_graph(rng, max_nodes=6, max_edges=10)
            g = graph_from_edges(edges, n_nodes=n)
            assert g.component_count() == oracles.components_union_find(n, edges)

    def test_removal_increase_leaf_of_path(self):
        g = graph_from_edges([("a", "s"), ("s", "b"), ("b", "c")])
        assert g.component_increase_on_removal("a") == 0

    def test_removal_increase_path_center(self):
        g = graph_from_edges([("a", "s"), ("s", "b")])
        assert g.component_increase_on_removal("s") == 1

    def test_removal_increase_three_branch_cut_vertex(self):
        g = graph_from_edges(
            [("s", "a"), ("a", "a2"), ("s", "b"), ("b", "b2"), ("s", "c")]
        )
        before = g.component_count()
        after = g.without_node("s").component_count()
        assert after - before == 2
        assert g.component_increase_on_removal("s") == 2

    def test_removal_increase_isolated_node(self):
        g = build_graph([datum("a", "b")], extra_nodes=["z"])
        assert g.component_increase_on_removal("z") == 0


class TestRemoveEdges:
    def test_remove_all_edges_keeps_nodes(self):
        g = graph_from_edges([("a", "b"), ("b", "c")])
        stripped = g.remove_edges(g.edge_keys())
        assert stripped.num_edges == 0
        assert sorted(stripped.nodes()) == sorted(g.nodes())

    def test_triangle_minus_edge_is_path(self):
        g = graph_from_edges([("a", "b"), ("b", "c"), ("c", "a")])
        path = g.remove_edges([("a", "b")])
        assert path.num_edges == 2
        assert path.degree("a") == 1
        assert path.degree("c") == 2

    def test_missing_edge_raises(self):
        g = graph_from_edges([("a", "b"), ("b", "c")])
        with pytest.raises(MissingEdge):
            g.remove_edges([("a", "c")])

    def test_fig5_minus_flow_paths(self, fig5_graph):
        from dppdml.kappa import max_edge_disjoint_paths

        _, paths = max_edge_disjoint_paths(fig5_graph, "s", "t")
        used = [e for p in paths for e in zip(p, p[1:])]
        sub = fig5_graph.remove_edges(used)
        assert sub.num_nodes == fig5_graph.num_nodes
        assert sub.num_edges == fig5_graph.num_edges - len(used)
        # wiped routes no longer connect s and t
        assert not sub.has_edge("s", "t")


@st.composite
def edge_lists(draw):
    n = draw(st.integers(min_value=2, max_value=7))
    pool = [(a, b) for a in range(n) for b in range(a + 1, n)]
    edges = draw(st.lists(st.sampled_from(pool), unique=True, max_size=len(pool)))
    return n, edges


class TestInvariants:
    @settings(max_examples=60, deadline=None)
    @given(edge_lists())
    def test_round_trip_recovers_edges(self, case):
        n, edges = case
        pairs = [PairwiseDatum(a, b, np.array([float(a + b)]), (a + b) % 2)
                 for a, b in edges]
        g = build_graph(pairs)
        back = g.pairs()
        assert sorted(p.key() for p in back) == sorted(p.key() for p in pairs)
        by_key = {p.key(): p for p in pairs}
        for p in back:
            src = by_key[p.key()]
            assert p.y == src.y
            assert np.array_equal(p.delta_x, src.delta_x)

    @settings(max_examples=60, deadline=None)
    @given(edge_lists())
    def test_degree_sums_to_twice_edges(self, case):
        n, edges = case
        g = graph_from_edges(edges, n_nodes=n)
        assert sum(g.degree(v) for v in g.nodes()) == 2 * g.num_edges

    @settings(max_examples=60, deadline=None)
    @given(edge_lists())
    def test_component_increase_at_most_degree(self, case):
        n, edges = case
        g = graph_from_edges(edges, n_nodes=n)
        for v in g.nodes():
            assert g.component_increase_on_removal(v) <= g.degree(v)

    @settings(max_examples=40, deadline=None)
    @given(edge_lists())
    def test_remove_edges_preserves_node_count(self, case):
        n, edges = case
        g = graph_from_edges(edges, n_nodes=n)
        keys = g.edge_keys()
        half = keys[: len(keys) // 2]
        assert g.remove_edges(half).num_nodes == g.num_nodes


class TestPairsFile:
    def test_round_trip(self, tmp_path):
        pairs = [
            PairwiseDatum(0, 1, np.array([0.25, -1.5]), 0),
            PairwiseDatum(1, 2, np.array([1.0 / 3.0, 2.0]), 1),
        ]
        path = tmp_path / "pairs.csv"
        write_pairs_file(path, pairs)
        back = read_pairs_file(path)
        assert len(back) == 2
        for a, b in zip(pairs, back):
            assert (a.i, a.j, a.y) == (b.i, b.j, b.y)
            assert np.array_equal(a.delta_x, b.delta_x)

    def test_headerless_and_custom_delimiter(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("0;1;0;0.5\n1;2;1;-0.25\n")
        back = read_pairs_file(path, delimiter=";")
        assert [(p.i, p.j, p.y) for p in back] == [(0, 1, 0), (1, 2, 1)]

    def test_parse_error_names_row_and_col(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("i,j,y,dx_1\n0,1,0,0.5\n1,2,1,oops\n")
        with pytest.raises(ParseError) as err:
            read_pairs_file(path)
        assert err.value.row == 3
        assert err.value.col == 4

    def test_short_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1,0\n")
        with pytest.raises(ParseError):
            read_pairs_file(path)

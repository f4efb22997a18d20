import random

import pytest

from biorel.canonical import write_canonical
from biorel.errors import DomainError, DuplicateHitSymbolError, EmptyGraphError
from biorel.graph import (
    Direction,
    NodeAttrs,
    RenderOptions,
    WGraph,
    annotate_regulation,
    render,
    string_subgraph,
)
from biorel.relcore import OrgToken, catalog_entry
from biorel.store import BackendKind, FREE, QueryPattern, Store, StoreConfig

from .helpers import check_dot

DATE = "2026-01-01T00:00:00Z"


def _edge_oracle(store, symbols, min_weight):
    wanted = set(symbols)
    out = {}
    for a, b, w in store.query("edge_strg_hs_symb", QueryPattern.of(FREE, FREE, FREE)):
        if a in wanted and b in wanted and w >= min_weight:
            key = (a, b) if a < b else (b, a)
            out[key] = max(w, out.get(key, 0))
    return out


class TestSubgraph:
    def test_empty_symbols(self, store):
        g = string_subgraph(store, [], OrgToken.HS, 0)
        assert g.node_count == 0 and g.edge_count == 0

    def test_threshold_1000_gives_no_edges(self, store):
        g = string_subgraph(store, ["ATG5", "ATG7", "ATG12"], OrgToken.HS, 1000)
        assert g.edge_count == 0
        assert g.node_count == 3  # isolated inputs retained

    def test_matches_full_scan_oracle(self, store):
        symbols = ["CDH1", "CTNNB1", "TJP1", "SNAI1"]
        g = string_subgraph(store, symbols, OrgToken.HS, 500)
        assert dict(g.edges) == _edge_oracle(store, symbols, 500)
        assert set(g.nodes) == set(symbols)

    def test_monotone_in_threshold(self, store):
        symbols = ["CDH1", "CTNNB1", "TJP1", "SNAI1", "ZEB1", "VIM", "TWIST1"]
        rng = random.Random(3)
        previous = None
        for threshold in sorted(rng.sample(range(0, 1001), 8)):
            g = string_subgraph(store, symbols, OrgToken.HS, threshold)
            if previous is not None:
                assert set(g.edges) <= set(previous.edges)
            previous = g

    def test_duplicate_symbols_deduplicated(self, store):
        g = string_subgraph(store, ["ATG5", "ATG5", "ATG7"], OrgToken.HS, 0)
        assert g.node_count == 2

    def test_mouse_edges(self, store):
        g = string_subgraph(store, ["Atg5", "Atg7", "Becn1"], OrgToken.MOUSE, 500)
        assert ("Atg5", "Atg7") in g.edges
        assert ("Atg5", "Becn1") in g.edges

    def test_bad_threshold(self, store):
        with pytest.raises(DomainError):
            string_subgraph(store, ["ATG5"], OrgToken.HS, 1001)


class TestAnnotate:
    def test_sign_rules(self):
        g = WGraph.build(["A", "B", "C"], [("A", "B", 400)])
        out = annotate_regulation(g, [("A", 2.0), ("B", -0.5), ("C", 0.0)])
        assert out.nodes["A"] == NodeAttrs(Direction.UP, 2.0)
        assert out.nodes["B"] == NodeAttrs(Direction.DOWN, 0.5)
        assert out.nodes["C"] == NodeAttrs(Direction.ABSENT, 0.0)

    def test_symbol_missing_from_hits_is_absent(self):
        g = WGraph.build(["A"], [])
        out = annotate_regulation(g, [("Z", 1.0)])
        assert out.nodes["A"].direction is Direction.ABSENT

    def test_conflicting_signs_rejected(self):
        g = WGraph.build(["A"], [])
        with pytest.raises(DuplicateHitSymbolError):
            annotate_regulation(g, [("A", 1.0), ("A", -1.0)])

    def test_same_sign_repeat_keeps_larger_magnitude(self):
        g = WGraph.build(["A"], [])
        out = annotate_regulation(g, [("A", 1.0), ("A", 2.5)])
        assert out.nodes["A"].magnitude == 2.5

    def test_original_graph_untouched(self):
        g = WGraph.build(["A"], [])
        annotate_regulation(g, [("A", 1.0)])
        assert g.nodes["A"].direction is Direction.ABSENT


class TestWGraphValidation:
    def test_self_loop_rejected(self):
        with pytest.raises(DomainError):
            WGraph(nodes={"A": NodeAttrs()}, edges={("A", "A"): 10})

    def test_unordered_edge_rejected(self):
        with pytest.raises(DomainError):
            WGraph(nodes={"A": NodeAttrs(), "B": NodeAttrs()}, edges={("B", "A"): 10})

    def test_endpoint_outside_nodes_rejected(self):
        with pytest.raises(DomainError):
            WGraph(nodes={"A": NodeAttrs()}, edges={("A", "B"): 10})

    def test_weight_bounds(self):
        with pytest.raises(DomainError):
            WGraph(nodes={"A": NodeAttrs(), "B": NodeAttrs()}, edges={("A", "B"): 1000})


class TestRender:
    def test_single_node_dot_is_valid(self):
        g = WGraph.build(["LMTK3"], [])
        nodes, edges = check_dot(render(g, RenderOptions(format="dot")))
        assert nodes == ["LMTK3"] and edges == []

    def test_up_node_uses_color_up(self):
        g = annotate_regulation(WGraph.build(["A"], []), [("A", 2.0)])
        text = render(g, RenderOptions(format="dot", color_up="red"))
        assert 'fillcolor="#dc322f"' in text  # full-intensity red
        down = annotate_regulation(WGraph.build(["A"], []), [("A", -2.0)])
        assert 'fillcolor="#266dd3"' in render(down, RenderOptions(format="dot"))

    def test_absent_node_is_neutral_gray(self):
        text = render(WGraph.build(["A"], []), RenderOptions(format="dot"))
        assert 'fillcolor="#d3d3d3"' in text

    def test_render_deterministic(self):
        g = annotate_regulation(
            WGraph.build(["B", "A", "C"], [("A", "B", 700), ("B", "C", 200)]),
            [("A", 1.5), ("C", -0.7)],
        )
        for fmt in ("dot", "svg"):
            opts = RenderOptions(format=fmt)
            assert render(g, opts) == render(g, opts)

    def test_penwidth_scales_with_weight(self):
        g = WGraph.build(["A", "B"], [("A", "B", 999)])
        assert "penwidth=4.995" in render(g, RenderOptions(format="dot"))

    def test_include_isolated_false_drops_lonely_nodes(self):
        g = WGraph.build(["A", "B", "C"], [("A", "B", 500)])
        nodes, edges = check_dot(render(g, RenderOptions(format="dot", include_isolated=False)))
        assert nodes == ["A", "B"]

    def test_empty_graph_error_only_when_isolated_excluded(self):
        empty = WGraph.build([], [])
        with pytest.raises(EmptyGraphError):
            render(empty, RenderOptions(format="dot", include_isolated=False))
        out = render(empty, RenderOptions(format="dot", include_isolated=True))
        check_dot(out)

    def test_svg_is_self_contained(self):
        g = WGraph.build(["A", "B"], [("A", "B", 700)])
        text = render(g, RenderOptions(format="svg"))
        assert text.startswith('<?xml version="1.0"')
        assert 'version="1.1"' in text and text.rstrip().endswith("</svg>")
        assert text.count("<circle") == 2 and text.count("<line") == 1

    def test_node_size_flows_into_both_formats(self):
        g = WGraph.build(["A"], [])
        assert "width=7.00" in render(g, RenderOptions(format="dot", node_size=7))
        assert 'r="42.0"' in render(g, RenderOptions(format="svg", node_size=7))

    def test_symbols_needing_escapes(self):
        weird = 'GENE"1'
        g = WGraph.build([weird, "B"], [(weird, "B", 300)])
        nodes, edges = check_dot(render(g, RenderOptions(format="dot")))
        assert len(nodes) == 2 and len(edges) == 1

    def test_random_graphs_parse(self):
        rng = random.Random(11)
        for _ in range(40):
            n = rng.randint(0, 12)
            names = [f"G{i}" for i in range(n)]
            edges = []
            for i in range(n):
                for j in range(i + 1, n):
                    if rng.random() < 0.3:
                        edges.append((names[i], names[j], rng.randint(1, 999)))
            g = WGraph.build(names, edges)
            hits = [(s, rng.uniform(-3, 3)) for s in names if rng.random() < 0.5]
            g = annotate_regulation(g, hits)
            nodes, parsed_edges = check_dot(render(g, RenderOptions(format="dot")))
            assert len(nodes) == n and len(parsed_edges) == len(edges)

    def test_intensity_clamped_at_p95(self):
        nodes = [f"G{i}" for i in range(20)]
        hits = [(s, 1.0) for s in nodes[:19]] + [("G19", 50.0)]  # one outlier
        g = annotate_regulation(WGraph.build(nodes, []), hits)
        text = render(g, RenderOptions(format="dot"))
        # the outlier saturates; everyone else still gets visible color
        assert 'fillcolor="#dc322f"' in text
        assert 'fillcolor="#ffffff"' not in text


def test_subgraph_oracle_on_random_edge_tables(tmp_path):
    rng = random.Random(2026)
    schema = catalog_entry("edge_strg_hs_symb").schema
    for case in range(15):
        names = [f"N{i:02d}" for i in range(rng.randint(2, 20))]
        rows = set()
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                if rng.random() < 0.4:
                    rows.add((a, b, rng.randint(1, 999)))
        rows = sorted(rows)
        root = tmp_path / f"case{case}"
        write_canonical(root / "hs/strg/edge_strg_hs_symb.tsv.gz", schema, rows,
                        build_date=DATE)
        with Store(StoreConfig(data_dir=root, backend=BackendKind.MEMORY)) as store:
            chosen = rng.sample(names, k=rng.randint(0, len(names)))
            threshold = rng.choice([0, 1, 250, 500, 999, 1000])
            g = string_subgraph(store, chosen, OrgToken.HS, threshold)
            want = {(a, b): w for a, b, w in rows
                    if a in set(chosen) and b in set(chosen) and w >= threshold}
            assert dict(g.edges) == want
            assert set(g.nodes) == set(chosen)

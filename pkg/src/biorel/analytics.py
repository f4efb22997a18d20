"""Experiment-driven analytics over the relation store.

The pipeline mirrors how differential-expression results are usually
consumed: load a CSV of (id, log2 fold change, p-value) rows, cut it down
to a hits list, translate protein accessions to gene symbols through the
two-hop accession -> gene-id -> symbol path, then either intersect with a
gene family and draw its interaction subgraph, or test every GO term for
over-representation of the hits against a background universe and draw
one subgraph per significant term.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .config import Options
from .errors import (
    DomainError,
    EmptyFamilyError,
    EmptyFileError,
    EmptyUniverseError,
    MissingColumnError,
)
from .graph import RenderOptions, WGraph, annotate_regulation, render_to_file, string_subgraph
from .relcore import OrgToken, format_go_id
from .store import FREE, QueryPattern, Store

logger = logging.getLogger(__name__)

__all__ = [
    "IdKind",
    "ColumnSpec",
    "ExperimentRow",
    "Experiment",
    "HitsFilter",
    "Hit",
    "GeneHit",
    "GeneFamily",
    "OraRow",
    "load_experiment",
    "filter_hits",
    "map_hits_to_genes",
    "family_from_file",
    "family_from_go_term",
    "family_string_graph",
    "hypergeom_tail",
    "bh_adjust",
    "go_over_representation",
    "go_over_string_graphs",
    "ora_tsv",
    "ORA_TSV_HEADER",
]


class IdKind(str, Enum):
    PROTEIN_ACCESSION = "protein_accession"
    GENE_SYMBOL = "gene_symbol"


@dataclass(frozen=True)
class ColumnSpec:
    id_col: str = "Protein"
    fc_col: str = "log2FC"
    pval_col: str = "p.value"


class ExperimentRow(NamedTuple):
    id: str
    log2fc: float
    pvalue: float


@dataclass
class Experiment:
    rows: list[ExperimentRow]
    id_kind: IdKind = IdKind.PROTEIN_ACCESSION
    skipped_rows: int = 0


@dataclass(frozen=True)
class HitsFilter:
    max_pvalue: float = 0.05
    min_abs_log2fc: float = 1.0
    direction: str = "both"

    def __post_init__(self) -> None:
        if not (0 < self.max_pvalue <= 1):
            raise DomainError(f"max_pvalue {self.max_pvalue} outside (0,1]")
        if self.min_abs_log2fc < 0:
            raise DomainError("min_abs_log2fc must be non-negative")
        if self.direction not in ("both", "up", "down"):
            raise DomainError(f"direction {self.direction!r} not both/up/down")

    def accepts(self, row: ExperimentRow) -> bool:
        if row.pvalue > self.max_pvalue:
            return False
        if abs(row.log2fc) < self.min_abs_log2fc:
            return False
        if self.direction == "up":
            return row.log2fc > 0
        if self.direction == "down":
            return row.log2fc < 0
        return True


class Hit(NamedTuple):
    id: str
    log2fc: float
    pvalue: float


class GeneHit(NamedTuple):
    symbol: str
    log2fc: float
    pvalue: float


@dataclass(frozen=True)
class GeneFamily:
    name: str
    symbols: frozenset[str]


@dataclass(frozen=True)
class OraRow:
    term: int
    term_name: str
    k: int
    n: int
    K: int
    N: int
    pvalue: float
    adjusted_pvalue: float


def load_experiment(csv_path: Path, columns: ColumnSpec | None = None,
                    id_kind: IdKind = IdKind.PROTEIN_ACCESSION) -> Experiment:
    """Read an experiment CSV; rows with unparseable numerics are skipped
    and counted on the returned Experiment."""
    columns = columns or ColumnSpec()
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{csv_path}: no header row") from None
        for col in (columns.id_col, columns.fc_col, columns.pval_col):
            if col not in header:
                raise MissingColumnError(f"{csv_path}: column {col!r} not in header")
        idx_id = header.index(columns.id_col)
        idx_fc = header.index(columns.fc_col)
        idx_p = header.index(columns.pval_col)
        rows: list[ExperimentRow] = []
        skipped = 0
        for raw in reader:
            if not raw or all(not c.strip() for c in raw):
                continue
            try:
                ident = raw[idx_id].strip()
                fc = float(raw[idx_fc])
                pv = float(raw[idx_p])
            except (ValueError, IndexError):
                skipped += 1
                continue
            if not ident or math.isnan(fc) or math.isnan(pv) or not (0 <= pv <= 1):
                skipped += 1
                continue
            rows.append(ExperimentRow(ident, fc, pv))
    if skipped:
        logger.info("%s: skipped %d unparseable rows", csv_path, skipped)
    return Experiment(rows=rows, id_kind=id_kind, skipped_rows=skipped)


def filter_hits(exp: Experiment, f: HitsFilter) -> list[Hit]:
    """Rows passing all three cutoffs, in input order."""
    return [Hit(r.id, r.log2fc, r.pvalue) for r in exp.rows if f.accepts(r)]


def _lookup_one(store: Store, rel: str, pattern: QueryPattern) -> list[tuple]:
    return list(store.query(rel, pattern))


def map_hits_to_genes(store: Store, hits: Sequence[Hit], org: OrgToken,
                      id_kind: IdKind = IdKind.PROTEIN_ACCESSION) -> list[GeneHit]:
    """Translate protein-level hits to gene symbols.

    Human accessions walk accession -> HGNC id -> symbol; mouse walks
    accession -> MGI id -> symbol.  Unmappable ids are dropped and
    counted.  When several hits land on one gene the row with the
    smallest p-value wins (ties break on the id).
    """
    best: dict[str, Hit] = {}
    order: list[str] = []
    dropped = 0
    for hit in hits:
        if id_kind is IdKind.GENE_SYMBOL:
            symbols = [hit.id]
        else:
            symbols = _symbols_for_accession(store, hit.id, org)
            if not symbols:
                dropped += 1
                continue
        for symbol in symbols:
            cur = best.get(symbol)
            if cur is None:
                best[symbol] = hit
                order.append(symbol)
            elif (hit.pvalue, hit.id) < (cur.pvalue, cur.id):
                best[symbol] = hit
    if dropped:
        logger.info("dropped %d hits with no gene mapping", dropped)
    return [GeneHit(sym, best[sym].log2fc, best[sym].pvalue) for sym in order]


def _symbols_for_accession(store: Store, accession: str, org: OrgToken) -> list[str]:
    symbols: list[str] = []
    if org is OrgToken.HS:
        for _, gene_id in _lookup_one(store, "map_unip_unip_hgnc",
                                      QueryPattern.of(accession, FREE)):
            for _, symbol in _lookup_one(store, "map_hgnc_hgnc_symb",
                                         QueryPattern.of(gene_id, FREE)):
                symbols.append(symbol)
    else:
        for gene_id, _ in _lookup_one(store, "map_mgim_mouse_mgim_unip",
                                      QueryPattern.of(FREE, accession)):
            for _, symbol in _lookup_one(store, "map_mgim_mouse_mgim_symb",
                                         QueryPattern.of(gene_id, FREE)):
                symbols.append(symbol)
    return sorted(set(symbols))


# --- gene families ---------------------------------------------------------

_FAMILY_HEADER_WORDS = {"symbol", "symb", "gene", "name"}


def family_from_file(path: Path, name: str | None = None) -> GeneFamily:
    """Family from a symbols file: one symbol per line, or the first CSV
    column.  A lone header cell like 'symbol' is tolerated."""
    path = Path(path)
    symbols: list[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cell = line.split(",")[0].strip().strip('"')
        if cell:
            symbols.append(cell)
    if symbols and symbols[0].lower() in _FAMILY_HEADER_WORDS:
        symbols = symbols[1:]
    if not symbols:
        raise EmptyFamilyError(f"{path}: no symbols found")
    return GeneFamily(name=name or path.stem, symbols=frozenset(symbols))


def family_from_go_term(store: Store, term: int, org: OrgToken) -> GeneFamily:
    """Family defined by direct membership of a GO term."""
    rel = "map_gont_symb_gont" if org is OrgToken.HS else "map_gont_mouse_symb_gont"
    members = {s for s, _ in store.query(rel, QueryPattern.of(FREE, int(term)))}
    if not members:
        raise EmptyFamilyError(f"{format_go_id(term)} has no annotated genes")
    return GeneFamily(name=format_go_id(term), symbols=frozenset(members))


# --- family pipeline -----------------------------------------------------

def _org_of(opts: Options) -> OrgToken:
    return OrgToken(opts.get("organism", "hs"))


def _filter_of(opts: Options) -> HitsFilter:
    return HitsFilter(
        max_pvalue=float(opts.get("max_pvalue")),
        min_abs_log2fc=float(opts.get("min_abs_log2fc")),
        direction=str(opts.get("direction")),
    )


def _columns_of(opts: Options) -> ColumnSpec:
    return ColumnSpec(
        id_col=str(opts.get("id_col")),
        fc_col=str(opts.get("fc_col")),
        pval_col=str(opts.get("pval_col")),
    )


def _render_options(opts: Options) -> RenderOptions:
    return RenderOptions(
        format=str(opts.get("format")),
        node_size=float(opts.get("node_size")),
        include_isolated=bool(opts.get("include_isolated")),
        color_up=str(opts.get("color_up")),
        color_down=str(opts.get("color_down")),
    )


def family_string_graph(store: Store, csv_path: Path, family: GeneFamily,
                        opts: Options | None = None) -> WGraph:
    """Annotated interaction subgraph of the family genes hit in an
    experiment.

    Stages: load -> filter -> map to genes -> intersect with the family
    (or union, when include_absent keeps non-hit family genes) ->
    STRING subgraph -> regulation coloring.
    """
    opts = opts or Options()
    if not family.symbols:
        raise EmptyFamilyError(f"family {family.name!r} is empty")
    org = _org_of(opts)
    exp = load_experiment(csv_path, _columns_of(opts),
                          id_kind=IdKind(opts.get("id_kind")))
    hits = filter_hits(exp, _filter_of(opts))
    gene_hits = map_hits_to_genes(store, hits, org, id_kind=exp.id_kind)
    in_family = [gh for gh in gene_hits if gh.symbol in family.symbols]
    symbols = [gh.symbol for gh in in_family]
    if opts.get("include_absent"):
        symbols += sorted(family.symbols - set(symbols))
    graph = string_subgraph(store, symbols, org, int(opts.get("min_weight")))
    graph = annotate_regulation(graph, in_family)
    render_dir = opts.get("render_dir")
    if render_dir:
        ropts = _render_options(opts)
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in family.name)
        render_to_file(graph, ropts, Path(render_dir) / f"{safe}.{ropts.format}")
    return graph


# --- over-representation --------------------------------------------------

def _log_choose(a: int, b: int) -> float:
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def hypergeom_tail(k: int, n: int, K: int, N: int) -> float:
    """Upper tail P[X >= k] of a hypergeometric draw.

    N is the universe size, K the members of the category, n the number
    drawn (the hits list), k the observed overlap.  Terms are accumulated
    in log space for stability.
    """
    for value in (k, n, K, N):
        if not isinstance(value, int) or isinstance(value, bool):
            raise DomainError("hypergeometric arguments must be integers")
    if not (0 <= K <= N and 0 <= n <= N and 0 <= k <= min(n, K)):
        raise DomainError(f"invalid hypergeometric arguments k={k} n={n} K={K} N={N}")
    if k == 0:
        return 1.0
    hi = min(n, K)
    denominator = _log_choose(N, n)
    log_terms = []
    for x in range(k, hi + 1):
        if n - x > N - K:
            continue
        log_terms.append(_log_choose(K, x) + _log_choose(N - K, n - x) - denominator)
    if not log_terms:
        return 0.0
    top = max(log_terms)
    total = math.exp(top) * sum(math.exp(t - top) for t in log_terms)
    return min(max(total, 0.0), 1.0)


def bh_adjust(pvalues: Sequence[float]) -> list[float]:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    m = len(pvalues)
    if m == 0:
        return []
    for p in pvalues:
        if not (0 <= p <= 1):
            raise DomainError(f"p-value {p} outside [0,1]")
    order = sorted(range(m), key=lambda i: pvalues[i])
    adjusted = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        i = order[rank - 1]
        running = min(running, pvalues[i] * m / rank)
        adjusted[i] = running
    return adjusted


def _memberships(store: Store, org: OrgToken, universe: set[str]) -> dict[int, set[str]]:
    rel = "map_gont_symb_gont" if org is OrgToken.HS else "map_gont_mouse_symb_gont"
    by_term: dict[int, set[str]] = {}
    for symbol, term in store.query_all(rel):
        if symbol in universe:
            by_term.setdefault(term, set()).add(symbol)
    return by_term


def _term_names(store: Store) -> dict[int, str]:
    return {term: name for term, name in store.query_all("map_gont_gont_gonm")}


def go_over_representation(store: Store, gene_hits: Sequence[str],
                           universe: Sequence[str], org: OrgToken,
                           opts: Options | None = None) -> list[OraRow]:
    """Hypergeometric over-representation of every GO term hit at least
    once, BH-adjusted, sorted by p-value."""
    universe_set = set(universe)
    if not universe_set:
        raise EmptyUniverseError("empty background universe")
    hits = set(gene_hits) & universe_set
    n, N = len(hits), len(universe_set)
    by_term = _memberships(store, org, universe_set)
    names = _term_names(store)
    tested: list[tuple[int, int, int, float]] = []
    for term in sorted(by_term):
        members = by_term[term]
        k = len(members & hits)
        if k == 0:
            continue
        K = len(members)
        tested.append((term, k, K, hypergeom_tail(k, n, K, N)))
    adjusted = bh_adjust([t[3] for t in tested])
    rows = [
        OraRow(term=term, term_name=names.get(term, ""), k=k, n=n, K=K, N=N,
               pvalue=p, adjusted_pvalue=adj)
        for (term, k, K, p), adj in zip(tested, adjusted)
    ]
    rows.sort(key=lambda r: (r.pvalue, r.term))
    return rows


ORA_TSV_HEADER = "term\tname\tk\tn\tK\tN\tpvalue\tadj_pvalue"


def ora_tsv(rows: Iterable[OraRow]) -> str:
    lines = [ORA_TSV_HEADER]
    for r in rows:
        lines.append(
            f"{format_go_id(r.term)}\t{r.term_name}\t{r.k}\t{r.n}\t{r.K}\t{r.N}"
            f"\t{r.pvalue:.6g}\t{r.adjusted_pvalue:.6g}"
        )
    return "\n".join(lines) + "\n"


def go_over_string_graphs(store: Store, csv_path: Path,
                          opts: Options | None = None) -> list[tuple[OraRow, WGraph]]:
    """Significant GO terms for an experiment plus one interaction graph
    per term over the hit genes belonging to it.

    The background universe defaults to every gene mapped from the
    experiment file; ``universe_file`` in the options overrides it.
    """
    opts = opts or Options()
    org = _org_of(opts)
    exp = load_experiment(csv_path, _columns_of(opts), id_kind=IdKind(opts.get("id_kind")))
    all_rows = [Hit(r.id, r.log2fc, r.pvalue) for r in exp.rows]
    mapped_all = map_hits_to_genes(store, all_rows, org, id_kind=exp.id_kind)
    universe_file = opts.get("universe_file")
    if universe_file:
        universe = [
            line.strip() for line in Path(universe_file).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    else:
        universe = [gh.symbol for gh in mapped_all]
    hits = filter_hits(exp, _filter_of(opts))
    gene_hits = map_hits_to_genes(store, hits, org, id_kind=exp.id_kind)
    hit_symbols = [gh.symbol for gh in gene_hits]

    rows = go_over_representation(store, hit_symbols, universe, org, opts)
    alpha = float(opts.get("alpha"))
    significant = [r for r in rows if r.adjusted_pvalue <= alpha]

    by_term = _memberships(store, org, set(universe))
    out: list[tuple[OraRow, WGraph]] = []
    render_dir = opts.get("render_dir")
    for row in significant:
        members = by_term.get(row.term, set())
        symbols = [s for s in hit_symbols if s in members]
        graph = string_subgraph(store, symbols, org, int(opts.get("min_weight")))
        graph = annotate_regulation(graph, [gh for gh in gene_hits if gh.symbol in members])
        if render_dir:
            ropts = _render_options(opts)
            render_to_file(graph, ropts,
                           Path(render_dir) / f"GO_{row.term:07d}.{ropts.format}")
        out.append((row, graph))
    return out

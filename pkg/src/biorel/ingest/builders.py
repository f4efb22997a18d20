"""Builders turning upstream database dumps into canonical relation files.

Each builder consumes a SourceDump (a role -> path mapping over the pinned
fixture formats below) and emits one canonical .tsv.gz per relation under
``out_dir/<org>/<db>/``.  Malformed upstream rows are skipped and counted,
never fatal; skip counts go to the module logger and, where meaningful,
into the canonical header.

Pinned dump formats:

  hgnc   role "complete_set": TSV, header with hgnc_id, symbol, status.
  mgim   role "genes":   TSV, header with mgi_accession_id, symbol, status
                         (O = official, W = withdrawn);
         role "uniprot": TSV, header with mgi_accession_id, uniprot_ids
                         (space separated accessions).
  unip   role "idmapping": headerless 3-column TSV (accession, type, value);
                           rows with type == HGNC feed the gene maps.
  gont   role "terms":     TSV, header with go_id, name, namespace;
         role "relations": TSV, header with child, relation, parent;
         roles "annotations_hs"/"annotations_mouse": TSV, header with
                           symbol, go_id.
  strg   role "links":   space separated, header
                         "protein1 protein2 combined_score";
         role "aliases": TSV, header with string_protein_id, alias, source;
                         rows with source == "symbol" define the
                         protein -> gene symbol mapping.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..canonical import canonical_rel_path, write_canonical
from ..errors import (
    BioRelError,
    BuilderNotImplementedError,
    MissingColumnError,
)
from ..relcore import (
    GO_EDGE_LABELS,
    WEIGHT_MAX,
    WEIGHT_MIN,
    OrgToken,
    catalog_entry,
)

logger = logging.getLogger(__name__)

__all__ = [
    "SourceDump",
    "load_manifest",
    "build_hgnc",
    "build_mgim",
    "build_unip",
    "build_gont",
    "build_strg",
    "build_ense",
    "build_ncbi",
    "build_pros",
    "BUILDERS",
    "run_builder",
]


@dataclass
class SourceDump:
    """One upstream snapshot: which database, which organism, which files."""

    db: str
    org: OrgToken
    files: dict[str, Path] = field(default_factory=dict)
    format_version: str = "1"

    def path(self, role: str) -> Path:
        try:
            return Path(self.files[role])
        except KeyError:
            raise BioRelError(f"{self.db} dump is missing required role {role!r}") from None


def load_manifest(path: Path) -> dict[str, Path]:
    """Read a build manifest: one 'role<TAB>path' line per dump file.

    Relative paths resolve against the manifest's directory.
    """
    base = Path(path).parent
    files: dict[str, Path] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        role, sep, raw = line.partition("\t")
        if not sep:
            raise BioRelError(f"{path}: manifest line needs role<TAB>path: {line!r}")
        p = Path(raw)
        files[role] = p if p.is_absolute() else base / p
    return files


def _read_tsv(path: Path, required: tuple[str, ...]) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumnError(f"{path}: empty file, no header") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    for col in required:
        if col not in header:
            raise MissingColumnError(f"{path}: required column {col!r} not in header")
    return header, rows


def _write(entry_name: str, rows, out_dir: Path, source_url: str,
           build_date: str | None, extras: dict[str, str] | None = None) -> Path:
    entry = catalog_entry(entry_name)
    path = Path(out_dir) / canonical_rel_path(entry.schema)
    write_canonical(path, entry.schema, rows, source_url=source_url,
                    build_date=build_date, extras=extras)
    return path


def _int_id(text: str, prefix: str) -> int | None:
    text = text.strip()
    if text.upper().startswith(prefix.upper() + ":"):
        text = text.split(":", 1)[1]
    return int(text) if text.isdigit() else None


def build_hgnc(dump: SourceDump, out_dir: Path, *, build_date: str | None = None) -> list[Path]:
    """Gene id/symbol maps from the HGNC complete set."""
    src = dump.path("complete_set")
    header, rows = _read_tsv(src, ("hgnc_id", "symbol", "status"))
    col = {name: header.index(name) for name in header}
    pairs: set[tuple[int, str]] = set()
    withdrawn = malformed = 0
    for row in rows:
        status = row[col["status"]].strip()
        if status != "Approved":
            withdrawn += 1
            continue
        hid = _int_id(row[col["hgnc_id"]], "HGNC")
        symbol = row[col["symbol"]].strip()
        if hid is None or not symbol:
            malformed += 1
            continue
        pairs.add((hid, symbol))
    if withdrawn or malformed:
        logger.info("hgnc build: excluded %d withdrawn and %d malformed rows",
                    withdrawn, malformed)
    url = str(src)
    return [
        _write("map_hgnc_hgnc_symb", sorted(pairs), out_dir, url, build_date),
        _write("map_hgnc_symb_hgnc", sorted((s, h) for h, s in pairs), out_dir, url, build_date),
    ]


def build_mgim(dump: SourceDump, out_dir: Path, *, build_date: str | None = None) -> list[Path]:
    """Mouse marker symbol and protein maps from the MGI reports."""
    genes_src = dump.path("genes")
    header, rows = _read_tsv(genes_src, ("mgi_accession_id", "symbol", "status"))
    col = {name: header.index(name) for name in header}
    symb_pairs: set[tuple[int, str]] = set()
    withdrawn = malformed = 0
    for row in rows:
        if row[col["status"]].strip() == "W":
            withdrawn += 1
            continue
        mid = _int_id(row[col["mgi_accession_id"]], "MGI")
        # Mouse symbols are kept verbatim: a sizable share is not yet
        # standardised, so no casing rule is enforced here.
        symbol = row[col["symbol"]].strip()
        if mid is None or not symbol:
            malformed += 1
            continue
        symb_pairs.add((mid, symbol))

    unip_src = dump.path("uniprot")
    uheader, urows = _read_tsv(unip_src, ("mgi_accession_id", "uniprot_ids"))
    ucol = {name: uheader.index(name) for name in uheader}
    unip_pairs: set[tuple[int, str]] = set()
    for row in urows:
        mid = _int_id(row[ucol["mgi_accession_id"]], "MGI")
        if mid is None:
            malformed += 1
            continue
        for acc in row[ucol["uniprot_ids"]].split():
            unip_pairs.add((mid, acc))
    if withdrawn or malformed:
        logger.info("mgim build: excluded %d withdrawn and %d malformed rows",
                    withdrawn, malformed)
    return [
        _write("map_mgim_mouse_mgim_symb", sorted(symb_pairs), out_dir, str(genes_src), build_date),
        _write("map_mgim_mouse_mgim_unip", sorted(unip_pairs), out_dir, str(unip_src), build_date),
    ]


def build_unip(dump: SourceDump, out_dir: Path, *, build_date: str | None = None) -> list[Path]:
    """Gene/protein maps (both directions) from a UniProt idmapping slice."""
    src = dump.path("idmapping")
    pairs: set[tuple[int, str]] = set()
    malformed = 0
    with open(src, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 3:
                malformed += 1
                continue
            acc, kind, value = (c.strip() for c in cells)
            if kind != "HGNC":
                continue
            hid = _int_id(value, "HGNC")
            if hid is None or not acc:
                malformed += 1
                continue
            pairs.add((hid, acc))
    if malformed:
        logger.info("unip build: skipped %d malformed rows", malformed)
    url = str(src)
    return [
        _write("map_unip_hgnc_unip", sorted(pairs), out_dir, url, build_date),
        _write("map_unip_unip_hgnc", sorted((a, h) for h, a in pairs), out_dir, url, build_date),
    ]


def _go_id(text: str) -> int | None:
    return _int_id(text, "GO")


def build_gont(dump: SourceDump, out_dir: Path, *, build_date: str | None = None) -> list[Path]:
    """Term names, term-to-term edges and per-organism membership maps."""
    out: list[Path] = []
    bad_term_ids = 0

    terms_src = dump.path("terms")
    header, rows = _read_tsv(terms_src, ("go_id", "name"))
    col = {name: header.index(name) for name in header}
    names: set[tuple[int, str]] = set()
    for row in rows:
        term = _go_id(row[col["go_id"]])
        if term is None:
            bad_term_ids += 1
            continue
        names.add((term, row[col["name"]].strip()))
    out.append(_write("map_gont_gont_gonm", sorted(names), out_dir, str(terms_src), build_date))

    rel_src = dump.path("relations")
    header, rows = _read_tsv(rel_src, ("child", "relation", "parent"))
    col = {name: header.index(name) for name in header}
    by_label: dict[str, set[tuple[int, int]]] = {label: set() for label in GO_EDGE_LABELS}
    unregistered = 0
    for row in rows:
        child, parent = _go_id(row[col["child"]]), _go_id(row[col["parent"]])
        label = row[col["relation"]].strip()
        if child is None or parent is None:
            bad_term_ids += 1
            continue
        if label not in by_label:
            unregistered += 1
            continue
        by_label[label].add((child, parent))
    if unregistered:
        logger.info("gont build: skipped %d rows with unregistered relation labels",
                    unregistered)
    for label, edges in by_label.items():
        if edges:
            out.append(_write(f"edge_gont_{label}", sorted(edges), out_dir,
                              str(rel_src), build_date))

    for role, rel_name in (
        ("annotations_hs", "map_gont_symb_gont"),
        ("annotations_mouse", "map_gont_mouse_symb_gont"),
    ):
        if role not in dump.files:
            continue
        ann_src = dump.path(role)
        header, rows = _read_tsv(ann_src, ("symbol", "go_id"))
        col = {name: header.index(name) for name in header}
        members: set[tuple[str, int]] = set()
        for row in rows:
            term = _go_id(row[col["go_id"]])
            symbol = row[col["symbol"]].strip()
            if term is None or not symbol:
                bad_term_ids += 1
                continue
            members.add((symbol, term))
        out.append(_write(rel_name, sorted(members), out_dir, str(ann_src), build_date))

    if bad_term_ids:
        logger.info("gont build: skipped %d rows with malformed term ids", bad_term_ids)
    return out


def build_strg(dump: SourceDump, org: OrgToken, out_dir: Path,
               *, build_date: str | None = None) -> list[Path]:
    """Weighted symbol-level interaction edges from a STRING snapshot.

    Protein pairs are translated to gene symbols through the alias file;
    edges are stored once under lexicographic node order with the maximum
    score seen for the pair.  Pairs with an unmappable endpoint, self
    loops after mapping, and scores outside (0,1000) are dropped and
    counted.
    """
    alias_src = dump.path("aliases")
    header, rows = _read_tsv(alias_src, ("string_protein_id", "alias", "source"))
    col = {name: header.index(name) for name in header}
    symbol_of: dict[str, str] = {}
    for row in rows:
        if row[col["source"]].strip() != "symbol":
            continue
        symbol_of.setdefault(row[col["string_protein_id"]].strip(), row[col["alias"]].strip())

    links_src = dump.path("links")
    edges: dict[tuple[str, str], int] = {}
    missing_alias = malformed_score = self_loops = 0
    with open(links_src, "r", encoding="utf-8") as fh:
        head = fh.readline().split()
        for req in ("protein1", "protein2", "combined_score"):
            if req not in head:
                raise MissingColumnError(f"{links_src}: required column {req!r} not in header")
        idx = {name: head.index(name) for name in head}
        for line in fh:
            cells = line.split()
            if len(cells) != len(head):
                malformed_score += 1
                continue
            p1, p2 = cells[idx["protein1"]], cells[idx["protein2"]]
            raw = cells[idx["combined_score"]]
            try:
                score = int(raw)
            except ValueError:
                malformed_score += 1
                continue
            if not (WEIGHT_MIN <= score <= WEIGHT_MAX):
                malformed_score += 1
                continue
            a, b = symbol_of.get(p1), symbol_of.get(p2)
            if a is None or b is None:
                missing_alias += 1
                continue
            if a == b:
                self_loops += 1
                continue
            key = (a, b) if a < b else (b, a)
            prev = edges.get(key)
            if prev is None or score > prev:
                edges[key] = score
    if missing_alias or malformed_score or self_loops:
        logger.info(
            "strg build (%s): dropped %d unmappable, %d bad-score, %d self-loop links",
            org.value, missing_alias, malformed_score, self_loops,
        )
    rel = "edge_strg_hs_symb" if org is OrgToken.HS else "edge_strg_mouse_symb"
    out = _write(
        rel,
        sorted((a, b, w) for (a, b), w in edges.items()),
        out_dir,
        str(links_src),
        build_date,
        extras={
            "dropped_unmappable": str(missing_alias),
            "dropped_bad_score": str(malformed_score),
            "dropped_self_loops": str(self_loops),
        },
    )
    return [out]


def build_ense(dump: SourceDump, out_dir: Path, **_: object) -> list[Path]:
    raise BuilderNotImplementedError("ense builder is a registered stub; no Ensembl ingestion yet")


def build_ncbi(dump: SourceDump, out_dir: Path, **_: object) -> list[Path]:
    raise BuilderNotImplementedError("ncbi builder is a registered stub; no NCBI ingestion yet")


def build_pros(dump: SourceDump, out_dir: Path, **_: object) -> list[Path]:
    raise BuilderNotImplementedError("pros builder is a registered stub; no PROSITE ingestion yet")


BUILDERS = {
    "hgnc": build_hgnc,
    "mgim": build_mgim,
    "unip": build_unip,
    "gont": build_gont,
    "strg": build_strg,
    "ense": build_ense,
    "ncbi": build_ncbi,
    "pros": build_pros,
}


def run_builder(db: str, org: OrgToken, files: dict[str, Path], out_dir: Path,
                *, build_date: str | None = None) -> list[Path]:
    """Dispatch to the builder for one database token."""
    if db not in BUILDERS:
        raise BioRelError(f"no builder registered for database token {db!r}")
    dump = SourceDump(db=db, org=org, files=dict(files))
    if db == "strg":
        return build_strg(dump, org, out_dir, build_date=build_date)
    return BUILDERS[db](dump, out_dir, build_date=build_date)

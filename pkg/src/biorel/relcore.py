"""Relation identities, the naming convention and the built-in catalog.

A relation name is a sequence of underscore separated tokens.  The first
token is the kind (``map`` or ``edge``), the second the source database,
then an optional organism token, and finally either an object/subject
token pair (maps), a single object token (interaction edges) or a free
label such as ``is_a`` (ontology edges).

Human (``hs``) is the implicit organism: map names and label-tailed edge
names omit it, while object-tailed edge names such as ``edge_strg_hs_symb``
always spell it out.  ``mouse`` is always explicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    MalformedNameError,
    MalformedSelectorError,
    TableNotInCatalogError,
    UnknownDbTokenError,
    UnknownOrgTokenError,
)

__all__ = [
    "RelKind",
    "OrgToken",
    "ColumnType",
    "RelName",
    "RelationSchema",
    "RelationInfo",
    "CellSelector",
    "CatalogEntry",
    "DB_TOKENS",
    "OBJECT_TOKENS",
    "WEIGHT_MIN",
    "WEIGHT_MAX",
    "parse_rel_name",
    "format_rel_name",
    "selector_parse",
    "catalog_list",
    "catalog_entry",
    "format_go_id",
]


class RelKind(str, Enum):
    MAP = "map"
    EDGE = "edge"


class OrgToken(str, Enum):
    HS = "hs"
    MOUSE = "mouse"


class ColumnType(str, Enum):
    INTEGER = "integer"
    SYMBOL = "symbol"
    WEIGHT = "weight"
    TEXT = "text"


# Source database tokens are exactly four lowercase letters.
DB_TOKENS = frozenset({"ense", "gont", "hgnc", "mgim", "ncbi", "pros", "strg", "unip"})

# Tokens accepted in the object/subject slots of a name.  Every database
# token names its own primary identifier column; the rest are product
# aliases (gene symbol, GO term name, Ensembl gene/protein ids).
OBJECT_TOKENS = DB_TOKENS | frozenset({"symb", "gonm", "ensg", "ensp"})

# STRING-style confidence weights live strictly inside (0, 1000).
WEIGHT_MIN = 1
WEIGHT_MAX = 999

_ORG_VALUES = {o.value for o in OrgToken}


@dataclass(frozen=True)
class RelName:
    """Parsed identity of one relation.

    Maps carry ``object`` and ``subject``; edges carry either ``object``
    (interaction edges, e.g. ``symb``) or ``label`` (ontology edges,
    e.g. ``is_a``), never both.
    """

    kind: RelKind
    db: str
    org: OrgToken
    object: str | None = None
    subject: str | None = None
    label: str | None = None
    arity: int = 2

    def __post_init__(self) -> None:
        if self.db not in DB_TOKENS:
            raise UnknownDbTokenError(f"unknown database token {self.db!r}")
        if self.kind is RelKind.MAP:
            if self.label is not None or self.object is None or self.subject is None:
                raise MalformedNameError("map relations need object and subject, no label")
        else:
            has_object = self.object is not None
            has_label = self.label is not None
            if has_object == has_label:
                raise MalformedNameError("edge relations need exactly one of object/label")
            if has_label:
                # Labels that the name grammar would re-read as an organism
                # or a product token cannot round-trip.
                head, _, _ = self.label.partition("_")
                if head in _ORG_VALUES:
                    raise MalformedNameError(
                        f"edge label {self.label!r} starts with an organism token"
                    )
                if "_" not in self.label and self.label in OBJECT_TOKENS:
                    raise MalformedNameError(
                        f"edge label {self.label!r} collides with a product token"
                    )
        if self.arity < 2:
            raise MalformedNameError("relations have at least two columns")

    def __str__(self) -> str:
        return format_rel_name(self)


@dataclass(frozen=True)
class RelationSchema:
    """Column names/types plus the key columns used for indexing."""

    name: RelName
    columns: tuple[tuple[str, ColumnType], ...]
    key_columns: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.columns) != self.name.arity:
            raise MalformedNameError(
                f"schema for {self.name} has {len(self.columns)} columns, arity is {self.name.arity}"
            )
        if not self.key_columns:
            raise MalformedNameError("key_columns must be non-empty")

    @property
    def arity(self) -> int:
        return len(self.columns)

    def column_type(self, index: int) -> ColumnType:
        return self.columns[index][1]


class RelationInfo:
    """Ordered key/value metadata attached to a relation (its ``_info`` sidecar)."""

    REQUIRED = ("row_count", "source_db", "build_date", "source_url", "organism")

    def __init__(self, entries: dict[str, str] | None = None) -> None:
        self._entries: dict[str, str] = dict(entries or {})

    def get(self, key: str, default: str | None = None) -> str | None:
        return self._entries.get(key, default)

    def set(self, key: str, value: str) -> None:
        self._entries[key] = str(value)

    @property
    def row_count(self) -> int:
        return int(self._entries.get("row_count", "0"))

    def items(self):
        return self._entries.items()

    def as_dict(self) -> dict[str, str]:
        return dict(self._entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RelationInfo) and self._entries == other._entries

    def __repr__(self) -> str:
        return f"RelationInfo({self._entries!r})"


@dataclass(frozen=True)
class CellSelector:
    """Two-tier hierarchical selector: nothing, an organism, or organism/db."""

    org: OrgToken | None = None
    db: str | None = None

    def __post_init__(self) -> None:
        if self.db is not None and self.org is None:
            raise MalformedSelectorError("database selector requires an organism")
        if self.db is not None and self.db not in DB_TOKENS:
            raise UnknownDbTokenError(f"unknown database token {self.db!r}")

    def matches(self, org: OrgToken, db: str) -> bool:
        if self.org is not None and org is not self.org:
            return False
        if self.db is not None and db != self.db:
            return False
        return True


@dataclass(frozen=True)
class CatalogEntry:
    """One registered relation: its name, owning cell and schema."""

    name: RelName
    org: OrgToken
    cell_path: str
    schema: RelationSchema = field(repr=False)

    def __post_init__(self) -> None:
        expect = f"{self.org.value}/{self.name.db}"
        if self.cell_path != expect:
            raise MalformedNameError(f"cell path {self.cell_path!r} != {expect!r}")


def _check_tail_token(token: str, what: str) -> str:
    if token in OBJECT_TOKENS:
        return token
    if len(token) == 4 and token.isascii() and token.isalnum() and token.islower():
        return token
    raise MalformedNameError(f"{what} token {token!r} is not a product token")


def parse_rel_name(name: str) -> RelName:
    """Parse an underscore separated relation name into a RelName.

    Human map and ontology-edge names may omit the ``hs`` token; the
    parser restores it.  Unknown database or organism tokens are rejected.
    """
    if not name or not isinstance(name, str):
        raise MalformedNameError("empty relation name")
    parts = name.split("_")
    if len(parts) < 3:
        raise MalformedNameError(f"{name!r}: too few underscore separated parts")
    if parts[0] == RelKind.MAP.value:
        kind = RelKind.MAP
    elif parts[0] == RelKind.EDGE.value:
        kind = RelKind.EDGE
    else:
        raise MalformedNameError(f"{name!r}: first token must be 'map' or 'edge'")
    db = parts[1]
    if db not in DB_TOKENS:
        raise UnknownDbTokenError(f"{name!r}: unknown database token {db!r}")
    rest = parts[2:]
    if rest and rest[0] in _ORG_VALUES:
        org = OrgToken(rest[0])
        rest = rest[1:]
    else:
        org = OrgToken.HS

    if kind is RelKind.MAP:
        if len(rest) != 2:
            raise MalformedNameError(f"{name!r}: map names need object and subject tokens")
        obj = _check_tail_token(rest[0], "object")
        subj = _check_tail_token(rest[1], "subject")
        return RelName(kind=kind, db=db, org=org, object=obj, subject=subj, arity=2)

    if not rest:
        raise MalformedNameError(f"{name!r}: edge name has no tail")
    if len(rest) == 1 and rest[0] in OBJECT_TOKENS:
        # Interaction edge over a product, carries a weight column.
        return RelName(kind=kind, db=db, org=org, object=rest[0], arity=3)
    # Ontology edge named by the relation label itself (is_a, part_of, ...).
    return RelName(kind=kind, db=db, org=org, label="_".join(rest), arity=2)


def format_rel_name(r: RelName, style: str = "implicit_hs") -> str:
    """Render a RelName back to text.

    ``implicit_hs`` omits the hs token where the convention allows it
    (maps and label edges); ``explicit`` always writes the organism.
    Interaction edges spell the organism out in both styles.
    """
    if style not in ("implicit_hs", "explicit"):
        raise ValueError(f"unknown style {style!r}")
    parts = [r.kind.value, r.db]
    if r.kind is RelKind.MAP or r.label is not None:
        if style == "explicit" or r.org is not OrgToken.HS:
            parts.append(r.org.value)
    else:
        parts.append(r.org.value)
    if r.kind is RelKind.MAP:
        parts.extend([r.object, r.subject])
    elif r.object is not None:
        parts.append(r.object)
    else:
        parts.append(r.label)
    return "_".join(parts)


def selector_parse(text: str) -> CellSelector:
    """Parse '', 'org' or 'org/db' into a CellSelector."""
    if text is None:
        text = ""
    text = text.strip()
    if not text:
        return CellSelector()
    bits = text.split("/")
    if len(bits) > 2 or any(not b for b in bits):
        raise MalformedSelectorError(f"bad selector {text!r}; expected '', 'org' or 'org/db'")
    if bits[0] not in _ORG_VALUES:
        raise UnknownOrgTokenError(f"unknown organism token {bits[0]!r}")
    org = OrgToken(bits[0])
    if len(bits) == 1:
        return CellSelector(org=org)
    if bits[1] not in DB_TOKENS:
        raise UnknownDbTokenError(f"unknown database token {bits[1]!r}")
    return CellSelector(org=org, db=bits[1])


def format_go_id(term: int) -> str:
    """Present an integer GO term id in its zero-padded text form."""
    return f"GO:{term:07d}"


# --- built-in catalog ----------------------------------------------------

def _map_entry(name: str, col_types: tuple[ColumnType, ColumnType]) -> CatalogEntry:
    rel = parse_rel_name(name)
    cols = ((rel.object, col_types[0]), (rel.subject, col_types[1]))
    schema = RelationSchema(name=rel, columns=cols, key_columns=(0,))
    return CatalogEntry(name=rel, org=rel.org, cell_path=f"{rel.org.value}/{rel.db}", schema=schema)


def _edge_entry(name: str) -> CatalogEntry:
    rel = parse_rel_name(name)
    if rel.object is not None:
        cols = (
            (f"{rel.object}_a", ColumnType.SYMBOL),
            (f"{rel.object}_b", ColumnType.SYMBOL),
            ("weight", ColumnType.WEIGHT),
        )
        key = (0, 1)
    else:
        cols = (("child", ColumnType.INTEGER), ("parent", ColumnType.INTEGER))
        key = (0,)
    schema = RelationSchema(name=rel, columns=cols, key_columns=key)
    return CatalogEntry(name=rel, org=rel.org, cell_path=f"{rel.org.value}/{rel.db}", schema=schema)


_I = ColumnType.INTEGER
_S = ColumnType.SYMBOL
_T = ColumnType.TEXT

# Relations served for human and mouse.  GO term-to-term edges live in the
# hs/gont cell; besides is_a the edge labels are placeholders pending
# verification against a live GO build.
_CATALOG: tuple[CatalogEntry, ...] = (
    _map_entry("map_hgnc_hgnc_symb", (_I, _S)),
    _map_entry("map_hgnc_symb_hgnc", (_S, _I)),
    _map_entry("map_unip_hgnc_unip", (_I, _S)),
    _map_entry("map_unip_unip_hgnc", (_S, _I)),
    _map_entry("map_gont_gont_gonm", (_I, _T)),
    _map_entry("map_gont_symb_gont", (_S, _I)),
    _edge_entry("edge_gont_is_a"),
    _edge_entry("edge_gont_part_of"),
    _edge_entry("edge_gont_regulates"),
    _edge_entry("edge_gont_positively_regulates"),
    _edge_entry("edge_gont_negatively_regulates"),
    _edge_entry("edge_strg_hs_symb"),
    _map_entry("map_mgim_mouse_mgim_symb", (_I, _S)),
    _map_entry("map_mgim_mouse_mgim_unip", (_I, _S)),
    _map_entry("map_gont_mouse_symb_gont", (_S, _I)),
    _edge_entry("edge_strg_mouse_symb"),
)

_BY_NAME: dict[str, CatalogEntry] = {format_rel_name(e.name): e for e in _CATALOG}

# GO edge labels a build may emit (mirrors the catalog above).
GO_EDGE_LABELS = tuple(
    e.name.label for e in _CATALOG if e.name.db == "gont" and e.name.label is not None
)


def catalog_list(selector: CellSelector | None = None) -> list[CatalogEntry]:
    """All catalog entries matching the selector, ordered by (org, db, name)."""
    sel = selector or CellSelector()
    found = [e for e in _CATALOG if sel.matches(e.org, e.name.db)]
    found.sort(key=lambda e: (e.org.value, e.name.db, format_rel_name(e.name)))
    return found


def catalog_entry(name: RelName | str) -> CatalogEntry:
    """Look one relation up by name; raises if it is not registered."""
    rel = parse_rel_name(name) if isinstance(name, str) else name
    key = format_rel_name(rel)
    entry = _BY_NAME.get(key)
    if entry is None:
        raise TableNotInCatalogError(f"{key} is not a registered relation")
    return entry

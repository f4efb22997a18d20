"""Reading and writing canonical relation files.

A canonical file is a gzip-compressed UTF-8 text file with LF line
endings.  It starts with a header block of ``#key<TAB>value`` lines
(name, arity, columns, organism, source_db, source_url, build_date,
row_count, then any extra keys) followed by one tab-separated row per
line.  Tabs, newlines and backslashes inside field values are
backslash-escaped, so the format round-trips arbitrary cell content.

Writers pin gzip mtime to zero: identical inputs give byte-identical
files.
"""

from __future__ import annotations

import gzip
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .errors import CorruptFileError, SchemaMismatchError
from .relcore import (
    WEIGHT_MAX,
    WEIGHT_MIN,
    ColumnType,
    RelationInfo,
    RelationSchema,
    format_rel_name,
)

__all__ = [
    "write_canonical",
    "read_canonical",
    "read_header",
    "canonical_rel_path",
    "escape_field",
    "unescape_field",
]

_HEADER_ORDER = (
    "name",
    "arity",
    "columns",
    "organism",
    "source_db",
    "source_url",
    "build_date",
    "row_count",
)


def escape_field(value: str) -> str:
    return (
        value.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def unescape_field(value: str) -> str:
    out: list[str] = []
    it = iter(value)
    for ch in it:
        if ch != "\\":
            out.append(ch)
            continue
        nxt = next(it, "")
        out.append({"t": "\t", "n": "\n", "r": "\r", "\\": "\\"}.get(nxt, nxt))
    return "".join(out)


def canonical_rel_path(schema_or_name) -> Path:
    """Relative cell path of a relation file: <org>/<db>/<name>.tsv.gz."""
    name = schema_or_name.name if isinstance(schema_or_name, RelationSchema) else schema_or_name
    return Path(name.org.value) / name.db / f"{format_rel_name(name)}.tsv.gz"


def utc_build_date() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _cell_to_text(value, ctype: ColumnType) -> str:
    if ctype in (ColumnType.INTEGER, ColumnType.WEIGHT):
        return str(int(value))
    return escape_field(str(value))


def _cell_from_text(text: str, ctype: ColumnType, where: str):
    if ctype in (ColumnType.INTEGER, ColumnType.WEIGHT):
        try:
            value = int(text)
        except ValueError:
            raise CorruptFileError(f"{where}: {text!r} is not an integer") from None
        if ctype is ColumnType.WEIGHT and not (WEIGHT_MIN <= value <= WEIGHT_MAX):
            raise CorruptFileError(f"{where}: weight {value} outside ({WEIGHT_MIN - 1},{WEIGHT_MAX + 1})")
        return value
    return unescape_field(text)


def write_canonical(
    path: Path,
    schema: RelationSchema,
    rows: Iterable[tuple],
    *,
    source_url: str = "",
    build_date: str | None = None,
    extras: dict[str, str] | None = None,
) -> RelationInfo:
    """Write rows under the given schema; returns the header metadata."""
    rows = list(rows)
    info = RelationInfo(
        {
            "name": format_rel_name(schema.name),
            "arity": str(schema.arity),
            "columns": ",".join(f"{n}:{t.value}" for n, t in schema.columns),
            "organism": schema.name.org.value,
            "source_db": schema.name.db,
            "source_url": source_url,
            "build_date": build_date or utc_build_date(),
            "row_count": str(len(rows)),
        }
    )
    for key in sorted(extras or {}):
        info.set(key, (extras or {})[key])

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
            lines: list[str] = []
            for key in _HEADER_ORDER:
                lines.append(f"#{key}\t{escape_field(info.get(key) or '')}\n")
            for key, value in info.items():
                if key not in _HEADER_ORDER:
                    lines.append(f"#{key}\t{escape_field(value)}\n")
            types = [t for _, t in schema.columns]
            for row in rows:
                if len(row) != schema.arity:
                    raise CorruptFileError(
                        f"{format_rel_name(schema.name)}: row {row!r} has wrong arity"
                    )
                lines.append("\t".join(_cell_to_text(c, t) for c, t in zip(row, types)) + "\n")
            gz.write("".join(lines).encode("utf-8"))
    return info


def _parse_header_lines(lines: Iterator[str], where: str) -> tuple[RelationInfo, str | None]:
    """Consume leading '#' lines; returns (info, first data line or None)."""
    info = RelationInfo()
    for line in lines:
        if not line.startswith("#"):
            return info, line
        body = line[1:].rstrip("\n")
        key, sep, value = body.partition("\t")
        if not sep:
            raise CorruptFileError(f"{where}: header line without value: {line!r}")
        info.set(key, unescape_field(value))
    return info, None


def read_header(path: Path) -> RelationInfo:
    """Read only the metadata block of a canonical file."""
    try:
        with gzip.open(path, "rt", encoding="utf-8", newline="\n") as fh:
            info, _ = _parse_header_lines(iter(fh), str(path))
    except (OSError, EOFError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{path}: cannot read header: {exc}") from exc
    return info


def read_canonical(
    path: Path,
    expect: RelationSchema | None = None,
) -> tuple[RelationInfo, list[tuple]]:
    """Read and validate a canonical file.

    When ``expect`` is given the declared name and column layout must
    match it (SchemaMismatchError otherwise).  Row cells are parsed to
    their column types; any inconsistency with the header row_count is a
    CorruptFileError.
    """
    path = Path(path)
    where = str(path)
    try:
        with gzip.open(path, "rt", encoding="utf-8", newline="\n") as fh:
            lines = iter(fh)
            info, first = _parse_header_lines(lines, where)
            declared = info.get("name")
            if declared is None or info.get("arity") is None:
                raise CorruptFileError(f"{where}: missing name/arity header")
            arity = int(info.get("arity"))
            if expect is not None:
                if declared != format_rel_name(expect.name):
                    raise SchemaMismatchError(
                        f"{where}: file holds {declared}, expected {format_rel_name(expect.name)}"
                    )
                if arity != expect.arity:
                    raise SchemaMismatchError(
                        f"{where}: declared arity {arity} != schema arity {expect.arity}"
                    )
                types = [t for _, t in expect.columns]
            else:
                cols = info.get("columns") or ""
                try:
                    types = [ColumnType(c.split(":", 1)[1]) for c in cols.split(",") if c]
                except (IndexError, ValueError):
                    raise CorruptFileError(f"{where}: bad columns header {cols!r}") from None
                if len(types) != arity:
                    raise CorruptFileError(f"{where}: columns header does not match arity")

            rows: list[tuple] = []
            line = first
            while line is not None:
                text = line.rstrip("\n")
                if text:
                    cells = text.split("\t")
                    if len(cells) != arity:
                        raise CorruptFileError(f"{where}: row with {len(cells)} cells, arity {arity}")
                    rows.append(tuple(_cell_from_text(c, t, where) for c, t in zip(cells, types)))
                line = next(lines, None)
    except (OSError, EOFError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{where}: unreadable: {exc}") from exc

    declared_count = info.get("row_count")
    if declared_count is None or int(declared_count) != len(rows):
        raise CorruptFileError(
            f"{where}: header row_count {declared_count} but {len(rows)} rows present"
        )
    return info, rows

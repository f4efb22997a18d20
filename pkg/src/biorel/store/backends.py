"""The three table backends: in-memory facts, an embedded key-value store
and an embedded SQL database.

All three satisfy the same contract: import a canonical row list, then
answer partially-bound scans with exactly the matching rows.  Result
order is deterministic per backend but differs between backends; callers
compare multisets.
"""

from __future__ import annotations

import json
import sqlite3
import struct
import threading
from pathlib import Path
from typing import Iterator, Sequence

import dbm

from ..errors import ImportFailedError
from ..relcore import ColumnType, RelKind, RelationSchema, format_rel_name


class _FreeType:
    """Singleton marking an unbound query position."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "FREE"


FREE = _FreeType()


def _indexed_columns(schema: RelationSchema) -> set[int]:
    # Maps are interrogated in both directions, so their second column is
    # indexed alongside the declared key columns.
    cols = set(schema.key_columns)
    if schema.name.kind is RelKind.MAP and schema.arity == 2:
        cols.add(1)
    return cols


def _match(row: tuple, bindings: Sequence) -> bool:
    return all(b is FREE or row[i] == b for i, b in enumerate(bindings))


class MemoryTables:
    """Plain in-process storage: a row list plus hash indexes."""

    persistent = False

    def __init__(self) -> None:
        self._tables: dict[str, tuple[list[tuple], dict[int, dict[object, list[int]]]]] = {}

    def import_table(self, schema: RelationSchema, rows: list[tuple]) -> int:
        index: dict[int, dict[object, list[int]]] = {c: {} for c in _indexed_columns(schema)}
        for i, row in enumerate(rows):
            for col, bucket in index.items():
                bucket.setdefault(row[col], []).append(i)
        self._tables[format_rel_name(schema.name)] = (list(rows), index)
        return len(rows)

    def has_table(self, rel: str) -> bool:
        return rel in self._tables

    def scan(self, schema: RelationSchema, bindings: Sequence) -> Iterator[tuple]:
        rows, index = self._tables[format_rel_name(schema.name)]
        bound_indexed = [i for i, b in enumerate(bindings) if b is not FREE and i in index]
        if bound_indexed:
            col = bound_indexed[0]
            for i in index[col].get(bindings[col], ()):
                if _match(rows[i], bindings):
                    yield rows[i]
        else:
            for row in rows:
                if _match(row, bindings):
                    yield row

    def row_count(self, schema: RelationSchema) -> int:
        return len(self._tables[format_rel_name(schema.name)][0])

    def close(self) -> None:
        self._tables.clear()


# --- kv backend ------------------------------------------------------------

def _encode_part(value) -> bytes:
    # Order-preserving: type tag, then big-endian offset binary for ints
    # or raw utf-8 for text.
    if isinstance(value, bool):
        raise ImportFailedError("boolean cells are not supported")
    if isinstance(value, int):
        return b"\x01" + struct.pack(">Q", value + (1 << 63))
    return b"\x02" + str(value).encode("utf-8")


def _encode_key(values: Sequence) -> bytes:
    # 0x00 bytes are escaped to 0x00 0xFF and each part ends with 0x00 0x00,
    # which keeps tuple ordering consistent with part-wise ordering.
    out = bytearray()
    for v in values:
        out += _encode_part(v).replace(b"\x00", b"\x00\xff")
        out += b"\x00\x00"
    return bytes(out)


class KvTables:
    """Embedded key-value storage via dbm, one file set per relation.

    Rows are grouped under their key-column tuple; two-column maps keep a
    mirrored reverse table so lookups by either column avoid a full scan.
    """

    persistent = True

    _FWD = b"F:"
    _REV = b"R:"
    _META_COUNT = b"M:count"

    def __init__(self, root: Path) -> None:
        self._root = Path(root)
        self._handles: dict[str, object] = {}
        self._lock = threading.Lock()

    def _path(self, rel: str) -> str:
        self._root.mkdir(parents=True, exist_ok=True)
        return str(self._root / rel)

    def _open(self, rel: str, flag: str):
        handle = self._handles.get(rel)
        if handle is None:
            handle = dbm.open(self._path(rel), flag)
            self._handles[rel] = handle
        return handle

    def import_table(self, schema: RelationSchema, rows: list[tuple]) -> int:
        rel = format_rel_name(schema.name)
        with self._lock:
            old = self._handles.pop(rel, None)
            if old is not None:
                old.close()
            db = dbm.open(self._path(rel), "n")
            self._handles[rel] = db
            forward: dict[bytes, list] = {}
            reverse: dict[bytes, list] = {}
            mirror = schema.name.kind is RelKind.MAP and schema.arity == 2
            for row in rows:
                key = self._FWD + _encode_key([row[c] for c in schema.key_columns])
                forward.setdefault(key, []).append(list(row))
                if mirror:
                    rkey = self._REV + _encode_key([row[1]])
                    reverse.setdefault(rkey, []).append(list(row))
            for key, group in forward.items():
                db[key] = json.dumps(group).encode("utf-8")
            for key, group in reverse.items():
                db[key] = json.dumps(group).encode("utf-8")
            db[self._META_COUNT] = str(len(rows)).encode("utf-8")
        return len(rows)

    def has_table(self, rel: str) -> bool:
        if rel in self._handles:
            return True
        try:
            return bool(dbm.whichdb(self._path(rel)))
        except OSError:
            return False

    def _rows_for_key(self, db, key: bytes) -> list[tuple]:
        blob = db.get(key)
        if blob is None:
            return []
        return [tuple(r) for r in json.loads(blob.decode("utf-8"))]

    def scan(self, schema: RelationSchema, bindings: Sequence) -> Iterator[tuple]:
        rel = format_rel_name(schema.name)
        with self._lock:
            db = self._open(rel, "r")
            key_cols = schema.key_columns
            if all(bindings[c] is not FREE for c in key_cols):
                key = self._FWD + _encode_key([bindings[c] for c in key_cols])
                rows = self._rows_for_key(db, key)
            elif (
                schema.name.kind is RelKind.MAP
                and schema.arity == 2
                and bindings[1] is not FREE
            ):
                rows = self._rows_for_key(db, self._REV + _encode_key([bindings[1]]))
            else:
                rows = []
                for key in db.keys():
                    if bytes(key).startswith(self._FWD):
                        rows.extend(self._rows_for_key(db, key))
        for row in rows:
            if _match(row, bindings):
                yield row

    def row_count(self, schema: RelationSchema) -> int:
        rel = format_rel_name(schema.name)
        with self._lock:
            db = self._open(rel, "r")
            blob = db.get(self._META_COUNT)
        return int(blob.decode("utf-8")) if blob else 0

    def close(self) -> None:
        with self._lock:
            for handle in self._handles.values():
                handle.close()
            self._handles.clear()


# --- sql backend ------------------------------------------------------------

_AFFINITY = {
    ColumnType.INTEGER: "INTEGER",
    ColumnType.WEIGHT: "INTEGER",
    ColumnType.SYMBOL: "TEXT",
    ColumnType.TEXT: "TEXT",
}


class SqlTables:
    """Embedded SQL storage: one SQLite file per store, one table per
    relation, indexes on key columns plus the second column of maps."""

    persistent = True

    def __init__(self, db_path: Path) -> None:
        self._db_path = Path(db_path)
        self._db_path.parent.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        self._tls = threading.local()
        self._all_conns: list[sqlite3.Connection] = []
        self._conn_lock = threading.Lock()

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(str(self._db_path), check_same_thread=False)
        with self._conn_lock:
            self._all_conns.append(conn)
        return conn

    def _reader(self) -> sqlite3.Connection:
        conn = getattr(self._tls, "conn", None)
        if conn is None:
            conn = self._connect()
            self._tls.conn = conn
        return conn

    def import_table(self, schema: RelationSchema, rows: list[tuple]) -> int:
        rel = format_rel_name(schema.name)
        cols = ", ".join(f"c{i} {_AFFINITY[t]}" for i, (_, t) in enumerate(schema.columns))
        placeholders = ", ".join("?" for _ in schema.columns)
        with self._write_lock:
            conn = self._reader()
            with conn:
                conn.execute(f'DROP TABLE IF EXISTS "{rel}"')
                conn.execute(f'CREATE TABLE "{rel}" ({cols})')
                conn.executemany(f'INSERT INTO "{rel}" VALUES ({placeholders})', rows)
                for col in _indexed_columns(schema):
                    conn.execute(f'CREATE INDEX "ix_{rel}_{col}" ON "{rel}" (c{col})')
        return len(rows)

    def has_table(self, rel: str) -> bool:
        cur = self._reader().execute(
            "SELECT 1 FROM sqlite_master WHERE type='table' AND name=?", (rel,)
        )
        return cur.fetchone() is not None

    def scan(self, schema: RelationSchema, bindings: Sequence) -> Iterator[tuple]:
        rel = format_rel_name(schema.name)
        where, params = [], []
        for i, b in enumerate(bindings):
            if b is not FREE:
                where.append(f"c{i} = ?")
                params.append(b)
        sql = f'SELECT * FROM "{rel}"'
        if where:
            sql += " WHERE " + " AND ".join(where)
        sql += " ORDER BY rowid"
        cur = self._reader().execute(sql, params)
        for row in cur:
            yield tuple(row)

    def row_count(self, schema: RelationSchema) -> int:
        rel = format_rel_name(schema.name)
        cur = self._reader().execute(f'SELECT COUNT(*) FROM "{rel}"')
        return int(cur.fetchone()[0])

    def close(self) -> None:
        with self._conn_lock:
            for conn in self._all_conns:
                try:
                    conn.close()
                except sqlite3.ProgrammingError:
                    pass
            self._all_conns.clear()
        self._tls = threading.local()

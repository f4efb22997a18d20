"""Backend-agnostic relation store with lazy table acquisition.

Tables start out as stubs.  The first query against a table locates its
canonical file under the data directory (fetching it from the configured
repository if the policy allows), imports it into the configured backend,
registers a handle, and only then answers the query.  Later queries reuse
the registered handle; acquisition is single-flight per table.
"""

from __future__ import annotations

import fcntl
import sys
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Sequence

from ..canonical import canonical_rel_path, read_canonical, read_header
from ..errors import (
    BackendUnavailableError,
    DataDirUnavailableError,
    MalformedPatternError,
    TableMissingAndFetchForbiddenError,
    TableNotInCatalogError,
    TypeMismatchError,
    UserDeclinedError,
)
from ..relcore import (
    ColumnType,
    RelName,
    RelationInfo,
    RelationSchema,
    catalog_entry,
    format_rel_name,
    parse_rel_name,
)
from .backends import FREE, KvTables, MemoryTables, SqlTables

__all__ = [
    "BackendKind",
    "FetchPolicy",
    "Origin",
    "StoreConfig",
    "TableHandle",
    "QueryPattern",
    "FREE",
    "Store",
    "open_store",
]

DOWNLOAD_PROMPT = "do you want to download it (Y/n) ? "


class BackendKind(str, Enum):
    MEMORY = "memory"
    KV = "kv"
    SQL = "sql"


class FetchPolicy(str, Enum):
    AUTO = "auto"
    PROMPT = "prompt"
    NEVER = "never"


class Origin(str, Enum):
    LOCAL_CACHE = "local_cache"
    REMOTE_FETCH = "remote_fetch"
    FIXTURE = "fixture"


@dataclass
class StoreConfig:
    data_dir: Path
    backend: BackendKind = BackendKind.MEMORY
    repo_url: str = ""
    fetch_policy: FetchPolicy = FetchPolicy.NEVER

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        self.backend = BackendKind(self.backend)
        self.fetch_policy = FetchPolicy(self.fetch_policy)
        if self.fetch_policy is not FetchPolicy.NEVER:
            scheme = self.repo_url.split("://", 1)[0] if "://" in self.repo_url else ""
            if scheme not in ("http", "https"):
                raise ValueError(
                    f"repo_url {self.repo_url!r} must be a http(s) URL "
                    f"when fetch_policy is {self.fetch_policy.value}"
                )


@dataclass(frozen=True)
class TableHandle:
    name: RelName
    backend: BackendKind
    info: RelationInfo = field(compare=False)
    origin: Origin


@dataclass(frozen=True)
class QueryPattern:
    """One binding per column: a concrete value or FREE."""

    bindings: tuple

    @classmethod
    def of(cls, *bindings) -> "QueryPattern":
        return cls(bindings=tuple(bindings))

    @classmethod
    def full_scan(cls, arity: int) -> "QueryPattern":
        return cls(bindings=(FREE,) * arity)

    @classmethod
    def from_args(cls, schema: RelationSchema, args: Sequence[str]) -> "QueryPattern":
        """Build a pattern from CLI-style arguments ('?' marks a free slot)."""
        if len(args) != schema.arity:
            raise MalformedPatternError(
                f"{format_rel_name(schema.name)} has arity {schema.arity}, got {len(args)} args"
            )
        bindings = []
        for arg, (col, ctype) in zip(args, schema.columns):
            if arg == "?":
                bindings.append(FREE)
            elif ctype in (ColumnType.INTEGER, ColumnType.WEIGHT):
                try:
                    bindings.append(int(arg))
                except ValueError:
                    raise TypeMismatchError(
                        f"column {col} is {ctype.value}, got {arg!r}"
                    ) from None
            else:
                bindings.append(arg)
        return cls(bindings=tuple(bindings))

    def __len__(self) -> int:
        return len(self.bindings)


def _check_pattern(schema: RelationSchema, pattern: QueryPattern) -> None:
    if len(pattern) != schema.arity:
        raise MalformedPatternError(
            f"{format_rel_name(schema.name)} has arity {schema.arity}, "
            f"pattern has {len(pattern)} positions"
        )
    for i, b in enumerate(pattern.bindings):
        if b is FREE:
            continue
        ctype = schema.column_type(i)
        if ctype in (ColumnType.INTEGER, ColumnType.WEIGHT):
            ok = isinstance(b, int) and not isinstance(b, bool)
        else:
            ok = isinstance(b, str)
        if not ok:
            raise TypeMismatchError(
                f"{format_rel_name(schema.name)} column {i} is {ctype.value}, "
                f"got {type(b).__name__} {b!r}"
            )


def _schema_from_info(rel: RelName, info: RelationInfo) -> RelationSchema:
    """Derive a schema from a canonical header for uncataloged relations."""
    cols = []
    for spec in (info.get("columns") or "").split(","):
        cname, _, ctype = spec.partition(":")
        cols.append((cname, ColumnType(ctype)))
    key = (0, 1) if rel.kind.value == "edge" and rel.label is None else (0,)
    return RelationSchema(name=rel, columns=tuple(cols), key_columns=key)


class Store:
    """A set of relations served from one data directory by one backend."""

    def __init__(self, config: StoreConfig, *, read_only: bool = False) -> None:
        self.config = config
        self.read_only = read_only
        try:
            config.data_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DataDirUnavailableError(f"cannot create {config.data_dir}: {exc}") from exc
        if not config.data_dir.is_dir():
            raise DataDirUnavailableError(f"{config.data_dir} is not a directory")

        self._lock_fh = None
        if config.backend is not BackendKind.MEMORY and not read_only:
            self._acquire_writer_lock()

        if config.backend is BackendKind.MEMORY:
            self._tables = MemoryTables()
        elif config.backend is BackendKind.KV:
            self._tables = KvTables(config.data_dir / "kv")
        else:
            self._tables = SqlTables(config.data_dir / "store.sqlite")

        self._handles: dict[str, TableHandle] = {}
        self._schemas: dict[str, RelationSchema] = {}
        self._registry_lock = threading.Lock()
        self._name_locks: dict[str, threading.Lock] = {}
        self._closed = False

    # -- lifecycle ---------------------------------------------------

    def _acquire_writer_lock(self) -> None:
        lock_path = self.config.data_dir / f".biorel.{self.config.backend.value}.lock"
        fh = open(lock_path, "a+")
        try:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            fh.close()
            raise BackendUnavailableError(
                f"another writer holds the {self.config.backend.value} backend "
                f"on {self.config.data_dir}"
            ) from None
        self._lock_fh = fh

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._tables.close()
        if self._lock_fh is not None:
            fcntl.flock(self._lock_fh.fileno(), fcntl.LOCK_UN)
            self._lock_fh.close()
            self._lock_fh = None

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- registry ---------------------------------------------------

    @property
    def handles(self) -> dict[str, TableHandle]:
        return dict(self._handles)

    def _resolve(self, name: RelName | str) -> tuple[str, RelName]:
        rel = parse_rel_name(name) if isinstance(name, str) else name
        return format_rel_name(rel), rel

    def _name_lock(self, canon: str) -> threading.Lock:
        with self._registry_lock:
            lock = self._name_locks.get(canon)
            if lock is None:
                lock = threading.Lock()
                self._name_locks[canon] = lock
            return lock

    def _register(self, canon: str, handle: TableHandle, schema: RelationSchema) -> None:
        with self._registry_lock:
            self._handles[canon] = handle
            self._schemas[canon] = schema

    # -- acquisition ---------------------------------------------------

    def ensure_table(self, name: RelName | str) -> TableHandle:
        """Return the handle for a table, acquiring it on first use."""
        canon, rel = self._resolve(name)
        handle = self._handles.get(canon)
        if handle is not None:
            return handle
        with self._name_lock(canon):
            handle = self._handles.get(canon)
            if handle is not None:
                return handle
            return self._load_table(canon, rel)

    def _load_table(self, canon: str, rel: RelName) -> TableHandle:
        entry = catalog_entry(rel)
        file = self.config.data_dir / canonical_rel_path(entry.schema)
        origin = Origin.LOCAL_CACHE

        if self.read_only and self._tables.persistent:
            if self._tables.has_table(canon):
                info = self._info_for_existing(canon, entry.schema, file)
                handle = TableHandle(rel, self.config.backend, info, Origin.LOCAL_CACHE)
                self._register(canon, handle, entry.schema)
                return handle
            raise BackendUnavailableError(
                f"{canon} is not materialized and this store is read-only"
            )

        if not file.exists():
            file = self._obtain_file(canon, file)
            origin = Origin.REMOTE_FETCH
        return self._import_registered(canon, entry.schema, file, origin)

    def _obtain_file(self, canon: str, file: Path) -> Path:
        policy = self.config.fetch_policy
        if policy is FetchPolicy.PROMPT:
            # The interactive prompt only makes sense on a terminal; in
            # batch contexts it degrades to auto.
            if sys.stdin is not None and sys.stdin.isatty():
                sys.stderr.write(f"{canon}: table not present locally.\n")
                sys.stderr.write(DOWNLOAD_PROMPT)
                sys.stderr.flush()
                answer = sys.stdin.readline().strip().lower()
                if answer not in ("", "y", "yes"):
                    raise UserDeclinedError(f"download of {canon} declined")
            policy = FetchPolicy.AUTO
        if policy is FetchPolicy.NEVER:
            raise TableMissingAndFetchForbiddenError(
                f"{canon} not in {self.config.data_dir} and fetch policy is 'never'"
            )
        from ..ingest.fetch import fetch_remote

        return fetch_remote(canon, self.config.repo_url, self.config.data_dir)

    def _info_for_existing(self, canon: str, schema: RelationSchema, file: Path) -> RelationInfo:
        if file.exists():
            info = read_header(file)
        else:
            info = RelationInfo({"name": canon, "organism": schema.name.org.value,
                                 "source_db": schema.name.db})
        info.set("row_count", str(self._tables.row_count(schema)))
        return info

    def _import_registered(
        self, canon: str, schema: RelationSchema, file: Path, origin: Origin
    ) -> TableHandle:
        info, rows = read_canonical(file, expect=schema)
        count = self._tables.import_table(schema, rows)
        info.set("row_count", str(count))
        handle = TableHandle(schema.name, self.config.backend, info, origin)
        self._register(canon, handle, schema)
        return handle

    def import_canonical(self, name: RelName | str, file: Path) -> TableHandle:
        """Import an explicit canonical file, bypassing catalog and fetch.

        The file's declared relation must match ``name``.  Relations
        outside the catalog take their schema from the file header.
        """
        canon, rel = self._resolve(name)
        with self._name_lock(canon):
            try:
                schema = catalog_entry(rel).schema
            except TableNotInCatalogError:
                schema = _schema_from_info(rel, read_header(file))
            return self._import_registered(canon, schema, Path(file), Origin.FIXTURE)

    # -- interrogation ---------------------------------------------------

    def query(self, name: RelName | str, pattern: QueryPattern) -> Iterator[tuple]:
        """Stream rows matching the pattern; loads the table on first use."""
        canon, rel = self._resolve(name)
        _check_pattern(self.schema(rel), pattern)
        self.ensure_table(rel)
        return self._tables.scan(self._schemas[canon], pattern.bindings)

    def query_all(self, name: RelName | str) -> Iterator[tuple]:
        canon, _ = self._resolve(name)
        self.ensure_table(name)
        schema = self._schemas[canon]
        return self._tables.scan(schema, (FREE,) * schema.arity)

    def table_info(self, name: RelName | str) -> RelationInfo:
        return self.ensure_table(name).info

    def schema(self, name: RelName | str) -> RelationSchema:
        canon, rel = self._resolve(name)
        got = self._schemas.get(canon)
        if got is not None:
            return got
        return catalog_entry(rel).schema


def open_store(config: StoreConfig, *, read_only: bool = False) -> Store:
    """Open a store; no tables are loaded until first use."""
    return Store(config, read_only=read_only)

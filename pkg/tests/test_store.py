import io
import random
import subprocess
import sys
import threading
import textwrap
from pathlib import Path

import pytest

from biorel.canonical import write_canonical
from biorel.errors import (
    BackendUnavailableError,
    MalformedPatternError,
    SchemaMismatchError,
    TableMissingAndFetchForbiddenError,
    TableNotInCatalogError,
    TypeMismatchError,
    UserDeclinedError,
)
from biorel.relcore import ColumnType, RelationSchema, catalog_entry, parse_rel_name
from biorel.store import (
    FREE,
    BackendKind,
    FetchPolicy,
    Origin,
    QueryPattern,
    Store,
    StoreConfig,
    open_store,
)

from .helpers import FixtureServer

DATE = "2026-01-01T00:00:00Z"
BACKENDS = [BackendKind.MEMORY, BackendKind.KV, BackendKind.SQL]


def _mem(data_dir, **kw):
    return Store(StoreConfig(data_dir=data_dir, backend=BackendKind.MEMORY, **kw))


class TestOpenAndEnsure:
    def test_fresh_store_has_no_handles(self, data_dir):
        with _mem(data_dir) as store:
            assert store.handles == {}

    def test_ensure_is_idempotent(self, data_dir):
        with _mem(data_dir) as store:
            first = store.ensure_table("map_hgnc_hgnc_symb")
            imports = []
            original = store._tables.import_table
            store._tables.import_table = lambda *a: imports.append(1) or original(*a)
            second = store.ensure_table("map_hgnc_hgnc_symb")
            assert second is first
            assert imports == []
            assert first.origin is Origin.LOCAL_CACHE
            assert first.backend is BackendKind.MEMORY

    def test_unknown_relation_rejected(self, data_dir):
        with _mem(data_dir) as store:
            with pytest.raises(TableNotInCatalogError):
                store.ensure_table("map_ncbi_gene_symb")

    def test_query_triggers_load(self, data_dir):
        with _mem(data_dir) as store:
            rows = list(store.query("map_hgnc_hgnc_symb", QueryPattern.of(19295, FREE)))
            assert rows == [(19295, "LMTK3")]
            assert "map_hgnc_hgnc_symb" in store.handles

    def test_missing_file_policy_never(self, tmp_path):
        with _mem(tmp_path) as store:
            with pytest.raises(TableMissingAndFetchForbiddenError):
                store.ensure_table("map_hgnc_hgnc_symb")

    def test_single_flight_under_concurrency(self, data_dir):
        with _mem(data_dir) as store:
            imports = []
            original = store._tables.import_table
            def counting(schema, rows):
                imports.append(1)
                return original(schema, rows)
            store._tables.import_table = counting
            errors = []
            def worker():
                try:
                    store.ensure_table("map_unip_hgnc_unip")
                except Exception as exc:  # pragma: no cover
                    errors.append(exc)
            threads = [threading.Thread(target=worker) for _ in range(16)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert not errors
            assert len(imports) == 1
            assert len([h for h in store.handles if h == "map_unip_hgnc_unip"]) == 1


class TestFetchPolicies:
    def test_prompt_declined_on_tty(self, data_dir, tmp_path, monkeypatch):
        with FixtureServer(data_dir) as server:
            config = StoreConfig(data_dir=tmp_path, backend=BackendKind.MEMORY,
                                 repo_url=server.url, fetch_policy=FetchPolicy.PROMPT)
            fake = io.StringIO("n\n")
            fake.isatty = lambda: True
            monkeypatch.setattr(sys, "stdin", fake)
            with Store(config) as store:
                with pytest.raises(UserDeclinedError):
                    store.ensure_table("map_hgnc_hgnc_symb")

    def test_prompt_accept_on_tty_fetches(self, data_dir, tmp_path, monkeypatch, capsys):
        with FixtureServer(data_dir) as server:
            config = StoreConfig(data_dir=tmp_path, backend=BackendKind.MEMORY,
                                 repo_url=server.url, fetch_policy=FetchPolicy.PROMPT)
            fake = io.StringIO("\n")  # default answer is yes
            fake.isatty = lambda: True
            monkeypatch.setattr(sys, "stdin", fake)
            with Store(config) as store:
                handle = store.ensure_table("map_hgnc_hgnc_symb")
            assert handle.origin is Origin.REMOTE_FETCH
            assert "do you want to download it (Y/n) ? " in capsys.readouterr().err

    def test_prompt_degrades_to_auto_without_tty(self, data_dir, tmp_path, monkeypatch):
        with FixtureServer(data_dir) as server:
            config = StoreConfig(data_dir=tmp_path, backend=BackendKind.MEMORY,
                                 repo_url=server.url, fetch_policy=FetchPolicy.PROMPT)
            fake = io.StringIO("")
            fake.isatty = lambda: False
            monkeypatch.setattr(sys, "stdin", fake)
            with Store(config) as store:
                handle = store.ensure_table("map_hgnc_hgnc_symb")
            assert handle.origin is Origin.REMOTE_FETCH

    def test_auto_fetch_then_cache(self, data_dir, tmp_path):
        with FixtureServer(data_dir) as server:
            config = StoreConfig(data_dir=tmp_path, backend=BackendKind.MEMORY,
                                 repo_url=server.url, fetch_policy=FetchPolicy.AUTO)
            with Store(config) as store:
                handle = store.ensure_table("map_unip_hgnc_unip")
                assert handle.origin is Origin.REMOTE_FETCH
            # second store finds the cached file without the network
            offline = StoreConfig(data_dir=tmp_path, backend=BackendKind.MEMORY)
            with Store(offline) as store:
                handle = store.ensure_table("map_unip_hgnc_unip")
                assert handle.origin is Origin.LOCAL_CACHE

    def test_repo_url_required_unless_never(self, tmp_path):
        with pytest.raises(ValueError):
            StoreConfig(data_dir=tmp_path, fetch_policy=FetchPolicy.AUTO, repo_url="")


class TestQueries:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_known_id_lookups(self, data_dir, tmp_path_factory, backend):
        root = data_dir if backend is BackendKind.MEMORY else _copy_tree(
            data_dir, tmp_path_factory.mktemp(f"q-{backend.value}"))
        with Store(StoreConfig(data_dir=root, backend=backend)) as store:
            one = list(store.query("map_hgnc_hgnc_symb", QueryPattern.of(19295, FREE)))
            assert one == [(19295, "LMTK3")]
            rev = list(store.query("map_unip_hgnc_unip", QueryPattern.of(FREE, "Q96Q04")))
            assert rev == [(19295, "Q96Q04")]
            five = {r[1] for r in store.query("map_unip_hgnc_unip", QueryPattern.of(19295, FREE))}
            assert five == {"A0A0A0MQW5", "A0A3B3IRV9", "A0A3B3ISL5", "A0A3B3ITQ7", "Q96Q04"}
            is_a = {r[1] for r in store.query("edge_gont_is_a", QueryPattern.of(139, FREE))}
            assert is_a == {44431, 98588}

    def test_full_scan_matches_info_row_count(self, store):
        info = store.table_info("map_gont_symb_gont")
        rows = list(store.query("map_gont_symb_gont", QueryPattern.of(FREE, FREE)))
        assert len(rows) == info.row_count

    def test_table_info_triggers_lazy_load(self, data_dir):
        with _mem(data_dir) as store:
            assert store.handles == {}
            info = store.table_info("map_gont_gont_gonm")
            assert info.row_count > 0
            assert "map_gont_gont_gonm" in store.handles

    def test_type_mismatch(self, store):
        with pytest.raises(TypeMismatchError):
            list(store.query("map_hgnc_hgnc_symb", QueryPattern.of("19295", FREE)))
        with pytest.raises(TypeMismatchError):
            list(store.query("map_hgnc_symb_hgnc", QueryPattern.of(5, FREE)))

    def test_pattern_arity_checked(self, store):
        with pytest.raises(MalformedPatternError):
            list(store.query("map_hgnc_hgnc_symb", QueryPattern.of(FREE)))

    def test_query_matches_full_scan_filter_oracle(self, any_backend_store):
        store = any_backend_store
        rng = random.Random(7)
        for rel in ("map_unip_hgnc_unip", "edge_strg_hs_symb", "map_gont_symb_gont"):
            schema = store.schema(rel)
            full = list(store.query(rel, QueryPattern.full_scan(schema.arity)))
            for _ in range(25):
                row = full[rng.randrange(len(full))]
                bindings = [row[i] if rng.random() < 0.5 else FREE
                            for i in range(schema.arity)]
                got = sorted(store.query(rel, QueryPattern.of(*bindings)))
                want = sorted(r for r in full
                              if all(b is FREE or r[i] == b for i, b in enumerate(bindings)))
                assert got == want

    def test_monotone_restriction(self, store):
        rel = "edge_strg_hs_symb"
        loose = set(store.query(rel, QueryPattern.of("ATG5", FREE, FREE)))
        tight = set(store.query(rel, QueryPattern.of("ATG5", "ATG7", FREE)))
        assert tight <= loose

    def test_kv_reverse_lookup_uses_mirror(self, data_dir, tmp_path):
        root = _copy_tree(data_dir, tmp_path / "kv")
        with Store(StoreConfig(data_dir=root, backend=BackendKind.KV)) as store:
            rows = list(store.query("map_unip_unip_hgnc", QueryPattern.of(FREE, 19295)))
            assert {r[0] for r in rows} == {
                "A0A0A0MQW5", "A0A3B3IRV9", "A0A3B3ISL5", "A0A3B3ITQ7", "Q96Q04"}


class TestImport:
    def test_import_round_trip(self, tmp_path):
        schema = catalog_entry("map_hgnc_hgnc_symb").schema
        file = tmp_path / "f.tsv.gz"
        rows = [(1, "A"), (2, "B"), (3, "C")]
        write_canonical(file, schema, rows, build_date=DATE)
        with _mem(tmp_path / "data") as store:
            handle = store.import_canonical("map_hgnc_hgnc_symb", file)
            assert handle.origin is Origin.FIXTURE
            assert handle.info.row_count == 3
            got = sorted(store.query("map_hgnc_hgnc_symb", QueryPattern.of(FREE, FREE)))
            assert got == rows

    def test_import_wrong_declaration_rejected(self, tmp_path):
        schema = catalog_entry("map_hgnc_hgnc_symb").schema
        file = tmp_path / "f.tsv.gz"
        write_canonical(file, schema, [(1, "A")], build_date=DATE)
        with _mem(tmp_path / "data") as store:
            with pytest.raises(SchemaMismatchError):
                store.import_canonical("map_hgnc_symb_hgnc", file)

    def test_import_uncataloged_relation_uses_file_schema(self, tmp_path):
        rel = parse_rel_name("map_ncbi_gene_symb")
        schema = RelationSchema(
            name=rel,
            columns=(("gene", ColumnType.INTEGER), ("symb", ColumnType.SYMBOL)),
            key_columns=(0,),
        )
        file = tmp_path / "f.tsv.gz"
        write_canonical(file, schema, [(7, "X"), (8, "Y")], build_date=DATE)
        with _mem(tmp_path / "data") as store:
            store.import_canonical(rel, file)
            assert list(store.query(rel, QueryPattern.of(8, FREE))) == [(8, "Y")]

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_identical_answers_across_backends(self, tmp_path_factory, backend):
        schema = catalog_entry("map_hgnc_hgnc_symb").schema
        rows = [(i % 5, f"S{i % 7}") for i in range(40)]
        root = tmp_path_factory.mktemp(f"imp-{backend.value}")
        file = root / "f.tsv.gz"
        write_canonical(file, schema, rows, build_date=DATE)
        with Store(StoreConfig(data_dir=root, backend=backend)) as store:
            store.import_canonical("map_hgnc_hgnc_symb", file)
            full = sorted(store.query("map_hgnc_hgnc_symb", QueryPattern.of(FREE, FREE)))
            assert full == sorted(rows)
            keyed = sorted(store.query("map_hgnc_hgnc_symb", QueryPattern.of(3, FREE)))
            assert keyed == sorted(r for r in rows if r[0] == 3)


class TestSqlLocking:
    def test_second_writer_is_rejected_in_process(self, tmp_path):
        cfg = StoreConfig(data_dir=tmp_path, backend=BackendKind.SQL)
        with Store(cfg):
            with pytest.raises(BackendUnavailableError):
                Store(StoreConfig(data_dir=tmp_path, backend=BackendKind.SQL))

    def test_two_process_lock_and_read_only(self, data_dir, tmp_path):
        root = _copy_tree(data_dir, tmp_path / "sql")
        cfg = StoreConfig(data_dir=root, backend=BackendKind.SQL)
        with Store(cfg) as writer:
            writer.ensure_table("map_hgnc_hgnc_symb")
            script = textwrap.dedent(
                """
                import sys
                from biorel.store import Store, StoreConfig, BackendKind, QueryPattern, FREE
                from biorel.errors import BackendUnavailableError
                root = sys.argv[1]
                try:
                    Store(StoreConfig(data_dir=root, backend=BackendKind.SQL))
                    print("WRITER-OK")
                except BackendUnavailableError:
                    print("WRITER-BLOCKED")
                ro = Store(StoreConfig(data_dir=root, backend=BackendKind.SQL), read_only=True)
                rows = list(ro.query("map_hgnc_hgnc_symb", QueryPattern.of(19295, FREE)))
                print("READ", rows[0][1])
                """
            )
            out = subprocess.run(
                [sys.executable, "-c", script, str(root)],
                capture_output=True, text=True, timeout=60,
            )
            assert out.returncode == 0, out.stderr
            assert "WRITER-BLOCKED" in out.stdout
            assert "READ LMTK3" in out.stdout

    def test_read_only_reuses_persisted_tables(self, data_dir, tmp_path):
        root = _copy_tree(data_dir, tmp_path / "kv")
        with Store(StoreConfig(data_dir=root, backend=BackendKind.KV)) as writer:
            writer.ensure_table("map_hgnc_hgnc_symb")
        with Store(StoreConfig(data_dir=root, backend=BackendKind.KV), read_only=True) as ro:
            rows = list(ro.query("map_hgnc_hgnc_symb", QueryPattern.of(19295, FREE)))
            assert rows == [(19295, "LMTK3")]
            assert ro.table_info("map_hgnc_hgnc_symb").row_count > 0

    def test_read_only_never_imports(self, data_dir, tmp_path):
        root = _copy_tree(data_dir, tmp_path / "kv")
        with Store(StoreConfig(data_dir=root, backend=BackendKind.KV), read_only=True) as ro:
            with pytest.raises(BackendUnavailableError):
                ro.ensure_table("map_hgnc_hgnc_symb")


def test_open_store_helper(data_dir):
    store = open_store(StoreConfig(data_dir=data_dir))
    try:
        assert store.handles == {}
    finally:
        store.close()


def test_data_dir_must_be_a_directory(tmp_path):
    blocker = tmp_path / "notadir"
    blocker.write_text("x")
    from biorel.errors import DataDirUnavailableError
    with pytest.raises(DataDirUnavailableError):
        Store(StoreConfig(data_dir=blocker))


def _copy_tree(src: Path, dst: Path) -> Path:
    dst.mkdir(parents=True, exist_ok=True)
    for file in src.rglob("*.tsv.gz"):
        rel = file.relative_to(src)
        target = dst / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        if not target.exists():
            target.write_bytes(file.read_bytes())
    return dst

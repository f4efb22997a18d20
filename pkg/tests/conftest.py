import logging
from pathlib import Path

import pytest

from biorel.ingest import load_manifest, run_builder
from biorel.relcore import OrgToken
from biorel.store import BackendKind, Store, StoreConfig

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
BUILD_DATE = "2026-01-01T00:00:00Z"

MANIFESTS = [
    ("hgnc", OrgToken.HS, "hgnc.tsv"),
    ("unip", OrgToken.HS, "unip.tsv"),
    ("mgim", OrgToken.MOUSE, "mgim.tsv"),
    ("gont", OrgToken.HS, "gont.tsv"),
    ("strg", OrgToken.HS, "strg_hs.tsv"),
    ("strg", OrgToken.MOUSE, "strg_mouse.tsv"),
]


def build_fixture_data(root: Path) -> None:
    for db, org, manifest in MANIFESTS:
        files = load_manifest(FIXTURES / "manifests" / manifest)
        run_builder(db, org, files, root, build_date=BUILD_DATE)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("biorel-data")
    logging.getLogger("biorel").setLevel(logging.WARNING)
    build_fixture_data(root)
    return root


@pytest.fixture(scope="session")
def store(data_dir) -> Store:
    with Store(StoreConfig(data_dir=data_dir, backend=BackendKind.MEMORY)) as s:
        yield s


@pytest.fixture()
def fresh_store(data_dir, tmp_path):
    """A memory store over the shared canonical files, private per test."""
    with Store(StoreConfig(data_dir=data_dir, backend=BackendKind.MEMORY)) as s:
        yield s


@pytest.fixture(params=["memory", "kv", "sql"])
def any_backend_store(request, data_dir, tmp_path_factory):
    if request.param == "memory":
        root = data_dir
    else:
        # persistent backends get a private copy of the directory layout via
        # a private store dir that still reads the shared canonical files
        root = data_dir
    config = StoreConfig(data_dir=root, backend=BackendKind(request.param))
    if request.param == "memory":
        with Store(config) as s:
            yield s
    else:
        scratch = tmp_path_factory.mktemp(f"be-{request.param}")
        _link_canonicals(data_dir, scratch)
        with Store(StoreConfig(data_dir=scratch, backend=BackendKind(request.param))) as s:
            yield s


def _link_canonicals(src: Path, dst: Path) -> None:
    for file in src.rglob("*.tsv.gz"):
        rel = file.relative_to(src)
        target = dst / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        if not target.exists():
            target.symlink_to(file)

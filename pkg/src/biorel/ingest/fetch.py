"""Fetching canonical relation files from a remote repository.

Remote layout mirrors the on-disk cache: <repo_url>/<org>/<db>/<name>.tsv.gz.
Downloads are revalidated with ETags, guarded by a per-path lock file, and
sanity-checked (the decompressed body must match the header row count)
before they land in the cache.
"""

from __future__ import annotations

import logging
from pathlib import Path

import requests
from filelock import FileLock

from ..canonical import canonical_rel_path, read_canonical
from ..errors import ChecksumMismatchError, CorruptFileError, FetchFailedError
from ..relcore import RelName, catalog_entry, format_rel_name, parse_rel_name

logger = logging.getLogger(__name__)

__all__ = ["fetch_remote"]


def _validate(path: Path, canon: str) -> None:
    try:
        read_canonical(path)
    except CorruptFileError as exc:
        path.unlink(missing_ok=True)
        raise ChecksumMismatchError(f"{canon}: downloaded file failed validation: {exc}") from exc


def fetch_remote(name: RelName | str, repo_url: str, cache_dir: Path, *,
                 timeout: float = 30.0) -> Path:
    """Ensure the canonical file for ``name`` is present under cache_dir.

    Returns the cached path.  A cached copy is revalidated against the
    server when an ETag is known; otherwise it is kept as is.
    """
    rel = parse_rel_name(name) if isinstance(name, str) else name
    canon = format_rel_name(rel)
    catalog_entry(rel)  # unknown relations cannot have a remote path
    rel_path = canonical_rel_path(rel)
    dest = Path(cache_dir) / rel_path
    dest.parent.mkdir(parents=True, exist_ok=True)
    etag_file = dest.with_suffix(dest.suffix + ".etag")
    url = repo_url.rstrip("/") + "/" + rel_path.as_posix()

    lock = FileLock(str(dest) + ".lock")
    with lock:
        headers = {}
        if dest.exists() and etag_file.exists():
            headers["If-None-Match"] = etag_file.read_text(encoding="utf-8").strip()
        try:
            resp = requests.get(url, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            raise FetchFailedError(f"{canon}: cannot reach {url}: {exc}") from exc
        if resp.status_code == 304 and dest.exists():
            logger.debug("%s: cache still valid (304)", canon)
            return dest
        if resp.status_code != 200:
            raise FetchFailedError(f"{canon}: HTTP {resp.status_code} from {url}")

        tmp = dest.with_suffix(dest.suffix + ".part")
        tmp.write_bytes(resp.content)
        try:
            _validate(tmp, canon)
        except ChecksumMismatchError:
            tmp.unlink(missing_ok=True)
            dest.unlink(missing_ok=True)
            raise
        tmp.replace(dest)
        etag = resp.headers.get("ETag")
        if etag:
            etag_file.write_text(etag, encoding="utf-8")
        elif etag_file.exists():
            etag_file.unlink()
        logger.info("%s: fetched from %s", canon, url)
    return dest

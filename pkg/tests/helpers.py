"""Independent oracles and checkers used by the test suite.

Everything here deliberately avoids the code paths it verifies: the
hypergeometric oracle is an exact big-integer sum, the BH oracle works in
Fractions, and the DOT checker is a strict parser for the pinned output
dialect.
"""

from __future__ import annotations

import hashlib
import math
import re
import threading
from fractions import Fraction
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path


def hypergeom_tail_exact(k: int, n: int, K: int, N: int) -> Fraction:
    """P[X >= k] as an exact fraction via binomial-coefficient enumeration."""
    total = 0
    for x in range(k, min(n, K) + 1):
        if n - x > N - K:
            continue
        total += math.comb(K, x) * math.comb(N - K, n - x)
    return Fraction(total, math.comb(N, n))


def bh_exact(pvalues: list[Fraction]) -> list[Fraction]:
    """Benjamini-Hochberg step-up in exact arithmetic, input order."""
    m = len(pvalues)
    order = sorted(range(m), key=lambda i: pvalues[i])
    out: list[Fraction] = [Fraction(0)] * m
    running = Fraction(1)
    for rank in range(m, 0, -1):
        i = order[rank - 1]
        running = min(running, Fraction(pvalues[i]) * m / rank)
        out[i] = running
    return out


# --- DOT dialect checker ---------------------------------------------------

_NODE_RE = re.compile(
    r'^  "((?:[^"\\]|\\.)*)" \[style=filled, fillcolor="#[0-9a-f]{6}", width=\d+\.\d{2}\];$'
)
_EDGE_RE = re.compile(
    r'^  "((?:[^"\\]|\\.)*)" -- "((?:[^"\\]|\\.)*)" \[penwidth=\d+\.\d{3}\];$'
)


def check_dot(text: str) -> tuple[list[str], list[tuple[str, str]]]:
    """Strict parse of the pinned DOT dialect; returns (nodes, edges).

    Raises AssertionError on any line that does not belong to the
    grammar, on unbalanced braces, or on an edge endpoint that was not
    declared as a node.
    """
    lines = text.splitlines()
    assert lines, "empty DOT output"
    assert re.fullmatch(r"graph \w+ \{", lines[0]), f"bad header: {lines[0]!r}"
    assert lines[1] == "  node [style=filled];", f"bad defaults line: {lines[1]!r}"
    assert lines[-1] == "}", f"bad closing line: {lines[-1]!r}"
    assert text.endswith("}\n"), "missing trailing newline"
    nodes: list[str] = []
    edges: list[tuple[str, str]] = []
    for line in lines[2:-1]:
        m = _NODE_RE.match(line)
        if m:
            nodes.append(m.group(1))
            continue
        m = _EDGE_RE.match(line)
        if m:
            edges.append((m.group(1), m.group(2)))
            continue
        raise AssertionError(f"line outside DOT grammar: {line!r}")
    declared = set(nodes)
    for a, b in edges:
        assert a in declared and b in declared, f"edge ({a}, {b}) uses undeclared node"
    return nodes, edges


# --- tiny HTTP file server with ETag support -------------------------------

class _Handler(BaseHTTPRequestHandler):
    server_version = "FixtureHTTP/1"

    def log_message(self, *args):  # quiet
        pass

    def do_GET(self):
        root: Path = self.server.root  # type: ignore[attr-defined]
        target = (root / self.path.lstrip("/")).resolve()
        self.server.requests.append(self.path)  # type: ignore[attr-defined]
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self.send_response(404)
            self.end_headers()
            return
        body = target.read_bytes()
        etag = '"' + hashlib.sha1(body).hexdigest() + '"'
        if self.headers.get("If-None-Match") == etag:
            self.send_response(304)
            self.end_headers()
            return
        self.send_response(200)
        self.send_header("ETag", etag)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class FixtureServer:
    """Serves a directory over HTTP in a background thread."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.httpd.root = self.root  # type: ignore[attr-defined]
        self.httpd.requests = []  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def requests(self) -> list[str]:
        return self.httpd.requests  # type: ignore[attr-defined]

    def __enter__(self) -> "FixtureServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        self._thread.join(timeout=5)

"""Weighted undirected gene graphs: STRING subgraph extraction, regulation
coloring and DOT/SVG rendering.

Graphs are immutable values.  Rendering is fully deterministic: nodes and
edges are emitted in sorted order and the SVG uses a fixed circular
layout, so identical inputs give identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, DuplicateHitSymbolError, EmptyGraphError
from .relcore import OrgToken, RelKind, RelName
from .store import FREE, QueryPattern, Store

__all__ = [
    "Direction",
    "NodeAttrs",
    "WGraph",
    "RenderOptions",
    "string_subgraph",
    "annotate_regulation",
    "render",
    "render_to_file",
]


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"
    ABSENT = "absent"


@dataclass(frozen=True)
class NodeAttrs:
    direction: Direction = Direction.ABSENT
    magnitude: float = 0.0


@dataclass(frozen=True)
class WGraph:
    """Nodes with regulation attributes plus canonical (a < b) weighted edges."""

    nodes: Mapping[str, NodeAttrs] = field(default_factory=dict)
    edges: Mapping[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for (a, b), w in self.edges.items():
            if a == b:
                raise DomainError(f"self loop on {a!r}")
            if a > b:
                raise DomainError(f"edge ({a!r}, {b!r}) is not canonically ordered")
            if a not in self.nodes or b not in self.nodes:
                raise DomainError(f"edge ({a!r}, {b!r}) has an endpoint outside the node set")
            if not (1 <= w <= 999):
                raise DomainError(f"edge weight {w} outside (0,1000)")

    @classmethod
    def build(cls, nodes: Iterable[str], edges: Iterable[tuple[str, str, int]]) -> "WGraph":
        node_map = {n: NodeAttrs() for n in nodes}
        edge_map: dict[tuple[str, str], int] = {}
        for a, b, w in edges:
            key = (a, b) if a < b else (b, a)
            edge_map[key] = max(w, edge_map.get(key, 0))
        return cls(nodes=node_map, edges=edge_map)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def direction_counts(self) -> dict[Direction, int]:
        out = {d: 0 for d in Direction}
        for attrs in self.nodes.values():
            out[attrs.direction] += 1
        return out


@dataclass(frozen=True)
class RenderOptions:
    format: str = "svg"
    node_size: float = 3.0
    include_isolated: bool = True
    color_up: str = "red"
    color_down: str = "blue"

    def __post_init__(self) -> None:
        if self.format not in ("dot", "svg"):
            raise DomainError(f"unknown render format {self.format!r}")
        if self.node_size <= 0:
            raise DomainError("node_size must be positive")


def string_subgraph(store: Store, symbols: Sequence[str], org: OrgToken,
                    min_weight: int) -> WGraph:
    """Induced STRING subgraph over the given symbols.

    Edges are exactly the interaction rows with both endpoints in
    ``symbols`` and weight >= min_weight; isolated input symbols stay in
    the node set (dropping them is a render option).
    """
    if not (0 <= min_weight <= 1000):
        raise DomainError(f"min_weight {min_weight} outside [0, 1000]")
    ordered: list[str] = []
    seen: set[str] = set()
    for s in symbols:
        if s not in seen:
            seen.add(s)
            ordered.append(s)
    rel = RelName(kind=RelKind.EDGE, db="strg", org=org, object="symb", arity=3)
    edges: dict[tuple[str, str], int] = {}
    if ordered:
        for a, b, w in store.query(rel, QueryPattern.of(FREE, FREE, FREE)):
            if a in seen and b in seen and w >= min_weight:
                key = (a, b) if a < b else (b, a)
                edges[key] = max(w, edges.get(key, 0))
    return WGraph(nodes={s: NodeAttrs() for s in ordered}, edges=edges)


def annotate_regulation(graph: WGraph, hits: Iterable[Sequence]) -> WGraph:
    """Color nodes by the sign of their fold change.

    ``hits`` yields (symbol, log2fc, ...) records.  Positive fold change
    maps to up, negative to down, zero stays absent.  The same symbol
    with conflicting signs is an error; repeats with the same sign keep
    the larger magnitude.
    """
    by_symbol: dict[str, float] = {}
    for hit in hits:
        symbol, fc = hit[0], float(hit[1])
        if symbol in by_symbol:
            prev = by_symbol[symbol]
            if prev * fc < 0:
                raise DuplicateHitSymbolError(
                    f"{symbol!r} appears with conflicting signs ({prev} and {fc})"
                )
            fc = prev if abs(prev) >= abs(fc) else fc
        by_symbol[symbol] = fc
    nodes: dict[str, NodeAttrs] = {}
    for symbol, attrs in graph.nodes.items():
        fc = by_symbol.get(symbol)
        if fc is None or fc == 0:
            nodes[symbol] = NodeAttrs()
        else:
            direction = Direction.UP if fc > 0 else Direction.DOWN
            nodes[symbol] = NodeAttrs(direction=direction, magnitude=abs(fc))
    return WGraph(nodes=nodes, edges=dict(graph.edges))


# --- rendering ---------------------------------------------------------

_COLOR_TABLE = {
    "red": (220, 50, 47),
    "blue": (38, 109, 211),
    "green": (0, 153, 76),
    "orange": (230, 126, 34),
    "purple": (142, 68, 173),
    "cyan": (42, 161, 152),
    "magenta": (211, 54, 130),
    "yellow": (181, 137, 0),
    "gray": (105, 105, 105),
    "black": (0, 0, 0),
    "white": (255, 255, 255),
}
_NEUTRAL = (211, 211, 211)  # light gray for nodes without a direction
_EDGE_PEN_SCALE = 5.0


def _base_rgb(color: str) -> tuple[int, int, int]:
    if color.startswith("#") and len(color) == 7:
        return tuple(int(color[i:i + 2], 16) for i in (1, 3, 5))  # type: ignore[return-value]
    rgb = _COLOR_TABLE.get(color.lower())
    if rgb is None:
        raise DomainError(f"unknown color name {color!r}")
    return rgb


def _magnitude_ceiling(graph: WGraph) -> float:
    # Intensity is linear in |log2fc| clamped at the 95th percentile of
    # the hit magnitudes, so one outlier cannot wash the palette out.
    mags = sorted(a.magnitude for a in graph.nodes.values() if a.direction is not Direction.ABSENT)
    if not mags:
        return 1.0
    rank = max(0, math.ceil(0.95 * len(mags)) - 1)
    return mags[rank] or 1.0


def _fill_color(attrs: NodeAttrs, ceiling: float, opts: RenderOptions) -> str:
    if attrs.direction is Direction.ABSENT:
        rgb = _NEUTRAL
    else:
        base = _base_rgb(opts.color_up if attrs.direction is Direction.UP else opts.color_down)
        t = min(attrs.magnitude / ceiling, 1.0)
        blend = 0.25 + 0.75 * t
        rgb = tuple(round(255 + (c - 255) * blend) for c in base)
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _visible(graph: WGraph, opts: RenderOptions) -> tuple[list[str], list[tuple[str, str, int]]]:
    edges = sorted((a, b, w) for (a, b), w in graph.edges.items())
    if opts.include_isolated:
        nodes = sorted(graph.nodes)
    else:
        touched = {a for a, _, _ in edges} | {b for _, b, _ in edges}
        nodes = sorted(touched)
    return nodes, edges


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render(graph: WGraph, opts: RenderOptions | None = None) -> str:
    """Render to DOT or SVG text; same input always gives the same bytes."""
    opts = opts or RenderOptions()
    if not opts.include_isolated and not graph.nodes and not graph.edges:
        raise EmptyGraphError("graph has no nodes and no edges")
    nodes, edges = _visible(graph, opts)
    ceiling = _magnitude_ceiling(graph)
    if opts.format == "dot":
        return _render_dot(graph, nodes, edges, ceiling, opts)
    return _render_svg(graph, nodes, edges, ceiling, opts)


def _render_dot(graph, nodes, edges, ceiling, opts) -> str:
    lines = ["graph genes {", "  node [style=filled];"]
    for symbol in nodes:
        fill = _fill_color(graph.nodes[symbol], ceiling, opts)
        lines.append(
            f"  {_quote(symbol)} [style=filled, fillcolor=\"{fill}\", width={opts.node_size:.2f}];"
        )
    for a, b, w in edges:
        pen = _EDGE_PEN_SCALE * w / 1000.0
        lines.append(f"  {_quote(a)} -- {_quote(b)} [penwidth={pen:.3f}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _render_svg(graph, nodes, edges, ceiling, opts) -> str:
    radius_px = opts.node_size * 6.0
    ring = max(len(nodes) * radius_px * 1.2, 60.0)
    size = 2 * (ring + radius_px + 40.0)
    center = size / 2.0
    pos: dict[str, tuple[float, float]] = {}
    for i, symbol in enumerate(nodes):
        angle = 2 * math.pi * i / max(len(nodes), 1) - math.pi / 2
        pos[symbol] = (center + ring * math.cos(angle), center + ring * math.sin(angle))
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{size:.0f}" height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
    ]
    for a, b, w in edges:
        (x1, y1), (x2, y2) = pos[a], pos[b]
        stroke = max(_EDGE_PEN_SCALE * w / 1000.0, 0.2)
        parts.append(
            f'  <line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
            f'stroke="#999999" stroke-width="{stroke:.3f}"/>'
        )
    for symbol in nodes:
        x, y = pos[symbol]
        fill = _fill_color(graph.nodes[symbol], ceiling, opts)
        parts.append(
            f'  <circle cx="{x:.1f}" cy="{y:.1f}" r="{radius_px:.1f}" '
            f'fill="{fill}" stroke="#333333"/>'
        )
        parts.append(
            f'  <text x="{x:.1f}" y="{y + radius_px + 12:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_xml_escape(symbol)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _xml_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_to_file(graph: WGraph, opts: RenderOptions, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(graph, opts), encoding="utf-8")
    return path

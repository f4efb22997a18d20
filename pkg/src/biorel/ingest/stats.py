"""Population statistics over the served relations.

One row per relation: total rows plus distinct object/subject counts,
emitted as TSV ready for bar plotting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from ..relcore import CellSelector, RelName, catalog_list, format_rel_name

if TYPE_CHECKING:  # pragma: no cover
    from ..store import Store

__all__ = ["PopulationStat", "stats", "stats_tsv"]


@dataclass(frozen=True)
class PopulationStat:
    relation: RelName
    rows: int
    distinct_objects: int
    distinct_subjects: int


def stats(store: "Store", selector: CellSelector | None = None) -> list[PopulationStat]:
    """Row and distinct-value counts for every relation under the selector."""
    out: list[PopulationStat] = []
    for entry in catalog_list(selector):
        rows = list(store.query_all(entry.name))
        objects = {r[0] for r in rows}
        subjects = {r[1] for r in rows} if entry.schema.arity >= 2 else set()
        out.append(PopulationStat(entry.name, len(rows), len(objects), len(subjects)))
    return out


def stats_tsv(rows: Sequence[PopulationStat]) -> str:
    lines = ["relation\trows\tdistinct_objects\tdistinct_subjects"]
    for s in rows:
        lines.append(
            f"{format_rel_name(s.relation)}\t{s.rows}\t{s.distinct_objects}\t{s.distinct_subjects}"
        )
    return "\n".join(lines) + "\n"

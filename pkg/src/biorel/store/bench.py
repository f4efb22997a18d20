"""Wall-clock comparison of the storage backends on one relation.

The interesting claim is directional: keyed lookups against the
in-memory backend beat the embedded databases once the table is loaded.
Absolute numbers are machine-dependent and only reported.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from ..canonical import canonical_rel_path, read_canonical, write_canonical
from ..relcore import ColumnType, RelName, RelationSchema, parse_rel_name
from . import FREE, QueryPattern, Store, StoreConfig

__all__ = ["Workload", "BenchResult", "bench_backends", "bench_tsv", "write_synthetic_map"]

# Uncataloged name used for generated benchmark tables.
SYNTHETIC_MAP = "map_ncbi_gene_symb"


class Workload(str, Enum):
    LOAD = "load"
    FULL_SCAN = "full_scan"
    KEYED_LOOKUP = "keyed_lookup"
    REVERSE_LOOKUP = "reverse_lookup"


@dataclass(frozen=True)
class BenchResult:
    backend: str
    workload: str
    n_ops: int
    seconds: float

    @property
    def mean_latency(self) -> float:
        return self.seconds / self.n_ops if self.n_ops else 0.0


def write_synthetic_map(data_dir: Path, rows: int, seed: int = 0) -> RelName:
    """Generate an integer-to-symbol map of the given size under data_dir."""
    rel = parse_rel_name(SYNTHETIC_MAP)
    schema = RelationSchema(
        name=rel,
        columns=(("gene", ColumnType.INTEGER), ("symb", ColumnType.SYMBOL)),
        key_columns=(0,),
    )
    rng = random.Random(seed)
    ids = list(range(1, rows + 1))
    rng.shuffle(ids)
    data = [(i, f"SYM{i:07d}") for i in ids]
    write_canonical(
        Path(data_dir) / canonical_rel_path(rel),
        schema,
        data,
        source_url="synthetic",
        build_date="1970-01-01T00:00:00Z",
    )
    return rel


def bench_backends(
    store_configs: Sequence[StoreConfig],
    name: RelName | str,
    workload: Workload | str,
    n_ops: int,
    *,
    seed: int = 0,
) -> list[BenchResult]:
    """Time one workload against each configured backend.

    The canonical file for ``name`` must already sit at its cell path in
    every config's data directory.  ``n_ops`` of zero yields an empty
    report.
    """
    workload = Workload(workload)
    if n_ops <= 0:
        return []
    results: list[BenchResult] = []
    for config in store_configs:
        rel = parse_rel_name(name) if isinstance(name, str) else name
        file = config.data_dir / canonical_rel_path(rel)
        _, rows = read_canonical(file)
        rng = random.Random(seed)
        with Store(config) as store:
            if workload is Workload.LOAD:
                start = time.perf_counter()
                for _ in range(n_ops):
                    store.import_canonical(rel, file)
                elapsed = time.perf_counter() - start
            else:
                store.import_canonical(rel, file)
                schema = store.schema(rel)
                patterns = _patterns(schema, rows, workload, n_ops, rng)
                start = time.perf_counter()
                for pattern in patterns:
                    for _ in store.query(rel, pattern):
                        pass
                elapsed = time.perf_counter() - start
        results.append(
            BenchResult(config.backend.value, workload.value, n_ops, elapsed)
        )
    return results


def _patterns(schema, rows, workload: Workload, n_ops: int, rng) -> list[QueryPattern]:
    arity = schema.arity
    if workload is Workload.FULL_SCAN:
        return [QueryPattern.full_scan(arity)] * n_ops
    if not rows:
        return [QueryPattern.full_scan(arity)] * n_ops
    out = []
    for _ in range(n_ops):
        row = rows[rng.randrange(len(rows))]
        bindings = [FREE] * arity
        if workload is Workload.KEYED_LOOKUP:
            for col in schema.key_columns:
                bindings[col] = row[col]
        else:  # reverse lookup binds the subject column of a map
            bindings[1] = row[1]
        out.append(QueryPattern.of(*bindings))
    return out


def bench_tsv(results: Sequence[BenchResult]) -> str:
    lines = ["backend\tworkload\tn_ops\tseconds\tmean_latency_s"]
    for r in results:
        lines.append(
            f"{r.backend}\t{r.workload}\t{r.n_ops}\t{r.seconds:.6f}\t{r.mean_latency:.9f}"
        )
    return "\n".join(lines) + "\n"

"""Turning upstream dumps into canonical files, fetching them, counting them."""

from .builders import (
    BUILDERS,
    SourceDump,
    build_ense,
    build_gont,
    build_hgnc,
    build_mgim,
    build_ncbi,
    build_pros,
    build_strg,
    build_unip,
    load_manifest,
    run_builder,
)
from .fetch import fetch_remote
from .stats import PopulationStat, stats, stats_tsv

__all__ = [
    "BUILDERS",
    "SourceDump",
    "build_ense",
    "build_gont",
    "build_hgnc",
    "build_mgim",
    "build_ncbi",
    "build_pros",
    "build_strg",
    "build_unip",
    "load_manifest",
    "run_builder",
    "fetch_remote",
    "PopulationStat",
    "stats",
    "stats_tsv",
]

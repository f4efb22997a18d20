"""Command-line surface: table listing, queries, fetch/stats/bench and the
two analysis pipelines.

Machine-readable output (TSV) goes to stdout, diagnostics to stderr.
Exit codes: 0 success (empty results included), 1 operational error,
2 usage error.  Options cascade: built-in defaults, then the config file,
then BIOREL_* environment variables, then command-line flags.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from . import __version__
from .analytics import (
    IdKind,
    family_from_file,
    family_string_graph,
    go_over_string_graphs,
    ora_tsv,
)
from .config import (
    DEFAULTS,
    Options,
    default_config_path,
    env_overrides,
    load_config_file,
)
from .errors import BioRelError, MalformedPatternError, MalformedSelectorError, UnknownDbTokenError, UnknownOrgTokenError
from .graph import RenderOptions, render_to_file
from .ingest import fetch_remote, load_manifest, run_builder, stats, stats_tsv
from .relcore import OrgToken, catalog_list, format_rel_name, selector_parse
from .store import (
    DOWNLOAD_PROMPT,
    FetchPolicy,
    QueryPattern,
    Store,
    StoreConfig,
)
from .store.bench import Workload, bench_backends, bench_tsv, write_synthetic_map


class _UsageError(Exception):
    pass


def _parse_selector(text: str):
    try:
        return selector_parse(text)
    except (MalformedSelectorError, UnknownDbTokenError, UnknownOrgTokenError) as exc:
        raise _UsageError(str(exc)) from exc


def _gather_options(args: argparse.Namespace) -> Options:
    opts = Options()
    config_path = Path(args.config) if args.config else default_config_path()
    if config_path.exists():
        opts = opts.with_layer("config_file", load_config_file(config_path))
    env = env_overrides()
    if env:
        opts = opts.with_layer("env", env)
    flags = {
        key: value
        for key, value in vars(args).items()
        if key in DEFAULTS and value is not None
    }
    if flags:
        opts = opts.with_layer("flags", flags)
    return opts


def _store_config(opts: Options) -> StoreConfig:
    try:
        return StoreConfig(
            data_dir=Path(str(opts.get("data_dir"))).expanduser(),
            backend=str(opts.get("backend")),
            repo_url=str(opts.get("repo_url")),
            fetch_policy=str(opts.get("fetch_policy")),
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _render_options(opts: Options) -> RenderOptions:
    return RenderOptions(
        format=str(opts.get("format")),
        node_size=float(opts.get("node_size")),
        include_isolated=bool(opts.get("include_isolated")),
        color_up=str(opts.get("color_up")),
        color_down=str(opts.get("color_down")),
    )


# --- commands ---------------------------------------------------------

def cmd_tables(args, opts: Options) -> int:
    selector = _parse_selector(args.selector)
    for entry in catalog_list(selector):
        name = format_rel_name(entry.name)
        print(f"{name}/{entry.name.arity}\t{entry.org.value}\t{entry.cell_path}")
    return 0


def cmd_query(args, opts: Options) -> int:
    config = _store_config(opts)
    with Store(config) as store:
        schema = store.schema(args.name)
        try:
            pattern = QueryPattern.from_args(schema, args.args)
        except MalformedPatternError as exc:
            raise _UsageError(str(exc)) from exc
        for row in store.query(args.name, pattern):
            print("\t".join(str(c) for c in row))
    return 0


def cmd_fetch(args, opts: Options) -> int:
    selector = _parse_selector(args.selector)
    config = _store_config(opts)
    policy = config.fetch_policy
    interactive = policy is FetchPolicy.PROMPT and sys.stdin is not None and sys.stdin.isatty()
    failures = 0
    for entry in catalog_list(selector):
        name = format_rel_name(entry.name)
        dest = config.data_dir / entry.cell_path / f"{name}.tsv.gz"
        if dest.exists():
            print(f"{name}\tcached")
            continue
        if policy is FetchPolicy.NEVER:
            print(f"{name}\terror:TableMissingAndFetchForbidden")
            failures += 1
            continue
        if interactive:
            sys.stderr.write(f"{name}: table not present locally.\n{DOWNLOAD_PROMPT}")
            sys.stderr.flush()
            if sys.stdin.readline().strip().lower() not in ("", "y", "yes"):
                print(f"{name}\tdeclined")
                failures += 1
                continue
        try:
            fetch_remote(entry.name, config.repo_url, config.data_dir)
            print(f"{name}\tfetched")
        except BioRelError as exc:
            print(f"{name}\terror:{exc}")
            failures += 1
    return 1 if failures else 0


def cmd_stats(args, opts: Options) -> int:
    selector = _parse_selector(args.selector)
    config = _store_config(opts)
    with Store(config) as store:
        rows = stats(store, selector)
    sys.stdout.write(stats_tsv(rows))
    return 0


def cmd_bench(args, opts: Options) -> int:
    backends = [b.strip() for b in args.backends.split(",") if b.strip()]
    with tempfile.TemporaryDirectory(prefix="biorel-bench-") as scratch:
        data_dir = Path(scratch)
        rel = write_synthetic_map(data_dir, args.rows, seed=args.seed)
        configs = [StoreConfig(data_dir=data_dir, backend=b) for b in backends]
        results = bench_backends(configs, rel, Workload(args.workload), args.n_ops,
                                 seed=args.seed)
    sys.stdout.write(bench_tsv(results))
    return 0


def cmd_build(args, opts: Options) -> int:
    files = load_manifest(Path(args.manifest))
    try:
        org = OrgToken(args.org)
    except ValueError:
        raise _UsageError(f"unknown organism token {args.org!r}") from None
    out_dir = Path(args.out_dir) if args.out_dir else _store_config(opts).data_dir
    paths = run_builder(args.db, org, files, out_dir, build_date=args.build_date)
    for path in paths:
        print(path)
    return 0


def cmd_family_graph(args, opts: Options) -> int:
    config = _store_config(opts)
    family = family_from_file(Path(args.family_file))
    with Store(config) as store:
        graph = family_string_graph(store, Path(args.csv), family, opts)
    counts = {d.value: c for d, c in graph.direction_counts().items()}
    print(f"nodes\t{graph.node_count}")
    print(f"edges\t{graph.edge_count}")
    print(f"up\t{counts['up']}")
    print(f"down\t{counts['down']}")
    print(f"absent\t{counts['absent']}")
    ropts = _render_options(opts)
    out = Path(args.out_dir) / f"{family.name}.{ropts.format}"
    if graph.node_count or graph.edge_count or ropts.include_isolated:
        render_to_file(graph, ropts, out)
        print(f"file\t{out}")
    return 0


def cmd_go_over(args, opts: Options) -> int:
    config = _store_config(opts)
    out_dir = Path(args.out_dir)
    opts = opts.with_layer("cli_render", {"render_dir": str(out_dir)})
    with Store(config) as store:
        pairs = go_over_string_graphs(store, Path(args.csv), opts)
    sys.stdout.write(ora_tsv(row for row, _ in pairs))
    return 0


# --- parser -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biorel",
        description="Biological relation tables: query, fetch, build and analyse.",
    )
    parser.add_argument("--version", action="version", version=f"biorel {__version__}")
    parser.add_argument("--config", help="path to a key=value config file")
    parser.add_argument("--data-dir", dest="data_dir", help="cache/data directory")
    parser.add_argument("--backend", choices=["memory", "kv", "sql"], dest="backend")
    parser.add_argument("--repo-url", dest="repo_url", help="remote repository base URL")
    parser.add_argument("--fetch-policy", dest="fetch_policy",
                        choices=["auto", "prompt", "never"])
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("tables", help="list catalog entries")
    p.add_argument("selector", nargs="?", default="")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("query", help="query one relation ('?' marks a free column)")
    p.add_argument("name")
    p.add_argument("args", nargs="*")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("fetch", help="ensure canonical files are cached locally")
    p.add_argument("selector", nargs="?", default="")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("stats", help="population statistics per relation")
    p.add_argument("selector", nargs="?", default="")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="compare backends on a synthetic table")
    p.add_argument("--rows", type=int, default=100_000)
    p.add_argument("--workload", default="keyed_lookup",
                   choices=[w.value for w in Workload])
    p.add_argument("--n-ops", dest="n_ops", type=int, default=10_000)
    p.add_argument("--backends", default="memory,kv,sql")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("build", help="build canonical files from a dump manifest")
    p.add_argument("db", help="database token (hgnc, mgim, unip, gont, strg, ...)")
    p.add_argument("org", help="organism token (hs or mouse)")
    p.add_argument("--manifest", required=True, help="TSV: role<TAB>path per dump file")
    p.add_argument("--out-dir", dest="out_dir", help="defaults to the data dir")
    p.add_argument("--build-date", dest="build_date", help="override header build_date")
    p.set_defaults(func=cmd_build)

    for name, func in (("family-graph", cmd_family_graph), ("go-over", cmd_go_over)):
        p = sub.add_parser(name, help="analysis pipeline")
        p.add_argument("csv", help="experiment CSV")
        if name == "family-graph":
            p.add_argument("family_file", help="gene family (one symbol per line / CSV)")
        p.add_argument("--org", dest="organism", choices=["hs", "mouse"])
        p.add_argument("--max-pvalue", dest="max_pvalue", type=float)
        p.add_argument("--min-abs-lfc", dest="min_abs_log2fc", type=float)
        p.add_argument("--direction", choices=["both", "up", "down"])
        p.add_argument("--min-weight", dest="min_weight", type=int)
        p.add_argument("--id-col", dest="id_col")
        p.add_argument("--fc-col", dest="fc_col")
        p.add_argument("--pval-col", dest="pval_col")
        p.add_argument("--id-kind", dest="id_kind",
                       choices=[k.value for k in IdKind])
        p.add_argument("--node-size", dest="node_size", type=float)
        p.add_argument("--format", dest="format", choices=["dot", "svg"])
        p.add_argument("--out-dir", dest="out_dir", default=".")
        if name == "family-graph":
            p.add_argument("--include-absent", dest="include_absent",
                           action="store_const", const=True)
            p.set_defaults(func=cmd_family_graph)
        else:
            p.add_argument("--alpha", dest="alpha", type=float)
            p.set_defaults(func=cmd_go_over)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        opts = _gather_options(args)
        return args.func(args, opts)
    except _UsageError as exc:
        print(f"biorel: {exc}", file=sys.stderr)
        return 2
    except BioRelError as exc:
        print(f"biorel: {exc.__class__.__name__.removesuffix('Error')}: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()

"""The skycat command line.

Data-directory commands (load, undo, events) keep state in --data DIR:
a catalog snapshot (catalog.snapshot) plus the load-event ledger
(events.jsonl).  Exit codes: 0 success, 2 validation failure, 3
dependency error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import filterql, htm
from .bench import bench_cone, bench_neighbors, bench_scan
from .errors import (
    AlreadyUndoneError,
    DependencyError,
    FilterError,
    NotFoundError,
    SkycatError,
)
from .generator import GeneratorSpec, generate_synthetic
from .loader import Loader
from .store import CatalogStore

SNAPSHOT_NAME = "catalog.snapshot"
LEDGER_NAME = "events.jsonl"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DEPENDENCY = 3


def _open_workspace(data_dir: str):
    snap_path = os.path.join(data_dir, SNAPSHOT_NAME)
    ledger_path = os.path.join(data_dir, LEDGER_NAME)
    store = (
        CatalogStore.restore(snap_path)
        if os.path.exists(snap_path)
        else CatalogStore()
    )
    loader = Loader(store)
    if os.path.exists(ledger_path):
        loader.load_ledger(ledger_path)
    return store, loader, snap_path, ledger_path


def _save_workspace(store, loader, snap_path, ledger_path):
    os.makedirs(os.path.dirname(snap_path) or ".", exist_ok=True)
    store.persist(snap_path)
    loader.save_ledger(ledger_path)


def cmd_htm_lookup(args) -> int:
    tid = htm.htm_lookup_radec(args.ra, args.dec, args.depth)
    print(tid)
    return EXIT_OK


def cmd_htm_cover(args) -> int:
    ra, dec, radius = args.circle
    region = htm.circle_to_region(ra, dec, radius)
    for lo, hi in htm.cover(region, args.depth):
        print("%d %d" % (lo, hi))
    return EXIT_OK


def cmd_store_audit(args) -> int:
    store = CatalogStore.restore(args.snapshot)
    problems = store.audit()
    for p in problems:
        print(p)
    return EXIT_VALIDATION if problems else EXIT_OK


def cmd_filterql_check(args) -> int:
    from .schema import resolve_view

    schema, _ = resolve_view(args.view)
    try:
        expr = filterql.typecheck(filterql.parse(args.expr), schema)
    except FilterError as exc:
        print("error: %s" % exc)
        if exc.line == 1:
            print("  %s" % args.expr)
            print("  %s^" % (" " * (exc.col - 1)))
        return EXIT_VALIDATION
    print(filterql.to_text(expr))
    print("type: %s" % expr.type)
    return EXIT_OK


def cmd_load(args) -> int:
    store, loader, snap_path, ledger_path = _open_workspace(args.data)
    event = loader.load_csv(args.table, args.file)
    _save_workspace(store, loader, snap_path, ledger_path)
    print(
        "event %d: %s %s -> %s (%d/%d rows)"
        % (
            event.event_id,
            event.table_name,
            event.file_name,
            event.status,
            event.inserted_rows,
            event.source_rows,
        )
    )
    if event.status != "success":
        print(event.trace_text)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_undo(args) -> int:
    store, loader, snap_path, ledger_path = _open_workspace(args.data)
    deleted = loader.undo(args.event_id)
    _save_workspace(store, loader, snap_path, ledger_path)
    print("event %d undone: %d rows deleted" % (args.event_id, deleted))
    return EXIT_OK


def cmd_events(args) -> int:
    _, loader, _, _ = _open_workspace(args.data)
    events = loader.list_events(table=args.table, status=args.status)
    for e in events:
        print(json.dumps(e.to_json(), sort_keys=True))
    return EXIT_OK


def cmd_generate(args) -> int:
    region = None
    if args.circle:
        ra, dec, radius = args.circle
        region = htm.circle_to_region(ra, dec, radius)
    spec = GeneratorSpec(
        n_objects=args.objects,
        n_plates=args.plates,
        seed=args.seed,
        sky_region=region,
        duplicate_fraction=args.duplicate_fraction,
        primary_fraction=args.primary_fraction,
    )
    manifest = generate_synthetic(spec, args.out)
    print("wrote %s" % os.path.join(args.out, "manifest.json"))
    for name in manifest["loadOrder"]:
        print("  %s: %d rows" % (manifest["files"][name], manifest["rowCounts"][name]))
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.kind == "scan":
        stats = bench_scan(rows=args.rows, seed=args.seed)
    elif args.kind == "cone":
        stats = bench_cone(rows=args.rows, seed=args.seed)
    else:
        stats = bench_neighbors(rows=min(args.rows, 50000), seed=args.seed)
    print(json.dumps(stats, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .engine import QueryEngine
    from .service import create_app, load_config

    cfg = load_config(args.config)
    if args.host:
        cfg.host = args.host
    if args.port:
        cfg.port = args.port
    if args.data:
        cfg.snapshot = cfg.snapshot or os.path.join(args.data, SNAPSHOT_NAME)
        cfg.ledger = cfg.ledger or os.path.join(args.data, LEDGER_NAME)
    store = (
        CatalogStore.restore(cfg.snapshot)
        if cfg.snapshot and os.path.exists(cfg.snapshot)
        else CatalogStore()
    )
    loader = Loader(store)
    if cfg.ledger and os.path.exists(cfg.ledger):
        loader.load_ledger(cfg.ledger)
    app = create_app(store, loader, QueryEngine(store), cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skycat", description=__doc__)
    ap.add_argument(
        "--data",
        default=os.environ.get("SKYCAT_DATA", "./skycat-data"),
        help="workspace directory holding the snapshot and ledger",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("htm", help="spatial index debugging")
    gsub = g.add_subparsers(dest="htm_command", required=True)
    p = gsub.add_parser("lookup", help="trixel ID for a sky position")
    p.add_argument("ra", type=float)
    p.add_argument("dec", type=float)
    p.add_argument("depth", type=int)
    p.set_defaults(func=cmd_htm_lookup)
    p = gsub.add_parser("cover", help="ID ranges covering a circle")
    p.add_argument(
        "--circle", nargs=3, type=float, required=True, metavar=("RA", "DEC", "RADIUS")
    )
    p.add_argument("depth", type=int)
    p.set_defaults(func=cmd_htm_cover)

    g = sub.add_parser("store", help="snapshot utilities")
    gsub = g.add_subparsers(dest="store_command", required=True)
    p = gsub.add_parser("audit", help="integrity-check a snapshot file")
    p.add_argument("snapshot")
    p.set_defaults(func=cmd_store_audit)

    g = sub.add_parser("filterql", help="filter expression utilities")
    gsub = g.add_subparsers(dest="filterql_command", required=True)
    p = gsub.add_parser("check", help="parse and typecheck an expression")
    p.add_argument("expr")
    p.add_argument("--view", default="PhotoObj")
    p.set_defaults(func=cmd_filterql_check)

    p = sub.add_parser("load", help="load one CSV file into a table")
    p.add_argument("table")
    p.add_argument("file")
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("undo", help="undo a successful load event")
    p.add_argument("event_id", type=int)
    p.set_defaults(func=cmd_undo)

    p = sub.add_parser("events", help="list the load-event ledger")
    p.add_argument("--table")
    p.add_argument("--status", choices=("success", "failed", "undone"))
    p.set_defaults(func=cmd_events)

    p = sub.add_parser("generate", help="write a synthetic catalog as CSVs")
    p.add_argument("--objects", type=int, required=True)
    p.add_argument("--plates", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--circle", nargs=3, type=float, metavar=("RA", "DEC", "RADIUS"))
    p.add_argument("--duplicate-fraction", type=float, default=0.11)
    p.add_argument("--primary-fraction", type=float, default=0.80)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="performance checks")
    p.add_argument("kind", choices=("scan", "cone", "neighbors"))
    p.add_argument("--rows", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DependencyError as exc:
        print("dependency error: %s" % exc, file=sys.stderr)
        return EXIT_DEPENDENCY
    except (NotFoundError, AlreadyUndoneError, FilterError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION
    except SkycatError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error (bad input, bad snapshot,
out-of-range coordinates).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import snapshot
from .bench import format_report, insertion_depth_report, ops_report, space_report
from .dk2 import DK2Tree
from .rdf import STRATEGIES, TripleStore
from .schedule import VOCAB_MODES, DK2Config
from .static import StaticK2Tree, build
from .synth import clustered_points, uniform_points

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tree configuration")
    g.add_argument("--k-schedule", default="hybrid", help="'hybrid', one arity like '2', or a list like '4,4,2'")
    g.add_argument("--kprime", type=int, default=None, help="arity of the last level")
    g.add_argument("--block-size", type=int, default=512, help="leaf block size B in bytes")
    g.add_argument("--classes", type=int, default=4, help="number of leaf size classes (e + 1)")
    g.add_argument("--sample-t", type=int, default=128, help="T leaf rank sample period in bits")
    g.add_argument("--sample-l", type=int, default=128, help="L leaf sample period")
    g.add_argument("--vocab", choices=VOCAB_MODES, default="off", help="vocabulary-coded last level")
    g.add_argument("--rebuild-ratio", type=float, default=1.2)
    g.add_argument("--rebuild-floor-bytes", type=int, default=100 * 1024)


def _config(args) -> DK2Config:
    if args.classes < 1:
        raise UsageError("--classes must be at least 1")
    try:
        cfg = DK2Config(
            k_schedule=args.k_schedule,
            kprime=args.kprime,
            block_bytes=args.block_size,
            expansions=args.classes - 1,
            sample_t=args.sample_t,
            sample_l=args.sample_l,
            vocab=args.vocab,
            rebuild_ratio=args.rebuild_ratio,
            rebuild_floor_bytes=args.rebuild_floor_bytes,
        )
        cfg.schedule_for(2)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def read_edges(path) -> tuple[np.ndarray, int]:
    """Parse ``r c`` lines ('#' starts a comment); returns points and the id count."""
    rows, cols = [], []
    try:
        fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            try:
                r, c = (int(x) for x in parts)
            except ValueError:
                raise DataError(f"{path}:{lineno}: expected two integers 'r c', got {text!r}") from None
            if r < 0 or c < 0:
                raise DataError(f"{path}:{lineno}: negative id")
            rows.append(r)
            cols.append(c)
    pts = np.array([rows, cols], dtype=np.int64).T.reshape(-1, 2)
    n = int(pts.max()) + 1 if len(pts) else 0
    return pts, n


def _load(path):
    try:
        return snapshot.load(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except snapshot.SnapshotError as exc:
        raise DataError(f"{path}: {exc}") from None


def _save(obj, path) -> None:
    try:
        snapshot.save(obj, path)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None


def _stats(obj) -> dict:
    if isinstance(obj, StaticK2Tree):
        out = {"kind": "static", "schedule": obj.schedule.spec(), "n": obj.n_ids, "levels": obj.schedule.nlevels}
        out.update(obj.measure())
        return out
    if isinstance(obj, DK2Tree):
        out = {"kind": "dynamic", "schedule": obj.schedule.spec(), "vocab": obj.config.vocab}
        out.update(obj.measure())
        out["free_ids"] = len(obj.free_ids)
        return out
    out = {"kind": "store"}
    out.update(obj.measure())
    return out


# ---- subcommands


def cmd_build(args, out) -> None:
    cfg = _config(args)
    pts, n = read_edges(args.edges)
    n = max(n, args.n or 0, 1)
    if args.n is not None and len(pts) and int(pts.max()) >= args.n:
        raise DataError(f"edge id {int(pts.max())} outside --n {args.n}")
    schedule = cfg.schedule_for(n)
    st = build(pts, schedule, n)
    obj = st if args.static else DK2Tree.from_static(st, cfg)
    _save(obj, args.output)
    print(format_report(_stats(obj)), file=out)


def cmd_query(args, out) -> None:
    obj = _load(args.snapshot)
    if isinstance(obj, TripleStore):
        raise DataError("query works on relation snapshots; use 'rdf pattern' for stores")
    q = args.what
    want = {"cell": 2, "row": 1, "col": 1, "range": 4}
    if q not in want:
        raise UsageError(f"unknown query {q!r}; choose cell, row, col or range")
    if len(args.coords) != want[q]:
        raise UsageError(f"{q} needs {want[q]} coordinates")
    try:
        if q == "cell":
            print(obj.get_cell(*args.coords), file=out)
        elif q == "row":
            for c in obj.row_successors(*args.coords):
                print(c, file=out)
        elif q == "col":
            for r in obj.col_predecessors(*args.coords):
                print(r, file=out)
        else:
            for r, c in obj.range(*args.coords):
                print(f"{r} {c}", file=out)
    except IndexError as exc:
        raise DataError(str(exc)) from None


def cmd_update(args, out) -> None:
    obj = _load(args.snapshot)
    if not isinstance(obj, DK2Tree):
        raise DataError("update needs a dynamic relation snapshot")
    fh = sys.stdin if args.stream == "-" else None
    try:
        fh = fh or open(args.stream, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {args.stream}: {exc.strerror}") from None
    applied = 0
    with fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            where = f"{args.stream}:{lineno}"
            op, rest = text[0], text[1:].split()
            try:
                if op not in "+-":
                    raise ValueError
                if rest[:1] == ["node"]:
                    if op == "+" and len(rest) == 1:
                        print(f"node={obj.add_node()}", file=out)
                    elif op == "-" and len(rest) == 2:
                        obj.remove_node(int(rest[1]))
                    else:
                        raise ValueError
                else:
                    r, c = (int(x) for x in rest)
                    changed = obj.set_cell(r, c) if op == "+" else obj.clear_cell(r, c)
                    if not changed:
                        state = "present" if op == "+" else "absent"
                        print(f"warning: {where}: edge {r} {c} already {state}", file=sys.stderr)
            except IndexError as exc:
                raise DataError(f"{where}: {exc}") from None
            except ValueError as exc:
                detail = f": {exc}" if str(exc) else ""
                raise DataError(f"{where}: malformed update {text!r}{detail}") from None
            applied += 1
    _save(obj, args.output or args.snapshot)
    print(f"applied={applied}", file=out)


def _parse_pattern(text: str):
    parts = text.split()
    if len(parts) != 3:
        raise UsageError(f"pattern {text!r} needs three terms, '?' or '?name' for variables")
    return tuple(parts)


def cmd_rdf(args, out) -> None:
    if args.rdf_cmd == "load":
        cfg = _config(args)
        store = TripleStore(cfg)
        try:
            fh = sys.stdin if args.triples == "-" else open(args.triples, encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read {args.triples}: {exc.strerror}") from None
        with fh:
            try:
                store.load_lines(fh)
            except ValueError as exc:
                raise DataError(f"{args.triples}: {exc}") from None
        _save(store, args.output)
        print(format_report(_stats(store)), file=out)
        return
    store = _load(args.snapshot)
    if not isinstance(store, TripleStore):
        raise DataError("rdf commands need a triple store snapshot")
    if args.rdf_cmd == "pattern":
        s, p, o = _parse_pattern(args.pattern)
        for triple in store.match(s, p, o):
            print("\t".join(triple), file=out)
        return
    tp1, tp2 = _parse_pattern(args.left), _parse_pattern(args.right)
    try:
        rows = store.join(tp1, tp2, args.strategy)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for row in rows:
        print("\t".join(f"{k}={v}" for k, v in row), file=out)


def cmd_stats(args, out) -> None:
    print(format_report(_stats(_load(args.snapshot))), file=out)


def cmd_bench(args, out) -> None:
    cfg = _config(args)
    report: dict = {}
    if args.snapshot:
        obj = _load(args.snapshot)
        if isinstance(obj, StaticK2Tree):
            obj = DK2Tree.from_static(obj, cfg)
        if not isinstance(obj, DK2Tree):
            raise DataError("bench needs a relation snapshot")
        report.update(ops_report(obj, args.ops, args.seed))
    elif args.generator == "grid":
        if not 0 <= args.sep < args.side_exp:
            raise UsageError("--sep must be in [0, --side-exp)")
        if args.per_level > 0:
            report.update(
                insertion_depth_report(args.side_exp, args.sep, args.per_level, args.per_axis, args.seed)
            )
    else:
        if args.edges > 0:
            n = 1 << args.side_exp
            gen = uniform_points if args.generator == "uniform" else clustered_points
            pts = gen(n, args.edges, args.seed)
            report.update(space_report(pts, n, cfg, incremental=args.incremental))
            if args.ops > 0:
                report.update(ops_report(DK2Tree.from_static(build(pts, cfg.schedule_for(n), n), cfg), args.ops, args.seed))
    print(format_report(report, args.json), file=out)


def cmd_convert(args, out) -> None:
    cfg = _config(args)
    obj = _load(args.snapshot)
    if isinstance(obj, TripleStore):
        raise DataError("convert works on relation snapshots")
    if args.to == "static":
        result = obj.to_static() if isinstance(obj, DK2Tree) else obj
    else:
        st = obj if isinstance(obj, StaticK2Tree) else obj.to_static()
        try:
            result = DK2Tree.from_static(st, cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if isinstance(obj, DK2Tree):
            result.free_ids = list(obj.free_ids)
            result._free_set = set(result.free_ids)
    _save(result, args.output)
    print(format_report(_stats(result)), file=out)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dk2tree", description="Dynamic k2-trees, static k2-trees and k2-triples.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", help="build a snapshot from an edge list")
    p.add_argument("edges", help="file of 'r c' lines, '-' for stdin")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--static", action="store_true", help="write a static tree instead of a dynamic one")
    p.add_argument("--n", type=int, default=None, help="number of ids (default: largest id + 1)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="query a relation snapshot")
    p.add_argument("snapshot")
    p.add_argument("what", help="cell | row | col | range")
    p.add_argument("coords", type=int, nargs="*")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("update", help="apply '+r c', '-r c', '+node', '-node id' lines")
    p.add_argument("snapshot")
    p.add_argument("stream", help="update file, '-' for stdin")
    p.add_argument("-o", "--output", default=None, help="output snapshot (default: overwrite input)")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("rdf", help="triple store commands")
    rsub = p.add_subparsers(dest="rdf_cmd", required=True, parser_class=_Parser)
    q = rsub.add_parser("load", help="load tab-separated triples")
    q.add_argument("triples")
    q.add_argument("-o", "--output", required=True)
    _add_config_flags(q)
    q = rsub.add_parser("pattern", help="match one triple pattern, e.g. '?s p ?o'")
    q.add_argument("snapshot")
    q.add_argument("pattern")
    q = rsub.add_parser("join", help="join two patterns sharing one variable")
    q.add_argument("snapshot")
    q.add_argument("left")
    q.add_argument("right")
    q.add_argument("--strategy", choices=STRATEGIES, default="indep")
    p.set_defaults(func=cmd_rdf)

    p = sub.add_parser("stats", help="print structure sizes")
    p.add_argument("snapshot")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="run a workload and print a key=value report")
    p.add_argument("snapshot", nargs="?", default=None)
    p.add_argument("--generator", choices=("grid", "uniform", "clustered"), default="grid")
    p.add_argument("--side-exp", type=int, default=14, help="matrix side is 2**side_exp")
    p.add_argument("--sep", type=int, default=8, help="grid separation exponent d")
    p.add_argument("--per-level", type=int, default=20, help="grid insertions per depth")
    p.add_argument("--per-axis", type=int, default=64, help="grid lines kept per axis")
    p.add_argument("--edges", type=int, default=10000)
    p.add_argument("--ops", type=int, default=0)
    p.add_argument("--incremental", action="store_true", help="also build the dynamic tree cell by cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("convert", help="convert between static and dynamic snapshots")
    p.add_argument("snapshot")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--to", choices=("static", "dynamic"), required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "k_schedule"):
            _config(args)
        args.func(args, out)
    except UsageError as exc:
        print(f"dk2tree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"dk2tree: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()

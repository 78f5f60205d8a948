"""Workload drivers producing flat ``key=value`` reports.

Count-based fields (bits, bytes, splices, work) are deterministic for a given
input and seed; fields ending in ``_per_sec`` or ``_seconds`` are timings.
"""

from __future__ import annotations

import json
import random
import time

from .dk2 import DK2Tree
from .schedule import DK2Config, KSchedule
from .static import build
from .synth import grid_insertions, grid_points

TIMING_SUFFIXES = ("_per_sec", "_seconds")


def format_report(report: dict, as_json: bool = False) -> str:
    if as_json:
        return json.dumps(report, sort_keys=False)
    return "\n".join(f"{k}={v}" for k, v in report.items())


def strip_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if not k.endswith(TIMING_SUFFIXES)}


def insertion_depth_report(
    side_exp: int,
    sep_exp: int,
    per_level: int = 20,
    per_axis: int | None = None,
    seed: int = 0,
    config: DK2Config | None = None,
    isolated: bool = True,
) -> dict:
    """Insert cells next to a separated grid and tally the cost per depth ``l``.

    The matrix has side ``2**side_exp`` with 1s every ``2**sep_exp`` rows and
    columns; a k=2 tree over it has ``side_exp`` levels. For every depth
    ``l`` the report gives the group splices per insertion (always ``l``)
    and the mean mutation work (counter updates plus words written).

    With ``isolated`` each cell is cleared again right after it is measured,
    so every insertion hits the same grid matrix; otherwise insertions pile
    up and leaf fill levels drift between depths.
    """
    config = config if config is not None else DK2Config(k_schedule="2")
    schedule = KSchedule.uniform(2, 1 << side_exp)
    t0 = time.perf_counter()
    pts = grid_points(side_exp, sep_exp, per_axis)
    tree = DK2Tree.from_static(build(pts, schedule), config)
    build_s = time.perf_counter() - t0
    report = {
        "side_exp": side_exp,
        "sep_exp": sep_exp,
        "levels": schedule.nlevels,
        "grid_points": len(pts),
        "t_bits": tree.T.total_bits,
        "l_bits": tree.L.total_bits,
        "build_seconds": round(build_s, 4),
    }
    per_depth: dict[int, list[tuple[int, int]]] = {}
    t0 = time.perf_counter()
    count = 0
    for depth, r, c in grid_insertions(side_exp, sep_exp, per_level, seed, per_axis):
        before = tree.mutation_work()
        tree.set_cell(r, c)
        per_depth.setdefault(depth, []).append((tree.last_splices, tree.mutation_work() - before))
        count += 1
        if isolated:
            tree.clear_cell(r, c)
    elapsed = time.perf_counter() - t0
    exact = True
    for depth in sorted(per_depth):
        rows = per_depth[depth]
        splices = {s for s, _ in rows}
        exact &= splices == {depth}
        report[f"splices_l{depth}"] = "/".join(map(str, sorted(splices)))
        report[f"work_l{depth}"] = round(sum(w for _, w in rows) / len(rows), 3)
    works = [report[f"work_l{d}"] for d in sorted(per_depth)]
    report["splices_equal_depth"] = int(exact)
    report["work_monotone"] = int(all(a <= b for a, b in zip(works, works[1:])))
    if count:
        report["inserts_per_sec"] = round(count / max(elapsed, 1e-9), 1)
    return report


def space_report(points, n: int, config: DK2Config | None = None, incremental: bool = False) -> dict:
    """Static versus dynamic bytes for the same cells and schedule."""
    config = config if config is not None else DK2Config()
    schedule = config.schedule_for(n)
    t0 = time.perf_counter()
    st = build(points, schedule, n)
    static_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    dyn = DK2Tree.from_static(st, config)
    dynamic_s = time.perf_counter() - t0
    sm = st.measure()
    report = {
        "cells": len(points),
        "side": schedule.side,
        "schedule": schedule.spec(),
        "t_bits": st.t_bits,
        "l_bits": st.l_bits,
        "static_bytes": sm["total_bytes"],
        "dynamic_bytes": dyn.size_bytes(),
        "dynamic_static_ratio": round(dyn.size_bytes() / max(1, sm["total_bytes"]), 4),
        "static_build_seconds": round(static_s, 4),
        "dynamic_load_seconds": round(dynamic_s, 4),
    }
    if incremental:
        inc = DK2Tree(n, config, schedule)
        t0 = time.perf_counter()
        for r, c in points.tolist() if hasattr(points, "tolist") else points:
            inc.set_cell(r, c)
        elapsed = time.perf_counter() - t0
        report["incremental_bytes"] = inc.size_bytes()
        report["incremental_static_ratio"] = round(inc.size_bytes() / max(1, sm["total_bytes"]), 4)
        if len(points):
            report["incremental_inserts_per_sec"] = round(len(points) / max(elapsed, 1e-9), 1)
    return report


def ops_report(tree: DK2Tree, ops: int, seed: int = 0) -> dict:
    """Throughput of a mixed update/query workload on ``tree`` (mutated in place)."""
    if ops <= 0 or tree.n_ids == 0:
        return {}
    rng = random.Random(seed)
    n = tree.n_ids
    kinds = {"set": 0, "clear": 0, "cell": 0, "row": 0, "col": 0}
    spent = dict.fromkeys(kinds, 0.0)
    changed = 0
    for _ in range(ops):
        x = rng.random()
        kind = "set" if x < 0.4 else "clear" if x < 0.6 else "cell" if x < 0.8 else "row" if x < 0.9 else "col"
        r, c = rng.randrange(n), rng.randrange(n)
        t0 = time.perf_counter()
        if kind == "set":
            changed += tree.set_cell(r, c)
        elif kind == "clear":
            changed += tree.clear_cell(r, c)
        elif kind == "cell":
            tree.get_cell(r, c)
        elif kind == "row":
            tree.row_successors(r)
        else:
            tree.col_predecessors(c)
        spent[kind] += time.perf_counter() - t0
        kinds[kind] += 1
    report = {"ops": ops, "changed": changed}
    for kind, count in kinds.items():
        report[f"{kind}_ops"] = count
    for kind, count in kinds.items():
        if count:
            report[f"{kind}_per_sec"] = round(count / max(spent[kind], 1e-9), 1)
    report["total_bytes"] = tree.size_bytes()
    return report

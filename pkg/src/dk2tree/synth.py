"""Deterministic synthetic inputs: uniform and clustered graphs, separated grids, triples."""

from __future__ import annotations

import numpy as np


def _distinct(rows, cols) -> np.ndarray:
    pts = np.stack([rows, cols], axis=1).astype(np.int64)
    return np.unique(pts, axis=0)


def uniform_points(n: int, m: int, seed: int = 0) -> np.ndarray:
    """``m`` distinct cells drawn uniformly from an ``n x n`` matrix, sorted."""
    if m > n * n:
        raise ValueError(f"cannot place {m} distinct cells in a {n}x{n} matrix")
    rng = np.random.default_rng(seed)
    pts = np.zeros((0, 2), dtype=np.int64)
    while len(pts) < m:
        need = m - len(pts)
        extra = rng.integers(0, n, size=(need + need // 4 + 8, 2))
        pts = np.unique(np.concatenate([pts, extra]), axis=0)
    keep = np.sort(rng.choice(len(pts), size=m, replace=False))
    return pts[keep]


def clustered_points(n: int, m: int, seed: int = 0, locality: float = 0.85, spread: int = 64) -> np.ndarray:
    """``m`` distinct cells with Web-graph-like locality, sorted.

    A fraction ``locality`` of the cells link a row to a nearby column
    (normal offset with deviation ``spread``); the rest are uniform. Rows are
    skewed so some regions are dense.
    """
    if m > n * n:
        raise ValueError(f"cannot place {m} distinct cells in a {n}x{n} matrix")
    rng = np.random.default_rng(seed)
    pts = np.zeros((0, 2), dtype=np.int64)
    while len(pts) < m:
        need = m - len(pts)
        batch = need + need // 4 + 8
        hubs = rng.integers(0, n, size=max(1, batch // 16))
        rows = np.clip(rng.choice(hubs, size=batch) + rng.integers(-spread, spread + 1, size=batch), 0, n - 1)
        near = np.clip(rows + np.rint(rng.normal(0, spread, size=batch)).astype(np.int64), 0, n - 1)
        far = rng.integers(0, n, size=batch)
        cols = np.where(rng.random(batch) < locality, near, far)
        pts = np.unique(np.concatenate([pts, _distinct(rows, cols)]), axis=0)
    keep = np.sort(rng.choice(len(pts), size=m, replace=False))
    return pts[keep]


def grid_points(side_exp: int, sep_exp: int, per_axis: int | None = None) -> np.ndarray:
    """1s every ``2**sep_exp`` rows and columns of a ``2**side_exp`` matrix.

    ``per_axis`` keeps only the first that many grid lines on each axis, so
    huge sides can be explored without materializing the whole grid.
    """
    if not 0 <= sep_exp < side_exp:
        raise ValueError("separation exponent must be in [0, side exponent)")
    lines = 1 << (side_exp - sep_exp)
    if per_axis is not None:
        lines = min(lines, per_axis)
    coords = np.arange(lines, dtype=np.int64) << sep_exp
    r, c = np.meshgrid(coords, coords, indexing="ij")
    return np.stack([r.ravel(), c.ravel()], axis=1)


def grid_insertions(side_exp: int, sep_exp: int, per_level: int, seed: int = 0, per_axis: int | None = None):
    """Cells to insert next to grid points, ``per_level`` for each depth.

    A cell offset by ``2**l`` (down, right, or diagonally) from a grid point
    shares all but its lowest ``l + 1`` levels with that point, so inserting
    it creates exactly ``l`` new groups. Offsets at different depths or in
    different directions never share a new node, so every insertion stays
    independent of the others. Returns ``(l, row, col)`` for ``l`` in
    ``[0, sep_exp)``.
    """
    lines = 1 << (side_exp - sep_exp)
    if per_axis is not None:
        lines = min(lines, per_axis)
    slots = lines * lines * 3
    if per_level > slots:
        raise ValueError(f"{per_level} insertions per depth exceed the {slots} available slots")
    rng = np.random.default_rng(seed)
    out = []
    for depth in range(sep_exp):
        for slot in rng.choice(slots, size=per_level, replace=False).tolist():
            anchor, direction = divmod(slot, 3)
            gr, gc = (anchor // lines) << sep_exp, (anchor % lines) << sep_exp
            dr = 1 << depth if direction != 1 else 0
            dc = 1 << depth if direction != 0 else 0
            out.append((depth, gr + dr, gc + dc))
    return out


def random_triples(count: int, n_terms: int, n_preds: int, seed: int = 0, skew: float = 1.1):
    """``count`` distinct ``(s, p, o)`` string triples with Zipf-skewed predicates."""
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_preds + 1) ** skew
    weights /= weights.sum()
    seen: set[tuple[str, str, str]] = set()
    out = []
    while len(out) < count:
        batch = count - len(out) + 16
        s = rng.integers(0, n_terms, size=batch)
        o = rng.integers(0, n_terms, size=batch)
        p = rng.choice(n_preds, size=batch, p=weights)
        for a, b, c in zip(s.tolist(), p.tolist(), o.tolist()):
            t = (f"e{a}", f"p{b}", f"e{c}")
            if t not in seen:
                seen.add(t)
                out.append(t)
                if len(out) == count:
                    break
    return out

"""Brute-force reference evaluators used to check the fast paths."""

from __future__ import annotations

from collections import deque
from datetime import date
from typing import Any, Sequence

from ..mdx import MEASURES, MdxQuery
from ..store import NotFound, Warehouse


class _Resolver:
    """Caches dimension rows, per-key resolutions and the fact list for one warehouse state."""

    def __init__(self, wh: Warehouse):
        self.wh = wh
        self.rows: dict[str, list] = {}
        self.cache: dict = {}
        self.facts = list(wh.fact_rows())

    def __call__(self, dim: str, key: int, as_of: date | None):
        ck = (dim, key, as_of)
        if ck not in self.cache:
            if dim not in self.rows:
                self.rows[dim] = self.wh.dimension_rows(dim)
            nk = self.rows[dim][key - 1].natural_key
            try:
                row = self.wh.point_in_time(dim, nk, as_of) if as_of else self.wh.current_row(dim, nk)
            except NotFound:
                row = None
            self.cache[ck] = row
        return self.cache[ck]


def _matches(value, member) -> bool:
    return value == member or str(value) == str(member)


def oracle_aggregate(wh: Warehouse, axes: Sequence[tuple[str, str]],
                     slicers: Sequence[tuple[str, str, Any]] = (),
                     measures: Sequence[str] | None = None,
                     as_of: date | None = None, _resolver: _Resolver | None = None
                     ) -> dict[tuple, dict[str, float]]:
    """Fact-by-fact group-by with plain Python arithmetic."""
    fact = wh.schema.fact
    wanted = [m.name for m in fact.measures] if measures is None else list(measures)
    resolve = _resolver or _Resolver(wh)
    groups: dict[tuple, dict[str, float]] = {}
    counts: dict[tuple, int] = {}
    for row in resolve.facts:
        resolved = {}
        ok = True
        for d in {d for d, _ in axes} | {d for d, _, _ in slicers}:
            r = resolve(d, row.dim_keys[d], as_of)
            if r is None:
                ok = False
                break
            resolved[d] = r
        if not ok:
            continue
        if not all(_matches(resolved[d].attributes[lv], m) for d, lv, m in slicers):
            continue
        coord = tuple(resolved[d].attributes[lv] for d, lv in axes)
        acc = groups.setdefault(coord, {m.name: 0.0 for m in fact.base_measures})
        for m in fact.base_measures:
            acc[m.name] += row.measures[m.name]
        counts[coord] = counts.get(coord, 0) + 1
    out = {}
    for coord, acc in groups.items():
        cell = {}
        for name in wanted:
            md = fact.measure(name)
            if md.is_base:
                cell[name] = acc[name]
            elif md.kind == "average":
                cell[name] = acc[md.numerator] / counts[coord]
            elif acc[md.denominator] != 0:
                cell[name] = acc[md.numerator] / acc[md.denominator]
        out[coord] = cell
    return out


def _level_members(wh: Warehouse, dim: str, level: str) -> list:
    vals = set()
    for nk in wh.natural_keys(dim):
        try:
            vals.add(wh.current_row(dim, nk).attributes[level])
        except NotFound:
            pass
    return sorted(vals, key=lambda v: (str(type(v)), v))


def oracle_mdx_grid(q: MdxQuery, wh: Warehouse) -> tuple[list[str], list[str], list[list[float | None]]]:
    """Column captions, row captions and cells, each cell evaluated by scanning every fact.

    Supports member, ``.MEMBERS`` and ``.CHILDREN`` sets; members are listed in
    sorted order like the engine does.
    """
    fact = wh.schema.fact
    resolver = _Resolver(wh)

    def positions(expr):
        # (caption, filters, measure)
        if expr.path[0] == MEASURES:
            return [(expr.path[1], (), expr.path[1])]
        dim, level = expr.path[0], expr.path[1]
        if expr.kind == "member":
            return [(expr.path[2], ((dim, level, expr.path[2]),), None)]
        if expr.kind == "members":
            return [(str(v), ((dim, level, v),), None) for v in _level_members(wh, dim, level)]
        h = wh.schema.dimension(dim).hierarchy
        child = h[h.index(level) + 1]
        kids = set()
        for nk in wh.natural_keys(dim):
            try:
                a = wh.current_row(dim, nk).attributes
            except NotFound:
                continue
            if str(a[level]) == expr.path[2]:
                kids.add(a[child])
        kids = sorted(kids, key=lambda v: (str(type(v)), v))
        return [(str(v), ((dim, level, expr.path[2]), (dim, child, v)), None) for v in kids]

    slicer = []
    where_measure = None
    for path in q.slicer or ():
        if path[0] == MEASURES:
            where_measure = path[1]
        else:
            slicer.append((path[0], path[1], path[2]))
    cols = [p for e in q.columns for p in positions(e)]
    rows = [p for e in q.rows for p in positions(e)] if q.rows is not None else [("", (), None)]
    default = where_measure or fact.measures[0].name
    grid = []
    for _, rf, rm in rows:
        line = []
        for _, cf, cm in cols:
            measure = cm or rm or default
            cells = oracle_aggregate(wh, [], [*slicer, *cf, *rf], [measure], _resolver=resolver)
            line.append(cells.get((), {}).get(measure))
        grid.append(line)
    return [c for c, _, _ in cols], [r for r, _, _ in rows], grid


def oracle_mdx(q: MdxQuery, wh: Warehouse) -> list[list[float | None]]:
    """Cells of ``q`` evaluated independently of the cube engine."""
    return oracle_mdx_grid(q, wh)[2]


def dl_reference(a: str, b: str) -> int:
    """Unrestricted Damerau-Levenshtein distance by minimizing over alignments.

    Enumerates edit traces recursively with memoization on suffix pairs and
    explicit long-range transpositions: for a[i] == b[l] and b[j] == a[k]
    with k > i, l > j, the pair costs (k - i - 1) + 1 + (l - j - 1).
    """
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        best = min(d(i + 1, j) + 1, d(i, j + 1) + 1, d(i + 1, j + 1) + (a[i] != b[j]))
        # swap a[i] with a later a[k] matched against b[j+..]: a[i]..a[k] -> b[j]..b[l]
        for k in range(i + 1, len(a)):
            if a[k] != b[j]:
                continue
            for l in range(j + 1, len(b)):
                if b[l] == a[i]:
                    best = min(best, (k - i - 1) + 1 + (l - j - 1) + d(k + 1, l + 1))
        return best

    return d(0, 0)


def bfs_distance(a: str, b: str, limit: int = 6) -> int:
    """Shortest edit script from ``a`` to ``b`` by breadth-first search.

    Operations are single-character substitution, insertion, deletion and
    adjacent transposition, each of cost one, with the restriction removed
    by allowing edits anywhere at any time. Characters are drawn from the
    union of both strings. Exponential; meant for strings of a few characters.
    """
    if a == b:
        return 0
    alphabet = sorted(set(a) | set(b))
    seen = {a}
    frontier = deque([(a, 0)])
    while frontier:
        s, d = frontier.popleft()
        if d >= limit:
            break
        nxt = set()
        for i in range(len(s) + 1):
            for c in alphabet:
                nxt.add(s[:i] + c + s[i:])
            if i < len(s):
                nxt.add(s[:i] + s[i + 1:])
                for c in alphabet:
                    nxt.add(s[:i] + c + s[i + 1:])
            if i + 1 < len(s):
                nxt.add(s[:i] + s[i + 1] + s[i] + s[i + 2:])
        for t in nxt:
            if t == b:
                return d + 1
            if t not in seen and len(t) <= max(len(a), len(b)) + 1:
                seen.add(t)
                frontier.append((t, d + 1))
    raise ValueError("distance exceeds search limit")

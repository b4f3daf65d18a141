"""OLAP aggregation over the fact table: slice, dice, drill-down, roll-up.

Group-bys are computed lazily from the columnar fact arrays and memoized per
(axes, filters, as_of, warehouse version). Ratio measures are evaluated
aggregate-then-divide; a zero denominator leaves the cell value absent.
"""

from __future__ import annotations

import threading
import weakref
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import date
from typing import Any, Iterable, Sequence

import numpy as np

from . import _kernels
from .store import Snapshot, Warehouse

DENSE_GROUP_LIMIT = 1 << 21


class CubeError(Exception):
    pass


@dataclass(frozen=True)
class CubeAxis:
    dimension: str
    level: str
    members: tuple


@dataclass(frozen=True)
class CubeResult:
    axes: tuple[CubeAxis, ...]
    cells: dict[tuple, dict[str, float]]
    measures: tuple[str, ...]
    slicers: tuple[tuple[str, str, Any], ...] = ()
    drill: tuple[tuple[str, str, Any], ...] = ()
    as_of: date | None = None

    def value(self, coordinate: tuple, measure: str) -> float | None:
        return self.cells.get(tuple(coordinate), {}).get(measure)


@dataclass
class _GroupBy:
    coords: list[tuple]
    sums: np.ndarray
    counts: np.ndarray
    columns: tuple[str, ...]
    axes: tuple[CubeAxis, ...]


@dataclass
class _LevelIndex:
    """Per-row resolution of one dimension level under an as_of context."""

    target: np.ndarray          # row key -> resolved row index (-1: none)
    values: list                # resolved row index -> level value
    members: list = field(default_factory=list)


class Cube:
    """Aggregation engine bound to one warehouse."""

    def __init__(self, wh: Warehouse, memo_size: int = 256):
        self.wh = wh
        self.memo_size = memo_size
        self._memo: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def clear(self) -> None:
        with self._lock:
            self._memo.clear()

    # -- validation -----------------------------------------------------------

    def _check_level(self, dim: str, level: str) -> None:
        schema = self.wh.schema
        if dim not in schema.fact.dimension_refs:
            raise CubeError(f"unknown dimension {dim!r}")
        if level not in schema.dimension(dim).attribute_names:
            raise CubeError(f"unknown level {level!r} in dimension {dim}")

    def member_value(self, dim: str, level: str, member: Any) -> Any:
        """Typed member value for ``member`` (matched by value or by text)."""
        self._check_level(dim, level)
        table = self.wh.tables[dim]
        with self.wh._lock:
            col = list(table.columns[level])
        for v in col:
            if v == member and type(v) is type(member):
                return v
        text = str(member)
        for v in col:
            if str(v) == text:
                return v
        raise CubeError(f"unknown member {text!r} of {dim}.{level}")

    def _measures(self, measures: Iterable[str] | None) -> tuple[str, ...]:
        fact = self.wh.schema.fact
        if measures is None:
            return tuple(m.name for m in fact.measures)
        out = tuple(measures)
        names = {m.name for m in fact.measures}
        for m in out:
            if m not in names:
                raise CubeError(f"unknown measure {m!r}")
        return out

    # -- level resolution -----------------------------------------------------

    def _level_index(self, snap: Snapshot, dim: str, level: str, as_of: date | None) -> _LevelIndex:
        table = self.wh.tables[dim]
        n = snap.dim_rows[dim]
        ends = snap.dim_ends[dim]
        target = np.full(n + 1, -1, dtype=np.int64)
        with self.wh._lock:
            histories = [(nk, list(rows)) for nk, rows in table.history.items()]
            starts = list(table.start[:n])
            col = list(table.columns[level][:n])
        for _nk, rows in histories:
            rows = [r for r in rows if r < n]
            if not rows:
                continue
            t = -1
            if as_of is None:
                if ends[rows[-1]] is None:
                    t = rows[-1]
            else:
                for r in reversed(rows):
                    if starts[r] <= as_of:
                        if ends[r] is None or as_of < ends[r]:
                            t = r
                        break
            for r in rows:
                target[r + 1] = t
        return _LevelIndex(target, col)

    # -- aggregation ----------------------------------------------------------

    def aggregate(self, axes: Sequence[tuple[str, str]], slicers: Sequence[tuple[str, str, Any]] = (),
                  measures: Iterable[str] | None = None, as_of: date | None = None,
                  drill: Sequence[tuple[str, str, Any]] = ()) -> CubeResult:
        axes = tuple((d, lv) for d, lv in axes)
        for d, lv in axes:
            self._check_level(d, lv)
        slicers = tuple((d, lv, self.member_value(d, lv, m)) for d, lv, m in slicers)
        drill = tuple((d, lv, self.member_value(d, lv, m)) for d, lv, m in drill)
        wanted = self._measures(measures)
        snap = self.wh.snapshot()
        key = (snap.version, snap.n_facts, axes, slicers, drill, as_of)
        gb = None
        if self.memo_size:
            with self._lock:
                gb = self._memo.get(key)
                if gb is not None:
                    self._memo.move_to_end(key)
        if gb is None:
            gb = self._group_by(snap, axes, slicers + drill, as_of)
            if self.memo_size:
                with self._lock:
                    self._memo[key] = gb
                    while len(self._memo) > self.memo_size:
                        self._memo.popitem(last=False)
        cells = self._evaluate(gb, wanted)
        return CubeResult(gb.axes, cells, wanted, slicers, drill, as_of)

    def _group_by(self, snap: Snapshot, axes, filters, as_of) -> _GroupBy:
        n = snap.n_facts
        fact = snap.schema.fact
        columns = tuple(m.name for m in fact.base_measures)
        indexes: dict[tuple[str, str], _LevelIndex] = {}

        def index(d, lv):
            if (d, lv) not in indexes:
                indexes[(d, lv)] = self._level_index(snap, d, lv, as_of)
            return indexes[(d, lv)]

        mask = np.ones(n, dtype=bool)
        referenced = {d for d, _ in axes} | {d for d, _, _ in filters}
        if as_of is not None:
            for d in referenced:
                some_level = next(lv for dd, lv in [*axes, *((f[0], f[1]) for f in filters)] if dd == d)
                t = index(d, some_level).target[snap.fact_keys[d]]
                if n and (t < 0).any():
                    bad = int(np.flatnonzero(t < 0)[0]) + 1
                    raise CubeError(f"{d} has no row valid at {as_of.isoformat()} for fact {bad}")

        # rows of each dimension that satisfy every filter on that dimension
        row_ok: dict[str, np.ndarray] = {}
        for d, lv, member in filters:
            li = index(d, lv)
            ok = np.array([t >= 0 and li.values[t] == member for t in li.target], dtype=bool)
            row_ok[d] = row_ok[d] & ok if d in row_ok else ok
        for d, ok in row_ok.items():
            mask &= ok[snap.fact_keys[d]]

        cube_axes: list[CubeAxis] = []
        codes: list[np.ndarray] = []
        sizes: list[int] = []
        for d, lv in axes:
            li = index(d, lv)
            ok = row_ok.get(d)
            present = {li.values[t] for i, t in enumerate(li.target) if t >= 0 and (ok is None or ok[i])}
            members = sorted(present, key=_sort_key)
            pos = {m: i for i, m in enumerate(members)}
            lut = np.array([pos.get(li.values[t], -1) if t >= 0 else -1 for t in li.target], dtype=np.int64)
            c = lut[snap.fact_keys[d]]
            mask &= c >= 0
            codes.append(c)
            sizes.append(len(members))
            cube_axes.append(CubeAxis(d, lv, tuple(members)))

        sel = np.flatnonzero(mask)
        values = np.empty((len(sel), len(columns)), dtype=np.float64)
        for j, m in enumerate(columns):
            values[:, j] = snap.fact_measures[m][sel]
        gid = np.zeros(len(sel), dtype=np.int64)
        total = 1
        for c, size in zip(codes, sizes):
            gid = gid * max(size, 1) + c[sel]
            total *= max(size, 1)
        if not axes:
            total = 1
        if total <= DENSE_GROUP_LIMIT:
            sums, counts = _kernels.group_sums(gid, values, total)
            present_groups = np.flatnonzero(counts)
            group_keys = present_groups
            sums, counts = sums[present_groups], counts[present_groups]
        else:
            group_keys, inverse = np.unique(gid, return_inverse=True)
            sums, counts = _kernels.group_sums(inverse.astype(np.int64), values, len(group_keys))
        coords = []
        for g in group_keys.tolist():
            coord = []
            for size, ax in zip(reversed(sizes), reversed(cube_axes)):
                g, r = divmod(g, max(size, 1))
                coord.append(ax.members[r])
            coords.append(tuple(reversed(coord)))
        return _GroupBy(coords, sums, counts, columns, tuple(cube_axes))

    def _evaluate(self, gb: _GroupBy, wanted: tuple[str, ...]) -> dict[tuple, dict[str, float]]:
        fact = self.wh.schema.fact
        col = {m: i for i, m in enumerate(gb.columns)}
        cells: dict[tuple, dict[str, float]] = {}
        for i, coord in enumerate(gb.coords):
            row = gb.sums[i]
            cell: dict[str, float] = {}
            for name in wanted:
                md = fact.measure(name)
                if md.is_base:
                    cell[name] = float(row[col[name]])
                elif md.kind == "average":
                    cell[name] = float(row[col[md.numerator]] / gb.counts[i])
                else:
                    den = row[col[md.denominator]]
                    if den != 0:
                        cell[name] = float(row[col[md.numerator]] / den)
            cells[coord] = cell
        return cells

    # -- navigation -----------------------------------------------------------

    def _hierarchy(self, dim: str) -> tuple[str, ...]:
        return self.wh.schema.dimension(dim).hierarchy

    def drill_down(self, result: CubeResult, axis: int, within: Any) -> CubeResult:
        ax = _axis(result, axis)
        levels = self._hierarchy(ax.dimension)
        if ax.level not in levels:
            raise CubeError(f"{ax.dimension}.{ax.level} is not a hierarchy level")
        i = levels.index(ax.level)
        if i == len(levels) - 1:
            raise CubeError(f"{ax.dimension}.{ax.level} is at finest level")
        member = _find_member(ax, within)
        axes = [(a.dimension, a.level) for a in result.axes]
        axes[axis] = (ax.dimension, levels[i + 1])
        return self.aggregate(axes, result.slicers, result.measures, result.as_of,
                              result.drill + ((ax.dimension, ax.level, member),))

    def roll_up(self, result: CubeResult, axis: int) -> CubeResult:
        ax = _axis(result, axis)
        levels = self._hierarchy(ax.dimension)
        if ax.level not in levels:
            raise CubeError(f"{ax.dimension}.{ax.level} is not a hierarchy level")
        i = levels.index(ax.level)
        if i == 0:
            raise CubeError(f"{ax.dimension}.{ax.level} is at coarsest level")
        parent = levels[i - 1]
        axes = [(a.dimension, a.level) for a in result.axes]
        axes[axis] = (ax.dimension, parent)
        drill = tuple(f for f in result.drill
                      if not (f[0] == ax.dimension and f[1] in levels and levels.index(f[1]) >= i - 1))
        return self.aggregate(axes, result.slicers, result.measures, result.as_of, drill)


def _axis(result: CubeResult, axis: int) -> CubeAxis:
    if not 0 <= axis < len(result.axes):
        raise CubeError(f"axis index {axis} out of range")
    return result.axes[axis]


def _find_member(ax: CubeAxis, within: Any) -> Any:
    for m in ax.members:
        if m == within and type(m) is type(within):
            return m
    for m in ax.members:
        if str(m) == str(within):
            return m
    raise CubeError(f"member {within!r} is not on axis {ax.dimension}.{ax.level}")


def _sort_key(v: Any):
    return (type(v).__name__, v)


_cubes: "weakref.WeakKeyDictionary[Warehouse, Cube]" = weakref.WeakKeyDictionary()
_cubes_lock = threading.Lock()


def cube_for(wh: Warehouse) -> Cube:
    """The shared memoizing cube of ``wh``."""
    with _cubes_lock:
        c = _cubes.get(wh)
        if c is None:
            c = _cubes[wh] = Cube(wh)
        return c


def aggregate(wh: Warehouse, axes: Sequence[tuple[str, str]], slicers: Sequence[tuple[str, str, Any]] = (),
              measures: Iterable[str] | None = None, as_of: date | None = None) -> CubeResult:
    return cube_for(wh).aggregate(axes, slicers, measures, as_of)


def drill_down(result: CubeResult, wh: Warehouse, axis: int, within: Any) -> CubeResult:
    return cube_for(wh).drill_down(result, axis, within)


def roll_up(result: CubeResult, wh: Warehouse, axis: int) -> CubeResult:
    return cube_for(wh).roll_up(result, axis)

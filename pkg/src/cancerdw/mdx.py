"""A small MDX subset: parse, print, and execute against a warehouse.

Grammar (keywords case-insensitive)::

    query   := SELECT axis [',' axis] FROM ident [WHERE tuple]
    axis    := set ON (COLUMNS | ROWS)
    set     := '{' member (',' member)* '}' | member
    member  := ident ('.' ident)* ['.' (MEMBERS | CHILDREN)]
    tuple   := '(' ident ('.' ident)* (',' ident ('.' ident)*)* ')'
    ident   := '[' chars ']'        -- ']]' escapes a closing bracket

``[Measures].[name]`` selects a measure; ``[Dim].[level].[member]`` a member;
``[Dim].[level].MEMBERS`` every member of a level; ``[Dim].[level].[member].CHILDREN``
the members one level finer within ``member``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

from .cube import Cube, CubeError, cube_for
from .store import Warehouse

KEYWORDS = {"SELECT", "ON", "COLUMNS", "ROWS", "FROM", "WHERE", "MEMBERS", "CHILDREN"}
MEASURES = "Measures"


class MdxError(Exception):
    pass


class MdxSyntaxError(MdxError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.text = text
        self.reason = message

    def caret(self) -> str:
        line_start = self.text.rfind("\n", 0, self.offset) + 1
        line_end = self.text.find("\n", self.offset)
        line = self.text[line_start: line_end if line_end >= 0 else len(self.text)]
        return line + "\n" + " " * (self.offset - line_start) + "^"


class UnknownClauseError(MdxSyntaxError):
    pass


class DuplicateAxisError(MdxSyntaxError):
    pass


class MdxBindError(MdxError):
    pass


@dataclass(frozen=True)
class MemberExpr:
    """``kind`` is ``member``, ``members`` or ``children``."""

    path: tuple[str, ...]
    kind: str = "member"

    @property
    def is_measure(self) -> bool:
        return self.path[0] == MEASURES


@dataclass(frozen=True)
class MdxQuery:
    columns: tuple[MemberExpr, ...]
    cube: str
    rows: tuple[MemberExpr, ...] | None = None
    slicer: tuple[tuple[str, ...], ...] | None = None

    @property
    def measures(self) -> tuple[str, ...]:
        out = [m.path[1] for m in self.columns if m.is_measure]
        out += [m.path[1] for m in self.rows or () if m.is_measure]
        out += [p[1] for p in self.slicer or () if p[0] == MEASURES]
        return tuple(out)


# ---------------------------------------------------------------------------
# lexer / parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s+|(?P<ident>\[(?:[^\]]|\]\])*\])|(?P<word>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[{}(),.])")


def _tokens(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos] == "[":
                raise MdxSyntaxError("unterminated bracketed identifier", pos, text)
            raise MdxSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        if m.lastgroup == "ident":
            out.append(("ident", m.group()[1:-1].replace("]]", "]"), pos))
        elif m.lastgroup == "word":
            out.append(("word", m.group(), pos))
        elif m.lastgroup == "punct":
            out.append(("punct", m.group(), pos))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, message: str, tok=None, cls=MdxSyntaxError):
        tok = tok or self.peek()
        return cls(message, tok[2], self.text)

    def keyword(self, kw: str):
        t = self.next()
        if t[0] != "word" or t[1].upper() != kw:
            found = t[1] or "end of input"
            raise self.error(f"expected {kw}, found {found!r}", t)
        return t

    def is_keyword(self, kw: str) -> bool:
        t = self.peek()
        return t[0] == "word" and t[1].upper() == kw

    def punct(self, p: str):
        t = self.next()
        if t != ("punct", p, t[2]):
            raise self.error(f"expected {p!r}, found {t[1] or 'end of input'!r}", t)
        return t

    def ident(self) -> str:
        t = self.next()
        if t[0] != "ident":
            raise self.error(f"expected bracketed identifier, found {t[1] or 'end of input'!r}", t)
        if not t[1]:
            raise self.error("empty identifier", t)
        return t[1]

    def path(self) -> tuple[list[str], str]:
        parts = [self.ident()]
        kind = "member"
        while self.peek() == ("punct", ".", self.peek()[2]):
            self.next()
            t = self.peek()
            if t[0] == "word" and t[1].upper() in ("MEMBERS", "CHILDREN"):
                self.next()
                kind = t[1].lower()
                break
            parts.append(self.ident())
        return parts, kind

    def member(self) -> MemberExpr:
        start = self.peek()
        parts, kind = self.path()
        if parts[0] == MEASURES:
            if kind != "member" or len(parts) != 2:
                raise self.error("measures are written [Measures].[name]", start)
        elif kind == "members" and len(parts) != 2:
            raise self.error(".MEMBERS applies to [Dimension].[Level]", start)
        elif kind == "children" and len(parts) != 3:
            raise self.error(".CHILDREN applies to [Dimension].[Level].[Member]", start)
        elif kind == "member" and len(parts) != 3:
            raise self.error("member paths are [Dimension].[Level].[Member]", start)
        return MemberExpr(tuple(parts), kind)

    def set(self) -> tuple[MemberExpr, ...]:
        if self.peek()[:2] == ("punct", "{"):
            self.next()
            items = [self.member()]
            while self.peek()[:2] == ("punct", ","):
                self.next()
                items.append(self.member())
            self.punct("}")
            return tuple(items)
        return (self.member(),)

    def parse(self) -> MdxQuery:
        self.keyword("SELECT")
        axes: dict[str, tuple[MemberExpr, ...]] = {}
        while True:
            s = self.set()
            self.keyword("ON")
            t = self.next()
            name = t[1].upper() if t[0] == "word" else ""
            if name not in ("COLUMNS", "ROWS"):
                raise self.error(f"unknown axis {t[1] or 'end of input'!r}", t)
            if name in axes:
                raise self.error(f"duplicate axis {name}", t, DuplicateAxisError)
            axes[name] = s
            if self.peek()[:2] == ("punct", ","):
                self.next()
                continue
            break
        if "COLUMNS" not in axes:
            raise self.error("a COLUMNS axis is required")
        self.keyword("FROM")
        cube = self.ident()
        slicer = None
        if self.is_keyword("WHERE"):
            self.next()
            self.punct("(")
            paths = []
            while True:
                start = self.peek()
                parts, kind = self.path()
                if kind != "member":
                    raise self.error("WHERE takes explicit members only", start)
                if parts[0] == MEASURES and len(parts) != 2 or parts[0] != MEASURES and len(parts) != 3:
                    raise self.error("malformed member path in WHERE", start)
                paths.append(tuple(parts))
                if self.peek()[:2] == ("punct", ","):
                    self.next()
                    continue
                break
            self.punct(")")
            slicer = tuple(paths)
        t = self.peek()
        if t[0] != "eof":
            if t[0] == "word":
                raise self.error(f"unknown clause {t[1]!r}", t, UnknownClauseError)
            raise self.error(f"unexpected {t[1]!r}", t)
        q = MdxQuery(axes["COLUMNS"], cube, axes.get("ROWS"), slicer)
        _check_measure_placement(q, self)
        return q


def _check_measure_placement(q: MdxQuery, p: _Parser) -> None:
    places = sum(bool(group) for group in (
        [m for m in q.columns if m.is_measure],
        [m for m in q.rows or () if m.is_measure],
        [s for s in q.slicer or () if s[0] == MEASURES],
    ))
    if places > 1:
        raise MdxSyntaxError("measures may appear on only one axis or the slicer", 0, p.text)
    if q.slicer is not None:
        named = [s for s in q.slicer if s[0] == MEASURES]
        if len(named) > 1:
            raise MdxSyntaxError("the slicer may name one measure", 0, p.text)


def parse_mdx(text: str) -> MdxQuery:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------


def _bracket(name: str) -> str:
    return "[" + name.replace("]", "]]") + "]"


def _print_member(m: MemberExpr) -> str:
    s = ".".join(_bracket(p) for p in m.path)
    if m.kind != "member":
        s += "." + m.kind.upper()
    return s


def print_mdx(q: MdxQuery) -> str:
    """Canonical text: upper-case keywords, braces around every set."""
    out = "SELECT {" + ", ".join(_print_member(m) for m in q.columns) + "} ON COLUMNS"
    if q.rows is not None:
        out += ", {" + ", ".join(_print_member(m) for m in q.rows) + "} ON ROWS"
    out += " FROM " + _bracket(q.cube)
    if q.slicer is not None:
        out += " WHERE (" + ", ".join(".".join(_bracket(p) for p in s) for s in q.slicer) + ")"
    return out


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Position:
    """One header position: a caption, the member filters it implies, optional measure."""

    caption: str
    filters: tuple[tuple[str, str, Any], ...] = ()
    measure: str | None = None


@dataclass(frozen=True)
class ResultGrid:
    column_headers: tuple[str, ...]
    row_headers: tuple[str, ...]
    cells: tuple[tuple[float | None, ...], ...]
    column_positions: tuple[Position, ...] = ()
    row_positions: tuple[Position, ...] = ()
    slicer: tuple[tuple[str, str, Any], ...] = ()
    measure: str | None = None


def _cube_matches(name: str, fact_name: str) -> bool:
    return name == fact_name or (fact_name.startswith("Fact") and name == fact_name[4:])


def _expand(expr: MemberExpr, cube: Cube) -> list[tuple[Position, tuple[str, str] | None]]:
    """Positions for one set member, each with the (dim, level) it varies on."""
    wh = cube.wh
    if expr.is_measure:
        name = expr.path[1]
        if name not in {m.name for m in wh.schema.fact.measures}:
            raise MdxBindError(f"unknown measure {name!r}")
        return [(Position(name, (), name), None)]
    dim, level = expr.path[0], expr.path[1]
    if dim not in wh.schema.fact.dimension_refs:
        raise MdxBindError(f"unknown dimension {dim!r}")
    if level not in wh.schema.dimension(dim).attribute_names:
        raise MdxBindError(f"unknown level {level!r} in dimension {dim}")
    if expr.kind == "member":
        value = _member(cube, dim, level, expr.path[2])
        return [(Position(str(value), ((dim, level, value),)), (dim, level))]
    if expr.kind == "members":
        axis = cube.aggregate([(dim, level)], measures=()).axes[0]
        return [(Position(str(v), ((dim, level, v),)), (dim, level)) for v in axis.members]
    hierarchy = wh.schema.dimension(dim).hierarchy
    if level not in hierarchy:
        raise MdxBindError(f"{dim}.{level} is not a hierarchy level")
    i = hierarchy.index(level)
    if i == len(hierarchy) - 1:
        raise MdxBindError(f"{dim}.{level} is at finest level; no children")
    parent = _member(cube, dim, level, expr.path[2])
    child = hierarchy[i + 1]
    axis = cube.aggregate([(dim, child)], drill=[(dim, level, parent)], measures=()).axes[0]
    return [(Position(str(v), ((dim, level, parent), (dim, child, v))), (dim, child)) for v in axis.members]


def _member(cube: Cube, dim: str, level: str, text: str):
    try:
        return cube.member_value(dim, level, text)
    except CubeError as exc:
        raise MdxBindError(str(exc)) from None


def execute_mdx(q: MdxQuery, wh: Warehouse, cube: Cube | None = None) -> ResultGrid:
    """Evaluate ``q``; cell (r, c) is the aggregate under the row, column and WHERE filters."""
    cube = cube or cube_for(wh)
    fact = wh.schema.fact
    if not _cube_matches(q.cube, fact.name):
        raise MdxBindError(f"unknown cube {q.cube!r}")
    slicer: list[tuple[str, str, Any]] = []
    where_measure = None
    for path in q.slicer or ():
        if path[0] == MEASURES:
            where_measure = _expand(MemberExpr(path), cube)[0][0].measure
            continue
        dim, level = path[0], path[1]
        if dim not in fact.dimension_refs:
            raise MdxBindError(f"unknown dimension {dim!r}")
        if level not in wh.schema.dimension(dim).attribute_names:
            raise MdxBindError(f"unknown level {level!r} in dimension {dim}")
        slicer.append((dim, level, _member(cube, dim, level, path[2])))

    cols = [p for e in q.columns for p in _expand(e, cube)]
    rows = [p for e in q.rows for p in _expand(e, cube)] if q.rows is not None else [(Position(""), None)]
    default_measure = where_measure or fact.measures[0].name

    results: dict[tuple, Any] = {}
    grid: list[list[float | None]] = []
    for rpos, rvary in rows:
        line: list[float | None] = []
        for cpos, cvary in cols:
            measure = cpos.measure or rpos.measure or default_measure
            axes = [v for v in (cvary, rvary) if v is not None]
            fixed = list(slicer)
            coord: list[Any] = []
            for pos, vary in ((cpos, cvary), (rpos, rvary)):
                if vary is None:
                    continue
                *prefix, last = pos.filters
                fixed.extend(prefix)
                coord.append(last[2])
            key = (tuple(axes), tuple(fixed), measure)
            res = results.get(key)
            if res is None:
                try:
                    res = results[key] = cube.aggregate(axes, fixed, [measure])
                except CubeError as exc:
                    raise MdxBindError(str(exc)) from None
            line.append(res.value(tuple(coord), measure))
        grid.append(line)
    return ResultGrid(
        tuple(p.caption for p, _ in cols),
        tuple(p.caption for p, _ in rows),
        tuple(tuple(r) for r in grid),
        tuple(p for p, _ in cols),
        tuple(p for p, _ in rows),
        tuple(slicer),
        where_measure,
    )

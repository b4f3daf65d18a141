"""Star-schema metadata and the line-oriented schema config format.

Config grammar (one statement per line, ``#`` starts a comment)::

    dimension <Name> [scd2]
      attr <name>:<text|integer|decimal|date>
      key <attr>
      hierarchy <a> > <b> > ...
    fact <Name>
      dim <DimensionName>
      measure <name>:<sum|count|average(<base>)|ratio(<num>,<den>)>
    crossref <DimensionName>
      map "<variant>" -> "<canonical>"

Indented lines belong to the most recent block header. See
``docs/schema-format.md`` for the full grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
ATTRIBUTE_KINDS = ("text", "integer", "decimal", "date")
BASE_MEASURE_KINDS = ("sum", "count")


class SchemaError(ValueError):
    """Base for schema config problems."""


class SchemaSyntaxError(SchemaError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SchemaSemanticError(SchemaError):
    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


@dataclass(frozen=True)
class AttributeDef:
    name: str
    kind: str


@dataclass(frozen=True)
class DimensionDef:
    name: str
    natural_key: str
    attributes: tuple[AttributeDef, ...]
    hierarchy: tuple[str, ...] = ()
    scd2: bool = False

    def attribute(self, name: str) -> AttributeDef:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)


@dataclass(frozen=True)
class MeasureDef:
    """A fact measure.

    ``kind`` is ``sum``, ``count``, ``average`` or ``ratio``. Averages name a
    sum measure in ``numerator``; ratios name both operands.
    """

    name: str
    kind: str
    numerator: str | None = None
    denominator: str | None = None

    @property
    def is_base(self) -> bool:
        return self.kind in BASE_MEASURE_KINDS

    def spelled(self) -> str:
        if self.kind == "ratio":
            return f"ratio({self.numerator},{self.denominator})"
        if self.kind == "average":
            return f"average({self.numerator})"
        return self.kind


@dataclass(frozen=True)
class FactDef:
    name: str
    dimension_refs: tuple[str, ...]
    measures: tuple[MeasureDef, ...]

    def measure(self, name: str) -> MeasureDef:
        for m in self.measures:
            if m.name == name:
                return m
        raise KeyError(name)

    @property
    def base_measures(self) -> tuple[MeasureDef, ...]:
        return tuple(m for m in self.measures if m.is_base)


@dataclass(frozen=True)
class CrossRefMap:
    dimension: str
    entries: tuple[tuple[str, str], ...]

    def lookup(self) -> dict[str, str]:
        return dict(self.entries)


@dataclass(frozen=True)
class StarSchema:
    dimensions: tuple[DimensionDef, ...]
    fact: FactDef
    crossrefs: tuple[CrossRefMap, ...] = ()
    _dims: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_dims", {d.name: d for d in self.dimensions})

    def dimension(self, name: str) -> DimensionDef:
        try:
            return self._dims[name]
        except KeyError:
            raise KeyError(f"unknown dimension {name!r}") from None

    def has_dimension(self, name: str) -> bool:
        return name in self._dims

    def crossref(self, dimension: str) -> dict[str, str]:
        out: dict[str, str] = {}
        for c in self.crossrefs:
            if c.dimension == dimension:
                out.update(c.entries)
        return out


@dataclass
class ValidationReport:
    passed: bool
    orphans: list[str]
    messages: list[str]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_MEASURE_RE = re.compile(
    r"(?P<name>[^:\s]+):(?P<kind>sum|count|average\((?P<avg>[^)]*)\)|ratio\((?P<num>[^,)]*),(?P<den>[^)]*)\))\Z"
)
_MAP_RE = re.compile(r'map\s+"((?:[^"\\]|\\.)*)"\s*->\s*"((?:[^"\\]|\\.)*)"\s*\Z')


def _unescape(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s)


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _ident(name: str, what: str, lineno: int, col: int) -> str:
    if not IDENT.match(name):
        raise SchemaSyntaxError(f"invalid {what} identifier {name!r}", lineno, col)
    return name


def parse_schema(config_text: str) -> StarSchema:
    """Parse schema config text into a validated :class:`StarSchema`."""
    blocks: list[dict] = []
    current: dict | None = None
    for lineno, raw in enumerate(config_text.splitlines(), start=1):
        line = raw.split("#", 1)[0] if not raw.lstrip().startswith("map") else raw
        if not line.strip():
            continue
        indented = line[0] in " \t"
        stripped = line.strip()
        col = len(line) - len(line.lstrip()) + 1
        words = stripped.split()
        head = words[0]
        if not indented:
            current = _parse_header(words, lineno, col)
            blocks.append(current)
            continue
        if current is None:
            raise SchemaSyntaxError("indented line outside any block", lineno, col)
        _parse_body(current, head, words, stripped, lineno, col)
    if not blocks:
        raise SchemaSyntaxError("empty schema config", 1, 1)
    return _build(blocks)


def _parse_header(words: list[str], lineno: int, col: int) -> dict:
    head = words[0]
    if head == "dimension":
        if len(words) not in (2, 3) or (len(words) == 3 and words[2] != "scd2"):
            raise SchemaSyntaxError("expected 'dimension <Name> [scd2]'", lineno, col)
        return {
            "type": "dimension", "name": _ident(words[1], "dimension", lineno, col + 10),
            "scd2": len(words) == 3, "attrs": [], "key": None, "hierarchy": [], "line": lineno,
        }
    if head == "fact":
        if len(words) != 2:
            raise SchemaSyntaxError("expected 'fact <Name>'", lineno, col)
        return {"type": "fact", "name": _ident(words[1], "fact", lineno, col + 5),
                "dims": [], "measures": [], "line": lineno}
    if head == "crossref":
        if len(words) != 2:
            raise SchemaSyntaxError("expected 'crossref <Dimension>'", lineno, col)
        return {"type": "crossref", "name": _ident(words[1], "dimension", lineno, col + 9),
                "entries": [], "line": lineno}
    raise SchemaSyntaxError(f"unknown block keyword {head!r}", lineno, col)


def _parse_body(block: dict, head: str, words: list[str], stripped: str, lineno: int, col: int) -> None:
    kind = block["type"]
    if kind == "dimension" and head == "attr":
        if len(words) != 2 or ":" not in words[1]:
            raise SchemaSyntaxError("expected 'attr <name>:<kind>'", lineno, col)
        name, akind = words[1].split(":", 1)
        _ident(name, "attribute", lineno, col + 5)
        if akind not in ATTRIBUTE_KINDS:
            raise SchemaSyntaxError(f"unknown attribute kind {akind!r}", lineno, col + 6 + len(name))
        block["attrs"].append((AttributeDef(name, akind), lineno))
    elif kind == "dimension" and head == "key":
        if len(words) != 2:
            raise SchemaSyntaxError("expected 'key <attr>'", lineno, col)
        block["key"] = (_ident(words[1], "attribute", lineno, col + 4), lineno)
    elif kind == "dimension" and head == "hierarchy":
        levels = [p.strip() for p in stripped[len("hierarchy"):].split(">")]
        for lv in levels:
            _ident(lv, "hierarchy level", lineno, col)
        block["hierarchy"] = (levels, lineno)
    elif kind == "fact" and head == "dim":
        if len(words) != 2:
            raise SchemaSyntaxError("expected 'dim <Dimension>'", lineno, col)
        block["dims"].append((_ident(words[1], "dimension", lineno, col + 4), lineno))
    elif kind == "fact" and head == "measure":
        m = _MEASURE_RE.match(stripped[len("measure"):].strip()) if len(words) >= 2 else None
        if m is None:
            raise SchemaSyntaxError("expected 'measure <name>:<kind>'", lineno, col)
        name = _ident(m["name"], "measure", lineno, col + 8)
        if m["avg"] is not None:
            md = MeasureDef(name, "average", m["avg"].strip())
        elif m["num"] is not None:
            md = MeasureDef(name, "ratio", m["num"].strip(), m["den"].strip())
        else:
            md = MeasureDef(name, m["kind"])
        block["measures"].append((md, lineno))
    elif kind == "crossref" and head == "map":
        m = _MAP_RE.match(stripped)
        if m is None:
            raise SchemaSyntaxError('expected map "<variant>" -> "<canonical>"', lineno, col)
        block["entries"].append((_unescape(m[1]), _unescape(m[2]), lineno))
    else:
        raise SchemaSyntaxError(f"unexpected {head!r} inside {kind} block", lineno, col)


def _build(blocks: list[dict]) -> StarSchema:
    dims: list[DimensionDef] = []
    facts = [b for b in blocks if b["type"] == "fact"]
    seen: dict[str, int] = {}
    for b in blocks:
        if b["type"] != "dimension":
            continue
        if b["name"] in seen:
            raise SchemaSemanticError(f"duplicate dimension {b['name']!r}", b["line"])
        seen[b["name"]] = b["line"]
        names: list[str] = []
        for a, ln in b["attrs"]:
            if a.name in names:
                raise SchemaSemanticError(f"duplicate attribute {a.name!r} in {b['name']}", ln)
            names.append(a.name)
        if not names:
            raise SchemaSemanticError(f"dimension {b['name']!r} has no attributes", b["line"])
        key = names[0]
        if b["key"] is not None:
            key, ln = b["key"]
            if key not in names:
                raise SchemaSemanticError(f"key {key!r} is not an attribute of {b['name']}", ln)
        hierarchy: tuple[str, ...] = ()
        if b["hierarchy"]:
            levels, ln = b["hierarchy"]
            for lv in levels:
                if lv not in names:
                    raise SchemaSemanticError(f"hierarchy level {lv!r} is not an attribute of {b['name']}", ln)
            if len(set(levels)) != len(levels):
                raise SchemaSemanticError(f"hierarchy of {b['name']} repeats a level", ln)
            hierarchy = tuple(levels)
        dims.append(DimensionDef(b["name"], key, tuple(a for a, _ in b["attrs"]), hierarchy, b["scd2"]))

    if len(facts) != 1:
        line = facts[1]["line"] if len(facts) > 1 else None
        raise SchemaSemanticError(f"exactly one fact required, found {len(facts)}", line)
    fb = facts[0]
    if fb["name"] in seen:
        raise SchemaSemanticError(f"fact name {fb['name']!r} clashes with a dimension", fb["line"])
    refs: list[str] = []
    for name, ln in fb["dims"]:
        if name not in seen:
            raise SchemaSemanticError(f"fact {fb['name']} references undeclared dimension {name!r}", ln)
        if name in refs:
            raise SchemaSemanticError(f"dimension {name!r} referenced twice", ln)
        refs.append(name)
    if not refs:
        raise SchemaSemanticError(f"fact {fb['name']} references no dimension", fb["line"])
    measures: dict[str, MeasureDef] = {}
    for md, ln in fb["measures"]:
        if md.name in measures:
            raise SchemaSemanticError(f"duplicate measure {md.name!r}", ln)
        measures[md.name] = md
    for md, ln in fb["measures"]:
        operands = [o for o in (md.numerator, md.denominator) if o is not None]
        for o in operands:
            target = measures.get(o)
            if target is None or not target.is_base or o == md.name:
                raise SchemaSemanticError(f"measure {md.name!r} needs a sum/count operand, got {o!r}", ln)
        if md.kind == "average" and measures[md.numerator].kind != "sum":
            raise SchemaSemanticError(f"average {md.name!r} must name a sum measure", ln)
    fact = FactDef(fb["name"], tuple(refs), tuple(measures.values()))

    crossrefs: list[CrossRefMap] = []
    for b in blocks:
        if b["type"] != "crossref":
            continue
        if b["name"] not in seen:
            raise SchemaSemanticError(f"crossref for undeclared dimension {b['name']!r}", b["line"])
        variants: set[str] = set()
        for variant, _canon, ln in b["entries"]:
            if variant in variants:
                raise SchemaSemanticError(f"variant {variant!r} mapped twice", ln)
            variants.add(variant)
        crossrefs.append(CrossRefMap(b["name"], tuple((v, c) for v, c, _ in b["entries"])))
    return StarSchema(tuple(dims), fact, tuple(crossrefs))


def print_schema(schema: StarSchema) -> str:
    """Serialize ``schema`` back to config text (inverse of ``parse_schema``)."""
    out: list[str] = []
    for d in schema.dimensions:
        out.append(f"dimension {d.name}" + (" scd2" if d.scd2 else ""))
        for a in d.attributes:
            out.append(f"  attr {a.name}:{a.kind}")
        out.append(f"  key {d.natural_key}")
        if d.hierarchy:
            out.append("  hierarchy " + " > ".join(d.hierarchy))
    out.append(f"fact {schema.fact.name}")
    for r in schema.fact.dimension_refs:
        out.append(f"  dim {r}")
    for m in schema.fact.measures:
        out.append(f"  measure {m.name}:{m.spelled()}")
    for c in schema.crossrefs:
        out.append(f"crossref {c.dimension}")
        for v, k in c.entries:
            out.append(f'  map "{_escape(v)}" -> "{_escape(k)}"')
    return "\n".join(out) + "\n"


def validate_subject_orientation(schema: StarSchema) -> ValidationReport:
    """Check that the schema forms a single connected star around one fact."""
    messages: list[str] = []
    referenced = set(schema.fact.dimension_refs) if schema.fact else set()
    orphans = [d.name for d in schema.dimensions if d.name not in referenced]
    if not schema.dimensions:
        messages.append("schema declares no dimensions")
    if orphans:
        messages.append("dimensions not referenced by the fact: " + ", ".join(orphans))
    dangling = [r for r in referenced if not schema.has_dimension(r)]
    if dangling:
        messages.append("fact references undeclared dimensions: " + ", ".join(sorted(dangling)))
    passed = bool(schema.dimensions) and not orphans and not dangling
    return ValidationReport(passed, orphans, messages)


def reference_schema_text() -> str:
    return resources.files("cancerdw.data").joinpath("reference_schema.cdw").read_text(encoding="utf-8")


def reference_schema() -> StarSchema:
    """The shipped cancer-warehouse star schema."""
    return parse_schema(reference_schema_text())

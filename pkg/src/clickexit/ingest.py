"""Daily click-dump parsing, crawler filtering and column pruning.

Dump dialect: UTF-8, tab separated, one click per line, first line a header
of canonical column names, ``\\N`` for a missing optional value, integer
epoch seconds for every time field and ``1``/``0`` for booleans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

from .table import Column, EmptyTable, FeatureTable

MISSING = "\\N"
MARKERS = (0, 25, 50, 75, 100)
FREQUENCIES = ("hourly", "daily", "weekly", "monthly", "yearly")

# (name, type, nullable); order is the canonical dump layout
CANONICAL_FIELDS: tuple[tuple[str, str, bool], ...] = (
    ("visitor_id", "str", True),
    ("ip", "str", False),
    ("timestamp", "int", False),
    ("channel", "str", False),
    ("section", "str", False),
    ("subsection", "str", False),
    ("page_url", "str", False),
    ("story_title", "str", False),
    ("referrer_url", "str", False),
    ("referrer_type", "str", False),
    ("first_hit_page", "str", False),
    ("first_hit_referrer", "str", False),
    ("first_hit_time", "int", True),
    ("last_visit", "int", True),
    ("last_click", "int", True),
    ("browser", "str", True),
    ("city", "str", True),
    ("region", "str", True),
    ("country", "str", True),
    ("isp_domain", "str", True),
    ("search_keywords", "str", True),
    ("search_engine", "str", True),
    ("search_page_num", "int", True),
    ("cookies_enabled", "bool", False),
    ("exclude_hit", "bool", False),
    ("new_visit", "bool", False),
    ("visit_number", "int", False),
    ("frequency_of_visits", "str", False),
    ("player_id", "str", True),
    ("progress_marker", "int", True),
)
OPTIONAL_COLUMNS: tuple[tuple[str, str, bool], ...] = (("content_category", "str", True),)
REQUIRED_COLUMNS = tuple(name for name, _, _ in CANONICAL_FIELDS)
_FIELD_TYPES = {name: (kind, nullable) for name, kind, nullable in CANONICAL_FIELDS + OPTIONAL_COLUMNS}


class SchemaError(ValueError):
    pass


class MissingColumn(SchemaError):
    def __init__(self, name: str):
        super().__init__(f"missing required column {name!r}")
        self.name = name


class DuplicateColumn(SchemaError):
    def __init__(self, name: str):
        super().__init__(f"duplicate column {name!r}")
        self.name = name


@dataclass(frozen=True, slots=True)
class ClickEvent:
    user_key: str
    visitor_id: str | None
    ip: str
    timestamp: int
    channel: str
    section: str
    subsection: str
    page_url: str
    story_title: str
    referrer_url: str
    referrer_type: str
    first_hit_page: str
    first_hit_referrer: str
    first_hit_time: int | None
    last_visit: int | None
    last_click: int | None
    browser: str | None
    city: str | None
    region: str | None
    country: str | None
    isp_domain: str | None
    search_keywords: str | None
    search_engine: str | None
    search_page_num: int | None
    cookies_enabled: bool
    exclude_hit: bool
    new_visit: bool
    visit_number: int
    frequency_of_visits: str
    player_id: str | None
    progress_marker: int | None
    content_category: str | None = None
    extras: tuple = ()

    def extra(self, name: str):
        for key, value in self.extras:
            if key == name:
                return value
        raise KeyError(name)


def resolve_user_key(visitor_id: str | None, ip: str, cookies_enabled: bool) -> str:
    """Cookie id when cookies are on, otherwise the IP.

    Cookieless keys are namespaced so they can never collide with cookie ids.
    """
    if cookies_enabled and visitor_id is not None:
        return "c:" + visitor_id
    return "ip:" + ip


@dataclass(frozen=True)
class SchemaMap:
    column_index_by_name: dict
    declared_column_count: int
    header: tuple = ()
    extras: tuple = ()

    @property
    def has_category(self) -> bool:
        return "content_category" in self.column_index_by_name


def validate_header(header_row: str) -> SchemaMap:
    names = header_row.rstrip("\r\n").split("\t")
    seen: dict[str, int] = {}
    for i, name in enumerate(names):
        if name in seen:
            raise DuplicateColumn(name)
        seen[name] = i
    for name in REQUIRED_COLUMNS:
        if name not in seen:
            raise MissingColumn(name)
    extras = tuple(n for n in names if n not in _FIELD_TYPES)
    return SchemaMap(seen, len(names), tuple(names), extras)


def canonical_schema(extras: Sequence[str] = (), with_category: bool = False) -> SchemaMap:
    names = list(REQUIRED_COLUMNS)
    if with_category:
        names.append("content_category")
    names.extend(extras)
    return validate_header("\t".join(names))


@dataclass(frozen=True)
class Reject:
    line_number: int
    reason: str


class _BadField(ValueError):
    pass


def _convert(name: str, raw: str):
    kind, nullable = _FIELD_TYPES[name]
    if raw == MISSING:
        if not nullable:
            raise _BadField(f"missing required value for {name}")
        return None
    if kind == "str":
        return raw
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            if name == "timestamp":
                raise _BadField(f"malformed timestamp {raw!r}") from None
            raise _BadField(f"malformed integer {raw!r} for {name}") from None
    if raw in ("1", "true"):
        return True
    if raw in ("0", "false"):
        return False
    raise _BadField(f"malformed boolean {raw!r} for {name}")


def _check(values: dict) -> None:
    ts = values["timestamp"]
    if ts <= 0:
        raise _BadField("timestamp must be positive")
    fht = values["first_hit_time"]
    if fht is not None and fht > ts:
        raise _BadField("first_hit_time after timestamp")
    marker = values["progress_marker"]
    if marker is not None and marker not in MARKERS:
        raise _BadField("marker outside {0,25,50,75,100}")
    if (marker is None) != (values["player_id"] is None):
        raise _BadField("progress_marker and player_id must be present together")
    if values["visit_number"] < 1:
        raise _BadField("visit_number must be >= 1")
    spn = values["search_page_num"]
    if spn is not None and spn < 1:
        raise _BadField("search_page_num must be >= 1")
    if values["frequency_of_visits"] not in FREQUENCIES:
        raise _BadField(f"unknown frequency_of_visits {values['frequency_of_visits']!r}")


def parse_line(line: str, schema: SchemaMap) -> ClickEvent:
    cells = line.rstrip("\r\n").split("\t")
    if len(cells) != schema.declared_column_count:
        raise _BadField(
            f"field-count mismatch: expected {schema.declared_column_count}, got {len(cells)}"
        )
    idx = schema.column_index_by_name
    values = {name: _convert(name, cells[idx[name]]) for name in REQUIRED_COLUMNS}
    _check(values)
    category = None
    if schema.has_category:
        category = _convert("content_category", cells[idx["content_category"]])
    extras = ()
    if schema.extras:
        extras = tuple(
            (name, None if cells[idx[name]] == MISSING else cells[idx[name]])
            for name in schema.extras
        )
    user_key = resolve_user_key(values["visitor_id"], values["ip"], values["cookies_enabled"])
    return ClickEvent(user_key=user_key, content_category=category, extras=extras, **values)


def parse_dump(
    lines: Iterable[str], schema: SchemaMap, first_line_number: int = 2
) -> tuple[list[ClickEvent], list[Reject]]:
    """Parse body lines (header excluded); bad lines become rejects, never errors."""
    events: list[ClickEvent] = []
    rejects: list[Reject] = []
    for offset, line in enumerate(lines):
        try:
            events.append(parse_line(line, schema))
        except _BadField as exc:
            rejects.append(Reject(first_line_number + offset, str(exc)))
    return events, rejects


def read_dump(stream: TextIO) -> tuple[SchemaMap, list[ClickEvent], list[Reject]]:
    header = stream.readline()
    if not header:
        raise SchemaError("empty file: no header")
    schema = validate_header(header)
    events, rejects = parse_dump(stream, schema)
    return schema, events, rejects


def _format(value) -> str:
    if value is None:
        return MISSING
    if value is True:
        return "1"
    if value is False:
        return "0"
    return str(value)


def format_event(event: ClickEvent, schema: SchemaMap) -> str:
    cells = [MISSING] * schema.declared_column_count
    idx = schema.column_index_by_name
    for name in REQUIRED_COLUMNS:
        cells[idx[name]] = _format(getattr(event, name))
    if schema.has_category:
        cells[idx["content_category"]] = _format(event.content_category)
    for name, value in event.extras:
        if name in idx:
            cells[idx[name]] = _format(value)
    return "\t".join(cells)


def write_dump(events: Iterable[ClickEvent], schema: SchemaMap, stream: TextIO) -> int:
    stream.write("\t".join(schema.header) + "\n")
    count = 0
    for ev in events:
        stream.write(format_event(ev, schema) + "\n")
        count += 1
    return count


def filter_crawlers(events: Iterable[ClickEvent]) -> list[ClickEvent]:
    return [ev for ev in events if not ev.exclude_hit]


@dataclass(frozen=True)
class PruneReport:
    constant_columns: list = field(default_factory=list)
    redundant_groups: list = field(default_factory=list)
    kept_columns: list = field(default_factory=list)

    @property
    def redundant_dropped(self) -> int:
        return sum(len(g) - 1 for g in self.redundant_groups)

    def to_json(self) -> str:
        return json.dumps(
            {
                "constant_columns": self.constant_columns,
                "redundant_groups": self.redundant_groups,
                "kept_columns": self.kept_columns,
            },
            indent=2,
        )


def _value_key(col: Column):
    if col.kind == "numeric":
        vals = np.where(np.isnan(col.values), np.nan, col.values)
        return ("numeric", vals.tobytes())
    return ("nominal", tuple(col.values))


def prune_columns(table: FeatureTable) -> tuple[FeatureTable, PruneReport]:
    """Drop constant columns and keep one column per set of identical columns.

    Missing counts as a value, so an all-missing column is constant. Within
    a redundant group the lexicographically first name survives.
    """
    if table.row_count == 0:
        raise EmptyTable("cannot prune an empty table")
    constant = []
    groups: dict = {}
    for col in table.columns:
        key = _value_key(col)
        distinct = len(set(key[1])) if col.kind == "nominal" else len(
            np.unique(col.values[~np.isnan(col.values)])
        ) + int(np.isnan(col.values).any())
        if distinct <= 1:
            constant.append(col.name)
            continue
        groups.setdefault(key, []).append(col.name)
    redundant = sorted(sorted(names) for names in groups.values() if len(names) > 1)
    dropped = set(constant)
    for names in redundant:
        dropped.update(names[1:])
    kept = [n for n in table.names if n not in dropped]
    return table.select(kept), PruneReport(constant, redundant, kept)


def events_table(events: Sequence[ClickEvent], schema: SchemaMap) -> FeatureTable:
    """All dump columns of ``events`` as nominal string columns (for pruning)."""
    cols = []
    for name in schema.header:
        if name in _FIELD_TYPES:
            raw = [getattr(ev, name) for ev in events]
        else:
            raw = [ev.extra(name) for ev in events]
        cols.append(Column.nominal(name, [None if v is None else _format(v) for v in raw]))
    return FeatureTable.build(cols, ["-"] * len(events), ["-"])


def iter_dump_files(paths: Iterable) -> Iterator:
    from pathlib import Path

    for p in paths:
        p = Path(p)
        if p.is_dir():
            yield from sorted(p.glob("*.tsv"))
        else:
            yield p

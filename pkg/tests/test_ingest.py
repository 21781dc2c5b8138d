import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clickexit.ingest import (
    CANONICAL_FIELDS,
    REQUIRED_COLUMNS,
    DuplicateColumn,
    MissingColumn,
    SchemaError,
    canonical_schema,
    events_table,
    filter_crawlers,
    format_event,
    parse_dump,
    parse_line,
    prune_columns,
    read_dump,
    resolve_user_key,
    validate_header,
    write_dump,
)
from clickexit.table import Column, EmptyTable, FeatureTable

from conftest import make_event

HEADER = "\t".join(REQUIRED_COLUMNS)


def line_for(ev, schema=None):
    return format_event(ev, schema or canonical_schema())


def test_validate_header_full_mapping():
    sm = validate_header(HEADER + "\n")
    assert sm.declared_column_count == len(REQUIRED_COLUMNS) == 30
    assert all(sm.column_index_by_name[n] == i for i, n in enumerate(REQUIRED_COLUMNS))
    assert sm.extras == ()


def test_validate_header_missing_player_id():
    names = [n for n in REQUIRED_COLUMNS if n != "player_id"]
    with pytest.raises(MissingColumn) as exc:
        validate_header("\t".join(names))
    assert exc.value.name == "player_id"


def test_validate_header_duplicate():
    with pytest.raises(DuplicateColumn):
        validate_header(HEADER + "\tip")


def test_validate_header_161_columns():
    # every canonical column plus extras up to 161 in total
    extras = [f"col_{i:03d}" for i in range(161 - len(REQUIRED_COLUMNS))]
    sm = validate_header("\t".join(list(REQUIRED_COLUMNS) + extras))
    assert sm.declared_column_count == 161
    assert sm.extras == tuple(extras)


def test_parse_marker_75():
    ev = make_event(player_id="p1", progress_marker=75)
    parsed = parse_line(line_for(ev), canonical_schema())
    assert parsed.progress_marker == 75


def test_parse_marker_60_rejected():
    schema = canonical_schema()
    cells = line_for(make_event(player_id="p1", progress_marker=0)).split("\t")
    cells[schema.column_index_by_name["progress_marker"]] = "60"
    events, rejects = parse_dump(["\t".join(cells)], schema)
    assert events == []
    assert rejects[0].reason == "marker outside {0,25,50,75,100}"
    assert rejects[0].line_number == 2


def test_parse_empty_stream():
    assert parse_dump([], canonical_schema()) == ([], [])


@pytest.mark.parametrize(
    "column,value,reason",
    [
        ("timestamp", "yesterday", "malformed timestamp"),
        ("timestamp", "0", "timestamp must be positive"),
        ("cookies_enabled", "maybe", "malformed boolean"),
        ("frequency_of_visits", "fortnightly", "unknown frequency_of_visits"),
        ("visit_number", "0", "visit_number must be >= 1"),
        ("ip", "\\N", "missing required value"),
    ],
)
def test_bad_fields_become_rejects(column, value, reason):
    schema = canonical_schema()
    cells = line_for(make_event()).split("\t")
    cells[schema.column_index_by_name[column]] = value
    events, rejects = parse_dump(["\t".join(cells)], schema)
    assert not events and reason in rejects[0].reason


def test_field_count_and_marker_pairing():
    schema = canonical_schema()
    good = line_for(make_event())
    lonely = line_for(make_event(player_id="p9", progress_marker=None).__class__(
        **{**{f: getattr(make_event(), f) for f in make_event().__slots__}, "player_id": "p9"}
    ))
    events, rejects = parse_dump([good, good + "\textra", lonely], schema)
    assert len(events) == 1
    assert "field-count mismatch" in rejects[0].reason
    assert "together" in rejects[1].reason
    assert [r.line_number for r in rejects] == [3, 4]


def test_first_hit_time_after_timestamp_rejected():
    schema = canonical_schema()
    ev = make_event(first_hit_time=make_event().timestamp + 5)
    _, rejects = parse_dump([line_for(ev)], schema)
    assert "first_hit_time" in rejects[0].reason


def test_user_key_resolution():
    assert resolve_user_key("abc", "1.2.3.4", True) == "c:abc"
    assert resolve_user_key("abc", "1.2.3.4", False) == "ip:1.2.3.4"
    assert resolve_user_key(None, "1.2.3.4", True) == "ip:1.2.3.4"


def test_read_dump_and_roundtrip_with_extras():
    schema = canonical_schema(["foo", "bar"], with_category=True)
    evs = [
        make_event(extras=(("foo", "1"), ("bar", None)), content_category="Tech"),
        make_event(timestamp=make_event().timestamp + 10, player_id="p", progress_marker=25,
                   extras=(("foo", "2"), ("bar", "z"))),
    ]
    buf = io.StringIO()
    write_dump(evs, schema, buf)
    buf.seek(0)
    sm, parsed, rejects = read_dump(buf)
    assert rejects == [] and parsed == evs
    assert sm.extras == ("foo", "bar") and sm.has_category


def test_read_dump_empty_file():
    with pytest.raises(SchemaError):
        read_dump(io.StringIO(""))


_text = st.text(alphabet="abcxyz/:. -_0123", min_size=1, max_size=8)


@settings(max_examples=150, deadline=None)
@given(
    visitor=st.one_of(st.none(), _text),
    cookies=st.booleans(),
    ts=st.integers(1, 2**40),
    marker=st.one_of(st.none(), st.sampled_from([0, 25, 50, 75, 100])),
    city=st.one_of(st.none(), _text),
    spn=st.one_of(st.none(), st.integers(1, 50)),
    freq=st.sampled_from(["hourly", "daily", "weekly", "monthly", "yearly"]),
)
def test_roundtrip_property(visitor, cookies, ts, marker, city, spn, freq):
    ev = make_event(
        visitor_id=visitor, cookies_enabled=cookies, timestamp=ts, city=city,
        player_id=None if marker is None else "pl", progress_marker=marker,
        search_page_num=spn, frequency_of_visits=freq, first_hit_time=ts,
    )
    schema = canonical_schema()
    assert parse_line(format_event(ev, schema), schema) == ev


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["good", "bad_marker", "short", "bad_ts"]), max_size=30))
def test_events_plus_rejects_equals_lines(kinds):
    schema = canonical_schema()
    good = line_for(make_event())
    idx = schema.column_index_by_name
    lines = []
    for k in kinds:
        cells = good.split("\t")
        if k == "bad_marker":
            cells[idx["player_id"]] = "p"
            cells[idx["progress_marker"]] = "33"
        elif k == "short":
            cells = cells[:-1]
        elif k == "bad_ts":
            cells[idx["timestamp"]] = "x"
        lines.append("\t".join(cells))
    events, rejects = parse_dump(lines, schema)
    assert len(events) + len(rejects) == len(lines)
    assert len(events) == kinds.count("good")


def test_filter_crawlers():
    evs = [make_event(timestamp=make_event().timestamp + i, exclude_hit=i in (1, 4, 7)) for i in range(10)]
    kept = filter_crawlers(evs)
    assert len(kept) == 7 and not any(e.exclude_hit for e in kept)
    assert kept == [e for e in evs if not e.exclude_hit]
    assert filter_crawlers([make_event(exclude_hit=True)]) == []
    clean = [make_event(timestamp=make_event().timestamp + i) for i in range(3)]
    assert filter_crawlers(clean) == clean


def _table(cols: dict) -> FeatureTable:
    n = len(next(iter(cols.values())))
    return FeatureTable.build([Column.nominal(k, v) for k, v in cols.items()], ["-"] * n, ["-"])


def test_prune_constant_column():
    t = _table({"const": ["c"] * 1000, "var": [str(i % 3) for i in range(1000)]})
    pruned, rep = prune_columns(t)
    assert rep.constant_columns == ["const"] and pruned.names == ["var"]


def test_prune_redundant_pair_keeps_first_name():
    vals = [str(i % 4) for i in range(50)]
    t = _table({"b_copy": vals, "a_orig": vals, "other": [str(i % 5) for i in range(50)]})
    pruned, rep = prune_columns(t)
    assert rep.redundant_groups == [["a_orig", "b_copy"]]
    assert pruned.names == ["a_orig", "other"]
    assert set(rep.kept_columns).isdisjoint(rep.constant_columns)


def test_prune_counts_32_constant_40_redundant():
    cols = {}
    for i in range(10):
        cols[f"base_{i}"] = [str((j * (i + 2)) % (i + 3)) + str(j % 7) for j in range(60)]
    for i in range(32):
        cols[f"const_{i:02d}"] = ["k"] * 60
    for i in range(40):
        cols[f"zdup_{i:02d}"] = cols[f"base_{i % 10}"]
    _, rep = prune_columns(_table(cols))
    assert len(rep.constant_columns) == 32
    assert rep.redundant_dropped == 40


def test_prune_idempotent_and_empty():
    vals = [str(i % 4) for i in range(20)]
    t = _table({"a": vals, "b": vals, "c": ["x"] * 20, "d": [str(i % 3) for i in range(20)]})
    once, _ = prune_columns(t)
    twice, rep2 = prune_columns(once)
    assert twice.names == once.names and rep2.constant_columns == [] and rep2.redundant_groups == []
    with pytest.raises(EmptyTable):
        prune_columns(_table({"a": []}))


def test_events_table_covers_header():
    schema = canonical_schema(["foo"])
    t = events_table([make_event(extras=(("foo", "v"),))], schema)
    assert t.names == list(schema.header)
    assert len(CANONICAL_FIELDS) == 30

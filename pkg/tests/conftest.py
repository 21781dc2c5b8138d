import numpy as np
import pytest

from clickexit.ingest import ClickEvent, resolve_user_key
from clickexit.table import Column, FeatureTable

BASE = 1_356_998_400


def make_event(**kw) -> ClickEvent:
    """A valid click with sensible defaults; keyword overrides win."""
    d = dict(
        visitor_id="v1",
        ip="10.0.0.1",
        timestamp=BASE,
        channel="web",
        section="news",
        subsection="news/sub0",
        page_url="/news/1",
        story_title="News: Story 1",
        referrer_url="-",
        referrer_type="direct",
        first_hit_page="/news/1",
        first_hit_referrer="(none)",
        first_hit_time=None,
        last_visit=None,
        last_click=None,
        browser="chrome",
        city="city00",
        region="region0",
        country="US",
        isp_domain="isp00.net",
        search_keywords=None,
        search_engine=None,
        search_page_num=None,
        cookies_enabled=True,
        exclude_hit=False,
        new_visit=True,
        visit_number=1,
        frequency_of_visits="daily",
        player_id=None,
        progress_marker=None,
        content_category=None,
        extras=(),
    )
    d.update(kw)
    d["user_key"] = kw.get("user_key", resolve_user_key(d["visitor_id"], d["ip"], d["cookies_enabled"]))
    return ClickEvent(**d)


@pytest.fixture
def event():
    return make_event


def nominal_table(columns: dict, classes, labels=None) -> FeatureTable:
    cols = [Column.nominal(k, v) for k, v in columns.items()]
    return FeatureTable.build(cols, list(classes), labels)


@pytest.fixture
def planted_binary():
    """400 rows: ``key`` decides the class with 10% flips; two noise columns."""
    rng = np.random.default_rng(7)
    n = 400
    key = rng.choice(["a", "b", "c", "d"], n)
    flip = rng.random(n) < 0.1
    y = np.where(np.isin(key, ["a", "b"]) ^ flip, "early", "late")
    cols = [
        Column.nominal("key", key),
        Column.nominal("noise1", rng.choice(["x", "y", "z"], n)),
        Column.numeric("noise2", rng.normal(size=n)),
    ]
    return FeatureTable.build(cols, list(y), ["early", "late"])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

"""Video-view reconstruction, exit labels and drop-off curves."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from itertools import groupby
from typing import Iterable, Sequence

from .ingest import MARKERS, ClickEvent
from .sessionizer import Session
from .table import NOMINAL, NUMERIC, FeatureTable, table_from_records

EXIT_CLASSES = ("E0", "E25", "E50", "E75", "E100")
BINARY_CLASSES = ("early", "late")
UNCATEGORIZED = "Uncategorized"

PREDICTORS: tuple[tuple[str, str], ...] = (
    ("time_of_day", NOMINAL),
    ("ip", NOMINAL),
    ("first_hit_referrer", NOMINAL),
    ("first_hit_page", NOMINAL),
    ("story_title", NOMINAL),
    ("search_engine", NOMINAL),
    ("city", NOMINAL),
    ("isp", NOMINAL),
    ("referrer_type", NOMINAL),
    ("pages_viewed", NUMERIC),
    ("search_page_num", NUMERIC),
    ("frequency_of_visits", NOMINAL),
)
PREDICTOR_NAMES = tuple(name for name, _ in PREDICTORS)


class EmptyInput(ValueError):
    pass


class MarkerRegression(UserWarning):
    """A player's progress markers went backwards in time."""


class UnknownLabel(ValueError):
    pass


@dataclass(frozen=True)
class VideoViewInstance:
    user_key: str
    player_id: str
    content_category: str
    start_time: int
    features: dict
    exit_class5: str
    extras: tuple = ()

    @property
    def early_exit(self) -> bool:
        return to_binary(self.exit_class5)


def exit_class(marker: int) -> str:
    if marker not in MARKERS:
        raise UnknownLabel(f"marker {marker!r} is not one of {MARKERS}")
    return f"E{marker}"


def to_binary(class5: str) -> bool:
    """True for an early exit (left before the 50% marker)."""
    if class5 in ("E0", "E25"):
        return True
    if class5 in ("E50", "E75", "E100"):
        return False
    raise UnknownLabel(f"unknown exit class {class5!r}")


def binary_label(class5: str) -> str:
    return BINARY_CLASSES[0] if to_binary(class5) else BINARY_CLASSES[1]


def category_of(event: ClickEvent) -> str:
    """Dedicated category column if present, else the story title's prefix."""
    if event.content_category:
        return event.content_category
    head, sep, _ = event.story_title.partition(": ")
    return head if sep and head else UNCATEGORIZED


def hour_of_day(timestamp: int) -> str:
    return f"{datetime.fromtimestamp(timestamp, tz=timezone.utc).hour:02d}"


def view_features(session: Session, first_video_index: int) -> dict:
    """The twelve predictors, from the session up to the view's first click."""
    ev = session.clicks[first_video_index]
    return {
        "time_of_day": hour_of_day(ev.timestamp),
        "ip": ev.ip,
        "first_hit_referrer": ev.first_hit_referrer,
        "first_hit_page": ev.first_hit_page,
        "story_title": ev.story_title,
        "search_engine": ev.search_engine,
        "city": ev.city,
        "isp": ev.isp_domain,
        "referrer_type": session.entry_referrer_type,
        "pages_viewed": first_video_index + 1,
        "search_page_num": ev.search_page_num,
        "frequency_of_visits": ev.frequency_of_visits,
    }


def _regresses(trail: list[tuple[int, int]]) -> bool:
    # a marker below one logged at a strictly earlier time
    earlier_max = -1
    for _, group in groupby(sorted(trail), key=lambda tm: tm[0]):
        markers = [m for _, m in group]
        if min(markers) < earlier_max:
            return True
        earlier_max = max(earlier_max, max(markers))
    return False


def extract_video_views(sessions: Iterable[Session]) -> list[VideoViewInstance]:
    """One exit instance per (session, player_id).

    The exit class is the highest marker seen for the player in the session;
    a smaller marker logged strictly later raises a MarkerRegression warning.
    """
    views = []
    for session in sessions:
        first_index: dict[str, int] = {}
        trail: dict[str, list[tuple[int, int]]] = {}
        for i, ev in enumerate(session.clicks):
            pid = ev.player_id
            if pid is None:
                continue
            first_index.setdefault(pid, i)
            trail.setdefault(pid, []).append((ev.timestamp, ev.progress_marker))
        for pid in sorted(p for p, t in trail.items() if _regresses(t)):
            warnings.warn(
                f"markers regress for player {pid} of {session.user_key}; using the maximum",
                MarkerRegression,
                stacklevel=2,
            )
        best = {pid: max(m for _, m in t) for pid, t in trail.items()}
        for pid, i in first_index.items():
            ev = session.clicks[i]
            views.append(
                VideoViewInstance(
                    user_key=session.user_key,
                    player_id=pid,
                    content_category=category_of(ev),
                    start_time=ev.timestamp,
                    features=view_features(session, i),
                    exit_class5=exit_class(best[pid]),
                    extras=ev.extras,
                )
            )
    views.sort(key=lambda v: (v.user_key, v.start_time, v.player_id))
    return views


@dataclass(frozen=True)
class DropoffCurve:
    category: str
    fractions: tuple
    view_count: int
    counts: tuple = ()


def _curve(category: str, classes: Sequence[str]) -> DropoffCurve:
    n = len(classes)
    reached = [0] * len(MARKERS)
    for c in classes:
        level = EXIT_CLASSES.index(c)
        for k in range(level + 1):
            reached[k] += 1
    fractions = [1.0] + [reached[k] / n for k in range(1, len(MARKERS))]
    return DropoffCurve(category, tuple(fractions), n, tuple(reached))


def dropoff_curve(views: Sequence[VideoViewInstance], group_by_category: bool = True) -> list[DropoffCurve]:
    """Share of views reaching each marker, per category (or pooled as "all")."""
    if not group_by_category:
        return [_curve("all", [v.exit_class5 for v in views])] if views else []
    groups: dict[str, list[str]] = {}
    for v in views:
        groups.setdefault(v.content_category, []).append(v.exit_class5)
    return [_curve(cat, groups[cat]) for cat in sorted(groups)]


def dropoff_csv(curves: Iterable[DropoffCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["category", "marker", "fraction", "count"])
    for c in curves:
        for marker, frac, count in zip(MARKERS, c.fractions, c.counts):
            w.writerow([c.category, marker, f"{frac:.6f}", count])
    return buf.getvalue()


def build_feature_table(views: Sequence[VideoViewInstance], include_extras: bool = False) -> FeatureTable:
    """One row per view: the twelve predictors (plus raw extra columns), class = exit_class5."""
    if not views:
        raise EmptyInput("no video views")
    schema = list(PREDICTORS)
    records = [dict(v.features) for v in views]
    if include_extras:
        names = [name for name, _ in views[0].extras]
        schema += [(name, NOMINAL) for name in names]
        for rec, v in zip(records, views):
            rec.update(v.extras)
    return table_from_records(records, schema, [v.exit_class5 for v in views], EXIT_CLASSES)


def merge_task(table: FeatureTable) -> FeatureTable:
    """Relabel a five-class exit table as early/late; features untouched."""
    bad = set(table.class_values) - set(EXIT_CLASSES)
    if bad:
        raise UnknownLabel(f"labels outside the exit classes: {sorted(bad)}")
    return table.with_class([binary_label(c) for c in table.class_values], BINARY_CLASSES)

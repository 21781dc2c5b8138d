"""Sessionization with an inactivity timeout, session paths and section graphs."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .ingest import ClickEvent

DEFAULT_TIMEOUT = 30 * 60


@dataclass(frozen=True)
class Session:
    user_key: str
    clicks: tuple

    @property
    def start_time(self) -> int:
        return self.clicks[0].timestamp

    @property
    def end_time(self) -> int:
        return self.clicks[-1].timestamp

    @property
    def entry_referrer_type(self) -> str:
        return self.clicks[0].referrer_type

    @property
    def pages_viewed(self) -> int:
        return len(self.clicks)

    def to_record(self) -> dict:
        return {
            "user_key": self.user_key,
            "start_time": self.start_time,
            "end_time": self.end_time,
            "clicks": self.pages_viewed,
            "path": [[s, k] for s, k in session_path(self)],
        }


def sessionize(events: Sequence[ClickEvent], timeout_seconds: int = DEFAULT_TIMEOUT) -> list[Session]:
    """Split each user's clicks wherever the gap strictly exceeds the timeout.

    Clicks with equal timestamps keep their input order. Sessions come back
    sorted by (user_key, start_time).
    """
    if timeout_seconds <= 0:
        raise ValueError("timeout_seconds must be positive")
    n = len(events)
    if n == 0:
        return []
    key_codes: dict[str, int] = {}
    keys = np.fromiter(
        (key_codes.setdefault(ev.user_key, len(key_codes)) for ev in events),
        dtype=np.int64,
        count=n,
    )
    times = np.fromiter((ev.timestamp for ev in events), dtype=np.int64, count=n)
    # rank keys lexicographically so output order does not depend on input order
    names = sorted(key_codes)
    rank = np.empty(len(names), dtype=np.int64)
    for r, name in enumerate(names):
        rank[key_codes[name]] = r
    keys = rank[keys]
    order = np.lexsort((np.arange(n), times, keys))
    k_sorted = keys[order]
    t_sorted = times[order]
    starts = np.flatnonzero(_kernels.session_breaks(k_sorted, t_sorted, int(timeout_seconds)))
    bounds = np.append(starts, n)
    sessions = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        clicks = tuple(events[i] for i in order[a:b])
        sessions.append(Session(clicks[0].user_key, clicks))
    return sessions


def session_path(session: Session) -> list[tuple[str, int]]:
    """Section sequence with consecutive repeats collapsed to counts."""
    path: list[tuple[str, int]] = []
    for ev in session.clicks:
        if path and path[-1][0] == ev.section:
            path[-1] = (ev.section, path[-1][1] + 1)
        else:
            path.append((ev.section, 1))
    return path


@dataclass(frozen=True)
class SectionGraph:
    nodes: dict
    edges: dict

    def edges_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["from", "to", "count"])
        for (a, b), c in sorted(self.edges.items()):
            w.writerow([a, b, c])
        return buf.getvalue()

    def nodes_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "visits"])
        for s, c in sorted(self.nodes.items()):
            w.writerow([s, c])
        return buf.getvalue()


def top_sections(sessions: Iterable[Session], top_k: int) -> list[str]:
    volume = Counter(ev.section for s in sessions for ev in s.clicks)
    ranked = sorted(volume.items(), key=lambda kv: (-kv[1], kv[0]))
    return [name for name, _ in ranked[:top_k]]


def section_graph(sessions: Sequence[Session], top_k: int = 12) -> SectionGraph:
    """Click volume per kept section and counts of consecutive same-session moves.

    A move a->b is counted between consecutive clicks whose sections differ
    and are both among the ``top_k`` busiest sections (ties by name).
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    kept = set(top_sections(sessions, top_k))
    nodes: Counter = Counter()
    edges: Counter = Counter()
    for s in sessions:
        for ev in s.clicks:
            if ev.section in kept:
                nodes[ev.section] += 1
        for a, b in zip(s.clicks, s.clicks[1:]):
            if a.section != b.section and a.section in kept and b.section in kept:
                edges[(a.section, b.section)] += 1
    return SectionGraph(dict(nodes), dict(edges))


def sessions_jsonl(sessions: Iterable[Session]) -> str:
    return "".join(json.dumps(s.to_record()) + "\n" for s in sessions)

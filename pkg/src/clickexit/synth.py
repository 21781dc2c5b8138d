"""Seeded synthetic click dumps with planted feature-to-exit dependencies.

Each user has persistent attributes (ip, city, isp, browser, visit
frequency). Sessions walk a section chain; some sessions contain one video
view whose exit marker is drawn from its category's survival profile. The
per-marker drop hazard has its odds multiplied by ``m ** sum(d)``, where
``m = 1 + 9 * signal_strength`` and ``d = +1/-1`` is the direction each
planted predictor's value pushes towards leaving.
"""

from __future__ import annotations

import hashlib
import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import FREQUENCIES, ClickEvent, SchemaMap, canonical_schema, resolve_user_key, write_dump
from .sessionizer import Session
from .video_labeler import EXIT_CLASSES, PREDICTOR_NAMES, view_features

EPOCH0 = 1356998400  # 2013-01-01T00:00:00Z
DAY = 86400
WINDOW_START = 30 * 60
WINDOW_END = 23 * 3600
SESSION_SEPARATION = 45 * 60
MAX_GAP = 25 * 60
MARKER_LEVELS = (0, 25, 50, 75, 100)
MANIFEST_FORMAT = "clickexit-synth/1"

DEFAULT_SECTIONS = (
    "news", "sports", "business", "technology", "entertainment", "politics",
    "health", "travel", "science", "opinion", "local", "world",
)
DEFAULT_CATEGORIES = (
    ("Technology", (1.0, 0.92, 0.85, 0.78, 0.70)),
    ("News", (1.0, 0.80, 0.62, 0.48, 0.36)),
    ("Sports", (1.0, 0.85, 0.70, 0.56, 0.45)),
    ("Business", (1.0, 0.80, 0.64, 0.50, 0.40)),
    ("Entertainment", (1.0, 0.60, 0.40, 0.25, 0.15)),
)
DEFAULT_REFERRERS = {"direct": 0.30, "search": 0.30, "social": 0.20, "email": 0.10, "partner": 0.10}
DEFAULT_PLANTED = ("referrer_type", "first_hit_referrer", "time_of_day")

REFERRER_DOMAINS = {
    "direct": ("(none)",),
    "search": ("google.com", "bing.com", "yahoo.com", "ask.com"),
    "social": ("facebook.com", "twitter.com", "reddit.com"),
    "email": ("mail.newsletter.example",),
    "partner": ("partner-a.example", "partner-b.example", "partner-c.example", "aggregator.example"),
}
SEARCH_ENGINES = REFERRER_DOMAINS["search"]
CITIES = tuple(f"city{i:02d}" for i in range(40))
ISPS = tuple(f"isp{i:02d}.net" for i in range(15))
BROWSERS = ("chrome", "firefox", "safari", "ie", "opera", "mobile")
FREQ_WEIGHTS = (0.05, 0.35, 0.35, 0.15, 0.10)
PAGES_PER_SECTION = 20
TITLES_PER_CATEGORY = 40
MAX_SEARCH_PAGE = 5


class InvalidConfig(ValueError):
    pass


def _zipf(n: int, s: float = 1.0) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


@dataclass
class SynthConfig:
    n_users: int = 5000
    n_days: int = 7
    sections: list = field(default_factory=lambda: list(DEFAULT_SECTIONS))
    categories: list = field(default_factory=lambda: [[n, list(p)] for n, p in DEFAULT_CATEGORIES])
    referrer_mix: dict = field(default_factory=lambda: dict(DEFAULT_REFERRERS))
    signal_strength: float = 0.8
    planted_columns: list = field(default_factory=lambda: list(DEFAULT_PLANTED))
    noise_columns: int = 0
    constant_columns: int = 0
    redundant_columns: int = 0
    unique_key_column: bool = False
    sessions_per_user_day: float = 1.07
    mean_session_clicks: float = 4.0
    cookie_rate: float = 0.85
    n_views: int | None = None
    video_rate: float = 0.25
    seed: int = 1

    def validate(self) -> "SynthConfig":
        def bad(name, msg):
            raise InvalidConfig(f"{name}: {msg}")

        if self.n_users < 1:
            bad("n_users", "must be >= 1")
        if self.n_days < 1:
            bad("n_days", "must be >= 1")
        if not self.sections:
            bad("sections", "must be nonempty")
        if len(set(self.sections)) != len(self.sections):
            bad("sections", "duplicate section names")
        if not self.categories:
            bad("categories", "must be nonempty")
        for name, profile in self.categories:
            if not name or ":" in name:
                bad("categories", f"invalid category name {name!r}")
            if len(profile) != 5:
                bad(f"categories[{name}].dropoff_profile", "needs 5 survival probabilities")
            if abs(profile[0] - 1.0) > 1e-12:
                bad(f"categories[{name}].dropoff_profile", "must start at 1.0")
            if any(b > a + 1e-12 for a, b in zip(profile, profile[1:])):
                bad(f"categories[{name}].dropoff_profile", "survival must be non-increasing")
            if any(not 0 <= p <= 1 for p in profile):
                bad(f"categories[{name}].dropoff_profile", "probabilities must lie in [0, 1]")
        unknown = set(self.referrer_mix) - set(REFERRER_DOMAINS)
        if unknown:
            bad("referrer_mix", f"unknown referrer types {sorted(unknown)}")
        if any(v < 0 for v in self.referrer_mix.values()):
            bad("referrer_mix", "weights must be non-negative")
        if abs(sum(self.referrer_mix.values()) - 1.0) > 1e-9:
            bad("referrer_mix", "must sum to 1")
        if not 0 <= self.signal_strength <= 1:
            bad("signal_strength", "must be in [0, 1]")
        extra = set(self.planted_columns) - set(PREDICTOR_NAMES)
        if extra:
            bad("planted_columns", f"not predictor columns: {sorted(extra)}")
        for name in ("noise_columns", "constant_columns", "redundant_columns"):
            if getattr(self, name) < 0:
                bad(name, "must be >= 0")
        if self.redundant_columns and not self.noise_columns:
            bad("redundant_columns", "copies noise columns, so noise_columns must be > 0")
        if self.sessions_per_user_day <= 0:
            bad("sessions_per_user_day", "must be positive")
        if self.mean_session_clicks < 1:
            bad("mean_session_clicks", "must be >= 1")
        if not 0 <= self.cookie_rate <= 1:
            bad("cookie_rate", "must be in [0, 1]")
        if self.n_views is not None and self.n_views < 0:
            bad("n_views", "must be >= 0")
        if not 0 <= self.video_rate <= 1:
            bad("video_rate", "must be in [0, 1]")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.categories = [[n, list(p)] for n, p in cfg.categories]
        return cfg.validate()

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        try:
            return cls.from_dict(json.loads(text))
        except (TypeError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"config: {exc}") from None

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def extra_column_names(config: SynthConfig) -> list[str]:
    names = [f"noise_{i:03d}" for i in range(config.noise_columns)]
    names += [f"const_{i:03d}" for i in range(config.constant_columns)]
    names += [f"zdup_{i:03d}" for i in range(config.redundant_columns)]
    if config.unique_key_column:
        names.append("hit_id")
    return names


def _balanced_directions(probabilities: dict) -> dict:
    """Assign +1/-1 per value, greedily evening out the probability mass."""
    plus = minus = 0.0
    out = {}
    for value, p in sorted(probabilities.items(), key=lambda kv: (-kv[1], str(kv[0]))):
        if plus <= minus:
            out[value] = 1
            plus += p
        else:
            out[value] = -1
            minus += p
    return out


class _World:
    """Vocabularies, their generating probabilities and planted directions."""

    def __init__(self, config: SynthConfig):
        self.config = config
        self.sections = list(config.sections)
        self.categories = [name for name, _ in config.categories]
        self.profiles = {name: list(p) for name, p in config.categories}
        self.ref_types = sorted(config.referrer_mix)
        self.ref_probs = np.array([config.referrer_mix[t] for t in self.ref_types])
        self.page_weights = _zipf(PAGES_PER_SECTION)
        self.title_weights = _zipf(TITLES_PER_CATEGORY)
        self.city_weights = _zipf(len(CITIES), 0.8)
        self.isp_weights = _zipf(len(ISPS), 0.8)
        self.search_page_weights = _zipf(MAX_SEARCH_PAGE, 1.5)
        self.m = 1.0 + 9.0 * config.signal_strength
        self.planted = [c for c in PREDICTOR_NAMES if c in set(config.planted_columns)]
        self.directions = self._directions()

    def _directions(self) -> dict:
        p_search = self.config.referrer_mix.get("search", 0.0)
        probs: dict[str, dict] = {}
        probs["time_of_day"] = {f"{h:02d}": 1.0 for h in range(24)}
        probs["referrer_type"] = dict(self.config.referrer_mix)
        probs["first_hit_referrer"] = {
            dom: self.config.referrer_mix.get(t, 0.0) / len(doms)
            for t, doms in REFERRER_DOMAINS.items()
            for dom in doms
        }
        probs["search_engine"] = {None: 1 - p_search, **{e: p_search / len(SEARCH_ENGINES) for e in SEARCH_ENGINES}}
        probs["search_page_num"] = {
            None: 1 - p_search,
            **{k + 1: p_search * w for k, w in enumerate(self.search_page_weights)},
        }
        probs["city"] = dict(zip(CITIES, self.city_weights))
        probs["isp"] = dict(zip(ISPS, self.isp_weights))
        probs["frequency_of_visits"] = dict(zip(FREQUENCIES, FREQ_WEIGHTS))
        probs["first_hit_page"] = {
            self.page_url(s, k): w / len(self.sections)
            for s in self.sections
            for k, w in enumerate(self.page_weights)
        }
        probs["story_title"] = {
            self.video_title(c, k): w / len(self.categories)
            for c in self.categories
            for k, w in enumerate(self.title_weights)
        }
        return {name: _balanced_directions(p) for name, p in probs.items()}

    @staticmethod
    def page_url(section: str, k: int) -> str:
        return f"/{section}/{k}"

    @staticmethod
    def video_title(category: str, k: int) -> str:
        return f"{category}: Headline {k}"

    def direction(self, name: str, value) -> int:
        if name == "ip":
            return 1 if zlib.crc32(value.encode()) & 1 else -1
        if name == "pages_viewed":
            return 1 if value % 2 else -1
        return self.directions[name].get(value, -1)

    def tilt(self, features: dict) -> int:
        return sum(self.direction(name, features[name]) for name in self.planted)

    def sample_exit(self, category: str, tilt: int, u: np.ndarray) -> int:
        """Marker level reached (0..4) using four uniforms ``u``."""
        s = self.profiles[category]
        factor = self.m ** tilt
        level = 0
        for k in range(1, 5):
            if s[k - 1] <= 0:
                break
            h = 1.0 - s[k] / s[k - 1]
            if h >= 1.0:
                break
            if h > 0.0:
                odds = h / (1.0 - h) * factor
                h = odds / (1.0 + odds) if math.isfinite(odds) else 1.0
            if u[k - 1] < h:
                break
            level = k
        return level


@dataclass
class _User:
    index: int
    visitor_id: str
    ip: str
    cookies: bool
    city: str
    region: str
    isp: str
    browser: str
    channel: str
    frequency: str
    rate: float
    visits: int = 0
    last_visit: int | None = None


def _make_users(config: SynthConfig, world: _World) -> list[_User]:
    rng = np.random.default_rng([config.seed, 0])
    n = config.n_users
    cookies = rng.random(n) < config.cookie_rate
    city = rng.choice(len(CITIES), n, p=world.city_weights)
    isp = rng.choice(len(ISPS), n, p=world.isp_weights)
    browser = rng.integers(0, len(BROWSERS), n)
    channel = rng.random(n) < 0.7
    freq = rng.choice(len(FREQUENCIES), n, p=FREQ_WEIGHTS)
    rate = rng.gamma(2.0, config.sessions_per_user_day / 2.0, n)
    users = []
    for i in range(n):
        users.append(
            _User(
                index=i,
                visitor_id=f"v{i:07d}",
                ip=f"10.{(i >> 16) & 255}.{(i >> 8) & 255}.{i & 255}",
                cookies=bool(cookies[i]),
                city=CITIES[city[i]],
                region=f"region{int(city[i]) % 8}",
                isp=ISPS[isp[i]],
                browser=BROWSERS[browser[i]],
                channel="web" if channel[i] else "mobile",
                frequency=FREQUENCIES[freq[i]],
                rate=float(rate[i]),
            )
        )
    return users


@dataclass
class _PlannedSession:
    user: _User
    gaps: list
    video_at: int = -1
    interval: int = 0
    start: int = 0

    @property
    def length(self) -> int:
        return len(self.gaps) + 1

    @property
    def max_duration(self) -> int:
        return sum(self.gaps) + (4 * self.interval if self.video_at >= 0 else 0)


@dataclass
class SynthOutput:
    schema: SchemaMap
    days: list  # list of lists of ClickEvent, one per day
    views: list  # manifest rows, sorted like extract_video_views
    config: SynthConfig

    @property
    def events(self) -> list[ClickEvent]:
        return [ev for day in self.days for ev in day]

    def manifest(self, files: Sequence[str] = ()) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "config": self.config.to_dict(),
            "planted_columns": [c for c in PREDICTOR_NAMES if c in set(self.config.planted_columns)],
            "extra_columns": extra_column_names(self.config),
            "files": list(files),
            "n_clicks": sum(len(d) for d in self.days),
            "n_views": len(self.views),
            "views": self.views,
        }


def _view_quota(config: SynthConfig, day: int) -> int | None:
    if config.n_views is None:
        return None
    q, r = divmod(config.n_views, config.n_days)
    return q + (1 if day < r else 0)


def _generate_day(config: SynthConfig, world: _World, users: list[_User], day: int, schema: SchemaMap):
    rng = np.random.default_rng([config.seed, 1, day])
    p_len = 1.0 / config.mean_session_clicks
    day0 = EPOCH0 + day * DAY
    window = WINDOW_END - WINDOW_START

    # plan sessions per user
    plans_by_user: list[list[_PlannedSession]] = []
    all_plans: list[_PlannedSession] = []
    counts = rng.poisson([u.rate for u in users])
    for u, c in zip(users, counts):
        plans = []
        for _ in range(min(int(c), 10)):
            length = int(rng.geometric(p_len))
            gaps = np.clip(np.exp(rng.normal(4.0, 1.0, length - 1)), 1, MAX_GAP).astype(int).tolist()
            plans.append(_PlannedSession(u, gaps))
        plans_by_user.append(plans)
        all_plans.extend(plans)

    # choose sessions that carry a video
    quota = _view_quota(config, day)
    if quota is None:
        chosen = np.flatnonzero(rng.random(len(all_plans)) < config.video_rate)
    else:
        if quota > len(all_plans):
            raise InvalidConfig(
                f"n_views: day {day} needs {quota} video sessions but only {len(all_plans)} sessions exist"
            )
        chosen = np.sort(rng.choice(len(all_plans), quota, replace=False))
    for i in chosen:
        p = all_plans[i]
        p.video_at = int(rng.integers(0, p.length))
        p.interval = int(rng.integers(120, 1201)) // 4

    # place sessions inside the day window, separated by >= 45 minutes
    for plans in plans_by_user:
        while plans:
            used = sum(p.max_duration for p in plans) + SESSION_SEPARATION * (len(plans) - 1)
            if used <= window:
                break
            plans.pop()
        if not plans:
            continue
        slack = window - (sum(p.max_duration for p in plans) + SESSION_SEPARATION * (len(plans) - 1))
        offsets = np.sort(rng.integers(0, slack + 1, len(plans)))
        t = day0 + WINDOW_START
        for p, off in zip(plans, offsets):
            p.start = int(t + off)
            t += p.max_duration + SESSION_SEPARATION

    # emit clicks
    events: list[ClickEvent] = []
    views: list[dict] = []
    extras_names = extra_column_names(config)
    hit_counter = [0]
    player_counter = 0
    for plans in plans_by_user:
        for p in plans:
            u = p.user
            ref_type = world.ref_types[int(rng.choice(len(world.ref_types), p=world.ref_probs))]
            doms = REFERRER_DOMAINS[ref_type]
            domain = doms[int(rng.integers(0, len(doms)))]
            is_search = ref_type == "search"
            engine = domain if is_search else None
            search_page = int(rng.choice(MAX_SEARCH_PAGE, p=world.search_page_weights)) + 1 if is_search else None
            keywords = f"kw{int(rng.integers(0, 500))}" if is_search else None
            entry_ref_url = "-" if ref_type == "direct" else f"https://{domain}/r{int(rng.integers(0, 1000))}"
            sec = int(rng.integers(0, len(world.sections)))
            uniforms = rng.random((p.length, 3))
            user_key = resolve_user_key(u.visitor_id if u.cookies else None, u.ip, u.cookies)
            u.visits += 1
            session_clicks: list[ClickEvent] = []
            t = p.start
            first_page = None
            prev_url = entry_ref_url
            last_click = None

            def click(ts, section, page_url, title, referrer_url, referrer_type, player=None, marker=None):
                nonlocal last_click
                extras = _extras(rng, config, extras_names, day, hit_counter)
                ev = ClickEvent(
                    user_key=user_key,
                    visitor_id=u.visitor_id if u.cookies else None,
                    ip=u.ip,
                    timestamp=ts,
                    channel=u.channel,
                    section=section,
                    subsection=f"{section}/sub{int(page_url.rsplit('/', 1)[1]) % 3}",
                    page_url=page_url,
                    story_title=title,
                    referrer_url=referrer_url,
                    referrer_type=referrer_type,
                    first_hit_page=first_page,
                    first_hit_referrer=domain,
                    first_hit_time=p.start,
                    last_visit=u.last_visit,
                    last_click=last_click,
                    browser=u.browser,
                    city=u.city,
                    region=u.region,
                    country="US",
                    isp_domain=u.isp,
                    search_keywords=keywords,
                    search_engine=engine,
                    search_page_num=search_page,
                    cookies_enabled=u.cookies,
                    exclude_hit=False,
                    new_visit=not session_clicks,
                    visit_number=u.visits,
                    frequency_of_visits=u.frequency,
                    player_id=player,
                    progress_marker=marker,
                    extras=extras,
                )
                last_click = ts
                session_clicks.append(ev)
                return ev

            for j in range(p.length):
                if j > 0:
                    t += p.gaps[j - 1]
                    if uniforms[j, 0] >= 0.5:
                        sec = int(uniforms[j, 1] * len(world.sections)) % len(world.sections)
                section = world.sections[sec]
                k = int(np.searchsorted(np.cumsum(world.page_weights), uniforms[j, 2], side="right"))
                k = min(k, PAGES_PER_SECTION - 1)
                url = world.page_url(section, k)
                if first_page is None:
                    first_page = url
                rtype = ref_type if j == 0 else "internal"
                rurl = entry_ref_url if j == 0 else prev_url
                if j == p.video_at:
                    category = world.categories[int(rng.integers(0, len(world.categories)))]
                    tk = int(rng.choice(TITLES_PER_CATEGORY, p=world.title_weights))
                    title = world.video_title(category, tk)
                    player = f"pl{day:03d}{player_counter:07d}"
                    player_counter += 1
                    click(t, section, url, title, rurl, rtype, player, 0)
                    feats = view_features(Session(user_key, tuple(session_clicks)), j)
                    level = world.sample_exit(category, world.tilt(feats), rng.random(4))
                    video_start = t
                    for lv in range(1, level + 1):
                        click(t + lv * p.interval, section, url, title, url, "internal", player, MARKER_LEVELS[lv])
                    t += level * p.interval
                    views.append(
                        {
                            "user_key": user_key,
                            "player_id": player,
                            "start_time": video_start,
                            "category": category,
                            "exit_class5": EXIT_CLASSES[level],
                        }
                    )
                else:
                    title = f"{section.capitalize()}: Story {k}"
                    click(t, section, url, title, rurl, rtype)
                prev_url = url
            u.last_visit = p.start
            events.extend(session_clicks)
    return events, views


def _extras(rng, config: SynthConfig, names: list, day: int, hit_counter: list) -> tuple:
    if not names:
        return ()
    vals = []
    nn = config.noise_columns
    noise = []
    if nn:
        draws = rng.random(nn)
        for i in range(nn):
            card = 2 + i % 4
            noise.append(f"n{i}v{int(draws[i] * card)}")
    vals.extend(noise)
    vals.extend("c" for _ in range(config.constant_columns))
    vals.extend(noise[i % nn] for i in range(config.redundant_columns))
    if config.unique_key_column:
        vals.append(f"h{day:03d}-{hit_counter[0]:08d}")
        hit_counter[0] += 1
    return tuple(zip(names, vals))


def generate_events(config: SynthConfig) -> SynthOutput:
    """Everything ``generate`` would write, kept in memory."""
    config.validate()
    world = _World(config)
    users = _make_users(config, world)
    schema = canonical_schema(extra_column_names(config))
    days, views = [], []
    for day in range(config.n_days):
        evs, vs = _generate_day(config, world, users, day, schema)
        days.append(evs)
        views.extend(vs)
    views.sort(key=lambda v: (v["user_key"], v["start_time"], v["player_id"]))
    return SynthOutput(schema, days, views, config)


def day_file_name(day: int) -> str:
    return f"day_{day + 1:03d}.tsv"


def generate(config: SynthConfig, out_dir) -> list[Path]:
    """Write one TSV dump per day plus ``manifest.json``; returns all written paths."""
    out = generate_events(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for day, evs in enumerate(out.days):
        path = out_dir / day_file_name(day)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            write_dump(evs, out.schema, fh)
        paths.append(path)
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps(out.manifest([p.name for p in paths]), indent=2, sort_keys=True) + "\n")
    return paths + [manifest]


def ground_truth(config: SynthConfig) -> dict:
    """Per-view true exit classes and the planted columns for ``config``."""
    out = generate_events(config)
    return out.manifest([day_file_name(d) for d in range(config.n_days)])

import json

import pytest
from scipy.stats import chi2_contingency

from clickexit.evaluation import cross_validate
from clickexit.feature_select import contingency, nominal_view
from clickexit.ingest import read_dump
from clickexit.sessionizer import sessionize
from clickexit.synth import InvalidConfig, SynthConfig, generate, generate_events, ground_truth
from clickexit.video_labeler import build_feature_table, extract_video_views, merge_task


def small(**kw):
    base = dict(n_users=300, n_days=2, seed=3)
    base.update(kw)
    return SynthConfig(**base)


def test_validation_messages():
    with pytest.raises(InvalidConfig, match=r"categories\[Tech\]\.dropoff_profile"):
        small(categories=[["Tech", [1.0, 0.5, 0.7, 0.3, 0.1]]]).validate()
    with pytest.raises(InvalidConfig, match="signal_strength"):
        small(signal_strength=1.5).validate()
    with pytest.raises(InvalidConfig, match="referrer_mix"):
        small(referrer_mix={"direct": 0.5}).validate()
    with pytest.raises(InvalidConfig, match="planted_columns"):
        small(planted_columns=["nope"]).validate()


def test_config_json_roundtrip():
    cfg = small(noise_columns=2)
    assert SynthConfig.from_json(cfg.to_json()) == cfg
    assert cfg.digest() == SynthConfig.from_json(cfg.to_json()).digest()


def test_59_days_59_files(tmp_path):
    paths = generate(SynthConfig(n_users=20, n_days=59, seed=2), tmp_path)
    dumps = [p for p in paths if p.suffix == ".tsv"]
    assert len(dumps) == 59
    assert json.loads((tmp_path / "manifest.json").read_text())["files"][0] == "day_001.tsv"


def test_deterministic_and_seed_sensitive(tmp_path):
    generate(small(), tmp_path / "a")
    generate(small(), tmp_path / "b")
    generate(small(seed=4), tmp_path / "c")
    for name in ("day_001.tsv", "day_002.tsv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "day_001.tsv").read_bytes() != (tmp_path / "c" / "day_001.tsv").read_bytes()
    head = lambda d: (tmp_path / d / "day_001.tsv").read_text().splitlines()[0]
    assert head("a") == head("c")


def test_dumps_parse_cleanly_and_labels_match_manifest(tmp_path):
    cfg = small(noise_columns=3, constant_columns=2, redundant_columns=2, unique_key_column=True)
    paths = generate(cfg, tmp_path)
    events = []
    for p in paths:
        if p.suffix == ".tsv":
            with p.open() as fh:
                _, evs, rejects = read_dump(fh)
            assert rejects == []
            events += evs
    views = extract_video_views(sessionize(events))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    got = [(v.user_key, v.player_id, v.start_time, v.exit_class5) for v in views]
    want = [(m["user_key"], m["player_id"], m["start_time"], m["exit_class5"]) for m in manifest["views"]]
    assert got == want and len(got) > 0
    assert manifest == ground_truth(cfg) | {"files": manifest["files"]}


def test_n_views_quota():
    out = generate_events(small(n_views=150))
    assert len(out.views) == 150


def test_full_signal_referrer_rule_is_learnable():
    cfg = SynthConfig(n_users=1500, n_days=2, signal_strength=1.0, planted_columns=["referrer_type"], seed=4)
    t = merge_task(build_feature_table(extract_video_views(sessionize(generate_events(cfg).events))))
    assert cross_validate("c45", t, k=10).accuracy > 0.9


def test_zero_signal_planted_columns_look_like_noise():
    cfg = SynthConfig(n_users=1500, n_days=2, signal_strength=0.0, seed=6, n_views=1500)
    t = build_feature_table(extract_video_views(sessionize(generate_events(cfg).events)))
    for name in cfg.planted_columns:
        table = contingency(nominal_view(t.column(name)), t.class_values)
        table = table[table.sum(axis=1) > 0]
        p = chi2_contingency(table, correction=False)[1]
        assert p > 0.001, (name, p)

import json
import shutil
import subprocess

import pytest

from clickexit.cli import main, stage_seed
from clickexit.ingest import canonical_schema, write_dump

from conftest import make_event


@pytest.fixture(scope="module")
def archive(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--n-users", "400", "--n-days", "2", "--seed", "5", "--out", str(root / "dumps")]) == 0
    assert main(["ingest", str(root / "dumps"), "--out", str(root / "ingest")]) == 0
    return root / "ingest" / "archive.tsv"


def tree_bytes(d):
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_ingest_outputs(archive):
    d = archive.parent
    for name in ("archive.tsv", "rejects.tsv", "prune_report.json", "ingest_summary.json", "run.json"):
        assert (d / name).exists(), name
    summary = json.loads((d / "ingest_summary.json").read_text())
    assert summary["rejects"] == 0 and summary["events"] > 0
    run = json.loads((d / "run.json").read_text())
    assert run["complete"] and "wall_time" not in run and len(run["input_sha256"]) == 2


def test_ingest_partial_failure(tmp_path, capsys):
    schema = canonical_schema()
    good = tmp_path / "in" / "good.tsv"
    good.parent.mkdir()
    with good.open("w") as fh:
        write_dump([make_event()], schema, fh)
    bad = tmp_path / "in" / "bad.tsv"
    lines = good.read_text().splitlines()
    idx = schema.header.index("player_id")
    bad.write_text("\n".join("\t".join(c for i, c in enumerate(l.split("\t")) if i != idx) for l in lines) + "\n")
    code = main(["ingest", str(tmp_path / "in"), "--out", str(tmp_path / "out")])
    assert code != 0
    assert "player_id" in capsys.readouterr().err
    summary = json.loads((tmp_path / "out" / "ingest_summary.json").read_text())
    assert summary["events"] == 1


def test_ingest_empty_dir(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["ingest", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) != 0
    assert "no input files" in capsys.readouterr().err


def test_pipeline_no_video_views(tmp_path, capsys):
    schema = canonical_schema()
    arch = tmp_path / "archive.tsv"
    with arch.open("w") as fh:
        write_dump([make_event(), make_event(timestamp=make_event().timestamp + 5)], schema, fh)
    assert main(["pipeline", str(arch), "--out", str(tmp_path / "p"), "--learners", "zero_r"]) == 3
    assert "0 video views" in capsys.readouterr().err
    run = json.loads((tmp_path / "p" / "run.json").read_text())
    assert run["failed_stage"] == "label" and not run["complete"]


def test_synth_invalid_profile(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"categories": [["Tech", [1.0, 0.4, 0.6, 0.2, 0.1]]]}))
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "s")]) != 0
    assert "dropoff_profile" in capsys.readouterr().err


def test_pipeline_outputs_and_determinism(archive, tmp_path):
    args = ["pipeline", str(archive), "--learners", "naive_bayes,c45,random_forest",
            "--hp", "random_forest.n_trees=5", "--folds", "5", "--seed", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert main(args + ["--out", str(tmp_path / "c"), "--jobs", "2"]) == 0
    a = tree_bytes(tmp_path / "a")
    assert a == tree_bytes(tmp_path / "b") == tree_bytes(tmp_path / "c")
    for name in ("graph_nodes.csv", "graph_edges.csv", "dropoff.csv", "features.tsv", "rankings.csv",
                 "consensus.json", "summary.csv", "reports/binary_early/c45.json", "roc/multiclass5_c45.csv"):
        assert name in a, name
    summary = a["summary.csv"].decode().splitlines()
    assert summary[0] == "learner,task,accuracy,auroc,seed" and len(summary) == 7
    assert summary[1].endswith(str(stage_seed(2, "evaluate")))
    run = json.loads(a["run.json"])
    assert set(run["outputs"]) == set(a) - {"run.json"}


def test_stage_commands(archive, tmp_path):
    out = tmp_path / "lab"
    assert main(["label", str(archive), "--out", str(out)]) == 0
    assert main(["rank", str(out / "features.tsv"), "--out", str(tmp_path / "rank")]) == 0
    assert main(["train", str(out / "features_binary.tsv"), "--learner", "ripper", "--out", str(tmp_path / "tr")]) == 0
    assert main(["evaluate", str(out / "features_binary.tsv"), "--learners", "zero_r", "--out", str(tmp_path / "ev")]) == 0
    assert main(["sessionize", str(archive), "--out", str(tmp_path / "se")]) == 0
    assert main(["dropoff", str(archive), "--out", str(tmp_path / "dr")]) == 0
    assert main(["graph", str(archive), "--out", str(tmp_path / "gr")]) == 0


def test_bad_hp_is_input_error(archive, tmp_path, capsys):
    code = main(["pipeline", str(archive), "--learners", "c45", "--hp", "c45.bogus=1", "--out", str(tmp_path / "x")])
    assert code != 0


@pytest.mark.skipif(shutil.which("clickexit") is None, reason="console script not installed")
def test_console_script_version():
    res = subprocess.run(["clickexit", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout

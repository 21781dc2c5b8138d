"""Command-line entry point: ``clickexit <command> ...``.

Every command writes its artifacts into ``--out`` together with a
``run.json`` manifest; output bytes depend only on the inputs, the flags and
``--seed`` (``--jobs`` only changes speed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import warnings
from pathlib import Path

from . import __version__
from .evaluation import cross_validate, summary_csv
from .feature_select import METHODS, consensus, rank_all, rankings_csv
from .ingest import (
    SchemaError,
    events_table,
    filter_crawlers,
    iter_dump_files,
    prune_columns,
    read_dump,
    write_dump,
)
from .learners import DEFAULT_LEARNERS, REGISTRY, save_model, train
from .sessionizer import section_graph, sessionize, sessions_jsonl
from .synth import InvalidConfig, SynthConfig, generate
from .table import FeatureTable
from .video_labeler import (
    build_feature_table,
    dropoff_csv,
    dropoff_curve,
    extract_video_views,
    merge_task,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_STAGE = 3


class StageFailure(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def stage_seed(seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Collects written files and produces ``run.json``."""

    def __init__(self, command: str, out: Path, args: argparse.Namespace, inputs=()):
        self.command = command
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = [str(p) for p in inputs]
        self.outputs: list[str] = []
        self.seed = getattr(args, "seed", None)
        flags = {
            k: v for k, v in sorted(vars(args).items())
            if k not in ("out", "jobs", "func", "record_timing", "command")
        }
        self.config_hash = hashlib.sha256(json.dumps(flags, sort_keys=True, default=str).encode()).hexdigest()
        self.record_timing = getattr(args, "record_timing", False)
        self.t0 = time.perf_counter()

    def write(self, rel: str, text: str) -> Path:
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
        self.record(path)
        return path

    def record(self, path: Path) -> None:
        rel = str(Path(path).relative_to(self.out))
        if rel not in self.outputs:
            self.outputs.append(rel)

    def finish(self, complete: bool = True, failed_stage: str | None = None, notes=None) -> None:
        manifest = {
            "command": self.command,
            "tool_version": __version__,
            "inputs": self.inputs,
            "input_sha256": {p: _sha(Path(p)) for p in self.inputs if Path(p).is_file()},
            "config_hash": self.config_hash,
            "seed": self.seed,
            "outputs": sorted(self.outputs),
            "complete": complete,
        }
        if failed_stage:
            manifest["failed_stage"] = failed_stage
        if notes:
            manifest["notes"] = notes
        if self.record_timing:
            manifest["wall_time"] = time.perf_counter() - self.t0
        (self.out / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_archive(path: str):
    p = Path(path)
    if not p.is_file():
        raise StageFailure("load", f"archive not found: {path}")
    with p.open(encoding="utf-8") as fh:
        schema, events, rejects = read_dump(fh)
    return schema, filter_crawlers(events), rejects


def _parse_hp(items) -> dict:
    """``learner.name=value`` pairs; values parsed as JSON when possible."""
    out: dict[str, dict] = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        learner, dot, name = key.partition(".")
        if not sep or not dot:
            raise ValueError(f"--hp expects learner.name=value, got {item!r}")
        if learner not in REGISTRY:
            raise ValueError(f"--hp names unknown learner {learner!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out.setdefault(learner, {})[name] = value
    return out


def _learners(arg: str | None) -> list[str]:
    names = list(DEFAULT_LEARNERS) if not arg else [s.strip() for s in arg.split(",") if s.strip()]
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise ValueError(f"unknown learners: {unknown}; choose from {sorted(REGISTRY)}")
    return names


def _tasks(table: FeatureTable, task: str) -> list[FeatureTable]:
    out = []
    if task in ("multi", "both"):
        out.append(table)
    if task in ("binary", "both"):
        out.append(merge_task(table))
    return out


def _labeled_views(events, timeout_minutes: int):
    sessions = sessionize(events, timeout_minutes * 60)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        views = extract_video_views(sessions)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return sessions, views


# commands -------------------------------------------------------------------

def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig.from_json(Path(args.config).read_text()) if args.config else SynthConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        for name in ("n_users", "n_days", "n_views", "signal_strength"):
            v = getattr(args, name)
            if v is not None:
                setattr(cfg, name, v)
        cfg.validate()
    except InvalidConfig as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    run = Run("synth", Path(args.out), args, [args.config] if args.config else [])
    for path in generate(cfg, run.out):
        run.record(path)
    run.write("config.json", cfg.to_json() + "\n")
    run.finish()
    return EXIT_OK


def cmd_ingest(args) -> int:
    files = list(iter_dump_files(args.paths))
    if not files:
        print("error: no input files", file=sys.stderr)
        return EXIT_INPUT
    run = Run("ingest", Path(args.out), args, files)
    status = EXIT_OK
    schema = None
    events = []
    reject_lines = ["file\tline\treason"]
    crawler_count = 0
    for path in files:
        try:
            with open(path, encoding="utf-8") as fh:
                file_schema, evs, rejects = read_dump(fh)
        except (SchemaError, OSError, UnicodeDecodeError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            status = EXIT_INPUT
            continue
        if schema is None:
            schema = file_schema
        elif file_schema.header != schema.header:
            print(f"error: {path}: header differs from {files[0]}", file=sys.stderr)
            status = EXIT_INPUT
            continue
        kept = filter_crawlers(evs)
        crawler_count += len(evs) - len(kept)
        events.extend(kept)
        reject_lines += [f"{path}\t{r.line_number}\t{r.reason}" for r in rejects]
        for r in rejects:
            print(f"reject: {path}:{r.line_number}: {r.reason}", file=sys.stderr)
    if schema is None:
        print("error: no valid input files", file=sys.stderr)
        run.finish(complete=False, failed_stage="ingest")
        return EXIT_INPUT
    with (run.out / "archive.tsv").open("w", encoding="utf-8", newline="\n") as fh:
        write_dump(events, schema, fh)
    run.record(run.out / "archive.tsv")
    run.write("rejects.tsv", "\n".join(reject_lines) + "\n")
    if events:
        _, report = prune_columns(events_table(events, schema))
        run.write("prune_report.json", report.to_json() + "\n")
    run.write(
        "ingest_summary.json",
        json.dumps(
            {"events": len(events), "rejects": len(reject_lines) - 1, "crawler_hits": crawler_count},
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    run.finish(complete=status == EXIT_OK)
    return status


def cmd_sessionize(args) -> int:
    _, events, _ = _load_archive(args.archive)
    run = Run("sessionize", Path(args.out), args, [args.archive])
    run.write("sessions.jsonl", sessions_jsonl(sessionize(events, args.timeout_minutes * 60)))
    run.finish()
    return EXIT_OK


def cmd_label(args) -> int:
    _, events, _ = _load_archive(args.archive)
    run = Run("label", Path(args.out), args, [args.archive])
    _, views = _labeled_views(events, args.timeout_minutes)
    if not views:
        print("error: 0 video views", file=sys.stderr)
        run.finish(complete=False, failed_stage="label")
        return EXIT_STAGE
    table = build_feature_table(views, include_extras=args.include_extras)
    run.write("features.tsv", table.to_tsv())
    run.write("features_binary.tsv", merge_task(table).to_tsv())
    run.finish()
    return EXIT_OK


def _read_table(path: str) -> FeatureTable:
    return FeatureTable.from_tsv(Path(path).read_text(encoding="utf-8"))


def cmd_rank(args) -> int:
    table = _read_table(args.table)
    run = Run("rank", Path(args.out), args, [args.table])
    _write_rankings(run, table, args.top_fraction)
    run.finish()
    return EXIT_OK


def _write_rankings(run: Run, table: FeatureTable, top_fraction: float) -> set:
    rankings = rank_all(table, METHODS)
    chosen = consensus(rankings, top_fraction)
    run.write("rankings.csv", rankings_csv(rankings))
    run.write("consensus.json", json.dumps(sorted(chosen), indent=2) + "\n")
    return chosen


def cmd_train(args) -> int:
    table = _read_table(args.table)
    hp = _parse_hp(args.hp).get(args.learner, {})
    run = Run("train", Path(args.out), args, [args.table])
    model = train(args.learner, table, args.seed, **hp)
    save_model(model, run.out / f"model_{args.learner}.json")
    run.record(run.out / f"model_{args.learner}.json")
    run.finish()
    return EXIT_OK


def _evaluate(run: Run, tables, learners, hp, folds, seed, jobs, record_timing) -> list:
    reports = []
    cv_seed = stage_seed(seed, "evaluate")
    for table in tables:
        for kind in learners:
            r = cross_validate(kind, table, folds, cv_seed, hp.get(kind), jobs, record_timing)
            run.write(f"reports/{r.task}/{kind}.json", r.to_json() + "\n")
            run.write(f"roc/{r.task}_{kind}.csv", r.roc_csv())
            reports.append(r)
    run.write("summary.csv", summary_csv(reports))
    return reports


def cmd_evaluate(args) -> int:
    table = _read_table(args.table)
    run = Run("evaluate", Path(args.out), args, [args.table])
    tables = _tasks(table, args.task) if len(table.class_labels) == 5 else [table]
    _evaluate(run, tables, _learners(args.learners), _parse_hp(args.hp), args.folds, args.seed,
              args.jobs, args.record_timing)
    run.finish()
    return EXIT_OK


def cmd_dropoff(args) -> int:
    _, events, _ = _load_archive(args.archive)
    run = Run("dropoff", Path(args.out), args, [args.archive])
    _, views = _labeled_views(events, args.timeout_minutes)
    run.write("dropoff.csv", dropoff_csv(dropoff_curve(views)))
    run.finish()
    return EXIT_OK


def cmd_graph(args) -> int:
    _, events, _ = _load_archive(args.archive)
    run = Run("graph", Path(args.out), args, [args.archive])
    graph = section_graph(sessionize(events, args.timeout_minutes * 60), args.top_k)
    run.write("graph_nodes.csv", graph.nodes_csv())
    run.write("graph_edges.csv", graph.edges_csv())
    run.finish()
    return EXIT_OK


def cmd_pipeline(args) -> int:
    run = Run("pipeline", Path(args.out), args, [args.archive])
    stage = "load"
    try:
        learners = _learners(args.learners)
        hp = _parse_hp(args.hp)
        _, events, rejects = _load_archive(args.archive)
        if rejects:
            print(f"warning: {len(rejects)} rejected lines in archive", file=sys.stderr)
        stage = "sessionize"
        sessions, views = _labeled_views(events, args.timeout_minutes)
        graph = section_graph(sessions, args.top_k)
        run.write("graph_nodes.csv", graph.nodes_csv())
        run.write("graph_edges.csv", graph.edges_csv())
        stage = "label"
        if not views:
            raise StageFailure(stage, "0 video views")
        run.write("dropoff.csv", dropoff_csv(dropoff_curve(views)))
        table = build_feature_table(views)
        run.write("features.tsv", table.to_tsv())
        stage = "rank"
        chosen = _write_rankings(run, table, args.top_fraction)
        if args.use_consensus:
            if not chosen:
                raise StageFailure(stage, "consensus set is empty")
            table = table.select([n for n in table.names if n in chosen])
        stage = "evaluate"
        _evaluate(run, _tasks(table, args.task), learners, hp, args.folds, args.seed, args.jobs,
                  args.record_timing)
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.finish(complete=False, failed_stage=exc.stage)
        return EXIT_STAGE
    except Exception as exc:  # stage-labelled diagnostics, partial outputs kept
        print(f"error: [{stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
        run.finish(complete=False, failed_stage=stage)
        return EXIT_STAGE
    run.finish()
    return EXIT_OK


# parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clickexit", description="Video exit prediction from click dumps.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", required=True, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (output is unaffected)")
        sp.add_argument("--record-timing", action="store_true", help="add wall times to outputs")

    def timeout(sp):
        sp.add_argument("--timeout-minutes", type=int, default=30, help="session inactivity timeout")

    def evaluation(sp):
        sp.add_argument("--folds", type=int, default=10)
        sp.add_argument("--learners", help=f"comma list (default: {','.join(DEFAULT_LEARNERS)})")
        sp.add_argument("--task", choices=("multi", "binary", "both"), default="both")
        sp.add_argument("--hp", action="append", metavar="LEARNER.NAME=VALUE",
                        help="hyperparameter override, repeatable (e.g. c45.min_leaf=5)")

    sp = sub.add_parser("synth", help="generate synthetic daily dumps")
    sp.add_argument("--config", help="SynthConfig JSON file")
    sp.add_argument("--n-users", type=int)
    sp.add_argument("--n-days", type=int)
    sp.add_argument("--n-views", type=int)
    sp.add_argument("--signal-strength", type=float)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--record-timing", action="store_true")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("ingest", help="validate dumps into one archive")
    sp.add_argument("paths", nargs="+", help="dump files or directories of *.tsv")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("sessionize", help="write sessions as JSON lines")
    sp.add_argument("archive")
    common(sp, seed=False)
    timeout(sp)
    sp.set_defaults(func=cmd_sessionize)

    sp = sub.add_parser("label", help="extract labeled video views")
    sp.add_argument("archive")
    sp.add_argument("--include-extras", action="store_true", help="keep non-canonical dump columns")
    common(sp, seed=False)
    timeout(sp)
    sp.set_defaults(func=cmd_label)

    sp = sub.add_parser("rank", help="rank features with all five methods")
    sp.add_argument("table")
    sp.add_argument("--top-fraction", type=float, default=0.10)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("train", help="fit one learner and save the model")
    sp.add_argument("table")
    sp.add_argument("--learner", required=True, choices=sorted(REGISTRY))
    sp.add_argument("--hp", action="append", metavar="LEARNER.NAME=VALUE")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="cross-validate learners on a table")
    sp.add_argument("table")
    common(sp)
    evaluation(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("pipeline", help="archive to rankings, reports and curves")
    sp.add_argument("archive")
    sp.add_argument("--top-fraction", type=float, default=0.10)
    sp.add_argument("--top-k", type=int, default=12, help="sections kept in the graph")
    sp.add_argument("--use-consensus", action="store_true", help="train only on the consensus features")
    common(sp)
    timeout(sp)
    evaluation(sp)
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("dropoff", help="per-category drop-off curves")
    sp.add_argument("archive")
    common(sp, seed=False)
    timeout(sp)
    sp.set_defaults(func=cmd_dropoff)

    sp = sub.add_parser("graph", help="section transition graph")
    sp.add_argument("archive")
    sp.add_argument("--top-k", type=int, default=12)
    common(sp, seed=False)
    timeout(sp)
    sp.set_defaults(func=cmd_graph)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

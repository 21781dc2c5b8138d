"""Stratified k-fold cross-validation, accuracy, ROC curves and AUROC."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .learners import resolve_hyperparameters, train
from .table import FeatureTable, stratified_fold_indices
from .video_labeler import merge_task  # noqa: F401  (re-exported)

TASK_MULTI = "multiclass5"
TASK_BINARY = "binary_early"


class TooFewRows(ValueError):
    pass


class SingleClass(ValueError):
    pass


class EmptyMatrix(ValueError):
    pass


@dataclass(frozen=True)
class FoldAssignment:
    fold_index: np.ndarray
    k: int
    seed: int

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_index == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_index != fold)

    def sizes(self) -> list[int]:
        return np.bincount(self.fold_index, minlength=self.k).tolist()


def stratified_folds(table: FeatureTable, k: int = 10, seed: int = 1) -> FoldAssignment:
    if k < 2:
        raise ValueError("k must be >= 2")
    if table.row_count < k:
        raise TooFewRows(f"{table.row_count} rows cannot fill {k} folds")
    return FoldAssignment(stratified_fold_indices(table.class_codes(), k, seed), k, seed)


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    return np.bincount(y_true * n_classes + y_pred, minlength=n_classes * n_classes).reshape(
        n_classes, n_classes
    )


def accuracy(confusion) -> float:
    m = np.asarray(confusion)
    if m.size == 0 or m.sum() <= 0:
        raise EmptyMatrix("confusion matrix has no instances")
    return float(np.trace(m) / m.sum())


def roc_curve(scores, labels) -> tuple[list[tuple[float, float]], float]:
    """ROC points (fpr, tpr) over distinct thresholds and the trapezoidal AUROC.

    ``labels`` are truthy for the positive class. Tied scores form one step,
    which is what gives tied positive/negative pairs half credit.
    """
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels, dtype=bool)
    if len(s) != len(pos):
        raise ValueError("scores and labels differ in length")
    P = int(pos.sum())
    N = len(pos) - P
    if P == 0 or N == 0:
        raise SingleClass("ROC needs both positive and negative instances")
    order = np.argsort(-s, kind="stable")
    s, pos = s[order], pos[order]
    ends = np.append(np.flatnonzero(s[1:] != s[:-1]), len(s) - 1)
    tp = np.cumsum(pos)[ends]
    fp = (ends + 1) - tp
    tpr = np.concatenate([[0.0], tp / P])
    fpr = np.concatenate([[0.0], fp / N])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return [(float(a), float(b)) for a, b in zip(fpr, tpr)], auc


def multiclass_auroc(per_class_scores, labels, average: str = "weighted") -> float:
    """One-vs-rest AUROC averaged by class prevalence (or unweighted with ``"macro"``).

    ``labels`` are class indices into the score columns; classes absent from
    ``labels`` are skipped.
    """
    P = np.asarray(per_class_scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    present = [c for c in range(P.shape[1]) if (y == c).any()]
    if len(present) < 2:
        raise SingleClass("multiclass AUROC needs at least two observed classes")
    if P.shape[1] == 2:
        return roc_curve(P[:, 0], y == 0)[1]
    aucs = np.array([roc_curve(P[:, c], y == c)[1] for c in present])
    if average == "macro":
        return float(aucs.mean())
    if average != "weighted":
        raise ValueError("average must be 'weighted' or 'macro'")
    weights = np.array([(y == c).sum() for c in present], dtype=np.float64)
    return float(np.sum(aucs * weights) / weights.sum())


@dataclass
class EvalReport:
    learner_kind: str
    task: str
    class_labels: tuple
    per_fold_confusions: list
    pooled_confusion: np.ndarray
    accuracy: float
    auroc: float
    roc_points: dict
    seed: int
    k: int
    hyperparameters: dict = field(default_factory=dict)
    wall_time: float | None = None

    def to_dict(self) -> dict:
        d = {
            "learner_kind": self.learner_kind,
            "task": self.task,
            "class_labels": list(self.class_labels),
            "k": self.k,
            "seed": self.seed,
            "hyperparameters": self.hyperparameters,
            "accuracy": self.accuracy,
            "auroc": self.auroc,
            "pooled_confusion": np.asarray(self.pooled_confusion).tolist(),
            "per_fold_confusions": [np.asarray(m).tolist() for m in self.per_fold_confusions],
            "roc_points": {k: [list(p) for p in v] for k, v in self.roc_points.items()},
        }
        if self.wall_time is not None:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self) -> list:
        return [self.learner_kind, self.task, f"{self.accuracy:.6f}", f"{self.auroc:.6f}", self.seed]

    def roc_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "fpr", "tpr"])
        for label, pts in self.roc_points.items():
            for fpr, tpr in pts:
                w.writerow([label, f"{fpr:.6f}", f"{tpr:.6f}"])
        return buf.getvalue()


SUMMARY_HEADER = ["learner", "task", "accuracy", "auroc", "seed"]


def summary_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(fold)]).generate_state(1)[0])


def _run_fold(args) -> np.ndarray:
    kind, table, train_idx, test_idx, hp, seed = args
    model = train(kind, table.take(train_idx), seed, **hp)
    return model.predict_proba(table.take(test_idx))


def task_name(table: FeatureTable) -> str:
    return TASK_MULTI if len(table.class_labels) > 2 else TASK_BINARY


def cross_validate(
    kind: str,
    table: FeatureTable,
    k: int = 10,
    seed: int = 1,
    hyperparameters: Mapping | None = None,
    jobs: int = 1,
    record_timing: bool = False,
    average: str = "weighted",
) -> EvalReport:
    """Train on k-1 folds, predict the held-out fold, and score pooled predictions.

    Fold ``i`` trains with a seed derived from ``(seed, i)``, so serial and
    parallel runs give identical reports.
    """
    hp = resolve_hyperparameters(kind, hyperparameters)
    folds = stratified_folds(table, k, seed)
    t0 = time.perf_counter()
    jobs_args = [
        (kind, table, folds.train_rows(i), folds.test_rows(i), dict(hyperparameters or {}), fold_seed(seed, i))
        for i in range(k)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_fold, jobs_args))
    else:
        outputs = [_run_fold(a) for a in jobs_args]
    C = len(table.class_labels)
    y = table.class_codes()
    proba = np.zeros((table.row_count, C))
    confusions = []
    for i, p in enumerate(outputs):
        test = folds.test_rows(i)
        proba[test] = p
        confusions.append(confusion_matrix(y[test], np.argmax(p, axis=1), C))
    pooled = confusion_matrix(y, np.argmax(proba, axis=1), C)
    labels = tuple(table.class_labels)
    if C == 2:
        points, auc = roc_curve(proba[:, 0], y == 0)
        roc = {labels[0]: points}
    else:
        roc = {labels[c]: roc_curve(proba[:, c], y == c)[0] for c in range(C) if (y == c).any() and (y != c).any()}
        auc = multiclass_auroc(proba, y, average)
    return EvalReport(
        learner_kind=kind,
        task=task_name(table),
        class_labels=labels,
        per_fold_confusions=confusions,
        pooled_confusion=pooled,
        accuracy=accuracy(pooled),
        auroc=auc,
        roc_points=roc,
        seed=seed,
        k=k,
        hyperparameters=hp,
        wall_time=time.perf_counter() - t0 if record_timing else None,
    )

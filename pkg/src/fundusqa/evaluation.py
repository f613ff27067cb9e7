"""Dataset splitting and classifier evaluation: confusion, F1, ROC and AUC."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EvaluationReport",
    "f1_score",
    "roc_curve",
    "auc",
    "evaluate_scores",
    "stratified_folds",
    "split_dataset",
]


def f1_score(y_true, y_pred) -> float:
    """``2TP / (2TP + FP + FN)``; 0 when there are no positives at all."""
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    tp = int(np.sum(y_true & y_pred))
    fp = int(np.sum(~y_true & y_pred))
    fn = int(np.sum(y_true & ~y_pred))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def roc_curve(y_true, scores) -> list:
    """ROC points ``(fpr, tpr)`` from (0, 0) to (1, 1).

    Thresholds sweep every distinct score from high to low; samples with
    equal scores enter together, giving a diagonal segment for ties.
    """
    y = np.asarray(y_true).astype(bool)
    s = np.asarray(scores, dtype=np.float64)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tps = np.cumsum(y)[ends]
    fps = (ends + 1) - tps
    return [(0.0, 0.0)] + [(fp / n_neg, tp / n_pos) for fp, tp in zip(fps.tolist(), tps.tolist())]


def auc(points) -> float:
    """Trapezoidal area under a list of ``(fpr, tpr)`` points."""
    pts = np.asarray(points, dtype=np.float64)
    return float(np.sum(np.diff(pts[:, 0]) * (pts[1:, 1] + pts[:-1, 1]) / 2.0))


@dataclass
class EvaluationReport:
    tp: int
    fp: int
    tn: int
    fn: int
    f1: float
    roc_points: list = field(default_factory=list)
    auc: float | None = None
    threshold: float = 0.5
    kind: str = ""
    ids: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    labels: list = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        n = self.tp + self.fp + self.tn + self.fn
        return (self.tp + self.tn) / n if n else float("nan")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "threshold": self.threshold,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "f1": self.f1,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "roc_points": [list(p) for p in self.roc_points],
            "predictions": [
                {"id": i, "label": int(l), "score": float(s)} for i, l, s in zip(self.ids, self.labels, self.scores)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        auc_txt = "undefined (single-class test set)" if self.auc is None else f"{self.auc:.4f}"
        lines = [
            f"model      {self.kind}",
            f"threshold  {self.threshold}",
            f"TP {self.tp:4d}   FP {self.fp:4d}",
            f"FN {self.fn:4d}   TN {self.tn:4d}",
            f"accuracy   {self.accuracy:.4f}",
            f"F1         {self.f1:.4f}",
            f"AUC        {auc_txt}",
            "ROC points (FPR, TPR):",
        ]
        lines += [f"  {fpr:.4f}  {tpr:.4f}" for fpr, tpr in self.roc_points]
        return "\n".join(lines) + "\n"


def evaluate_scores(y_true, scores, threshold: float = 0.5, kind: str = "", ids=None) -> EvaluationReport:
    """Confusion counts and F1 at ``threshold`` (score >= threshold is positive), ROC and AUC.

    For a single-class ``y_true`` the ROC is empty and ``auc`` is ``None``.
    """
    y = np.asarray(y_true).astype(int)
    s = np.asarray(scores, dtype=np.float64)
    if y.size == 0:
        raise ValueError("cannot evaluate an empty test set")
    pred = s >= threshold
    pos = y == 1
    tp = int(np.sum(pos & pred))
    fp = int(np.sum(~pos & pred))
    tn = int(np.sum(~pos & ~pred))
    fn = int(np.sum(pos & ~pred))
    if pos.all() or not pos.any():
        points, area = [], None
    else:
        points = roc_curve(y, s)
        area = auc(points)
    return EvaluationReport(
        tp, fp, tn, fn, f1_score(y, pred), points, area, threshold, kind,
        list(ids) if ids is not None else list(range(y.size)), s.tolist(), y.tolist(),
    )


def stratified_folds(y, n_folds: int, rng) -> list:
    """Indices of ``n_folds`` validation folds with per-class round-robin assignment."""
    y = np.asarray(y).astype(int)
    if y.size < n_folds:
        raise ValueError(f"{y.size} rows cannot fill {n_folds} folds")
    folds = [[] for _ in range(n_folds)]
    offset = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if idx.size < n_folds:
            raise ValueError(f"class {cls} has {idx.size} rows, fewer than {n_folds} folds")
        idx = rng.permutation(idx)
        for i, j in enumerate(idx):
            folds[(i + offset) % n_folds].append(int(j))
        offset += idx.size
    return [np.sort(np.array(f)) for f in folds]


def split_dataset(y, test_fraction: float = 0.25, seed: int = 0, groups=None) -> tuple:
    """Stratified random train/test split, returning ``(train_idx, test_idx)``.

    Without ``groups`` the test set holds ``ceil(test_fraction * n)`` rows
    (9 of 36), drawn per class in proportion to the class sizes. With
    ``groups`` whole groups (e.g. subjects) are assigned to one side:
    ``ceil(test_fraction * n_groups)`` groups go to test, redrawn until
    both sides contain both classes when that is possible.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    y = np.asarray(y).astype(int)
    n = y.size
    if n < 4:
        raise ValueError("need at least 4 rows to split")
    rng = np.random.default_rng(seed)

    if groups is None:
        n_test = math.ceil(test_fraction * n)
        classes = [np.flatnonzero(y == c) for c in (0, 1)]
        exact = [test_fraction * c.size for c in classes]
        take = [int(math.floor(e)) for e in exact]
        # hand out the remaining slots to the largest remainders (random tie-break)
        rema = [e - t for e, t in zip(exact, take)]
        order = sorted(range(2), key=lambda i: (-rema[i], rng.random()))
        for i in order:
            if sum(take) >= n_test:
                break
            if take[i] < classes[i].size:
                take[i] += 1
        test = np.concatenate([rng.permutation(c)[:t] for c, t in zip(classes, take)])
    else:
        groups = np.asarray(groups)
        uniq = np.unique(groups)
        n_test_groups = max(1, math.ceil(test_fraction * uniq.size))
        if n_test_groups >= uniq.size:
            raise ValueError("too few groups for a group split")
        for _ in range(100):
            chosen = rng.permutation(uniq)[:n_test_groups]
            is_test = np.isin(groups, chosen)
            if len(set(y[is_test])) == len(set(y)) and len(set(y[~is_test])) == len(set(y)):
                break
        test = np.flatnonzero(is_test)
    test = np.sort(test)
    train = np.setdiff1d(np.arange(n), test)
    return train, test

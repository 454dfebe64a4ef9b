"""Nearest-neighbour classification from a precomputed bound matrix."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from sklearn.metrics import confusion_matrix
from sklearn.model_selection import KFold, LeaveOneOut, StratifiedKFold, cross_val_predict, cross_val_score
from sklearn.neighbors import KNeighborsClassifier


class LabelMismatch(ValueError):
    pass


@dataclass
class ClassificationReport:
    k: int
    loo_accuracy: float
    cv_scores: Dict[int, float]
    classes: List[str]
    confusion: np.ndarray
    predictions: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"k": self.k, "loo_accuracy": round(self.loo_accuracy, 6),
                "cv_scores": {str(k): round(v, 6) for k, v in self.cv_scores.items()},
                "classes": self.classes, "confusion": self.confusion.tolist()}

    def write_confusion_csv(self, path_or_file) -> None:
        """Rows are true classes, columns predicted classes; corner cell ``true\\pred``."""
        own = isinstance(path_or_file, (str, Path))
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["true\\pred"] + self.classes)
            for c, row in zip(self.classes, self.confusion):
                w.writerow([c] + [int(x) for x in row])
        finally:
            if own:
                fh.close()


def finite_distances(d: np.ndarray) -> np.ndarray:
    """Replace unbounded entries by one more than the largest finite entry."""
    d = np.asarray(d, dtype=float)
    finite = d[np.isfinite(d)]
    big = (finite.max() if finite.size else 0.0) + 1.0
    return np.where(np.isfinite(d), d, big)


def _knn(k: int) -> KNeighborsClassifier:
    return KNeighborsClassifier(n_neighbors=k, metric="precomputed")


def loo_predict(d: np.ndarray, labels: Sequence[str], k: int) -> np.ndarray:
    """Leave-one-out predictions: each sample is classified from all the others."""
    d = finite_distances(d)
    y = np.asarray(labels)
    return cross_val_predict(_knn(k), d, y, cv=LeaveOneOut())


def choose_k(d: np.ndarray, labels: Sequence[str], k_max: int = 30, folds: int = 5,
             seed: int = 0) -> Dict[int, float]:
    """Mean ``folds``-fold accuracy for each ``k`` that every training split allows."""
    d = finite_distances(d)
    y = np.asarray(labels)
    _, counts = np.unique(y, return_counts=True)
    folds = max(2, min(folds, len(y)))
    if counts.min() >= folds:
        cv = StratifiedKFold(folds, shuffle=True, random_state=seed)
    else:
        cv = KFold(folds, shuffle=True, random_state=seed)
    smallest_train = len(y) - math.ceil(len(y) / folds)
    scores = {}
    for k in range(1, min(k_max, smallest_train) + 1):
        scores[k] = float(np.mean(cross_val_score(_knn(k), d, y, cv=cv)))
    return scores


def classify(d: np.ndarray, labels: Sequence[str], k: Optional[int] = None, k_max: int = 30,
             folds: int = 5, seed: int = 0) -> ClassificationReport:
    """Pick ``k`` by cross-validation (unless given), then report LOO accuracy."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise LabelMismatch("distance matrix must be square")
    if len(labels) != d.shape[0]:
        raise LabelMismatch(f"{len(labels)} labels for a {d.shape[0]}x{d.shape[0]} matrix")
    if len(labels) < 2:
        raise LabelMismatch("need at least two samples")
    scores = {} if k is not None else choose_k(d, labels, k_max, folds, seed)
    if k is None:
        # ties go to the smallest k
        k = max(scores, key=lambda kk: (scores[kk], -kk))
    k = min(k, len(labels) - 1)
    pred = loo_predict(d, labels, k)
    classes = sorted(set(labels))
    cm = confusion_matrix(labels, pred, labels=classes)
    acc = float(np.mean(pred == np.asarray(labels)))
    return ClassificationReport(k, acc, scores, classes, cm, pred.tolist())


def read_labels(path: Union[str, Path]) -> Dict[str, str]:
    """``name,label`` rows (optional header ``name,label``)."""
    out = {}
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if k == 0 and [c.strip().lower() for c in row[:2]] == ["name", "label"]:
                continue
            if len(row) < 2:
                raise LabelMismatch(f"{path}: line {k + 1} needs 'name,label'")
            out[row[0].strip()] = row[1].strip()
    return out

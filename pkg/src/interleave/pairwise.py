"""Pairwise bound matrices over collections of mapper graphs."""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .graph import MapperGraph, graph_from_dict, graph_to_dict
from .optimize.search import SearchTrace, evaluate_n, search_over_n
from .optimize.solver import Budget

log = logging.getLogger(__name__)


@dataclass
class PairResult:
    i: int
    j: int
    bound: float
    proved: bool
    summary: dict
    error: Optional[str] = None


@dataclass
class DistanceMatrixArtifact:
    labels: List[str]
    values: np.ndarray
    meta: Dict[str, dict] = field(default_factory=dict)

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, Path))
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + self.labels)
            for lab, row in zip(self.labels, self.values):
                w.writerow([lab] + [_fmt(x) for x in row])
        finally:
            if own:
                fh.close()

    def to_dict(self) -> dict:
        return {"labels": self.labels,
                "values": [[_fmt_json(x) for x in row] for row in self.values],
                "pairs": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else str(int(x))


def _fmt_json(x: float):
    return "inf" if math.isinf(x) else int(x)


def read_matrix_csv(path: Union[str, Path]) -> Tuple[List[str], np.ndarray]:
    """Inverse of :meth:`DistanceMatrixArtifact.to_csv`."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    labels = rows[0][1:]
    body = rows[1:]
    if len(body) != len(labels) or any(len(r) != len(labels) + 1 for r in body):
        raise ValueError(f"{path}: matrix is not square with a label header")
    if [r[0] for r in body] != labels:
        raise ValueError(f"{path}: row labels differ from column labels")
    values = np.array([[float(x) for x in r[1:]] for r in body])
    return labels, values


def _one_pair(args) -> PairResult:
    i, j, fd, gd, n, nodes, seconds = args
    f, g = graph_from_dict(fd), graph_from_dict(gd)
    budget = Budget(nodes, seconds)
    try:
        if n is None:
            trace = search_over_n(f, g, budget)
        else:
            trace = SearchTrace([evaluate_n(f, g, n, budget)], (n, n))
        if not trace.proved:
            # the optimizer's incumbent may depend on orientation; keep the better one
            swapped = search_over_n(g, f, budget) if n is None else SearchTrace([evaluate_n(g, f, n, budget)])
            if swapped.bound < trace.bound:
                trace = swapped
        summary = trace.to_dict()
        return PairResult(i, j, trace.bound, trace.proved, summary)
    except Exception as exc:  # recorded per pair; the run goes on
        log.warning("pair (%d, %d) failed: %s", i, j, exc)
        return PairResult(i, j, math.inf, False, {}, f"{type(exc).__name__}: {exc}")


def pairwise_bounds(graphs: Sequence[Tuple[str, MapperGraph]], jobs: int = 1,
                    budget: Budget = Budget(), n: Optional[int] = None) -> DistanceMatrixArtifact:
    """Bound for every unordered pair; ``n=None`` runs the search over ``n``."""
    labels = [name for name, _ in graphs]
    dicts = [graph_to_dict(g) for _, g in graphs]
    tasks = [(i, j, dicts[i], dicts[j], n, budget.nodes, budget.seconds)
             for i in range(len(graphs)) for j in range(i + 1, len(graphs))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one_pair, tasks, chunksize=max(1, len(tasks) // (8 * jobs))))
    else:
        results = [_one_pair(t) for t in tasks]
    values = np.zeros((len(graphs), len(graphs)))
    meta = {}
    for r in results:
        values[r.i, r.j] = values[r.j, r.i] = r.bound
        entry = dict(r.summary)
        entry["proved"] = r.proved
        if r.error:
            entry["error"] = r.error
        meta[f"{labels[r.i]}|{labels[r.j]}"] = entry
    return DistanceMatrixArtifact(labels, values, meta)

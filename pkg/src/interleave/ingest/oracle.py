"""Exhaustive enumeration of assignments, used to check the optimizer."""
from __future__ import annotations

import itertools
import math
from typing import Optional, Tuple

import numpy as np

from ..blockmat import MatrixBundle, build_bundle
from ..graph import MapperGraph
from ..loss import MAPS, Assignment, ColumnEvaluator, evaluate_loss, map_domains

DEFAULT_CAP = 10 ** 8


class TooLarge(ValueError):
    pass


def count_assignments(bundle: MatrixBundle) -> int:
    """Number of column-one-hot assignments (0 when some column has no target)."""
    total = 1
    for cols in map_domains(bundle).values():
        for dom in cols:
            total *= len(dom)
    return total


def _batches(bundle: MatrixBundle, cap: int, size: int = 4096):
    """Yield every assignment, as dicts of ``(batch, columns)`` target arrays."""
    total = count_assignments(bundle)
    if total > cap:
        raise TooLarge(f"{total} assignments exceed the cap of {cap}")
    if total == 0:
        return
    doms = map_domains(bundle)
    slots = [(m, j, dom) for m in MAPS for j, dom in enumerate(doms[m])]
    free = [k for k, (_, _, dom) in enumerate(slots) if len(dom) > 1]
    base = {m: np.array([int(d[0]) for d in doms[m]], dtype=np.int64) for m in MAPS}
    combos = itertools.product(*(slots[k][2].tolist() for k in free))
    while True:
        chunk = np.array(list(itertools.islice(combos, size)), dtype=np.int64)
        if not len(chunk):
            return
        chunk = chunk.reshape(len(chunk), len(free))
        maps = {m: np.repeat(v[None, :], len(chunk), axis=0) for m, v in base.items()}
        for col, k in enumerate(free):
            m, j, _ = slots[k]
            maps[m][:, j] = chunk[:, col]
        yield maps


def exhaustive_minimum(bundle: MatrixBundle, cap: int = DEFAULT_CAP) -> Tuple[float, Optional[Assignment]]:
    """Least loss over every assignment; ``(inf, None)`` when none exists.

    Candidates are scored column by column in batches; the minimizer is
    re-scored with the matrix evaluator before it is returned.
    """
    ev = ColumnEvaluator(bundle)
    best, arg = math.inf, None
    for maps in _batches(bundle, cap):
        vals = ev.batch_aggregate(maps)
        k = int(np.argmin(vals))
        if arg is None or vals[k] < best:
            best = float(vals[k])
            arg = Assignment(bundle.n, {m: v[k].copy() for m, v in maps.items()})
            if best == 0:
                break
    if arg is None:
        return math.inf, None
    return evaluate_loss(bundle, arg).aggregate, arg


def brute_force_interleaving(f: MapperGraph, g: MapperGraph, n: int,
                             cap: int = DEFAULT_CAP) -> Tuple[bool, Optional[Assignment]]:
    """Whether some ``n``-assignment has zero loss, with a witness."""
    bundle = build_bundle(f, g, n)
    best, arg = exhaustive_minimum(bundle, cap)
    return (best == 0, arg if best == 0 else None)


def oracle_distance(f: MapperGraph, g: MapperGraph, max_n: Optional[int] = None,
                    cap: int = DEFAULT_CAP) -> float:
    """Least ``n`` admitting an interleaving, by enumeration; ``inf`` if none up to ``max_n``."""
    if max_n is None:
        max_n = 2 * max(f.grid.half_range, g.grid.half_range)
    for n in range(max_n + 1):
        if brute_force_interleaving(f, g, n, cap)[0]:
            return n
    return math.inf

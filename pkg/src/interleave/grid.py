"""Discretization of the bounded real line and thickening of basic opens.

All combinatorics are done in integer level units. ``delta`` is carried only
so realizations can be reported in function units.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal, Optional, Tuple

VERTEX = "vertex"
EDGE = "edge"

Interval = Optional[Tuple[int, int]]


@dataclass(frozen=True)
class Grid:
    """Cells ``sigma_i`` (i in [-L, L]) and ``tau_i`` (i in [-L, L-1])."""

    half_range: int
    delta: float = 1.0

    def __post_init__(self):
        if int(self.half_range) != self.half_range or self.half_range < 1:
            raise ValueError(f"half_range must be a positive integer, got {self.half_range!r}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")

    @property
    def vertex_levels(self) -> range:
        return range(-self.half_range, self.half_range + 1)

    @property
    def edge_levels(self) -> range:
        return range(-self.half_range, self.half_range)

    @property
    def n_vertex_cells(self) -> int:
        return 2 * self.half_range + 1

    @property
    def n_edge_cells(self) -> int:
        return 2 * self.half_range

    def clamp_vertex_window(self, lo: int, hi: int) -> Interval:
        lo, hi = max(lo, -self.half_range), min(hi, self.half_range)
        return (lo, hi) if lo <= hi else None

    def clamp_edge_window(self, lo: int, hi: int) -> Interval:
        lo, hi = max(lo, -self.half_range), min(hi, self.half_range - 1)
        return (lo, hi) if lo <= hi else None

    def contains(self, cell: "CellRef") -> bool:
        levels = self.vertex_levels if cell.kind == VERTEX else self.edge_levels
        return cell.index in levels


@dataclass(frozen=True)
class CellRef:
    kind: Literal["vertex", "edge"]
    index: int

    def __post_init__(self):
        if self.kind not in (VERTEX, EDGE):
            raise ValueError(f"unknown cell kind {self.kind!r}")

    @classmethod
    def vertex(cls, i: int) -> "CellRef":
        return cls(VERTEX, i)

    @classmethod
    def edge(cls, i: int) -> "CellRef":
        return cls(EDGE, i)


@dataclass(frozen=True)
class BasicOpen:
    """The basic open of a cell, thickened ``thickness`` times.

    ``saturated`` is set once a thickening would leave the bounding box
    ``[-L*delta, L*delta]``; windows and realizations are then clamped per side.
    """

    grid: Grid
    cell: CellRef
    thickness: int = 0
    saturated: bool = False

    def __post_init__(self):
        if self.thickness < 0:
            raise ValueError("thickness must be nonnegative")
        if not self.grid.contains(self.cell):
            raise ValueError(f"{self.cell} is not a cell of {self.grid}")

    def _raw_vertex_window(self) -> Tuple[int, int]:
        i, n = self.cell.index, self.thickness
        if self.cell.kind == VERTEX:
            return i - n, i + n
        return i - n + 1, i + n

    def _overflows(self) -> bool:
        lo, hi = self.realization_levels(clamp=False)
        return lo < -self.grid.half_range or hi > self.grid.half_range

    def realization_levels(self, clamp: bool = True) -> Tuple[int, int]:
        """Endpoints of ``|S|`` in level units (open interval)."""
        i, n = self.cell.index, self.thickness
        if self.cell.kind == VERTEX:
            lo, hi = (i - 1, i + 1) if n == 0 else (i - n, i + n)
        else:
            lo, hi = i - n, i + 1 + n
        if clamp:
            lo, hi = max(lo, -self.grid.half_range), min(hi, self.grid.half_range)
        return lo, hi

    def realization(self) -> Tuple[float, float]:
        lo, hi = self.realization_levels()
        return lo * self.grid.delta, hi * self.grid.delta

    def covered_vertex_levels(self) -> Interval:
        """Levels ``j`` whose vertex cell ``sigma_j`` lies in the open, or None."""
        lo, hi = self._raw_vertex_window()
        if lo > hi:
            return None
        return self.grid.clamp_vertex_window(lo, hi)

    def covered_edge_levels(self) -> Interval:
        """Levels ``j`` whose edge cell ``tau_j`` lies in the open."""
        i, n = self.cell.index, self.thickness
        if self.cell.kind == VERTEX:
            return self.grid.clamp_edge_window(i - n - 1, i + n)
        return self.grid.clamp_edge_window(i - n, i + n)


def thicken(s: BasicOpen, steps: int) -> BasicOpen:
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    out = replace(s, thickness=s.thickness + steps)
    return replace(out, saturated=s.saturated or out._overflows())


def covered_vertex_levels(s: BasicOpen) -> Interval:
    return s.covered_vertex_levels()

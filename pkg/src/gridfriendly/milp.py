"""Branch-and-bound over binary variables, with LP relaxations from :mod:`lp`."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .lp import LinearProgram, LpError, solve_lp

INT_TOL = 1e-6


class NodeLimitError(LpError):
    """Raised when the search tree grows past its node budget."""


@dataclass
class MixedProgram:
    lp: LinearProgram
    binary: tuple[int, ...]

    def __post_init__(self):
        self.binary = tuple(sorted(set(int(j) for j in self.binary)))

    def validate(self) -> None:
        self.lp.validate()
        for j in self.binary:
            if not 0 <= j < self.lp.n:
                raise LpError(f"binary index {j} out of range for n = {self.lp.n}")
            if self.lp.lower[j] < 0.0 or self.lp.upper[j] > 1.0:
                raise LpError(
                    f"binary variable {j} has bounds [{self.lp.lower[j]}, {self.lp.upper[j]}] outside [0, 1]"
                )


@dataclass
class MipSolution:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray
    objective_value: float
    nodes_explored: int
    incumbents: list[float] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _most_fractional(x: np.ndarray, binary: tuple[int, ...]) -> int | None:
    best, best_dist = None, INT_TOL
    for j in binary:
        frac = abs(x[j] - round(x[j]))
        # strict '>' keeps the lowest index on ties
        if frac > best_dist + 1e-15:
            best, best_dist = j, frac
    return best


def solve_mip(mp: MixedProgram) -> MipSolution:
    """Minimize ``mp`` exactly by exhaustive best-bound branch-and-bound.

    Branching picks the most fractional binary (lowest index on ties); open
    nodes are explored best bound first, deeper nodes first on ties.
    """
    mp.validate()
    lp = mp.lp
    binary = mp.binary
    node_limit = 2 ** (len(binary) + 4)
    nodes = 0
    seq = 0
    heap: list[tuple[float, int, int, np.ndarray, np.ndarray, np.ndarray]] = []
    incumbent_x: np.ndarray | None = None
    incumbent = math.inf
    history: list[float] = []

    def prune_gap() -> float:
        return 1e-9 * max(1.0, abs(incumbent)) if incumbent < math.inf else 0.0

    def evaluate(lower: np.ndarray, upper: np.ndarray, depth: int) -> None:
        nonlocal nodes, seq, incumbent, incumbent_x
        if nodes >= node_limit:
            raise NodeLimitError(f"branch-and-bound exceeded {node_limit} nodes")
        nodes += 1
        sol = solve_lp(lp.with_bounds(lower, upper))
        if sol.status == "unbounded":
            raise LpError("LP relaxation is unbounded; binary programs here must be bounded")
        if not sol.optimal:
            return
        if sol.objective_value >= incumbent - prune_gap():
            return
        j = _most_fractional(sol.x, binary)
        if j is None:
            x, value = _polish(lp, lower, upper, sol.x, binary)
            if value < incumbent:
                incumbent, incumbent_x = value, x
                history.append(value)
            return
        heapq.heappush(heap, (sol.objective_value, -depth, seq, lower, upper, sol.x))
        seq += 1

    evaluate(lp.lower.copy(), lp.upper.copy(), 0)
    while heap:
        bound, neg_depth, _, lower, upper, x = heapq.heappop(heap)
        if bound >= incumbent - prune_gap():
            break
        j = _most_fractional(x, binary)
        depth = -neg_depth + 1
        down_hi = upper.copy()
        down_hi[j] = 0.0
        evaluate(lower, down_hi, depth)
        up_lo = lower.copy()
        up_lo[j] = 1.0
        evaluate(up_lo, upper, depth)

    if incumbent_x is None:
        return MipSolution("infeasible", np.full(lp.n, np.nan), math.nan, nodes, history)
    return MipSolution("optimal", incumbent_x, incumbent, nodes, history)


def _polish(lp, lower, upper, x, binary):
    """Fix binaries at their rounded values and re-solve the continuous part."""
    lo = lower.copy()
    hi = upper.copy()
    for j in binary:
        lo[j] = hi[j] = float(round(x[j]))
    sol = solve_lp(lp.with_bounds(lo, hi))
    if sol.optimal:
        return sol.x, sol.objective_value
    xr = x.copy()
    for j in binary:
        xr[j] = float(round(x[j]))
    return xr, float(lp.objective @ xr)

"""Bounded-variable primal simplex for small, dense linear programs.

The dispatch windows solved by this package have a few dozen variables and
rows, so the solver keeps an explicit dense basis inverse and favours
robustness over speed.  Programs are stated as::

    minimize    c @ x
    subject to  rows: a_i @ x  (<= | = | >=)  b_i
                lower <= x <= upper

Bounds may be infinite (``math.inf``).  All quantities are used as given,
without internal rescaling, so the tolerances below are absolute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

INF = math.inf

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 40

RELATIONS = ("<=", "=", ">=")


class LpError(RuntimeError):
    """Raised when a linear program cannot be processed."""


class IterationLimitError(LpError):
    """Raised when the simplex exceeds its iteration budget."""


@dataclass
class Row:
    coefs: dict[int, float]
    relation: str
    rhs: float
    name: str = ""


@dataclass
class LinearProgram:
    """A minimization problem with individually bounded variables."""

    objective: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rows: list[Row] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)

    @property
    def n(self) -> int:
        return self.objective.shape[0]

    def add_row(self, coefs: Mapping[int, float], relation: str, rhs: float, name: str = "") -> int:
        self.rows.append(Row(dict(coefs), relation, float(rhs), name))
        return len(self.rows) - 1

    def validate(self) -> None:
        n = self.n
        if self.objective.ndim != 1:
            raise LpError("objective must be a vector")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise LpError(
                f"dimension mismatch: {n} objective coefficients, "
                f"{self.lower.shape[0]} lower and {self.upper.shape[0]} upper bounds"
            )
        bad = np.flatnonzero(self.lower > self.upper)
        if bad.size:
            j = int(bad[0])
            raise LpError(f"variable {j} has lower bound {self.lower[j]} > upper bound {self.upper[j]}")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)) or np.any(np.isnan(self.objective)):
            raise LpError("NaN in objective or bounds")
        for i, row in enumerate(self.rows):
            if row.relation not in RELATIONS:
                raise LpError(f"row {i} has unknown relation {row.relation!r}")
            for j in row.coefs:
                if not 0 <= j < n:
                    raise LpError(f"row {i} references variable {j}, but n = {n}")

    def dense(self) -> np.ndarray:
        a = np.zeros((len(self.rows), self.n))
        for i, row in enumerate(self.rows):
            for j, v in row.coefs.items():
                a[i, j] += v
        return a

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "LinearProgram":
        """Same rows and objective, different bounds (rows are shared, not copied)."""
        return LinearProgram(self.objective, lower, upper, self.rows)

    def dump(self) -> str:
        """Plain-text dump, one item per line (see README for the format)."""
        lines = [f"n {self.n}", "min " + " ".join(_fmt(v) for v in self.objective)]
        for j in range(self.n):
            lines.append(f"var {j} {_fmt(self.lower[j])} {_fmt(self.upper[j])}")
        for i, row in enumerate(self.rows):
            terms = " ".join(f"{j}:{_fmt(v)}" for j, v in sorted(row.coefs.items()))
            label = row.name or f"r{i}"
            lines.append(f"row {label} {row.relation} {_fmt(row.rhs)} {terms}".rstrip())
        return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    return repr(float(v))


def parse_dump(text: str) -> LinearProgram:
    """Inverse of :meth:`LinearProgram.dump`."""
    objective = lower = upper = None
    rows: list[Row] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "n":
                n = int(parts[1])
                lower = np.zeros(n)
                upper = np.zeros(n)
            elif parts[0] == "min":
                objective = np.array([float(v) for v in parts[1:]])
            elif parts[0] == "var":
                j = int(parts[1])
                lower[j] = float(parts[2])
                upper[j] = float(parts[3])
            elif parts[0] == "row":
                coefs = {}
                for term in parts[4:]:
                    j, v = term.split(":")
                    coefs[int(j)] = float(v)
                rows.append(Row(coefs, parts[2], float(parts[3]), parts[1]))
            else:
                raise ValueError(f"unknown record {parts[0]!r}")
        except (ValueError, IndexError, TypeError) as exc:
            raise LpError(f"line {lineno}: {exc}") from exc
    if objective is None or lower is None:
        raise LpError("dump is missing the 'n' or 'min' record")
    return LinearProgram(objective, lower, upper, rows)


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray
    objective_value: float
    iterations: int = 0
    duals: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Simplex:
    """Working state of one solve: columns are structurals, slacks, artificials."""

    def __init__(self, cols, b, lo, hi, x, basis, n_rows, max_iter, bland_after):
        self.cols = cols
        self.b = b
        self.lo = lo
        self.hi = hi
        self.x = x
        self.basis = basis
        self.m = n_rows
        self.is_basic = np.zeros(cols.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.max_iter = max_iter
        self.bland_after = bland_after
        self.iterations = 0
        self.refactor()

    def refactor(self):
        self.binv = np.linalg.inv(self.cols[:, self.basis])
        nonbasic = ~self.is_basic
        rhs = self.b - self.cols[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs

    def run(self, cost: np.ndarray) -> str:
        since_refactor = 0
        while True:
            if self.iterations >= self.max_iter:
                raise IterationLimitError(
                    f"simplex did not converge within {self.max_iter} iterations"
                )
            y = cost[self.basis] @ self.binv
            d = cost - y @ self.cols
            x, lo, hi = self.x, self.lo, self.hi
            can_up = (d < -OPT_TOL) & (x < hi - 1e-12)
            can_down = (d > OPT_TOL) & (x > lo + 1e-12)
            eligible = (can_up | can_down) & ~self.is_basic
            candidates = np.flatnonzero(eligible)
            if candidates.size == 0:
                self.duals = y
                return "optimal"
            bland = self.iterations >= self.bland_after
            if bland:
                q = int(candidates[0])
            else:
                q = int(candidates[np.argmax(np.abs(d[candidates]))])
            direction = 1.0 if d[q] < 0 else -1.0

            alpha = self.binv @ self.cols[:, q]
            delta = -direction * alpha
            xb = x[self.basis]
            lob = lo[self.basis]
            hib = hi[self.basis]
            ratios = np.full(self.m, INF)
            dec = delta < -PIVOT_TOL
            inc = delta > PIVOT_TOL
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios[dec] = (xb[dec] - lob[dec]) / -delta[dec]
                ratios[inc] = (hib[inc] - xb[inc]) / delta[inc]
            ratios = np.where(np.isnan(ratios), INF, np.maximum(ratios, 0.0))
            theta_row = ratios.min() if self.m else INF
            theta_flip = hi[q] - lo[q]

            if theta_flip <= theta_row:
                if theta_flip == INF:
                    return "unbounded"
                x[q] = hi[q] if direction > 0 else lo[q]
                x[self.basis] = xb + delta * theta_flip
                self.iterations += 1
                continue

            ties = np.flatnonzero(ratios <= theta_row + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            theta = ratios[r]
            leaving = self.basis[r]
            x[self.basis] = xb + delta * theta
            x[q] = x[q] + direction * theta
            x[leaving] = lo[leaving] if delta[r] < 0 else hi[leaving]

            self.basis[r] = q
            self.is_basic[leaving] = False
            self.is_basic[q] = True
            pivot_row = self.binv[r] / alpha[r]
            self.binv -= np.outer(alpha, pivot_row)
            self.binv[r] = pivot_row
            self.iterations += 1
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0


def _nonbasic_start(lo: float, hi: float) -> float:
    if lo > -INF:
        return lo
    if hi < INF:
        return hi
    return 0.0


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` exactly (up to floating point) with a two-phase simplex."""
    lp.validate()
    n = lp.n
    a_full = lp.dense()
    rhs_full = np.array([row.rhs for row in lp.rows], dtype=float)
    rel_full = [row.relation for row in lp.rows]

    # Empty rows are checked once and dropped.
    keep = []
    for i, row in enumerate(lp.rows):
        if np.any(a_full[i] != 0.0):
            keep.append(i)
            continue
        r, b = row.relation, row.rhs
        ok = (r == "<=" and 0.0 <= b + FEAS_TOL) or (r == ">=" and 0.0 >= b - FEAS_TOL) or (
            r == "=" and abs(b) <= FEAS_TOL
        )
        if not ok:
            return LpSolution("infeasible", np.full(n, np.nan), math.nan)
    a = a_full[keep]
    b = rhs_full[keep]
    rels = [rel_full[i] for i in keep]
    m = len(keep)

    x_struct = np.array([_nonbasic_start(lp.lower[j], lp.upper[j]) for j in range(n)])
    slack_lo = np.array([0.0 if r in ("<=", "=") else -INF for r in rels])
    slack_hi = np.array([0.0 if r in (">=", "=") else INF for r in rels])
    residual = b - a @ x_struct if m else np.zeros(0)

    slack_x = np.clip(residual, slack_lo, slack_hi)
    gap = residual - slack_x
    needs_art = np.abs(gap) > 0.0
    art_rows = np.flatnonzero(needs_art)
    k = art_rows.size

    cols = np.zeros((m, n + m + k))
    cols[:, :n] = a
    cols[:, n : n + m] = np.eye(m)
    for idx, i in enumerate(art_rows):
        cols[i, n + m + idx] = 1.0 if gap[i] > 0 else -1.0

    lo = np.concatenate([lp.lower, slack_lo, np.zeros(k)])
    hi = np.concatenate([lp.upper, slack_hi, np.full(k, INF)])
    x = np.concatenate([x_struct, slack_x, np.abs(gap[art_rows])])

    basis = np.empty(m, dtype=int)
    for i in range(m):
        basis[i] = n + i
    for idx, i in enumerate(art_rows):
        basis[i] = n + m + idx

    size = n + m
    max_iter = 50 * max(size, 1)
    bland_after = 10 * max(size, 1)

    if m == 0:
        # Bound-only program: every variable sits at its cheaper bound.
        x = x_struct.copy()
        for j in range(n):
            c = lp.objective[j]
            if c < 0:
                if lp.upper[j] == INF:
                    return LpSolution("unbounded", np.full(n, np.nan), -INF)
                x[j] = lp.upper[j]
            elif c > 0:
                if lp.lower[j] == -INF:
                    return LpSolution("unbounded", np.full(n, np.nan), -INF)
                x[j] = lp.lower[j]
        return LpSolution("optimal", x, float(lp.objective @ x), 0, np.zeros(len(lp.rows)))

    sx = _Simplex(cols, b, lo, hi, x, basis, m, max_iter, bland_after)

    if k:
        phase1_cost = np.zeros(n + m + k)
        phase1_cost[n + m :] = 1.0
        sx.run(phase1_cost)
        sx.refactor()
        infeasibility = float(sx.x[n + m :].sum())
        if infeasibility > FEAS_TOL:
            return LpSolution("infeasible", np.full(n, np.nan), math.nan, sx.iterations)
        sx.hi[n + m :] = 0.0
        nonbasic_art = ~sx.is_basic[n + m :]
        sx.x[n + m :][nonbasic_art] = 0.0
        sx.refactor()

    cost = np.concatenate([lp.objective, np.zeros(m + k)])
    status = sx.run(cost)
    if status == "unbounded":
        return LpSolution("unbounded", np.full(n, np.nan), -INF, sx.iterations)
    sx.refactor()

    xs = np.clip(sx.x[:n], lp.lower, lp.upper)
    duals = np.zeros(len(lp.rows))
    duals[keep] = sx.duals
    return LpSolution("optimal", xs, float(lp.objective @ xs), sx.iterations, duals)


def max_violation(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest absolute bound or row violation of ``x``."""
    worst = float(max(np.max(lp.lower - x, initial=0.0), np.max(x - lp.upper, initial=0.0)))
    for row in lp.rows:
        lhs = sum(v * x[j] for j, v in row.coefs.items())
        if row.relation == "<=":
            worst = max(worst, lhs - row.rhs)
        elif row.relation == ">=":
            worst = max(worst, row.rhs - lhs)
        else:
            worst = max(worst, abs(lhs - row.rhs))
    return worst


def from_arrays(
    c: Iterable[float],
    bounds: Iterable[tuple[float, float]],
    rows: Iterable[tuple[Iterable[float], str, float]] = (),
) -> LinearProgram:
    """Convenience constructor from dense row coefficient lists."""
    bounds = list(bounds)
    lp = LinearProgram(np.asarray(list(c), dtype=float), [b[0] for b in bounds], [b[1] for b in bounds])
    for coefs, rel, rhs in rows:
        lp.add_row({j: float(v) for j, v in enumerate(coefs) if v != 0}, rel, rhs)
    return lp

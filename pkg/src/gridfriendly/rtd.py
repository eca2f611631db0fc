"""Multi-interval economic dispatch and the rolling-horizon (MPC) step.

One MPC run builds a mixed binary program over the next ``model.window``
dispatch intervals, solves it with :func:`milp.solve_mip`, and implements
only the first interval.  Sign conventions: every power variable is a
nonnegative magnitude; direction is carried by role (charge/discharge,
buy/sell).  Signed quantities derived from them use import-positive for the
tie-line and discharge-positive for storage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .lp import LinearProgram
from .milp import MixedProgram, MipSolution, solve_mip
from .model import MicrogridModel
from .scenario import ForecastSeries

logger = logging.getLogger(__name__)

CHECK_TOL = 1e-6
SNAP_TOL = 1e-9

# Row families in build order; dispatch-failure diagnostics report the first
# family (in this order) that needs slack.
FAMILIES = (
    "balance",
    "energy",
    "reserve",
    "ramp",
    "ess_charge_rate",
    "ess_discharge_rate",
    "ess_status",
    "grid_buy_limit",
    "grid_sell_limit",
    "grid_status",
)


class DispatchError(ValueError):
    """The dispatch problem was posed with invalid inputs."""


class DispatchFailure(RuntimeError):
    """No dispatch satisfies the window's constraints."""

    def __init__(self, interval: int, family: str, offset: int, amount: float):
        self.interval = interval
        self.family = family
        self.offset = offset
        self.amount = amount
        super().__init__(
            f"dispatch infeasible for interval {interval}: constraint family '{family}' "
            f"at window offset {offset} needs {amount:.6g} of slack"
        )


@dataclass(frozen=True)
class _Layout:
    T: int
    G: int
    S: int

    @property
    def per(self) -> int:
        return self.G + 5 * self.S + 4

    @property
    def n(self) -> int:
        return self.T * self.per

    def gen(self, t, g):
        return t * self.per + g

    def charge(self, t, s):
        return t * self.per + self.G + s

    def discharge(self, t, s):
        return t * self.per + self.G + self.S + s

    def buy(self, t):
        return t * self.per + self.G + 2 * self.S

    def sell(self, t):
        return t * self.per + self.G + 2 * self.S + 1

    def energy(self, t, s):
        return t * self.per + self.G + 2 * self.S + 2 + s

    def u_charge(self, t, s):
        return t * self.per + self.G + 3 * self.S + 2 + s

    def u_discharge(self, t, s):
        return t * self.per + self.G + 4 * self.S + 2 + s

    def u_buy(self, t):
        return t * self.per + self.G + 5 * self.S + 2

    def u_sell(self, t):
        return t * self.per + self.G + 5 * self.S + 3

    def binaries(self) -> list[int]:
        out = []
        for t in range(self.T):
            out += [self.u_charge(t, s) for s in range(self.S)]
            out += [self.u_discharge(t, s) for s in range(self.S)]
            out += [self.u_buy(t), self.u_sell(t)]
        return out


@dataclass
class DispatchProgram(MixedProgram):
    layout: _Layout = None
    start: int = 0
    families: list[tuple[str, int]] = field(default_factory=list)  # per row: (family, window offset)

    @property
    def continuous_count(self) -> int:
        return self.lp.n - len(self.binary)


@dataclass(eq=False)
class DispatchSolution:
    start: int
    p_gen: np.ndarray  # (T, G)
    p_charge: np.ndarray  # (T, S)
    p_discharge: np.ndarray
    u_charge: np.ndarray
    u_discharge: np.ndarray
    p_buy: np.ndarray  # (T,)
    p_sell: np.ndarray
    u_buy: np.ndarray
    u_sell: np.ndarray
    energy: np.ndarray  # (T, S), end-of-interval
    objective: float
    nodes: int = 0

    @property
    def length(self) -> int:
        return self.p_buy.shape[0]

    @property
    def tie_line(self) -> np.ndarray:
        return self.p_buy - self.p_sell


@dataclass(eq=False)
class DispatchTarget:
    """First-interval slice of a window solution, the setpoints actually implemented."""

    interval: int
    p_gen: np.ndarray
    p_charge: np.ndarray
    p_discharge: np.ndarray
    p_buy: float
    p_sell: float
    energy_end: np.ndarray
    e_anchor: np.ndarray | None = None
    plan: DispatchSolution | None = None
    anchor_clamped: bool = False

    @property
    def tie_line(self) -> float:
        return tie_line_target(self)

    @property
    def ess_net(self) -> np.ndarray:
        """Scheduled storage power per unit, discharge positive."""
        return self.p_discharge - self.p_charge

    @property
    def generation(self) -> float:
        return float(self.p_gen.sum())


def tie_line_target(target: DispatchTarget) -> float:
    """Scheduled tie-line exchange, import positive."""
    return float(target.p_buy - target.p_sell)


def _ramp_band(model: MicrogridModel, g: int) -> float:
    return model.dt_hours * model.generators[g].ramp


def build_dispatch(
    model: MicrogridModel,
    forecast: ForecastSeries,
    start: int,
    e_start,
    prev_setpoints=None,
) -> DispatchProgram:
    """Mixed binary program for the window ``forecast`` starting at interval ``start``.

    ``forecast`` holds exactly the window's intervals.  ``prev_setpoints``
    (generator outputs implemented in interval ``start - 1``) anchor the
    first ramp constraint.
    """
    G, S, T = len(model.generators), len(model.storage), len(forecast)
    if T < 1:
        raise DispatchError("empty dispatch window")
    if start + T > model.horizon:
        raise DispatchError(f"window {start}..{start + T - 1} extends past the horizon {model.horizon}")
    e_start = np.asarray(e_start, dtype=float).reshape(S)
    for s, ess in enumerate(model.storage):
        if not ess.e_low - 1e-9 <= e_start[s] <= ess.e_high + 1e-9:
            raise DispatchError(
                f"{ess.id}: starting energy {e_start[s]} outside the dispatchable band "
                f"[{ess.e_low}, {ess.e_high}]"
            )
    commit = model.commitment_matrix()
    dt = model.dt_hours
    lay = _Layout(T, G, S)
    n = lay.n
    cost = np.zeros(n)
    lo = np.zeros(n)
    hi = np.zeros(n)
    gmax = model.grid.p_max

    for t in range(T):
        k = start + t
        for g, gen in enumerate(model.generators):
            j = lay.gen(t, g)
            cost[j] = dt * gen.linear_cost
            lo[j] = gen.p_min * commit[k, g]
            hi[j] = gen.p_max * commit[k, g]
        for s, ess in enumerate(model.storage):
            hi[lay.charge(t, s)] = ess.p_charge_max
            hi[lay.discharge(t, s)] = ess.p_discharge_max
            lo[lay.energy(t, s)] = ess.e_low
            hi[lay.energy(t, s)] = ess.e_high
            hi[lay.u_charge(t, s)] = 1.0
            hi[lay.u_discharge(t, s)] = 1.0
        cost[lay.buy(t)] = dt * model.grid.buy_price[k]
        cost[lay.sell(t)] = -dt * model.grid.sell_price[k]
        hi[lay.buy(t)] = gmax
        hi[lay.sell(t)] = gmax
        hi[lay.u_buy(t)] = 1.0
        hi[lay.u_sell(t)] = 1.0

    lp = LinearProgram(cost, lo, hi)
    families: list[tuple[str, int]] = []

    def row(coefs, rel, rhs, family, t):
        lp.add_row(coefs, rel, rhs, f"{family}@{t}")
        families.append((family, t))

    prev = None if prev_setpoints is None else np.asarray(prev_setpoints, dtype=float).reshape(G)
    for t in range(T):
        k = start + t
        coefs = {lay.gen(t, g): 1.0 for g in range(G)}
        for s in range(S):
            coefs[lay.discharge(t, s)] = 1.0
            coefs[lay.charge(t, s)] = -1.0
        coefs[lay.buy(t)] = 1.0
        coefs[lay.sell(t)] = -1.0
        row(coefs, "=", forecast.net_load[t], "balance", t)

    for t in range(T):
        for s in range(S):
            coefs = {lay.energy(t, s): 1.0, lay.discharge(t, s): dt, lay.charge(t, s): -dt}
            if t == 0:
                row(coefs, "=", e_start[s], "energy", t)
            else:
                coefs[lay.energy(t - 1, s)] = -1.0
                row(coefs, "=", 0.0, "energy", t)

    for t in range(T):
        k = start + t
        coefs = {lay.gen(t, g): -1.0 for g in range(G)}
        coefs[lay.buy(t)] = -1.0
        coefs[lay.sell(t)] = 1.0
        headroom = gmax + sum(gen.p_max * commit[k, g] for g, gen in enumerate(model.generators))
        row(coefs, ">=", model.reserve_fraction * forecast.load[t] - headroom, "reserve", t)

    for t in range(T):
        k = start + t
        for g, gen in enumerate(model.generators):
            band = _ramp_band(model, g)
            if t == 0:
                active = prev is not None and k > 0 and commit[k - 1, g] and commit[k, g]
                anchor = prev[g] if active else 0.0
                limit = band if active else gen.p_max
                coefs = {lay.gen(0, g): 1.0}
                row(coefs, "<=", anchor + limit, "ramp", t)
                row(coefs, ">=", anchor - limit, "ramp", t)
            else:
                # ramping is not constrained across a commitment change
                active = commit[k - 1, g] and commit[k, g]
                limit = band if active else gen.p_max
                coefs = {lay.gen(t, g): 1.0, lay.gen(t - 1, g): -1.0}
                row(coefs, "<=", limit, "ramp", t)
                row(coefs, ">=", -limit, "ramp", t)

    for t in range(T):
        for s, ess in enumerate(model.storage):
            for family, pj, uj, p_lo, p_hi in (
                ("ess_charge_rate", lay.charge(t, s), lay.u_charge(t, s), ess.p_charge_min, ess.p_charge_max),
                ("ess_discharge_rate", lay.discharge(t, s), lay.u_discharge(t, s), ess.p_discharge_min, ess.p_discharge_max),
            ):
                row({pj: 1.0, uj: -(p_hi - ess.delta_p)}, "<=", 0.0, family, t)
                row({pj: 1.0, uj: -p_lo}, ">=", 0.0, family, t)
            row({lay.u_charge(t, s): 1.0, lay.u_discharge(t, s): 1.0}, "=", 1.0, "ess_status", t)

    for t in range(T):
        row({lay.buy(t): 1.0, lay.u_buy(t): -gmax}, "<=", 0.0, "grid_buy_limit", t)
        row({lay.sell(t): 1.0, lay.u_sell(t): -gmax}, "<=", 0.0, "grid_sell_limit", t)
        row({lay.u_buy(t): 1.0, lay.u_sell(t): 1.0}, "<=", 1.0, "grid_status", t)

    return DispatchProgram(lp, tuple(lay.binaries()), layout=lay, start=start, families=families)


def decode(prog: DispatchProgram, sol: MipSolution) -> DispatchSolution:
    lay = prog.layout
    x = np.where(np.abs(sol.x) < SNAP_TOL, 0.0, sol.x)
    T, G, S = lay.T, lay.G, lay.S

    def grid(fn, width):
        return np.array([[x[fn(t, i)] for i in range(width)] for t in range(T)]).reshape(T, width)

    return DispatchSolution(
        start=prog.start,
        p_gen=grid(lay.gen, G),
        p_charge=grid(lay.charge, S),
        p_discharge=grid(lay.discharge, S),
        u_charge=np.round(grid(lay.u_charge, S)),
        u_discharge=np.round(grid(lay.u_discharge, S)),
        p_buy=np.array([x[lay.buy(t)] for t in range(T)]),
        p_sell=np.array([x[lay.sell(t)] for t in range(T)]),
        u_buy=np.round([x[lay.u_buy(t)] for t in range(T)]),
        u_sell=np.round([x[lay.u_sell(t)] for t in range(T)]),
        energy=grid(lay.energy, S),
        objective=sol.objective_value,
        nodes=sol.nodes_explored,
    )


def _diagnose(prog: DispatchProgram, interval: int) -> DispatchFailure:
    """Find the first constraint family that must be relaxed to restore feasibility."""
    lp = prog.lp
    rows = lp.rows
    extra_lo, extra_hi, owners = [], [], []
    elastic = LinearProgram(np.zeros(lp.n), lp.lower, lp.upper)
    for i, r in enumerate(rows):
        coefs = dict(r.coefs)
        signs = {"<=": (-1.0,), ">=": (1.0,), "=": (1.0, -1.0)}[r.relation]
        for sign in signs:
            coefs[lp.n + len(owners)] = sign
            owners.append(i)
            extra_lo.append(0.0)
            extra_hi.append(float("inf"))
        elastic.rows.append(type(r)(coefs, r.relation, r.rhs, r.name))
    m = len(owners)
    elastic.objective = np.concatenate([np.zeros(lp.n), np.ones(m)])
    elastic.lower = np.concatenate([lp.lower, extra_lo])
    elastic.upper = np.concatenate([lp.upper, extra_hi])
    sol = solve_mip(MixedProgram(elastic, prog.binary))
    if not sol.optimal:
        return DispatchFailure(interval, "bounds", 0, float("nan"))
    slack = sol.x[lp.n :]
    need: dict[int, float] = {}
    for k, i in enumerate(owners):
        need[i] = need.get(i, 0.0) + slack[k]
    violated = [i for i in range(len(rows)) if need.get(i, 0.0) > 1e-7]
    if not violated:
        return DispatchFailure(interval, "unknown", 0, 0.0)
    order = {f: k for k, f in enumerate(FAMILIES)}
    first = min(violated, key=lambda i: (order[prog.families[i][0]], prog.families[i][1], i))
    family, offset = prog.families[first]
    return DispatchFailure(interval + offset, family, offset, need[first])


def solve_dispatch(
    model: MicrogridModel, forecast: ForecastSeries, start: int, e_start, prev_setpoints=None
) -> DispatchSolution:
    prog = build_dispatch(model, forecast, start, e_start, prev_setpoints)
    sol = solve_mip(prog)
    if not sol.optimal:
        raise _diagnose(prog, start)
    return decode(prog, sol)


def clamp_anchor(model: MicrogridModel, e_measured) -> tuple[np.ndarray, bool]:
    """Clamp measured storage energy into the dispatchable band."""
    e = np.asarray(e_measured, dtype=float).reshape(len(model.storage)).copy()
    clamped = False
    for s, ess in enumerate(model.storage):
        value = min(max(e[s], ess.e_low), ess.e_high)
        if value != e[s]:
            clamped = True
            e[s] = value
    return e, clamped


def run_mpc_step(
    model: MicrogridModel, forecast: ForecastSeries, t: int, e_measured, prev_setpoints=None
) -> DispatchTarget:
    """Solve the window starting at interval ``t`` and keep its first interval."""
    horizon = len(forecast)
    if not 0 <= t < horizon:
        raise DispatchError(f"interval {t} outside the horizon 0..{horizon - 1}")
    length = min(model.window, horizon - t)
    e_anchor, clamped = clamp_anchor(model, e_measured)
    if clamped:
        logger.info("interval %d: measured energy %s clamped to %s for dispatch", t, e_measured, e_anchor)
    plan = solve_dispatch(model, forecast.window(t, length), t, e_anchor, prev_setpoints)
    return DispatchTarget(
        interval=t,
        p_gen=plan.p_gen[0].copy(),
        p_charge=plan.p_charge[0].copy(),
        p_discharge=plan.p_discharge[0].copy(),
        p_buy=float(plan.p_buy[0]),
        p_sell=float(plan.p_sell[0]),
        energy_end=plan.energy[0].copy(),
        e_anchor=e_anchor,
        plan=plan,
        anchor_clamped=clamped,
    )


def check_dispatch(
    model: MicrogridModel,
    forecast: ForecastSeries,
    sol: DispatchSolution,
    e_start,
    prev_setpoints=None,
    tol: float = CHECK_TOL,
) -> list[str]:
    """Restate every dispatch constraint directly and list the violations."""
    problems: list[str] = []
    commit = model.commitment_matrix()
    dt = model.dt_hours
    gmax = model.grid.p_max
    e_prev = np.asarray(e_start, dtype=float)

    def fail(cond, msg):
        if not cond:
            problems.append(msg)

    for t in range(sol.length):
        k = sol.start + t
        gen = sol.p_gen[t]
        ch, dis = sol.p_charge[t], sol.p_discharge[t]
        buy, sell = sol.p_buy[t], sol.p_sell[t]
        balance = buy + gen.sum() + forecast.renewable[t] + dis.sum() - sell - forecast.load[t] - ch.sum()
        fail(abs(balance) <= tol, f"t={k}: power balance off by {balance}")
        for s, ess in enumerate(model.storage):
            e_expect = e_prev[s] - dt * (dis[s] - ch[s])
            fail(abs(sol.energy[t, s] - e_expect) <= tol, f"t={k} {ess.id}: energy recursion off")
            fail(ess.e_low - tol <= sol.energy[t, s] <= ess.e_high + tol, f"t={k} {ess.id}: energy in withheld band")
            uc, ud = sol.u_charge[t, s], sol.u_discharge[t, s]
            fail(uc in (0, 1) and ud in (0, 1), f"t={k} {ess.id}: non-binary status")
            fail(uc + ud == 1, f"t={k} {ess.id}: charge/discharge statuses do not sum to 1")
            fail(uc * ess.p_charge_min - tol <= ch[s] <= uc * (ess.p_charge_max - ess.delta_p) + tol,
                 f"t={k} {ess.id}: charge power {ch[s]} outside withheld limits")
            fail(ud * ess.p_discharge_min - tol <= dis[s] <= ud * (ess.p_discharge_max - ess.delta_p) + tol,
                 f"t={k} {ess.id}: discharge power {dis[s]} outside withheld limits")
            fail(min(ch[s], dis[s]) <= tol, f"t={k} {ess.id}: simultaneous charge and discharge")
        e_prev = sol.energy[t]
        headroom = gmax - buy + sell + sum(
            g.p_max * commit[k, i] - gen[i] for i, g in enumerate(model.generators)
        )
        fail(headroom >= model.reserve_fraction * forecast.load[t] - tol, f"t={k}: reserve short")
        for i, g in enumerate(model.generators):
            fail(g.p_min * commit[k, i] - tol <= gen[i] <= g.p_max * commit[k, i] + tol,
                 f"t={k} {g.id}: output {gen[i]} outside limits")
            band = _ramp_band(model, i) + tol
            if t > 0:
                if commit[k - 1, i] and commit[k, i]:
                    fail(abs(gen[i] - sol.p_gen[t - 1, i]) <= band, f"t={k} {g.id}: ramp violated")
            elif prev_setpoints is not None and k > 0 and commit[k - 1, i] and commit[k, i]:
                fail(abs(gen[i] - prev_setpoints[i]) <= band, f"t={k} {g.id}: ramp from previous setpoint violated")
        fail(-tol <= buy <= sol.u_buy[t] * gmax + tol, f"t={k}: purchase outside tie-line limit")
        fail(-tol <= sell <= sol.u_sell[t] * gmax + tol, f"t={k}: sale outside tie-line limit")
        fail(sol.u_buy[t] + sol.u_sell[t] <= 1, f"t={k}: buy and sell statuses both on")
        fail(min(buy, sell) <= tol, f"t={k}: simultaneous buy and sell")
    return problems

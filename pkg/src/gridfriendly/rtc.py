"""Four-second battery control that holds the tie-line at its dispatched value.

Generators stay at their dispatch setpoints.  Each tick the storage power
needed to close the power balance at the scheduled tie-line exchange is
computed, then limited first by the full (un-withheld) power ratings and
then by the energy limits.  Whatever the battery cannot cover flows over
the tie-line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import EnergyStorage, MicrogridModel
from .rtd import DispatchTarget

TIE_TOL = 1e-3  # kW


@dataclass(frozen=True)
class ControlTick:
    tick: int
    net_load: float
    required: float  # total storage power needed, discharge positive
    applied: float  # total storage power delivered
    soc_after: tuple[float, ...]
    tie_line: float
    target: float
    mitigated: bool
    clamped: bool
    grid_limit_violated: bool = False

    @property
    def soc_total(self) -> float:
        return float(sum(self.soc_after))


@dataclass
class ControlTrace:
    interval: int
    target: float
    ticks: list[ControlTick] = field(default_factory=list)

    @property
    def count(self) -> int:
        """Ticks on which the tie-line left its dispatched value."""
        return sum(not tk.mitigated for tk in self.ticks)

    def __len__(self) -> int:
        return len(self.ticks)

    @property
    def tie_line(self) -> np.ndarray:
        return np.array([tk.tie_line for tk in self.ticks])

    @property
    def applied(self) -> np.ndarray:
        return np.array([tk.applied for tk in self.ticks])

    @property
    def soc(self) -> np.ndarray:
        return np.array([tk.soc_total for tk in self.ticks])


def _power_limits(ess: EnergyStorage) -> tuple[float, float]:
    return -ess.p_charge_max, ess.p_discharge_max


def _energy_limits(ess: EnergyStorage, soc: float, dtc: float) -> tuple[float, float]:
    return (soc - ess.e_max) / dtc, (soc - ess.e_min) / dtc


def _snap_minimum(ess: EnergyStorage, p: float, lo: float, hi: float) -> float:
    """Respect nonzero minimum charge/discharge ratings: 0 or at least the minimum."""
    if 0.0 < p < ess.p_discharge_min:
        up = ess.p_discharge_min
        return up if (p >= up / 2 and up <= hi) else 0.0
    if -ess.p_charge_min < p < 0.0:
        down = -ess.p_charge_min
        return down if (p <= down / 2 and down >= lo) else 0.0
    return p


def _clamp_unit(ess: EnergyStorage, p: float, soc: float, dtc: float) -> tuple[float, float, bool]:
    """Limit one unit's power; returns (power, soc after, clamped)."""
    p_lo, p_hi = _power_limits(ess)
    applied = min(max(p, p_lo), p_hi)
    e_lo, e_hi = _energy_limits(ess, soc, dtc)
    landed = None
    if applied > e_hi:
        applied, landed = e_hi, ess.e_min
    elif applied < e_lo:
        applied, landed = e_lo, ess.e_max
    applied = _snap_minimum(ess, applied, max(p_lo, e_lo), min(p_hi, e_hi))
    soc_after = landed if landed is not None and applied in (e_hi, e_lo) else soc - dtc * applied
    soc_after = min(max(soc_after, ess.e_min), ess.e_max)
    return applied, soc_after, applied != p


def _allocate(model: MicrogridModel, required: float, scheduled: np.ndarray, soc: np.ndarray) -> np.ndarray:
    """Split the required total around each unit's schedule, by remaining headroom."""
    dtc = model.dtc_hours
    units = model.storage
    if len(units) == 1:
        return np.array([required])
    lo = np.empty(len(units))
    hi = np.empty(len(units))
    for s, ess in enumerate(units):
        p_lo, p_hi = _power_limits(ess)
        e_lo, e_hi = _energy_limits(ess, soc[s], dtc)
        lo[s], hi[s] = max(p_lo, e_lo), min(p_hi, e_hi)
    base = np.clip(scheduled, lo, hi)
    extra = required - base.sum()
    room = (hi - base) if extra > 0 else (base - lo)
    room = np.maximum(room, 0.0)
    total = room.sum()
    if total <= 0.0:
        return base
    share = extra * room / total
    return base + share


def control_tick(
    model: MicrogridModel, target: DispatchTarget, net_load: float, soc, tick: int = 0
) -> ControlTick:
    """One control step: storage follows the net-load so the tie-line stays put."""
    soc = np.asarray(soc, dtype=float).reshape(len(model.storage))
    dtc = model.dtc_hours
    tie_target = target.tie_line
    required = float(net_load - target.generation - tie_target)
    requests = _allocate(model, required, target.ess_net, soc)
    applied = np.empty_like(soc)
    soc_after = np.empty_like(soc)
    clamped = False
    for s, ess in enumerate(model.storage):
        applied[s], soc_after[s], hit = _clamp_unit(ess, float(requests[s]), float(soc[s]), dtc)
        clamped |= hit
    total = float(applied.sum()) if len(applied) else 0.0
    if clamped or total != required:
        tie = float(net_load - target.generation - total)
    else:
        tie = tie_target
    return ControlTick(
        tick=tick,
        net_load=float(net_load),
        required=required,
        applied=total,
        soc_after=tuple(float(v) for v in soc_after),
        tie_line=tie,
        target=tie_target,
        mitigated=abs(tie - tie_target) <= TIE_TOL,
        clamped=clamped or total != required,
        grid_limit_violated=abs(tie) > model.grid.p_max,
    )


def run_control_interval(
    model: MicrogridModel, target: DispatchTarget, net_loads, soc_in, first_tick: int = 0
) -> tuple[ControlTrace, np.ndarray]:
    """Run every control tick of one dispatch interval."""
    soc = np.asarray(soc_in, dtype=float).reshape(len(model.storage))
    trace = ControlTrace(target.interval, target.tie_line)
    for c, value in enumerate(np.asarray(net_loads, dtype=float)):
        tk = control_tick(model, target, value, soc, first_tick + c)
        trace.ticks.append(tk)
        soc = np.array(tk.soc_after)
    return trace, soc


def follow_schedule_tick(
    model: MicrogridModel, target: DispatchTarget, net_load: float, soc, tick: int = 0
) -> ControlTick:
    """Counterfactual tick without real-time control: storage holds its schedule.

    The scheduled power is still kept inside the physical energy limits; the
    tie-line takes every deviation.
    """
    soc = np.asarray(soc, dtype=float).reshape(len(model.storage))
    dtc = model.dtc_hours
    applied = np.empty_like(soc)
    soc_after = np.empty_like(soc)
    for s, ess in enumerate(model.storage):
        applied[s], soc_after[s], _ = _clamp_unit(ess, float(target.ess_net[s]), float(soc[s]), dtc)
    total = float(applied.sum()) if len(applied) else 0.0
    tie_target = target.tie_line
    required = float(net_load - target.generation - tie_target)
    tie = float(net_load - target.generation - total)
    clamped = total != required
    if not clamped:
        tie = tie_target
    return ControlTick(
        tick=tick,
        net_load=float(net_load),
        required=required,
        applied=total,
        soc_after=tuple(float(v) for v in soc_after),
        tie_line=tie,
        target=tie_target,
        mitigated=abs(tie - tie_target) <= TIE_TOL,
        clamped=clamped,
        grid_limit_violated=abs(tie) > model.grid.p_max,
    )

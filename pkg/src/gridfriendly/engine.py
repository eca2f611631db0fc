"""Closed-loop simulation: dispatch each interval, then control it tick by tick."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .metrics import MetricsReport, baseline_without_rtc, build_report
from .model import MicrogridModel, intervals_per_dispatch
from .rtc import ControlTrace, run_control_interval
from .rtd import DispatchTarget, run_mpc_step
from .scenario import Scenario

logger = logging.getLogger(__name__)


@dataclass
class SimulationResult:
    scenario: Scenario
    targets: list[DispatchTarget] = field(default_factory=list)
    traces: list[ControlTrace] = field(default_factory=list)
    baseline: list[ControlTrace] | None = None
    report: MetricsReport | None = None

    @property
    def final_soc(self) -> np.ndarray:
        return np.array(self.traces[-1].ticks[-1].soc_after)


def simulate(model: MicrogridModel, scenario: Scenario, baseline: bool = True) -> SimulationResult:
    """Run the dispatch/control loop over the scenario horizon."""
    if scenario.horizon > model.horizon:
        raise ValueError(f"scenario has {scenario.horizon} intervals, model prices cover {model.horizon}")
    if scenario.actual.ticks_per_interval != intervals_per_dispatch(model):
        raise ValueError("scenario tick resolution does not match the model's control interval")
    n = intervals_per_dispatch(model)
    result = SimulationResult(scenario)
    soc = np.array([s.e_initial for s in model.storage], dtype=float)
    prev = None
    for t in range(scenario.horizon):
        target = run_mpc_step(model, scenario.forecast, t, soc, prev)
        trace, soc = run_control_interval(model, target, scenario.actual.interval_net_load(t), soc, t * n)
        result.targets.append(target)
        result.traces.append(trace)
        prev = target.p_gen
        logger.debug("interval %d: target %.3f kW, count %d", t, target.tie_line, trace.count)
    if baseline:
        result.baseline = baseline_without_rtc(scenario, result.targets, model)
    result.report = build_report(model, result.traces, result.baseline, scenario.error_level, scenario.seed)
    return result

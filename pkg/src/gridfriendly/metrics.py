"""Fluctuation mitigation rate, tie-line variance and the report tables."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import MicrogridModel, intervals_per_dispatch
from .rtc import ControlTrace, follow_schedule_tick
from .rtd import DispatchTarget
from .scenario import Scenario


class MetricsError(ValueError):
    pass


def fmr(traces: list[ControlTrace]) -> float:
    """Percentage of control time with the tie-line at its dispatched value."""
    total = sum(len(tr) for tr in traces)
    if not traces or total == 0:
        raise MetricsError("no control ticks to evaluate")
    mitigated = total - sum(tr.count for tr in traces)
    return 100.0 * mitigated / total


def interval_variance(trace: ControlTrace) -> float:
    """Population variance of one interval's tie-line samples (kW^2)."""
    samples = trace.tie_line
    if samples.size == 0:
        raise MetricsError(f"interval {trace.interval} has no samples")
    # shift by the first sample so a constant series gives exactly 0
    return float(np.var(samples - samples[0]))


def tie_variance(traces: list[ControlTrace]) -> float:
    """Mean over dispatch intervals of the per-interval tie-line variance."""
    if not traces:
        raise MetricsError("no intervals to evaluate")
    return float(np.mean([interval_variance(tr) for tr in traces]))


def baseline_without_rtc(
    scenario: Scenario, targets: list[DispatchTarget], model: MicrogridModel
) -> list[ControlTrace]:
    """Replay the dispatch targets with storage on its schedule and no real-time control."""
    n = intervals_per_dispatch(model)
    soc = np.array([s.e_initial for s in model.storage], dtype=float)
    traces = []
    for target in targets:
        t = target.interval
        trace = ControlTrace(t, target.tie_line)
        for c, value in enumerate(scenario.actual.interval_net_load(t)):
            tk = follow_schedule_tick(model, target, float(value), soc, t * n + c)
            trace.ticks.append(tk)
            soc = np.array(tk.soc_after)
        traces.append(trace)
    return traces


@dataclass
class IntervalStats:
    interval: int
    label: str
    target: float
    v_with_rtc: float
    v_without_rtc: float
    fmr: float
    fmr_without_rtc: float
    count: int
    tie_min: float
    tie_max: float
    ticks: int


@dataclass
class MetricsReport:
    error_level: float
    seed: int
    intervals: list[IntervalStats] = field(default_factory=list)
    v_with_rtc: float = 0.0
    v_without_rtc: float = 0.0
    fmr: float = 100.0
    fmr_without_rtc: float = 100.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_structured(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_report(
    model: MicrogridModel,
    traces: list[ControlTrace],
    baseline: list[ControlTrace] | None,
    error_level: float = 0.0,
    seed: int = 0,
) -> MetricsReport:
    report = MetricsReport(error_level, seed)
    for k, tr in enumerate(traces):
        base = baseline[k] if baseline is not None else None
        ties = tr.tie_line
        report.intervals.append(
            IntervalStats(
                interval=tr.interval,
                label=model.interval_label(tr.interval),
                target=tr.target,
                v_with_rtc=interval_variance(tr),
                v_without_rtc=interval_variance(base) if base is not None else float("nan"),
                fmr=fmr([tr]),
                fmr_without_rtc=fmr([base]) if base is not None else float("nan"),
                count=tr.count,
                tie_min=float(ties.min()),
                tie_max=float(ties.max()),
                ticks=len(tr),
            )
        )
    report.v_with_rtc = tie_variance(traces)
    report.fmr = fmr(traces)
    if baseline is not None:
        report.v_without_rtc = tie_variance(baseline)
        report.fmr_without_rtc = fmr(baseline)
    else:
        report.v_without_rtc = report.fmr_without_rtc = float("nan")
    return report


def _num(v: float, digits: int) -> str:
    if v != v:
        return "-"
    return f"{v:.{digits}f}"


def format_interval_table(report: MetricsReport) -> str:
    """Per-interval table: variance without/with control, tie-line min/max, FMR."""
    header = ("Time", "v w/o RTC", "v with RTC", "Min kW", "Max kW", "FMR")
    rows = [
        (
            st.label,
            _num(st.v_without_rtc, 2),
            _num(st.v_with_rtc, 4),
            _num(st.tie_min, 3),
            _num(st.tie_max, 3),
            f"{st.fmr:.2f}%",
        )
        for st in report.intervals
    ]
    return _align(header, rows)


def format_scenario_table(reports: list[MetricsReport]) -> str:
    """One row per error level: variance and FMR without and with control."""
    header = ("Error", "v w/o RTC", "FMR w/o RTC", "v with RTC", "FMR with RTC")
    rows = [
        (
            f"{100 * r.error_level:g}%",
            _num(r.v_without_rtc, 2),
            f"{_num(r.fmr_without_rtc, 2)}%",
            _num(r.v_with_rtc, 4),
            f"{r.fmr:.2f}%",
        )
        for r in reports
    ]
    return _align(header, rows)


def _align(header, rows) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(line, widths)) for line in (header, *rows)]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"

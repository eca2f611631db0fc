"""Command line entry point: run scenarios and write traces, reports and figure data.

Usage::

    gridfriendly run [--config FILE] [--errors 0.5,1,5] [--seed 7] [--out runs/]
    gridfriendly figures runs/error_5pct_seed7
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .engine import SimulationResult, simulate
from .lp import LpError
from .metrics import MetricsReport, format_interval_table, format_scenario_table
from .model import ConfigError, MicrogridModel, load_model_file, parse_commitment_csv
from .rtc import ControlTrace
from .rtd import DispatchError, DispatchFailure
from .scenario import DEFAULT_ERROR_LEVELS, SeriesError, load_forecast, make_scenario

logger = logging.getLogger("gridfriendly")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DISPATCH = 3


def data_path(name: str) -> Path:
    """Path of a file shipped in the package's default data set."""
    return Path(str(resources.files("gridfriendly") / "data" / name))


def fmt6(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


@dataclass
class RunSpec:
    config: Path = field(default_factory=lambda: data_path("microgrid.ini"))
    load: Path = field(default_factory=lambda: data_path("load.csv"))
    wind: Path = field(default_factory=lambda: data_path("wind.csv"))
    solar: Path | None = field(default_factory=lambda: data_path("solar.csv"))
    commitment: Path | None = None
    errors: tuple[float, ...] = DEFAULT_ERROR_LEVELS  # fractions
    seeds: tuple[int, ...] = (0,)  # one shared seed, or one per error level
    horizon: tuple[int, int] | None = None
    out: Path = Path("runs")
    baseline: bool = True
    figures: bool = False
    windows: bool = False

    def __post_init__(self):
        if any(e < 0 for e in self.errors):
            raise ConfigError("errors: error levels must be >= 0")
        if not self.errors:
            raise ConfigError("errors: at least one error level required")
        if len(self.seeds) not in (1, len(self.errors)):
            raise ConfigError(f"seed: give one seed or {len(self.errors)}, got {len(self.seeds)}")
        if self.horizon is not None and not 0 <= self.horizon[0] < self.horizon[1]:
            raise ConfigError(f"horizon: empty interval range {self.horizon}")

    def scenario_seeds(self) -> tuple[int, ...]:
        # a single seed is shared so every error level scales the same walk
        return self.seeds * len(self.errors) if len(self.seeds) == 1 else self.seeds


def restrict(model: MicrogridModel, start: int, stop: int) -> MicrogridModel:
    """Model whose series cover only intervals ``start..stop-1``."""
    if stop > model.horizon:
        raise ConfigError(f"horizon: {stop} intervals requested, model has {model.horizon}")
    grid = dataclasses.replace(
        model.grid, buy_price=model.grid.buy_price[start:stop], sell_price=model.grid.sell_price[start:stop]
    )
    hh, mm = (int(v) for v in model.start_time.split(":"))
    minutes = (hh * 60 + mm + start * model.dt_dispatch // 60) % 1440
    return dataclasses.replace(
        model,
        grid=grid,
        commitment=tuple(row[start:stop] for row in model.commitment),
        start_time=f"{minutes // 60:02d}:{minutes % 60:02d}",
    )


def scenario_name(error_level: float, seed: int) -> str:
    return f"error_{100 * error_level:g}pct_seed{seed}"


def _read(path: Path, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{what}: cannot read {path}: {exc.strerror}") from None


def prepare(spec: RunSpec):
    """Load the model and forecast named by ``spec``, trimmed to its horizon."""
    model = load_model_file(spec.config)
    if spec.commitment is not None:
        schedule = parse_commitment_csv(
            _read(spec.commitment, "commitment"), [g.id for g in model.generators], model.horizon
        )
        model = dataclasses.replace(model, commitment=schedule)
    forecast = load_forecast(
        _read(spec.load, "load"),
        _read(spec.wind, "wind"),
        _read(spec.solar, "solar") if spec.solar is not None else None,
    )
    start, stop = spec.horizon if spec.horizon is not None else (0, len(forecast))
    if stop > len(forecast):
        raise ConfigError(f"horizon: {stop} intervals requested, forecast has {len(forecast)}")
    model = restrict(model, start, stop)
    return model, forecast.window(start, stop - start)


# --- artifact writers ---------------------------------------------------------


def write_dispatch(path: Path, model: MicrogridModel, result: SimulationResult) -> None:
    commit = model.commitment_matrix()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["interval", "unit", "setpoint_kw", "status"])
        for tg in result.targets:
            t = tg.interval
            plan = tg.plan
            for g, gen in enumerate(model.generators):
                w.writerow([t, gen.id, fmt6(tg.p_gen[g]), int(commit[t, g])])
            for s, ess in enumerate(model.storage):
                w.writerow([t, f"{ess.id}:charge", fmt6(tg.p_charge[s]), int(plan.u_charge[0, s])])
                w.writerow([t, f"{ess.id}:discharge", fmt6(tg.p_discharge[s]), int(plan.u_discharge[0, s])])
            w.writerow([t, "grid:buy", fmt6(tg.p_buy), int(plan.u_buy[0])])
            w.writerow([t, "grid:sell", fmt6(tg.p_sell), int(plan.u_sell[0])])


def write_objectives(path: Path, result: SimulationResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["interval", "window_length", "objective", "nodes"])
        for tg in result.targets:
            w.writerow([tg.interval, tg.plan.length, fmt6(tg.plan.objective), tg.plan.nodes])


def write_windows(path: Path, model: MicrogridModel, result: SimulationResult) -> None:
    """Every interval of every window solution, not only the implemented one."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run_interval", "interval", "unit", "setpoint_kw"])
        for tg in result.targets:
            plan = tg.plan
            for k in range(plan.length):
                t = plan.start + k
                for g, gen in enumerate(model.generators):
                    w.writerow([tg.interval, t, gen.id, fmt6(plan.p_gen[k, g])])
                for s, ess in enumerate(model.storage):
                    w.writerow([tg.interval, t, f"{ess.id}:net", fmt6(plan.p_discharge[k, s] - plan.p_charge[k, s])])
                    w.writerow([tg.interval, t, f"{ess.id}:energy", fmt6(plan.energy[k, s])])
                w.writerow([tg.interval, t, "grid:net", fmt6(plan.p_buy[k] - plan.p_sell[k])])


TICK_COLUMNS = ["tick", "actual_netload_kw", "ess_power_kw", "soc_kwh", "tie_line_kw", "mitigated"]


def write_ticks(path: Path, traces: list[ControlTrace]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TICK_COLUMNS)
        for tr in traces:
            for tk in tr.ticks:
                w.writerow(
                    [tk.tick, fmt6(tk.net_load), fmt6(tk.applied), fmt6(tk.soc_total), fmt6(tk.tie_line), int(tk.mitigated)]
                )


def write_report(directory: Path, model: MicrogridModel, report: MetricsReport) -> None:
    text = format_interval_table(report)
    summary = (
        f"error level {100 * report.error_level:g}%  seed {report.seed}\n"
        f"v with RTC {report.v_with_rtc:.6f} kW^2  FMR with RTC {report.fmr:.2f}%\n"
        f"v without RTC {report.v_without_rtc:.6f} kW^2  FMR without RTC {report.fmr_without_rtc:.2f}%\n\n"
    )
    (directory / "report.txt").write_text(summary + text)
    payload = report.to_dict()
    payload["dt_control"] = model.dt_control
    payload["dt_dispatch"] = model.dt_dispatch
    (directory / "report.structured").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_artifacts(directory: Path, model: MicrogridModel, result: SimulationResult, windows: bool = False) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_dispatch(directory / "dispatch.csv", model, result)
    write_objectives(directory / "objectives.csv", result)
    if windows:
        write_windows(directory / "windows.csv", model, result)
    write_ticks(directory / "ticks.csv", result.traces)
    if result.baseline is not None:
        write_ticks(directory / "baseline_ticks.csv", result.baseline)
    write_report(directory, model, result.report)


def _read_csv(path: Path) -> list[dict[str, str]]:
    if not path.is_file():
        raise FileNotFoundError(f"missing artifact {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_figure_data(directory: str | Path) -> list[Path]:
    """Write figure-ready CSVs from a finished scenario directory.

    ``fig_ess_power.csv``: scheduled vs applied storage power per tick.
    ``fig_tie_line.csv``: tie-line with and without real-time control per tick.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no run directory {directory}")
    ticks = _read_csv(directory / "ticks.csv")
    dispatch = _read_csv(directory / "dispatch.csv")
    meta_path = directory / "report.structured"
    if not meta_path.is_file():
        raise FileNotFoundError(f"missing artifact {meta_path}")
    meta = json.loads(meta_path.read_text())
    baseline_path = directory / "baseline_ticks.csv"
    baseline = _read_csv(baseline_path) if baseline_path.is_file() else None
    if not ticks:
        raise FileNotFoundError(f"{directory / 'ticks.csv'} holds no ticks")

    per_interval = meta["dt_dispatch"] // meta["dt_control"]
    scheduled: dict[int, float] = {}
    target: dict[int, float] = {}
    for row in dispatch:
        t = int(row["interval"])
        unit = row["unit"]
        value = float(row["setpoint_kw"])
        if unit.endswith(":discharge"):
            scheduled[t] = scheduled.get(t, 0.0) + value
        elif unit.endswith(":charge"):
            scheduled[t] = scheduled.get(t, 0.0) - value
        elif unit == "grid:buy":
            target[t] = target.get(t, 0.0) + value
        elif unit == "grid:sell":
            target[t] = target.get(t, 0.0) - value

    ess_path = directory / "fig_ess_power.csv"
    tie_path = directory / "fig_tie_line.csv"
    with open(ess_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "time_s", "rtd_ess_kw", "rtc_ess_kw"])
        for row in ticks:
            c = int(row["tick"])
            w.writerow([c, c * meta["dt_control"], fmt6(scheduled.get(c // per_interval, 0.0)), row["ess_power_kw"]])
    with open(tie_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "time_s", "target_kw", "tie_with_rtc_kw", "tie_without_rtc_kw"])
        for k, row in enumerate(ticks):
            c = int(row["tick"])
            without = baseline[k]["tie_line_kw"] if baseline is not None else ""
            w.writerow([c, c * meta["dt_control"], fmt6(target.get(c // per_interval, 0.0)), row["tie_line_kw"], without])
    return [ess_path, tie_path]


def run(spec: RunSpec) -> int:
    """Simulate every error level of ``spec`` and write its artifacts."""
    try:
        model, forecast = prepare(spec)
    except (ConfigError, SeriesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    reports = []
    for error, seed in zip(spec.errors, spec.scenario_seeds()):
        scenario = make_scenario(forecast, error, seed, model)
        try:
            result = simulate(model, scenario, baseline=spec.baseline)
        except (DispatchFailure, DispatchError, LpError) as exc:
            print(f"error: {scenario_name(error, seed)}: {exc}", file=sys.stderr)
            return EXIT_DISPATCH
        directory = spec.out / scenario_name(error, seed)
        write_artifacts(directory, model, result, windows=spec.windows)
        if spec.figures:
            emit_figure_data(directory)
        reports.append(result.report)
        logger.info(
            "%s: FMR %.2f%%  v %.4f (without RTC: FMR %.2f%%  v %.4f)",
            directory.name, result.report.fmr, result.report.v_with_rtc,
            result.report.fmr_without_rtc, result.report.v_without_rtc,
        )
    spec.out.mkdir(parents=True, exist_ok=True)
    table = format_scenario_table(reports)
    (spec.out / "summary.txt").write_text(table)
    (spec.out / "summary.structured").write_text(
        json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    )
    print(table, end="")
    return EXIT_OK


def _levels(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) / 100.0 for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated percentages, got {text!r}") from None


def _seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _horizon(text: str) -> tuple[int, int]:
    try:
        if ":" in text:
            a, b = text.split(":")
            return int(a), int(b)
        return 0, int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or START:STOP, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridfriendly", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    defaults = RunSpec()
    r = sub.add_parser("run", help="simulate scenarios and write artifacts")
    r.add_argument("--config", type=Path, default=defaults.config)
    r.add_argument("--load", type=Path, default=defaults.load)
    r.add_argument("--wind", type=Path, default=defaults.wind)
    r.add_argument("--solar", type=Path, default=defaults.solar)
    r.add_argument("--commitment", type=Path, default=None, help="override the config's commitment CSV")
    r.add_argument("--errors", type=_levels, default=defaults.errors, help="error levels in percent, e.g. 0.5,1,5")
    r.add_argument(
        "--seed", type=_seeds, default=defaults.seeds, help="one seed shared by all error levels, or one per level"
    )
    r.add_argument("--horizon", type=_horizon, default=None, help="N intervals or START:STOP")
    r.add_argument("--out", type=Path, default=defaults.out)
    r.add_argument("--baseline", action=argparse.BooleanOptionalAction, default=True)
    r.add_argument("--figures", action="store_true", help="also write figure CSVs per scenario")
    r.add_argument("--windows", action="store_true", help="also log every window solution")

    f = sub.add_parser("figures", help="write figure CSVs for an existing scenario directory")
    f.add_argument("directory", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "figures":
        try:
            for path in emit_figure_data(args.directory):
                print(path)
        except (FileNotFoundError, KeyError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        return EXIT_OK
    try:
        spec = RunSpec(
            config=args.config, load=args.load, wind=args.wind, solar=args.solar,
            commitment=args.commitment, errors=args.errors, seeds=args.seed, horizon=args.horizon,
            out=args.out, baseline=args.baseline, figures=args.figures, windows=args.windows,
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())

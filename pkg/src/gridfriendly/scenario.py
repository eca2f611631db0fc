"""Forecast and realized load / renewable series.

The forecast is one value per dispatch interval.  Realized ("actual")
series are per control tick and are produced from the forecast by a seeded,
clamped random walk on a multiplicative error factor shared by load, wind
and solar, so that the realized net-load never strays from the forecast by
more than ``error_level`` in relative terms.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .model import MicrogridModel, intervals_per_dispatch

DEFAULT_ERROR_LEVELS = (0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.08, 0.10, 0.15, 0.20)

# Relative-error guard for forecasts near zero net-load (kW).
NET_LOAD_FLOOR = 1.0
# Random-walk step bound as a fraction of the error level.
STEP_FRACTION = 1.0 / 12.0


class SeriesError(ValueError):
    """Malformed time-series input."""


def net_load(load, wind, solar):
    """Load minus uncontrollable renewable output; negative means surplus."""
    return load - wind - solar


@dataclass(eq=False)
class ForecastSeries:
    load: np.ndarray
    wind: np.ndarray
    solar: np.ndarray

    def __post_init__(self):
        self.load, self.wind, self.solar = (np.asarray(a, dtype=float) for a in (self.load, self.wind, self.solar))
        _check_series(self.load, self.wind, self.solar)

    def __len__(self) -> int:
        return self.load.shape[0]

    @property
    def renewable(self) -> np.ndarray:
        return self.wind + self.solar

    @property
    def net_load(self) -> np.ndarray:
        return net_load(self.load, self.wind, self.solar)

    def window(self, start: int, length: int) -> "ForecastSeries":
        stop = start + length
        return ForecastSeries(self.load[start:stop], self.wind[start:stop], self.solar[start:stop])


@dataclass(eq=False)
class ActualSeries:
    load: np.ndarray
    wind: np.ndarray
    solar: np.ndarray
    ticks_per_interval: int

    def __post_init__(self):
        self.load, self.wind, self.solar = (np.asarray(a, dtype=float) for a in (self.load, self.wind, self.solar))
        _check_series(self.load, self.wind, self.solar)
        if len(self) % self.ticks_per_interval:
            raise SeriesError(
                f"{len(self)} ticks is not a whole number of {self.ticks_per_interval}-tick intervals"
            )

    def __len__(self) -> int:
        return self.load.shape[0]

    @property
    def intervals(self) -> int:
        return len(self) // self.ticks_per_interval

    @property
    def net_load(self) -> np.ndarray:
        return net_load(self.load, self.wind, self.solar)

    def interval_net_load(self, t: int) -> np.ndarray:
        n = self.ticks_per_interval
        return self.net_load[t * n : (t + 1) * n]


@dataclass(eq=False)
class Scenario:
    forecast: ForecastSeries
    actual: ActualSeries
    error_level: float
    seed: int

    def __post_init__(self):
        if self.error_level < 0:
            raise SeriesError(f"error_level must be >= 0, got {self.error_level}")
        if self.actual.intervals != len(self.forecast):
            raise SeriesError(
                f"actual series covers {self.actual.intervals} intervals, forecast {len(self.forecast)}"
            )

    @property
    def horizon(self) -> int:
        return len(self.forecast)

    def max_relative_error(self) -> float:
        n = self.actual.ticks_per_interval
        fc = np.repeat(self.forecast.net_load, n)
        dev = np.abs(self.actual.net_load - fc) / np.maximum(np.abs(fc), NET_LOAD_FLOOR)
        return float(dev.max(initial=0.0))


def _check_series(*arrays: np.ndarray) -> None:
    lengths = {a.shape for a in arrays}
    if len(lengths) != 1 or arrays[0].ndim != 1:
        raise SeriesError(f"load/wind/solar shapes differ: {[a.shape for a in arrays]}")
    for a in arrays:
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise SeriesError("power values must be finite and >= 0")


def error_walk(
    ticks: int, error_level: float, rng: np.random.Generator, restart_every: int | None = None
) -> np.ndarray:
    """Clamped random walk of relative errors, one per tick, starting from zero.

    With ``restart_every`` the walk returns to zero at the start of every
    block of that many ticks (a refreshed forecast at each dispatch run).
    """
    steps = rng.uniform(-STEP_FRACTION, STEP_FRACTION, size=ticks)
    walk = np.empty(ticks)
    level = 0.0
    for c in range(ticks):
        if restart_every and c % restart_every == 0:
            level = 0.0
        level = min(max(level + steps[c], -1.0), 1.0)
        walk[c] = level
    # scaling a unit walk keeps one seed's shape identical across error levels
    return error_level * walk


def generate_actual(
    forecast: ForecastSeries, error_level: float, seed: int, model: MicrogridModel
) -> ActualSeries:
    """Realized per-tick series around a piecewise-constant forecast."""
    if error_level < 0:
        raise SeriesError(f"error_level must be >= 0, got {error_level}")
    n = intervals_per_dispatch(model)
    ticks = len(forecast) * n
    eps = error_walk(ticks, error_level, np.random.default_rng(seed), restart_every=n)
    factor = 1.0 + eps
    return ActualSeries(
        np.repeat(forecast.load, n) * factor,
        np.repeat(forecast.wind, n) * factor,
        np.repeat(forecast.solar, n) * factor,
        n,
    )


def make_scenario(forecast: ForecastSeries, error_level: float, seed: int, model: MicrogridModel) -> Scenario:
    return Scenario(forecast, generate_actual(forecast, error_level, seed, model), error_level, seed)


def load_series(csv_text: str) -> tuple[str, np.ndarray]:
    """Parse a ``interval_index|tick_index, value_kw`` CSV.

    Returns the index kind (``"interval"`` or ``"tick"``) and the values.
    """
    reader = csv.reader(io.StringIO(csv_text))
    rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise SeriesError("empty series")
    header = [h.strip() for h in rows[0]]
    if len(header) != 2 or header[1] != "value_kw" or header[0] not in ("interval_index", "tick_index"):
        raise SeriesError(f"expected header 'interval_index|tick_index,value_kw', got {','.join(header)}")
    kind = header[0].split("_")[0]
    body = rows[1:]
    if not body:
        raise SeriesError("empty series")
    values = np.empty(len(body))
    for k, row in enumerate(body):
        try:
            idx = int(row[0])
            value = float(row[1])
        except (ValueError, IndexError):
            raise SeriesError(f"line {k + 2}: cannot parse {','.join(row)!r}") from None
        if idx != k:
            if idx > k:
                raise SeriesError(f"gap in {header[0]}: missing {k}")
            raise SeriesError(f"{header[0]} not increasing at line {k + 2} ({idx})")
        if value < 0 or not np.isfinite(value):
            raise SeriesError(f"line {k + 2}: negative or non-finite power {value}")
        values[k] = value
    return kind, values


def dump_series(values, kind: str = "interval") -> str:
    lines = [f"{kind}_index,value_kw"]
    lines += [f"{i},{v:.6f}" for i, v in enumerate(values)]
    return "\n".join(lines) + "\n"


def load_forecast(load_csv: str, wind_csv: str, solar_csv: str | None = None) -> ForecastSeries:
    """Build a forecast from per-interval CSVs; solar may be folded into wind."""
    arrays = []
    for name, text in (("load", load_csv), ("wind", wind_csv), ("solar", solar_csv)):
        if text is None:
            arrays.append(None)
            continue
        try:
            kind, values = load_series(text)
        except SeriesError as exc:
            raise SeriesError(f"{name}: {exc}") from None
        if kind != "interval":
            raise SeriesError(f"{name}: forecast series must be indexed by interval_index")
        arrays.append(values)
    if arrays[2] is None:
        arrays[2] = np.zeros_like(arrays[0])
    if not len(arrays[0]) == len(arrays[1]) == len(arrays[2]):
        raise SeriesError(
            f"series lengths differ: load {len(arrays[0])}, wind {len(arrays[1])}, solar {len(arrays[2])}"
        )
    return ForecastSeries(*arrays)

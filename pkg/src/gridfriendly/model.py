"""Microgrid description and its INI-style configuration format.

A config file has one ``[simulation]`` and one ``[grid]`` section, one
``[generator:<id>]`` section per controllable unit, one ``[storage:<id>]``
section per battery and a ``[commitment]`` section.  Price and commitment
series are either given inline (comma separated) or as CSV files resolved
relative to the config file's directory.  See README.md for the full key list.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_SELL_RATIO = 0.8
DEFAULT_RESERVE_FRACTION = 0.10
DEFAULT_DELTA_P_FRACTION = 0.10
DEFAULT_DELTA_E_FRACTION = 0.05


class ConfigError(ValueError):
    """Invalid or incomplete microgrid configuration."""


def _require(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{where}: {msg}")


@dataclass(frozen=True)
class Generator:
    id: str
    p_min: float
    p_max: float
    ramp: float  # kW per hour
    linear_cost: float  # currency per kWh
    no_load_cost: float = 0.0  # accepted, not used by the dispatch objective
    startup_cost: float = 0.0  # accepted, not used by the dispatch objective

    def __post_init__(self):
        _require(0 <= self.p_min, "Generator.p_min", f"must be >= 0, got {self.p_min}")
        _require(self.p_min <= self.p_max, "Generator.p_min", f"{self.p_min} exceeds p_max {self.p_max}")
        _require(self.ramp > 0, "Generator.ramp", f"must be > 0, got {self.ramp}")
        _require(self.linear_cost >= 0, "Generator.linear_cost", f"must be >= 0, got {self.linear_cost}")


@dataclass(frozen=True)
class EnergyStorage:
    id: str
    e_min: float
    e_max: float
    p_charge_max: float
    p_discharge_max: float
    delta_p: float
    delta_e: float
    e_initial: float
    p_charge_min: float = 0.0
    p_discharge_min: float = 0.0

    def __post_init__(self):
        _require(0 <= self.e_min, "EnergyStorage.e_min", f"must be >= 0, got {self.e_min}")
        _require(self.e_min <= self.e_max, "EnergyStorage.e_min", f"{self.e_min} exceeds e_max {self.e_max}")
        _require(
            self.e_min <= self.e_initial <= self.e_max,
            "EnergyStorage.e_initial",
            f"{self.e_initial} outside [{self.e_min}, {self.e_max}]",
        )
        for side in ("charge", "discharge"):
            lo = getattr(self, f"p_{side}_min")
            hi = getattr(self, f"p_{side}_max")
            _require(0 <= lo, f"EnergyStorage.p_{side}_min", f"must be >= 0, got {lo}")
            _require(lo <= hi, f"EnergyStorage.p_{side}_min", f"{lo} exceeds p_{side}_max {hi}")
            _require(
                2 * self.delta_p < hi - lo,
                "EnergyStorage.delta_p",
                f"2 x {self.delta_p} leaves no {side} band inside [{lo}, {hi}]",
            )
        _require(self.delta_p >= 0, "EnergyStorage.delta_p", f"must be >= 0, got {self.delta_p}")
        _require(self.delta_e >= 0, "EnergyStorage.delta_e", f"must be >= 0, got {self.delta_e}")
        _require(
            2 * self.delta_e < self.e_max - self.e_min,
            "EnergyStorage.delta_e",
            f"2 x {self.delta_e} leaves no energy band inside [{self.e_min}, {self.e_max}]",
        )

    @property
    def e_low(self) -> float:
        """Lowest energy the dispatch may schedule."""
        return self.e_min + self.delta_e

    @property
    def e_high(self) -> float:
        return self.e_max - self.delta_e


@dataclass(frozen=True)
class GridLink:
    p_max: float
    buy_price: tuple[float, ...]
    sell_price: tuple[float, ...]

    def __post_init__(self):
        _require(self.p_max > 0, "GridLink.p_max", f"must be > 0, got {self.p_max}")
        _require(
            len(self.buy_price) == len(self.sell_price),
            "GridLink.sell_price",
            f"{len(self.sell_price)} values for {len(self.buy_price)} buy prices",
        )
        for t, (buy, sell) in enumerate(zip(self.buy_price, self.sell_price)):
            _require(sell <= buy, "GridLink.sell_price", f"interval {t}: sell {sell} exceeds buy {buy}")


@dataclass(frozen=True)
class MicrogridModel:
    generators: tuple[Generator, ...]
    storage: tuple[EnergyStorage, ...]
    grid: GridLink
    commitment: tuple[tuple[int, ...], ...]  # [generator][interval]
    reserve_fraction: float = DEFAULT_RESERVE_FRACTION
    dt_dispatch: int = 900  # seconds
    dt_control: int = 4  # seconds
    window: int = 4
    start_time: str = "19:00"

    def __post_init__(self):
        _require(self.dt_control > 0, "MicrogridModel.dt_control", "must be > 0")
        _require(
            self.dt_dispatch > 0 and self.dt_dispatch % self.dt_control == 0,
            "MicrogridModel.dt_dispatch",
            f"{self.dt_dispatch} s is not a multiple of dt_control {self.dt_control} s",
        )
        _require(
            0 <= self.reserve_fraction < 1,
            "MicrogridModel.reserve_fraction",
            f"must lie in [0, 1), got {self.reserve_fraction}",
        )
        _require(self.window >= 1, "MicrogridModel.window", f"must be >= 1, got {self.window}")
        ids = [g.id for g in self.generators] + [s.id for s in self.storage]
        _require(len(set(ids)) == len(ids), "MicrogridModel", f"duplicate unit ids in {ids}")
        _require(
            len(self.commitment) == len(self.generators),
            "MicrogridModel.commitment",
            f"{len(self.commitment)} schedules for {len(self.generators)} generators",
        )
        for g, row in zip(self.generators, self.commitment):
            _require(
                len(row) == self.horizon,
                "MicrogridModel.commitment",
                f"generator {g.id} covers {len(row)} of {self.horizon} intervals",
            )
            _require(all(v in (0, 1) for v in row), "MicrogridModel.commitment", f"generator {g.id}: status not 0/1")
        _parse_clock(self.start_time)

    @property
    def horizon(self) -> int:
        return len(self.grid.buy_price)

    @property
    def dt_hours(self) -> float:
        return self.dt_dispatch / 3600.0

    @property
    def dtc_hours(self) -> float:
        return self.dt_control / 3600.0

    def commitment_matrix(self) -> np.ndarray:
        """(interval, generator) on/off array."""
        return np.array(self.commitment, dtype=float).T.reshape(self.horizon, len(self.generators))

    def interval_label(self, t: int) -> str:
        start = _parse_clock(self.start_time) + t * self.dt_dispatch
        return f"{_clock(start)}-{_clock(start + self.dt_dispatch)}"


def intervals_per_dispatch(model: MicrogridModel) -> int:
    """Number of control ticks in one dispatch interval."""
    return model.dt_dispatch // model.dt_control


def _parse_clock(text: str) -> int:
    try:
        hh, mm = text.split(":")
        return int(hh) * 3600 + int(mm) * 60
    except ValueError:
        raise ConfigError(f"simulation.start_time: expected HH:MM, got {text!r}") from None


def _clock(seconds: int) -> str:
    seconds %= 86400
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}"


# --- loading -----------------------------------------------------------------

_SIM_KEYS = {"dt_dispatch", "dt_control", "window", "reserve_fraction", "start_time"}
_GRID_KEYS = {"p_max", "prices", "buy_price", "sell_price", "sell_ratio"}
_GEN_KEYS = {"p_min", "p_max", "ramp", "linear_cost", "no_load_cost", "startup_cost"}
_ESS_KEYS = {
    "e_min", "e_max", "e_initial", "p_charge_min", "p_charge_max",
    "p_discharge_min", "p_discharge_max", "p_max", "delta_p", "delta_e",
}


class _Section:
    def __init__(self, name: str, items: dict[str, str], allowed: set[str]):
        self.name = name
        self.items = items
        for key in items:
            if key not in allowed:
                raise ConfigError(f"{name}.{key}: unknown key")

    def has(self, key: str) -> bool:
        return key in self.items

    def number(self, key: str, default: float | None = None) -> float:
        if key not in self.items:
            if default is None:
                raise ConfigError(f"{self.name}.{key}: required key missing")
            return default
        raw = self.items[key]
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: expected a number, got {raw!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{self.name}.{key}: must be finite, got {raw!r}")
        return value

    def integer(self, key: str, default: int) -> int:
        value = self.number(key, float(default))
        if value != int(value):
            raise ConfigError(f"{self.name}.{key}: expected an integer, got {self.items[key]!r}")
        return int(value)

    def series(self, key: str) -> tuple[float, ...]:
        raw = self.items[key]
        try:
            return tuple(float(v) for v in raw.replace("\n", ",").split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: expected comma-separated numbers") from None


def _read_file(base_dir: Path | None, name: str, where: str) -> str:
    path = Path(name)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    try:
        return path.read_text()
    except OSError as exc:
        raise ConfigError(f"{where}: cannot read {path}: {exc.strerror}") from None


def _csv_rows(text: str, where: str, columns: tuple[str, ...]) -> list[dict[str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    names = [c.strip() for c in (reader.fieldnames or [])]
    missing = [c for c in columns if c not in names]
    if missing:
        raise ConfigError(f"{where}: CSV missing column(s) {', '.join(missing)}")
    return [{k.strip(): (v or "").strip() for k, v in row.items() if k is not None} for row in reader]


def parse_price_csv(text: str, where: str = "grid.prices") -> tuple[tuple[float, ...], tuple[float, ...] | None]:
    rows = _csv_rows(text, where, ("interval_index", "buy_price"))
    buy: dict[int, float] = {}
    sell: dict[int, float] = {}
    for lineno, row in enumerate(rows, 2):
        try:
            t = int(row["interval_index"])
            buy[t] = float(row["buy_price"])
            if row.get("sell_price"):
                sell[t] = float(row["sell_price"])
        except ValueError:
            raise ConfigError(f"{where}: line {lineno}: cannot parse {row}") from None
    if not buy:
        raise ConfigError(f"{where}: no price rows")
    count = max(buy) + 1
    for t in range(count):
        if t not in buy:
            raise ConfigError(f"{where}: missing interval {t}")
    buy_series = tuple(buy[t] for t in range(count))
    if not sell:
        return buy_series, None
    for t in range(count):
        if t not in sell:
            raise ConfigError(f"{where}: sell_price missing for interval {t}")
    return buy_series, tuple(sell[t] for t in range(count))


def parse_commitment_csv(text: str, generator_ids: list[str], horizon: int) -> tuple[tuple[int, ...], ...]:
    rows = _csv_rows(text, "commitment", ("interval_index", "generator_id", "status"))
    table: dict[tuple[str, int], int] = {}
    for lineno, row in enumerate(rows, 2):
        try:
            t = int(row["interval_index"])
            status = int(row["status"])
        except ValueError:
            raise ConfigError(f"commitment: line {lineno}: cannot parse {row}") from None
        if status not in (0, 1):
            raise ConfigError(f"commitment: line {lineno}: status must be 0 or 1, got {status}")
        gid = row["generator_id"]
        if gid not in generator_ids:
            raise ConfigError(f"commitment: line {lineno}: unknown generator {gid!r}")
        table[(gid, t)] = status
    schedule = []
    for gid in generator_ids:
        for t in range(horizon):
            if (gid, t) not in table:
                raise ConfigError(f"commitment: generator {gid} missing interval {t}")
        schedule.append(tuple(table[(gid, t)] for t in range(horizon)))
    return tuple(schedule)


def load_model(config_text: str, base_dir: str | Path | None = None) -> MicrogridModel:
    """Parse and validate a microgrid config.

    ``base_dir`` resolves relative CSV paths named in the config.
    """
    base = Path(base_dir) if base_dir is not None else None
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(config_text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc.message.splitlines()[0]}") from None

    generators_raw: list[_Section] = []
    storage_raw: list[_Section] = []
    sim = grid = commit = None
    for name in parser.sections():
        items = dict(parser.items(name))
        if name == "simulation":
            sim = _Section(name, items, _SIM_KEYS)
        elif name == "grid":
            grid = _Section(name, items, _GRID_KEYS)
        elif name == "commitment":
            commit = _Section(name, items, {"file"} if "file" in items else set(items))
        elif name.startswith("generator:"):
            generators_raw.append(_Section(name, items, _GEN_KEYS))
        elif name.startswith("storage:"):
            storage_raw.append(_Section(name, items, _ESS_KEYS))
        else:
            raise ConfigError(f"{name}: unknown section")
    if grid is None:
        raise ConfigError("grid: required section missing")
    if sim is None:
        sim = _Section("simulation", {}, _SIM_KEYS)

    generators = tuple(
        Generator(
            id=s.name.split(":", 1)[1],
            p_min=s.number("p_min", 0.0),
            p_max=s.number("p_max"),
            ramp=s.number("ramp"),
            linear_cost=s.number("linear_cost"),
            no_load_cost=s.number("no_load_cost", 0.0),
            startup_cost=s.number("startup_cost", 0.0),
        )
        for s in generators_raw
    )
    storage = tuple(_storage(s) for s in storage_raw)

    if grid.has("prices"):
        buy, sell = parse_price_csv(_read_file(base, grid.items["prices"], "grid.prices"))
    elif grid.has("buy_price"):
        buy, sell = grid.series("buy_price"), (grid.series("sell_price") if grid.has("sell_price") else None)
    else:
        raise ConfigError("grid.buy_price: no price series (set 'prices' or 'buy_price')")
    if sell is None:
        ratio = grid.number("sell_ratio", DEFAULT_SELL_RATIO)
        sell = tuple(ratio * p for p in buy)
    link = GridLink(p_max=grid.number("p_max"), buy_price=buy, sell_price=sell)
    horizon = len(buy)

    ids = [g.id for g in generators]
    if not generators:
        schedule: tuple[tuple[int, ...], ...] = ()
    elif commit is None:
        raise ConfigError("commitment: required section missing")
    elif commit.has("file"):
        schedule = parse_commitment_csv(_read_file(base, commit.items["file"], "commitment.file"), ids, horizon)
    else:
        for key in commit.items:
            if key not in ids:
                raise ConfigError(f"commitment.{key}: unknown generator")
        rows = []
        for gid in ids:
            if gid not in commit.items:
                raise ConfigError(f"commitment.{gid}: missing schedule")
            values = commit.series(gid)
            if len(values) < horizon:
                raise ConfigError(f"commitment: generator {gid} missing interval {len(values)}")
            rows.append(tuple(int(v) for v in values[:horizon]))
        schedule = tuple(rows)

    return MicrogridModel(
        generators=generators,
        storage=storage,
        grid=link,
        commitment=schedule,
        reserve_fraction=sim.number("reserve_fraction", DEFAULT_RESERVE_FRACTION),
        dt_dispatch=sim.integer("dt_dispatch", 900),
        dt_control=sim.integer("dt_control", 4),
        window=sim.integer("window", 4),
        start_time=sim.items.get("start_time", "19:00"),
    )


def _storage(s: _Section) -> EnergyStorage:
    e_min = s.number("e_min", 0.0)
    e_max = s.number("e_max")
    p_max = s.number("p_max", -1.0) if s.has("p_max") else None
    p_charge_max = s.number("p_charge_max", p_max)
    p_discharge_max = s.number("p_discharge_max", p_max)
    return EnergyStorage(
        id=s.name.split(":", 1)[1],
        e_min=e_min,
        e_max=e_max,
        p_charge_min=s.number("p_charge_min", 0.0),
        p_charge_max=p_charge_max,
        p_discharge_min=s.number("p_discharge_min", 0.0),
        p_discharge_max=p_discharge_max,
        delta_p=s.number("delta_p", DEFAULT_DELTA_P_FRACTION * min(p_charge_max, p_discharge_max)),
        delta_e=s.number("delta_e", DEFAULT_DELTA_E_FRACTION * (e_max - e_min)),
        e_initial=s.number("e_initial", 0.5 * (e_min + e_max)),
    )


def load_model_file(path: str | Path) -> MicrogridModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return load_model(text, path.parent)


def dump_model(model: MicrogridModel) -> str:
    """Serialize ``model`` to a self-contained config (series inline)."""

    def series(values) -> str:
        return ", ".join(repr(float(v)) for v in values)

    out = io.StringIO()
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["simulation"] = {
        "dt_dispatch": str(model.dt_dispatch),
        "dt_control": str(model.dt_control),
        "window": str(model.window),
        "reserve_fraction": repr(model.reserve_fraction),
        "start_time": model.start_time,
    }
    cp["grid"] = {
        "p_max": repr(model.grid.p_max),
        "buy_price": series(model.grid.buy_price),
        "sell_price": series(model.grid.sell_price),
    }
    for g in model.generators:
        cp[f"generator:{g.id}"] = {
            "p_min": repr(g.p_min),
            "p_max": repr(g.p_max),
            "ramp": repr(g.ramp),
            "linear_cost": repr(g.linear_cost),
            "no_load_cost": repr(g.no_load_cost),
            "startup_cost": repr(g.startup_cost),
        }
    for s in model.storage:
        cp[f"storage:{s.id}"] = {
            k: repr(getattr(s, k))
            for k in (
                "e_min", "e_max", "e_initial", "p_charge_min", "p_charge_max",
                "p_discharge_min", "p_discharge_max", "delta_p", "delta_e",
            )
        }
    if model.generators:
        cp["commitment"] = {
            g.id: ", ".join(str(v) for v in row) for g, row in zip(model.generators, model.commitment)
        }
    cp.write(out)
    return out.getvalue()

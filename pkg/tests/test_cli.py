import csv
import json
import shutil

import numpy as np
import pytest

from gridfriendly.cli import EXIT_DISPATCH, EXIT_INPUT, EXIT_OK, RunSpec, data_path, emit_figure_data, main, run
from gridfriendly.model import ConfigError


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    assert main(["run", "--out", str(out), "--figures"]) == EXIT_OK
    return out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _by_interval(rows, column, per=225):
    values = np.array([float(r[column]) for r in rows])
    return values.reshape(-1, per)


def test_ten_level_summary(full_run):
    lines = (full_run / "summary.txt").read_text().splitlines()
    assert len(lines) == 2 + 10
    assert [ln.split()[0] for ln in lines[2:]] == ["0.5%", "1%", "2%", "3%", "4%", "5%", "8%", "10%", "15%", "20%"]
    assert len(json.loads((full_run / "summary.structured").read_text())) == 10


def test_scenario_layout(full_run):
    d = full_run / "error_10pct_seed0"
    for name in ("dispatch.csv", "objectives.csv", "ticks.csv", "baseline_ticks.csv", "report.txt", "report.structured"):
        assert (d / name).is_file()
    ticks = _rows(d / "ticks.csv")
    assert len(ticks) == 12 * 225 == 2700
    assert list(ticks[0]) == ["tick", "actual_netload_kw", "ess_power_kw", "soc_kwh", "tie_line_kw", "mitigated"]
    assert len(ticks[0]["tie_line_kw"].split(".")[1]) == 6
    assert len(_rows(d / "objectives.csv")) == 12
    units = {r["unit"] for r in _rows(d / "dispatch.csv")}
    assert units == {"MT", "FC", "DE", "ESS:charge", "ESS:discharge", "grid:buy", "grid:sell"}


def test_repeat_run_is_byte_identical(full_run, tmp_path):
    assert main(["run", "--out", str(tmp_path), "--errors", "5,10"]) == EXIT_OK
    for level in ("5", "10"):
        for name in ("ticks.csv", "baseline_ticks.csv", "dispatch.csv", "report.structured"):
            a = (full_run / f"error_{level}pct_seed0" / name).read_bytes()
            b = (tmp_path / f"error_{level}pct_seed0" / name).read_bytes()
            assert a == b, name


def test_paired_variants_share_net_load(full_run):
    d = full_run / "error_15pct_seed0"
    a = [r["actual_netload_kw"] for r in _rows(d / "ticks.csv")]
    b = [r["actual_netload_kw"] for r in _rows(d / "baseline_ticks.csv")]
    assert a == b


def test_figures_five_percent_piecewise_constant(full_run):
    rows = _rows(full_run / "error_5pct_seed0" / "fig_tie_line.csv")
    tie = _by_interval(rows, "tie_with_rtc_kw")
    assert np.all(tie == tie[:, :1])
    assert np.array_equal(tie[:, 0], _by_interval(rows, "target_kw")[:, 0])
    without = _by_interval(rows, "tie_without_rtc_kw")
    assert np.any(without != without[:, :1])


def test_figures_ten_percent_not_always_constant(full_run):
    tie = _by_interval(_rows(full_run / "error_10pct_seed0" / "fig_tie_line.csv"), "tie_with_rtc_kw")
    assert np.any(np.ptp(tie, axis=1) > 0)


def test_figure_ess_power(full_run):
    d = full_run / "error_10pct_seed0"
    rows = _rows(d / "fig_ess_power.csv")
    assert list(rows[0]) == ["tick", "time_s", "rtd_ess_kw", "rtc_ess_kw"]
    assert rows[1]["time_s"] == "4"
    sched = _by_interval(rows, "rtd_ess_kw")
    assert np.all(sched == sched[:, :1])


def test_zero_error_row(tmp_path):
    assert main(["run", "--out", str(tmp_path), "--errors", "0"]) == EXIT_OK
    report = json.loads((tmp_path / "error_0pct_seed0" / "report.structured").read_text())
    assert report["v_with_rtc"] == 0.0 and report["v_without_rtc"] == 0.0
    assert report["fmr"] == 100.0 and report["fmr_without_rtc"] == 100.0


def test_horizon_range(tmp_path):
    assert main(["run", "--out", str(tmp_path), "--errors", "2", "--horizon", "2:5", "--no-baseline"]) == EXIT_OK
    d = tmp_path / "error_2pct_seed0"
    assert len(_rows(d / "ticks.csv")) == 3 * 225
    assert not (d / "baseline_ticks.csv").exists()
    assert "19:30-19:45" in (d / "report.txt").read_text()


def test_per_level_seeds(tmp_path):
    assert main(["run", "--out", str(tmp_path), "--errors", "1,2", "--seed", "4,9", "--horizon", "2"]) == EXIT_OK
    assert (tmp_path / "error_1pct_seed4").is_dir() and (tmp_path / "error_2pct_seed9").is_dir()


def test_seed_count_mismatch(capsys):
    assert main(["run", "--errors", "1,2,3", "--seed", "4,9"]) == EXIT_INPUT
    assert "seed" in capsys.readouterr().err


def test_runspec_rejects_empty_horizon():
    with pytest.raises(ConfigError, match="horizon"):
        RunSpec(horizon=(3, 3))


def test_missing_file_is_diagnosed(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "--load", str(tmp_path / "nope.csv")]) == EXIT_INPUT
    assert "nope.csv" in capsys.readouterr().err


def test_dispatch_failure_exit(tmp_path, capsys):
    cfg = tmp_path / "cfg"
    shutil.copytree(data_path("microgrid.ini").parent, cfg)
    ini = cfg / "microgrid.ini"
    ini.write_text(ini.read_text().replace("p_max = 1200", "p_max = 100"))
    spec = RunSpec(config=ini, errors=(0.01,), out=tmp_path / "out")
    assert run(spec) == EXIT_DISPATCH
    assert "interval 0" in capsys.readouterr().err


def test_figures_need_artifacts(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_figure_data(tmp_path)
    assert main(["figures", str(tmp_path)]) == EXIT_INPUT
    assert main(["figures", str(tmp_path / "absent")]) == EXIT_INPUT

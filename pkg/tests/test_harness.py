import csv
import io
import json
import os

import numpy as np
import pytest

from masharing.__main__ import main
from masharing.core import ScenarioConfig, save_config
from masharing.harness import (CSV_COLUMNS, HarnessError, SweepSpec, aggregate_rows,
                               axis_config, emit_plotdata, preset_config, read_rows, replay,
                               run_sweep, stored_record)

from oracles import mean_ci95

SMALL = ScenarioConfig(grid_points_per_axis=12, pso_swarm=6, pso_iters=4, pso_rounds=1,
                       ao_max_iters=3)


def _spec(**kw):
    base = dict(axis="region", values=(1.0, 2.0), trials=2, seed=3,
                schemes=("ao", "mrt", "zf", "fpa"))
    return SweepSpec(**{**base, **kw})


def test_sweep_spec_validation():
    with pytest.raises(HarnessError):
        SweepSpec("snr")
    with pytest.raises(HarnessError):
        SweepSpec("region", trials=0)
    with pytest.raises(HarnessError):
        SweepSpec("region", schemes=("ao", "dp"))
    assert SweepSpec("it").values == (-90.0, -80.0, -70.0, -60.0, -50.0)


def test_axis_config_and_presets():
    cfg = ScenarioConfig()
    assert axis_config(cfg, "region", 3).region_size == pytest.approx(3 * cfg.wavelength)
    assert axis_config(cfg, "it", -60).it_threshold == pytest.approx(1e-9)
    assert axis_config(cfg, "paths", 6).paths_per_receiver == 6
    with pytest.raises(HarnessError):
        axis_config(cfg, "region", 0.1)
    with pytest.raises(HarnessError):
        axis_config(cfg, "bogus", 1)
    assert preset_config("paper")[0].grid_points_per_axis == 100
    assert preset_config("desk")[1] == 20
    with pytest.raises(HarnessError):
        preset_config("huge")


def test_csv_schema_and_determinism(tmp_path):
    text = run_sweep(SMALL, _spec(), str(tmp_path))
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == CSV_COLUMNS
    assert len(rows) == 2 * 2 * 4
    assert all(r["wall_time_s"] == "" for r in rows)
    assert all(r["feasible"] == "1" for r in rows)
    assert [r["scheme"] for r in rows[:4]] == ["ao", "ao", "mrt", "mrt"]
    assert text == run_sweep(SMALL, _spec())
    assert (tmp_path / "results.csv").read_text() == text
    assert (tmp_path / "summary.csv").exists() and (tmp_path / "plot_ao.dat").exists()


def test_timing_column_filled():
    text = run_sweep(SMALL, _spec(values=(1.0,), trials=1, schemes=("mrt",)), timing=True)
    row = next(csv.DictReader(io.StringIO(text)))
    assert float(row["wall_time_s"]) >= 0


def test_zf_skipped_when_too_few_antennas():
    cfg = SMALL.replace(n_antennas=3, k_prs=3)
    text = run_sweep(cfg, _spec(values=(2.0,), trials=1))
    assert "zf" not in {r["scheme"] for r in csv.DictReader(io.StringIO(text))}


def test_replay_matches_stored_record(tmp_path):
    run_sweep(SMALL, _spec(values=(2.0,), trials=1), str(tmp_path))
    trial = tmp_path / "trials" / "region_2.0_t0000.json"
    for scheme in ("ao", "zf"):
        assert replay(str(trial), scheme).record() == stored_record(str(trial), scheme)
    with pytest.raises(HarnessError):
        replay(str(trial), "nope")


def test_replay_corrupted_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(HarnessError):
        replay(str(bad), "mrt")
    bad.write_text(json.dumps({"schema": "other"}))
    with pytest.raises(HarnessError):
        replay(str(bad), "mrt")


def test_aggregate_matches_oracle_ci():
    vals = [10.0, 11.5, 9.25, 12.0, 10.5]
    lines = ["axis_value,scheme,snr_db"] + [f"1.0,ao,{v}" for v in vals] + ["2.0,ao,7.0"]
    agg = aggregate_rows(read_rows("\n".join(lines) + "\n"))
    m, h = mean_ci95(vals)
    assert agg[0]["mean_snr_db"] == pytest.approx(m) and agg[0]["ci95"] == pytest.approx(h)
    assert agg[1]["n"] == 1 and agg[1]["ci95"] == 0.0


def test_read_rows_errors(tmp_path):
    with pytest.raises(HarnessError):
        read_rows("")
    with pytest.raises(HarnessError):
        read_rows("axis_value,scheme\n1,ao\n")
    with pytest.raises(HarnessError):
        read_rows("axis_value,scheme,snr_db\n")
    with pytest.raises(HarnessError):
        aggregate_rows([{"axis_value": "x", "scheme": "ao", "snr_db": "1"}])


def test_emit_plotdata_files(tmp_path):
    src = tmp_path / "r.csv"
    src.write_text("axis_value,scheme,snr_db\n1,ao,3\n1,ao,5\n1,mrt,2\n")
    emit_plotdata(str(src), str(tmp_path / "o"))
    dat = (tmp_path / "o" / "plot_ao.dat").read_text().splitlines()
    assert dat[0].startswith("#")
    m, lo, hi = map(float, dat[1].split()[1:])
    assert m == pytest.approx(4.0) and lo < m < hi
    assert np.isclose(hi - m, mean_ci95([3.0, 5.0])[1], atol=1e-5)


def _cfg_file(tmp_path):
    path = tmp_path / "small.ini"
    save_config(SMALL, path)
    return str(path)


def test_cli_sweep_and_replay(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["--config", _cfg_file(tmp_path), "--sweep", "it", "--values", "-70",
               "--trials", "1", "--schemes", "mrt,fpa", "--out", str(out)])
    assert rc == 0
    assert "mrt" in capsys.readouterr().out
    trial = next((out / "trials").iterdir())
    assert main(["--replay", str(trial), "--scheme", "mrt"]) == 0
    assert json.loads(capsys.readouterr().out)["matches_stored"] is True
    assert main(["--plotdata", str(out / "results.csv"), "--out", str(tmp_path / "p")]) == 0
    assert os.path.exists(tmp_path / "p" / "summary.csv")


def test_cli_parallel_is_byte_identical(tmp_path):
    cfg = _cfg_file(tmp_path)
    common = ["--config", cfg, "--sweep", "paths", "--values", "2,3", "--trials", "2",
              "--schemes", "ao,mrt"]
    assert main(common + ["--out", str(tmp_path / "a")]) == 0
    assert main(common + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() == \
        (tmp_path / "b" / "results.csv").read_bytes()


def test_cli_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("MASHARING_GRID_POINTS_PER_AXIS", "10")
    monkeypatch.setenv("MASHARING_K_PRS", "1")
    out = tmp_path / "o"
    assert main(["--sweep", "region", "--values", "2", "--trials", "1", "--schemes", "mrt",
                 "--out", str(out)]) == 0
    bundle = json.loads(next((out / "trials").iterdir()).read_text())
    assert len(bundle["scenario"]["prs"]) == 1


def test_cli_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["--sweep", "region", "--schemes", "dp", "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["--replay", str(tmp_path / "missing.json")]) == 1
    assert main(["--plotdata", str(tmp_path / "missing.csv")]) == 1
    with pytest.raises(SystemExit):
        main(["--sweep", "snr"])

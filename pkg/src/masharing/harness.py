"""Monte-Carlo sweeps over region size, IT threshold or path count.

Every trial draws one scenario and runs each requested scheme on it with
the same algorithm seed, so schemes are compared on common random
numbers. Rows are written in canonical order (axis value, scheme, trial)
no matter how trials were scheduled, which makes the CSV byte-identical
for a fixed configuration and seed.

CSV columns::

    sweep_axis, axis_value, scheme, trial, seed, snr_db,
    max_interference_dbm, iterations, wall_time_s, feasible

``wall_time_s`` is left empty unless timing is requested, since wall
clock readings would break byte-for-byte reproducibility.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .ao import SCHEMES, run_scheme
from .channel import generate_scenario, scenario_from_dict, scenario_to_dict
from .core import (ChannelError, ConfigError, ScenarioConfig, SolveReport,
                   config_from_text, config_to_text, dbm_to_watt, seeded_rng,
                   watt_to_dbm)

__all__ = [
    "HarnessError", "PRESETS", "AXES", "CSV_COLUMNS", "SweepSpec", "preset_config",
    "run_sweep", "run_trial", "replay", "emit_plotdata", "aggregate_rows",
    "read_rows", "TRIAL_SCHEMA",
]

TRIAL_SCHEMA = "masharing.trial/1"
CSV_COLUMNS = ["sweep_axis", "axis_value", "scheme", "trial", "seed", "snr_db",
               "max_interference_dbm", "iterations", "wall_time_s", "feasible"]

# grid resolution and trial count per preset
PRESETS = {
    "desk": {"grid_points_per_axis": 40, "trials": 20},
    "paper": {"grid_points_per_axis": 100, "trials": 100},
}

# default axis values: A in wavelengths, Gamma in dBm, L in paths
AXES = {
    "region": (1.0, 2.0, 3.0, 4.0),
    "it": (-90.0, -80.0, -70.0, -60.0, -50.0),
    "paths": (2, 3, 4, 5, 6),
}

# keeps the algorithm streams clear of the scenario streams (0..R-1)
_ALGO_STREAM = 1_000_003


class HarnessError(ValueError):
    """Bad sweep request, malformed CSV or unreadable trial file."""


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple = ()
    trials: int = 20
    seed: int = 0
    schemes: tuple[str, ...] = tuple(SCHEMES)

    def __post_init__(self):
        if self.axis not in AXES:
            raise HarnessError(f"unknown sweep axis {self.axis!r}; choose from {sorted(AXES)}")
        if not self.values:
            object.__setattr__(self, "values", AXES[self.axis])
        if self.trials < 1:
            raise HarnessError("trials must be >= 1")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown or not self.schemes:
            raise HarnessError(f"unknown schemes {unknown}; choose from {sorted(SCHEMES)}")


def preset_config(name: str, base: ScenarioConfig | None = None) -> tuple[ScenarioConfig, int]:
    """Config with the preset grid applied, plus the preset trial count."""
    if name not in PRESETS:
        raise HarnessError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    base = base or ScenarioConfig(grid_points_per_axis=p["grid_points_per_axis"])
    return base.replace(grid_points_per_axis=p["grid_points_per_axis"]), p["trials"]


def axis_config(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    try:
        if axis == "region":
            return cfg.replace(region_size=float(value) * cfg.wavelength)
        if axis == "it":
            return cfg.replace(it_threshold=dbm_to_watt(float(value)))
        if axis == "paths":
            return cfg.replace(paths_per_receiver=int(value))
    except ConfigError as exc:
        raise HarnessError(f"{axis}={value}: {exc}") from exc
    raise HarnessError(f"unknown sweep axis {axis!r}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _row(spec, value, trial, rep: SolveReport, timing: bool) -> dict:
    itf = watt_to_dbm(rep.max_interference) if rep.interference.size else -math.inf
    return {
        "sweep_axis": spec.axis, "axis_value": _fmt(value), "scheme": rep.scheme,
        "trial": str(trial), "seed": str(spec.seed), "snr_db": _fmt(rep.snr_db),
        "max_interference_dbm": _fmt(itf), "iterations": str(rep.iterations),
        "wall_time_s": _fmt(rep.wall_time) if timing else "",
        "feasible": "1" if rep.feasible else "0",
    }


def run_trial(cfg: ScenarioConfig, spec: SweepSpec, value, trial: int):
    """Run every scheme of ``spec`` on one scenario; returns ``(scenario, reports)``."""
    cfg_v = axis_config(cfg, spec.axis, value)
    scenario = generate_scenario(cfg_v, seeded_rng(spec.seed, trial))
    reports = []
    for name in spec.schemes:
        if name == "zf" and cfg_v.k_prs and cfg_v.n_antennas <= cfg_v.k_prs:
            continue
        rng = seeded_rng(spec.seed, _ALGO_STREAM + trial)
        _, _, rep = run_scheme(name, scenario, cfg_v, rng)
        rep.scheme = name
        reports.append(rep)
    return cfg_v, scenario, reports


def _trial_job(args):
    cfg_text, spec, value, trial = args
    cfg = config_from_text(cfg_text)
    cfg_v, scenario, reports = run_trial(cfg, spec, value, trial)
    return value, trial, config_to_text(cfg_v), scenario_to_dict(scenario), reports


def _trial_path(out_dir, axis, value, trial):
    return os.path.join(out_dir, "trials", f"{axis}_{_fmt(value)}_t{trial:04d}.json")


def run_sweep(cfg: ScenarioConfig, spec: SweepSpec, out_dir: str | None = None,
              jobs: int = 1, timing: bool = False, save_trials: bool = True) -> str:
    """Run the sweep and return the CSV text.

    With ``out_dir`` set, writes ``results.csv``, the aggregate tables of
    :func:`emit_plotdata` and (``save_trials``) one replayable JSON file
    per trial holding the scenario, its config, the algorithm stream and
    every scheme's record.
    """
    tasks = [(config_to_text(cfg), spec, v, t) for v in spec.values for t in range(spec.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial_job, tasks))
    else:
        results = [_trial_job(t) for t in tasks]

    rows = []
    for value, trial, cfg_text, sc_dict, reports in results:
        for rep in reports:
            rows.append(_row(spec, value, trial, rep, timing))
        if out_dir and save_trials:
            path = _trial_path(out_dir, spec.axis, value, trial)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            bundle = {
                "schema": TRIAL_SCHEMA, "config": cfg_text, "scenario": sc_dict,
                "seed": spec.seed, "algo_stream": _ALGO_STREAM + trial,
                "records": {r.scheme: r.record() for r in reports},
            }
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(bundle, fh, indent=1)
    order = {s: i for i, s in enumerate(spec.schemes)}
    rows.sort(key=lambda r: (float(r["axis_value"]), order[r["scheme"]], int(r["trial"])))

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    text = buf.getvalue()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "results.csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        emit_plotdata(csv_path, out_dir)
    return text


def replay(trial_file: str, scheme: str) -> SolveReport:
    """Re-run ``scheme`` on a saved trial; the record matches the stored one."""
    if scheme not in SCHEMES:
        raise HarnessError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    try:
        with open(trial_file, encoding="utf-8") as fh:
            bundle = json.load(fh)
        if bundle.get("schema") != TRIAL_SCHEMA:
            raise HarnessError(f"unsupported trial schema {bundle.get('schema')!r}")
        cfg = config_from_text(bundle["config"])
        scenario = scenario_from_dict(bundle["scenario"])
        rng = seeded_rng(int(bundle["seed"]), int(bundle["algo_stream"]))
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError,
            ChannelError, ConfigError) as exc:
        raise HarnessError(f"cannot read trial file {trial_file}: {exc}") from exc
    _, _, rep = run_scheme(scheme, scenario, cfg, rng)
    rep.scheme = scheme
    return rep


def stored_record(trial_file: str, scheme: str) -> dict | None:
    with open(trial_file, encoding="utf-8") as fh:
        return json.load(fh).get("records", {}).get(scheme)


# --------------------------------------------------------------------------
# aggregation

def read_rows(csv_path_or_text: str) -> list[dict]:
    if os.path.exists(csv_path_or_text):
        with open(csv_path_or_text, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = csv_path_or_text
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise HarnessError("empty CSV")
    missing = {"axis_value", "scheme", "snr_db"} - set(reader.fieldnames)
    if missing:
        raise HarnessError(f"CSV lacks columns {sorted(missing)}")
    rows = list(reader)
    if not rows:
        raise HarnessError("CSV has no data rows")
    return rows


def aggregate_rows(rows: list[dict]) -> list[dict]:
    """Mean SNR (dB) and 95% Student-t half-width per (axis value, scheme)."""
    groups: dict[tuple, list[float]] = {}
    order = []
    for r in rows:
        try:
            key = (float(r["axis_value"]), r["scheme"])
            val = float(r["snr_db"])
        except (TypeError, ValueError) as exc:
            raise HarnessError(f"malformed CSV row {r}: {exc}") from exc
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(val)
    out = []
    for key in sorted(order, key=lambda k: (k[0], order.index(k))):
        v = np.array(groups[key])
        n = v.size
        mean = float(v.mean())
        if n > 1 and np.all(np.isfinite(v)):
            half = float(stats.t.ppf(0.975, n - 1) * v.std(ddof=1) / math.sqrt(n))
        else:
            half = 0.0
        out.append({"axis_value": key[0], "scheme": key[1], "n": n,
                    "mean_snr_db": mean, "ci95": half})
    return out


def emit_plotdata(csv_path: str, out_dir: str | None = None) -> list[dict]:
    """Aggregate a results CSV; optionally write ``summary.csv`` and one ``.dat`` per scheme."""
    agg = aggregate_rows(read_rows(csv_path))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8",
                  newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["axis_value", "scheme", "n", "mean_snr_db", "ci95"])
            for a in agg:
                w.writerow([_fmt(a["axis_value"]), a["scheme"], a["n"],
                            _fmt(a["mean_snr_db"]), _fmt(a["ci95"])])
        for scheme in dict.fromkeys(a["scheme"] for a in agg):
            with open(os.path.join(out_dir, f"plot_{scheme}.dat"), "w",
                      encoding="utf-8") as fh:
                fh.write("# axis_value mean_snr_db ci_low ci_high\n")
                for a in agg:
                    if a["scheme"] == scheme:
                        m, h = a["mean_snr_db"], a["ci95"]
                        fh.write(f"{a['axis_value']:.6g} {m:.6f} {m - h:.6f} {m + h:.6f}\n")
    return agg

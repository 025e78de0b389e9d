"""A miniature Monte-Carlo sweep over the size of the antenna region.

Uses the same harness as the ``masharing`` command, at a scale that runs in
about a minute: a coarse grid, a handful of trials, and no particle swarm.
The CSV, per-trial replay files and plot tables land in ``demo_out/``.

Run:  python demos/region_sweep.py
"""

from masharing import ScenarioConfig
from masharing.harness import SweepSpec, emit_plotdata, replay, run_sweep, stored_record

cfg = ScenarioConfig(grid_points_per_axis=24)
spec = SweepSpec("region", values=(1.0, 2.0, 4.0), trials=4, seed=1,
                 schemes=("ao", "mrt", "zf", "fpa"))
run_sweep(cfg, spec, "demo_out")

print("region (wavelengths)  scheme  mean SNR (dB)")
for row in emit_plotdata("demo_out/results.csv"):
    print(f"{row['axis_value']:>20g}  {row['scheme']:<6}  "
          f"{row['mean_snr_db']:6.2f} +/- {row['ci95']:.2f}")

trial = "demo_out/trials/region_4.0_t0002.json"
same = replay(trial, "ao").record() == stored_record(trial, "ao")
print(f"\nreplaying {trial} with AO reproduces the stored record: {same}")

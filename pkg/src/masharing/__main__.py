"""Command-line entry point: ``python -m masharing`` or ``masharing``.

Any config key may also be set through the environment as
``MASHARING_<KEY>`` (for example ``MASHARING_N_ANTENNAS=6``); environment
values override the config file, and explicit flags override both.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .ao import SCHEMES
from .core import ENV_PREFIX, ScenarioConfig, config_from_mapping, env_overrides, load_config
from .harness import (AXES, PRESETS, HarnessError, SweepSpec, emit_plotdata, preset_config,
                      replay, run_sweep, stored_record)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="masharing",
        description="Monte-Carlo sweeps for movable-antenna spectrum sharing.",
        epilog=f"Environment overrides use the prefix {ENV_PREFIX} followed by an "
               "upper-case config key.")
    p.add_argument("--config", help="INI file with a [scenario] section")
    p.add_argument("--sweep", choices=sorted(AXES), help="axis to vary")
    p.add_argument("--values", help="comma-separated axis values (default: built-in grid)")
    p.add_argument("--trials", type=int, help="trials per axis value (default: preset)")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--out", default="out", help="output directory (default ./out)")
    p.add_argument("--schemes", default=",".join(SCHEMES),
                   help=f"comma list out of {','.join(SCHEMES)}")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--timing", action="store_true", help="fill the wall_time_s column")
    p.add_argument("--replay", metavar="TRIAL_JSON", help="re-run one saved trial")
    p.add_argument("--scheme", default="ao", help="scheme for --replay")
    p.add_argument("--plotdata", metavar="CSV", help="only aggregate an existing CSV")
    return p


def _config(args) -> ScenarioConfig:
    base, _ = preset_config(args.preset)
    if args.config:
        return load_config(args.config, base)
    env = env_overrides()
    return config_from_mapping(env, base) if env else base


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.plotdata:
            for row in emit_plotdata(args.plotdata, args.out):
                print(f"{row['axis_value']:g}\t{row['scheme']}\t"
                      f"{row['mean_snr_db']:.3f} +/- {row['ci95']:.3f} dB")
            return 0
        if args.replay:
            rep = replay(args.replay, args.scheme)
            rec = rep.record()
            same = stored_record(args.replay, args.scheme) == rec
            print(json.dumps({"record": rec, "matches_stored": same}, indent=1))
            return 0
        if not args.sweep:
            print("masharing: --sweep, --replay or --plotdata is required", file=sys.stderr)
            return 2
        cfg = _config(args)
        trials = args.trials or PRESETS[args.preset]["trials"]
        values = ()
        if args.values:
            values = tuple(float(v) for v in args.values.split(",") if v.strip())
        spec = SweepSpec(args.sweep, values, trials, args.seed,
                         tuple(s.strip() for s in args.schemes.split(",") if s.strip()))
        run_sweep(cfg, spec, args.out, jobs=args.jobs, timing=args.timing)
        for row in emit_plotdata(os.path.join(args.out, "results.csv")):
            print(f"{row['axis_value']:g}\t{row['scheme']}\t"
                  f"{row['mean_snr_db']:.3f} +/- {row['ci95']:.3f} dB")
        return 0
    except (HarnessError, ValueError, OSError) as exc:
        print(f"masharing: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

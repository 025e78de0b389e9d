"""Alternating optimization and the benchmark schemes built on it."""

from __future__ import annotations

import math
import time

import numpy as np

from .beamforming import feasible_init_w, sca_beamforming, zf
from .channel import Scenario, channel_matrix
from .core import (Apv, Beamformer, ConfigError, ScenarioConfig, SolveReport,
                   is_feasible_interference)
from .placement import (GridField, SamplingGrid, fpa_layout, mrt_scorer,
                        pso_optimize, random_grid_apv, sequential_search_detailed,
                        sweep, zf_scorer)

__all__ = ["ao_solve", "mrt_scheme", "zf_scheme", "fpa_scheme", "pso_scheme",
           "SCHEMES", "run_scheme", "backoff_mrt", "initial_layouts"]


def _report(scheme, apv, w, scenario, cfg, trace, iterations, t0, **notes):
    H = channel_matrix(apv, scenario, cfg.wavelength)
    itf = np.abs(H[1:].conj() @ w.w) ** 2
    return SolveReport(
        scheme=scheme,
        snr=abs(np.vdot(H[0], w.w)) ** 2 / cfg.noise_power,
        interference=itf,
        objective_trace=[float(v) for v in trace],
        feasible=is_feasible_interference(itf, cfg.it_threshold, cfg.eps_it),
        iterations=iterations,
        wall_time=time.perf_counter() - t0,
        notes=notes,
    )


def _rng(cfg, rng):
    return rng if rng is not None else np.random.default_rng(cfg.rng_seed)


def initial_layouts(scenario: Scenario, cfg: ScenarioConfig, rng: np.random.Generator,
                    grid: SamplingGrid, fld: GridField) -> list[Apv]:
    """Random grid layout, then (for ``ao_init="best"``) the MRT- and ZF-searched ones."""
    layouts = [random_grid_apv(cfg, rng, grid)]
    if cfg.ao_init == "best":
        layouts.append(sweep(layouts[0], mrt_scorer(cfg), grid, fld, scenario, cfg).apv)
        if cfg.k_prs < cfg.n_antennas:
            layouts.append(sweep(layouts[0], zf_scorer(cfg), grid, fld,
                                 scenario, cfg).apv)
    return layouts


def _p2_power(apv, scenario, cfg):
    H = channel_matrix(apv, scenario, cfg.wavelength)
    w, _ = sca_beamforming(H[0], H[1:], cfg)
    return abs(np.vdot(H[0], w.w)) ** 2


def ao_solve(scenario: Scenario, cfg: ScenarioConfig,
             rng: np.random.Generator | None = None, init_apv: Apv | None = None):
    """Alternate SCA beamforming and sequential position search.

    The start layout is a random spacing-feasible grid layout or, with
    ``cfg.ao_init == "best"``, whichever of that layout and the MRT-/ZF-
    searched layouts gives the highest SCA power. Each round runs the
    position search with ``w`` fixed and then SCA warm-started from ``w``
    at the new layout; both steps keep feasibility and never lower the
    SNR. Stops when the relative SNR gain of a round falls below
    ``cfg.ao_tol``.
    """
    t0 = time.perf_counter()
    rng = _rng(cfg, rng)
    grid = SamplingGrid.from_config(cfg)
    fld = GridField(grid, scenario, cfg.wavelength)
    if init_apv is None:
        layouts = initial_layouts(scenario, cfg, rng, grid, fld)
        powers = [_p2_power(a, scenario, cfg) for a in layouts]
        apv = layouts[int(np.argmax(powers))]
    else:
        apv = init_apv
    H = channel_matrix(apv, scenario, cfg.wavelength)
    w = feasible_init_w(H[0], H[1:], cfg)
    trace = [abs(np.vdot(H[0], w.w)) ** 2 / cfg.noise_power]
    w, _ = sca_beamforming(H[0], H[1:], cfg, w)
    snr = abs(np.vdot(H[0], w.w)) ** 2 / cfg.noise_power
    trace.append(snr)
    rounds = 0
    stuck = False
    for _ in range(cfg.ao_max_iters):
        rounds += 1
        res = sequential_search_detailed(apv, w, scenario, cfg, grid, fld)
        stuck |= res.stuck
        H = channel_matrix(res.apv, scenario, cfg.wavelength)
        w_new, _ = sca_beamforming(H[0], H[1:], cfg, w)
        snr_new = abs(np.vdot(H[0], w_new.w)) ** 2 / cfg.noise_power
        if snr_new < snr:
            break
        gain = (snr_new - snr) / snr if snr > 0 else math.inf
        apv, w, snr = res.apv, w_new, snr_new
        trace.append(snr)
        if not gain >= cfg.ao_tol:
            break
    return apv, w, _report("ao", apv, w, scenario, cfg, trace, rounds, t0,
                           constraint_stuck=stuck)


def backoff_mrt(h0, pr_channels, cfg: ScenarioConfig) -> tuple[Beamformer, float]:
    """MRT scaled by the largest feasible ``c`` in (0, 1]; returns ``(w, c)``."""
    w = feasible_init_w(h0, pr_channels, cfg)
    c = math.sqrt(w.power / cfg.p_max) if np.linalg.norm(h0) > 0 else 0.0
    return w, c


def mrt_scheme(scenario: Scenario, cfg: ScenarioConfig,
               rng: np.random.Generator | None = None, init_apv: Apv | None = None):
    """MRT with IT power backoff; positions by sequential search on the backed-off SNR."""
    t0 = time.perf_counter()
    rng = _rng(cfg, rng)
    grid = SamplingGrid.from_config(cfg)
    fld = GridField(grid, scenario, cfg.wavelength)
    apv = init_apv if init_apv is not None else random_grid_apv(cfg, rng, grid)
    res = sweep(apv, mrt_scorer(cfg), grid, fld, scenario, cfg)
    H = channel_matrix(res.apv, scenario, cfg.wavelength)
    w, c = backoff_mrt(H[0], H[1:], cfg)
    trace = [v / cfg.noise_power for v in res.objective_trace]
    return res.apv, w, _report("mrt", res.apv, w, scenario, cfg, trace, res.sweeps,
                               t0, backoff=c, full_power=bool(c >= 1.0))


def zf_scheme(scenario: Scenario, cfg: ScenarioConfig,
              rng: np.random.Generator | None = None, init_apv: Apv | None = None):
    """Zero forcing toward all PRs; positions by sequential search on the ZF SNR."""
    if cfg.k_prs and cfg.n_antennas <= cfg.k_prs:
        raise ConfigError("zero forcing needs more antennas than PRs")
    t0 = time.perf_counter()
    rng = _rng(cfg, rng)
    grid = SamplingGrid.from_config(cfg)
    fld = GridField(grid, scenario, cfg.wavelength)
    apv = init_apv if init_apv is not None else random_grid_apv(cfg, rng, grid)
    res = sweep(apv, zf_scorer(cfg), grid, fld, scenario, cfg)
    H = channel_matrix(res.apv, scenario, cfg.wavelength)
    w = zf(H[0], H[1:], cfg.p_max)
    trace = [v / cfg.noise_power for v in res.objective_trace]
    return res.apv, w, _report("zf", res.apv, w, scenario, cfg, trace, res.sweeps, t0)


def fpa_scheme(scenario: Scenario, cfg: ScenarioConfig,
               rng: np.random.Generator | None = None, init_apv: Apv | None = None):
    """Fixed half-wavelength layout with SCA beamforming."""
    t0 = time.perf_counter()
    apv = fpa_layout(cfg)
    H = channel_matrix(apv, scenario, cfg.wavelength)
    w, tr = sca_beamforming(H[0], H[1:], cfg)
    trace = [v / cfg.noise_power for v in tr.objective]
    return apv, w, _report("fpa", apv, w, scenario, cfg, trace, tr.iterations, t0)


def pso_scheme(scenario: Scenario, cfg: ScenarioConfig,
               rng: np.random.Generator | None = None, init_apv: Apv | None = None):
    """PSO over continuous positions with SCA beamforming."""
    rng = _rng(cfg, rng)

    def update(apv, w_prev):
        H = channel_matrix(apv, scenario, cfg.wavelength)
        w_prev = w_prev if w_prev is not None else feasible_init_w(H[0], H[1:], cfg)
        return sca_beamforming(H[0], H[1:], cfg, w_prev)[0]

    seeds = []
    if init_apv is None:
        grid = SamplingGrid.from_config(cfg)
        fld = GridField(grid, scenario, cfg.wavelength)
        init_apv, *seeds = initial_layouts(scenario, cfg, rng, grid, fld)
    return pso_optimize(update, scenario, cfg, rng, init_apv, seeds)


SCHEMES = {
    "ao": ao_solve,
    "pso": pso_scheme,
    "mrt": mrt_scheme,
    "zf": zf_scheme,
    "fpa": fpa_scheme,
}


def run_scheme(name: str, scenario: Scenario, cfg: ScenarioConfig,
               rng: np.random.Generator | None = None):
    try:
        fn = SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}") from None
    return fn(scenario, cfg, rng)

"""Antenna-position optimization on the discretized transmit region.

The sequential search updates one antenna at a time by enumerating the
sampling grid. Scheme-specific scorers (fixed beamformer, power-backed-off
MRT, zero forcing) share one sweep engine so that every variant keeps the
incumbent on ties and therefore never lowers its objective.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .beamforming import ZeroForcingError, feasible_init_w, zf
from .channel import Scenario, channel_matrix, point_responses
from .core import (Apv, Beamformer, ConfigError, ScenarioConfig, SolveReport,
                   is_feasible_interference)

__all__ = [
    "SamplingGrid", "GridField", "SearchResult", "feasible_points",
    "feasible_mask", "sequential_search", "sequential_search_detailed",
    "random_grid_apv", "fpa_layout", "pso_optimize", "repair_apv",
    "fixed_w_scorer", "mrt_scorer", "zf_scorer", "sweep",
    "closed_form_powers", "best_closed_form_w",
]


@dataclass(frozen=True)
class SamplingGrid:
    """``M^2`` points ``p_ij = [-A/2 + iA/M, -A/2 + jA/M]``, ``i, j = 1..M``.

    Flat index ``(i - 1) * M + (j - 1)`` orders the points lexicographically
    in ``(i, j)``.
    """

    region_size: float
    m: int

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "SamplingGrid":
        return cls(cfg.region_size, cfg.grid_points_per_axis)

    @property
    def spacing(self) -> float:
        return self.region_size / self.m

    @property
    def axis(self) -> np.ndarray:
        idx = np.arange(1, self.m + 1)
        return -self.region_size / 2 + idx * self.region_size / self.m

    @property
    def points(self) -> np.ndarray:
        ax = self.axis
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)

    def __len__(self):
        return self.m * self.m


class GridField:
    """Channel coefficient of every receiver at every grid point, shape (K+1, M^2)."""

    def __init__(self, grid: SamplingGrid, scenario: Scenario, wavelength: float):
        self.grid = grid
        self.points = grid.points
        self.values = np.stack([point_responses(self.points, ps, wavelength)
                                for ps in scenario.receivers])


def _spacing_ok(points: np.ndarray, others: np.ndarray, d_min: float) -> np.ndarray:
    if others.shape[0] == 0 or d_min <= 0:
        return np.ones(points.shape[0], dtype=bool)
    diff = points[:, None, :] - others[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    return np.all(dist >= d_min * (1 - 1e-9), axis=1)


def feasible_mask(grid: SamplingGrid, apv: Apv, n: int,
                  min_spacing: float | None = None) -> np.ndarray:
    d_min = apv.min_spacing if min_spacing is None else min_spacing
    others = np.delete(apv.positions, n, axis=0)
    return _spacing_ok(grid.points, others, d_min)


def feasible_points(grid: SamplingGrid, apv: Apv, n: int,
                    min_spacing: float | None = None) -> np.ndarray:
    """Grid points at least ``D_min`` away from every antenna other than ``n``."""
    return grid.points[feasible_mask(grid, apv, n, min_spacing)]


# --------------------------------------------------------------------------
# scorers: f(n, H, cand) -> (score, feasible) for candidate columns
#   H    : (K+1, N) current channel entries
#   cand : (K+1, C) channel entries of the candidate positions for antenna n

Scorer = Callable[[int, np.ndarray, np.ndarray], tuple]


def fixed_w_scorer(w, cfg: ScenarioConfig) -> Scorer:
    """``|h0^H w|^2`` with every IT constraint checked, ``w`` held fixed."""
    w = w.w if isinstance(w, Beamformer) else np.asarray(w, dtype=complex)
    cap = cfg.it_threshold * (1 + cfg.eps_it)

    def score(n, H, cand):
        rest = H.conj() @ w - H[:, n].conj() * w[n]
        s = rest[:, None] + cand.conj() * w[n]
        power = np.abs(s) ** 2
        return power[0], np.all(power[1:] <= cap, axis=0)
    return score


def mrt_scorer(cfg: ScenarioConfig) -> Scorer:
    """Power-backed-off MRT: ``c^2 P ||h0||^2`` with the largest feasible ``c``."""

    def score(n, H, cand):
        h0_rest = H[0].copy()
        h0_rest[n] = 0
        norm2 = np.vdot(h0_rest, h0_rest).real + np.abs(cand[0]) ** 2
        cross = (H[1:].conj() @ h0_rest)[:, None] + cand[1:].conj() * cand[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            itf = cfg.p_max * np.abs(cross) ** 2 / norm2
            worst = itf.max(axis=0) if itf.shape[0] else np.zeros_like(norm2)
            c2 = np.where(worst > cfg.it_threshold, cfg.it_threshold / worst, 1.0)
        val = np.where(norm2 > 0, c2 * cfg.p_max * norm2, 0.0)
        return val, np.ones(val.shape, dtype=bool)
    return score


def zf_scorer(cfg: ScenarioConfig, rcond: float = 1e-10) -> Scorer:
    """ZF signal power ``P ||(I - proj_R) h0||^2``; interference is nulled."""

    def score(n, H, cand):
        C = cand.shape[1]
        Hc = np.broadcast_to(H, (C,) + H.shape).copy()
        Hc[:, :, n] = cand.T
        h0 = Hc[:, 0, :]
        R = Hc[:, 1:, :]
        if R.shape[1] == 0:
            proj = np.zeros(C)
        else:
            v = np.einsum("ckn,cn->ck", R.conj(), h0)        # h_k^H h0
            gram = np.einsum("ckn,cln->ckl", R.conj(), R)     # h_k^H h_l
            alpha = np.einsum("ckl,cl->ck", np.linalg.pinv(gram, rcond=rcond), v)
            proj = np.einsum("ck,ck->c", v.conj(), alpha).real
        resid = np.maximum(np.einsum("cn,cn->c", h0.conj(), h0).real - proj, 0.0)
        return cfg.p_max * resid, np.ones(C, dtype=bool)
    return score


# --------------------------------------------------------------------------
# sweep engine

@dataclass
class SearchResult:
    apv: Apv
    objective_trace: list[float] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)   # grid points scanned per sweep
    sweeps: int = 0
    stuck: bool = False


def sweep(apv: Apv, scorer: Scorer, grid: SamplingGrid, fld: GridField,
          scenario: Scenario, cfg: ScenarioConfig,
          max_sweeps: int | None = None) -> SearchResult:
    """Repeat per-antenna enumeration until nothing moves or ``max_sweeps``."""
    max_sweeps = cfg.max_sweeps if max_sweeps is None else max_sweeps
    pos = apv.positions.copy()
    H = channel_matrix(pos, scenario, cfg.wavelength)
    n_ant = pos.shape[0]
    result = SearchResult(apv)
    inc_score, _ = scorer(0, H, H[:, :1])
    result.objective_trace.append(float(inc_score[0]))
    for _ in range(max_sweeps):
        moved = False
        evals = 0
        for n in range(n_ant):
            others = np.delete(pos, n, axis=0)
            mask = _spacing_ok(fld.points, others, cfg.min_spacing)
            score, ok = scorer(n, H, fld.values)
            evals += fld.values.shape[1]
            inc_score, inc_ok = scorer(n, H, H[:, n:n + 1])
            inc_score, inc_ok = float(inc_score[0]), bool(inc_ok[0])
            valid = mask & ok
            if not valid.any():
                result.stuck |= not inc_ok
                continue
            cand_score = np.where(valid, score, -np.inf)
            best = int(np.argmax(cand_score))  # first max = lowest (i, j)
            if inc_ok and inc_score >= cand_score[best]:
                continue
            if not inc_ok or cand_score[best] > inc_score:
                if not np.array_equal(fld.points[best], pos[n]):
                    moved = True
                pos[n] = fld.points[best]
                H[:, n] = fld.values[:, best]
        result.sweeps += 1
        result.evaluations.append(evals)
        score_now, _ = scorer(0, H, H[:, :1])
        result.objective_trace.append(float(score_now[0]))
        if not moved:
            break
    result.apv = Apv(pos, cfg.region_size, cfg.min_spacing)
    return result


def sequential_search_detailed(apv0: Apv, w, scenario: Scenario, cfg: ScenarioConfig,
                               grid: SamplingGrid | None = None,
                               fld: GridField | None = None,
                               max_sweeps: int | None = None) -> SearchResult:
    grid = grid or SamplingGrid.from_config(cfg)
    fld = fld or GridField(grid, scenario, cfg.wavelength)
    return sweep(apv0, fixed_w_scorer(w, cfg), grid, fld, scenario, cfg, max_sweeps)


def sequential_search(apv0: Apv, w, scenario: Scenario, cfg: ScenarioConfig,
                      grid: SamplingGrid | None = None,
                      fld: GridField | None = None) -> Apv:
    """Per-antenna grid enumeration maximizing ``|h0^H w|^2`` under the IT caps."""
    return sequential_search_detailed(apv0, w, scenario, cfg, grid, fld).apv


# --------------------------------------------------------------------------
# layouts

def random_grid_apv(cfg: ScenarioConfig, rng: np.random.Generator,
                    grid: SamplingGrid | None = None, tries: int = 100) -> Apv:
    """Uniform spacing-feasible grid placement by sequential rejection."""
    grid = grid or SamplingGrid.from_config(cfg)
    pts = grid.points
    for _ in range(tries):
        chosen = np.zeros((0, 2))
        for _n in range(cfg.n_antennas):
            ok = np.flatnonzero(_spacing_ok(pts, chosen, cfg.min_spacing))
            if ok.size == 0:
                break
            chosen = np.vstack([chosen, pts[rng.choice(ok)]])
        if chosen.shape[0] == cfg.n_antennas:
            return Apv(chosen, cfg.region_size, cfg.min_spacing)
    # dense fallback: sub-lattice that the config check guarantees exists
    step = max(1, math.ceil(cfg.min_spacing / grid.spacing - 1e-12))
    ax = grid.axis[::step]
    lattice = np.array([(x, y) for x in ax for y in ax])
    sel = rng.choice(lattice.shape[0], size=cfg.n_antennas, replace=False)
    return Apv(lattice[np.sort(sel)], cfg.region_size, cfg.min_spacing)


def fpa_layout(cfg: ScenarioConfig) -> Apv:
    """Centered near-square lattice at half-wavelength spacing, row-major fill."""
    n = cfg.n_antennas
    d = cfg.wavelength / 2
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    if max(cols - 1, rows - 1) * d > cfg.region_size:
        raise ConfigError("transmit region too small for the FPA layout")
    if cfg.min_spacing > d * (1 + 1e-12) and n > 1:
        raise ConfigError("FPA spacing lambda/2 is below min_spacing")
    idx = np.arange(n)
    x = (idx % cols - (cols - 1) / 2) * d
    y = (idx // cols - (rows - 1) / 2) * d
    return Apv(np.stack([x, y], axis=1), cfg.region_size, cfg.min_spacing)


def repair_apv(pos: np.ndarray, cfg: ScenarioConfig,
               grid: SamplingGrid | None = None) -> np.ndarray:
    """Clamp to the region, then greedily displace antennas to restore ``D_min``.

    Each antenna, in index order, is moved to the nearest point (among
    tangent points on the ``D_min`` circles of already placed antennas)
    that clears every placed antenna; the sampling grid is the last resort.
    """
    half = cfg.region_size / 2
    d_min = cfg.min_spacing * (1 + 1e-9)
    pos = np.clip(np.asarray(pos, dtype=float), -half, half)
    placed = []
    angles = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    ring = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    for p in pos:
        if not placed or _spacing_ok(p[None], np.array(placed), d_min)[0]:
            placed.append(p)
            continue
        P = np.array(placed)
        cands = []
        for q in P:
            v = p - q
            nv = np.hypot(*v)
            if nv > 0:
                cands.append(q + d_min * v / nv)
            cands.extend(q + d_min * ring)
        cands = np.clip(np.array(cands), -half, half)
        ok = _spacing_ok(cands, P, d_min)
        if ok.any():
            cands = cands[ok]
        else:
            grid = grid or SamplingGrid.from_config(cfg)
            gp = grid.points
            cands = gp[_spacing_ok(gp, P, d_min)]
        dist = np.hypot(*(cands - p).T)
        placed.append(cands[int(np.argmin(dist))])
    return np.array(placed)


# --------------------------------------------------------------------------
# particle swarm baseline

def _swarm_channels(X: np.ndarray, scenario: Scenario, wavelength: float) -> np.ndarray:
    """(S, N, 2) positions -> (S, K+1, N) channel entries."""
    return np.stack([point_responses(X, ps, wavelength)
                     for ps in scenario.receivers], axis=1)


def closed_form_powers(H: np.ndarray, w, cfg: ScenarioConfig,
                       rcond: float = 1e-10) -> np.ndarray:
    """Received power of three IT-feasible beamformers for a batch of layouts.

    ``H`` has shape (S, K+1, N). Columns of the result: ``w`` scaled down to
    meet every IT cap, power-backed-off MRT, and ZF (zero when N <= K).
    """
    w = w.w if isinstance(w, Beamformer) else np.asarray(w, dtype=complex)
    gam, P = cfg.it_threshold, cfg.p_max
    S = H.shape[0]
    h0, R = H[:, 0, :], H[:, 1:, :]
    out = np.zeros((S, 3))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.abs(H.conj() @ w) ** 2
        worst = s[:, 1:].max(axis=1) if R.shape[1] else np.zeros(S)
        out[:, 0] = np.where(worst > gam, gam / worst, 1.0) * s[:, 0]
        norm2 = np.einsum("sn,sn->s", h0.conj(), h0).real
        cross = np.abs(np.einsum("skn,sn->sk", R.conj(), h0)) ** 2
        worst = P * cross.max(axis=1) / norm2 if R.shape[1] else np.zeros(S)
        out[:, 1] = np.where(worst > gam, gam / worst, 1.0) * P * norm2
    out[:, 1] = np.nan_to_num(out[:, 1])
    K, N = R.shape[1], R.shape[2]
    if K == 0:
        out[:, 2] = P * norm2
    elif N > K:
        v = np.einsum("skn,sn->sk", R.conj(), h0)
        gram = np.einsum("skn,sln->skl", R.conj(), R)
        alpha = np.einsum("skl,sl->sk", np.linalg.pinv(gram, rcond=rcond), v)
        proj = np.einsum("sk,sk->s", v.conj(), alpha).real
        out[:, 2] = P * np.maximum(norm2 - proj, 0.0)
    return out


def best_closed_form_w(H: np.ndarray, w, cfg: ScenarioConfig) -> Beamformer:
    """The best of the three :func:`closed_form_powers` beamformers for one layout."""
    w = w.w if isinstance(w, Beamformer) else np.asarray(w, dtype=complex)
    powers = closed_form_powers(H[None], w, cfg)[0]
    choice = int(np.argmax(powers))
    if choice == 0:
        s = np.abs(H[1:].conj() @ w) ** 2
        worst = s.max() if s.size else 0.0
        scale = math.sqrt(cfg.it_threshold / worst) if worst > cfg.it_threshold else 1.0
        return Beamformer(w * scale)
    if choice == 1:
        return feasible_init_w(H[0], H[1:], cfg)
    try:
        return zf(H[0], H[1:], cfg.p_max)
    except ZeroForcingError:
        return feasible_init_w(H[0], H[1:], cfg)


def pso_optimize(w_update_callback, scenario: Scenario, cfg: ScenarioConfig,
                 rng: np.random.Generator | None = None, init_apv: Apv | None = None,
                 seeds: list | None = None):
    """Particle-swarm search of continuous positions.

    ``w_update_callback(apv, w_start)`` returns a :class:`Beamformer` for
    a layout, starting from the feasible ``w_start`` (or from scratch when
    it is ``None``). In ``"round"`` mode a particle's fitness is the best
    received power among three closed-form IT-feasible beamformers (the
    current beamformer backed off, backed-off MRT, ZF); after each swarm
    run the callback re-optimizes the beamformer at the best layout, and
    rounds repeat until the SNR gain drops below ``cfg.ao_tol``. In
    ``"candidate"`` mode every particle evaluation calls the callback.
    Extra layouts in ``seeds`` occupy the first particles.

    Returns ``(Apv, Beamformer, SolveReport)``.
    """
    t0 = time.perf_counter()
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    grid = SamplingGrid.from_config(cfg)
    apv = init_apv if init_apv is not None else random_grid_apv(cfg, rng, grid)
    extra = [a.positions for a in (seeds or [])]

    def snr_of(a, w):
        H = channel_matrix(a, scenario, cfg.wavelength)
        return abs(np.vdot(H[0], w.w)) ** 2 / cfg.noise_power

    if cfg.pso_mode == "candidate":
        def fitness(X):
            out = np.empty(X.shape[0])
            for s, x in enumerate(X):
                a = Apv(x, cfg.region_size, cfg.min_spacing)
                out[s] = snr_of(a, w_update_callback(a, None))
            return out

        best_x, _, trace = _swarm(fitness, [apv.positions] + extra, cfg, rng, grid)
        best = Apv(best_x, cfg.region_size, cfg.min_spacing)
        w = w_update_callback(best, None)
        rounds = 1
    else:
        w = w_update_callback(apv, None)
        snr = snr_of(apv, w)
        trace = [snr]
        best = apv
        rounds = 0
        for r in range(cfg.pso_rounds):
            rounds += 1
            wv = w.w

            def fitness(X, wv=wv):
                H = _swarm_channels(X, scenario, cfg.wavelength)
                return closed_form_powers(H, wv, cfg).max(axis=1)

            seed_list = [best.positions] + (extra if r == 0 else [])
            bx, _, _ = _swarm(fitness, seed_list, cfg, rng, grid)
            cand = Apv(bx, cfg.region_size, cfg.min_spacing)
            H = channel_matrix(cand, scenario, cfg.wavelength)
            w_new = w_update_callback(cand, best_closed_form_w(H, wv, cfg))
            snr_new = snr_of(cand, w_new)
            if snr_new < snr:
                break
            gain = (snr_new - snr) / snr if snr > 0 else math.inf
            best, w, snr = cand, w_new, snr_new
            trace.append(snr)
            if not gain >= cfg.ao_tol:
                break
    H = channel_matrix(best, scenario, cfg.wavelength)
    itf = np.abs(H[1:].conj() @ w.w) ** 2
    report = SolveReport(
        scheme="pso", snr=abs(np.vdot(H[0], w.w)) ** 2 / cfg.noise_power,
        interference=itf, objective_trace=[float(v) for v in trace],
        feasible=is_feasible_interference(itf, cfg.it_threshold, cfg.eps_it),
        iterations=rounds, wall_time=time.perf_counter() - t0,
        notes={"mode": cfg.pso_mode})
    return best, w, report


def _swarm(fitness, seed_pos: list, cfg: ScenarioConfig,
           rng: np.random.Generator, grid: SamplingGrid):
    """Global-best PSO over (N, 2) layouts; the first particles start at ``seed_pos``."""
    S, N = cfg.pso_swarm, seed_pos[0].shape[0]
    half = cfg.region_size / 2
    X = rng.uniform(-half, half, size=(S, N, 2))
    n_seed = min(len(seed_pos), S)
    for s in range(n_seed):
        X[s] = seed_pos[s]
    for s in range(n_seed, S):
        X[s] = repair_apv(X[s], cfg, grid)
    vmax = 0.2 * cfg.region_size
    V = rng.uniform(-vmax, vmax, size=X.shape) * 0.1
    f = fitness(X)
    pbest, pbest_f = X.copy(), f.copy()
    g = int(np.argmax(pbest_f))
    trace = [float(pbest_f[g])]
    for _ in range(cfg.pso_iters):
        r1 = rng.random(X.shape)
        r2 = rng.random(X.shape)
        V = (cfg.pso_inertia * V + cfg.pso_cognitive * r1 * (pbest - X)
             + cfg.pso_social * r2 * (pbest[g] - X))
        V = np.clip(V, -vmax, vmax)
        X = X + V
        for s in range(S):
            X[s] = repair_apv(X[s], cfg, grid)
        f = fitness(X)
        better = f > pbest_f
        pbest[better] = X[better]
        pbest_f[better] = f[better]
        g = int(np.argmax(pbest_f))
        trace.append(float(pbest_f[g]))
    return pbest[g].copy(), float(pbest_f[g]), trace

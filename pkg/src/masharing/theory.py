"""Executable interference-suppression constructions for MRT transmission.

Two existence results are turned into procedures here:

* two antennas stacked along ``y`` with an integer spacing ``d_y`` keep
  every PR below ``Gamma`` under full-power MRT (:func:`theorem1_construct`);
* with a single SR path, ``N`` antennas can null up to ``I_N`` PR paths
  (the number of prime factors of ``N``) while staying MRT-coherent toward
  the SR (:func:`theorem2_verify`).

Both return certificates that are re-checked by direct evaluation rather
than trusted from the construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .beamforming import mrt
from .channel import Scenario, channel_matrix
from .core import Apv, ChannelError, ConfigError, ScenarioConfig, seeded_rng

__all__ = [
    "AngleDiffs", "angle_diffs", "beam_gain", "g_value", "lemma1_spacing_search",
    "mrt_interference_expansion", "sr_gain_expansion", "Theorem1Certificate",
    "Theorem1SearchError", "theorem1_construct", "estimate_h_min",
    "prime_factors", "FactorReport", "theorem2_verify",
]

_TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# angle differences and beam gains

@dataclass(frozen=True)
class AngleDiffs:
    """``a[k][p][q]`` and ``b[k][p][q]`` for PR ``k+1``, PR path ``p``, SR path ``q``.

    ``a = sin(t0q)cos(f0q) - sin(tkp)cos(fkp)`` and ``b = cos(t0q) - cos(tkp)``.
    Stored as one ``(Lk, L0)`` array per PR since path counts may differ.
    """

    a: tuple[np.ndarray, ...]
    b: tuple[np.ndarray, ...]

    def all_b(self) -> np.ndarray:
        return np.concatenate([bk.ravel() for bk in self.b]) if self.b else np.zeros(0)


def _dirs(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.sin(theta) * np.cos(phi), np.cos(theta)


def angle_diffs(scenario: Scenario) -> AngleDiffs:
    u0, v0 = _dirs(scenario.sr_paths.theta, scenario.sr_paths.phi)
    a, b = [], []
    for ps in scenario.pr_paths:
        uk, vk = _dirs(ps.theta, ps.phi)
        a.append(u0[None, :] - uk[:, None])
        b.append(v0[None, :] - vk[:, None])
    return AngleDiffs(tuple(a), tuple(b))


def beam_gain(apv, theta, phi, sr_path, wavelength: float):
    """MRT beam gain toward ``(theta, phi)`` for a single-path SR channel.

    ``G = |sum_n exp(j 2pi/lambda (x_n a + y_n b))|^2`` lies in ``[0, N^2]``
    and equals ``N^2`` toward the SR direction itself. ``theta`` and ``phi``
    may be arrays of equal shape; the result then has that shape.
    """
    pos = apv.positions if isinstance(apv, Apv) else np.asarray(apv, dtype=float)
    u0, v0 = _dirs(*sr_path)
    u, v = _dirs(theta, phi)
    a = np.asarray(u0 - u)
    b = np.asarray(v0 - v)
    ph = (_TWO_PI / wavelength) * (np.multiply.outer(a, pos[:, 0])
                                   + np.multiply.outer(b, pos[:, 1]))
    g = np.abs(np.exp(1j * ph).sum(axis=-1)) ** 2
    return float(g) if g.ndim == 0 else g


def _unit_ratio(units: str, wavelength: float) -> float:
    """Spacing unit expressed in wavelengths."""
    if units == "wavelength":
        return 1.0
    if units == "meter":
        return 1.0 / wavelength
    raise ConfigError(f"unknown spacing unit {units!r}")


def g_value(b, d_y, unit_ratio: float = 1.0):
    """``(1 + cos(2pi d_y b u)) / 2`` with ``u`` the spacing unit in wavelengths."""
    return 0.5 * (1.0 + np.cos(_TWO_PI * unit_ratio * np.multiply.outer(d_y, b)))


def lemma1_spacing_search(b_values, delta: float, d_max: int,
                          unit_ratio: float = 1.0, chunk: int = 4096) -> int | None:
    """Smallest integer ``d_y`` in ``[1, d_max]`` with ``g(b, d_y) < delta`` for every ``b``.

    Returns ``None`` when no such spacing exists up to ``d_max``.
    """
    b = np.asarray(b_values, dtype=float).ravel()
    if b.size == 0:
        raise ValueError("b_values must be nonempty")
    if delta <= 0:
        raise ValueError("delta must be positive")
    for start in range(1, int(d_max) + 1, chunk):
        d = np.arange(start, min(start + chunk, int(d_max) + 1), dtype=float)
        ok = np.all(g_value(b, d, unit_ratio) < delta, axis=1)
        hit = np.flatnonzero(ok)
        if hit.size:
            return int(d[hit[0]])
    return None


# --------------------------------------------------------------------------
# double-sum evaluation of MRT interference

def _pair_sum(pos, paths_k, paths_0, wavelength):
    """``sum_p sum_q conj(beta_kp) beta_0q sum_n exp(j 2pi/lambda (x_n a + y_n b))``."""
    uk, vk = _dirs(paths_k.theta, paths_k.phi)
    u0, v0 = _dirs(paths_0.theta, paths_0.phi)
    a = u0[None, :] - uk[:, None]
    b = v0[None, :] - vk[:, None]
    ph = (_TWO_PI / wavelength) * (a[..., None] * pos[:, 0] + b[..., None] * pos[:, 1])
    s = np.exp(1j * ph).sum(axis=-1)
    return complex(np.sum(np.conj(paths_k.gain)[:, None] * paths_0.gain[None, :] * s))


def sr_gain_expansion(apv, scenario: Scenario, wavelength: float) -> float:
    """``||h0||^2`` as a double sum over SR path pairs."""
    pos = apv.positions if isinstance(apv, Apv) else np.asarray(apv, dtype=float)
    return _pair_sum(pos, scenario.sr_paths, scenario.sr_paths, wavelength).real


def mrt_interference_expansion(apv, scenario: Scenario, cfg: ScenarioConfig,
                               k: int) -> float:
    """Full-power MRT interference at PR ``k`` (1-based) from the path-pair expansion.

    Independent of :func:`masharing.beamforming.mrt_interference`: neither
    channel vector is formed.
    """
    if not 1 <= k <= scenario.k:
        raise IndexError(f"PR index {k} outside 1..{scenario.k}")
    pos = apv.positions if isinstance(apv, Apv) else np.asarray(apv, dtype=float)
    norm0 = sr_gain_expansion(pos, scenario, cfg.wavelength)
    if norm0 <= 0:
        raise ChannelError("MRT undefined for a zero SR channel")
    s = _pair_sum(pos, scenario.pr_paths[k - 1], scenario.sr_paths, cfg.wavelength)
    return cfg.p_max * abs(s) ** 2 / norm0


# --------------------------------------------------------------------------
# two-antenna integer-spacing construction

class Theorem1SearchError(RuntimeError):
    """No spacing up to ``d_max`` met every IT cap."""

    def __init__(self, msg, best_dy, best_max_pk, certificate_draft=None):
        super().__init__(msg)
        self.best_dy = best_dy
        self.best_max_pk = best_max_pk
        self.certificate_draft = certificate_draft


@dataclass
class Theorem1Certificate:
    d_y: int
    units: str                     # "wavelength" or "meter"
    route: str                     # "lemma1" or "exact-scan"
    delta: float
    gamma_ratio: float             # P_max / H_min
    h_min: float                   # sampled estimate, capped by ||h0(T)||^2
    h0_norm2: float
    p_k: np.ndarray                # path-pair expansion
    p_k_direct: np.ndarray         # |h_k^H w_mrt|^2 from channel vectors
    bound_first: np.ndarray        # gamma |sum sum conj(b) b (1 + e^{j..})|^2
    bound_triangle: np.ndarray     # 2 gamma |sum sum |b||b| sqrt(1 + cos)|^2
    bound_delta: np.ndarray        # 4 gamma delta (sum sum |b||b|)^2
    threshold: float
    region_size: float
    notes: dict = field(default_factory=dict)

    @property
    def max_p_k(self) -> float:
        return float(np.max(self.p_k)) if self.p_k.size else 0.0

    @property
    def certified(self) -> bool:
        return bool(np.all(self.p_k <= self.threshold))

    def record(self) -> dict:
        return {
            "d_y": self.d_y, "units": self.units, "route": self.route,
            "delta": self.delta, "gamma_ratio": self.gamma_ratio, "h_min": self.h_min,
            "max_p_k": self.max_p_k, "threshold": self.threshold,
            "certified": self.certified,
        }


def estimate_h_min(scenario: Scenario, cfg: ScenarioConfig, extent: float,
                   rng: np.random.Generator, samples: int | None = None) -> float:
    """Smallest ``||h0||^2`` over random spacing-feasible layouts in ``[-extent/2, extent/2]^2``.

    This is only an estimate of the true minimum over all layouts.
    """
    samples = cfg.hmin_samples if samples is None else samples
    n = cfg.n_antennas
    found = []
    need = samples
    for _ in range(50):
        pos = rng.uniform(-extent / 2, extent / 2, size=(2 * need, n, 2))
        if n > 1:
            diff = pos[:, :, None, :] - pos[:, None, :, :]
            dist = np.sqrt((diff ** 2).sum(-1))
            dist[:, np.arange(n), np.arange(n)] = np.inf
            pos = pos[dist.min(axis=(1, 2)) >= cfg.min_spacing]
        found.append(pos[:need])
        need -= len(found[-1])
        if need <= 0:
            break
    pos = np.concatenate(found)
    u0, v0 = _dirs(scenario.sr_paths.theta, scenario.sr_paths.phi)
    ph = (_TWO_PI / cfg.wavelength) * (pos[..., 0:1] * u0 + pos[..., 1:2] * v0)
    h = np.exp(1j * ph) @ scenario.sr_paths.gain
    return float(np.min(np.sum(np.abs(h) ** 2, axis=1)))


def _two_antenna_pk(scenario, wavelength, p_max, y2):
    """Exact MRT interference for ``t1 = 0``, ``t2 = (0, y2)``; ``y2`` may be an array."""
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    rx = scenario.receivers
    h1 = np.array([ps.gain.sum() for ps in rx])
    h2 = np.stack([np.exp(1j * (_TWO_PI / wavelength) * np.multiply.outer(y2, np.cos(ps.theta)))
                   @ ps.gain for ps in rx], axis=0)            # (K+1, D)
    norm0 = abs(h1[0]) ** 2 + np.abs(h2[0]) ** 2
    inner = np.conj(h1[1:, None]) * h1[0] + np.conj(h2[1:]) * h2[0]
    return p_max * np.abs(inner) ** 2 / norm0                 # (K, D)


def _scan_exact(scenario, cfg, unit_ratio, d_max, chunk=2048):
    best = (None, math.inf)
    for start in range(1, int(d_max) + 1, chunk):
        d = np.arange(start, min(start + chunk, int(d_max) + 1), dtype=float)
        worst = _two_antenna_pk(scenario, cfg.wavelength, cfg.p_max,
                                d * unit_ratio * cfg.wavelength).max(axis=0)
        ok = np.flatnonzero(worst <= cfg.it_threshold)
        if ok.size:
            return int(d[ok[0]]), float(worst[ok[0]])
        i = int(np.argmin(worst))
        if worst[i] < best[1]:
            best = (int(d[i]), float(worst[i]))
    return None, best


def _bounds(scenario, cfg, y2, gamma_ratio, delta):
    ad = angle_diffs(scenario)
    k_wave = _TWO_PI / cfg.wavelength
    first, tri, dl = [], [], []
    b0 = scenario.sr_paths.gain
    for ps, bk in zip(scenario.pr_paths, ad.b):
        coef = np.conj(ps.gain)[:, None] * b0[None, :]
        mag = np.abs(ps.gain)[:, None] * np.abs(b0)[None, :]
        first.append(gamma_ratio * abs(np.sum(coef * (1 + np.exp(1j * k_wave * y2 * bk)))) ** 2)
        tri.append(2 * gamma_ratio * np.sum(mag * np.sqrt(1 + np.cos(k_wave * y2 * bk))) ** 2)
        dl.append(4 * gamma_ratio * delta * np.sum(mag) ** 2)
    return np.array(first), np.array(tri), np.array(dl)


def theorem1_construct(scenario: Scenario, cfg: ScenarioConfig, d_max: int = 10_000,
                       rng: np.random.Generator | None = None,
                       units: str | None = None) -> tuple[Apv, Theorem1Certificate]:
    """Place two antennas at ``(0, 0)`` and ``(0, d_y u)`` so MRT meets every IT cap.

    ``u`` is one wavelength (``units="wavelength"``) or one meter. The
    threshold ``delta`` on ``g`` comes from ``gamma = P_max / H_min`` with
    ``H_min`` estimated by :func:`estimate_h_min`; the smallest ``d_y``
    satisfying that threshold for every angle difference ``b`` is tried
    first. If none exists up to ``d_max``, or it does not actually certify,
    every ``d_y`` is scanned with the exact interference, first in the
    requested unit and then in the other one.

    The region is enlarged to ``2 d_y u`` when needed; that is recorded in
    ``certificate.notes``. Raises :class:`Theorem1SearchError` carrying the
    tightest worst-PR interference when nothing certifies.
    """
    if cfg.n_antennas != 2:
        raise ConfigError("the integer-spacing construction needs exactly two antennas")
    if scenario.k == 0:
        raise ConfigError("no PRs to protect")
    ad = angle_diffs(scenario)
    b_all = ad.all_b()
    if np.any(b_all == 0.0):
        raise ChannelError("SR and PR paths share an elevation angle (b = 0)")
    rng = rng if rng is not None else seeded_rng(cfg.rng_seed, 7)
    units = units or cfg.dy_units
    order = [units] + [u for u in ("wavelength", "meter") if u != units]

    b0 = np.abs(scenario.sr_paths.gain)
    sums = np.array([np.sum(np.abs(ps.gain)[:, None] * b0[None, :]) ** 2
                     for ps in scenario.pr_paths])
    extent = max(cfg.region_size, 2 * d_max * max(_unit_ratio(u, cfg.wavelength)
                                                  for u in order) * cfg.wavelength)
    h_min = estimate_h_min(scenario, cfg, extent, rng)

    def gamma_delta(hm):
        g = cfg.p_max / hm
        return g, min(1.0, float(np.min(cfg.it_threshold / (4 * g * sums))))

    gamma_ratio, delta = gamma_delta(h_min)

    chosen = None
    notes = {}
    best = (None, math.inf, units)
    for u in order:
        ratio = _unit_ratio(u, cfg.wavelength)
        d = lemma1_spacing_search(b_all, delta, d_max, ratio)
        if d is not None:
            pk = _two_antenna_pk(scenario, cfg.wavelength, cfg.p_max,
                                 d * ratio * cfg.wavelength)[:, 0]
            if np.all(pk <= cfg.it_threshold):
                chosen = (d, u, "lemma1")
                break
            notes[f"lemma1_{u}"] = f"d_y={d} met delta but not every cap"
        d, info = _scan_exact(scenario, cfg, ratio, d_max)
        if d is not None:
            chosen = (d, u, "exact-scan")
            break
        if info[1] < best[1]:
            best = (info[0], info[1], u)
    if chosen is None:
        raise Theorem1SearchError(
            f"no spacing up to d_max={d_max} meets every IT cap; tightest worst-PR "
            f"interference {best[1]:.3e} W at d_y={best[0]} ({best[2]})",
            best_dy=best[0], best_max_pk=best[1])

    d, u, route = chosen
    y2 = d * _unit_ratio(u, cfg.wavelength) * cfg.wavelength
    region = cfg.region_size
    if 2 * y2 > region:
        region = 2 * y2 * (1 + 1e-12)
        notes["region_enlarged"] = region
    apv = Apv(np.array([[0.0, 0.0], [0.0, y2]]), region, cfg.min_spacing)
    h0n = sr_gain_expansion(apv, scenario, cfg.wavelength)
    if h0n < h_min:
        notes["h_min_lowered"] = h_min
        h_min = h0n
        gamma_ratio, _ = gamma_delta(h_min)
    p_k = np.array([mrt_interference_expansion(apv, scenario, cfg, k)
                    for k in range(1, scenario.k + 1)])
    H = channel_matrix(apv, scenario, cfg.wavelength)
    w = mrt(H[0], cfg.p_max).w
    p_direct = np.abs(H[1:].conj() @ w) ** 2
    first, tri, dl = _bounds(scenario, cfg, y2, gamma_ratio, delta)
    cert = Theorem1Certificate(
        d_y=d, units=u, route=route, delta=delta, gamma_ratio=gamma_ratio, h_min=h_min,
        h0_norm2=h0n, p_k=p_k, p_k_direct=p_direct, bound_first=first,
        bound_triangle=tri, bound_delta=dl, threshold=cfg.it_threshold,
        region_size=region, notes=notes)
    return apv, cert


# --------------------------------------------------------------------------
# null steering for a single SR path

def prime_factors(n: int) -> list[int]:
    """Prime factors of ``n`` with multiplicity, non-decreasing."""
    if n < 1:
        raise ValueError("n must be positive")
    out, p = [], 2
    while p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


@dataclass
class FactorReport:
    n: int
    factors: list[int]
    l_tot: int
    found: bool = False
    max_gain: float = math.inf
    starts: int = 0
    region_binding: bool = False
    note: str = ""

    @property
    def i_n(self) -> int:
        return len(self.factors)

    @property
    def condition_met(self) -> bool:
        return self.l_tot <= self.i_n


def theorem2_verify(n: int, pr_paths, sr_path, cfg: ScenarioConfig,
                    rng: np.random.Generator | None = None, n_starts: int = 200,
                    tol: float | None = None) -> tuple[Apv | None, FactorReport]:
    """Search for a layout whose MRT beam gain vanishes on every PR path.

    ``pr_paths`` is a flat list of ``(theta, phi)`` pairs and ``sr_path``
    the single SR path. When ``L_tot <= I_N`` the ``y`` coordinates are
    fixed ``D_min`` apart (centered), which honors the spacing constraint
    on its own, and the ``x`` coordinates are searched inside the region:
    a coordinate-descent pass from each random start, then a bounded
    least-squares polish of the real and imaginary array factors. Success
    means every gain is below ``tol`` (default ``1e-8 N^2``). A failed
    search is inconclusive, not a counterexample.
    """
    pr = np.asarray(pr_paths, dtype=float).reshape(-1, 2)
    report = FactorReport(n=n, factors=prime_factors(n), l_tot=len(pr))
    if not report.condition_met:
        report.note = f"L_tot={report.l_tot} exceeds I_N={report.i_n}"
        return None, report
    if len(pr) == 0:
        report.found, report.max_gain = True, 0.0
        report.note = "no PR paths to null"
        pos = np.column_stack([np.zeros(n), (np.arange(n) - (n - 1) / 2) * cfg.min_spacing])
        return Apv(pos, max(cfg.region_size, 2 * np.abs(pos).max() + 1e-12),
                   cfg.min_spacing), report
    tol = 1e-8 * n * n if tol is None else tol
    half = cfg.region_size / 2
    y = (np.arange(n) - (n - 1) / 2) * cfg.min_spacing
    if np.abs(y).max() > half:
        report.region_binding = True
        report.note = "region too small for the fixed y column"
        return None, report
    rng = rng if rng is not None else seeded_rng(cfg.rng_seed, 11)
    u0, v0 = _dirs(*sr_path)
    u, v = _dirs(pr[:, 0], pr[:, 1])
    kw = _TWO_PI / cfg.wavelength
    a = kw * (u0 - u)
    yb = np.exp(1j * kw * np.outer(v0 - v, y))            # (L, N)

    def terms(x):
        return yb * np.exp(1j * np.outer(a, x))

    def resid(x):
        z = terms(x).sum(1)
        return np.concatenate([z.real, z.imag])

    def jac(x):
        t = 1j * a[:, None] * terms(x)
        return np.vstack([t.real, t.imag])

    def gains(x):
        return np.abs(terms(x).sum(1)) ** 2

    scan = np.linspace(-half, half, 257)
    best_x, best_g = None, math.inf
    for s in range(1, n_starts + 1):
        x = rng.uniform(-half, half, n)
        for _ in range(2):
            for i in range(n):
                other = terms(x).sum(1) - terms(x)[:, i]
                cand = other[:, None] + yb[:, i:i + 1] * np.exp(1j * np.outer(a, scan))
                x[i] = scan[int(np.argmin(np.sum(np.abs(cand) ** 2, axis=0)))]
        sol = least_squares(resid, x, jac=jac, bounds=(-half, half),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        g = float(gains(sol.x).max())
        if g < best_g:
            best_x, best_g = sol.x, g
        if g < tol:
            break
    report.starts = s
    report.max_gain = best_g
    report.found = best_g < tol
    report.region_binding = bool(np.any(np.abs(best_x) >= half * (1 - 1e-9)))
    if not report.found:
        report.note = "search inconclusive" + (" (region binds)" if report.region_binding else "")
        return None, report
    return Apv(np.column_stack([best_x, y]), cfg.region_size, cfg.min_spacing), report

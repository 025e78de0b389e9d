"""Fixed-position transmit beamformers: MRT, ZF and the SCA design.

The SCA inner problem maximizes a linear function ``Re{c^H w}`` over the
power ball intersected with one cylinder ``|h_k^H w| <= sqrt(Gamma)`` per
primary receiver. It is solved by a log-barrier interior-point method on
the real embedding ``x = [Re w; Im w]`` after normalizing to
``||u|| <= 1`` and ``|g_k^H u| <= 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import Scenario, channel_matrix, channel_vector
from .core import Apv, Beamformer, ChannelError, ScenarioConfig, as_complex_vec

__all__ = [
    "ZeroForcingError", "InfeasibleStartError", "SolverWarning", "ScaTrace",
    "P2iResult", "mrt", "mrt_interference", "zf", "solve_p2i",
    "solve_p2i_detailed", "sca_beamforming", "feasible_init_w",
]


class ZeroForcingError(ChannelError):
    """SR channel lies in the span of the PR channels, so ZF has no direction."""


class InfeasibleStartError(ValueError):
    """SCA started from a beamformer violating power or IT constraints."""


class SolverWarning(RuntimeWarning):
    pass


def _pr_matrix(pr_channels, n: int) -> np.ndarray:
    if pr_channels is None:
        return np.zeros((0, n), dtype=complex)
    hs = np.asarray(pr_channels, dtype=complex)
    if hs.size == 0:
        return np.zeros((0, n), dtype=complex)
    hs = hs.reshape(-1, n)
    if not np.all(np.isfinite(hs)):
        raise ChannelError("PR channels contain non-finite entries")
    return hs


def mrt(h0, p_max: float) -> Beamformer:
    """Maximum-ratio transmission ``sqrt(P) h0 / ||h0||``."""
    h0 = as_complex_vec(h0)
    nrm = np.linalg.norm(h0)
    if nrm == 0:
        raise ChannelError("MRT undefined for a zero SR channel")
    return Beamformer(math.sqrt(p_max) * h0 / nrm)


def mrt_interference(apv: Apv, scenario: Scenario, cfg: ScenarioConfig, k: int) -> float:
    """Interference at PR ``k`` (1-based receiver id) under full-power MRT."""
    if not 1 <= k <= scenario.k:
        raise IndexError(f"PR index {k} outside 1..{scenario.k}")
    h0 = channel_vector(apv, scenario.sr_paths, cfg.wavelength)
    hk = channel_vector(apv, scenario.pr_paths[k - 1], cfg.wavelength)
    w = mrt(h0, cfg.p_max).w
    return float(abs(np.vdot(hk, w)) ** 2)


def zf(h0, pr_channels, p_max: float, rcond: float = 1e-10) -> Beamformer:
    """Zero-forcing beamformer nulling every PR channel.

    ``pr_channels`` holds one channel per row. A rank-deficient PR matrix
    (singular-value ratio below ``rcond``) triggers a :class:`SolverWarning`
    and the projection falls back to the numerical range of the matrix.
    """
    h0 = as_complex_vec(h0)
    hs = _pr_matrix(pr_channels, h0.size)
    if hs.shape[0] == 0:
        return mrt(h0, p_max)
    R = hs.T  # N x K, columns are h_k
    U, s, _ = np.linalg.svd(R, full_matrices=False)
    keep = s > rcond * s[0] if s.size and s[0] > 0 else np.zeros(0, bool)
    if keep.sum() < hs.shape[0]:
        warnings.warn("PR channel matrix is rank deficient; using pseudo-inverse "
                      f"projection (rcond={rcond:g})", SolverWarning, stacklevel=2)
    Ur = U[:, keep]
    w_hat = h0 - Ur @ (Ur.conj().T @ h0)
    nrm = np.linalg.norm(w_hat)
    if nrm <= 1e-12 * np.linalg.norm(h0):
        raise ZeroForcingError("SR channel lies in the span of the PR channels")
    return Beamformer(math.sqrt(p_max) * w_hat / nrm)


def feasible_init_w(h0, pr_channels, cfg: ScenarioConfig) -> Beamformer:
    """MRT scaled down by the largest ``c`` in (0, 1] meeting every IT cap."""
    h0 = as_complex_vec(h0)
    if np.linalg.norm(h0) == 0:
        return Beamformer(np.zeros_like(h0))
    w = mrt(h0, cfg.p_max).w
    hs = _pr_matrix(pr_channels, h0.size)
    if hs.shape[0]:
        worst = float(np.max(np.abs(hs.conj() @ w) ** 2))
        if worst > cfg.it_threshold:
            w = w * math.sqrt(cfg.it_threshold / worst)
    return Beamformer(w)


# --------------------------------------------------------------------------
# inner convex problem

@dataclass
class P2iResult:
    w: np.ndarray
    objective: float          # Re{c^H w}
    gap: float                # duality-gap bound, same units as objective
    newton_steps: int
    converged: bool
    method: str


def _barrier_solve(q: np.ndarray, G: np.ndarray, gap_tol: float,
                   max_newton: int, mu: float = 20.0):
    """Maximize ``q.x`` s.t. ``||x|| <= 1`` and ``||G_k x|| <= 1``.

    ``G`` has shape (K, 2, d). Returns ``(x, gap, steps, converged)``.
    """
    d = q.size
    m = G.shape[0] + 1
    GtG = np.einsum("kij,kil->kjl", G, G)  # (K, d, d)
    x = np.zeros(d)
    t = float(m)
    steps = 0
    eye = np.eye(d)

    def slacks(z):
        s0 = 1.0 - z @ z
        sk = 1.0 - np.einsum("j,kjl,l->k", z, GtG, z)
        return s0, sk

    def delta(z, dz, s0, sk, tt):
        # barrier change written via slack ratios to avoid cancellation at large t
        n0, nk = slacks(z + dz)
        if n0 <= 0 or np.any(nk <= 0):
            return math.inf
        return (-tt * (q @ dz) - math.log(n0 / s0)
                - float(np.sum(np.log(nk / sk))))

    while True:
        # centering
        while steps < max_newton:
            s0, sk = slacks(x)
            Px = GtG @ x  # (K, d)
            grad = -t * q + 2 * x / s0 + 2 * np.sum(Px / sk[:, None], axis=0)
            hess = (2 / s0) * eye + (4 / s0 ** 2) * np.outer(x, x)
            hess += 2 * np.einsum("kjl,k->jl", GtG, 1 / sk)
            hess += 4 * np.einsum("kj,kl,k->jl", Px, Px, 1 / sk ** 2)
            try:
                dx = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            dec2 = -grad @ dx
            steps += 1
            if dec2 / 2 <= 1e-9:
                break
            step = 1.0
            while step > 1e-8:
                if delta(x, step * dx, s0, sk, t) <= -0.25 * step * dec2:
                    break
                step *= 0.5
            else:
                break
            x = x + step * dx
        obj = q @ x
        gap = m / t
        if gap <= gap_tol * max(abs(obj), 1e-300) or gap <= 1e-15:
            return x, gap, steps, True
        if steps >= max_newton:
            return x, gap, steps, False
        t *= mu


def solve_p2i_detailed(h0, pr_channels, w_anchor, p_max: float, gamma: float,
                       gap_tol: float = 1e-10, max_newton: int = 500) -> P2iResult:
    """Solve the SCA subproblem at anchor ``w_anchor`` and report diagnostics."""
    h0 = as_complex_vec(h0)
    n = h0.size
    hs = _pr_matrix(pr_channels, n)
    w_i = w_anchor.w if isinstance(w_anchor, Beamformer) else as_complex_vec(w_anchor, n)
    c = h0 * np.vdot(h0, w_i)  # H_0 w_i
    cn = np.linalg.norm(c)
    if cn == 0:
        return P2iResult(np.zeros(n, complex), 0.0, 0.0, 0, True, "degenerate")
    sp = math.sqrt(p_max)
    # linear objective over the ball: closed form, optimal whenever IT holds
    w_ball = sp * c / cn
    if hs.shape[0] == 0 or np.all(np.abs(hs.conj() @ w_ball) ** 2 <= gamma):
        return P2iResult(w_ball, float(sp * cn), 0.0, 0, True, "closed-form")

    g = hs * math.sqrt(p_max / gamma)
    q = np.concatenate([c.real, c.imag]) / cn
    # |g^H u| = ||[a.x, b.x]|| with a = [g_r; g_i], b = [-g_i; g_r]
    a = np.concatenate([g.real, g.imag], axis=1)
    b = np.concatenate([-g.imag, g.real], axis=1)
    G = np.stack([a, b], axis=1)
    x, gap, steps, ok = _barrier_solve(q, G, gap_tol, max_newton)
    if not ok:
        warnings.warn(f"inner solver stopped after {steps} Newton steps "
                      f"(gap {gap:.3g}); returning best iterate",
                      SolverWarning, stacklevel=2)
    w = sp * (x[:n] + 1j * x[n:])
    return P2iResult(w, float(np.vdot(c, w).real), gap * sp * cn, steps, ok,
                     "interior-point")


def solve_p2i(h0, pr_channels, w_anchor, p_max: float, gamma: float,
              gap_tol: float = 1e-10, max_newton: int = 500) -> Beamformer:
    """Maximize ``Re{w_i^H H_0 w}`` s.t. ``||w||^2 <= P`` and ``|h_k^H w|^2 <= Gamma``."""
    res = solve_p2i_detailed(h0, pr_channels, w_anchor, p_max, gamma,
                             gap_tol, max_newton)
    return Beamformer(res.w)


# --------------------------------------------------------------------------
# SCA loop

@dataclass
class ScaTrace:
    objective: list[float] = field(default_factory=list)   # w^H H_0 w
    surrogate: list[float] = field(default_factory=list)   # f(w) at the new iterate
    status: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.objective) - 1


def _is_feasible(w, hs, cfg: ScenarioConfig) -> bool:
    if np.vdot(w, w).real > cfg.p_max * (1 + cfg.eps_pow):
        return False
    if hs.shape[0] and np.any(np.abs(hs.conj() @ w) ** 2
                              > cfg.it_threshold * (1 + cfg.eps_it)):
        return False
    return True


def sca_beamforming(h0, pr_channels, cfg: ScenarioConfig,
                    w_init=None, rng: np.random.Generator | None = None):
    """Successive convex approximation of the fixed-position design.

    Iterates the inner problem from ``w_init`` (default
    :func:`feasible_init_w`) until the relative gain in ``|h0^H w|^2``
    drops below ``cfg.sca_tol`` or ``cfg.sca_max_iters`` is reached. A
    candidate that would lower the objective is rejected and ends the
    loop, so the trace is non-decreasing by construction.

    Returns ``(Beamformer, ScaTrace)``.
    """
    h0 = as_complex_vec(h0)
    hs = _pr_matrix(pr_channels, h0.size)
    if w_init is None:
        w = feasible_init_w(h0, hs, cfg).w
    else:
        w = w_init.w if isinstance(w_init, Beamformer) else as_complex_vec(w_init, h0.size)
        if not _is_feasible(w, hs, cfg):
            raise InfeasibleStartError("SCA start point violates power or IT constraints")
    trace = ScaTrace()
    obj = abs(np.vdot(h0, w)) ** 2
    trace.objective.append(obj)
    trace.surrogate.append(math.nan)
    trace.status.append("init")

    if obj == 0 and np.linalg.norm(h0) > 0:
        # zero gradient at the anchor: restart from the scaled MRT point
        w = feasible_init_w(h0, hs, cfg).w
        if abs(np.vdot(h0, w)) == 0:
            rng = rng or np.random.default_rng(0)
            d = rng.standard_normal(h0.size) + 1j * rng.standard_normal(h0.size)
            w = 1e-6 * math.sqrt(cfg.p_max) * d / np.linalg.norm(d)
            if not _is_feasible(w, hs, cfg):
                w = np.zeros_like(h0)
        obj = abs(np.vdot(h0, w)) ** 2
        trace.objective.append(obj)
        trace.surrogate.append(math.nan)
        trace.status.append("restart")

    for _ in range(cfg.sca_max_iters):
        res = solve_p2i_detailed(h0, hs, w, cfg.p_max, cfg.it_threshold,
                                 cfg.ip_gap_tol, cfg.ip_max_newton)
        if res.method == "degenerate":
            trace.status[-1] += "|degenerate"
            break
        new_obj = abs(np.vdot(h0, res.w)) ** 2
        if new_obj < obj or not _is_feasible(res.w, hs, cfg):
            trace.status.append("rejected")
            break
        gain = (new_obj - obj) / obj if obj > 0 else math.inf
        w, obj = res.w, new_obj
        trace.objective.append(obj)
        trace.surrogate.append(res.objective)
        trace.status.append("accepted")
        if gain < cfg.sca_tol:
            break
    return Beamformer(w), trace


def sca_at(apv: Apv, scenario: Scenario, cfg: ScenarioConfig, w_init=None):
    """Run SCA for the channels seen from ``apv``."""
    H = channel_matrix(apv, scenario, cfg.wavelength)
    return sca_beamforming(H[0], H[1:], cfg, w_init)

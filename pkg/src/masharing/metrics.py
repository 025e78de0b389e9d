"""Objective and constraint evaluation for the joint design problem."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import Scenario, channel_matrix
from .core import Apv, Beamformer, ChannelError, ScenarioConfig, min_pairwise_distance

__all__ = ["received_snr", "interference_power", "interference_powers",
           "check_feasible", "Violation", "FeasibilityVerdict"]


def _weights(w) -> np.ndarray:
    return w.w if isinstance(w, Beamformer) else np.asarray(w, dtype=complex)


def _inner(h, w) -> complex:
    h = np.asarray(h, dtype=complex)
    w = _weights(w)
    if h.shape != w.shape:
        raise ChannelError(f"dimension mismatch: channel {h.shape} vs weights {w.shape}")
    return complex(np.vdot(h, w))


def received_snr(w, h0, noise_power: float) -> float:
    """``|h0^H w|^2 / sigma^2``."""
    return abs(_inner(h0, w)) ** 2 / noise_power


def interference_power(w, hk) -> float:
    """``|hk^H w|^2`` in watts."""
    return abs(_inner(hk, w)) ** 2


def interference_powers(w, pr_channels) -> np.ndarray:
    hs = np.asarray(pr_channels, dtype=complex).reshape(-1, len(_weights(w)))
    return np.abs(hs.conj() @ _weights(w)) ** 2


@dataclass(frozen=True)
class Violation:
    constraint: str      # "region", "spacing", "power" or "it[k]"
    margin: float        # amount by which the limit is exceeded (SI units)


@dataclass
class FeasibilityVerdict:
    violations: list[Violation] = field(default_factory=list)
    interference: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.feasible


def check_feasible(w, apv: Apv | np.ndarray, scenario: Scenario,
                   cfg: ScenarioConfig) -> FeasibilityVerdict:
    """List every violated constraint of the joint problem with its margin.

    ``apv`` may be a raw (N, 2) array so that invalid layouts can be
    diagnosed without tripping :class:`Apv` validation.
    """
    pos = apv.positions if isinstance(apv, Apv) else np.asarray(apv, dtype=float)
    w = _weights(w)
    out = []
    half = cfg.region_size / 2
    excess = float(np.max(np.abs(pos))) - half
    if excess > 1e-12 * max(1.0, half):
        out.append(Violation("region", excess))
    gap = min_pairwise_distance(pos)
    if gap < cfg.min_spacing * (1 - 1e-9):
        out.append(Violation("spacing", cfg.min_spacing - gap))
    power = float(np.vdot(w, w).real)
    if power > cfg.p_max * (1 + cfg.eps_pow):
        out.append(Violation("power", power - cfg.p_max))
    H = channel_matrix(pos, scenario, cfg.wavelength)
    itf = np.abs(H[1:].conj() @ w) ** 2
    for k, p in enumerate(itf):
        if p > cfg.it_threshold * (1 + cfg.eps_it):
            out.append(Violation(f"it[{k}]", float(p - cfg.it_threshold)))
    return FeasibilityVerdict(out, itf)

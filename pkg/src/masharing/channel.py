"""Field-response channel model for a movable-antenna transmitter.

Channels use the column convention ``h_k(T) = sum_p beta_{k,p} a(T, theta, phi)``;
use sites take ``h.conj() @ w`` for ``h^H w``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import Apv, ChannelError, PathSet, ScenarioConfig

__all__ = [
    "Scenario", "array_response", "channel_vector", "channel_matrix",
    "generate_scenario", "path_phases", "point_responses",
    "scenario_to_dict", "scenario_from_dict", "save_scenario", "load_scenario",
    "SCENARIO_SCHEMA",
]

SCENARIO_SCHEMA = "masharing.scenario/1"


@dataclass(frozen=True)
class Scenario:
    sr_paths: PathSet
    pr_paths: tuple[PathSet, ...]
    distances: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "pr_paths", tuple(self.pr_paths))
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        if len(self.distances) != len(self.pr_paths) + 1:
            raise ChannelError("need one distance per receiver (SR first)")

    @property
    def k(self) -> int:
        return len(self.pr_paths)

    @property
    def receivers(self) -> tuple[PathSet, ...]:
        return (self.sr_paths,) + self.pr_paths


def _positions(apv) -> np.ndarray:
    return apv.positions if isinstance(apv, Apv) else np.asarray(apv, dtype=float)


def path_phases(positions, theta, phi, wavelength: float) -> np.ndarray:
    """Phase ``2pi/lambda (x sin(theta) cos(phi) + y cos(theta))``.

    ``positions`` has shape (..., 2); the angle arrays broadcast against
    a trailing path axis, giving shape ``positions.shape[:-1] + (L,)``.
    """
    pos = np.asarray(positions, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ux = np.sin(theta) * np.cos(phi)
    uy = np.cos(theta)
    k = 2 * np.pi / wavelength
    return k * (pos[..., 0, None] * ux + pos[..., 1, None] * uy)


def array_response(apv, theta: float, phi: float, wavelength: float) -> np.ndarray:
    """Steering vector ``a(T, theta, phi)`` with unit-modulus entries."""
    return np.exp(1j * path_phases(_positions(apv), theta, phi, wavelength)[..., 0])


def point_responses(positions, paths: PathSet, wavelength: float) -> np.ndarray:
    """Channel coefficient of ``paths`` at each position (shape ``positions.shape[:-1]``)."""
    ph = path_phases(positions, paths.theta, paths.phi, wavelength)
    return np.exp(1j * ph) @ paths.gain


def channel_vector(apv, paths: PathSet, wavelength: float) -> np.ndarray:
    return point_responses(_positions(apv), paths, wavelength)


def channel_matrix(apv, scenario: Scenario, wavelength: float) -> np.ndarray:
    """Stack ``[h_0, h_1, ..., h_K]`` as rows, shape (K+1, N)."""
    pos = _positions(apv)
    return np.stack([point_responses(pos, ps, wavelength)
                     for ps in scenario.receivers])


def generate_scenario(cfg: ScenarioConfig, rng: np.random.Generator,
                      paths_per_receiver: int | None = None) -> Scenario:
    """Draw SR + K PR geometries.

    Distances are uniform on ``cfg.distance_range``; elevation and azimuth
    AoDs are i.i.d. uniform on [-pi/2, pi/2]; gains are CSCG with variance
    ``rho d^-alpha / L``.
    """
    L = cfg.paths_per_receiver if paths_per_receiver is None else paths_per_receiver
    n_rx = cfg.k_prs + 1
    lo, hi = cfg.distance_range
    dist = rng.uniform(lo, hi, size=n_rx)
    theta = rng.uniform(-np.pi / 2, np.pi / 2, size=(n_rx, L))
    phi = rng.uniform(-np.pi / 2, np.pi / 2, size=(n_rx, L))
    var = cfg.ref_path_loss * dist ** (-cfg.path_loss_exponent) / L
    z = rng.standard_normal((n_rx, L, 2))
    gain = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(var / 2)[:, None]
    sets = [PathSet(i, theta[i], phi[i], gain[i]) for i in range(n_rx)]
    return Scenario(sets[0], tuple(sets[1:]), tuple(dist))


# --------------------------------------------------------------------------
# serialization (JSON; floats written with repr so the round trip is exact)

def _pathset_to_dict(ps: PathSet) -> dict:
    return {
        "receiver_id": ps.receiver_id,
        "theta": [float(v) for v in ps.theta],
        "phi": [float(v) for v in ps.phi],
        "gain": [[float(g.real), float(g.imag)] for g in ps.gain],
    }


def _pathset_from_dict(d: dict) -> PathSet:
    gain = [complex(re, im) for re, im in d["gain"]]
    return PathSet(int(d["receiver_id"]), d["theta"], d["phi"], gain)


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "schema": SCENARIO_SCHEMA,
        "distances": list(sc.distances),
        "sr": _pathset_to_dict(sc.sr_paths),
        "prs": [_pathset_to_dict(p) for p in sc.pr_paths],
    }


def scenario_from_dict(d: dict) -> Scenario:
    try:
        if d.get("schema") != SCENARIO_SCHEMA:
            raise ChannelError(f"unsupported scenario schema {d.get('schema')!r}")
        return Scenario(_pathset_from_dict(d["sr"]),
                        tuple(_pathset_from_dict(p) for p in d["prs"]),
                        tuple(d["distances"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ChannelError):
            raise
        raise ChannelError(f"malformed scenario record: {exc}") from exc


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=1)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ChannelError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_dict(d)


def gain_variance(cfg: ScenarioConfig, distance: float, L: int | None = None) -> float:
    L = cfg.paths_per_receiver if L is None else L
    return cfg.ref_path_loss * distance ** (-cfg.path_loss_exponent) / L


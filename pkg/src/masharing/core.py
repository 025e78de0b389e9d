"""Shared domain types, configuration and random streams.

Powers are kept in watts throughout; dBm conversions happen only at the
I/O boundary (:func:`dbm_to_watt`, :func:`watt_to_dbm`).
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "ConfigError", "ApvError", "ChannelError", "ScenarioConfig", "Apv",
    "PathSet", "Beamformer", "SolveReport", "seeded_rng", "dbm_to_watt",
    "watt_to_dbm", "as_complex_vec", "load_config", "save_config",
    "config_from_text", "config_to_text", "ENV_PREFIX",
]

ENV_PREFIX = "MASHARING_"


class ConfigError(ValueError):
    """Invalid scenario configuration."""


class ApvError(ValueError):
    """Antenna positions violate the region or spacing constraints."""


class ChannelError(ValueError):
    """Degenerate channel input (zero vector, dimension mismatch, ...)."""


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0) / 1000.0


def watt_to_dbm(p_w: float) -> float:
    if p_w <= 0:
        return -math.inf
    return 10.0 * math.log10(p_w * 1000.0)


def seeded_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent, reproducible random stream for ``(seed, stream_id)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def as_complex_vec(x, n: int | None = None) -> np.ndarray:
    """Validate and copy ``x`` into a finite 1-D complex array."""
    v = np.array(x, dtype=complex).reshape(-1)
    if n is not None and v.shape[0] != n:
        raise ChannelError(f"expected length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ChannelError("complex vector has non-finite entries")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and algorithmic parameters of one experiment.

    Defaults describe the full-scale setup: N=4 movable
    antennas, K=3 primary receivers, lambda = 0.1 m, D_min = lambda/2,
    M = 100 grid points per axis, L = 4 paths, alpha = 2.8,
    P_max = 23 dBm, sigma^2 = Gamma = -80 dBm, A = 4 lambda.

    ``ref_path_loss`` defaults to the free-space value (lambda/4pi)^2 at
    1 m when left as ``None``.
    """

    n_antennas: int = 4
    k_prs: int = 3
    region_size: float = 0.4
    wavelength: float = 0.1
    min_spacing: float | None = None
    grid_points_per_axis: int = 100
    p_max: float = dbm_to_watt(23.0)
    noise_power: float = dbm_to_watt(-80.0)
    it_threshold: float = dbm_to_watt(-80.0)
    paths_per_receiver: int = 4
    path_loss_exponent: float = 2.8
    ref_path_loss: float | None = None
    distance_range: tuple[float, float] = (20.0, 100.0)
    rng_seed: int = 0

    # numerical slacks and stopping rules
    eps_pow: float = 1e-9
    eps_it: float = 1e-6
    sca_tol: float = 1e-6
    sca_max_iters: int = 50
    ao_tol: float = 1e-4
    ao_max_iters: int = 20
    max_sweeps: int = 5
    ao_init: str = "best"
    ip_gap_tol: float = 1e-10
    ip_max_newton: int = 500

    # PSO baseline
    pso_swarm: int = 50
    pso_inertia: float = 0.72
    pso_cognitive: float = 1.49
    pso_social: float = 1.49
    pso_iters: int = 100
    pso_mode: str = "round"
    pso_rounds: int = 5

    # theory helpers
    dy_units: str = "wavelength"
    hmin_samples: int = 10_000

    def __post_init__(self):
        if self.min_spacing is None:
            object.__setattr__(self, "min_spacing", self.wavelength / 2)
        if self.ref_path_loss is None:
            object.__setattr__(self, "ref_path_loss",
                               (self.wavelength / (4 * math.pi)) ** 2)
        object.__setattr__(self, "distance_range",
                           tuple(float(d) for d in self.distance_range))
        self._validate()

    def _validate(self) -> None:
        checks = [
            (self.n_antennas >= 1, "n_antennas must be >= 1"),
            (self.k_prs >= 0, "k_prs must be >= 0"),
            (self.grid_points_per_axis >= 1, "grid_points_per_axis must be >= 1"),
            (self.region_size > 0, "region_size must be > 0"),
            (self.wavelength > 0, "wavelength must be > 0"),
            (self.min_spacing >= 0, "min_spacing must be >= 0"),
            (self.p_max > 0, "p_max must be > 0"),
            (self.noise_power > 0, "noise_power must be > 0"),
            (self.it_threshold > 0, "it_threshold must be > 0"),
            (self.path_loss_exponent > 0, "path_loss_exponent must be > 0"),
            (self.ref_path_loss > 0, "ref_path_loss must be > 0"),
            (self.paths_per_receiver >= 1, "paths_per_receiver must be >= 1"),
            (len(self.distance_range) == 2
             and 0 < self.distance_range[0] <= self.distance_range[1],
             "distance_range must be (min, max) with 0 < min <= max"),
            (self.pso_mode in ("round", "candidate"),
             "pso_mode must be 'round' or 'candidate'"),
            (self.ao_init in ("best", "random"),
             "ao_init must be 'best' or 'random'"),
            (self.dy_units in ("wavelength", "meter"),
             "dy_units must be 'wavelength' or 'meter'"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.max_packable() < self.n_antennas:
            raise ConfigError(
                f"sampling grid cannot host {self.n_antennas} antennas "
                f"pairwise >= {self.min_spacing} m apart")

    @property
    def grid_spacing(self) -> float:
        return self.region_size / self.grid_points_per_axis

    def max_packable(self) -> int:
        """Antennas that fit on a square sub-lattice of the sampling grid."""
        m = self.grid_points_per_axis
        if self.min_spacing <= 0:
            return m * m
        step = math.ceil(self.min_spacing / self.grid_spacing - 1e-12)
        per_axis = (m - 1) // step + 1
        return per_axis * per_axis

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


# --------------------------------------------------------------------------
# config file I/O (INI, one key per field under [scenario])

_SECTION = "scenario"


def _field_types() -> dict[str, Any]:
    return {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(name: str, text: str):
    ftype = str(_field_types()[name])
    text = text.strip()
    if "tuple" in ftype:
        parts = [p for p in text.replace("(", "").replace(")", "").split(",")
                 if p.strip()]
        return tuple(float(p) for p in parts)
    if ftype.startswith("float"):
        if text.lower() in ("", "none") and "None" in ftype:
            return None
        return float(text)
    if ftype.startswith("int"):
        return int(text)
    return text


def config_from_mapping(values: Mapping[str, str],
                        base: ScenarioConfig | None = None) -> ScenarioConfig:
    known = _field_types()
    kwargs = {}
    for key, raw in values.items():
        key = key.strip().lower()
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kwargs[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    if base is None:
        return ScenarioConfig(**kwargs)
    return base.replace(**kwargs)


def config_from_text(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    if not parser.has_section(_SECTION):
        return config_from_mapping({}, base)
    return config_from_mapping(dict(parser.items(_SECTION)), base)


def config_to_text(cfg: ScenarioConfig) -> str:
    lines = [f"[{_SECTION}]"]
    for f in dataclasses.fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    """Collect ``MASHARING_<FIELD>`` environment overrides."""
    environ = os.environ if environ is None else environ
    out = {}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX):
            out[key[len(ENV_PREFIX):].lower()] = value
    return out


def load_config(path, base: ScenarioConfig | None = None,
                environ: Mapping[str, str] | None = None) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        cfg = config_from_text(fh.read(), base)
    env = env_overrides(environ)
    return config_from_mapping(env, cfg) if env else cfg


def save_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_to_text(cfg))


# --------------------------------------------------------------------------
# domain types

class Apv:
    """Antenna position matrix (N x 2, metres) inside ``[-A/2, A/2]^2``.

    Construction rejects positions outside the region or closer than
    ``min_spacing``. ``tol`` absorbs floating-point round-off at the
    region boundary and in the spacing test.
    """

    __slots__ = ("positions", "region_size", "min_spacing")

    def __init__(self, positions, region_size: float, min_spacing: float,
                 tol: float = 1e-12):
        pos = np.array(positions, dtype=float).reshape(-1, 2)
        if pos.shape[0] < 1:
            raise ApvError("APV needs at least one antenna")
        if not np.all(np.isfinite(pos)):
            raise ApvError("non-finite antenna position")
        half = region_size / 2
        if np.any(np.abs(pos) > half * (1 + tol) + tol):
            raise ApvError("antenna outside the transmit region")
        gap = min_pairwise_distance(pos)
        if gap < min_spacing * (1 - 1e-9) - tol:
            raise ApvError(f"antennas {gap:.6g} m apart, need >= {min_spacing:.6g} m")
        pos.setflags(write=False)
        self.positions = pos
        self.region_size = float(region_size)
        self.min_spacing = float(min_spacing)

    @classmethod
    def from_config(cls, positions, cfg: ScenarioConfig) -> "Apv":
        return cls(positions, cfg.region_size, cfg.min_spacing)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.positions[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.positions[:, 1]

    def with_position(self, n: int, point) -> "Apv":
        pos = self.positions.copy()
        pos[n] = point
        return Apv(pos, self.region_size, self.min_spacing)

    def __eq__(self, other):
        return (isinstance(other, Apv)
                and np.array_equal(self.positions, other.positions))

    def __repr__(self):
        return f"Apv({self.positions.tolist()!r})"


def min_pairwise_distance(pos: np.ndarray) -> float:
    pos = np.asarray(pos, dtype=float)
    if pos.shape[0] < 2:
        return math.inf
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    iu = np.triu_indices(pos.shape[0], 1)
    return float(dist[iu].min())


@dataclass(frozen=True)
class PathSet:
    """Multipath geometry of one receiver: AoDs (rad) and complex gains."""

    receiver_id: int
    theta: np.ndarray
    phi: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        phi = np.array(self.phi, dtype=float).reshape(-1)
        gain = np.array(self.gain, dtype=complex).reshape(-1)
        if not (theta.size == phi.size == gain.size) or theta.size < 1:
            raise ChannelError("path set needs >= 1 path with matching "
                               "theta/phi/gain lengths")
        for arr in (theta, phi, gain):
            arr.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "gain", gain)

    @property
    def n_paths(self) -> int:
        return self.theta.size

    def scaled(self, c: complex) -> "PathSet":
        return PathSet(self.receiver_id, self.theta, self.phi, self.gain * c)

    def __eq__(self, other):
        return (isinstance(other, PathSet)
                and self.receiver_id == other.receiver_id
                and np.array_equal(self.theta, other.theta)
                and np.array_equal(self.phi, other.phi)
                and np.array_equal(self.gain, other.gain))


class Beamformer:
    """Complex transmit weights ``w`` with ``||w||^2 <= p_max (1 + eps_pow)``."""

    __slots__ = ("w",)

    def __init__(self, w, p_max: float | None = None, eps_pow: float = 1e-9):
        w = as_complex_vec(w)
        if p_max is not None and np.vdot(w, w).real > p_max * (1 + eps_pow):
            raise ChannelError(
                f"beamformer power {np.vdot(w, w).real:.6g} W exceeds "
                f"p_max {p_max:.6g} W")
        self.w = w

    @property
    def power(self) -> float:
        return float(np.vdot(self.w, self.w).real)

    def __len__(self):
        return self.w.shape[0]

    def __repr__(self):
        return f"Beamformer({self.w!r})"


@dataclass
class SolveReport:
    """Outcome of one scheme run on one scenario."""

    scheme: str
    snr: float
    interference: np.ndarray
    objective_trace: list[float]
    feasible: bool
    iterations: int
    wall_time: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def snr_db(self) -> float:
        return 10 * math.log10(self.snr) if self.snr > 0 else -math.inf

    @property
    def max_interference(self) -> float:
        return float(np.max(self.interference)) if len(self.interference) else 0.0

    def record(self) -> dict:
        """JSON-friendly deterministic summary (no wall time)."""
        return {
            "scheme": self.scheme,
            "snr": float(self.snr),
            "interference": [float(v) for v in self.interference],
            "objective_trace": [float(v) for v in self.objective_trace],
            "feasible": bool(self.feasible),
            "iterations": int(self.iterations),
        }


def is_feasible_interference(interference: Sequence[float], gamma: float,
                             eps_it: float) -> bool:
    return bool(np.all(np.asarray(interference, dtype=float)
                       <= gamma * (1 + eps_it)))

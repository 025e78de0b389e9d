import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from masharing.core import (Apv, ApvError, Beamformer, ChannelError, ConfigError, PathSet,
                            ScenarioConfig, SolveReport, as_complex_vec, config_from_text,
                            config_to_text, dbm_to_watt, env_overrides, load_config,
                            save_config, seeded_rng, watt_to_dbm)


def test_seeded_rng_is_deterministic():
    a = seeded_rng(42, 0).standard_normal(100)
    b = seeded_rng(42, 0).standard_normal(100)
    assert np.array_equal(a, b)


def test_seeded_rng_streams_differ():
    a = seeded_rng(42, 0).standard_normal(100)
    b = seeded_rng(42, 1).standard_normal(100)
    assert not np.allclose(a, b)


def test_seeded_rng_frozen_draws():
    np.testing.assert_allclose(seeded_rng(42, 0).standard_normal(3),
                               [0.41832997, 0.60557617, 0.02878786], atol=1e-8)


@pytest.mark.parametrize("dbm,watt", [(30.0, 1.0), (0.0, 1e-3), (-80.0, 1e-11), (23.0, 0.19952623149688797)])
def test_dbm_watt_conversions(dbm, watt):
    assert dbm_to_watt(dbm) == pytest.approx(watt, rel=1e-12)
    assert watt_to_dbm(watt) == pytest.approx(dbm, abs=1e-10)


def test_watt_to_dbm_of_zero_is_minus_inf():
    assert watt_to_dbm(0.0) == -math.inf


def test_default_config_values():
    cfg = ScenarioConfig()
    assert (cfg.n_antennas, cfg.k_prs, cfg.grid_points_per_axis) == (4, 3, 100)
    assert cfg.min_spacing == pytest.approx(cfg.wavelength / 2)
    assert cfg.ref_path_loss == pytest.approx((0.1 / (4 * math.pi)) ** 2)
    assert watt_to_dbm(cfg.p_max) == pytest.approx(23.0)
    assert watt_to_dbm(cfg.noise_power) == pytest.approx(-80.0)
    assert cfg.distance_range == (20.0, 100.0)


@pytest.mark.parametrize("field,value", [
    ("n_antennas", 0), ("k_prs", -1), ("grid_points_per_axis", 0), ("region_size", 0.0),
    ("wavelength", -1.0), ("min_spacing", -0.1), ("p_max", 0.0), ("noise_power", 0.0),
    ("it_threshold", 0.0), ("path_loss_exponent", 0.0), ("distance_range", (5.0, 1.0)),
    ("pso_mode", "batch"), ("ao_init", "zero"), ("dy_units", "inch"),
])
def test_config_rejects_invalid_values(field, value):
    with pytest.raises(ConfigError):
        ScenarioConfig(**{field: value})


def test_config_rejects_unpackable_grid():
    # 2x2 grid on a 0.1 m square with D_min = 0.1 m holds at most one antenna
    with pytest.raises(ConfigError):
        ScenarioConfig(n_antennas=2, region_size=0.1, grid_points_per_axis=2,
                       min_spacing=0.1)
    assert ScenarioConfig(n_antennas=4, region_size=0.1, grid_points_per_axis=40).max_packable() >= 4


def test_config_text_round_trip():
    cfg = ScenarioConfig(n_antennas=6, k_prs=2, it_threshold=dbm_to_watt(-73.3),
                         distance_range=(10.5, 50.25), pso_mode="candidate")
    assert config_from_text(config_to_text(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 6), m=st.integers(30, 120),
       gamma_dbm=st.floats(-110, -40, allow_nan=False),
       alpha=st.floats(1.5, 4.0, allow_nan=False))
def test_config_round_trip_property(n, m, gamma_dbm, alpha):
    cfg = ScenarioConfig(n_antennas=n, grid_points_per_axis=m,
                         it_threshold=dbm_to_watt(gamma_dbm), path_loss_exponent=alpha)
    text = config_to_text(cfg)
    assert config_from_text(text) == cfg
    assert config_to_text(config_from_text(text)) == text


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError):
        config_from_text("[scenario]\nantennas = 3\n")
    with pytest.raises(ConfigError):
        config_from_text("[scenario]\nn_antennas = three\n")


def test_config_file_and_env_override(tmp_path):
    path = tmp_path / "c.ini"
    save_config(ScenarioConfig(n_antennas=3), path)
    assert load_config(path, environ={}).n_antennas == 3
    cfg = load_config(path, environ={"MASHARING_N_ANTENNAS": "5", "OTHER": "x"})
    assert cfg.n_antennas == 5
    assert env_overrides({"MASHARING_K_PRS": "1"}) == {"k_prs": "1"}


def test_partial_config_keeps_defaults():
    cfg = config_from_text("[scenario]\nk_prs = 1\n")
    assert cfg.k_prs == 1 and cfg.n_antennas == 4


def test_apv_accepts_valid_layout():
    apv = Apv([[0, 0], [0.05, 0]], region_size=0.4, min_spacing=0.05)
    assert apv.n == 2
    np.testing.assert_array_equal(apv.x, [0, 0.05])
    with pytest.raises(ValueError):
        apv.positions[0, 0] = 1.0


def test_apv_rejects_region_violation():
    with pytest.raises(ApvError):
        Apv([[0.21, 0]], region_size=0.4, min_spacing=0.05)


def test_apv_rejects_spacing_violation():
    with pytest.raises(ApvError):
        Apv([[0, 0], [0.04, 0]], region_size=0.4, min_spacing=0.05)
    with pytest.raises(ApvError):
        Apv([[0, 0], [0, 0]], region_size=0.4, min_spacing=0.05)


def test_apv_with_position_revalidates():
    apv = Apv([[0, 0], [0.1, 0]], 0.4, 0.05)
    assert apv.with_position(1, (0.1, 0.1)).positions[1, 1] == 0.1
    with pytest.raises(ApvError):
        apv.with_position(1, (0.01, 0))


def test_pathset_validation_and_scaling():
    ps = PathSet(1, [0.1, 0.2], [0.3, 0.4], [1 + 1j, 2])
    assert ps.n_paths == 2
    np.testing.assert_allclose(ps.scaled(2j).gain, [2j * (1 + 1j), 4j])
    with pytest.raises(ChannelError):
        PathSet(0, [0.1], [0.2, 0.3], [1])
    with pytest.raises(ChannelError):
        PathSet(0, [], [], [])


def test_beamformer_power_invariant():
    w = Beamformer([1, 1j], p_max=2.0)
    assert w.power == pytest.approx(2.0)
    Beamformer([1, 1j], p_max=2.0 * (1 - 1e-12))  # inside eps_pow slack
    with pytest.raises(ChannelError):
        Beamformer([1, 1j], p_max=1.9)


def test_complex_vec_rejects_non_finite():
    with pytest.raises(ChannelError):
        as_complex_vec([1, np.nan])
    with pytest.raises(ChannelError):
        as_complex_vec([1, 2], n=3)


def test_solve_report_feasibility_and_record():
    rep = SolveReport("ao", 100.0, np.array([1e-11, 5e-12]), [1.0, 2.0], True, 2, 0.5)
    assert rep.snr_db == pytest.approx(20.0)
    assert rep.max_interference == 1e-11
    rec = rep.record()
    assert "wall_time" not in rec and rec["iterations"] == 2

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from masharing.beamforming import feasible_init_w, mrt, sca_beamforming, zf
from masharing.channel import Scenario, channel_matrix, generate_scenario
from masharing.core import Apv, ConfigError, PathSet, ScenarioConfig, min_pairwise_distance, seeded_rng
from masharing.metrics import check_feasible
from masharing.placement import (GridField, SamplingGrid, best_closed_form_w,
                                 closed_form_powers, feasible_points, fixed_w_scorer,
                                 fpa_layout, mrt_scorer, pso_optimize, random_grid_apv,
                                 repair_apv, sequential_search, sequential_search_detailed,
                                 sweep, zf_scorer)

from oracles import brute_force_position


def _setup(seed=0, m=20, **kw):
    cfg = ScenarioConfig(grid_points_per_axis=m, **kw)
    sc = generate_scenario(cfg, seeded_rng(seed, 0))
    grid = SamplingGrid.from_config(cfg)
    return cfg, sc, grid, GridField(grid, sc, cfg.wavelength)


def test_grid_points_follow_index_formula():
    grid = SamplingGrid(0.4, 4)
    np.testing.assert_allclose(grid.axis, [-0.1, 0.0, 0.1, 0.2])
    pts = grid.points
    assert pts.shape == (16, 2)
    # flattened lexicographically over (i, j)
    np.testing.assert_allclose(pts[1], [-0.1, 0.0])
    np.testing.assert_allclose(pts[4], [0.0, -0.1])
    assert grid.spacing == pytest.approx(0.1)


def test_grid_field_matches_channel_matrix():
    cfg, sc, grid, fld = _setup()
    H = channel_matrix(grid.points, sc, cfg.wavelength)
    np.testing.assert_allclose(fld.values, H, rtol=1e-12)


def test_feasible_points_respect_spacing():
    cfg, sc, grid, fld = _setup()
    apv = Apv([[0, 0], [0.1, 0.1], [-0.1, 0.1], [0.1, -0.1]], cfg.region_size, cfg.min_spacing)
    pts = feasible_points(grid, apv, 0)
    others = apv.positions[1:]
    d = np.min(np.hypot(*(pts[:, None, :] - others[None]).transpose(2, 0, 1)), axis=1)
    assert np.all(d >= cfg.min_spacing * (1 - 1e-9))


def _oracle_sweep(apv, w, sc, cfg, grid):
    """One pass of per-antenna exhaustive search with explicit loops."""
    pos = apv.positions.copy()
    cap = cfg.it_threshold * (1 + cfg.eps_it)
    pts = grid.points
    Hc = channel_matrix(pts, sc, cfg.wavelength)
    for n in range(pos.shape[0]):
        H = channel_matrix(pos, sc, cfg.wavelength)
        rest = H.conj() @ w - H[:, n].conj() * w[n]

        def power(i):
            return np.abs(rest + Hc[:, i].conj() * w[n]) ** 2

        others = [tuple(p) for j, p in enumerate(pos) if j != n]
        i, v = brute_force_position([tuple(p) for p in pts], others, cfg.min_spacing,
                                    lambda i: power(i)[0],
                                    lambda i: bool(np.all(power(i)[1:] <= cap)))
        inc = np.abs(H.conj() @ w) ** 2
        inc_ok = bool(np.all(inc[1:] <= cap))
        if i is not None and (not inc_ok or v > inc[0]):
            pos[n] = pts[i]
    return pos


@pytest.mark.parametrize("seed", range(3))
def test_sequential_search_matches_exhaustive_oracle(seed):
    cfg, sc, grid, fld = _setup(seed, m=12)
    apv = random_grid_apv(cfg, seeded_rng(seed, 1), grid)
    H = channel_matrix(apv, sc, cfg.wavelength)
    w = feasible_init_w(H[0], H[1:], cfg).w
    res = sequential_search_detailed(apv, w, sc, cfg, grid, fld, max_sweeps=1)
    np.testing.assert_allclose(res.apv.positions, _oracle_sweep(apv, w, sc, cfg, grid))


def test_sequential_search_keeps_feasibility_and_improves():
    cfg, sc, grid, fld = _setup(3, m=30)
    apv = random_grid_apv(cfg, seeded_rng(3, 1), grid)
    H = channel_matrix(apv, sc, cfg.wavelength)
    w = feasible_init_w(H[0], H[1:], cfg)
    new = sequential_search(apv, w, sc, cfg, grid, fld)
    assert check_feasible(w, new, sc, cfg).feasible
    H2 = channel_matrix(new, sc, cfg.wavelength)
    assert abs(np.vdot(H2[0], w.w)) >= abs(np.vdot(H[0], w.w))


def test_evaluation_counter_is_n_m_squared_per_sweep():
    for m in (10, 20, 40):
        cfg, sc, grid, fld = _setup(1, m=m)
        apv = random_grid_apv(cfg, seeded_rng(1, 1), grid)
        H = channel_matrix(apv, sc, cfg.wavelength)
        res = sequential_search_detailed(apv, feasible_init_w(H[0], H[1:], cfg), sc, cfg,
                                         grid, fld)
        assert all(e == cfg.n_antennas * m * m for e in res.evaluations)
        assert res.sweeps == len(res.evaluations) <= cfg.max_sweeps


def test_tie_keeps_incumbent_then_lowest_index():
    cfg = ScenarioConfig(n_antennas=1, k_prs=0, grid_points_per_axis=4, region_size=0.4)
    # theta = 0 makes the channel depend on y only, so whole rows of the grid tie
    sc = Scenario(PathSet(0, [0.0], [0.0], [1.0]), (), (50.0,))
    grid = SamplingGrid.from_config(cfg)
    fld = GridField(grid, sc, cfg.wavelength)
    apv = Apv([[0.1, 0.1]], cfg.region_size, cfg.min_spacing)
    res = sweep(apv, fixed_w_scorer(np.array([1.0]), cfg), grid, fld, sc, cfg)
    assert res.apv == apv  # every point ties; incumbent stays
    scorer = lambda n, H, cand: (np.ones(cand.shape[1]) * (cand.shape[1] > 1), np.ones(cand.shape[1], bool))  # noqa: E731
    res = sweep(apv, scorer, grid, fld, sc, cfg, max_sweeps=1)
    np.testing.assert_allclose(res.apv.positions[0], grid.points[0])


def test_scorers_agree_with_direct_formulas():
    cfg, sc, grid, fld = _setup(2, m=10)
    apv = random_grid_apv(cfg, seeded_rng(2, 1), grid)
    H = channel_matrix(apv, sc, cfg.wavelength)
    cand_idx = [3, 17, 55]
    for i in cand_idx:
        Hn = H.copy()
        Hn[:, 1] = fld.values[:, i]
        s_mrt, _ = mrt_scorer(cfg)(1, H, fld.values[:, [i]])
        w = feasible_init_w(Hn[0], Hn[1:], cfg)
        assert s_mrt[0] == pytest.approx(abs(np.vdot(Hn[0], w.w)) ** 2, rel=1e-9)
        s_zf, _ = zf_scorer(cfg)(1, H, fld.values[:, [i]])
        wz = zf(Hn[0], Hn[1:], cfg.p_max)
        assert s_zf[0] == pytest.approx(abs(np.vdot(Hn[0], wz.w)) ** 2, rel=1e-7)


def test_random_grid_apv_is_feasible_and_on_grid():
    cfg, sc, grid, fld = _setup(m=40)
    for s in range(10):
        apv = random_grid_apv(cfg, seeded_rng(s, 1), grid)
        assert min_pairwise_distance(apv.positions) >= cfg.min_spacing * (1 - 1e-9)
        for p in apv.positions:
            assert np.any(np.all(np.isclose(grid.points, p), axis=1))


def test_random_grid_apv_dense_case_uses_lattice():
    cfg = ScenarioConfig(n_antennas=4, region_size=0.1, grid_points_per_axis=40)
    apv = random_grid_apv(cfg, seeded_rng(0, 0))
    assert apv.n == 4


def test_fpa_layout_half_wavelength_lattice():
    apv = fpa_layout(ScenarioConfig())
    np.testing.assert_allclose(apv.positions, [[-0.025, -0.025], [0.025, -0.025],
                                               [-0.025, 0.025], [0.025, 0.025]])
    apv3 = fpa_layout(ScenarioConfig(n_antennas=3))
    assert apv3.n == 3
    assert min_pairwise_distance(apv3.positions) == pytest.approx(0.05)


def test_fpa_layout_errors():
    with pytest.raises(ConfigError):
        fpa_layout(ScenarioConfig(n_antennas=9, region_size=0.06, min_spacing=0.0,
                                  grid_points_per_axis=40))
    with pytest.raises(ConfigError):
        fpa_layout(ScenarioConfig(min_spacing=0.08, grid_points_per_axis=40))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=4, max_size=4))
def test_repair_restores_constraints(points):
    cfg = ScenarioConfig(grid_points_per_axis=40)
    out = repair_apv(np.array(points), cfg)
    assert np.all(np.abs(out) <= cfg.region_size / 2 + 1e-12)
    assert min_pairwise_distance(out) >= cfg.min_spacing * (1 - 1e-9)


def test_closed_form_powers_match_direct_beamformers():
    cfg, sc, grid, fld = _setup(4, m=10)
    apv = random_grid_apv(cfg, seeded_rng(4, 1), grid)
    H = channel_matrix(apv, sc, cfg.wavelength)
    w = mrt(H[0], cfg.p_max).w * np.exp(0.3j)
    pw = closed_form_powers(H[None], w, cfg)[0]
    mrt_b = feasible_init_w(H[0], H[1:], cfg)
    assert pw[1] == pytest.approx(abs(np.vdot(H[0], mrt_b.w)) ** 2, rel=1e-9)
    assert pw[2] == pytest.approx(abs(np.vdot(H[0], zf(H[0], H[1:], cfg.p_max).w)) ** 2, rel=1e-7)
    best = best_closed_form_w(H, w, cfg)
    assert check_feasible(best, apv, sc, cfg).feasible
    assert abs(np.vdot(H[0], best.w)) ** 2 == pytest.approx(pw.max(), rel=1e-7)


def _pso_cfg(**kw):
    base = dict(grid_points_per_axis=20, pso_swarm=12, pso_iters=15, pso_rounds=2)
    return ScenarioConfig(**{**base, **kw})


def _sca_update(sc, cfg):
    def update(apv, w_start):
        H = channel_matrix(apv, sc, cfg.wavelength)
        return sca_beamforming(H[0], H[1:], cfg, w_start)[0]
    return update


@pytest.mark.parametrize("mode", ["round", "candidate"])
def test_pso_feasible_and_deterministic(mode):
    cfg = _pso_cfg(pso_mode=mode, pso_iters=5 if mode == "candidate" else 15)
    sc = generate_scenario(cfg, seeded_rng(6, 0))
    a1, w1, r1 = pso_optimize(_sca_update(sc, cfg), sc, cfg, seeded_rng(6, 1))
    a2, w2, r2 = pso_optimize(_sca_update(sc, cfg), sc, cfg, seeded_rng(6, 1))
    assert a1 == a2 and r1.snr == r2.snr
    assert r1.feasible and check_feasible(w1, a1, sc, cfg).feasible
    assert all(b >= a for a, b in zip(r1.objective_trace, r1.objective_trace[1:]))


def test_pso_never_below_seed_layout():
    cfg = _pso_cfg()
    sc = generate_scenario(cfg, seeded_rng(8, 0))
    grid = SamplingGrid.from_config(cfg)
    seed = random_grid_apv(cfg, seeded_rng(8, 1), grid)
    H = channel_matrix(seed, sc, cfg.wavelength)
    w0, _ = sca_beamforming(H[0], H[1:], cfg)
    _, _, rep = pso_optimize(_sca_update(sc, cfg), sc, cfg, seeded_rng(8, 2), init_apv=seed)
    assert rep.snr >= abs(np.vdot(H[0], w0.w)) ** 2 / cfg.noise_power * (1 - 1e-9)


def test_spacing_helper_with_no_constraint():
    cfg = ScenarioConfig(min_spacing=0.0, grid_points_per_axis=5)
    grid = SamplingGrid.from_config(cfg)
    apv = Apv([[0, 0], [0, 0], [0.08, 0], [0, 0.08]], cfg.region_size, 0.0)
    assert len(feasible_points(grid, apv, 0)) == 25
    assert math.isinf(min_pairwise_distance(np.zeros((1, 2))))

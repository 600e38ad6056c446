import numpy as np
import pytest

from cellheal.healer import alpha_grid, propagate_alpha
from cellheal.oracle import (
    KpiCurve,
    OracleParams,
    healing_config,
    interference_matrix,
    make_runner,
    true_constrained_optimum,
    true_cost,
)


def test_curve_shape():
    c = KpiCurve(lo=2.0, hi=10.0, mid=0.5, slope=6.0)
    assert c(0.5) == pytest.approx(6.0)
    assert c(-50.0) == pytest.approx(2.0, abs=1e-9)
    assert c(50.0) == pytest.approx(10.0, abs=1e-9)
    assert c.span == 8.0


def test_interference_matrix_row():
    params = OracleParams(coupling_row=(4.0, 2.0, 1.0))
    m = interference_matrix(params)
    assert m.ids == (0, 1, 2, 3)
    assert m.row(0, (1, 2, 3)) == {1: 4.0, 2: 2.0, 3: 1.0}
    assert m.at(2, 0) == 2.0


def test_runner_is_deterministic_per_seed():
    params = OracleParams()
    alphas = propagate_alpha(0.4, interference_matrix(params).row(0, params.tier1), 1)
    a = make_runner(params, 3)(alphas, 0)
    b = make_runner(params, 3)(alphas, 0)
    assert a == b


def test_runner_noise_free_matches_curves():
    params = OracleParams(noise_pct=0.0)
    row = interference_matrix(params).row(0, params.tier1)
    alphas = propagate_alpha(0.4, row, 1)
    out = make_runner(params, 1)(alphas, 0)
    assert out[0][0] == pytest.approx(params.ftt_faulty(0.4))
    assert out[0][1] == pytest.approx(params.bcr_faulty(0.4))
    for j in params.tier1:
        assert out[j][0] == pytest.approx(params.ftt_tier(alphas[j]))


def test_runner_noise_scale_is_relative():
    params = OracleParams(noise_pct=5.0)
    row = interference_matrix(params).row(0, params.tier1)
    alphas = propagate_alpha(0.4, row, 1)
    rng_draws = [make_runner(params, s)(alphas, 0)[0][0] for s in range(400)]
    clean = params.ftt_faulty(0.4)
    rel = np.std(np.array(rng_draws) / clean - 1.0)
    assert rel == pytest.approx(0.05, abs=0.01)


def test_true_optimum_is_grid_argmin_of_feasible_points():
    params = OracleParams()
    cfg = healing_config(params)
    alpha, cost_at = true_constrained_optimum(params, cfg)
    grid = alpha_grid(cfg.alpha_grid_step)
    assert alpha in [float(a) for a in grid]
    assert cost_at == pytest.approx(true_cost(params, cfg, alpha))
    row = interference_matrix(params).row(0, params.tier1)
    for a in grid:
        alphas = propagate_alpha(float(a), row, 1)
        feasible = params.bcr_faulty(float(a)) < cfg.bcr_threshold_pct and all(
            params.bcr_tier(alphas[j]) < cfg.bcr_threshold_pct for j in params.tier1)
        if feasible:
            assert true_cost(params, cfg, float(a)) >= cost_at - 1e-12


def test_true_optimum_interior_for_default_scenario():
    params = OracleParams()
    cfg = healing_config(params)
    alpha, _ = true_constrained_optimum(params, cfg)
    assert cfg.alpha_grid_step < alpha < 1.0


def test_true_optimum_raises_when_nothing_feasible():
    params = OracleParams(bcr_faulty=KpiCurve(50.0, 60.0, 0.5, 1.0))
    cfg = healing_config(params)
    with pytest.raises(ValueError):
        true_constrained_optimum(params, cfg)


def test_healing_config_defaults_discount_off():
    params = OracleParams()
    cfg = healing_config(params)
    assert cfg.bcr_discount == 0.0
    assert cfg.faulty_enb == 0
    assert cfg.tier1 == params.tier1

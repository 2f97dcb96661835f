"""내장 시나리오 (i), (ii) 종단 간 식별 재현"""

import math

import numpy as np
import pytest

from inversetma.models.schemas import ObservedProducts
from inversetma.services.fim import pack9, synthesize_observed, weighted_norm_sq
from inversetma.services.objective import alpha_theta_ls, frobenius_objective
from inversetma.services.optimizer import identify, rspe, tk_sensitivity

from tests.conftest import ALPHA_TRUE


def test_identification_recovers_platform(identification):
    _, result = identification
    assert result.rspe is not None and result.rspe < 1.0
    assert result.f_residual_ratio < 1e-8
    assert result.alpha_theta_hat == pytest.approx(ALPHA_TRUE, rel=1e-3)
    assert result.g_best <= result.g_upper_bound * (1.0 + 1e-9)
    assert not result.observability.stealthy
    s1, s2 = result.observability.half_scale_speeds
    assert s1 != pytest.approx(s2, rel=1e-6)


def test_winning_zone_has_best_objective(identification):
    _, result = identification
    finished = [z for z in result.zones if z.g_value is not None]
    assert result.g_best == max(z.g_value for z in finished)
    winner = next(z for z in result.zones if z.label == result.winning_zone)
    assert winner.rspe == result.rspe


def test_zone_traces_recorded(identification):
    _, result = identification
    for zone in result.zones:
        if zone.state is None:
            continue
        assert zone.trace[0].iteration == 0
        assert zone.trace[-1].iteration == zone.iterations
        assert all(e.rspe is not None for e in zone.trace)
        values = [e.g_best for e in zone.trace]
        assert all(b >= a for a, b in zip(values, values[1:]))


def test_identification_deterministic(scenario, identification):
    guesses, first = identification
    again = identify(scenario.obs, guesses, scenario.cfg.optimizer.to_params(), truth=scenario.truth)
    assert np.array_equal(again.state.as_vector(), first.state.as_vector())
    assert again.g_best == first.g_best
    for a, b in zip(again.zones, first.zones):
        assert [e.g_best for e in a.trace] == [e.g_best for e in b.trace]


def test_parallel_zones_match_sequential(scenario, identification):
    guesses, first = identification
    parallel = identify(
        scenario.obs, guesses, scenario.cfg.optimizer.to_params(), truth=scenario.truth, workers=3
    )
    assert [z.label for z in parallel.zones] == [z.label for z in first.zones]
    assert np.array_equal(parallel.state.as_vector(), first.state.as_vector())
    assert parallel.alpha_theta_hat == first.alpha_theta_hat


def test_sensitivity_at_true_turn_matches_identify(scenario, identification):
    _, result = identification
    eaves = scenario.cfg.eavesdropper
    (entry,) = tk_sensitivity(
        scenario.obs,
        [scenario.grid.k],
        scenario.cfg.optimizer.to_params(),
        bounds=eaves.bounds(),
        n_theta=eaves.n_theta,
        truth=scenario.truth,
    )
    assert entry.k == scenario.grid.k
    assert entry.g_best == result.g_best
    assert entry.rspe == min(z.rspe for z in result.zones if z.rspe is not None)


@pytest.mark.slow
def test_turn_index_sweep_minimum_at_true_turn(scenario):
    eaves = scenario.cfg.eavesdropper
    ks = list(range(11, 192, 10)) + [scenario.grid.k]
    entries = tk_sensitivity(
        scenario.obs,
        ks,
        scenario.cfg.optimizer.to_params(),
        bounds=eaves.bounds(),
        n_theta=eaves.n_theta,
        truth=scenario.truth,
        truth_grid=scenario.grid,
        workers=4,
    )
    assert [e.k for e in entries] == sorted(set(ks))
    scored = [e for e in entries if e.rspe is not None]
    best = min(scored, key=lambda e: e.rspe)
    assert best.k == scenario.grid.k
    assert best.rspe < 1.0


def test_initial_guess_rspe_above_identified(identification, scenario):
    guesses, result = identification
    start = next(z for z in guesses.zones if z.label == result.winning_zone)
    initial = rspe(start.candidate.waypoints, scenario.truth, scenario.grid)
    assert math.isfinite(initial) and initial > 0.0
    assert initial > result.rspe


def test_replay_from_identified_state(scenario, identification):
    _, result = identification
    alpha = 1234.5
    fim = synthesize_observed(scenario.target, result.state, scenario.grid, alpha)
    replay = ObservedProducts(j_obs=pack9(fim), x_t_hat=scenario.target, grid=scenario.grid)
    assert alpha_theta_ls(replay, result.state) == pytest.approx(alpha, rel=1e-9)
    residual = frobenius_objective(replay, result.state, alpha_theta_ls(replay, result.state))
    assert residual <= 1e-18 * weighted_norm_sq(replay.j_obs)


def test_sensitivity_at_extreme_turn_indices(scenario_i):
    s = scenario_i
    eaves = s.cfg.eavesdropper
    ks = [2, s.grid.n - 1]
    entries = tk_sensitivity(
        s.obs,
        ks,
        s.cfg.optimizer.to_params(),
        bounds=eaves.bounds(),
        n_theta=eaves.n_theta,
        truth=s.truth,
        truth_grid=s.grid,
    )
    assert [e.k for e in entries] == ks
    for e in entries:
        assert e.error is None
        assert math.isfinite(e.rspe) and e.rspe > 1.0

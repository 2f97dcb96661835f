import math

import numpy as np
import pytest

from inversetma.errors import IdentificationError, ObjectiveEvaluationError
from inversetma.models.schemas import GuessSet, SimplexParams, Waypoints
from inversetma.services.initguess import zone_guesses
from inversetma.services.motion import waypoints_from_state
from inversetma.services.objective import ReducedObjective
from inversetma.services.optimizer import identify, nelder_mead_maximize, rspe


def _paraboloid(x: np.ndarray) -> float:
    return -((x[0] - 1.0) ** 2 + 10.0 * (x[1] + 2.0) ** 2)


def test_nelder_mead_paraboloid():
    params = SimplexParams(steps=(0.5, 0.5))
    result = nelder_mead_maximize(_paraboloid, np.zeros(2), params)
    assert result.converged
    np.testing.assert_allclose(result.x, [1.0, -2.0], atol=1e-6)
    assert result.value == pytest.approx(0.0, abs=1e-10)


def test_nelder_mead_trace_monotone():
    result = nelder_mead_maximize(_paraboloid, np.array([3.0, 3.0]), SimplexParams(steps=(1.0, 1.0)))
    iterations = [e.iteration for e in result.trace]
    assert iterations[0] == 0
    assert iterations == sorted(set(iterations))
    values = [e.g_best for e in result.trace]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert all(e.rspe is None for e in result.trace)


def test_nelder_mead_callback_recorded():
    result = nelder_mead_maximize(
        _paraboloid, np.zeros(2), SimplexParams(steps=(0.5, 0.5)), callback=lambda x: float(np.linalg.norm(x))
    )
    assert all(e.rspe is not None for e in result.trace)
    assert result.trace[-1].rspe == pytest.approx(math.sqrt(5.0), abs=1e-5)


def test_nelder_mead_iteration_budget():
    params = SimplexParams(steps=(0.5, 0.5), max_iterations=5, restarts=0)
    result = nelder_mead_maximize(_paraboloid, np.array([10.0, 10.0]), params)
    assert result.iterations == 5
    assert not result.converged


def test_nelder_mead_deterministic():
    a = nelder_mead_maximize(_paraboloid, np.array([2.0, -1.0]))
    b = nelder_mead_maximize(_paraboloid, np.array([2.0, -1.0]))
    assert np.array_equal(a.x, b.x)
    assert [e.g_best for e in a.trace] == [e.g_best for e in b.trace]


def test_nelder_mead_non_finite_start():
    with pytest.raises(ObjectiveEvaluationError):
        nelder_mead_maximize(lambda x: math.nan, np.ones(2))


def test_nelder_mead_step_shape_checked():
    with pytest.raises(ValueError):
        nelder_mead_maximize(_paraboloid, np.zeros(2), SimplexParams(steps=(1.0, 1.0, 1.0)))


def test_simplex_params_validation():
    with pytest.raises(ValueError):
        SimplexParams(reflection=2.0, expansion=1.5)
    with pytest.raises(ValueError):
        SimplexParams(contraction=1.0)


def test_truth_is_fixed_point(scenario_ii):
    objective = ReducedObjective(scenario_ii.obs)
    x0 = scenario_ii.truth.as_vector()
    g0 = objective(x0)
    result = nelder_mead_maximize(objective, x0, SimplexParams(steps=(50.0, 50.0, 0.5, 0.05, 0.05)))
    assert result.value >= g0 * (1.0 - 1e-12)
    assert result.value <= objective.upper_bound * (1.0 + 1e-12)


def test_rspe(scenario_i):
    s = scenario_i
    assert rspe(s.truth, s.truth, s.grid) == 0.0
    wp = waypoints_from_state(s.truth, s.grid)
    shifted = Waypoints(
        p1=(wp.p1[0] + 100.0, wp.p1[1]), pk=(wp.pk[0] + 100.0, wp.pk[1]), pn=(wp.pn[0] + 100.0, wp.pn[1])
    )
    assert rspe(shifted, s.truth, s.grid) == pytest.approx(100.0, rel=1e-9)
    assert rspe(wp, s.truth, s.grid) == pytest.approx(0.0, abs=1e-9)


def test_identify_requires_zones(scenario_i):
    empty = GuessSet(zones=[], candidates=[], alpha_grid=(1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        identify(scenario_i.obs, empty)


def test_identify_reports_all_zone_failures(scenario_i, monkeypatch):
    eaves = scenario_i.cfg.eavesdropper
    guesses = zone_guesses(scenario_i.obs, eaves.bounds(), eaves.n_theta)

    def broken(*args, **kwargs):
        raise ObjectiveEvaluationError("평가 불가")

    monkeypatch.setattr("inversetma.services.optimizer.nelder_mead_maximize", broken)
    with pytest.raises(IdentificationError) as info:
        identify(scenario_i.obs, guesses)
    assert set(info.value.causes) == {z.label for z in guesses.zones}

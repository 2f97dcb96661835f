import math

import numpy as np
import pytest

from inversetma.errors import AmbiguousAxisError, GeometryError, UnobservableGeometryError
from inversetma.models.schemas import AlphaBounds, ConstrainedPlatformState, ObservedProducts, TargetState, Waypoints
from inversetma.services.fim import assemble_fim, pack9, synthesize_observed, unpack9
from inversetma.services.initguess import (
    admissible_pairs,
    alpha_bounds_from_ranges,
    alpha_grid,
    bearing_axes,
    covariance_blocks,
    cross_track_unit,
    endpoint_guesses,
    guess_for_alpha,
    midpoint_probe,
    n_theta_known_alpha,
    n_theta_min,
    range_estimates,
    symmetric_eig2,
    turn_guess,
    zone_guesses,
)
from inversetma.services.motion import platform_position, target_position, waypoints_from_state
from inversetma.services.optimizer import rspe

from tests.conftest import ALPHA_TRUE

BOUNDS = AlphaBounds(alpha_min=532.2449, alpha_max=3206.5)


def test_alpha_grid():
    grid = alpha_grid(BOUNDS, 5)
    assert len(grid) == 5
    assert grid[0] == BOUNDS.alpha_min and grid[-1] == BOUNDS.alpha_max
    assert np.all(np.diff(grid) > 0)
    with pytest.raises(ValueError):
        alpha_grid(BOUNDS, 1)


def test_alpha_bounds_from_sensor_ranges():
    bounds = alpha_bounds_from_ranges((0.652, 0.982), (0.0175, 0.035))
    assert bounds.alpha_min == pytest.approx(532.2449, rel=1e-6)
    assert bounds.alpha_max == pytest.approx(3206.5, rel=1e-4)
    with pytest.raises(ValueError):
        alpha_bounds_from_ranges((0.9, 0.5), (0.0175, 0.035))


def test_alpha_bounds_ordered():
    with pytest.raises(ValueError):
        AlphaBounds(alpha_min=10.0, alpha_max=5.0)


def test_grid_density_rules():
    assert n_theta_min(BOUNDS) == 5
    assert n_theta_min(AlphaBounds(alpha_min=1.0, alpha_max=1.0)) == 2
    assert n_theta_min(AlphaBounds(alpha_min=1.0, alpha_max=9.0)) == 6
    assert n_theta_known_alpha(BOUNDS, ALPHA_TRUE) == pytest.approx(1.503, abs=1e-3)


def test_symmetric_eig2_matches_numpy(rng):
    for _ in range(50):
        a = rng.normal(size=(2, 2))
        a = a + a.T
        lam_max, lam_min, e_max, e_min = symmetric_eig2(a)
        ref_val, ref_vec = np.linalg.eigh(a)
        assert lam_max == pytest.approx(ref_val[1], abs=1e-12)
        assert lam_min == pytest.approx(ref_val[0], abs=1e-12)
        np.testing.assert_allclose(a @ e_max, lam_max * e_max, atol=1e-12)
        np.testing.assert_allclose(a @ e_min, lam_min * e_min, atol=1e-12)
        assert abs(abs(e_max @ ref_vec[:, 1]) - 1.0) < 1e-12


def test_symmetric_eig2_repeated_eigenvalue():
    with pytest.raises(AmbiguousAxisError):
        symmetric_eig2(3.0 * np.eye(2))


def test_cross_track_unit():
    np.testing.assert_allclose(cross_track_unit(np.array([3.0, 4.0])), [-0.8, 0.6])
    with pytest.raises(GeometryError):
        cross_track_unit(np.zeros(2))


def test_admissible_pairs_same_side():
    v_t = np.array([-10.0, 5.0])
    u = cross_track_unit(v_t)
    i1 = np.array([0.6, -0.8])
    i_n = np.array([-0.28, 0.96])
    (a1, an), (b1, bn) = admissible_pairs(i1, i_n, v_t)
    assert a1 @ u > 0 and an @ u > 0
    np.testing.assert_array_equal(b1, -a1)
    np.testing.assert_array_equal(bn, -an)


def test_bearing_axes_follow_line_of_sight(scenario):
    s = scenario
    fim = assemble_fim(s.target, s.truth, s.grid, ALPHA_TRUE)
    i1, i_n = bearing_axes(fim)
    for i, axis in ((1, i1), (s.grid.n, i_n)):
        los = platform_position(s.truth, s.grid, i) - target_position(s.target, s.grid, i)
        cos = abs(axis @ los) / np.linalg.norm(los)
        assert cos > math.cos(math.radians(5.0))


def _constant_range_case(grid):
    v_t = (-10.0, 5.0)
    x_t = TargetState.from_velocity((15e3, 35e3), v_t, grid)
    heading = math.atan2(v_t[0], v_t[1])
    x_p = ConstrainedPlatformState(xi=1e4, eta=2e4, s=math.hypot(*v_t), phi1=heading, phi2=heading)
    return x_t, x_p, math.hypot(5e3, 15e3)


def test_constant_range_estimates_exact(scenario_i):
    grid = scenario_i.grid
    x_t, x_p, r = _constant_range_case(grid)
    alpha = 1500.0
    fim = assemble_fim(x_t, x_p, grid, alpha)
    r1, rn = range_estimates(fim, grid, alpha)
    assert r1 == pytest.approx(r, rel=1e-9)
    assert rn == pytest.approx(r, rel=1e-9)
    los = platform_position(x_p, grid, 1) - target_position(x_t, grid, 1)
    probe = midpoint_probe(fim, grid, alpha, x_t, los / r, x_t.velocity(grid))
    r_m = np.linalg.norm(probe - target_position(x_t, grid, grid.midpoint_index()))
    assert r_m == pytest.approx(r, rel=1e-9)


def test_range_estimates_scale_with_alpha(scenario_ii):
    fim = unpack9(scenario_ii.obs.j_obs)
    r1, rn = range_estimates(fim, scenario_ii.grid, ALPHA_TRUE)
    r1_q, rn_q = range_estimates(fim, scenario_ii.grid, ALPHA_TRUE / 4.0)
    assert r1_q == pytest.approx(r1 / 2.0, rel=1e-12)
    assert rn_q == pytest.approx(rn / 2.0, rel=1e-12)
    with pytest.raises(ValueError):
        range_estimates(fim, scenario_ii.grid, 0.0)


def test_endpoint_guesses_offsets(scenario_i):
    x_t = scenario_i.target
    pairs = [(np.array([0.0, 1.0]), np.array([1.0, 0.0]))]
    ((p1, pn),) = endpoint_guesses(x_t, 100.0, 200.0, pairs)
    np.testing.assert_allclose(p1, (x_t.p1[0], x_t.p1[1] + 100.0))
    np.testing.assert_allclose(pn, (x_t.pn[0] + 200.0, x_t.pn[1]))


def test_turn_guess_recovers_right_angle_turn(scenario):
    s = scenario
    truth_wp = waypoints_from_state(s.truth, s.grid)
    probe = platform_position(s.truth, s.grid, s.grid.midpoint_index())
    w = turn_guess(np.array(truth_wp.p1), np.array(truth_wp.pn), s.grid, probe)
    np.testing.assert_allclose(w.pk, truth_wp.pk, rtol=1e-9, atol=1e-6)
    assert w.is_equal_speed(s.grid, 1e-9)


def test_turn_guess_equal_speed_for_off_center_turn(scenario_i):
    grid = scenario_i.grid.with_turn(41)
    w = turn_guess(np.array([0.0, 0.0]), np.array([3000.0, 4000.0]), grid, np.array([100.0, 100.0]))
    assert w.is_equal_speed(grid, 1e-9)


def test_turn_guess_rejects_coincident_endpoints(scenario_i):
    with pytest.raises(GeometryError):
        turn_guess(np.zeros(2), np.zeros(2), scenario_i.grid, np.ones(2))


def test_guess_for_alpha_is_equal_speed(scenario_ii):
    w = guess_for_alpha(scenario_ii.obs, ALPHA_TRUE, 1)
    assert w.is_equal_speed(scenario_ii.grid, 1e-9)
    with pytest.raises(ValueError):
        guess_for_alpha(scenario_ii.obs, ALPHA_TRUE, 3)


def test_zone_guesses(scenario):
    s = scenario
    guesses = zone_guesses(s.obs, BOUNDS, 5)
    labels = [z.label for z in guesses.zones]
    assert 2 <= len(labels) <= 3
    assert labels == sorted(labels)
    assert len(guesses.candidates) <= 10
    assert len(guesses.alpha_grid) == 5
    for zone in guesses.zones:
        assert zone.candidate.waypoints.is_equal_speed(s.grid, 1e-9)
        assert math.isfinite(zone.candidate.g_value)
    best = min(rspe(z.candidate.waypoints, s.truth, s.grid) for z in guesses.zones)
    r1 = float(np.linalg.norm(s.truth.p1 - np.asarray(s.target.p1)))
    assert best < 0.5 * r1


def test_zone_guesses_needs_three_alphas(scenario_i):
    with pytest.raises(ValueError):
        zone_guesses(scenario_i.obs, BOUNDS, 2)


def _rotation(psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s], [s, c]])


def test_guess_rotates_with_scene(scenario_i):
    s = scenario_i
    psi = 0.9
    rot = _rotation(psi)
    x_t = TargetState(p1=tuple(rot @ np.asarray(s.target.p1)), pn=tuple(rot @ np.asarray(s.target.pn)))
    p1 = rot @ s.truth.p1
    x_p = ConstrainedPlatformState(
        xi=p1[0], eta=p1[1], s=s.truth.s, phi1=s.truth.phi1 - psi, phi2=s.truth.phi2 - psi
    )
    np.testing.assert_allclose(x_p.v1, rot @ s.truth.v1, atol=1e-12)
    fim = synthesize_observed(x_t, x_p, s.grid, ALPHA_TRUE)
    rotated = ObservedProducts(j_obs=pack9(fim), x_t_hat=x_t, grid=s.grid)

    for alpha in (BOUNDS.alpha_min, ALPHA_TRUE):
        for g in (1, 2):
            w = guess_for_alpha(s.obs, alpha, g)
            w_rot = guess_for_alpha(rotated, alpha, g)
            for a, b in ((w.p1, w_rot.p1), (w.pk, w_rot.pk), (w.pn, w_rot.pn)):
                np.testing.assert_allclose(rot @ np.asarray(a), b, rtol=0, atol=1e-6)


def test_covariance_blocks_single_leg_unobservable(scenario_i):
    grid = scenario_i.grid
    x_t, x_p, _ = _constant_range_case(grid)
    fim = assemble_fim(x_t, x_p, grid, ALPHA_TRUE)
    with pytest.raises(UnobservableGeometryError):
        covariance_blocks(fim)
    with pytest.raises(UnobservableGeometryError):
        bearing_axes(fim)


def test_admissible_pairs_reject_axis_along_target_track():
    v_t = np.array([0.0, 1.0])
    with pytest.raises(GeometryError):
        admissible_pairs(np.array([0.0, 1.0]), np.array([0.6, 0.8]), v_t)
    with pytest.raises(GeometryError):
        admissible_pairs(np.array([0.6, 0.8]), np.array([0.0, -1.0]), v_t)


def test_admissible_pairs_along_cross_track():
    v_t = np.array([-10.0, 5.0])
    u = cross_track_unit(v_t)
    pairs = admissible_pairs(-u, u, v_t)
    assert len(pairs) == 2
    np.testing.assert_array_equal(pairs[0][0], u)
    np.testing.assert_array_equal(pairs[0][1], u)
    np.testing.assert_array_equal(pairs[1][0], -u)
    np.testing.assert_array_equal(pairs[1][1], -u)


def test_midpoint_single_dyad_points_along_line_of_sight(scenario_ii):
    s = scenario_ii
    m = s.grid.midpoint_index()
    fim = assemble_fim(s.target, s.truth, s.grid, ALPHA_TRUE, samples=[m])
    los = platform_position(s.truth, s.grid, m) - target_position(s.target, s.grid, m)
    los /= np.linalg.norm(los)
    probe = midpoint_probe(fim, s.grid, ALPHA_TRUE, s.target, los, s.target.velocity(s.grid))
    direction = probe - target_position(s.target, s.grid, m)
    direction /= np.linalg.norm(direction)
    np.testing.assert_allclose(direction, los, atol=1e-9)


def _side(a: np.ndarray, b: np.ndarray, q: np.ndarray) -> float:
    d, e = b - a, q - a
    return float(np.sign(d[0] * e[1] - d[1] * e[0]))


def test_midpoint_estimate_on_true_turn_side(scenario_i):
    s = scenario_i
    fim = unpack9(s.obs.j_obs)
    v_t = s.target.velocity(s.grid)
    i1, i_n = bearing_axes(fim)
    los1 = platform_position(s.truth, s.grid, 1) - target_position(s.target, s.grid, 1)
    pair = next(p for p in admissible_pairs(i1, i_n, v_t) if p[0] @ los1 > 0)
    r1, rn = range_estimates(fim, s.grid, ALPHA_TRUE)
    ((p1, pn),) = endpoint_guesses(s.target, r1, rn, [pair])
    probe = midpoint_probe(fim, s.grid, ALPHA_TRUE, s.target, pair[0], v_t)
    turn = platform_position(s.truth, s.grid, s.grid.k)
    assert _side(p1, pn, probe) == _side(p1, pn, turn) != 0.0


def test_zone_guess_beats_straight_chord(scenario_i):
    s = scenario_i
    guesses = zone_guesses(s.obs, BOUNDS, 5)
    best = min((z.candidate.waypoints for z in guesses.zones), key=lambda w: rspe(w, s.truth, s.grid))
    p1, pn = np.asarray(best.p1), np.asarray(best.pn)
    frac = (s.grid.tk - s.grid.t1) / s.grid.duration
    chord = Waypoints(p1=best.p1, pk=tuple(p1 + frac * (pn - p1)), pn=best.pn)
    assert rspe(best, s.truth, s.grid) < rspe(chord, s.truth, s.grid)

"""공용 픽스처: 내장 시나리오 (i), (ii) 의 설정/산출물/식별 결과"""

import math
from typing import NamedTuple

import numpy as np
import pytest

from inversetma.models.schemas import ConstrainedPlatformState, ObservedProducts, TargetState, TimeGrid
from inversetma.services.initguess import zone_guesses
from inversetma.services.optimizer import identify
from inversetma.services.scenario_service import BUNDLED_SCENARIOS, bundled_config, load_config, synthesize

ALPHA_TRUE = 2658.0


class Scenario(NamedTuple):
    name: str
    cfg: object
    obs: ObservedProducts
    truth: ConstrainedPlatformState

    @property
    def grid(self) -> TimeGrid:
        return self.obs.grid

    @property
    def target(self) -> TargetState:
        return self.obs.x_t_hat


def build_scenario(name: str) -> Scenario:
    cfg = load_config(bundled_config(name))
    obs, _ = synthesize(cfg)
    return Scenario(name=name, cfg=cfg, obs=obs, truth=cfg.truth)


@pytest.fixture(scope="session", params=BUNDLED_SCENARIOS)
def scenario(request) -> Scenario:
    return build_scenario(request.param)


@pytest.fixture(scope="session")
def scenario_i() -> Scenario:
    return build_scenario("scenario_i")


@pytest.fixture(scope="session")
def scenario_ii() -> Scenario:
    return build_scenario("scenario_ii")


@pytest.fixture(scope="session")
def identification(scenario):
    eaves = scenario.cfg.eavesdropper
    guesses = zone_guesses(scenario.obs, eaves.bounds(), eaves.n_theta)
    result = identify(scenario.obs, guesses, scenario.cfg.optimizer.to_params(), truth=scenario.truth)
    return guesses, result


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_instance(rng, grid: TimeGrid, min_range: float = 2000.0):
    """(표적, 등속 2구간 플랫폼, α_θ) 무작위 생성: 최소 거리가 min_range 이상인 것만"""
    from inversetma.services.motion import platform_track, target_track

    while True:
        p_t = np.array([15e3, 35e3]) + rng.uniform(-5e3, 5e3, 2)
        v_t = rng.uniform(-12.0, 12.0, 2)
        x_t = TargetState.from_velocity(tuple(p_t), tuple(v_t), grid)
        x_p = ConstrainedPlatformState(
            xi=1e4 + rng.uniform(-5e3, 5e3),
            eta=2e4 + rng.uniform(-5e3, 5e3),
            s=rng.uniform(3.0, 12.0),
            phi1=rng.uniform(-math.pi, math.pi),
            phi2=rng.uniform(-math.pi, math.pi),
        )
        d = target_track(x_t, grid) - platform_track(x_p, grid)
        if np.min(np.hypot(d[:, 0], d[:, 1])) >= min_range:
            return x_t, x_p, float(rng.uniform(100.0, 5000.0))

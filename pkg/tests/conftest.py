"""共通フィクスチャ"""

import os

import numpy as np
import pytest

from quicklap.models import BackendConfig, EpisodeConfig, Hyperparameters, PlannerConfig
from quicklap.world import build_scenario

FIXTURES_DIR = os.path.join(os.path.dirname(__file__), 'fixtures')


@pytest.fixture
def hp():
    return Hyperparameters()


@pytest.fixture
def fast_planner():
    """テスト用の小さなプランナー設定"""
    return PlannerConfig(horizon=4, population=16, elites=4, iterations=3, refine_rounds=1)


@pytest.fixture
def world_c():
    return build_scenario('C')


@pytest.fixture
def short_episode(fast_planner):
    """1回だけ介入する短いエピソードの設定を作る"""
    def make(algorithm='quicklap', scenario_id='C', utterance='Steer clear of the cone.',
             backend_kind='mock', seed=0, **kwargs):
        values = dict(
            scenario_id=scenario_id,
            algorithm=algorithm,
            utterance=utterance,
            backend=BackendConfig(kind=backend_kind, retry_wait=0.0),
            planner=fast_planner,
            episode_length=60,
            intervention_windows=((45, 55),),
            seed=seed,
        )
        values.update(kwargs)
        return EpisodeConfig(**values)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def read_fixture(name: str) -> str:
    with open(os.path.join(FIXTURES_DIR, name), 'r', encoding='utf-8') as f:
        return f.read()

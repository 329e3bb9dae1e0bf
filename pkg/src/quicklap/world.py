"""
Driving World Module

シナリオ（車線・コーン・水たまり・他車）の構築と、報酬特徴量の計算を提供します。
シナリオ定義は data/scenarios.json から読み込むため、
新しいワールドの追加にコード変更は不要です。

特徴量はすべて「望ましい状態で 1、望ましくない状態でほぼ 0」に正規化されています。
"""

import json
import logging
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .dynamics import Control, State, Trajectory
from .errors import DimensionError, ScenarioError

logger = logging.getLogger(__name__)

FEATURE_ORDER: Tuple[str, ...] = (
    'speed_desirability',
    'lane_alignment',
    'off_road',
    'cone_distance',
    'car_distance',
    'puddle_distance',
)

FEATURE_DESCRIPTIONS: Dict[str, str] = {
    'speed_desirability': "How close the car's speed is to the desired speed limit",
    'lane_alignment': 'How well the car stays centered in its lane',
    'off_road': 'Penalty for driving off the road',
    'cone_distance': 'Safe distance from traffic cones',
    'car_distance': 'Safe distance from other vehicles',
    'puddle_distance': 'Safe distance from puddles',
}

OBSTACLE_FEATURES: Dict[str, str] = {
    'cone_distance': 'cones',
    'car_distance': 'cars',
    'puddle_distance': 'puddles',
}

SCENARIO_ALIASES: Dict[str, str] = {
    'CPC-3': 'CPC3',
    'CPC-4': 'CPC4',
}


@dataclass(frozen=True)
class Obstacle:
    """障害物（vx は車線維持スクリプトの等速度、静止物は 0）"""
    x: float
    y: float
    vx: float = 0.0

    def to_dict(self) -> dict:
        return {'x': self.x, 'y': self.y, 'vx': self.vx}


@dataclass(frozen=True)
class World:
    """シナリオ定義（構築後は不変）"""
    scenario_id: str
    name: str
    description: str
    lanes: int
    lane_width: float
    v_target: float
    r_safe: float
    gamma: float
    active_features: Tuple[str, ...]
    theta_star: Tuple[float, ...]
    initial_state: State
    cones: Tuple[Obstacle, ...] = ()
    puddles: Tuple[Obstacle, ...] = ()
    cars: Tuple[Obstacle, ...] = ()
    # 特徴量計算用のキャッシュ
    _lane_centers: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        centers = self.road_bounds[0] + (np.arange(self.lanes) + 0.5) * self.lane_width
        object.__setattr__(self, '_lane_centers', centers)

    @property
    def d(self) -> int:
        return len(self.active_features)

    @property
    def road_bounds(self) -> Tuple[float, float]:
        return (0.0, self.lanes * self.lane_width)

    @property
    def lane_centers(self) -> np.ndarray:
        return self._lane_centers

    def lane_center(self, lane: int) -> float:
        return float(self._lane_centers[lane])

    def feature_descriptions(self) -> List[str]:
        return [FEATURE_DESCRIPTIONS[name] for name in self.active_features]

    def obstacles_for(self, feature: str) -> Tuple[Obstacle, ...]:
        return getattr(self, OBSTACLE_FEATURES[feature])

    def to_dict(self) -> dict:
        return {
            'scenario_id': self.scenario_id,
            'name': self.name,
            'lanes': self.lanes,
            'lane_width': self.lane_width,
            'v_target': self.v_target,
            'r_safe': self.r_safe,
            'gamma': self.gamma,
            'active_features': list(self.active_features),
            'theta_star': list(self.theta_star),
            'cones': [o.to_dict() for o in self.cones],
            'puddles': [o.to_dict() for o in self.puddles],
            'cars': [o.to_dict() for o in self.cars],
        }


def default_data_dir() -> str:
    """マスターデータのディレクトリ（QUICKLAP_DATA_DIR で上書き可）"""
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    return os.environ.get('QUICKLAP_DATA_DIR', os.path.join(here, 'data'))


@lru_cache(maxsize=8)
def load_scenarios(path: Optional[str] = None) -> dict:
    """シナリオ定義ファイルをロード

    Args:
        path: JSONファイルのパス（None の場合は data/scenarios.json）

    Returns:
        dict: 'defaults' と 'scenarios' を含む辞書

    Raises:
        ScenarioError: ファイルが読めない、または形式が不正な場合
    """
    path = path or os.path.join(default_data_dir(), 'scenarios.json')
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError(f"Failed to load scenarios from {path}: {e}")
    if 'scenarios' not in data:
        raise ScenarioError(f"Failed to load scenarios from {path}: missing 'scenarios' key")
    return data


def build_scenario(scenario_id: str, path: Optional[str] = None) -> World:
    """シナリオIDからワールドを構築

    Args:
        scenario_id: C, CP, CPC3, CPC4（CPC-3 / CPC-4 も可）
        path: シナリオ定義ファイル（省略時は同梱データ）

    Returns:
        World: 構築済みワールド

    Raises:
        ScenarioError: 未知のIDや不正な定義の場合
    """
    data = load_scenarios(path)
    key = SCENARIO_ALIASES.get(scenario_id, scenario_id)
    entry = data['scenarios'].get(key)
    if entry is None:
        known = ', '.join(sorted(data['scenarios']))
        raise ScenarioError(f"Unknown scenario '{scenario_id}' (known: {known})")

    params = dict(data.get('defaults', {}))
    params.update(entry.get('constants', {}))
    lane_width = float(params.get('lane_width', 0.17))
    lanes = int(entry['lanes'])

    def lateral(entry: dict) -> float:
        if 'y' in entry:
            return float(entry['y'])
        return (int(entry['lane']) + 0.5 + float(entry.get('offset', 0.0))) * lane_width

    def obstacles(kind: str) -> Tuple[Obstacle, ...]:
        return tuple(
            Obstacle(x=float(o['x']), y=lateral(o), vx=float(o.get('vx', 0.0)))
            for o in entry.get(kind, [])
        )

    features = tuple(entry['features'])
    unknown = [f for f in features if f not in FEATURE_ORDER]
    if unknown:
        raise ScenarioError(f"Scenario '{key}' lists unknown features: {unknown}")
    theta_star = tuple(float(entry['theta_star'][f]) for f in features)

    ego = entry.get('ego', {})
    v_target = float(params.get('v_target', 1.0))
    initial_state = State(
        x=float(ego.get('x', 0.0)),
        y=lateral({'lane': ego.get('lane', 0), 'offset': ego.get('offset', 0.0)}),
        heading=float(ego.get('heading', 0.0)),
        speed=float(ego.get('speed', v_target)),
    )

    world = World(
        scenario_id=key,
        name=entry.get('name', key),
        description=entry.get('description', ''),
        lanes=lanes,
        lane_width=lane_width,
        v_target=v_target,
        r_safe=float(params.get('r_safe_lanes', 1.5)) * lane_width,
        gamma=float(params.get('gamma', 2.0)),
        active_features=features,
        theta_star=theta_star,
        initial_state=initial_state,
        cones=obstacles('cones'),
        puddles=obstacles('puddles'),
        cars=obstacles('cars'),
    )
    _validate_world(world)
    return world


def _validate_world(world: World) -> None:
    lo, hi = world.road_bounds
    for kind in ('cones', 'puddles', 'cars'):
        for o in getattr(world, kind):
            if not lo <= o.y <= hi:
                raise ScenarioError(
                    f"Scenario '{world.scenario_id}': {kind} at y={o.y:.3f} is outside the road [{lo}, {hi}]"
                )
    for feature, kind in OBSTACLE_FEATURES.items():
        if feature in world.active_features and not getattr(world, kind):
            logger.warning(f"Scenario '{world.scenario_id}' activates {feature} without any {kind}")


def feature_matrix(world: World, states: np.ndarray, times) -> np.ndarray:
    """特徴量をまとめて計算（ベクトル化版）

    Args:
        world: ワールド
        states: (..., 4) の状態配列
        times: (...) の時刻（秒）。スカラーも可

    Returns:
        np.ndarray: (..., d) の特徴量
    """
    x, y, v = states[..., 0], states[..., 1], states[..., 3]
    t = np.broadcast_to(np.asarray(times, dtype=float), x.shape)
    w = world.lane_width
    columns = []
    for name in world.active_features:
        if name == 'speed_desirability':
            columns.append(1.0 - ((v - world.v_target) / world.v_target) ** 2)
        elif name == 'lane_alignment':
            lo, _ = world.road_bounds
            idx = np.clip(np.round((y - lo) / w - 0.5), 0, world.lanes - 1).astype(int)
            d_lane = np.abs(y - world.lane_centers[idx])
            columns.append(1.0 - (d_lane / w) ** 2)
        elif name == 'off_road':
            lo, hi = world.road_bounds
            overshoot = np.maximum(lo - y, 0.0) + np.maximum(y - hi, 0.0)
            columns.append(np.where(overshoot > 0.0, 1.0 - (overshoot / w) ** 2, 1.0))
        else:
            columns.append(_obstacle_feature(world, world.obstacles_for(name), x, y, t))
    return np.stack(columns, axis=-1)


def _obstacle_feature(world: World, obstacles: Sequence[Obstacle],
                      x: np.ndarray, y: np.ndarray, t: np.ndarray) -> np.ndarray:
    if not obstacles:
        return np.ones_like(x)
    ox = np.array([o.x for o in obstacles])
    oy = np.array([o.y for o in obstacles])
    ovx = np.array([o.vx for o in obstacles])
    dx = x[..., np.newaxis] - (ox + ovx * t[..., np.newaxis])
    dy = y[..., np.newaxis] - oy
    dist = np.hypot(dx, dy)
    # ペナルティ = clamp((r_safe − d)/r_safe, 0, 1) · σ(−γ|Δx|)
    proximity = np.clip((world.r_safe - dist) / world.r_safe, 0.0, 1.0)
    penalty = proximity * expit(-world.gamma * np.abs(dx))
    return np.min(1.0 - penalty, axis=-1)


def feature_vector(world: World, s: State, u: Optional[Control] = None, t: float = 0.0) -> np.ndarray:
    """1ステップ分の特徴量ベクトル φ(x, u)

    特徴量は状態のみに依存するため、u は参照しません。
    """
    return feature_matrix(world, s.as_array(), t)


def trajectory_features(world: World, trajectory: Trajectory) -> np.ndarray:
    """軌道の特徴量和 Φ(ξ)（状態 i と制御 i の組を T ステップ分合計）"""
    times = trajectory.times()[:-1]
    return feature_matrix(world, trajectory.states[:-1], times).sum(axis=0)


def feature_delta(phi_h, phi_r) -> np.ndarray:
    """特徴量差 ΔΦ = Φ(ξ_H) − Φ(ξ_R)

    Raises:
        DimensionError: 長さが一致しない場合
    """
    a = np.asarray(phi_h, dtype=float)
    b = np.asarray(phi_r, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"Failed to compute feature delta: shapes {a.shape} and {b.shape} differ")
    return a - b

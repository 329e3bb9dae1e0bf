"""
Vehicle Dynamics Module

4次元キネマティック自転車モデル（x, y, heading, speed）の状態・制御・軌道と、
前進オイラー法による決定的な積分を提供します。

    x'       = x + v·cos(heading)·dt
    y'       = y + v·sin(heading)·dt
    heading' = wrap(heading + v·steer·dt)
    speed'   = clip(speed + (accel − friction·v)·dt, 0, speed_max)
"""

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np

from .errors import DimensionError

DEFAULT_DT = 1.0 / 30.0


@dataclass(frozen=True)
class VehicleLimits:
    """制御入力と速度の上限"""
    steer_max: float = 2.0
    accel_max: float = 4.0
    speed_max: float = 2.0
    friction: float = 0.0

    @classmethod
    def from_dict(cls, data: dict) -> 'VehicleLimits':
        """辞書からインスタンスを生成"""
        return cls(**data)

    def to_dict(self) -> dict:
        """辞書に変換"""
        return {
            'steer_max': self.steer_max,
            'accel_max': self.accel_max,
            'speed_max': self.speed_max,
            'friction': self.friction,
        }


DEFAULT_LIMITS = VehicleLimits()


@dataclass(frozen=True)
class State:
    """車両状態"""
    x: float
    y: float
    heading: float
    speed: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading, self.speed], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'State':
        return cls(float(values[0]), float(values[1]), float(values[2]), float(values[3]))


@dataclass(frozen=True)
class Control:
    """制御入力（steer: ω, accel: a）"""
    steer: float = 0.0
    accel: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.steer, self.accel], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'Control':
        return cls(float(values[0]), float(values[1]))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """状態列と制御列の組

    states は (T+1, 4)、controls は (T, 2) の配列。
    t0 は先頭状態の時刻（秒）で、移動する障害物の位置計算に使います。
    """
    states: np.ndarray
    controls: np.ndarray
    dt: float = DEFAULT_DT
    t0: float = 0.0
    limits: VehicleLimits = field(default=DEFAULT_LIMITS)

    def __post_init__(self):
        if self.states.ndim != 2 or self.states.shape[1] != 4:
            raise DimensionError(f"states must have shape (T+1, 4), got {self.states.shape}")
        if self.controls.ndim != 2 or self.controls.shape[1] != 2:
            raise DimensionError(f"controls must have shape (T, 2), got {self.controls.shape}")
        if self.states.shape[0] != self.controls.shape[0] + 1:
            raise DimensionError(
                f"states must be one longer than controls: {self.states.shape[0]} vs {self.controls.shape[0]}"
            )

    @property
    def horizon(self) -> int:
        return int(self.controls.shape[0])

    def state(self, i: int) -> State:
        return State.from_array(self.states[i])

    def control(self, i: int) -> Control:
        return Control.from_array(self.controls[i])

    def times(self) -> np.ndarray:
        """各状態の時刻（秒）"""
        return self.t0 + self.dt * np.arange(self.states.shape[0])

    def same_as(self, other: 'Trajectory') -> bool:
        """ビット単位で同一かを判定"""
        return (
            np.array_equal(self.states, other.states)
            and np.array_equal(self.controls, other.controls)
            and self.dt == other.dt
            and self.t0 == other.t0
        )

    def is_consistent(self, atol: float = 0.0) -> bool:
        """再シミュレーションで状態遷移式が成り立つかを確認"""
        replay = rollout(self.state(0), self.controls, self.dt, self.limits, t0=self.t0)
        return bool(np.allclose(replay.states, self.states, rtol=0.0, atol=atol))

    def to_dict(self) -> dict:
        return {
            'states': self.states.tolist(),
            'controls': self.controls.tolist(),
            'dt': self.dt,
            't0': self.t0,
        }


def wrap_angle(theta):
    """角度を (−π, π] に正規化"""
    return theta - 2.0 * np.pi * np.ceil((theta - np.pi) / (2.0 * np.pi))


def clip_controls(controls: np.ndarray, limits: VehicleLimits = DEFAULT_LIMITS) -> np.ndarray:
    """制御入力を上限内に収める（最終軸が [steer, accel]）"""
    bound = np.array([limits.steer_max, limits.accel_max])
    return np.clip(controls, -bound, bound)


def step_array(states: np.ndarray, controls: np.ndarray, dt: float,
               limits: VehicleLimits = DEFAULT_LIMITS) -> np.ndarray:
    """状態遷移（ベクトル化版）

    Args:
        states: (..., 4) の状態配列
        controls: (..., 2) の制御配列（上限内であること）
        dt: 時間刻み（秒）
        limits: 車両の上限

    Returns:
        np.ndarray: (..., 4) の次状態
    """
    x, y, heading, speed = (states[..., i] for i in range(4))
    steer, accel = controls[..., 0], controls[..., 1]

    nxt = np.empty(np.broadcast_shapes(states.shape, controls.shape[:-1] + (4,)), dtype=float)
    nxt[..., 0] = x + speed * np.cos(heading) * dt
    nxt[..., 1] = y + speed * np.sin(heading) * dt
    nxt[..., 2] = wrap_angle(heading + speed * steer * dt)
    nxt[..., 3] = np.clip(speed + (accel - limits.friction * speed) * dt, 0.0, limits.speed_max)
    return nxt


def step(s: State, u: Control, dt: float = DEFAULT_DT,
         limits: VehicleLimits = DEFAULT_LIMITS) -> State:
    """1ステップ進めた状態を返す

    Raises:
        ValueError: dt が正でない場合
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return State.from_array(step_array(s.as_array(), u.as_array(), dt, limits))


def rollout_batch(s0: np.ndarray, controls: np.ndarray, dt: float,
                  limits: VehicleLimits = DEFAULT_LIMITS) -> np.ndarray:
    """同一初期状態から複数の制御列をまとめてロールアウト

    Args:
        s0: (4,) の初期状態
        controls: (N, T, 2) の制御列
        dt: 時間刻み
        limits: 車両の上限

    Returns:
        np.ndarray: (N, T+1, 4) の状態列
    """
    n, horizon = controls.shape[0], controls.shape[1]
    states = np.empty((n, horizon + 1, 4), dtype=float)
    states[:, 0, :] = s0
    for i in range(horizon):
        states[:, i + 1, :] = step_array(states[:, i, :], controls[:, i, :], dt, limits)
    return states


def rollout(s0: State, controls, dt: float = DEFAULT_DT,
            limits: VehicleLimits = DEFAULT_LIMITS, t0: float = 0.0) -> Trajectory:
    """制御列を適用して軌道を生成

    Args:
        s0: 初期状態
        controls: Control のリスト、または (T, 2) 配列
        dt: 時間刻み（秒）
        limits: 車両の上限
        t0: 初期時刻（秒）

    Returns:
        Trajectory: states[0] = s0 の軌道

    Raises:
        ValueError: 制御列が空の場合
    """
    u = _as_control_array(controls)
    if u.shape[0] == 0:
        raise ValueError("Failed to roll out: control sequence is empty")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = clip_controls(u, limits)
    states = rollout_batch(s0.as_array(), u[np.newaxis], dt, limits)[0]
    return Trajectory(states=states, controls=u, dt=dt, t0=t0, limits=limits)


def _as_control_array(controls) -> np.ndarray:
    if isinstance(controls, np.ndarray):
        return np.asarray(controls, dtype=float).reshape(-1, 2)
    items: List[Iterable[float]] = [
        c.as_array() if isinstance(c, Control) else np.asarray(c, dtype=float) for c in controls
    ]
    if not items:
        return np.zeros((0, 2))
    return np.vstack(items).astype(float)

"""
MPC Planner Module

重みベクトル θ の下で θᵀΦ(ξ) を最大化する制御列を、
シード付きクロスエントロピー法（CEM）と座標方向の直線探索で求めます。
模擬人間の修正軌道（真の重み θ* による再計画、または ξ_R の変形）もここで生成します。
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .dynamics import Control, State, Trajectory, clip_controls, rollout, rollout_batch
from .errors import DimensionError
from .models import PlannerConfig
from .world import World, feature_matrix

logger = logging.getLogger(__name__)

# CEMの標準偏差の下限（分布の早期収束を防ぐ）
MIN_STD = 1e-3


@dataclass(frozen=True, eq=False)
class PlanResult:
    """最適化結果（history は初期化・各反復・直線探索後の最良目的値）"""
    controls: np.ndarray
    objective: float
    history: List[float] = field(default_factory=list)


def _check_theta(world: World, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != world.d:
        raise DimensionError(f"theta has {theta.shape[0]} entries but the world has {world.d} features")
    if not np.all(np.isfinite(theta)):
        raise ValueError(f"theta must be finite, got {theta}")
    return theta


def objective_batch(world: World, theta: np.ndarray, states: np.ndarray,
                    t0: float, dt: float) -> np.ndarray:
    """(N, T+1, 4) の状態列それぞれについて θᵀΦ を計算"""
    horizon = states.shape[1] - 1
    times = t0 + dt * np.arange(horizon)
    features = feature_matrix(world, states[:, :-1], times)
    return features.sum(axis=1) @ theta


def optimize_controls(world: World, theta, s0: State, cfg: PlannerConfig,
                      t0: float = 0.0) -> PlanResult:
    """CEM + 直線探索で制御列を最適化

    Args:
        world: ワールド
        theta: 重みベクトル（長さ d）
        s0: 初期状態
        cfg: プランナー設定（seed で乱数列が決まる）
        t0: 初期時刻（秒）

    Returns:
        PlanResult: 最良の制御列と目的値の履歴
    """
    theta = _check_theta(world, theta)
    rng = np.random.default_rng(cfg.seed)
    horizon = cfg.horizon
    bound = np.array([cfg.limits.steer_max, cfg.limits.accel_max])
    origin = s0.as_array()

    def evaluate(candidates: np.ndarray) -> np.ndarray:
        states = rollout_batch(origin, candidates, cfg.dt, cfg.limits)
        return objective_batch(world, theta, states, t0, cfg.dt)

    # ゼロ制御を初期の最良解とする
    best = np.zeros((horizon, 2))
    best_value = float(evaluate(best[np.newaxis])[0])
    history = [best_value]

    mean = np.zeros((horizon, 2))
    std = np.tile(np.asarray(cfg.init_std, dtype=float), (horizon, 1))
    for _ in range(cfg.iterations):
        samples = clip_controls(mean + std * rng.standard_normal((cfg.population, horizon, 2)), cfg.limits)
        samples[0] = best
        values = evaluate(samples)
        order = np.argsort(-values, kind='stable')
        if values[order[0]] > best_value:
            best_value = float(values[order[0]])
            best = samples[order[0]].copy()
        elites = samples[order[:cfg.elites]]
        mean = elites.mean(axis=0)
        std = np.maximum(elites.std(axis=0), MIN_STD)
        history.append(best_value)

    best, best_value = _refine(evaluate, best, best_value, bound, cfg)
    history.append(best_value)
    logger.debug("Planned t0=%.3f objective=%.6f (zero control %.6f)", t0, best_value, history[0])
    return PlanResult(controls=best, objective=best_value, history=history)


def _refine(evaluate, best: np.ndarray, best_value: float, bound: np.ndarray,
            cfg: PlannerConfig):
    """座標ごとに ±step を試し、改善したときだけ採用する"""
    for round_index in range(cfg.refine_rounds):
        step = cfg.refine_step * bound * 0.5 ** round_index
        for i in range(best.shape[0]):
            for j in range(2):
                candidates = np.stack([best, best])
                candidates[0, i, j] += step[j]
                candidates[1, i, j] -= step[j]
                candidates[:, i, j] = np.clip(candidates[:, i, j], -bound[j], bound[j])
                values = evaluate(candidates)
                k = int(np.argmax(values))
                if values[k] > best_value:
                    best_value = float(values[k])
                    best = candidates[k].copy()
    return best, best_value


def plan(world: World, theta, s0: State, cfg: PlannerConfig, t0: float = 0.0) -> Trajectory:
    """ξ = argmax θᵀΦ(ξ) の近似解（horizon+1 状態の軌道）"""
    result = optimize_controls(world, theta, s0, cfg, t0)
    return rollout(s0, result.controls, cfg.dt, cfg.limits, t0=t0)


def simulate_human_correction(world: World, theta_star, s0: State, cfg: PlannerConfig,
                              t0: float = 0.0) -> Trajectory:
    """真の重み θ* で計画した人間の修正軌道 ξ_H"""
    return plan(world, theta_star, s0, cfg, t0)


def deform(xi_r: Trajectory, u_h: Control, decay: float) -> Trajectory:
    """ξ_R の制御 i に decay^i·u_H を加えて再ロールアウト

    Raises:
        ValueError: decay が (0, 1) にない場合
    """
    if not 0.0 < decay < 1.0:
        raise ValueError(f"decay must lie in (0, 1), got {decay}")
    scales = decay ** np.arange(xi_r.horizon)
    controls = xi_r.controls + scales[:, np.newaxis] * u_h.as_array()
    return rollout(xi_r.state(0), controls, xi_r.dt, xi_r.limits, t0=xi_r.t0)


def human_correction(mode: str, world: World, theta_star, xi_r: Trajectory,
                     cfg: PlannerConfig, decay: float = 0.5,
                     xi_plan: Optional[Trajectory] = None) -> Trajectory:
    """模擬人間の修正軌道

    Args:
        mode: 'planner'（θ* で再計画）または 'deform'（ξ_R を u_H 方向に変形）
        world: ワールド
        theta_star: 真の重み
        xi_r: ロボットの計画軌道（初期状態・時刻の基準）
        cfg: プランナー設定（ξ_R と同じ seed を使う）
        decay: deform モードの減衰率
        xi_plan: θ* で計画済みの軌道（省略時はここで計画）

    Returns:
        Trajectory: 修正軌道 ξ_H

    Raises:
        ValueError: 未知のモード
    """
    if xi_plan is None:
        xi_plan = simulate_human_correction(world, theta_star, xi_r.state(0), cfg, xi_r.t0)
    if mode == 'planner':
        return xi_plan
    if mode == 'deform':
        u_h = Control.from_array(xi_plan.controls[0] - xi_r.controls[0])
        return deform(xi_r, u_h, decay)
    raise ValueError(f"Unknown human correction mode: {mode}")

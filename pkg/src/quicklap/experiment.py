"""
Experiment Harness

エピソードの実行（MPC走行・介入ウィンドウ・報酬更新）、NMSE評価、
スイープの並列実行と集計を提供します。
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import fusion
from .dynamics import Control, step
from .errors import ConfigError, DimensionError, QuickLapError
from .llm_client import LanguageBackend, create_backend, interpret
from .models import (
    LANGUAGE_ALGORITHMS,
    ConvergencePoint,
    EpisodeConfig,
    EpisodeResult,
    LanguageContext,
    PreferenceEstimate,
    SummaryCell,
    SummaryTable,
    UtteranceCell,
)
from .planner import human_correction, optimize_controls, plan, simulate_human_correction
from .world import World, build_scenario, feature_delta, trajectory_features

logger = logging.getLogger(__name__)


def nmse(theta_hat, theta_star) -> float:
    """単位ベクトルに正規化した重みの平均二乗誤差

    NMSE = (1/d)·‖θ̂/‖θ̂‖ − θ*/‖θ*‖‖²

    Raises:
        ValueError: どちらかがゼロベクトル、または長さが異なる場合
    """
    a = np.asarray(theta_hat, dtype=float).reshape(-1)
    b = np.asarray(theta_star, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"Failed to compute NMSE: lengths {a.shape[0]} and {b.shape[0]} differ")
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("Failed to compute NMSE: zero weight vector")
    diff = a / norm_a - b / norm_b
    return float(diff @ diff / a.shape[0])


def step_seed(seed: int, step_index: int) -> int:
    """エピソードのシードとステップ番号からプランナーのシードを導出"""
    return int(np.random.SeedSequence([int(seed), int(step_index)]).generate_state(1)[0])


def _initial_estimate(cfg: EpisodeConfig, world: World) -> PreferenceEstimate:
    if cfg.initial_theta is not None:
        if len(cfg.initial_theta) != world.d:
            raise DimensionError(f"initial_theta has {len(cfg.initial_theta)} entries but the world has {world.d}")
        return PreferenceEstimate(theta=np.array(cfg.initial_theta, dtype=float))
    return fusion.initial_estimate(world.d, cfg.initial_weight)


def run_episode(cfg: EpisodeConfig, backend: Optional[LanguageBackend] = None) -> EpisodeResult:
    """1エピソードを実行

    ウィンドウ外ではロボットが θ̂ で計画した最初の制御を実行します。
    ウィンドウ開始時に ξ_R（θ̂）と ξ_H（θ*）を同じ状態・シードから計算し、1回だけ更新します。
    ウィンドウ中は人間が θ* で毎ステップ再計画して運転します。

    Args:
        cfg: エピソード設定
        backend: 言語バックエンド（省略時は cfg.backend から生成）

    Returns:
        EpisodeResult: 学習履歴（失敗時は error と途中までの履歴）

    Raises:
        ConfigError: 設定が不正な場合
    """
    problems = cfg.problems()
    if problems:
        raise ConfigError(problems)
    world = build_scenario(cfg.scenario_id, cfg.scenarios_path)
    theta_star = np.array(world.theta_star)
    est = _initial_estimate(cfg, world)
    result = EpisodeResult(
        scenario_id=cfg.scenario_id,
        algorithm=cfg.algorithm,
        utterance=cfg.utterance,
        horizon=cfg.planner.horizon,
        seed=cfg.seed,
        initial_nmse=nmse(est.theta, theta_star),
    )

    windows: Dict[int, int] = {start: end for start, end in cfg.intervention_windows}
    dt = cfg.planner.dt
    limits = cfg.planner.limits
    state = world.initial_state
    human_until = -1
    trajectory = [[state.x, state.y]]
    owns_backend = False
    try:
        if cfg.algorithm in LANGUAGE_ALGORITHMS and backend is None:
            backend = create_backend(cfg.backend, theta_star=theta_star)
            owns_backend = True
        for step_index in range(cfg.episode_length):
            t = step_index * dt
            step_cfg = cfg.planner.with_seed(step_seed(cfg.seed, step_index))
            if step_index in windows:
                est, control = _intervene(cfg, world, est, state, step_cfg, step_index, backend, result)
                human_until = windows[step_index]
                result.intervention_steps.append(step_index)
            elif step_index < human_until:
                control = optimize_controls(world, theta_star, state, step_cfg, t).controls[0]
            else:
                control = optimize_controls(world, est.theta, state, step_cfg, t).controls[0]
            state = step(state, Control.from_array(control), dt, limits)
            trajectory.append([state.x, state.y])
    except QuickLapError as e:
        logger.error(f"Episode {cfg.scenario_id}/{cfg.algorithm} seed={cfg.seed} failed: {e}")
        result.error = str(e)
    finally:
        if owns_backend:
            backend.close()

    result.final_theta = est.theta.tolist()
    result.trajectory = trajectory
    if result.error is None:
        result.final_nmse = result.nmse_trace[-1] if result.nmse_trace else result.initial_nmse
        logger.info(
            f"Episode {cfg.scenario_id}/{cfg.algorithm} seed={cfg.seed} horizon={cfg.planner.horizon} "
            f"finished: nmse={result.final_nmse:.4f}"
        )
    return result


def _intervene(cfg: EpisodeConfig, world: World, est: PreferenceEstimate, state, step_cfg, step_index: int,
               backend: Optional[LanguageBackend], result: EpisodeResult):
    """介入ウィンドウの開始処理（ΔΦ の計算と1回の更新）

    Returns:
        (更新後の推定値, 実行する制御)
    """
    theta_star = np.array(world.theta_star)
    t = step_index * step_cfg.dt
    xi_r = plan(world, est.theta, state, step_cfg, t)
    xi_plan = simulate_human_correction(world, theta_star, state, step_cfg, t)
    xi_h = human_correction(cfg.human_mode, world, theta_star, xi_r, step_cfg, cfg.deform_decay, xi_plan=xi_plan)
    dphi = feature_delta(trajectory_features(world, xi_h), trajectory_features(world, xi_r))

    signal = None
    if cfg.algorithm in LANGUAGE_ALGORITHMS:
        ctx = LanguageContext(
            utterance=cfg.utterance,
            dphi=dphi,
            theta_t=est.theta,
            feature_names=world.active_features,
            feature_descriptions=tuple(world.feature_descriptions()),
            environment_description=world.description,
        )
        signal = interpret(backend, ctx)
    updated = fusion.update(cfg.algorithm, est, dphi, signal, cfg.hyperparameters)

    score = nmse(updated.theta, theta_star)
    result.feature_deltas.append(dphi.tolist())
    result.language_signals.append(None if signal is None else signal.to_dict())
    result.theta_trace.append(updated.theta.tolist())
    result.nmse_trace.append(score)
    logger.info(
        f"Intervention {updated.step_index} at step {step_index}: "
        f"dphi={np.round(dphi, 4).tolist()} nmse={score:.4f}"
    )
    return updated, xi_h.controls[0]


def _run_indexed(item: Tuple[int, EpisodeConfig]) -> Tuple[int, EpisodeResult]:
    index, cfg = item
    try:
        return index, run_episode(cfg)
    except Exception as e:
        logger.exception(f"Unexpected error in episode {cfg.key}")
        return index, EpisodeResult(
            scenario_id=cfg.scenario_id,
            algorithm=cfg.algorithm,
            utterance=cfg.utterance,
            horizon=cfg.planner.horizon,
            seed=cfg.seed,
            error=f"{type(e).__name__}: {e}",
        )


def run_sweep(episodes: Sequence[EpisodeConfig], workers: int = 1) -> Tuple[SummaryTable, List[EpisodeResult]]:
    """スイープを実行して集計

    Args:
        episodes: グリッドを展開したエピソード設定
        workers: 並列実行数

    Returns:
        (SummaryTable, グリッド順の EpisodeResult のリスト)

    Raises:
        ValueError: グリッドが空の場合
    """
    if not episodes:
        raise ValueError("Failed to run sweep: grid is empty")
    logger.info(f"Running {len(episodes)} episodes with {workers} worker(s)")
    items = list(enumerate(episodes))
    if workers <= 1:
        indexed = [_run_indexed(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            indexed = list(pool.map(_run_indexed, items))
    results = [r for _, r in sorted(indexed, key=lambda pair: pair[0])]
    table = summarize(results)
    if table.failures:
        logger.warning(f"{len(table.failures)} of {len(results)} episodes failed")
    return table, results


def mean_sem(values: Sequence[float]) -> Tuple[float, float]:
    """平均と標準誤差（1件なら SEM=0、0件なら NaN）"""
    if len(values) == 0:
        return float('nan'), float('nan')
    arr = np.asarray(values, dtype=float)
    if arr.shape[0] == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.shape[0]))


def _ordered(values) -> list:
    return list(dict.fromkeys(values))


def summarize(results: Sequence[EpisodeResult]) -> SummaryTable:
    """エピソード結果を (シナリオ, アルゴリズム) ごとに集計

    失敗したエピソードは平均から除外し、failures に残します。
    """
    ok = [r for r in results if r.ok]
    failures = [r for r in results if not r.ok]
    scenarios = _ordered(r.scenario_id for r in results)
    algorithms = _ordered(r.algorithm for r in results)
    utterances = _ordered(r.utterance for r in results)

    cells = []
    for scenario in scenarios:
        for algorithm in algorithms:
            values = [r.final_nmse for r in ok if r.scenario_id == scenario and r.algorithm == algorithm]
            mean, sem = mean_sem(values)
            cells.append(SummaryCell(scenario, algorithm, mean, sem, len(values)))

    utterance_cells = []
    for scenario in scenarios:
        for utterance in utterances:
            for algorithm in algorithms:
                values = [
                    r.final_nmse for r in ok
                    if r.scenario_id == scenario and r.algorithm == algorithm and r.utterance == utterance
                ]
                if values:
                    mean, sem = mean_sem(values)
                    utterance_cells.append(UtteranceCell(scenario, utterance, algorithm, mean, sem, len(values)))

    return SummaryTable(
        cells=cells,
        convergence=convergence_series(ok, scenarios, algorithms),
        utterances=utterance_cells,
        failures=failures,
    )


def convergence_series(results: Sequence[EpisodeResult], scenarios: Sequence[str],
                       algorithms: Sequence[str]) -> List[ConvergencePoint]:
    """介入回数ごとのNMSE（各シナリオの平均を取り、シナリオ間で平均と SEM）

    index 0 は学習前の値です。
    """
    points = []
    for algorithm in algorithms:
        runs = [r for r in results if r.algorithm == algorithm]
        if not runs:
            continue
        length = max(len(r.nmse_trace) for r in runs)
        for k in range(length + 1):
            scenario_means = []
            for scenario in scenarios:
                values = [
                    ([r.initial_nmse] + r.nmse_trace)[k] for r in runs
                    if r.scenario_id == scenario and len(r.nmse_trace) >= k
                ]
                if values:
                    scenario_means.append(float(np.mean(values)))
            mean, sem = mean_sem(scenario_means)
            points.append(ConvergencePoint(k, algorithm, mean, sem))
    return points

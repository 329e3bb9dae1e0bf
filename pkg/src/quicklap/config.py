"""
Run Configuration

YAML形式の実行設定ファイルを読み込み、環境変数と --set による上書きを適用して検証します。

セクション: run / experiment / planner / hyperparameters / backend / world / provenance
上書きの順序: ファイル → 環境変数 QUICKLAP__<SECTION>__<KEY> → --set section.key=value
"""

import json
import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from .errors import ConfigError, ScenarioError
from .models import (
    ALGORITHMS,
    DEFAULT_WINDOWS,
    HUMAN_MODES,
    HYPERPARAMETER_KEYS,
    LANGUAGE_ALGORITHMS,
    BackendConfig,
    EpisodeConfig,
    Hyperparameters,
    PlannerConfig,
    window_problems,
)
from .world import SCENARIO_ALIASES, default_data_dir, load_scenarios

logger = logging.getLogger(__name__)

ENV_PREFIX = 'QUICKLAP__'

RUN_KEYS = {'name', 'out_dir', 'seeds', 'workers'}
EXPERIMENT_KEYS = {
    'scenarios', 'algorithms', 'utterances', 'horizons', 'episode_length',
    'intervention_windows', 'initial_weight', 'human_mode', 'deform_decay',
}
PLANNER_KEYS = {f.name for f in fields(PlannerConfig)} - {'horizon', 'seed'}
LIMIT_KEYS = {'steer_max', 'accel_max', 'speed_max', 'friction'}
BACKEND_KEYS = {f.name for f in fields(BackendConfig)}
WORLD_KEYS = {'scenarios_path'}

SECTIONS: Dict[str, Optional[set]] = {
    'run': RUN_KEYS,
    'experiment': EXPERIMENT_KEYS,
    'planner': PLANNER_KEYS,
    'hyperparameters': set(HYPERPARAMETER_KEYS),
    'backend': BACKEND_KEYS,
    'world': WORLD_KEYS,
    'provenance': None,  # マニフェストが書き込む情報（読み込み時は無視）
}


def load_utterances(path: Optional[str] = None) -> List[str]:
    """同梱の発話リスト（曖昧なものから具体的なものの順）"""
    path = path or os.path.join(default_data_dir(), 'utterances.json')
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError([f"Failed to load utterances from {path}: {e}"])
    ordered = sorted(data['utterances'], key=lambda u: u['specificity'])
    return [u['text'] for u in ordered]


@dataclass(frozen=True)
class RunConfig:
    """実行設定（スイープのグリッドと各モジュールの設定）"""
    name: str = 'run'
    out_dir: str = 'results'
    seeds: Tuple[int, ...] = (0,)
    workers: int = 1
    scenarios: Tuple[str, ...] = ('C',)
    algorithms: Tuple[str, ...] = ('phri', 'masked', 'quicklap')
    utterances: Tuple[str, ...] = ()
    horizons: Tuple[int, ...] = (5,)
    episode_length: int = 220
    intervention_windows: Tuple[Tuple[int, int], ...] = DEFAULT_WINDOWS
    initial_weight: float = 1.0
    human_mode: str = 'planner'
    deform_decay: float = 0.5
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)
    backend: BackendConfig = field(default_factory=BackendConfig)
    scenarios_path: Optional[str] = None

    def episodes(self) -> List[EpisodeConfig]:
        """グリッドを展開（シナリオ × アルゴリズム × 発話 × ホライズン × シード の順）"""
        episodes = []
        for scenario_id in self.scenarios:
            for algorithm in self.algorithms:
                for utterance in self.utterances:
                    for horizon in self.horizons:
                        for seed in self.seeds:
                            episodes.append(EpisodeConfig(
                                scenario_id=scenario_id,
                                algorithm=algorithm,
                                utterance=utterance,
                                backend=self.backend,
                                planner=self.planner.with_horizon(horizon),
                                episode_length=self.episode_length,
                                intervention_windows=self.intervention_windows,
                                seed=seed,
                                hyperparameters=self.hyperparameters,
                                initial_weight=self.initial_weight,
                                human_mode=self.human_mode,
                                deform_decay=self.deform_decay,
                                scenarios_path=self.scenarios_path,
                            ))
        return episodes

    def to_dict(self) -> dict:
        """設定ファイルと同じ構造の辞書（マニフェスト用）"""
        planner = self.planner.to_dict()
        planner.pop('horizon')
        planner.pop('seed')
        return {
            'run': {
                'name': self.name,
                'out_dir': self.out_dir,
                'seeds': list(self.seeds),
                'workers': self.workers,
            },
            'experiment': {
                'scenarios': list(self.scenarios),
                'algorithms': list(self.algorithms),
                'utterances': list(self.utterances),
                'horizons': list(self.horizons),
                'episode_length': self.episode_length,
                'intervention_windows': [list(w) for w in self.intervention_windows],
                'initial_weight': self.initial_weight,
                'human_mode': self.human_mode,
                'deform_decay': self.deform_decay,
            },
            'planner': planner,
            'hyperparameters': self.hyperparameters.to_dict(),
            'backend': self.backend.to_dict(),
            'world': {'scenarios_path': self.scenarios_path},
        }


def parse_value(text: str) -> Any:
    """上書き値をYAMLとして解釈（数値・真偽値・リストを扱える）"""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def set_path(data: dict, dotted: str, value: Any) -> None:
    """'section.key' 形式のパスに値を設定（途中の辞書は作成）"""
    parts = [p for p in dotted.split('.') if p]
    if len(parts) < 2:
        raise ConfigError([f"override path must look like section.key, got '{dotted}'"])
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[parts[-1]] = value


def apply_env_overrides(data: dict, env: Mapping[str, str]) -> List[str]:
    """QUICKLAP__SECTION__KEY=value 形式の環境変数を適用

    Returns:
        List[str]: 適用したパスの一覧
    """
    applied = []
    for name in sorted(env):
        if not name.startswith(ENV_PREFIX):
            continue
        dotted = '.'.join(part.lower() for part in name[len(ENV_PREFIX):].split('__'))
        set_path(data, dotted, parse_value(env[name]))
        applied.append(dotted)
    return applied


def apply_overrides(data: dict, overrides: Sequence[str]) -> None:
    """--set section.key=value 形式の上書きを適用"""
    for item in overrides:
        if '=' not in item:
            raise ConfigError([f"override must look like section.key=value, got '{item}'"])
        dotted, raw = item.split('=', 1)
        set_path(data, dotted.strip(), parse_value(raw))


def read_config_file(path: str) -> dict:
    """設定ファイルを辞書として読み込む

    Raises:
        ConfigError: ファイルが存在しない、またはYAMLとして不正な場合
    """
    if not os.path.isfile(path):
        raise ConfigError([f"config file not found: {path}"])
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError([f"config file {path} is not valid YAML: {e}"])
    if not isinstance(data, dict):
        raise ConfigError([f"config file {path} must contain a mapping of sections"])
    return data


def load_config(path: str, overrides: Sequence[str] = (), values: Optional[Dict[str, Any]] = None,
                env: Optional[Mapping[str, str]] = None) -> RunConfig:
    """設定ファイルを読み込み、上書きを適用して検証

    Args:
        path: YAMLファイルのパス
        overrides: --set の値（'section.key=value'）
        values: パス → 値 の上書き（CLIの --out / --seed / --backend 用、最後に適用）
        env: 環境変数（省略時は os.environ）

    Returns:
        RunConfig: 検証済みの設定

    Raises:
        ConfigError: 問題が1つでもあれば、すべてまとめて送出
    """
    data = read_config_file(path)
    applied = apply_env_overrides(data, os.environ if env is None else env)
    if applied:
        logger.info(f"Applied environment overrides: {', '.join(applied)}")
    apply_overrides(data, overrides)
    for dotted, value in (values or {}).items():
        set_path(data, dotted, value)
    return build_config(data)


def build_config(data: dict) -> RunConfig:
    """辞書から RunConfig を生成して検証

    Raises:
        ConfigError: 未知のセクション・キーや不正な値がある場合
    """
    problems: List[str] = []
    for section, content in data.items():
        if section not in SECTIONS:
            problems.append(f"unknown section '{section}'")
            continue
        allowed = SECTIONS[section]
        if allowed is None:
            continue
        if not isinstance(content, dict):
            problems.append(f"section '{section}' must be a mapping")
            continue
        for key in content:
            if key not in allowed:
                problems.append(f"unknown key '{section}.{key}'")
        limits = content.get('limits') if section == 'planner' else None
        if isinstance(limits, dict):
            problems.extend(f"unknown key 'planner.limits.{k}'" for k in limits if k not in LIMIT_KEYS)
    if problems:
        raise ConfigError(problems)

    def section(name: str) -> dict:
        return dict(data.get(name) or {})

    run, experiment, world = section('run'), section('experiment'), section('world')

    planner = _build(problems, 'planner', PlannerConfig.from_dict, section('planner'), PlannerConfig())
    hyperparameters = _build(problems, 'hyperparameters', Hyperparameters.from_dict,
                             section('hyperparameters'), Hyperparameters())
    backend = _build(problems, 'backend', BackendConfig.from_dict, section('backend'), BackendConfig())

    utterances = experiment.get('utterances', [])
    if utterances == 'all':
        utterances = load_utterances()

    try:
        config = RunConfig(
            name=str(run.get('name', 'run')),
            out_dir=str(run.get('out_dir', 'results')),
            seeds=tuple(int(s) for s in _as_list(run.get('seeds', [0]))),
            workers=int(run.get('workers', 1)),
            scenarios=tuple(str(s) for s in _as_list(experiment.get('scenarios', ['C']))),
            algorithms=tuple(str(a) for a in _as_list(experiment.get('algorithms', ['phri', 'masked', 'quicklap']))),
            utterances=tuple(str(u) for u in _as_list(utterances)),
            horizons=tuple(int(h) for h in _as_list(experiment.get('horizons', [5]))),
            episode_length=int(experiment.get('episode_length', 220)),
            intervention_windows=tuple(
                (int(w[0]), int(w[1])) for w in experiment.get('intervention_windows', DEFAULT_WINDOWS)
            ),
            initial_weight=float(experiment.get('initial_weight', 1.0)),
            human_mode=str(experiment.get('human_mode', 'planner')),
            deform_decay=float(experiment.get('deform_decay', 0.5)),
            planner=planner,
            hyperparameters=hyperparameters,
            backend=backend,
            scenarios_path=world.get('scenarios_path'),
        )
    except (TypeError, ValueError, IndexError) as e:
        raise ConfigError(problems + [f"invalid value in run/experiment sections: {e}"])

    problems.extend(validate(config))
    if problems:
        raise ConfigError(problems)
    return config


def _build(problems: List[str], name: str, factory, values: dict, default):
    try:
        return factory(values)
    except (TypeError, ValueError, KeyError) as e:
        problems.append(f"invalid {name} section: {e}")
        return default


def _as_list(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def validate(config: RunConfig) -> List[str]:
    """RunConfig の意味的な検証

    Returns:
        List[str]: 問題の一覧（空なら有効）
    """
    problems = []
    if not config.seeds:
        problems.append("run.seeds must not be empty")
    if config.workers < 1:
        problems.append(f"run.workers must be >= 1, got {config.workers}")
    if not config.scenarios:
        problems.append("experiment.scenarios must not be empty")
    try:
        known = set(load_scenarios(config.scenarios_path)['scenarios']) | set(SCENARIO_ALIASES)
        for scenario_id in config.scenarios:
            if scenario_id not in known:
                problems.append(f"unknown scenario '{scenario_id}' (known: {', '.join(sorted(known))})")
    except ScenarioError as e:
        problems.append(str(e))
    if not config.algorithms:
        problems.append("experiment.algorithms must not be empty")
    for algorithm in config.algorithms:
        if algorithm not in ALGORITHMS:
            problems.append(f"unknown algorithm '{algorithm}' (known: {', '.join(ALGORITHMS)})")
    if not config.utterances:
        problems.append("experiment.utterances must not be empty (use 'all' for the bundled list)")
    if any(a in LANGUAGE_ALGORITHMS for a in config.algorithms):
        for utterance in config.utterances:
            if not utterance.strip():
                problems.append("experiment.utterances must not contain empty text")
    if not config.horizons or min(config.horizons) < 1:
        problems.append(f"experiment.horizons must be positive integers, got {list(config.horizons)}")
    if config.episode_length < 1:
        problems.append(f"experiment.episode_length must be >= 1, got {config.episode_length}")
    problems.extend(window_problems(config.intervention_windows, config.episode_length))
    if config.human_mode not in HUMAN_MODES:
        problems.append(f"experiment.human_mode must be one of {list(HUMAN_MODES)}, got '{config.human_mode}'")
    if not 0 < config.deform_decay < 1:
        problems.append(f"experiment.deform_decay must lie in (0, 1), got {config.deform_decay}")
    problems.extend(config.planner.problems())
    problems.extend(config.hyperparameters.problems())
    problems.extend(config.backend.problems())
    return problems


def dump_config(config: RunConfig, provenance: Optional[dict] = None) -> str:
    """RunConfig をYAML文字列に変換（load_config で再読み込みできる形式）"""
    data = config.to_dict()
    if provenance:
        data['provenance'] = provenance
    return yaml.safe_dump(data, sort_keys=False, allow_unicode=True)

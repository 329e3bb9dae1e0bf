"""
Data Models

報酬学習・言語パイプライン・実験ハーネスで受け渡すデータモデルを定義します。
設定ファイルやエクスポートとの変換のため、各クラスは from_dict / to_dict を持ちます。
"""

from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import DEFAULT_DT, VehicleLimits
from .errors import DimensionError

ALGORITHMS: Tuple[str, ...] = ('phri', 'masked', 'quicklap', 'language_only')
LANGUAGE_ALGORITHMS: Tuple[str, ...] = ('masked', 'quicklap', 'language_only')
BACKEND_KINDS: Tuple[str, ...] = ('remote', 'mock', 'replay', 'oracle')
HUMAN_MODES: Tuple[str, ...] = ('planner', 'deform')
DEFAULT_WINDOWS: Tuple[Tuple[int, int], ...] = ((45, 55), (85, 95), (130, 140), (170, 180))

# 設定ファイルのキー名 → 属性名
HYPERPARAMETER_KEYS = {
    'base_learning_rate': 'alpha',
    'language_confidence_scale': 'k',
    'numerical_stability': 'eps',
    'prior_stability': 'eps_prior',
    'variance_stability': 'eps_var',
    'capping_factor': 'cap_factor',
    'effort_coefficient': 'lambda_effort',
    'beta_power': 'beta_power',
}


def _vector(values) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1)


@dataclass(frozen=True)
class Hyperparameters:
    """融合更新のハイパーパラメータ"""
    alpha: float = 1.0
    k: float = 1.2
    eps: float = 1e-4
    eps_prior: float = 1e-6
    eps_var: float = 1e-3
    cap_factor: float = 5.0
    lambda_effort: float = 1.0
    beta_power: float = 2.0  # 保持のみ（どの式からも参照されない）

    @classmethod
    def from_dict(cls, data: dict) -> 'Hyperparameters':
        """設定ファイルのキー名（base_learning_rate など）から生成"""
        return cls(**{HYPERPARAMETER_KEYS[key]: float(value) for key, value in data.items()})

    def to_dict(self) -> dict:
        """設定ファイルのキー名で辞書に変換"""
        return {key: getattr(self, attr) for key, attr in HYPERPARAMETER_KEYS.items()}

    def problems(self) -> List[str]:
        """検証エラーの一覧（空なら有効）"""
        return [
            f"hyperparameters.{key} must be positive, got {getattr(self, attr)}"
            for key, attr in HYPERPARAMETER_KEYS.items()
            if not getattr(self, attr) > 0
        ]


@dataclass(frozen=True, eq=False)
class PreferenceEstimate:
    """報酬重みの推定値 θ̂ と更新回数"""
    theta: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        theta = _vector(self.theta)
        if not np.all(np.isfinite(theta)):
            raise ValueError(f"theta must be finite, got {theta}")
        object.__setattr__(self, 'theta', theta)

    @property
    def d(self) -> int:
        return int(self.theta.shape[0])

    def advanced(self, theta) -> 'PreferenceEstimate':
        """更新後の推定値（step_index を1つ進める）"""
        return PreferenceEstimate(theta=theta, step_index=self.step_index + 1)

    def to_dict(self) -> dict:
        return {'theta': self.theta.tolist(), 'step_index': self.step_index}

    @classmethod
    def from_dict(cls, data: dict) -> 'PreferenceEstimate':
        return cls(theta=data['theta'], step_index=int(data.get('step_index', 0)))


@dataclass(frozen=True, eq=False)
class LanguageSignal:
    """言語パイプラインの出力（ゲート r̂、シフト μ、確信度 m）"""
    gate: np.ndarray
    mu: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        gate, mu, confidence = _vector(self.gate), _vector(self.mu), _vector(self.confidence)
        if not gate.shape == mu.shape == confidence.shape:
            raise DimensionError(
                f"gate, mu and confidence must share one length: {gate.shape}, {mu.shape}, {confidence.shape}"
            )
        if np.any((gate < 0) | (gate > 1)):
            raise ValueError(f"gate values must lie in [0, 1], got {gate}")
        if np.any((confidence < 0) | (confidence > 1)):
            raise ValueError(f"confidence values must lie in [0, 1], got {confidence}")
        if not np.all(np.isfinite(mu)):
            raise ValueError(f"mu must be finite, got {mu}")
        object.__setattr__(self, 'gate', gate)
        object.__setattr__(self, 'mu', mu)
        object.__setattr__(self, 'confidence', confidence)

    @property
    def d(self) -> int:
        return int(self.gate.shape[0])

    def to_dict(self) -> dict:
        return {
            'gate': self.gate.tolist(),
            'mu': self.mu.tolist(),
            'confidence': self.confidence.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'LanguageSignal':
        return cls(gate=data['gate'], mu=data['mu'], confidence=data['confidence'])


@dataclass(frozen=True, eq=False)
class LanguageContext:
    """言語モデルに渡すコンテキスト c = (ΔΦ, θᵗ, 環境説明) と発話"""
    utterance: str
    dphi: np.ndarray
    theta_t: np.ndarray
    feature_names: Tuple[str, ...]
    feature_descriptions: Tuple[str, ...]
    environment_description: str = ''

    def __post_init__(self):
        dphi, theta_t = _vector(self.dphi), _vector(self.theta_t)
        d = len(self.feature_names)
        if dphi.shape[0] != d or theta_t.shape[0] != d or len(self.feature_descriptions) != d:
            raise DimensionError(
                f"context vectors must have one entry per feature ({d}): "
                f"dphi={dphi.shape[0]}, theta_t={theta_t.shape[0]}, descriptions={len(self.feature_descriptions)}"
            )
        object.__setattr__(self, 'dphi', dphi)
        object.__setattr__(self, 'theta_t', theta_t)
        object.__setattr__(self, 'feature_names', tuple(self.feature_names))
        object.__setattr__(self, 'feature_descriptions', tuple(self.feature_descriptions))

    @property
    def d(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True)
class PromptPair:
    """system / user メッセージの組"""
    system: str
    user: str


@dataclass(frozen=True)
class BackendConfig:
    """言語モデルバックエンドの設定"""
    kind: str = 'mock'
    model_name: str = 'gpt-4o'
    temperature_att: float = 0.1
    temperature_pref: float = 0.3
    base_url: str = 'https://api.openai.com/v1'
    timeout: float = 30.0
    max_retries: int = 3
    retry_wait: float = 1.0
    cache_path: Optional[str] = None
    rules_path: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> 'BackendConfig':
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def problems(self) -> List[str]:
        problems = []
        if self.kind not in BACKEND_KINDS:
            problems.append(f"backend.kind must be one of {list(BACKEND_KINDS)}, got '{self.kind}'")
        if self.kind == 'replay' and not self.cache_path:
            problems.append("backend.cache_path is required for the replay backend")
        if self.max_retries < 0:
            problems.append(f"backend.max_retries must be >= 0, got {self.max_retries}")
        if self.timeout <= 0:
            problems.append(f"backend.timeout must be positive, got {self.timeout}")
        if self.retry_wait < 0:
            problems.append(f"backend.retry_wait must be >= 0, got {self.retry_wait}")
        return problems


@dataclass(frozen=True)
class PlannerConfig:
    """MPCプランナー（クロスエントロピー法）の設定"""
    horizon: int = 5
    population: int = 64
    elites: int = 8
    iterations: int = 10
    seed: int = 0
    dt: float = DEFAULT_DT
    init_std: Tuple[float, float] = (0.5, 1.0)
    refine_step: float = 0.25
    refine_rounds: int = 2
    limits: VehicleLimits = field(default_factory=VehicleLimits)

    @classmethod
    def from_dict(cls, data: dict) -> 'PlannerConfig':
        values = dict(data)
        if 'limits' in values:
            values['limits'] = VehicleLimits.from_dict(values['limits'])
        if 'init_std' in values:
            values['init_std'] = tuple(float(v) for v in values['init_std'])
        return cls(**values)

    def to_dict(self) -> dict:
        return {
            'horizon': self.horizon,
            'population': self.population,
            'elites': self.elites,
            'iterations': self.iterations,
            'seed': self.seed,
            'dt': self.dt,
            'init_std': list(self.init_std),
            'refine_step': self.refine_step,
            'refine_rounds': self.refine_rounds,
            'limits': self.limits.to_dict(),
        }

    def with_seed(self, seed: int) -> 'PlannerConfig':
        return replace(self, seed=int(seed))

    def with_horizon(self, horizon: int) -> 'PlannerConfig':
        return replace(self, horizon=int(horizon))

    def problems(self) -> List[str]:
        problems = []
        if self.horizon < 1:
            problems.append(f"planner.horizon must be >= 1, got {self.horizon}")
        if self.population < 1:
            problems.append(f"planner.population must be >= 1, got {self.population}")
        if not 1 <= self.elites <= self.population:
            problems.append(f"planner.elites must lie in [1, population], got {self.elites}")
        if self.iterations < 0:
            problems.append(f"planner.iterations must be >= 0, got {self.iterations}")
        if self.dt <= 0:
            problems.append(f"planner.dt must be positive, got {self.dt}")
        if len(self.init_std) != 2 or min(self.init_std) <= 0:
            problems.append(f"planner.init_std must be two positive numbers, got {list(self.init_std)}")
        return problems


def window_problems(windows: Sequence[Tuple[int, int]], episode_length: int) -> List[str]:
    """介入ウィンドウの検証（昇順・重複なし・エピソード内）"""
    problems = []
    previous_end = 0
    for start, end in windows:
        if not 0 <= start < end <= episode_length:
            problems.append(f"intervention window ({start}, {end}) must satisfy 0 <= start < end <= {episode_length}")
        elif start < previous_end:
            problems.append(f"intervention window ({start}, {end}) overlaps or precedes the previous window")
        previous_end = max(previous_end, end)
    return problems


@dataclass(frozen=True)
class EpisodeConfig:
    """1エピソード分の設定"""
    scenario_id: str
    algorithm: str
    utterance: str
    backend: BackendConfig = field(default_factory=BackendConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    episode_length: int = 220
    intervention_windows: Tuple[Tuple[int, int], ...] = DEFAULT_WINDOWS
    seed: int = 0
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)
    initial_weight: float = 1.0
    initial_theta: Optional[Tuple[float, ...]] = None
    human_mode: str = 'planner'
    deform_decay: float = 0.5
    scenarios_path: Optional[str] = None

    def problems(self) -> List[str]:
        problems = []
        if self.algorithm not in ALGORITHMS:
            problems.append(f"algorithm must be one of {list(ALGORITHMS)}, got '{self.algorithm}'")
        if self.algorithm in LANGUAGE_ALGORITHMS and not self.utterance.strip():
            problems.append(f"algorithm '{self.algorithm}' needs a non-empty utterance")
        if self.episode_length < 1:
            problems.append(f"episode_length must be >= 1, got {self.episode_length}")
        if self.human_mode not in HUMAN_MODES:
            problems.append(f"human_mode must be one of {list(HUMAN_MODES)}, got '{self.human_mode}'")
        if not 0 < self.deform_decay < 1:
            problems.append(f"deform_decay must lie in (0, 1), got {self.deform_decay}")
        problems.extend(window_problems(self.intervention_windows, self.episode_length))
        problems.extend(self.planner.problems())
        problems.extend(self.hyperparameters.problems())
        problems.extend(self.backend.problems())
        return problems

    @property
    def key(self) -> Tuple[str, str, str, int, int]:
        return (self.scenario_id, self.algorithm, self.utterance, self.planner.horizon, self.seed)


@dataclass
class EpisodeResult:
    """1エピソードの学習履歴"""
    scenario_id: str
    algorithm: str
    utterance: str
    horizon: int
    seed: int
    initial_nmse: float = 0.0
    theta_trace: List[List[float]] = field(default_factory=list)
    nmse_trace: List[float] = field(default_factory=list)
    feature_deltas: List[List[float]] = field(default_factory=list)
    language_signals: List[Optional[dict]] = field(default_factory=list)
    intervention_steps: List[int] = field(default_factory=list)
    final_theta: List[float] = field(default_factory=list)
    trajectory: List[List[float]] = field(default_factory=list)
    final_nmse: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def key(self) -> Tuple[str, str, str, int, int]:
        return (self.scenario_id, self.algorithm, self.utterance, self.horizon, self.seed)

    @classmethod
    def from_dict(cls, data: dict) -> 'EpisodeResult':
        """辞書からインスタンスを生成"""
        return cls(**data)

    def to_dict(self) -> dict:
        """辞書に変換"""
        return asdict(self)


@dataclass(frozen=True)
class SummaryCell:
    """(シナリオ, アルゴリズム) ごとの最終NMSE"""
    scenario: str
    algorithm: str
    mean_nmse: float
    sem: float
    n: int


@dataclass(frozen=True)
class ConvergencePoint:
    """介入回数ごとのNMSE（シナリオ平均をさらに平均）"""
    intervention_index: int
    algorithm: str
    mean_nmse: float
    sem: float


@dataclass(frozen=True)
class UtteranceCell:
    """発話ごとの最終NMSE"""
    scenario: str
    utterance: str
    algorithm: str
    mean_nmse: float
    sem: float
    n: int


@dataclass
class SummaryTable:
    """スイープ全体の集計結果"""
    cells: List[SummaryCell] = field(default_factory=list)
    convergence: List[ConvergencePoint] = field(default_factory=list)
    utterances: List[UtteranceCell] = field(default_factory=list)
    failures: List[EpisodeResult] = field(default_factory=list)

    def cell(self, scenario: str, algorithm: str) -> Optional[SummaryCell]:
        for c in self.cells:
            if c.scenario == scenario and c.algorithm == algorithm:
                return c
        return None

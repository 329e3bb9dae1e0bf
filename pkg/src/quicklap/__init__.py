"""
QuickLAP: online reward learning from physical corrections and language

運転シミュレータ上で、物理的な修正と自然言語のフィードバックを統合して
報酬重みをオンラインで推定するためのライブラリです。
"""

from . import dynamics, fusion, planner, prompts, world
from .config import RunConfig, load_config
from .errors import (
    BackendError,
    ConfigError,
    DimensionError,
    QuickLapError,
    ResponseParseError,
    ResultsError,
    ScenarioError,
)
from .experiment import nmse, run_episode, run_sweep
from .export import export_results, load_episodes, load_summary
from .llm_client import create_backend, interpret
from .models import (
    EpisodeConfig,
    EpisodeResult,
    Hyperparameters,
    LanguageSignal,
    PlannerConfig,
    PreferenceEstimate,
    SummaryTable,
)
from .report import TableBuilder
from .verification import run_checks
from .world import build_scenario

__all__ = [
    'dynamics',
    'fusion',
    'planner',
    'prompts',
    'world',
    'RunConfig',
    'load_config',
    'BackendError',
    'ConfigError',
    'DimensionError',
    'QuickLapError',
    'ResponseParseError',
    'ResultsError',
    'ScenarioError',
    'nmse',
    'run_episode',
    'run_sweep',
    'export_results',
    'load_episodes',
    'load_summary',
    'create_backend',
    'interpret',
    'EpisodeConfig',
    'EpisodeResult',
    'Hyperparameters',
    'LanguageSignal',
    'PlannerConfig',
    'PreferenceEstimate',
    'SummaryTable',
    'TableBuilder',
    'run_checks',
    'build_scenario',
]

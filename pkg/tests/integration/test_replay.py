"""
Replay Tests

記録した言語モデル応答とマニフェストから、同じ集計結果が再現できることを確認します。
"""

import filecmp

import pytest
import yaml

from cli import main

pytestmark = pytest.mark.slow


def test_manifest_replay_reproduces_results(tmp_path):
    cache = tmp_path / 'llm_cache.jsonl'
    config = tmp_path / 'sweep.yaml'
    with open(config, 'w', encoding='utf-8') as f:
        yaml.safe_dump({
            'run': {'name': 'record', 'seeds': [0]},
            'experiment': {
                'scenarios': ['C'],
                'algorithms': ['masked', 'quicklap'],
                'utterances': ['Steer clear of the cone.', 'Be careful.'],
                'horizons': [4],
                'episode_length': 60,
                'intervention_windows': [[45, 55]],
            },
            'planner': {'population': 16, 'elites': 4, 'iterations': 3, 'refine_rounds': 1},
            'backend': {'kind': 'mock', 'retry_wait': 0.0, 'cache_path': str(cache)},
        }, f)

    first = tmp_path / 'first'
    assert main(['run', '--config', str(config), '--out', str(first)]) == 0
    assert cache.read_text(encoding='utf-8').strip()

    second = tmp_path / 'second'
    manifest = str(first / 'manifest.yaml')
    assert main(['run', '--config', manifest, '--backend', 'replay', '--out', str(second)]) == 0

    for name in ('summary.csv', 'convergence.csv', 'utterances.csv', 'episodes.jsonl'):
        assert filecmp.cmp(first / name, second / name, shallow=False), name


def test_replay_without_cache_is_rejected(tmp_path, capsys):
    config = tmp_path / 'replay.yaml'
    with open(config, 'w', encoding='utf-8') as f:
        yaml.safe_dump({'backend': {'kind': 'replay'}}, f)
    assert main(['run', '--config', str(config), '--out', str(tmp_path / 'out')]) == 1
    assert 'backend.cache_path is required' in capsys.readouterr().err

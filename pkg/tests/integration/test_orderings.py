"""
Scenario Ordering Tests

同梱の設定ファイルでスイープを実行し、シナリオごとの順序関係を確認します。
"""

import os

import numpy as np
import pytest

from quicklap.config import load_config
from quicklap.experiment import run_sweep

pytestmark = pytest.mark.slow

CONFIGS_DIR = os.path.join(os.path.dirname(__file__), '..', '..', 'configs')

MOST_AMBIGUOUS = 'Be careful.'
MOST_SPECIFIC = 'Steer clear of the cone.'


def run_bundled(name, tmp_path_factory):
    """configs/ の設定をそのまま実行（キャッシュだけ一時ディレクトリへ）"""
    cache = tmp_path_factory.mktemp(name.replace('.yaml', '')) / 'llm_cache.jsonl'
    config = load_config(os.path.join(CONFIGS_DIR, name), values={'backend.cache_path': str(cache)}, env={})
    return run_sweep(config.episodes(), workers=config.workers)


@pytest.fixture(scope='module')
def sweep(tmp_path_factory):
    return run_bundled('sweep.yaml', tmp_path_factory)


@pytest.fixture(scope='module')
def convergence(tmp_path_factory):
    return run_bundled('convergence_oracle.yaml', tmp_path_factory)


def utterance_nmse(table, scenario, algorithm, utterance):
    for cell in table.utterances:
        if (cell.scenario, cell.algorithm, cell.utterance) == (scenario, algorithm, utterance):
            return cell.mean_nmse
    raise KeyError((scenario, algorithm, utterance))


class TestSweep:
    def test_no_failures(self, sweep):
        table, results = sweep
        assert table.failures == []
        assert len(results) == 4 * 3 * 6

    @pytest.mark.parametrize('scenario', ['C', 'CP', 'CPC3', 'CPC4'])
    def test_quicklap_beats_masked_beats_phri(self, sweep, scenario):
        table, _ = sweep
        quick = table.cell(scenario, 'quicklap').mean_nmse
        masked = table.cell(scenario, 'masked').mean_nmse
        phri = table.cell(scenario, 'phri').mean_nmse
        assert quick < masked < phri

    @pytest.mark.parametrize('scenario', ['C', 'CP', 'CPC3', 'CPC4'])
    def test_every_window_carries_a_correction(self, sweep, scenario):
        _, results = sweep
        for r in results:
            if r.scenario_id != scenario or r.algorithm == 'phri':
                continue
            assert len(r.feature_deltas) == 4
            for dphi in r.feature_deltas:
                assert np.max(np.abs(dphi)) > 1e-3, (r.algorithm, r.utterance, r.feature_deltas)

    def test_quicklap_beats_phri_for_every_utterance(self, sweep):
        table, _ = sweep
        phri = table.cell('C', 'phri').mean_nmse
        utterances = {cell.utterance for cell in table.utterances if cell.scenario == 'C'}
        assert len(utterances) == 6
        for utterance in utterances:
            assert utterance_nmse(table, 'C', 'quicklap', utterance) < phri, utterance

    def test_specific_utterance_not_worse_than_ambiguous(self, sweep):
        table, _ = sweep
        specific = utterance_nmse(table, 'C', 'quicklap', MOST_SPECIFIC)
        ambiguous = utterance_nmse(table, 'C', 'quicklap', MOST_AMBIGUOUS)
        assert specific <= ambiguous


class TestConvergence:
    @pytest.mark.parametrize('scenario', ['C', 'CP'])
    def test_one_quicklap_update_beats_four_phri_updates(self, convergence, scenario):
        _, results = convergence
        quick = [r.nmse_trace[0] for r in results if r.scenario_id == scenario and r.algorithm == 'quicklap']
        phri = [r.nmse_trace[3] for r in results if r.scenario_id == scenario and r.algorithm == 'phri']
        assert len(quick) == len(phri) == 3
        assert np.mean(quick) < np.mean(phri)

"""
Result Export

スイープ結果をCSV / JSON Lines / YAMLマニフェストとして書き出し、読み戻します。

出力ファイル:
    summary.csv      scenario, algorithm, mean_nmse, sem, n
    convergence.csv  intervention_index, algorithm, mean_nmse, sem
    utterances.csv   scenario, utterance, algorithm, mean_nmse, sem, n
    failures.csv     scenario, algorithm, utterance, horizon, seed, error
    episodes.jsonl   EpisodeResult を1行1件
    manifest.yaml    再実行できる RunConfig（provenance 付き）
    scenes.json      各シナリオの配置と走行軌跡（プロット用）

同じ結果からは常にバイト単位で同じファイルが生成されます（タイムスタンプは含めない）。
"""

import csv
import json
import logging
import math
import os
from typing import Dict, List, Optional, Sequence

from .config import RunConfig, dump_config
from .errors import QuickLapError, ResultsError
from .models import EpisodeResult, SummaryCell, SummaryTable, UtteranceCell
from .world import build_scenario

logger = logging.getLogger(__name__)

SUMMARY_FILE = 'summary.csv'
CONVERGENCE_FILE = 'convergence.csv'
UTTERANCES_FILE = 'utterances.csv'
FAILURES_FILE = 'failures.csv'
EPISODES_FILE = 'episodes.jsonl'
MANIFEST_FILE = 'manifest.yaml'
SCENES_FILE = 'scenes.json'

SUMMARY_HEADER = ['scenario', 'algorithm', 'mean_nmse', 'sem', 'n']
CONVERGENCE_HEADER = ['intervention_index', 'algorithm', 'mean_nmse', 'sem']
UTTERANCES_HEADER = ['scenario', 'utterance', 'algorithm', 'mean_nmse', 'sem', 'n']
FAILURES_HEADER = ['scenario', 'algorithm', 'utterance', 'horizon', 'seed', 'error']


def format_float(value: float) -> str:
    """CSV用の数値表記（再出力で同じ文字列になる）"""
    return format(float(value), '.10g')


def _write_csv(path: str, header: List[str], rows: Sequence[Sequence]) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)


def export_results(table: SummaryTable, results: Sequence[EpisodeResult], out_dir: str,
                   config: Optional[RunConfig] = None, provenance: Optional[dict] = None,
                   scenes: bool = True) -> Dict[str, str]:
    """集計結果とエピソード履歴をディレクトリに書き出す

    Args:
        table: run_sweep の集計結果
        results: グリッド順の EpisodeResult
        out_dir: 出力ディレクトリ（なければ作成）
        config: マニフェストに書く実行設定（省略時はマニフェストなし）
        provenance: マニフェストに添える情報（コマンドライン等）
        scenes: scenes.json を書くか

    Returns:
        Dict[str, str]: ファイル種別 → パス

    Raises:
        ResultsError: 書き込みに失敗した場合
    """
    paths = {
        'summary': os.path.join(out_dir, SUMMARY_FILE),
        'convergence': os.path.join(out_dir, CONVERGENCE_FILE),
        'utterances': os.path.join(out_dir, UTTERANCES_FILE),
        'failures': os.path.join(out_dir, FAILURES_FILE),
        'episodes': os.path.join(out_dir, EPISODES_FILE),
    }
    try:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(paths['summary'], SUMMARY_HEADER, [
            [c.scenario, c.algorithm, format_float(c.mean_nmse), format_float(c.sem), c.n]
            for c in table.cells
        ])
        _write_csv(paths['convergence'], CONVERGENCE_HEADER, [
            [p.intervention_index, p.algorithm, format_float(p.mean_nmse), format_float(p.sem)]
            for p in table.convergence
        ])
        _write_csv(paths['utterances'], UTTERANCES_HEADER, [
            [c.scenario, c.utterance, c.algorithm, format_float(c.mean_nmse), format_float(c.sem), c.n]
            for c in table.utterances
        ])
        _write_csv(paths['failures'], FAILURES_HEADER, [
            [r.scenario_id, r.algorithm, r.utterance, r.horizon, r.seed, r.error]
            for r in table.failures
        ])
        with open(paths['episodes'], 'w', encoding='utf-8') as f:
            for result in results:
                f.write(json.dumps(result.to_dict(), ensure_ascii=False, sort_keys=True) + '\n')

        if config is not None:
            paths['manifest'] = os.path.join(out_dir, MANIFEST_FILE)
            with open(paths['manifest'], 'w', encoding='utf-8') as f:
                f.write(dump_config(config, provenance))

        if scenes and results:
            paths['scenes'] = os.path.join(out_dir, SCENES_FILE)
            with open(paths['scenes'], 'w', encoding='utf-8') as f:
                json.dump(_scenes(results, config), f, ensure_ascii=False, sort_keys=True, indent=2)
                f.write('\n')
    except OSError as e:
        raise ResultsError(f"Failed to export results to {out_dir}: {e}")

    logger.info(f"Exported {len(results)} episodes to {out_dir}")
    return paths


def _scenes(results: Sequence[EpisodeResult], config: Optional[RunConfig]) -> dict:
    """シナリオの配置と各エピソードの (x, y) 軌跡"""
    scenarios_path = config.scenarios_path if config is not None else None
    scenes = {}
    for result in results:
        if result.scenario_id not in scenes:
            try:
                world = build_scenario(result.scenario_id, scenarios_path).to_dict()
            except QuickLapError as e:
                logger.warning(f"Skipping scene for {result.scenario_id}: {e}")
                world = None
            scenes[result.scenario_id] = {'world': world, 'episodes': []}
        scenes[result.scenario_id]['episodes'].append({
            'algorithm': result.algorithm,
            'utterance': result.utterance,
            'horizon': result.horizon,
            'seed': result.seed,
            'intervention_steps': result.intervention_steps,
            'trajectory': result.trajectory,
        })
    return scenes


def _read_csv(path: str, header: List[str]) -> List[dict]:
    if not os.path.exists(path):
        raise ResultsError(f"Failed to read results: {path} does not exist")
    try:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != header:
                raise ResultsError(f"Failed to read {path}: expected columns {header}, got {reader.fieldnames}")
            return list(reader)
    except (OSError, csv.Error) as e:
        raise ResultsError(f"Failed to read {path}: {e}")


def _number(row: dict, key: str, path: str, cast=float):
    try:
        return cast(row[key])
    except (TypeError, ValueError) as e:
        raise ResultsError(f"Failed to read {path}: bad {key} value {row.get(key)!r} ({e})")


def load_summary(results_dir: str) -> List[SummaryCell]:
    """summary.csv を読み込む

    Raises:
        ResultsError: ファイルがない、または壊れている場合
    """
    path = os.path.join(results_dir, SUMMARY_FILE)
    return [
        SummaryCell(
            scenario=row['scenario'],
            algorithm=row['algorithm'],
            mean_nmse=_number(row, 'mean_nmse', path),
            sem=_number(row, 'sem', path),
            n=_number(row, 'n', path, int),
        )
        for row in _read_csv(path, SUMMARY_HEADER)
    ]


def load_utterance_table(results_dir: str) -> List[UtteranceCell]:
    """utterances.csv を読み込む"""
    path = os.path.join(results_dir, UTTERANCES_FILE)
    return [
        UtteranceCell(
            scenario=row['scenario'],
            utterance=row['utterance'],
            algorithm=row['algorithm'],
            mean_nmse=_number(row, 'mean_nmse', path),
            sem=_number(row, 'sem', path),
            n=_number(row, 'n', path, int),
        )
        for row in _read_csv(path, UTTERANCES_HEADER)
    ]


def load_episodes(results_dir: str) -> List[EpisodeResult]:
    """episodes.jsonl を読み込む"""
    path = os.path.join(results_dir, EPISODES_FILE)
    if not os.path.exists(path):
        raise ResultsError(f"Failed to read results: {path} does not exist")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.readlines()
    except OSError as e:
        raise ResultsError(f"Failed to read {path}: {e}")
    episodes = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            episodes.append(EpisodeResult.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError, KeyError) as e:
            raise ResultsError(f"Failed to read {path} line {number}: {e}")
    return episodes


def finite(value: float) -> bool:
    return not (math.isnan(value) or math.isinf(value))

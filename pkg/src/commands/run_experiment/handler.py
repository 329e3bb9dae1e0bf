"""
Run Experiment Command

設定ファイルに従ってエピソード（単発またはスイープ）を実行し、結果を書き出すコマンド。

終了コード:
    0: 成功
    1: 設定・入力エラー
    2: 一部のエピソードが失敗（結果は書き出し済み）
"""

import logging
import sys

from quicklap.config import load_config
from quicklap.errors import ConfigError, QuickLapError
from quicklap.experiment import run_sweep
from quicklap.export import export_results
from quicklap.report import TableBuilder

logger = logging.getLogger(__name__)


def cli_values(args) -> dict:
    """--out / --seed / --backend を設定パスに変換"""
    values = {}
    if getattr(args, 'out', None):
        values['run.out_dir'] = args.out
    if getattr(args, 'seed', None) is not None:
        values['run.seeds'] = [args.seed]
    if getattr(args, 'backend', None):
        values['backend.kind'] = args.backend
    return values


def handle(args) -> int:
    """run コマンドのエントリーポイント

    Args:
        args: argparse の Namespace（config, set, out, seed, backend）

    Returns:
        int: 終了コード
    """
    overrides = list(getattr(args, 'set', None) or [])
    try:
        config = load_config(args.config, overrides=overrides, values=cli_values(args))
    except ConfigError as e:
        logger.error(f"Invalid configuration in {args.config}")
        print(str(e), file=sys.stderr)
        return 1

    try:
        episodes = config.episodes()
        logger.info(f"Starting run '{config.name}': {len(episodes)} episodes -> {config.out_dir}")
        table, results = run_sweep(episodes, workers=config.workers)
        provenance = {
            'command': 'run',
            'config': args.config,
            'overrides': overrides,
        }
        export_results(table, results, config.out_dir, config=config, provenance=provenance)
    except QuickLapError as e:
        logger.error(f"Error in run: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception(f"Unexpected error in run: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return 1

    print(TableBuilder.summary_markdown(table.cells))
    if table.failures:
        print(f"{len(table.failures)} of {len(results)} episodes failed; see failures.csv", file=sys.stderr)
        return 2
    return 0

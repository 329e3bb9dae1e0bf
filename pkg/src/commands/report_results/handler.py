"""
Report Results Command

export_results が書き出したディレクトリから結果表を表示するコマンド。
"""

import logging
import os
import sys

from quicklap.errors import ResultsError
from quicklap.export import UTTERANCES_FILE, load_summary, load_utterance_table
from quicklap.report import TableBuilder

logger = logging.getLogger(__name__)


def handle(args) -> int:
    """report コマンドのエントリーポイント

    Args:
        args: argparse の Namespace（results_dir, format）

    Returns:
        int: 0（成功）または 1（ファイルがない・壊れている）
    """
    results_dir = args.results_dir
    try:
        summary = load_summary(results_dir)
        if not summary:
            raise ResultsError(f"Failed to read results: {results_dir} has no summary rows")
        utterances = []
        if os.path.exists(os.path.join(results_dir, UTTERANCES_FILE)):
            utterances = load_utterance_table(results_dir)
        text = TableBuilder.render(summary, utterances, getattr(args, 'format', 'markdown'))
    except (ResultsError, ValueError) as e:
        logger.error(f"Error in report: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return 1

    sys.stdout.write(text)
    return 0

"""
QuickLAP Command Line

サブコマンド:
    run     設定ファイルに従って実験を実行
    verify  融合更新の数値検証
    report  結果ディレクトリから表を表示
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from commands.report_results import handler as report_results
from commands.run_experiment import handler as run_experiment
from commands.verify_fusion import handler as verify_fusion
from quicklap.models import BACKEND_KINDS
from quicklap.report import FORMATS

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def build_parser() -> argparse.ArgumentParser:
    """引数パーサーを作成"""
    parser = argparse.ArgumentParser(prog='quicklap', description='Online reward learning from corrections and language')
    parser.add_argument('--log-level', default=os.environ.get('QUICKLAP_LOG_LEVEL', 'INFO'),
                        help='logging level (default: $QUICKLAP_LOG_LEVEL or INFO)')
    subparsers = parser.add_subparsers(dest='command', required=True)

    run = subparsers.add_parser('run', help='run an episode or a sweep from a config file')
    run.add_argument('--config', required=True, help='YAML run configuration')
    run.add_argument('--set', action='append', default=[], metavar='SECTION.KEY=VALUE',
                     help='override a config value (repeatable)')
    run.add_argument('--out', help='output directory (run.out_dir)')
    run.add_argument('--seed', type=int, help='run a single seed (run.seeds)')
    run.add_argument('--backend', choices=BACKEND_KINDS, help='language backend kind (backend.kind)')
    run.set_defaults(handler=run_experiment.handle)

    verify = subparsers.add_parser('verify', help='check the fusion update against its log posterior')
    verify.add_argument('--seed', type=int, default=0, help='random seed (default: 0)')
    verify.add_argument('--samples', type=int, default=verify_fusion.DEFAULT_SAMPLES,
                        help='random inputs per check group')
    verify.set_defaults(handler=verify_fusion.handle)

    report = subparsers.add_parser('report', help='print result tables from an output directory')
    report.add_argument('results_dir', help='directory written by run')
    report.add_argument('--format', choices=FORMATS, default='markdown')
    report.set_defaults(handler=report_results.handle)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """エントリーポイント

    Returns:
        int: 終了コード
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT)
    return args.handler(args)


if __name__ == '__main__':
    sys.exit(main())

"""
Verify Fusion Command

融合更新の閉形式を数値的に検証するコマンド。
失敗があれば終了コード 3 を返します。
"""

import logging
from typing import Optional

from quicklap.fusion import GainFn
from quicklap.verification import DEFAULT_SAMPLES, run_checks

logger = logging.getLogger(__name__)


def handle(args, gain_fn: Optional[GainFn] = None) -> int:
    """verify コマンドのエントリーポイント

    Args:
        args: argparse の Namespace（seed, samples）
        gain_fn: ゲインの計算式の差し替え（検証自体のテスト用）

    Returns:
        int: 0（すべて成功）または 3（失敗あり）
    """
    seed = getattr(args, 'seed', None)
    seed = 0 if seed is None else seed
    samples = getattr(args, 'samples', None) or DEFAULT_SAMPLES
    report = run_checks(seed=seed, samples=samples, gain_fn=gain_fn)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 3

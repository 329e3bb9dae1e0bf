"""
Time Utility Functions

キャッシュレコードのタイムスタンプ生成と解析を提供します。
タイムスタンプはすべてUTCのISO 8601形式で保存します。
"""

from datetime import datetime
from typing import Optional

import pytz
from dateutil import parser as date_parser


def utc_now() -> datetime:
    """現在時刻（UTC、タイムゾーン付き）"""
    return datetime.now(pytz.utc)


def utc_now_iso() -> str:
    """現在時刻のISO 8601文字列（例: 2025-01-01T00:00:00.000000+00:00）"""
    return utc_now().isoformat(timespec='microseconds')


def parse_timestamp(value: Optional[str]) -> Optional[datetime]:
    """ISO 8601文字列をUTCのdatetimeに変換

    タイムゾーンのない文字列はUTCとして扱います。

    Args:
        value: タイムスタンプ文字列

    Returns:
        Optional[datetime]: 変換結果（空・不正な文字列の場合はNone）
    """
    if not value:
        return None
    try:
        dt = date_parser.isoparse(value)
    except (ValueError, OverflowError):
        return None
    if dt.tzinfo is None:
        return pytz.utc.localize(dt)
    return dt.astimezone(pytz.utc)

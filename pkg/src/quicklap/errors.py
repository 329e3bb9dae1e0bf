"""
Error Types

QuickLAP全体で使用する例外クラスを定義します。
ライブラリ側は例外を送出し、コマンドハンドラー側で捕捉して終了コードに変換します。
"""

from typing import List, Optional


class QuickLapError(Exception):
    """QuickLAPの基底例外"""


class ConfigError(QuickLapError):
    """設定ファイルの検証エラー

    検証で見つかった問題をすべて保持し、まとめて報告します。
    """

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"Failed to validate config:\n{lines}")


class DimensionError(QuickLapError, ValueError):
    """ベクトルの次元不一致"""


class ScenarioError(QuickLapError):
    """シナリオ定義の不正・未知のシナリオID"""


class ResponseParseError(QuickLapError):
    """LLMレスポンスのパース・検証エラー"""

    def __init__(self, stage: str, reason: str, raw: Optional[str] = None):
        self.stage = stage
        self.reason = reason
        self.raw = raw
        super().__init__(f"Failed to parse {stage} response: {reason}")


class BackendError(QuickLapError):
    """言語モデルバックエンドの呼び出し失敗"""


class ResultsError(QuickLapError):
    """結果ファイルの読み込み・書き込みエラー"""

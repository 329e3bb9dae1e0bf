"""
Response Cache Module

言語モデルへのリクエストとレスポンスをJSON Linesファイルに追記保存し、
リプレイ時にプロンプトのハッシュで引き当てます。

1行1レコード:
    {"prompt_sha256": ..., "model": ..., "temperature": ..., "response_text": ..., "timestamp": ...}
"""

import hashlib
import json
import logging
import os
import threading
from typing import Dict, Optional

from .models import PromptPair
from .time_utils import parse_timestamp, utc_now_iso

logger = logging.getLogger(__name__)

# 同じファイルへの追記はプロセス内で1つのロックを共有する
_LOCKS: Dict[str, threading.Lock] = {}
_LOCKS_GUARD = threading.Lock()


def _lock_for(path: str) -> threading.Lock:
    key = os.path.abspath(path)
    with _LOCKS_GUARD:
        if key not in _LOCKS:
            _LOCKS[key] = threading.Lock()
        return _LOCKS[key]


def prompt_sha256(prompt: PromptPair) -> str:
    """プロンプト（system + user）のSHA-256"""
    payload = json.dumps({'system': prompt.system, 'user': prompt.user}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


class ResponseCache:
    """追記専用のレスポンスキャッシュ"""

    def __init__(self, path: str):
        """初期化

        Args:
            path: JSON Linesファイルのパス（存在しなければ最初の追記で作成）
        """
        self.path = path
        self._lock = _lock_for(path)

    def append(self, key: str, model: str, temperature: float, response_text: str) -> dict:
        """レコードを1行追記

        Args:
            key: プロンプトのハッシュ
            model: モデル名
            temperature: サンプリング温度
            response_text: レスポンス本文

        Returns:
            dict: 書き込んだレコード
        """
        record = {
            'prompt_sha256': key,
            'model': model,
            'temperature': temperature,
            'response_text': response_text,
            'timestamp': utc_now_iso(),
        }
        line = json.dumps(record, ensure_ascii=False)
        with self._lock:
            directory = os.path.dirname(os.path.abspath(self.path))
            os.makedirs(directory, exist_ok=True)
            with open(self.path, 'a', encoding='utf-8') as f:
                f.write(line + '\n')
        return record

    def load(self) -> Dict[str, dict]:
        """ハッシュごとに最新のレコードを返す

        壊れた行は警告を出して読み飛ばします。
        """
        if not os.path.exists(self.path):
            return {}
        latest: Dict[str, dict] = {}
        with self._lock, open(self.path, 'r', encoding='utf-8') as f:
            lines = f.readlines()
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = record['prompt_sha256']
                if not isinstance(record['response_text'], str):
                    raise TypeError("response_text is not a string")
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                logger.warning(f"Skipping corrupt cache line {number} in {self.path}: {e}")
                continue
            current = latest.get(key)
            if current is None or not _is_older(record, current):
                latest[key] = record
        return latest

    def lookup(self, key: str) -> Optional[str]:
        """ハッシュに対応するレスポンス本文（なければNone）"""
        record = self.load().get(key)
        return None if record is None else record['response_text']

    def __len__(self) -> int:
        return len(self.load())


def _is_older(record: dict, current: dict) -> bool:
    """record が current より古いタイムスタンプを持つか（同時刻・不明なら後の行を優先）"""
    new_ts = parse_timestamp(record.get('timestamp'))
    old_ts = parse_timestamp(current.get('timestamp'))
    if new_ts is None or old_ts is None:
        return False
    return new_ts < old_ts

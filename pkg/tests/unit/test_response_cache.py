"""
Response Cache and Replay Tests
"""

import json

import numpy as np
import pytest

from quicklap.errors import BackendError
from quicklap.llm_client import create_backend, interpret
from quicklap.models import BackendConfig, LanguageContext, PromptPair
from quicklap.response_cache import ResponseCache, prompt_sha256
from quicklap.time_utils import parse_timestamp, utc_now_iso


def test_prompt_hash_depends_on_both_messages():
    base = prompt_sha256(PromptPair('system', 'user'))
    assert base == prompt_sha256(PromptPair('system', 'user'))
    assert base != prompt_sha256(PromptPair('system', 'user!'))
    assert base != prompt_sha256(PromptPair('system!', 'user'))
    assert len(base) == 64


class TestResponseCache:
    def test_append_and_lookup(self, tmp_path):
        cache = ResponseCache(str(tmp_path / 'nested' / 'cache.jsonl'))
        record = cache.append('abc', 'mock', 0.1, '{"gate": [1]}')
        assert parse_timestamp(record['timestamp']) is not None
        assert cache.lookup('abc') == '{"gate": [1]}'
        assert cache.lookup('missing') is None
        assert len(cache) == 1

    def test_later_record_wins(self, tmp_path):
        cache = ResponseCache(str(tmp_path / 'cache.jsonl'))
        cache.append('abc', 'mock', 0.1, 'first')
        cache.append('abc', 'mock', 0.1, 'second')
        assert cache.lookup('abc') == 'second'

    def test_newest_timestamp_wins(self, tmp_path):
        path = tmp_path / 'cache.jsonl'
        lines = [
            {'prompt_sha256': 'k', 'model': 'm', 'temperature': 0.1, 'response_text': 'new',
             'timestamp': '2025-01-02T00:00:00+00:00'},
            {'prompt_sha256': 'k', 'model': 'm', 'temperature': 0.1, 'response_text': 'old',
             'timestamp': '2025-01-01T00:00:00+00:00'},
        ]
        path.write_text(''.join(json.dumps(line) + '\n' for line in lines))
        assert ResponseCache(str(path)).lookup('k') == 'new'

    def test_skips_corrupt_lines(self, tmp_path):
        path = tmp_path / 'cache.jsonl'
        path.write_text('not json\n{"prompt_sha256": "k", "response_text": "ok"}\n{"model": "x"}\n')
        assert ResponseCache(str(path)).load() == {'k': {'prompt_sha256': 'k', 'response_text': 'ok'}}

    def test_missing_file_is_empty(self, tmp_path):
        assert ResponseCache(str(tmp_path / 'none.jsonl')).load() == {}


def test_timestamps_are_utc():
    parsed = parse_timestamp(utc_now_iso())
    assert parsed.utcoffset().total_seconds() == 0
    assert parse_timestamp('2025-03-01T12:00:00').tzinfo is not None
    assert parse_timestamp('yesterday-ish') is None
    assert parse_timestamp(None) is None


@pytest.fixture
def context():
    names = ('speed_desirability', 'lane_alignment', 'off_road', 'cone_distance')
    return LanguageContext(
        utterance='Steer clear of the cone.',
        dphi=np.array([0.01, -0.02, 0.0, 0.15]),
        theta_t=np.ones(4),
        feature_names=names,
        feature_descriptions=tuple(f"about {n}" for n in names),
    )


class TestReplay:
    def test_replay_reproduces_recorded_signal(self, tmp_path, context):
        cache_path = str(tmp_path / 'llm_cache.jsonl')
        recorder = create_backend(BackendConfig(kind='mock', cache_path=cache_path))
        recorded = interpret(recorder, context)
        assert len(ResponseCache(cache_path)) == 2

        replay = create_backend(BackendConfig(kind='replay', cache_path=cache_path, retry_wait=0.0))
        replayed = interpret(replay, context)
        assert replayed.to_dict() == recorded.to_dict()
        # 再生では記録しない
        with open(cache_path, 'r', encoding='utf-8') as f:
            assert len(f.readlines()) == 2

    def test_cache_miss(self, tmp_path, context):
        cache_path = tmp_path / 'llm_cache.jsonl'
        cache_path.write_text('')
        replay = create_backend(BackendConfig(kind='replay', cache_path=str(cache_path), retry_wait=0.0))
        with pytest.raises(BackendError, match="cache miss"):
            interpret(replay, context)

    def test_missing_cache_file(self, tmp_path):
        with pytest.raises(BackendError, match="does not exist"):
            create_backend(BackendConfig(kind='replay', cache_path=str(tmp_path / 'absent.jsonl')))

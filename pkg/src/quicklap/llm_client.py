"""
Language Model Client Module

2段階の言語パイプライン（LM_att → LM_pref）を実行するバックエンドを提供します。

- remote: OpenAI互換の /chat/completions エンドポイント（httpx）
- mock:   キーワードルール表による決定的な応答（オフライン実験用）
- oracle: 真の重み θ* を知っている校正済みモデル（上限実験用）
- replay: 記録済みキャッシュからの再生（ネットワーク呼び出しなし）

すべてのバックエンドは cache_path が設定されていればリクエストとレスポンスを記録します。
"""

import json
import logging
import os
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import httpx
import numpy as np
from tenacity import (
    Retrying,
    before_sleep_log,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
    wait_none,
)

from .errors import BackendError, ResponseParseError
from .models import BackendConfig, LanguageContext, LanguageSignal, PromptPair
from .prompts import (
    MU_LIMIT,
    build_att_prompt,
    build_pref_prompt,
    displayed,
    parse_att_response,
    parse_pref_response,
)
from .response_cache import ResponseCache, prompt_sha256
from .world import OBSTACLE_FEATURES, default_data_dir

logger = logging.getLogger(__name__)

T = TypeVar('T')

RETRYABLE_ERRORS = (httpx.HTTPError, ResponseParseError)


@dataclass(frozen=True, eq=False)
class CompletionRequest:
    """1回分の言語モデル呼び出し"""
    stage: str  # 'att' or 'pref'
    prompt: PromptPair
    temperature: float
    context: LanguageContext
    gate: Optional[np.ndarray] = None


class LanguageBackend:
    """バックエンドの基底クラス（リトライとキャッシュ記録を担当）"""

    kind = 'base'
    records = True

    def __init__(self, config: BackendConfig):
        self.config = config
        self.cache = ResponseCache(config.cache_path) if config.cache_path else None
        self.calls = 0

    @property
    def model_label(self) -> str:
        return self.kind

    def _respond(self, request: CompletionRequest) -> str:
        """レスポンス本文を返す（サブクラスで実装）"""
        raise NotImplementedError

    def _retrying(self) -> Retrying:
        wait = wait_exponential(multiplier=self.config.retry_wait, max=30) if self.config.retry_wait > 0 else wait_none()
        return Retrying(
            stop=stop_after_attempt(1 + self.config.max_retries),
            wait=wait,
            retry=retry_if_exception_type(RETRYABLE_ERRORS),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        )

    def complete(self, request: CompletionRequest, parser: Callable[[str], T]) -> T:
        """同一プロンプトを再送しながら、検証済みの応答を得る

        Args:
            request: リクエスト
            parser: レスポンス本文の検証関数

        Returns:
            parser の戻り値

        Raises:
            BackendError: リトライ上限に達した場合、またはリプレイでキャッシュにない場合
        """
        key = prompt_sha256(request.prompt)
        try:
            for attempt in self._retrying():
                with attempt:
                    self.calls += 1
                    logger.debug(f"{self.kind} {request.stage} attempt {attempt.retry_state.attempt_number}")
                    text = self._respond(request)
                    if self.cache is not None and self.records:
                        self.cache.append(key, self.model_label, request.temperature, text)
                    return parser(text)
        except RETRYABLE_ERRORS as e:
            attempts = 1 + self.config.max_retries
            raise BackendError(f"Failed to get a valid {request.stage} response after {attempts} attempts: {e}") from e

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class RemoteBackend(LanguageBackend):
    """OpenAI互換APIのクライアント"""

    kind = 'remote'

    def __init__(self, config: BackendConfig, transport: Optional[httpx.BaseTransport] = None):
        super().__init__(config)
        api_key = os.environ.get('QUICKLAP_API_KEY', '')
        if not api_key:
            logger.warning("QUICKLAP_API_KEY is not set; sending requests without a bearer token")
        headers = {'Authorization': f"Bearer {api_key}"} if api_key else {}
        self.client = httpx.Client(
            base_url=config.base_url,
            timeout=config.timeout,
            headers=headers,
            transport=transport,
        )

    @property
    def model_label(self) -> str:
        return self.config.model_name

    def _respond(self, request: CompletionRequest) -> str:
        payload = {
            'model': self.config.model_name,
            'temperature': request.temperature,
            'response_format': {'type': 'json_object'},
            'messages': [
                {'role': 'system', 'content': request.prompt.system},
                {'role': 'user', 'content': request.prompt.user},
            ],
        }
        response = self.client.post('/chat/completions', json=payload)
        response.raise_for_status()
        try:
            data = response.json()
            content = data['choices'][0]['message']['content']
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise ResponseParseError(request.stage, f"unexpected completion payload ({e})", response.text)
        if not isinstance(content, str):
            raise ResponseParseError(request.stage, "completion content is not text", response.text)
        return content

    def close(self) -> None:
        self.client.close()


@lru_cache(maxsize=8)
def load_mock_rules(path: Optional[str] = None) -> dict:
    """モックのルール表をロード

    Raises:
        BackendError: ファイルが読めない場合
    """
    path = path or os.path.join(default_data_dir(), 'mock_rules.json')
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise BackendError(f"Failed to load mock rules from {path}: {e}")


def _keyword_pattern(keyword: str) -> re.Pattern:
    # "car" が "careful" に一致しないよう単語境界で照合（複数形の s は許容）
    return re.compile(r'\b' + re.escape(keyword) + r's?\b', re.IGNORECASE)


class MockBackend(LanguageBackend):
    """キーワードルールによる決定的なバックエンド

    応答はプロンプトに表示される値（発話と小数第3位で丸めた ΔΦ）だけで決まります。
    """

    kind = 'mock'

    def __init__(self, config: BackendConfig):
        super().__init__(config)
        self.rules = load_mock_rules(config.rules_path)
        self._patterns = [
            (rule, [_keyword_pattern(k) for k in rule['keywords']]) for rule in self.rules['rules']
        ]

    def match(self, utterance: str, feature_names: Sequence[str],
              dphi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """発話に一致する特徴量のゲートと確信度

        Returns:
            (gate, confidence)
        """
        d = len(feature_names)
        gate = np.zeros(d)
        confidence = np.zeros(d)
        obstacles = [i for i, name in enumerate(feature_names) if name in OBSTACLE_FEATURES]
        for rule, patterns in self._patterns:
            if not any(p.search(utterance) for p in patterns):
                continue
            level = self.rules['confidence'][rule['specificity']]
            target = rule['target']
            if target == 'largest_obstacle':
                indices = [max(obstacles, key=lambda i: abs(dphi[i]))] if obstacles else []
            elif target == 'all_obstacles':
                indices = obstacles
            else:
                indices = [i for i, name in enumerate(feature_names) if name == target]
            for i in indices:
                gate[i] = 1.0
                confidence[i] = max(confidence[i], level)
        return gate, confidence

    def _respond(self, request: CompletionRequest) -> str:
        ctx = request.context
        dphi = np.array([displayed(v) for v in ctx.dphi])
        gate, confidence = self.match(ctx.utterance, ctx.feature_names, dphi)
        if request.stage == 'att':
            return json.dumps({'gate': gate.tolist()})
        active = np.asarray(request.gate, dtype=float) > 0
        mu = np.clip(self.rules['shift_scale'] * dphi, -MU_LIMIT, MU_LIMIT)
        return json.dumps({
            'mu': _rounded(np.where(active, mu, 0.0)),
            'confidence': _rounded(np.where(active, confidence, 0.0)),
        })


class OracleBackend(LanguageBackend):
    """真の重みとの差をそのまま伝える校正済みバックエンド

    gate: |θ* − θᵗ| が最大値の半分以上の特徴量
    mu:   θ* − θᵗ（±6 でクリップ）
    confidence: gate された特徴量で 0.95
    """

    kind = 'oracle'
    confidence_level = 0.95

    def __init__(self, config: BackendConfig, theta_star: Sequence[float]):
        super().__init__(config)
        self.theta_star = np.asarray(theta_star, dtype=float)

    def _respond(self, request: CompletionRequest) -> str:
        theta_t = np.array([displayed(v) for v in request.context.theta_t])
        if theta_t.shape != self.theta_star.shape:
            raise BackendError(
                f"oracle knows {self.theta_star.shape[0]} weights but the prompt shows {theta_t.shape[0]}"
            )
        diff = self.theta_star - theta_t
        largest = np.max(np.abs(diff))
        gate = (np.abs(diff) >= 0.5 * largest).astype(float) if largest > 0 else np.zeros_like(diff)
        if request.stage == 'att':
            return json.dumps({'gate': gate.tolist()})
        active = np.asarray(request.gate, dtype=float) > 0
        return json.dumps({
            'mu': _rounded(np.where(active, np.clip(diff, -MU_LIMIT, MU_LIMIT), 0.0)),
            'confidence': _rounded(np.where(active, self.confidence_level, 0.0)),
        })


class ReplayBackend(LanguageBackend):
    """キャッシュファイルからの再生"""

    kind = 'replay'
    records = False

    def __init__(self, config: BackendConfig):
        super().__init__(config)
        if self.cache is None or not os.path.exists(config.cache_path):
            raise BackendError(f"Failed to open replay cache: {config.cache_path} does not exist")
        self.index = self.cache.load()
        logger.info(f"Loaded {len(self.index)} cached responses from {config.cache_path}")

    def _respond(self, request: CompletionRequest) -> str:
        key = prompt_sha256(request.prompt)
        record = self.index.get(key)
        if record is None:
            logger.warning(f"Cache miss for {request.stage} prompt {key[:12]}")
            raise BackendError(f"cache miss for {request.stage} prompt {key}")
        return record['response_text']


def _rounded(values: np.ndarray) -> List[float]:
    return [round(float(v), 6) for v in values]


def create_backend(config: BackendConfig, theta_star: Optional[Sequence[float]] = None,
                   transport: Optional[httpx.BaseTransport] = None) -> LanguageBackend:
    """設定からバックエンドを生成

    Args:
        config: バックエンド設定
        theta_star: 真の重み（oracle のみ必要）
        transport: httpx のトランスポート（remote のテスト用）

    Raises:
        BackendError: 未知の種類、または oracle に θ* がない場合
    """
    if config.kind == 'remote':
        return RemoteBackend(config, transport=transport)
    if config.kind == 'mock':
        return MockBackend(config)
    if config.kind == 'replay':
        return ReplayBackend(config)
    if config.kind == 'oracle':
        if theta_star is None:
            raise BackendError("Failed to create oracle backend: theta_star is required")
        return OracleBackend(config, theta_star)
    raise BackendError(f"Unknown backend kind: {config.kind}")


def interpret(backend: LanguageBackend, ctx: LanguageContext) -> LanguageSignal:
    """発話とコンテキストから言語信号を得る（LM_att → LM_pref の順に2回呼び出す）

    Raises:
        BackendError: 応答が得られない場合
    """
    att_prompt = build_att_prompt(ctx)
    gate = backend.complete(
        CompletionRequest('att', att_prompt, backend.config.temperature_att, ctx),
        lambda raw: parse_att_response(raw, ctx.d),
    )
    pref_prompt = build_pref_prompt(ctx, gate)
    mu, confidence = backend.complete(
        CompletionRequest('pref', pref_prompt, backend.config.temperature_pref, ctx, gate),
        lambda raw: parse_pref_response(raw, ctx.d),
    )
    return LanguageSignal(gate=gate, mu=mu, confidence=confidence)

"""
Prompt Templates

2段階の言語モデル（LM_att: 注意ゲート、LM_pref: シフトと確信度）に送る
プロンプトの生成と、JSONレスポンスの厳密な検証を行います。

system メッセージは一字一句固定です（tests/fixtures のゴールデンファイルと一致すること）。
"""

import json
import math
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DimensionError, ResponseParseError
from .models import LanguageContext, PromptPair

ATT_SYSTEM_MESSAGE = (
    "You are an expert in autonomous vehicle control analyzing driver interventions. "
    "In this task, a human driver has intervened to correct the behavior of a robot car "
    "and has provided an explanation of the intervention. Your task is to determine which "
    "features are relevant to a given intervention explanation, given the change in feature "
    "values of the human trajectory compared to the robot trajectory. Positive values mean "
    "that the human increased the feature value.\n"
    "\n"
    "Note that a feature may be irrelevant even if it has a large change in value. "
    "Only output features that are relevant to the intervention explanation.\n"
    "\n"
    "Output STRICT JSON with the single key 'gate': a list of attention gates scores "
    "(one per feature, 0.0 or 1.0). NO other keys."
)

PREF_SYSTEM_MESSAGE = (
    "You are an expert in autonomous vehicle control analyzing driver interventions. "
    "In this task, a human driver has intervened to correct the behavior of a robot car "
    "and has provided an explanation of the intervention. Your reward function is the sum "
    "of the features. You want to maximize the reward function.\n"
    "\n"
    "Feature values are between 0 and 1. Look at the feature descriptions to understand the "
    "scale of the features. Your task is to determine for EACH feature how much in magnitude "
    "should the weight of the feature be changed to support the intervention and human "
    "preference (mu between 0 and 6), and how confident you are in your decision (confidence "
    "between 0 and 1, be conservative), given the change in feature values of the human "
    "trajectory compared to the robot trajectory. Positive values mean that the human "
    "increased the feature value.\n"
    "\n"
    "FOR EVERY FEATURE, return ONLY the values in this exact format.\n"
    "\n"
    "OUTPUT (strict JSON, single line):\n"
    "{\n"
    "    'mu': [u1, u2, ... , uN],\n"
    "    'confidence': [c1, c2, ... , cN]\n"
    "}"
)

ATT_INSTRUCTIONS = (
    "For absolutely EVERY feature above, determine:\n"
    "1. How relevant is this feature to the intervention? (gate score 0.0 or 1.0)"
)

PREF_INSTRUCTIONS = (
    "Now, for absolutely EVERY feature (considering the explanation, feature changes, and current weights):\n"
    "1. What absolute change with direction (this will be your 'mu') would support this intervention? "
    "Consider the scale of the features, and the current weights.\n"
    "2. How confident are you in your decision? (confidence score 0.0-1.0)"
)

# シフトの絶対値の上限（プロンプトの "mu between 0 and 6"）
MU_LIMIT = 6.0


def displayed(value: float) -> float:
    """プロンプトに表示される値（小数第3位で丸め、−0 は 0 に揃える）"""
    return round(float(value), 3) + 0.0


def direction_word(change: float) -> str:
    if change > 0:
        return 'increased'
    if change < 0:
        return 'decreased'
    return 'did not change'


def _header(ctx: LanguageContext) -> List[str]:
    if not ctx.utterance.strip():
        raise ValueError("Failed to build prompt: utterance is empty")
    lines = ['Human Driver Intervention Explanation:', ctx.utterance, '']
    if ctx.environment_description:
        lines += ['Driving Environment:', ctx.environment_description, '']
    lines.append('Current Feature Values:')
    for name, description, change in zip(ctx.feature_names, ctx.feature_descriptions, ctx.dphi):
        shown = displayed(change)
        lines.append(
            f"- {name} ({description}): feature change after intervention: {shown:+.3f}, "
            f"the human {direction_word(shown)} this feature"
        )
    lines.append('')
    return lines


def build_att_prompt(ctx: LanguageContext) -> PromptPair:
    """LM_att 用のプロンプト

    Raises:
        ValueError: 発話が空の場合
    """
    lines = _header(ctx) + [ATT_INSTRUCTIONS]
    return PromptPair(system=ATT_SYSTEM_MESSAGE, user='\n'.join(lines))


def build_pref_prompt(ctx: LanguageContext, gate: Sequence[float]) -> PromptPair:
    """LM_pref 用のプロンプト（LM_att のゲートと現在の重みを含む）

    Raises:
        ValueError: 発話が空の場合
        DimensionError: ゲートの長さが特徴量数と異なる場合
    """
    gate = np.asarray(gate, dtype=float).reshape(-1)
    if gate.shape[0] != ctx.d:
        raise DimensionError(f"gate has {gate.shape[0]} entries but the context has {ctx.d} features")
    lines = _header(ctx)
    lines.append('Attention Gates:')
    lines += [f"- {name}: {g:.3f}" for name, g in zip(ctx.feature_names, gate)]
    lines.append('')
    lines.append('Current Reward Weights after a Physical Intervention Update:')
    lines += [f"- {name}: {w:.3f}" for name, w in zip(ctx.feature_names, ctx.theta_t)]
    lines.append('')
    lines.append(PREF_INSTRUCTIONS)
    return PromptPair(system=PREF_SYSTEM_MESSAGE, user='\n'.join(lines))


def _load_object(raw: str, stage: str, keys: Tuple[str, ...]) -> dict:
    try:
        data = json.loads(raw)
    except (TypeError, json.JSONDecodeError) as e:
        raise ResponseParseError(stage, f"malformed JSON ({e})", raw)
    if not isinstance(data, dict):
        raise ResponseParseError(stage, "expected a JSON object", raw)
    if set(data) != set(keys):
        raise ResponseParseError(stage, f"expected exactly the keys {list(keys)}, got {sorted(data)}", raw)
    return data


def _number_list(data: dict, key: str, d: int, stage: str, raw: str) -> np.ndarray:
    values = data[key]
    if not isinstance(values, list):
        raise ResponseParseError(stage, f"'{key}' must be a list", raw)
    if len(values) != d:
        raise ResponseParseError(stage, f"'{key}' has {len(values)} entries, expected {d}", raw)
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ResponseParseError(stage, f"'{key}' contains a non-numeric value: {v!r}", raw)
    return np.array(values, dtype=float)


def parse_att_response(raw: str, d: int) -> np.ndarray:
    """LM_att のレスポンス {"gate": [...]} を検証

    Raises:
        ResponseParseError: JSON不正・キー不一致・長さ不一致・範囲外の値
    """
    data = _load_object(raw, 'att', ('gate',))
    gate = _number_list(data, 'gate', d, 'att', raw)
    if np.any((gate < 0) | (gate > 1)):
        raise ResponseParseError('att', f"gate values must lie in [0, 1], got {gate.tolist()}", raw)
    return gate


def parse_pref_response(raw: str, d: int) -> Tuple[np.ndarray, np.ndarray]:
    """LM_pref のレスポンス {"mu": [...], "confidence": [...]} を検証

    Returns:
        (mu, confidence)

    Raises:
        ResponseParseError: JSON不正・キー不一致・長さ不一致・範囲外の値
    """
    data = _load_object(raw, 'pref', ('mu', 'confidence'))
    mu = _number_list(data, 'mu', d, 'pref', raw)
    confidence = _number_list(data, 'confidence', d, 'pref', raw)
    if np.any(np.abs(mu) > MU_LIMIT):
        raise ResponseParseError('pref', f"|mu| must not exceed {MU_LIMIT}, got {mu.tolist()}", raw)
    if np.any((confidence < 0) | (confidence > 1)):
        raise ResponseParseError('pref', f"confidence values must lie in [0, 1], got {confidence.tolist()}", raw)
    return mu, confidence

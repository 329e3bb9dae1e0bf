"""
Reward Fusion Module

物理的修正（ΔΦ）と言語信号（r̂, μ, m）を統合する報酬重みの更新式を提供します。

各特徴量 i について独立に

    Λ_i  = 1 / (α·(r̂_i + ε_prior))                  条件付き事前分布の精度
    σ²_i = k²·(1 − m_i)² / (ε_var + m_i)²            言語尤度の分散
    κ_i  = 1 / (Λ_i·σ²_i + 1)                         ゲイン
    θ'_i = θ_i + κ_i·(σ²_i·ΔΦ_i + μ^capped_i)

比較用のベースライン（pHRI / Masked / Language-only）と、
テスト用の対数事後確率もここにまとめています。
"""

from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DimensionError
from .models import Hyperparameters, LanguageSignal, PreferenceEstimate

GainFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def prior_precision(r, hp: Hyperparameters):
    """事前分布の精度 Λ = 1/(α(r + ε_prior))

    Args:
        r: 注意ゲート（スカラーまたは配列、[0, 1]）
        hp: ハイパーパラメータ

    Returns:
        正の精度（r に対して単調減少）
    """
    return 1.0 / (hp.alpha * (np.asarray(r, dtype=float) + hp.eps_prior))


def language_variance(m, hp: Hyperparameters):
    """言語尤度の分散 σ² = k²(1−m)²/(ε_var+m)²

    m=1 で厳密に 0 になります。
    """
    m = np.asarray(m, dtype=float)
    return hp.k ** 2 * (1.0 - m) ** 2 / (hp.eps_var + m) ** 2


def gain(lambda_prior, sigma_sq, eps: float = 1e-4):
    """ゲイン κ = 1/(Λσ² + 1)（分母は eps で下限を設ける）"""
    denominator = np.asarray(lambda_prior, dtype=float) * np.asarray(sigma_sq, dtype=float) + 1.0
    return 1.0 / np.maximum(denominator, eps)


def cap_mu(mu, dphi, hp: Hyperparameters) -> np.ndarray:
    """言語シフトを物理修正の大きさで制限

    μ_capped = sign(μ)·min(|μ|, cap_factor·|ΔΦ|)

    Raises:
        DimensionError: μ と ΔΦ の長さが異なる場合
    """
    mu = np.asarray(mu, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    if mu.shape != dphi.shape:
        raise DimensionError(f"Failed to cap mu: shapes {mu.shape} and {dphi.shape} differ")
    return np.sign(mu) * np.minimum(np.abs(mu), hp.cap_factor * np.abs(dphi))


def _check_dims(est: PreferenceEstimate, dphi, *vectors) -> np.ndarray:
    dphi = np.asarray(dphi, dtype=float).reshape(-1)
    if dphi.shape[0] != est.d:
        raise DimensionError(f"dphi has {dphi.shape[0]} entries but theta has {est.d}")
    for v in vectors:
        if np.asarray(v).reshape(-1).shape[0] != est.d:
            raise DimensionError(f"language signal has {np.asarray(v).size} entries but theta has {est.d}")
    return dphi


def update_quicklap(est: PreferenceEstimate, dphi, sig: LanguageSignal, hp: Hyperparameters,
                    gain_fn: Optional[GainFn] = None) -> PreferenceEstimate:
    """QuickLAP のMAP更新

    Args:
        est: 現在の推定値 θᵗ
        dphi: 特徴量差 ΔΦ
        sig: 言語信号（ゲート・シフト・確信度）
        hp: ハイパーパラメータ
        gain_fn: ゲインの計算式（省略時は hp.eps を使う gain）

    Returns:
        PreferenceEstimate: 更新後の推定値

    Raises:
        DimensionError: 次元が一致しない場合
    """
    dphi = _check_dims(est, dphi, sig.gate)
    lam = prior_precision(sig.gate, hp)
    sigma_sq = language_variance(sig.confidence, hp)
    mu_capped = cap_mu(sig.mu, dphi, hp)
    if gain_fn is None:
        gain_fn = lambda l, s: gain(l, s, hp.eps)
    kappa = gain_fn(lam, sigma_sq)
    return est.advanced(est.theta + kappa * (sigma_sq * dphi + mu_capped))


def update_phri(est: PreferenceEstimate, dphi, hp: Hyperparameters) -> PreferenceEstimate:
    """物理修正のみの更新 θ' = θ + αΔΦ"""
    dphi = _check_dims(est, dphi)
    return est.advanced(est.theta + hp.alpha * dphi)


def update_masked(est: PreferenceEstimate, dphi, gate, hp: Hyperparameters) -> PreferenceEstimate:
    """注意ゲートで更新する特徴量を絞る更新 θ' = θ + α(r̂ + ε_prior)ΔΦ"""
    dphi = _check_dims(est, dphi, gate)
    gate = np.asarray(gate, dtype=float).reshape(-1)
    if np.any((gate < 0) | (gate > 1)):
        raise ValueError(f"gate values must lie in [0, 1], got {gate}")
    return est.advanced(est.theta + hp.alpha * (gate + hp.eps_prior) * dphi)


def update_language_only(est: PreferenceEstimate, dphi, sig: LanguageSignal,
                         hp: Hyperparameters) -> PreferenceEstimate:
    """物理項を除いた更新 θ' = θ + μ^capped/(Λσ² + 1)"""
    dphi = _check_dims(est, dphi, sig.gate)
    lam = prior_precision(sig.gate, hp)
    sigma_sq = language_variance(sig.confidence, hp)
    return est.advanced(est.theta + gain(lam, sigma_sq, hp.eps) * cap_mu(sig.mu, dphi, hp))


def update(algorithm: str, est: PreferenceEstimate, dphi, sig: Optional[LanguageSignal],
           hp: Hyperparameters) -> PreferenceEstimate:
    """アルゴリズム名で更新式を選択

    Raises:
        ValueError: 未知のアルゴリズム、または言語信号が必要なのに None の場合
    """
    if algorithm == 'phri':
        return update_phri(est, dphi, hp)
    if sig is None:
        raise ValueError(f"algorithm '{algorithm}' needs a language signal")
    if algorithm == 'quicklap':
        return update_quicklap(est, dphi, sig, hp)
    if algorithm == 'masked':
        return update_masked(est, dphi, sig.gate, hp)
    if algorithm == 'language_only':
        return update_language_only(est, dphi, sig, hp)
    raise ValueError(f"Unknown algorithm: {algorithm}")


def initial_estimate(d: int, value: float = 1.0) -> PreferenceEstimate:
    """全特徴量を同じ重みで初期化"""
    return PreferenceEstimate(theta=np.full(d, float(value)))


def log_posterior(theta, theta_t, dphi, gate, mu, m, hp: Hyperparameters) -> float:
    """対数事後確率（θ に依存しない項は除く）

    θᵀΔΦ − ½ΣΛ_i(θ_i − θᵗ_i)² − ½Σ(μ^capped_i − (θ_i − θᵗ_i))²/σ²_i

    μ は内部で cap_mu を適用します。σ²_i = 0 の特徴量は
    θ_i = θᵗ_i + μ^capped_i の等式制約として扱い、満たさない場合は −inf を返します。
    """
    theta = np.asarray(theta, dtype=float)
    theta_t = np.asarray(theta_t, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    shapes = {a.shape for a in (theta, theta_t, dphi, np.asarray(gate), np.asarray(mu), np.asarray(m))}
    if len(shapes) != 1:
        raise DimensionError(f"Failed to evaluate log posterior: mismatched shapes {sorted(shapes)}")

    lam = prior_precision(gate, hp)
    sigma_sq = language_variance(m, hp)
    shift = theta - theta_t
    residual = cap_mu(mu, dphi, hp) - shift

    exact = sigma_sq == 0.0
    if np.any(exact) and not np.allclose(residual[exact], 0.0, rtol=0.0, atol=1e-12):
        return float('-inf')
    soft = ~exact
    likelihood = np.sum(residual[soft] ** 2 / sigma_sq[soft])
    return float(theta @ dphi - 0.5 * np.sum(lam * shift ** 2) - 0.5 * likelihood)


def tradeoff_weights(m, hp: Hyperparameters, r: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """物理修正と言語シフトの重み（確信度 m の関数）

    w_φ = σ²/(Λσ² + 1),  w_μ = 1/(Λσ² + 1)

    Returns:
        (w_phi, w_mu)
    """
    lam = prior_precision(r, hp)
    sigma_sq = language_variance(m, hp)
    w_mu = gain(lam, sigma_sq, hp.eps)
    return sigma_sq * w_mu, w_mu


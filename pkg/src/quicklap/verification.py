"""
Fusion Verification

融合更新の閉形式が対数事後確率の最大点になっているかを、乱数で生成した入力に対して確認します。

チェックグループ:
- gradient:   更新後の点で数値勾配が 0（有限差分）
- grid:       更新後の点の近傍に、より事後確率の高い点がない
- limits:     m=1 / m=0 / r=0 の極限での振る舞い
- reduction:  pHRI への帰着（QuickLAP と Masked）
- tradeoff:   確信度 m に対する w_φ / w_μ の曲線
- nmse:       NMSE のスケール不変性と特殊ケース
- capping:    μ の制限と特徴量ごとの独立性
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import fusion
from .experiment import nmse
from .models import Hyperparameters, LanguageSignal, PreferenceEstimate

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 1000
FD_STEP = 1e-3  # 対数事後確率は二次式なので中心差分は刻み幅によらず厳密
GRID_STEP = 1e-4
MAX_EXAMPLES = 3


@dataclass
class CheckGroup:
    """1グループ分のチェック結果"""
    name: str
    total: int = 0
    failed: int = 0
    examples: List[str] = field(default_factory=list)

    def record(self, ok: bool, detail: str = '') -> None:
        self.total += 1
        if not ok:
            self.failed += 1
            if len(self.examples) < MAX_EXAMPLES:
                self.examples.append(detail)

    @property
    def passed(self) -> int:
        return self.total - self.failed


@dataclass
class VerificationReport:
    """検証全体の結果"""
    seed: int
    samples: int
    groups: List[CheckGroup] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(g.total for g in self.groups)

    @property
    def failed(self) -> int:
        return sum(g.failed for g in self.groups)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def lines(self) -> List[str]:
        """表示用の行（同じシードなら常に同じ内容）"""
        lines = [f"seed={self.seed} samples={self.samples}"]
        for group in self.groups:
            lines.append(f"{group.name}: {group.passed}/{group.total} passed")
            lines.extend(f"  {example}" for example in group.examples)
        if self.ok:
            lines.append(f"all {self.total} checks passed")
        else:
            lines.append(f"{self.failed} of {self.total} checks failed")
        return lines


def _random_case(rng: np.random.Generator, max_m: float = 0.99):
    d = int(rng.integers(1, 7))
    theta_t = rng.normal(0.0, 3.0, d)
    dphi = rng.normal(0.0, 1.0, d)
    gate = rng.uniform(0.0, 1.0, d)
    mu = rng.normal(0.0, 3.0, d)
    m = rng.uniform(0.0, max_m, d)
    return theta_t, dphi, gate, mu, m


def _updated(theta_t, dphi, gate, mu, m, hp: Hyperparameters, gain_fn) -> np.ndarray:
    est = PreferenceEstimate(theta=theta_t)
    sig = LanguageSignal(gate=gate, mu=mu, confidence=m)
    return fusion.update_quicklap(est, dphi, sig, hp, gain_fn=gain_fn).theta


def _fd_gradient(f: Callable[[np.ndarray], float], theta: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(theta)
    for i in range(theta.shape[0]):
        step = np.zeros_like(theta)
        step[i] = FD_STEP
        grad[i] = (f(theta + step) - f(theta - step)) / (2 * FD_STEP)
    return grad


def check_optimality(rng: np.random.Generator, samples: int, hp: Hyperparameters, gain_fn) -> List[CheckGroup]:
    """勾配と近傍探索による最適性チェック"""
    gradient = CheckGroup('gradient')
    grid = CheckGroup('grid')
    for index in range(samples):
        theta_t, dphi, gate, mu, m = _random_case(rng)
        theta_new = _updated(theta_t, dphi, gate, mu, m, hp, gain_fn)

        def f(theta):
            return fusion.log_posterior(theta, theta_t, dphi, gate, mu, m, hp)

        at_new = _fd_gradient(f, theta_new)
        at_start = _fd_gradient(f, theta_t)
        tolerance = 1e-6 * (1.0 + np.max(np.abs(at_start)))
        worst = float(np.max(np.abs(at_new)))
        gradient.record(worst <= tolerance, f"sample {index}: |grad|={worst:.3e} > {tolerance:.3e}")

        best = f(theta_new)
        slack = 1e-12 * (1.0 + abs(best))
        better = False
        for i in range(theta_new.shape[0]):
            for sign in (-1.0, 1.0):
                candidate = theta_new.copy()
                candidate[i] += sign * GRID_STEP
                if f(candidate) > best + slack:
                    better = True
        grid.record(not better, f"sample {index}: a neighbour scores higher than the update")
    return [gradient, grid]


def check_limits(rng: np.random.Generator, samples: int, hp: Hyperparameters, gain_fn) -> CheckGroup:
    """確信度・ゲートの極限"""
    group = CheckGroup('limits')
    for index in range(samples):
        theta_t, dphi, _, mu, _ = _random_case(rng)
        ones, zeros = np.ones_like(dphi), np.zeros_like(dphi)

        # m=1, r=1: 言語シフトがそのまま反映される
        theta_new = _updated(theta_t, dphi, ones, mu, ones, hp, gain_fn)
        expected = theta_t + fusion.cap_mu(mu, dphi, hp)
        group.record(np.array_equal(theta_new, expected), f"sample {index}: m=1 update {theta_new} != {expected}")

        # m=0, r=1: 物理修正のみの更新に一致
        theta_new = _updated(theta_t, dphi, ones, mu, zeros, hp, gain_fn)
        error = np.abs(theta_new - (theta_t + hp.alpha * dphi))
        group.record(bool(np.all(error <= 1e-3 * np.abs(dphi) + 1e-15)),
                     f"sample {index}: m=0 update deviates from alpha*dphi by {error.max():.3e}")

        # r=0（言語の確信度なし）: ほとんど動かない
        theta_new = _updated(theta_t, dphi, zeros, mu, zeros, hp, gain_fn)
        bound = hp.alpha * hp.eps_prior * (np.abs(dphi) + hp.cap_factor * np.abs(dphi))
        moved = np.abs(theta_new - theta_t)
        group.record(bool(np.all(moved <= bound + 1e-15)), f"sample {index}: r=0 update moved {moved.max():.3e}")
    return group


def check_reduction(rng: np.random.Generator, samples: int, hp: Hyperparameters, gain_fn) -> CheckGroup:
    """QuickLAP（gate=1, m=0）と Masked（gate=1）の pHRI への帰着"""
    group = CheckGroup('reduction')
    for index in range(samples):
        theta_t, dphi, _, mu, _ = _random_case(rng)
        ones = np.ones_like(dphi)
        est = PreferenceEstimate(theta=theta_t)
        phri = fusion.update_phri(est, dphi, hp).theta

        quick = _updated(theta_t, dphi, ones, mu, np.zeros_like(dphi), hp, gain_fn)
        group.record(bool(np.all(np.abs(quick - phri) <= 1e-3 * np.abs(dphi) + 1e-15)),
                     f"sample {index}: quicklap(gate=1, m=0) differs from phri")

        masked = fusion.update_masked(est, dphi, ones, hp).theta
        step_masked, step_phri = np.abs(masked - theta_t), np.abs(phri - theta_t)
        within = np.all(step_masked <= (1 + hp.eps_prior) * step_phri * (1 + 1e-12) + 1e-15)
        within = within and np.all(step_masked >= step_phri * (1 - 1e-12) - 1e-15)
        group.record(bool(within), f"sample {index}: masked(gate=1) differs from phri beyond 1+eps_prior")
    return group


def check_tradeoff(gain_fn) -> CheckGroup:
    """k=1, Λ≈1 での w_φ / w_μ の曲線"""
    group = CheckGroup('tradeoff')
    hp = Hyperparameters(k=1.0, alpha=1.0)
    m = np.linspace(0.0, 1.0, 101)
    lam = fusion.prior_precision(np.ones_like(m), hp)
    sigma_sq = fusion.language_variance(m, hp)
    w_mu = gain_fn(lam, sigma_sq)
    w_phi = sigma_sq * w_mu

    group.record(bool(np.all(np.diff(w_phi) <= 1e-15)), "w_phi is not non-increasing in m")
    group.record(bool(np.all(np.diff(w_mu) >= -1e-15)), "w_mu is not non-decreasing in m")
    group.record(bool(w_mu[-1] == 1.0), f"w_mu(1) = {w_mu[-1]!r}, expected 1.0")
    at = {round(float(v), 2): w for v, w in zip(m, w_phi)}
    group.record(bool(at[0.0] >= 80 * at[0.9]), f"w_phi(0)/w_phi(0.9) = {at[0.0] / at[0.9]:.1f} < 80")
    group.record(bool(at[0.0] >= 100 * at[0.95]), f"w_phi(0)/w_phi(0.95) = {at[0.0] / at[0.95]:.1f} < 100")
    return group


def check_nmse(rng: np.random.Generator, samples: int) -> CheckGroup:
    """NMSE の性質"""
    group = CheckGroup('nmse')
    group.record(nmse([1.0, 0.0], [0.0, 1.0]) == 1.0, "orthogonal unit vectors do not give 1.0")
    for index in range(samples):
        d = int(rng.integers(1, 7))
        theta_hat = rng.normal(0.0, 5.0, d)
        theta_star = rng.normal(0.0, 5.0, d)
        if np.linalg.norm(theta_hat) == 0 or np.linalg.norm(theta_star) == 0:
            continue
        c = float(rng.uniform(0.1, 10.0))
        base = nmse(theta_hat, theta_star)
        group.record(abs(nmse(c * theta_hat, theta_star) - base) <= 1e-12,
                     f"sample {index}: nmse changes under scaling by {c:.3f}")
        group.record(nmse(theta_star, theta_star) == 0.0, f"sample {index}: nmse(theta, theta) != 0")
        group.record(0.0 <= base <= 4.0 / d + 1e-12, f"sample {index}: nmse {base} outside [0, 4/d]")
    return group


def check_capping(rng: np.random.Generator, samples: int, hp: Hyperparameters, gain_fn) -> CheckGroup:
    """μ の制限と特徴量間の独立性"""
    group = CheckGroup('capping')
    for index in range(samples):
        theta_t, dphi, gate, mu, m = _random_case(rng)
        capped = fusion.cap_mu(mu, dphi, hp)
        safe = np.all(np.abs(capped) <= hp.cap_factor * np.abs(dphi) + 1e-15)
        same_sign = np.all((np.sign(capped) == np.sign(mu)) | (capped == 0))
        group.record(bool(safe and same_sign), f"sample {index}: capped mu exceeds cap_factor*|dphi|")

        if dphi.shape[0] < 2:
            continue
        j = int(rng.integers(0, dphi.shape[0]))
        moved = dphi.copy()
        moved[j] += float(rng.normal(0.0, 1.0))
        before = _updated(theta_t, dphi, gate, mu, m, hp, gain_fn)
        after = _updated(theta_t, moved, gate, mu, m, hp, gain_fn)
        others = np.arange(dphi.shape[0]) != j
        group.record(bool(np.array_equal(before[others], after[others])),
                     f"sample {index}: changing feature {j} moved other weights")
    return group


def run_checks(seed: int = 0, samples: int = DEFAULT_SAMPLES, gain_fn: Optional[fusion.GainFn] = None,
               hp: Optional[Hyperparameters] = None) -> VerificationReport:
    """全チェックを実行

    Args:
        seed: 乱数シード
        samples: 乱数で生成する入力の数（グループごと）
        gain_fn: ゲインの計算式（省略時は fusion.gain）
        hp: ハイパーパラメータ（省略時は既定値）

    Returns:
        VerificationReport: グループごとの結果
    """
    hp = hp or Hyperparameters()
    if gain_fn is None:
        def gain_fn(lam, sigma_sq):
            return fusion.gain(lam, sigma_sq, hp.eps)
    rng = np.random.default_rng(seed)

    report = VerificationReport(seed=seed, samples=samples)
    report.groups.extend(check_optimality(rng, samples, hp, gain_fn))
    report.groups.append(check_limits(rng, samples, hp, gain_fn))
    report.groups.append(check_reduction(rng, samples, hp, gain_fn))
    report.groups.append(check_tradeoff(gain_fn))
    report.groups.append(check_nmse(rng, samples))
    report.groups.append(check_capping(rng, samples, hp, gain_fn))

    if report.ok:
        logger.info(f"Verification passed: {report.total} checks (seed={seed})")
    else:
        logger.warning(f"Verification failed: {report.failed} of {report.total} checks (seed={seed})")
    return report

"""
Fusion Tests
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quicklap import fusion
from quicklap.errors import DimensionError
from quicklap.models import Hyperparameters, LanguageSignal, PreferenceEstimate


def estimate(*values):
    return PreferenceEstimate(theta=np.array(values, dtype=float))


def signal(gate, mu, confidence):
    return LanguageSignal(gate=gate, mu=mu, confidence=confidence)


class TestComponents:
    def test_prior_precision(self, hp):
        assert fusion.prior_precision(1.0, hp) == pytest.approx(1.0 / (1.0 + 1e-6))
        assert fusion.prior_precision(0.0, hp) == pytest.approx(1e6)

    def test_prior_precision_decreases_with_gate(self, hp):
        values = fusion.prior_precision(np.linspace(0, 1, 11), hp)
        assert np.all(np.diff(values) < 0)

    def test_language_variance(self, hp):
        assert fusion.language_variance(1.0, hp) == 0.0
        assert fusion.language_variance(0.0, hp) == pytest.approx(1.44 / 1e-6)
        values = fusion.language_variance(np.linspace(0, 1, 11), hp)
        assert np.all(np.diff(values) < 0)

    def test_gain(self):
        assert fusion.gain(2.0, 0.0) == 1.0
        assert fusion.gain(1.0, 1.0) == pytest.approx(0.5)
        assert fusion.gain(1e6, 1e6) == pytest.approx(1e-12)

    def test_cap_mu(self, hp):
        capped = fusion.cap_mu([3.0, -3.0, 0.2, 1.0], [0.1, -0.2, 1.0, 0.0], hp)
        assert capped.tolist() == pytest.approx([0.5, -1.0, 0.2, 0.0])

    def test_cap_mu_mismatch(self, hp):
        with pytest.raises(DimensionError):
            fusion.cap_mu([1.0], [1.0, 2.0], hp)


class TestUpdates:
    def test_full_confidence_follows_language(self, hp):
        est = estimate(1.0, 1.0)
        sig = signal([1.0, 1.0], [0.3, -0.2], [1.0, 1.0])
        updated = fusion.update_quicklap(est, [0.1, 0.1], sig, hp)
        assert updated.theta.tolist() == [1.3, 0.8]
        assert updated.step_index == 1

    def test_default_gain_uses_configured_eps(self):
        hp = Hyperparameters(eps=4.0)
        sig = signal([1.0], [2.0], [1.0])
        updated = fusion.update_quicklap(estimate(1.0), [1.0], sig, hp)
        assert updated.theta[0] == pytest.approx(1.5)
        assert fusion.update('quicklap', estimate(1.0), [1.0], sig, hp).theta[0] == pytest.approx(1.5)

    def test_zero_confidence_reduces_to_phri(self, hp):
        est = estimate(1.0, 2.0, 3.0)
        dphi = np.array([0.5, -0.25, 0.1])
        sig = signal([1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [0.0, 0.0, 0.0])
        quick = fusion.update_quicklap(est, dphi, sig, hp).theta
        phri = fusion.update_phri(est, dphi, hp).theta
        assert np.all(np.abs(quick - phri) <= 1e-3 * np.abs(dphi))

    def test_closed_gate_barely_moves(self, hp):
        est = estimate(1.0, 1.0)
        dphi = np.array([0.8, -0.6])
        sig = signal([0.0, 0.0], [1.0, 1.0], [0.0, 0.0])
        moved = np.abs(fusion.update_quicklap(est, dphi, sig, hp).theta - est.theta)
        assert np.all(moved <= hp.alpha * hp.eps_prior * (1 + hp.cap_factor) * np.abs(dphi))

    def test_phri(self, hp):
        assert fusion.update_phri(estimate(1.0, 1.0), [0.5, -0.5], hp).theta.tolist() == [1.5, 0.5]

    def test_masked(self, hp):
        updated = fusion.update_masked(estimate(1.0, 1.0), [0.5, 0.5], [1.0, 0.0], hp)
        assert updated.theta[0] == pytest.approx(1.5)
        assert updated.theta[1] == pytest.approx(1.0, abs=1e-6)

    def test_masked_rejects_bad_gate(self, hp):
        with pytest.raises(ValueError):
            fusion.update_masked(estimate(1.0), [0.5], [2.0], hp)

    def test_language_only_ignores_physical_term(self, hp):
        est = estimate(1.0, 1.0)
        sig = signal([1.0, 1.0], [0.0, 0.0], [0.0, 0.0])
        assert fusion.update_language_only(est, [5.0, -5.0], sig, hp).theta.tolist() == [1.0, 1.0]

    def test_dimension_mismatch(self, hp):
        with pytest.raises(DimensionError):
            fusion.update_phri(estimate(1.0, 1.0), [1.0], hp)
        with pytest.raises(DimensionError):
            fusion.update_quicklap(estimate(1.0, 1.0), [1.0, 1.0], signal([1.0], [0.0], [0.5]), hp)

    def test_dispatch(self, hp):
        est = estimate(1.0)
        sig = signal([1.0], [0.0], [0.0])
        assert fusion.update('phri', est, [0.5], None, hp).theta.tolist() == [1.5]
        assert fusion.update('masked', est, [0.5], sig, hp).theta[0] == pytest.approx(1.5)
        with pytest.raises(ValueError, match="needs a language signal"):
            fusion.update('quicklap', est, [0.5], None, hp)
        with pytest.raises(ValueError, match="Unknown algorithm"):
            fusion.update('magic', est, [0.5], sig, hp)

    def test_initial_estimate(self):
        est = fusion.initial_estimate(4)
        assert est.theta.tolist() == [1.0, 1.0, 1.0, 1.0]
        assert est.step_index == 0


class TestLogPosterior:
    def test_update_is_maximizer(self, hp):
        theta_t = np.array([1.0, -2.0, 0.5])
        dphi = np.array([0.3, -0.1, 0.7])
        gate = np.array([1.0, 0.2, 0.6])
        mu = np.array([0.5, 1.0, -2.0])
        m = np.array([0.5, 0.9, 0.1])
        est = PreferenceEstimate(theta=theta_t)
        best = fusion.update_quicklap(est, dphi, signal(gate, mu, m), hp).theta
        value = fusion.log_posterior(best, theta_t, dphi, gate, mu, m, hp)
        for i in range(3):
            for delta in (-1e-3, 1e-3):
                candidate = best.copy()
                candidate[i] += delta
                assert fusion.log_posterior(candidate, theta_t, dphi, gate, mu, m, hp) < value

    def test_exact_language_constraint(self, hp):
        theta_t = np.array([1.0])
        args = (theta_t, np.array([0.2]), np.array([1.0]), np.array([0.5]), np.array([1.0]), hp)
        assert fusion.log_posterior(np.array([1.5]), *args) > float('-inf')
        assert fusion.log_posterior(np.array([1.6]), *args) == float('-inf')


class TestTradeoff:
    def test_curve(self):
        hp = Hyperparameters(k=1.0)
        m = np.linspace(0, 1, 101)
        w_phi, w_mu = fusion.tradeoff_weights(m, hp)
        assert np.all(np.diff(w_phi) <= 0)
        assert np.all(np.diff(w_mu) >= 0)
        assert w_mu[-1] == 1.0
        assert w_phi[-1] == 0.0
        assert w_phi[0] >= 80 * w_phi[90]
        assert w_phi[0] >= 100 * w_phi[95]


vectors = st.integers(1, 6).flatmap(lambda d: st.tuples(
    st.lists(st.floats(-10, 10), min_size=d, max_size=d),
    st.lists(st.floats(-3, 3), min_size=d, max_size=d),
    st.lists(st.floats(0, 1), min_size=d, max_size=d),
    st.lists(st.floats(-6, 6), min_size=d, max_size=d),
    st.lists(st.floats(0, 1), min_size=d, max_size=d),
))


@settings(max_examples=100, deadline=None)
@given(case=vectors)
def test_capping_is_safe(case):
    _, dphi, _, mu, _ = (np.array(v) for v in case)
    hp = Hyperparameters()
    capped = fusion.cap_mu(mu, dphi, hp)
    assert np.all(np.abs(capped) <= hp.cap_factor * np.abs(dphi))
    assert np.all(np.abs(capped) <= np.abs(mu))


@settings(max_examples=100, deadline=None)
@given(case=vectors, j=st.integers(0, 5), shift=st.floats(-2, 2))
def test_features_are_decoupled(case, j, shift):
    theta_t, dphi, gate, mu, m = (np.array(v) for v in case)
    j = j % theta_t.shape[0]
    hp = Hyperparameters()
    est = PreferenceEstimate(theta=theta_t)
    sig = signal(gate, mu, m)
    moved = dphi.copy()
    moved[j] += shift
    before = fusion.update_quicklap(est, dphi, sig, hp).theta
    after = fusion.update_quicklap(est, moved, sig, hp).theta
    others = np.arange(theta_t.shape[0]) != j
    assert np.array_equal(before[others], after[others])


@settings(max_examples=100, deadline=None)
@given(case=vectors)
def test_update_moves_toward_capped_shift(case):
    theta_t, dphi, gate, mu, _ = (np.array(v) for v in case)
    hp = Hyperparameters()
    sig = signal(gate, mu, np.ones_like(theta_t))
    updated = fusion.update_quicklap(PreferenceEstimate(theta=theta_t), dphi, sig, hp).theta
    assert np.array_equal(updated, theta_t + fusion.cap_mu(mu, dphi, hp))

import numpy as np
import pytest

from streamdeg.robust_stats import InsufficientSupportError, power_law_test


def test_zipf_not_rejected():
    rng = np.random.default_rng(0)
    samples = rng.zipf(2.5, 10_000)
    verdict = power_law_test(samples, bootstrap_count=250, significance=0.1, seed=0)
    assert not verdict.rejected
    assert verdict.p_value >= 0.1
    assert verdict.alpha_hat == pytest.approx(2.5, abs=0.15)
    assert verdict.alpha_hat > 1.0


def test_geometric_tail_rejected():
    rng = np.random.default_rng(0)
    samples = rng.geometric(0.05, 10_000)
    verdict = power_law_test(samples, bootstrap_count=250, significance=0.1, seed=0)
    assert verdict.rejected
    assert verdict.p_value < 0.1


def test_two_point_support_is_an_error():
    samples = np.array([1] * 50 + [2] * 50)
    with pytest.raises(InsufficientSupportError):
        power_law_test(samples, bootstrap_count=100, seed=0)


def test_support_must_start_at_one():
    with pytest.raises(ValueError):
        power_law_test(np.array([0, 1, 2, 3] * 10), bootstrap_count=100, seed=0)


def test_bootstrap_count_floor():
    with pytest.raises(ValueError):
        power_law_test(np.array([1, 2, 3] * 10), bootstrap_count=50, seed=0)


def test_deterministic_given_seed():
    rng = np.random.default_rng(5)
    samples = rng.zipf(2.0, 2000)
    a = power_law_test(samples, bootstrap_count=100, seed=42)
    b = power_law_test(samples, bootstrap_count=100, seed=42)
    assert a == b


def test_self_calibration():
    # data drawn from the fitted model itself should rarely be rejected
    rejections = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        samples = rng.zipf(2.2, 2000)
        verdict = power_law_test(samples, bootstrap_count=100, significance=0.1, seed=seed)
        rejections += verdict.rejected
    assert rejections <= 2

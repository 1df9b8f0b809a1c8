import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubetopo.reward import GrpoConfig, GrpoGroup, clipped_surrogate, grpo_advantages, grpo_objective, kl_k3

rewards = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=16)


def test_constant_group():
    assert np.array_equal(grpo_advantages([1, 1, 1, 1]), np.zeros(4))
    assert np.array_equal(grpo_advantages([0.1, 0.1, 0.1], eps_std=0.0), np.zeros(3))


def test_two_point():
    assert np.array_equal(grpo_advantages([0, 1], eps_std=0.0), np.array([-1.0, 1.0]))


def test_population_std():
    r = np.array([0.0, 1.0, 2.0, 5.0])
    expected = (r - r.mean()) / (r.std(ddof=0) + 1e-6)
    assert np.allclose(grpo_advantages(r), expected, rtol=0, atol=1e-15)


def test_size_error():
    with pytest.raises(ValueError):
        grpo_advantages([1.0])


@settings(max_examples=200)
@given(rewards, st.floats(-5, 5), st.floats(0.1, 10))
def test_invariances(r, shift, scale):
    a = grpo_advantages(r, 0.0)
    if np.ptp(r) < 1e-6:
        return
    assert abs(a.mean()) < 1e-9
    assert np.allclose(grpo_advantages(np.add(r, shift), 0.0), a, atol=1e-6)
    assert np.allclose(grpo_advantages(np.multiply(r, scale), 0.0), a, atol=1e-9)


@settings(max_examples=100)
@given(rewards)
def test_sum_bounded(r):
    assert abs(grpo_advantages(r, 1e-6).sum()) <= len(r) * 1e-6 + 1e-9


def test_clip_examples():
    assert clipped_surrogate(1.5, 1.0, 0.2) == pytest.approx(1.2)
    assert clipped_surrogate(0.5, -1.0, 0.2) == pytest.approx(-0.8)
    # inside the band clipping is the identity
    ratios = np.linspace(0.8, 1.2, 41)
    adv = np.linspace(-2, 2, 41)
    assert np.array_equal(clipped_surrogate(ratios, adv, 0.2), ratios * adv)


def test_kl_k3():
    assert kl_k3([0.0, -1.0], [0.0, -1.0]).tolist() == [0.0, 0.0]
    d = 0.3
    assert kl_k3([0.0], [d])[0] == pytest.approx(np.exp(d) - d - 1)
    assert np.all(kl_k3(np.zeros(5), np.linspace(-2, 2, 5)) >= 0)


def test_objective_identity_policy():
    g = GrpoGroup([1, 1, 1], [-2.0, -1.0, -3.0], [-2.0, -1.0, -3.0], [-2.0, -1.0, -3.0])
    assert grpo_objective(g) == 0.0


def test_objective_value():
    lp_old = np.array([-1.0, -2.0, -1.5, -0.5])
    lp_new = lp_old + np.array([0.1, -0.4, 0.0, 0.3])
    lp_ref = lp_old - 0.05
    r = [0.0, 1.0, 0.5, 2.0]
    g = GrpoGroup(r, lp_new.tolist(), lp_old.tolist(), lp_ref.tolist())
    cfg = GrpoConfig()
    adv = grpo_advantages(r, cfg.eps_std)
    ratio = np.exp(lp_new - lp_old)
    sur = np.minimum(ratio * adv, np.clip(ratio, 0.8, 1.2) * adv)
    d = lp_ref - lp_new
    expected = sur.mean() - 0.05 * (np.exp(d) - d - 1).mean()
    assert grpo_objective(g, cfg) == pytest.approx(expected, abs=1e-14)


def test_group_validation():
    with pytest.raises(ValueError):
        GrpoGroup([1, 2], [0, 0], [0], [0, 0])
    with pytest.raises(ValueError):
        GrpoGroup([1], [0], [0], [0])
    with pytest.raises(ValueError):
        GrpoConfig(eps_std=-1)
    assert GrpoConfig().to_dict() == {"clip_eps": 0.2, "kl_beta": 0.05, "eps_std": 1e-6}

"""Replay buffer semantics and advantage estimation against a direct sum.

The recursion in gae_compute is checked against the O(T^2) definition:

    A_t = sum_{l >= 0} (gamma * lam)^l * delta_{t+l} * prod_{j<l} keep_{t+j}

where keep cuts at any episode end. Random instances cover terminated,
truncated, and clean segments in both the 1-D and batched layouts.
"""

import numpy as np
import pytest

from picorl.buffers import (Batch, ReplayBuffer, RolloutBuffer, Transition,
                            advantage_normalize, gae_compute)
from picorl.rng import Prng


def gae_direct(rewards, values, bootstrap, terminated, truncated, gamma, lam,
               truncation_values=None):
    T = len(rewards)
    v_next = np.empty(T)
    v_next[:-1] = values[1:]
    v_next[-1] = bootstrap
    for t in range(T):
        if truncated[t]:
            v_next[t] = truncation_values[t]
    delta = [rewards[t] + gamma * v_next[t] * (1.0 - terminated[t]) - values[t]
             for t in range(T)]
    keep = [0.0 if (terminated[t] or truncated[t]) else 1.0 for t in range(T)]
    adv = np.zeros(T)
    for t in range(T):
        coef = 1.0
        for l in range(T - t):
            adv[t] += coef * delta[t + l]
            if t + l < T:
                coef *= gamma * lam * keep[t + l]
            if coef == 0.0:
                break
    return adv, adv + np.asarray(values)


def random_instance(rng, T):
    rewards = 2.0 * rng.uniform(T) - 1.0
    values = 2.0 * rng.uniform(T) - 1.0
    bootstrap = float(2.0 * rng.uniform() - 1.0)
    terminated = rng.uniform(T) < 0.2
    truncated = (rng.uniform(T) < 0.2) & ~terminated
    tv = 2.0 * rng.uniform(T) - 1.0
    gamma = float(rng.uniform())
    lam = float(rng.uniform())
    return rewards, values, bootstrap, terminated.astype(float), truncated, tv, gamma, lam


def test_gae_matches_direct_sum():
    rng = Prng(303)
    for _ in range(400):
        T = 1 + int(rng.uniform() * 8)
        r, v, boot, term, trunc, tv, gamma, lam = random_instance(rng, T)
        adv, ret = gae_compute(r, v, boot, term, trunc, gamma, lam,
                               truncation_values=tv)
        want_adv, want_ret = gae_direct(r, v, boot, term, trunc, gamma, lam,
                                        truncation_values=tv)
        np.testing.assert_allclose(adv, want_adv, atol=1e-10, rtol=0)
        np.testing.assert_allclose(ret, want_ret, atol=1e-10, rtol=0)


def test_gae_batched_rows_equal_independent_rows():
    rng = Prng(304)
    T, n = 6, 5
    rows = [random_instance(rng, T) for _ in range(n)]
    r = np.stack([x[0] for x in rows])
    v = np.stack([x[1] for x in rows])
    boot = np.array([x[2] for x in rows])
    term = np.stack([x[3] for x in rows])
    trunc = np.stack([x[4] for x in rows])
    tv = np.stack([x[5] for x in rows])
    gamma, lam = 0.97, 0.9
    adv2, ret2 = gae_compute(r, v, boot, term, trunc, gamma, lam, truncation_values=tv)
    for i in range(n):
        adv1, ret1 = gae_compute(r[i], v[i], boot[i], term[i], trunc[i],
                                 gamma, lam, truncation_values=tv[i])
        np.testing.assert_array_equal(adv2[i], adv1)
        np.testing.assert_array_equal(ret2[i], ret1)


def test_gae_lam_zero_is_one_step_error():
    rng = Prng(305)
    r, v, boot, term, trunc, tv, _, _ = random_instance(rng, 7)
    adv, _ = gae_compute(r, v, boot, term, trunc, 0.93, 0.0, truncation_values=tv)
    v_next = np.empty(7)
    v_next[:-1] = v[1:]
    v_next[-1] = boot
    v_next[trunc] = tv[trunc]
    np.testing.assert_allclose(adv, r + 0.93 * v_next * (1 - term) - v, atol=1e-12)


def test_gae_gamma_one_lam_one_clean_segment_is_monte_carlo():
    r = np.array([1.0, 2.0, 3.0])
    v = np.array([0.5, 0.25, 0.125])
    boot = 4.0
    zeros = np.zeros(3)
    adv, ret = gae_compute(r, v, boot, zeros, zeros.astype(bool), 1.0, 1.0)
    # Telescoping: A_t = sum of future rewards plus bootstrap minus v_t.
    np.testing.assert_allclose(adv, [6 + 4 - 0.5, 5 + 4 - 0.25, 3 + 4 - 0.125],
                               atol=1e-12)
    np.testing.assert_allclose(ret, adv + v, atol=1e-12)


def test_gae_terminated_blocks_bootstrap_and_credit():
    r = np.array([1.0, 1.0])
    v = np.array([10.0, 20.0])
    term = np.array([1.0, 0.0])
    trunc = np.array([False, False])
    adv, _ = gae_compute(r, v, 99.0, term, trunc, 0.9, 0.9)
    # Step 0 ends an episode: delta_0 = r_0 - v_0 and nothing flows back.
    assert adv[0] == pytest.approx(1.0 - 10.0)
    assert adv[1] == pytest.approx(1.0 + 0.9 * 99.0 - 20.0)


def test_gae_truncation_bootstraps_through_supplied_value():
    r = np.array([0.0, 0.0])
    v = np.array([0.0, 0.0])
    trunc = np.array([True, False])
    tv = np.array([7.0, 0.0])
    adv, _ = gae_compute(r, v, 0.0, np.zeros(2), trunc, 0.5, 1.0,
                         truncation_values=tv)
    assert adv[0] == pytest.approx(0.5 * 7.0)
    # But no lambda credit flows across the cut.
    r2 = np.array([0.0, 1.0])
    adv2, _ = gae_compute(r2, v, 0.0, np.zeros(2), trunc, 0.5, 1.0,
                          truncation_values=tv)
    assert adv2[0] == adv[0]


def test_gae_requires_truncation_values_when_truncated():
    with pytest.raises(ValueError):
        gae_compute(np.zeros(3), np.zeros(3), 0.0, np.zeros(3),
                    np.array([False, True, False]), 0.9, 0.9)


def test_gae_shape_validation():
    with pytest.raises(ValueError):
        gae_compute(np.zeros(3), np.zeros(4), 0.0, np.zeros(3),
                    np.zeros(3, dtype=bool), 0.9, 0.9)
    with pytest.raises(ValueError):
        gae_compute(np.zeros(0), np.zeros(0), 0.0, np.zeros(0),
                    np.zeros(0, dtype=bool), 0.9, 0.9)


def test_advantage_normalize():
    rng = Prng(306)
    a = rng.gaussian(1000) * 3.0 + 5.0
    out = advantage_normalize(a)
    assert abs(out.mean()) < 1e-12
    assert out.std() == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        advantage_normalize(np.array([1.0]))


def test_advantage_normalize_constant_input_stays_finite():
    out = advantage_normalize(np.full(8, 3.0))
    np.testing.assert_array_equal(out, 0.0)


def make_transition(i, obs_dim=3, action_dim=1):
    return Transition(np.full(obs_dim, float(i)), np.full(action_dim, float(-i)),
                      float(i) / 10.0, np.full(obs_dim, float(i) + 0.5), i % 2 == 0)


def test_replay_ring_overwrites_oldest():
    buf = ReplayBuffer(4, 3, 1)
    for i in range(6):
        buf.push(make_transition(i))
    assert len(buf) == 4
    # Slots now hold 4, 5, 2, 3 in ring order.
    np.testing.assert_array_equal(buf.obs[:, 0], [4.0, 5.0, 2.0, 3.0])
    np.testing.assert_array_equal(buf.rewards,
                                  np.array([0.4, 0.5, 0.2, 0.3], dtype=np.float32))


def test_replay_sample_shapes_and_consistency():
    buf = ReplayBuffer(16, 3, 1)
    for i in range(10):
        buf.push(make_transition(i))
    batch = buf.sample(7, Prng(1))
    assert isinstance(batch, Batch)
    assert batch.obs.shape == (7, 3)
    assert batch.actions.shape == (7, 1)
    assert batch.rewards.shape == (7,)
    assert batch.terminated.shape == (7,)
    # Row contents travel together: obs value i pairs with reward i/10.
    for j in range(7):
        i = batch.obs[j, 0]
        assert batch.rewards[j] == np.float32(i / 10.0)
        assert batch.actions[j, 0] == -i
        assert batch.next_obs[j, 0] == i + np.float32(0.5)


def test_replay_sampling_is_uniform():
    buf = ReplayBuffer(10, 1, 1)
    for i in range(10):
        buf.push(Transition(np.array([float(i)]), np.zeros(1), 0.0,
                            np.zeros(1), False))
    rng = Prng(42)
    counts = np.zeros(10)
    draws = 40_000
    idx = buf.sample(draws, rng).obs[:, 0].astype(int)
    for i in idx:
        counts[i] += 1
    expected = draws / 10.0
    sigma = np.sqrt(draws * 0.1 * 0.9)
    assert np.all(np.abs(counts - expected) < 5 * sigma)


def test_replay_empty_sample_raises():
    with pytest.raises(ValueError):
        ReplayBuffer(4, 3, 1).sample(2, Prng(0))
    with pytest.raises(ValueError):
        ReplayBuffer(0, 3, 1)


def test_rollout_buffer_flat_and_finalize():
    n, T = 2, 5
    buf = RolloutBuffer(n, T, 3, 1)
    rng = Prng(7)
    for t in range(T):
        buf.add(rng.gaussian(n * 3).reshape(n, 3),
                rng.gaussian(n).reshape(n, 1),
                rng.gaussian(n), rng.gaussian(n), rng.gaussian(n),
                False, [False, t == 2])
        if t == 2:
            buf.set_truncation_value(1, 1.25)
    boot = np.array([0.3, -0.4])
    buf.finalize(boot, 0.95, 0.9)
    flat = buf.flat()
    assert flat["obs"].shape == (n * T, 3)
    assert flat["advantages"].shape == (n * T,)

    adv, ret = gae_compute(buf.rewards[:, :T], buf.values[:, :T], boot,
                           buf.terminated[:, :T], buf.truncated[:, :T],
                           0.95, 0.9, buf.truncation_values[:, :T])
    np.testing.assert_array_equal(flat["advantages"], adv.reshape(-1))
    np.testing.assert_array_equal(flat["returns"], ret.reshape(-1))
    # Row-major flattening: env 0's steps first.
    np.testing.assert_array_equal(flat["values"][:T], buf.values[0, :T])


def test_rollout_buffer_guards():
    buf = RolloutBuffer(1, 2, 3, 1)
    with pytest.raises(RuntimeError):
        buf.flat()
    buf.add(np.zeros((1, 3)), np.zeros((1, 1)), [0.0], [0.0], [0.0], False, False)
    buf.add(np.zeros((1, 3)), np.zeros((1, 1)), [0.0], [0.0], [0.0], False, False)
    with pytest.raises(ValueError):
        buf.add(np.zeros((1, 3)), np.zeros((1, 1)), [0.0], [0.0], [0.0], False, False)
    buf.finalize(np.zeros(1), 0.9, 0.9)
    assert buf.flat()["obs"].shape == (2, 3)
    buf.reset()
    assert buf.pos == 0
    with pytest.raises(RuntimeError):
        buf.flat()

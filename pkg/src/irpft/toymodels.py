"""Small analytic models for tests and demonstrations.

The linear-Gaussian model has a closed-form Kalman filter, which makes it the
workhorse oracle for the particle filter, the entropy estimator, and the
suffix-weight identities.
"""
from __future__ import annotations

import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .beliefs import ContinuousActionSpace, DiscreteActionSpace, GenerativeModel

Array = np.ndarray

_LOG_2PI = math.log(2.0 * math.pi)


class LinearGaussianModel(GenerativeModel):
    """s' = s + a + N(0, sigma_t^2 I),  o = s' + N(0, sigma_o^2 I).

    ``reward_fn(belief, action, next_belief, observation, propagated)`` is
    optional and defaults to zero; the call counter still ticks either way.
    """

    def __init__(
        self,
        dim: int = 1,
        sigma_t: float = 0.3,
        sigma_o: float = 0.5,
        actions: Optional[Sequence] = None,
        continuous_actions: bool = False,
        action_low: float = -1.0,
        action_high: float = 1.0,
        reward_fn: Optional[Callable] = None,
        terminal_fn: Optional[Callable] = None,
    ):
        super().__init__()
        self.dim = dim
        self.sigma_t = float(sigma_t)
        self.sigma_o = float(sigma_o)
        self.reward_fn = reward_fn
        self.terminal_fn = terminal_fn
        if continuous_actions:
            self.action_space = ContinuousActionSpace(
                lambda rng: rng.uniform(action_low, action_high, size=dim)
            )
        else:
            if actions is None:
                actions = [np.zeros(dim)]
            self.action_space = DiscreteActionSpace(tuple(np.asarray(a, float) for a in actions))

    def sample_transition(self, states, action, rng):
        return states + action + rng.normal(0.0, self.sigma_t, size=states.shape)

    def transition_logdensity(self, states, action, next_states):
        delta = next_states - (states + action)
        return -0.5 * (delta * delta).sum(axis=-1) / self.sigma_t**2 - self.dim * (
            0.5 * _LOG_2PI + math.log(self.sigma_t)
        )

    def transition_logdensity_pairs(self, states, action, next_states):
        mean = states + action
        delta = next_states[:, None, :] - mean[None, :, :]
        return -0.5 * (delta * delta).sum(axis=-1) / self.sigma_t**2 - self.dim * (
            0.5 * _LOG_2PI + math.log(self.sigma_t)
        )

    def transition_mode(self, states, action):
        return states + action

    def sample_observation(self, state, rng):
        return state + rng.normal(0.0, self.sigma_o, size=state.shape)

    def observation_logdensity(self, states, observation):
        delta = observation[None, :] - states
        return -0.5 * (delta * delta).sum(axis=-1) / self.sigma_o**2 - self.dim * (
            0.5 * _LOG_2PI + math.log(self.sigma_o)
        )

    def _reward(self, belief, action, next_belief, observation, propagated):
        if self.reward_fn is None:
            return 0.0
        return float(self.reward_fn(belief, action, next_belief, observation, propagated))

    def is_terminal(self, belief):
        if self.terminal_fn is None:
            return False
        return bool(self.terminal_fn(belief))

    def greedy_action(self, belief):
        if self.action_space.kind != "discrete":
            raise NotImplementedError("greedy rollout needs a discrete action set")
        return self.action_space.actions[0]


def kalman_posterior(mean0, var0, action, sigma_t, sigma_o, observation):
    """Exact one-step Kalman update for the linear-Gaussian model (isotropic).

    Returns the posterior mean vector and the scalar per-axis variance.
    """
    mean0 = np.asarray(mean0, dtype=float)
    obs = np.asarray(observation, dtype=float)
    pred_mean = mean0 + np.asarray(action, dtype=float)
    pred_var = var0 + sigma_t**2
    gain = pred_var / (pred_var + sigma_o**2)
    post_mean = pred_mean + gain * (obs - pred_mean)
    post_var = (1.0 - gain) * pred_var
    return post_mean, post_var


def gaussian_entropy(variances) -> float:
    """Differential entropy of a diagonal Gaussian: 0.5 * ln((2*pi*e)^d |Sigma|)."""
    v = np.atleast_1d(np.asarray(variances, dtype=float))
    d = v.size
    return 0.5 * (d * math.log(2.0 * math.pi * math.e) + float(np.log(v).sum()))

"""2D Light Dark navigation with a belief-dependent (distance + entropy) reward.

Observation noise grows with distance from the nearest beacon, so an agent
that cares about the differential entropy of its belief is rewarded for
detouring past beacons before heading to the goal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .beliefs import (
    DiscreteActionSpace,
    GenerativeModel,
    ParticleBelief,
    PropagatedBelief,
)
from .errors import AllWeightsZero, ConfigError, MismatchedCardinality

Array = np.ndarray

_LOG_2PI = math.log(2.0 * math.pi)

_SQ2 = math.sqrt(0.5)
# 8 unit compass directions plus stay, in a fixed index order
_COMPASS = (
    (1.0, 0.0),
    (_SQ2, _SQ2),
    (0.0, 1.0),
    (-_SQ2, _SQ2),
    (-1.0, 0.0),
    (-_SQ2, -_SQ2),
    (0.0, -1.0),
    (_SQ2, -_SQ2),
    (0.0, 0.0),
)


@dataclass(frozen=True)
class LightDarkConfig:
    """Geometry and noise parameters; all benchmark values live in config files."""

    goal: Tuple[float, float] = (9.0, 5.0)
    start: Tuple[float, float] = (0.5, 5.0)
    beacons: Tuple[Tuple[float, float], ...] = ((3.0, 2.0), (3.0, 8.0))
    sigma_process: float = 0.1
    sigma_obs_min: float = 0.05
    sigma_obs_slope: float = 0.3
    w_dist: float = 1.0
    w_entropy: float = 0.5
    goal_radius: float = 0.5
    bounds: Tuple[Tuple[float, float], Tuple[float, float]] = ((0.0, 0.0), (10.0, 10.0))
    sigma0: float = 0.4
    max_steps: int = 40

    def __post_init__(self):
        for name in ("sigma_process", "sigma_obs_min", "sigma_obs_slope", "sigma0"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.w_dist < 0 or self.w_entropy < 0:
            raise ConfigError("reward weights must be nonnegative")
        if self.goal_radius <= 0:
            raise ConfigError("goal_radius must be positive")
        lo, hi = np.asarray(self.bounds[0]), np.asarray(self.bounds[1])
        if not np.all(lo < hi):
            raise ConfigError("bounds must describe a nonempty box")
        for b in self.beacons:
            if not np.all((lo <= np.asarray(b)) & (np.asarray(b) <= hi)):
                raise ConfigError(f"beacon {b} lies outside the arena bounds")


class LightDarkModel(GenerativeModel):
    """Generative model: clamped Gaussian motion, beacon-scaled observation noise.

    Transition log-densities ignore the boundary clamp (the Gaussian form is
    kept for likelihood purposes); with the default geometry the clamp is
    inactive away from the arena edge.
    """

    def __init__(self, config: LightDarkConfig = LightDarkConfig()):
        super().__init__()
        self.config = config
        self.goal = np.asarray(config.goal, dtype=float)
        self.beacons = np.asarray(config.beacons, dtype=float)
        self.lo = np.asarray(config.bounds[0], dtype=float)
        self.hi = np.asarray(config.bounds[1], dtype=float)
        self.action_space = DiscreteActionSpace(tuple(np.array(a) for a in _COMPASS))
        self._action_matrix = np.asarray(_COMPASS, dtype=float)

    # -- transition ---------------------------------------------------------
    def sample_transition(self, states, action, rng):
        noise = rng.normal(0.0, self.config.sigma_process, size=states.shape)
        return np.clip(states + action + noise, self.lo, self.hi)

    def transition_logdensity(self, states, action, next_states):
        sigma = self.config.sigma_process
        delta = next_states - (states + action)
        return -0.5 * (delta * delta).sum(axis=-1) / (sigma * sigma) - (
            _LOG_2PI + 2.0 * math.log(sigma)
        )

    def transition_logdensity_pairs(self, states, action, next_states):
        sigma = self.config.sigma_process
        mean = states + action  # (n, 2)
        delta = next_states[:, None, :] - mean[None, :, :]
        return -0.5 * (delta * delta).sum(axis=-1) / (sigma * sigma) - (
            _LOG_2PI + 2.0 * math.log(sigma)
        )

    def transition_mode(self, states, action):
        return np.clip(states + action, self.lo, self.hi)

    # -- observation ----------------------------------------------------------
    def observation_sigma(self, states) -> Array:
        delta = states[:, None, :] - self.beacons[None, :, :]
        d = np.sqrt((delta * delta).sum(axis=-1)).min(axis=1)
        return self.config.sigma_obs_min + self.config.sigma_obs_slope * d

    def sample_observation(self, state, rng):
        sigma = float(self.observation_sigma(state[None, :])[0])
        return state + rng.normal(0.0, sigma, size=state.shape)

    def observation_logdensity(self, states, observation):
        sigma = self.observation_sigma(states)
        delta = observation[None, :] - states
        return -0.5 * (delta * delta).sum(axis=-1) / (sigma * sigma) - (
            _LOG_2PI + 2.0 * np.log(sigma)
        )

    # -- reward / termination ---------------------------------------------------
    def _reward(self, belief, action, next_belief, observation, propagated):
        if observation is None or propagated is None:
            raise ValueError("light-dark reward needs the step's observation and propagated set")
        cfg = self.config
        delta = next_belief.particles - self.goal
        dist = float(np.sqrt((delta * delta).sum(axis=1)).mean())
        entropy = boers_entropy(belief, action, observation, propagated, self)
        return -cfg.w_dist * dist - cfg.w_entropy * entropy

    def is_terminal(self, belief) -> bool:
        delta = belief.mean() - self.goal
        return float(delta @ delta) <= self.config.goal_radius**2

    def greedy_action(self, belief) -> Array:
        """Discrete action whose noise-free step lands closest to the goal."""
        landing = np.clip(belief.mean() + self._action_matrix, self.lo, self.hi) - self.goal
        best = int(np.argmin((landing * landing).sum(axis=1)))
        return self.action_space.actions[best]


def boers_entropy(
    prev_belief: ParticleBelief,
    action,
    observation,
    propagated: PropagatedBelief,
    model: GenerativeModel,
) -> float:
    """Particle-filter estimate of the post-update belief's differential entropy.

    Computed from the propagated particles and the observation that updated
    them:

        H ~= log[ (1/m) sum_i P_O(o|s'_i) ]
             - sum_i w_i ( log P_O(o|s'_i) + log[(1/m) sum_j P_T(s'_i|s_j, a)] )

    with w_i the normalized observation weights. Everything stays in log
    space; the pairwise transition mixture is the O(m^2) term that makes this
    reward the dominant planning cost.
    """
    s_prev = prev_belief.particles
    s_prop = propagated.particles
    if s_prev.shape[0] != s_prop.shape[0]:
        raise MismatchedCardinality("previous and propagated particle counts differ")
    m = s_prop.shape[0]

    obs_ld = np.asarray(model.observation_logdensity(s_prop, observation), dtype=float)
    shift = obs_ld.max()
    if not np.isfinite(shift):
        raise AllWeightsZero("observation carries no likelihood under any particle")
    w = np.exp(obs_ld - shift)
    w /= w.sum()
    log_evidence = shift + math.log(np.exp(obs_ld - shift).sum()) - math.log(m)

    pair_ld = np.asarray(model.transition_logdensity_pairs(s_prev, action, s_prop), dtype=float)
    pair_shift = pair_ld.max(axis=1)
    mix = pair_shift + np.log(np.exp(pair_ld - pair_shift[:, None]).sum(axis=1)) - math.log(m)

    inner = obs_ld + mix
    cross = float(np.sum(np.where(w > 0.0, w * inner, 0.0)))
    return float(log_evidence - cross)


class LightDarkEnv:
    """Ground-truth simulator for episodes: hidden state, real observations."""

    def __init__(self, model: LightDarkModel, rng, state: Optional[Array] = None):
        self.model = model
        self.rng = rng
        if state is None:
            cfg = model.config
            state = np.asarray(cfg.start, dtype=float) + rng.normal(0.0, cfg.sigma0, size=2)
            state = np.clip(state, model.lo, model.hi)
        self.state = np.asarray(state, dtype=float)

    def step(self, action) -> Array:
        self.state = self.model.sample_transition(self.state[None, :], action, self.rng)[0]
        return self.model.sample_observation(self.state, self.rng)


def initial_belief(model: LightDarkModel, m: int, rng) -> ParticleBelief:
    """Particles spread around the start position with the configured spread."""
    cfg = model.config
    particles = np.asarray(cfg.start, dtype=float) + rng.normal(0.0, cfg.sigma0, size=(m, 2))
    return ParticleBelief(np.clip(particles, model.lo, model.hi))

"""Particle beliefs, the generative-model interface, and the particle-filter step.

Beliefs are ordered, equally-weighted particle sets. The order is significant:
the likelihood of a propagated particle set pairs particles by index, so
permuting a set yields a different object, not a relabelling of the same one.
All densities travel in log space; ``-inf`` encodes zero density.
"""
from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import AllWeightsZero, MismatchedCardinality

Array = np.ndarray


def _as_particle_array(particles) -> Array:
    arr = np.array(particles, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("particles must form a non-empty (m, dim) array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("particles must have finite components")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ParticleBelief:
    """Ordered set of m particles, each with implicit weight 1/m.

    Instances compare by identity: two beliefs with equal particle arrays are
    still distinct beliefs (continuous beliefs never repeat by value).
    """

    particles: Array

    def __post_init__(self):
        object.__setattr__(self, "particles", _as_particle_array(self.particles))

    @property
    def m(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def mean(self) -> Array:
        return self.particles.mean(axis=0)


@dataclass(eq=False)
class PropagatedBelief:
    """Particle set after the transition step, before the observation update.

    ``horizon_depth`` records how many planning steps are covered below this
    set when it lives inside a search tree; it grows when the horizon gap is
    filled before reuse.
    """

    particles: Array
    horizon_depth: int = 0

    def __post_init__(self):
        self.particles = _as_particle_array(self.particles)

    @property
    def m(self) -> int:
        return self.particles.shape[0]

    def mean(self) -> Array:
        return self.particles.mean(axis=0)


@dataclass(frozen=True)
class DiscreteActionSpace:
    """Fixed tuple of actions, indexed in a stable order."""

    actions: Tuple[Array, ...]

    kind = "discrete"

    def __post_init__(self):
        object.__setattr__(
            self, "actions", tuple(np.asarray(a, dtype=float) for a in self.actions)
        )

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class ContinuousActionSpace:
    """Continuous action set described by a sampler."""

    sample: Callable[[np.random.Generator], Array]

    kind = "continuous"


class GenerativeModel(abc.ABC):
    """Generative POMDP model over particle beliefs.

    State arguments are ``(m, dim)`` arrays and implementations are expected to
    vectorize over the particle axis. ``reward`` is the expensive operation in
    this family of problems, so every call is counted in ``reward_calls``.
    """

    action_space: DiscreteActionSpace | ContinuousActionSpace

    def __init__(self):
        self.reward_calls = 0

    # -- transition model -------------------------------------------------
    @abc.abstractmethod
    def sample_transition(self, states: Array, action: Array, rng) -> Array:
        """Propagate each row of ``states`` through the transition kernel."""

    @abc.abstractmethod
    def transition_logdensity(self, states: Array, action: Array, next_states: Array) -> Array:
        """Row-wise log P_T(next_states[i] | states[i], action)."""

    def transition_mode(self, states: Array, action: Array) -> Array:
        """Noise-free mode of the transition kernel (used by reuse distances)."""
        raise NotImplementedError(f"{type(self).__name__} does not define a transition mode")

    def transition_logdensity_pairs(self, states: Array, action: Array, next_states: Array) -> Array:
        """Matrix of log P_T(next_states[i] | states[j], action), shape (len(next), len(states))."""
        out = np.empty((next_states.shape[0], states.shape[0]))
        for i in range(next_states.shape[0]):
            row = np.broadcast_to(next_states[i], states.shape)
            out[i] = self.transition_logdensity(states, action, row)
        return out

    # -- observation model ------------------------------------------------
    @abc.abstractmethod
    def sample_observation(self, state: Array, rng) -> Array:
        """Draw one observation from a single state (shape ``(dim,)``)."""

    @abc.abstractmethod
    def observation_logdensity(self, states: Array, observation: Array) -> Array:
        """log P_O(observation | states[i]) for each particle row."""

    # -- reward and termination -------------------------------------------
    def reward(self, belief, action, next_belief, observation=None, propagated=None) -> float:
        """Belief-dependent reward r(b, a, b').

        ``observation`` and ``propagated`` carry the step context that
        belief-entropy rewards need; simple models may ignore them.
        """
        self.reward_calls += 1
        return self._reward(belief, action, next_belief, observation, propagated)

    @abc.abstractmethod
    def _reward(self, belief, action, next_belief, observation, propagated) -> float:
        ...

    def is_terminal(self, belief: ParticleBelief) -> bool:
        return False


def resample(particles: Array, weights, m: int, rng) -> Array:
    """Systematic resampling of ``m`` draws; output rows follow draw order.

    Raises :class:`AllWeightsZero` when no weight is positive.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] != particles.shape[0]:
        raise ValueError("weights must be one per particle")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if not (total > 0) or not np.isfinite(total):
        raise AllWeightsZero("all resampling weights are zero")
    cum = np.cumsum(w)
    cum /= cum[-1]
    positions = (rng.random() + np.arange(m)) / m
    idx = np.searchsorted(cum, positions, side="right")
    return particles[np.minimum(idx, particles.shape[0] - 1)]


def pf_step(
    belief: ParticleBelief,
    action: Array,
    model: GenerativeModel,
    rng,
    observation: Optional[Array] = None,
    max_observation_retries: int = 10,
) -> Tuple[ParticleBelief, PropagatedBelief, Array, float]:
    """One particle-filter step ``(b, a) -> (b', b'^-, o, r)``.

    Every particle is propagated through the transition kernel; if no
    observation is supplied, one is drawn from a uniformly chosen propagated
    particle. Particles are reweighted by observation likelihood and
    systematically resampled back to m uniform-weight particles, and the
    reward is evaluated exactly once on the resulting step.

    When all observation weights vanish and the observation was sampled here,
    a fresh observation is drawn up to ``max_observation_retries`` times
    (reusing the same propagated particles) before :class:`AllWeightsZero`
    propagates to the caller.
    """
    states = belief.particles
    m = states.shape[0]
    propagated_states = model.sample_transition(states, action, rng)
    propagated = PropagatedBelief(propagated_states)

    attempts = 1 if observation is not None else max(1, max_observation_retries)
    obs = observation
    log_weights = None
    for attempt in range(attempts):
        if observation is None:
            j = int(rng.integers(m))
            obs = model.sample_observation(propagated.particles[j], rng)
        log_weights = np.asarray(model.observation_logdensity(propagated.particles, obs), dtype=float)
        shift = log_weights.max()
        if np.isfinite(shift):
            break
    else:
        raise AllWeightsZero("no particle carries observation likelihood")

    weights = np.exp(log_weights - log_weights.max())
    posterior = ParticleBelief(resample(propagated.particles, weights, m, rng))
    r = model.reward(belief, action, posterior, obs, propagated)
    return posterior, propagated, obs, float(r)


def propagated_log_likelihood(
    belief: ParticleBelief,
    action: Array,
    propagated: PropagatedBelief,
    model: GenerativeModel,
) -> float:
    """log P(b^- | b, a) = log(1/m) + sum_i log P_T(s_i^- | s_i, a).

    Particles are paired by index, which is why particle order is part of a
    belief's identity.
    """
    s = belief.particles
    sp = propagated.particles
    if s.shape[0] != sp.shape[0]:
        raise MismatchedCardinality(
            f"belief has {s.shape[0]} particles, propagated set has {sp.shape[0]}"
        )
    ld = np.asarray(model.transition_logdensity(s, action, sp), dtype=float)
    return float(ld.sum()) - math.log(s.shape[0])

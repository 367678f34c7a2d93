"""Shared test oracles and tree utilities.

Everything here is deliberately independent of the library's computation
paths: densities are recomputed with plain formulas, estimators with direct
sums in ordinary (non-log) arithmetic where the test values allow it.
"""
from __future__ import annotations

import math
import os
from typing import Dict, Hashable, List, Sequence, Tuple

import numpy as np

from irpft import (
    BeliefNode,
    ParticleBelief,
    PropagatedBelief,
    SuffixStep,
    TrajectoryRecord,
)

FULL_SCALE = os.environ.get("IRPFT_TEST_SCALE", "full") != "small"


def gauss_logpdf(x, mean, sigma) -> float:
    """Isotropic Gaussian log density, summed over components."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = x.size
    delta = x - mean
    return float(
        -0.5 * (delta @ delta) / sigma**2 - d * (0.5 * math.log(2 * math.pi) + math.log(sigma))
    )


def propagated_loglik_oracle(prev: np.ndarray, action, nxt: np.ndarray, sigma_t: float) -> float:
    """log[(1/m) * prod_i N(next_i; prev_i + a, sigma^2 I)] from first principles."""
    m = prev.shape[0]
    total = -math.log(m)
    for i in range(m):
        total += gauss_logpdf(nxt[i], prev[i] + action, sigma_t)
    return total


def mis_oracle(
    samples: Sequence[Tuple[object, float, float]],
    dists: Dict[Hashable, Tuple[int, object]],
    logq,
) -> float:
    """From-scratch balance-heuristic MIS in plain arithmetic.

    ``samples``: (point, f, log_p) triples. ``dists``: id -> (count, param).
    ``logq(param, point)`` evaluates one proposal's log density.
    """
    total = 0.0
    for point, f, log_p in samples:
        denom = 0.0
        for count, param in dists.values():
            denom += count * math.exp(logq(param, point))
        total += math.exp(log_p) / denom * f
    return total


def make_record(model, origin_belief, origin_action, horizon, rng, action_pool=None):
    """Simulate a trajectory with multinomial resampling; keep the draw indices.

    Returns ``(record, draw_indices)`` where ``draw_indices[t]`` are the
    propagated-particle indices selected for the posterior at step t. The
    indices make the resampling probability computable for full-chain oracles.
    """
    m = origin_belief.m
    steps: List[SuffixStep] = []
    rewards: List[float] = []
    draw_indices: List[np.ndarray] = []
    b, a = origin_belief, origin_action
    for t in range(horizon):
        prop = model.sample_transition(b.particles, a, rng)
        propagated = PropagatedBelief(prop)
        j = int(rng.integers(m))
        obs = model.sample_observation(prop[j], rng)
        logw = np.asarray(model.observation_logdensity(prop, obs), dtype=float)
        w = np.exp(logw - logw.max())
        w /= w.sum()
        idx = rng.choice(m, size=m, replace=True, p=w)
        posterior = ParticleBelief(prop[idx])
        r = model.reward(b, a, posterior, obs, propagated)
        next_a = None
        if t < horizon - 1:
            pool = action_pool if action_pool is not None else model.action_space.actions
            next_a = pool[int(rng.integers(len(pool)))]
        steps.append(SuffixStep(propagated, obs, posterior, next_a))
        rewards.append(float(r))
        draw_indices.append(idx)
        b, a = posterior, next_a
    record = TrajectoryRecord(
        origin_belief=origin_belief,
        origin_action=origin_action,
        suffix=steps,
        step_rewards=rewards,
        return_value=float(sum(rewards)),
        horizon=horizon,
    )
    return record, draw_indices


def chain_log_prob(
    belief: ParticleBelief,
    action,
    record: TrajectoryRecord,
    draw_indices,
    sigma_t: float,
    sigma_o: float,
    policy_logdensity: float = -1.3,
) -> float:
    """Full suffix chain log probability with every factor made explicit.

    Includes the first propagated-set likelihood, then for every step the
    observation evidence, the multinomial resampling probability of the
    recorded draws, a constant policy density per chosen action, and the
    next transition factor. All factors beyond the first are shared between
    any two origins of the same suffix, so differences of this quantity
    isolate the first-factor ratio.
    """
    m = belief.m
    total = propagated_loglik_oracle(
        belief.particles, action, record.suffix[0].propagated.particles, sigma_t
    )
    for t, step in enumerate(record.suffix):
        prop = step.propagated.particles
        obs_ld = np.array([gauss_logpdf(step.observation, prop[i], sigma_o) for i in range(m)])
        # observation evidence log[(1/m) sum_i P_O(o | s_i^-)]
        shift = obs_ld.max()
        total += shift + math.log(np.exp(obs_ld - shift).sum()) - math.log(m)
        # multinomial resampling probability of the recorded draw indices
        w = np.exp(obs_ld - shift)
        w /= w.sum()
        for i in draw_indices[t]:
            total += math.log(w[i])
        if step.action is not None:
            total += policy_logdensity
            nxt = record.suffix[t + 1].propagated.particles
            total += propagated_loglik_oracle(step.posterior.particles, step.action, nxt, sigma_t)
    return total


# -- tree utilities -------------------------------------------------------------

def tree_signature(node: BeliefNode, sig=None) -> list:
    """Exact serialization of counts, Q sums, rewards, and particle bytes."""
    if sig is None:
        sig = []
    sig.append(("b", node.visit_count, node.n_through, node.n_ended, node.belief.particles.tobytes()))
    for a in node.actions:
        sig.append(("a", a.index, a.visit_count, a.q_sum, a.q(), a.reused_children))
        for p in a.children:
            sig.append(("p", p.n_through, p.ret_sum, p.reused, p.belief.particles.tobytes()))
            for child, r in p.children:
                sig.append(("r", r))
                tree_signature(child, sig)
    return sig


def iter_belief_nodes(node: BeliefNode):
    yield node
    for a in node.actions:
        for p in a.children:
            for child, _ in p.children:
                yield from iter_belief_nodes(child)


def iter_action_nodes(node: BeliefNode):
    for belief_node in iter_belief_nodes(node):
        yield from belief_node.actions


def iter_propagated_nodes(node: BeliefNode):
    for anode in iter_action_nodes(node):
        yield from anode.children

"""Search-tree node types and planner configuration.

The tree alternates belief nodes, action nodes, and propagated-belief nodes.
Propagated nodes keep, besides the visitation count, the running sum of
trajectory returns measured from the node; that sum is what the reuse
machinery converts into adjusted and extended returns without re-walking
subtrees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .beliefs import ParticleBelief, PropagatedBelief
from .errors import ConfigError
from .mis import MisAccumulator

Array = np.ndarray


@dataclass
class PlannerConfig:
    """Knobs shared by the baseline planner and the reuse planner.

    ``k_action``/``alpha_action`` and ``k_obs``/``alpha_obs`` are the double
    progressive widening parameters for action and posterior branching;
    ``n_min`` is the visitation-count threshold for admitting reuse candidates.
    """

    n_iterations: int = 1000
    d_max: int = 10
    gamma: float = 1.0
    k_action: float = 1e9
    alpha_action: float = 0.5
    k_obs: float = 4.0
    alpha_obs: float = 0.1
    c_ucb: float = 1.0
    m: int = 20
    n_min: int = 2
    rollout_policy: str = "random"
    obs_retries: int = 10
    # discard reuse candidates whose per-particle log likelihood ratio
    # (new origin vs recorded origin) falls below -reuse_weight_floor;
    # inf keeps every reachable candidate (near-zero weights cannot bias
    # the estimate, they only absorb budget)
    reuse_weight_floor: float = math.inf

    def __post_init__(self):
        positive = {
            "n_iterations": self.n_iterations,
            "gamma": self.gamma,
            "k_action": self.k_action,
            "alpha_action": self.alpha_action,
            "k_obs": self.k_obs,
            "alpha_obs": self.alpha_obs,
            "c_ucb": self.c_ucb,
            "m": self.m,
            "obs_retries": self.obs_retries,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.d_max < 0:
            raise ConfigError(f"d_max must be nonnegative, got {self.d_max}")
        if self.n_min < 0:
            raise ConfigError(f"n_min must be nonnegative, got {self.n_min}")
        if not self.reuse_weight_floor > 0:
            raise ConfigError("reuse_weight_floor must be positive (use inf to disable)")
        if self.gamma > 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        for name, value in (("alpha_action", self.alpha_action), ("alpha_obs", self.alpha_obs)):
            if not 0 < value < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")


class BeliefNode:
    """Posterior-belief node. ``n_ended`` counts trajectories whose in-tree
    path stopped here (their continuation lives in an off-tree rollout)."""

    __slots__ = ("belief", "observation", "visit_count", "n_through", "n_ended", "actions")

    def __init__(self, belief: ParticleBelief, observation: Optional[Array] = None):
        self.belief = belief
        self.observation = observation
        self.visit_count = 0  # N(b): sum of child action counts
        self.n_through = 0
        self.n_ended = 0
        self.actions: List[ActionNode] = []

    def __repr__(self):
        return f"BeliefNode(N={self.visit_count}, actions={len(self.actions)})"


class ActionNode:
    """Action edge under a belief node.

    Q is the running mean of returns until the node owns reused children, at
    which point a :class:`MisAccumulator` takes over.
    """

    __slots__ = (
        "action",
        "index",
        "visit_count",
        "q_sum",
        "children",
        "reused_children",
        "reused_visits",
        "mis",
        "entry_handles",
    )

    def __init__(self, action: Array, index: int):
        self.action = action
        self.index = index
        self.visit_count = 0  # N(ba)
        self.q_sum = 0.0
        self.children: List[PropagatedNode] = []
        self.reused_children = 0
        self.reused_visits = 0  # trajectories carried by reused children
        self.mis: Optional[MisAccumulator] = None
        self.entry_handles: dict = {}

    def q(self) -> float:
        if self.mis is not None:
            return self.mis.mis_estimate()
        if self.visit_count == 0:
            return 0.0
        return self.q_sum / self.visit_count

    def __repr__(self):
        return f"ActionNode(i={self.index}, N={self.visit_count}, C={len(self.children)})"


class PropagatedNode:
    """Propagated-belief node; child tuples are ``(posterior node, reward)``.

    ``ret_sum`` is the sum over trajectories through this node of the return
    measured from here. For reused nodes ``origin_belief``/``origin_action``
    identify the distribution the node was originally sampled from.
    """

    __slots__ = (
        "belief",
        "children",
        "n_through",
        "ret_sum",
        "reused",
        "origin_belief",
        "origin_action",
        "origin_key",
    )

    def __init__(self, belief: PropagatedBelief):
        self.belief = belief
        self.children: List[Tuple[BeliefNode, float]] = []
        self.n_through = 0
        self.ret_sum = 0.0
        self.reused = False
        self.origin_belief: Optional[ParticleBelief] = None
        self.origin_action: Optional[Array] = None
        self.origin_key = None

    @property
    def horizon_depth(self) -> int:
        return self.belief.horizon_depth

    @horizon_depth.setter
    def horizon_depth(self, value: int) -> None:
        self.belief.horizon_depth = value

    def __repr__(self):
        return (
            f"PropagatedNode(N={self.n_through}, C={len(self.children)}, "
            f"reused={self.reused}, h={self.horizon_depth})"
        )

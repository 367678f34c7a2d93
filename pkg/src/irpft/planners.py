"""Belief-tree planners: the PFT-DPW baseline and its trajectory-reuse variant.

Both planners run the same simulate core (UCB action selection with double
progressive widening over particle beliefs). The reuse variant adds, at the
root only, the option of attaching a high-visitation propagated node retained
from the previous planning session instead of expanding a fresh child: the
node's horizon gap is filled with rollout layers, its first-step rewards are
re-evaluated for the current root, and the action value switches to a
balance-heuristic MIS estimate over all attached trajectory sources.

With an empty candidate set the reuse branch is never taken and both planners
execute the same instruction stream, so equal seeds give identical trees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .beliefs import (
    GenerativeModel,
    ParticleBelief,
    pf_step,
    propagated_log_likelihood,
)
from .errors import AllWeightsZero, ConfigError
from .experience import Dataset, ReuseCandidate, get_reuse_candidate, update_reuse_candidates
from .mis import MisAccumulator
from .tree import ActionNode, BeliefNode, PlannerConfig, PropagatedNode

Array = np.ndarray
RolloutPolicy = Callable[[ParticleBelief, np.random.Generator], Array]


def make_rollout_policy(policy_id: str, model: GenerativeModel) -> RolloutPolicy:
    """Resolve a rollout policy id against a model."""
    if policy_id == "random":
        space = model.action_space
        if space.kind == "discrete":
            actions = space.actions

            def random_policy(belief, rng):
                return actions[int(rng.integers(len(actions)))]

            return random_policy
        return lambda belief, rng: space.sample(rng)
    if policy_id == "greedy":
        greedy = getattr(model, "greedy_action", None)
        if greedy is None:
            raise ConfigError(f"{type(model).__name__} does not provide a greedy action")
        return lambda belief, rng: greedy(belief)
    raise ConfigError(f"unknown rollout policy {policy_id!r}")


def rollout(
    belief: ParticleBelief,
    depth: int,
    cfg: PlannerConfig,
    model: GenerativeModel,
    rng,
    policy: Optional[RolloutPolicy] = None,
) -> float:
    """Follow the rollout policy for ``depth`` steps, discounting rewards."""
    if policy is None:
        policy = make_rollout_policy(cfg.rollout_policy, model)
    total, disc, b = 0.0, 1.0, belief
    for _ in range(depth):
        if model.is_terminal(b):
            break
        action = policy(b, rng)
        try:
            b, _, _, r = pf_step(
                b, action, model, rng, max_observation_retries=cfg.obs_retries
            )
        except AllWeightsZero:
            break
        total += disc * r
        disc *= cfg.gamma
    return total


@dataclass
class ReuseControls:
    """Reuse gating state for one (belief, action) pair.

    Counts are in trajectories: ``reused_count`` is the visitation mass
    carried by reused children, ``total_count`` is N(b, a).
    """

    is_root: bool
    reused_count: int
    total_count: int


def should_reuse(controls: ReuseControls, data: Optional[Dataset]) -> bool:
    """Reuse only at the root, only while reused trajectories stay in balance.

    True iff the node is the root, reused trajectories do not exceed half of
    the pair's total, and the candidate index is nonempty. The balance keeps
    fresh samples from the root's own distribution flowing in.
    """
    if not controls.is_root:
        return False
    if controls.reused_count > controls.total_count / 2:
        return False
    return bool(data is not None and data.candidates)


@dataclass
class FillStats:
    """Telemetry for one horizon-gap fill."""

    nodes_added: int = 0  # new propagated/posterior layer pairs
    reward_calls: int = 0
    extension_sum: float = 0.0  # summed per-trajectory extension values

    def merge(self, other: "FillStats") -> None:
        self.nodes_added += other.nodes_added
        self.reward_calls += other.reward_calls
        self.extension_sum += other.extension_sum


def fill_horizon(
    subtree,
    delta_d: int,
    cfg: PlannerConfig,
    model: GenerativeModel,
    rng,
    policy: Optional[RolloutPolicy] = None,
) -> FillStats:
    """Extend a retained subtree's horizon by ``delta_d`` rollout layers.

    Every posterior where at least one recorded trajectory ended receives a
    chain of ``delta_d`` new layers (one pf_step and one reward each, nodes
    initialized with N=1 and Q=r), so a subtree built from n simulations gains
    at most ``n * delta_d`` layers. Return sums and Q values along the subtree
    are patched bottom-up with the extension values, and the summed
    per-trajectory extension is reported for the extended-return bookkeeping.
    """
    pnode: PropagatedNode = subtree.node if isinstance(subtree, ReuseCandidate) else subtree
    stats = FillStats()
    if delta_d <= 0:
        return stats
    if policy is None:
        policy = make_rollout_policy(cfg.rollout_policy, model)
    d_prev = pnode.horizon_depth
    ext = 0.0
    for bnode, _ in pnode.children:
        ext += cfg.gamma * _fill_posterior(
            bnode, 1, delta_d, d_prev, cfg, model, rng, policy, stats
        )
    pnode.ret_sum += ext
    pnode.horizon_depth += delta_d
    stats.extension_sum = ext
    return stats


def _fill_posterior(
    bnode: BeliefNode,
    pos: int,
    delta_d: int,
    d_prev: int,
    cfg: PlannerConfig,
    model: GenerativeModel,
    rng,
    policy: RolloutPolicy,
    stats: FillStats,
) -> float:
    """Recursive fill below one posterior; returns the extension measured here.

    ``pos`` is the number of rewards consumed between the subtree root and
    this node, so extension rewards (semantically at depths d_prev..) carry a
    ``gamma**(d_prev - pos)`` discount in this node's frame.
    """
    existing_actions = list(bnode.actions)
    ext = 0.0
    if bnode.n_ended > 0 and not model.is_terminal(bnode.belief):
        chain_raw = _grow_chain(bnode, delta_d, cfg, model, rng, policy, stats)
        ext += bnode.n_ended * cfg.gamma ** (d_prev - pos) * chain_raw
    for anode in existing_actions:
        a_ext = 0.0
        for pnode in anode.children:
            p_ext = 0.0
            for child, _ in pnode.children:
                p_ext += cfg.gamma * _fill_posterior(
                    child, pos + 1, delta_d, d_prev, cfg, model, rng, policy, stats
                )
            pnode.ret_sum += p_ext
            pnode.horizon_depth += delta_d
            a_ext += p_ext
        anode.q_sum += a_ext
        ext += a_ext
    return ext


def _grow_chain(
    bnode: BeliefNode,
    delta_d: int,
    cfg: PlannerConfig,
    model: GenerativeModel,
    rng,
    policy: RolloutPolicy,
    stats: FillStats,
) -> float:
    """Hang a default-policy chain of ``delta_d`` layers under a posterior."""
    raw, disc = 0.0, 1.0
    current = bnode
    for step in range(delta_d):
        if model.is_terminal(current.belief):
            break
        action = policy(current.belief, rng)
        try:
            posterior, propagated, obs, r = pf_step(
                current.belief, action, model, rng, max_observation_retries=cfg.obs_retries
            )
        except AllWeightsZero:
            break
        propagated.horizon_depth = delta_d - step
        anode = ActionNode(action, index=len(current.actions))
        anode.visit_count = 1
        anode.q_sum = r
        pnode = PropagatedNode(propagated)
        pnode.n_through = 1
        pnode.ret_sum = r
        child = BeliefNode(posterior, obs)
        child.n_through = 1
        pnode.children.append((child, r))
        anode.children.append(pnode)
        current.actions.append(anode)
        current.visit_count += 1
        stats.nodes_added += 1
        stats.reward_calls += 1
        raw += disc * r
        disc *= cfg.gamma
        current = child
    return raw


@dataclass
class PlanResult:
    """Outcome of one planning session."""

    action: Array
    action_node: Optional[ActionNode]
    root: BeliefNode
    simulate_calls: int
    budget_used: int
    fill_stats: FillStats


class _Session:
    """Mutable state of one planning session (single-threaded by design)."""

    def __init__(self, cfg: PlannerConfig, model: GenerativeModel, rng, dataset):
        self.cfg = cfg
        self.model = model
        self.rng = rng
        self.dataset = dataset
        self.root: BeliefNode = None  # set by plan_session
        self.counter = 0  # budget units; a reuse advances it by N(candidate)
        self.policy = make_rollout_policy(cfg.rollout_policy, model)
        self.targets: dict = {}
        self.fill_stats = FillStats()

    # -- action progressive widening ---------------------------------------
    def _action_prog_widen(self, node: BeliefNode) -> ActionNode:
        cfg = self.cfg
        space = self.model.action_space
        n = len(node.actions)
        allow = n == 0 or (n + 1) <= cfg.k_action * (node.visit_count + 1) ** cfg.alpha_action
        if space.kind == "discrete":
            if n < len(space.actions) and allow:
                node.actions.append(ActionNode(space.actions[n], n))
        elif allow:
            node.actions.append(ActionNode(space.sample(self.rng), n))

        log_n = math.log(max(node.visit_count, 1))
        best, best_ucb = None, -math.inf
        for anode in node.actions:
            if anode.visit_count == 0:
                return anode  # untried actions first, in index order
            ucb = anode.q() + cfg.c_ucb * math.sqrt(log_n / anode.visit_count)
            if ucb > best_ucb:
                best, best_ucb = anode, ucb
        return best

    # -- expansion -----------------------------------------------------------
    def _expand(self, node: BeliefNode, anode: ActionNode, depth: int):
        try:
            posterior, propagated, obs, r = pf_step(
                node.belief,
                anode.action,
                self.model,
                self.rng,
                max_observation_retries=self.cfg.obs_retries,
            )
        except AllWeightsZero:
            return None  # dead branch: every retried observation had zero likelihood
        propagated.horizon_depth = depth
        pnode = PropagatedNode(propagated)
        pnode.n_through = 1
        bnode = BeliefNode(posterior, obs)
        bnode.n_through = 1
        bnode.n_ended = 1  # this trajectory continues off-tree via the rollout
        pnode.children.append((bnode, r))
        anode.children.append(pnode)
        total = r + self.cfg.gamma * rollout(
            posterior, depth - 1, self.cfg, self.model, self.rng, self.policy
        )
        pnode.ret_sum = total
        return pnode, total

    # -- MIS bookkeeping -------------------------------------------------------
    def _target_for(self, anode: ActionNode):
        target = self.targets.get(anode)
        if target is None:
            root_belief, action, model = self.root.belief, anode.action, self.model

            def target(points):
                return np.array(
                    [propagated_log_likelihood(root_belief, action, p, model) for p in points]
                )

            self.targets[anode] = target
        return target

    def _switch_to_mis(self, anode: ActionNode) -> None:
        """Move an action node from running-mean Q to the MIS estimator,
        backfilling its fresh children as target-distribution samples."""
        target = self._target_for(anode)
        acc = MisAccumulator()
        for pnode in anode.children:
            log_p = float(target([pnode.belief])[0])
            handle = acc.add_group(
                "self",
                pnode.belief,
                f_sum=pnode.ret_sum,
                count=pnode.n_through,
                log_target=log_p,
                proposal_logdensity=target,
                is_target=True,
            )
            anode.entry_handles[pnode] = handle
        anode.mis = acc

    def _mis_record(self, anode: ActionNode, pnode: PropagatedNode, total: float) -> None:
        handle = anode.entry_handles.get(pnode)
        if handle is None:
            target = self._target_for(anode)
            log_p = float(target([pnode.belief])[0])
            handle = anode.mis.add_group(
                "self",
                pnode.belief,
                f_sum=total,
                count=1,
                log_target=log_p,
                proposal_logdensity=target,
                is_target=True,
            )
            anode.entry_handles[pnode] = handle
        else:
            anode.mis.extend_group(handle, f_delta=total, count_delta=1)

    # -- root-level reuse -------------------------------------------------------
    def _reuse_step(self, node: BeliefNode, anode: ActionNode, depth: int) -> Optional[float]:
        cand = get_reuse_candidate(node.belief, anode.action, self.dataset, self.model)
        pnode = cand.node
        log_p = propagated_log_likelihood(node.belief, anode.action, pnode.belief, self.model)
        if not np.isfinite(log_p):
            return None  # unreachable candidate: discard it, expand fresh instead
        log_q = propagated_log_likelihood(
            cand.origin_belief, cand.origin_action, pnode.belief, self.model
        )
        if (log_p - log_q) / pnode.belief.m < -self.cfg.reuse_weight_floor:
            return None  # numerically negligible weight: reuse would only dilute Q

        if anode.mis is None:
            self._switch_to_mis(anode)

        gap = depth - pnode.horizon_depth
        stats = fill_horizon(pnode, gap, self.cfg, self.model, self.rng, self.policy)
        self.fill_stats.merge(stats)

        # First-step rewards are re-evaluated against the current root so the
        # stored returns become adjusted returns; deeper rewards are shared.
        delta_first = 0.0
        for i, (child, r_old) in enumerate(pnode.children):
            r_new = self.model.reward(
                node.belief, anode.action, child.belief, child.observation, pnode.belief
            )
            pnode.children[i] = (child, r_new)
            delta_first += child.n_through * (r_new - r_old)
        pnode.ret_sum += delta_first

        count = pnode.n_through
        pnode.reused = True
        pnode.origin_belief = cand.origin_belief
        pnode.origin_action = cand.origin_action
        pnode.origin_key = cand.origin_key
        anode.children.append(pnode)
        anode.reused_children += 1
        anode.reused_visits += count

        origin_b, origin_a, model = cand.origin_belief, cand.origin_action, self.model

        def evaluator(points):
            return np.array(
                [propagated_log_likelihood(origin_b, origin_a, p, model) for p in points]
            )

        handle = anode.mis.add_group(
            cand.origin_key,
            pnode.belief,
            f_sum=pnode.ret_sum,
            count=count,
            log_target=log_p,
            proposal_logdensity=evaluator,
        )
        anode.entry_handles[pnode] = handle

        node.visit_count += count
        anode.visit_count += count
        anode.q_sum += pnode.ret_sum
        self.counter += count
        return pnode.ret_sum / count

    # -- simulate -------------------------------------------------------------
    def _simulate(self, node: BeliefNode, depth: int) -> float:
        cfg = self.cfg
        if depth == 0 or self.model.is_terminal(node.belief):
            node.n_ended += 1
            return 0.0
        anode = self._action_prog_widen(node)

        # Root-level reuse runs before the widening decision: the balance rule
        # (reused trajectory mass at most half of the pair's total) is what
        # keeps fresh samples from the root's own distribution flowing in.
        # At least one fresh child must exist first so the action's value
        # never rests solely on foreign samples with negligible weight.
        if (
            self.dataset is not None
            and node is self.root
            and len(anode.children) > anode.reused_children
        ):
            controls = ReuseControls(True, anode.reused_visits, anode.visit_count)
            if should_reuse(controls, self.dataset):
                reused = self._reuse_step(node, anode, depth)
                if reused is not None:
                    return reused

        # The widening cap governs children sampled from this node's own
        # distribution; reused attachments sit outside it (they carry their
        # own sample mass and enter the Q estimate through MIS weights).
        children = anode.children
        fresh = len(children) - anode.reused_children
        expand = (
            not children
            or (fresh + 1) <= cfg.k_obs * (anode.visit_count + 1) ** cfg.alpha_obs
        )
        if expand:
            out = self._expand(node, anode, depth)
            if out is None:
                return 0.0
            pnode, total = out
        else:
            pnode = children[int(self.rng.integers(len(children)))]
            child, r = pnode.children[int(self.rng.integers(len(pnode.children)))]
            pnode.n_through += 1
            child.n_through += 1
            if pnode.reused:
                anode.reused_visits += 1
            total = r + cfg.gamma * self._simulate(child, depth - 1)
            pnode.ret_sum += total

        node.visit_count += 1
        anode.visit_count += 1
        anode.q_sum += total
        if anode.mis is not None:
            self._mis_record(anode, pnode, total)
        return total


def plan_session(
    belief: ParticleBelief,
    cfg: PlannerConfig,
    model: GenerativeModel,
    rng,
    dataset: Optional[Dataset] = None,
) -> PlanResult:
    """Run one planning session; pass a dataset to enable root-level reuse.

    The budget counter advances by one per simulation and by the candidate's
    visitation count per reuse, so sessions with reuse issue fewer fresh
    simulations for the same nominal iteration count.
    """
    sess = _Session(cfg, model, rng, dataset)
    root = BeliefNode(belief)
    sess.root = root
    calls = 0
    while sess.counter < cfg.n_iterations:
        sess._simulate(root, cfg.d_max)
        sess.counter += 1
        calls += 1

    best = None
    for anode in root.actions:  # strict > keeps the lowest index on ties
        if best is None or anode.q() > best.q():
            best = anode
    if best is None:
        space = model.action_space
        action = space.actions[0] if space.kind == "discrete" else space.sample(rng)
        return PlanResult(action, None, root, calls, sess.counter, sess.fill_stats)
    return PlanResult(best.action, best, root, calls, sess.counter, sess.fill_stats)


def pft_plan(belief: ParticleBelief, cfg: PlannerConfig, model: GenerativeModel, rng) -> Array:
    """Baseline planner: returns the argmax-Q root action."""
    return plan_session(belief, cfg, model, rng, dataset=None).action


def irpft_plan(
    belief: ParticleBelief,
    data: Dataset,
    cfg: PlannerConfig,
    model: GenerativeModel,
    rng,
) -> Array:
    """Reuse planner: identical to the baseline when ``data`` has no candidates."""
    return plan_session(belief, cfg, model, rng, dataset=data).action


@dataclass
class EpisodeStep:
    """Executed step with its per-session planning measurements."""

    action: Array
    observation: Array
    reward: float
    plan_seconds: float
    plan_reward_calls: int
    plan_simulate_calls: int
    budget_used: int
    belief: ParticleBelief


def solve_loop(
    belief: ParticleBelief,
    data: Optional[Dataset],
    cfg: PlannerConfig,
    model: GenerativeModel,
    env,
    rng,
    max_steps: int = 40,
) -> List[EpisodeStep]:
    """Plan, act, observe, and refresh reuse candidates until termination.

    ``env`` provides the real observations via ``env.step(action)``. After
    each executed action the candidate index is rebuilt from the grandchildren
    of the executed action in the just-used tree, evicting candidates older
    than one session.
    """
    import time

    steps: List[EpisodeStep] = []
    b = belief
    for _ in range(max_steps):
        if model.is_terminal(b):
            break
        rc0 = model.reward_calls
        t0 = time.perf_counter()
        result = plan_session(b, cfg, model, rng, dataset=data)
        dt = time.perf_counter() - t0
        plan_rc = model.reward_calls - rc0

        obs = env.step(result.action)
        b_next, _, _, r = pf_step(b, result.action, model, rng, observation=obs)

        if data is not None:
            data.candidates.clear()
            if result.action_node is not None:
                update_reuse_candidates(result.root, result.action_node, data, cfg.n_min)

        steps.append(
            EpisodeStep(
                action=result.action,
                observation=obs,
                reward=r,
                plan_seconds=dt,
                plan_reward_calls=plan_rc,
                plan_simulate_calls=result.simulate_calls,
                budget_used=result.budget_used,
                belief=b_next,
            )
        )
        b = b_next
    return steps

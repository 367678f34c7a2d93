"""Trajectory dataset, suffix reuse weights, and experience-based Q estimation.

A stored trajectory is reusable from a new (belief, action) pair because the
likelihood ratio of its suffix collapses to the ratio of first propagated-
belief likelihoods: every later factor (observations, resampling, policy,
downstream transitions) is shared between numerator and denominator. Returns
only need their first reward replaced, so per-step rewards are kept verbatim.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from .beliefs import (
    GenerativeModel,
    ParticleBelief,
    PropagatedBelief,
    propagated_log_likelihood,
)
from .errors import (
    AllWeightsZero,
    EmptyDataset,
    EmptyTrajectory,
    MismatchedCardinality,
    NoCandidates,
)
from .mis import MisAccumulator
from .tree import ActionNode, BeliefNode, PropagatedNode

Array = np.ndarray


@dataclass(eq=False)
class SuffixStep:
    """One suffix element: propagated set, observation, posterior, next action.

    The final step of a trajectory carries no action.
    """

    propagated: PropagatedBelief
    observation: Array
    posterior: ParticleBelief
    action: Optional[Array] = None


@dataclass(eq=False)
class TrajectoryRecord:
    """One executed or simulated trajectory with its reusable suffix."""

    origin_belief: ParticleBelief
    origin_action: Array
    suffix: List[SuffixStep]
    step_rewards: List[float]
    return_value: float
    horizon: int

    def __post_init__(self):
        if len(self.suffix) != self.horizon:
            raise ValueError(
                f"suffix length {len(self.suffix)} != horizon {self.horizon}"
            )
        if len(self.step_rewards) != self.horizon:
            raise ValueError("one reward per suffix step is required")
        if self.horizon == 0:
            raise EmptyTrajectory("trajectory must cover at least one step")
        if self.suffix[-1].action is not None:
            raise ValueError("final suffix step must not carry an action")
        if abs(sum(self.step_rewards) - self.return_value) > 1e-9:
            raise ValueError("return_value must equal the sum of step rewards")


def adjusted_return(record: TrajectoryRecord, new_first_reward: float) -> float:
    """Return with the first reward swapped for the new origin's reward."""
    if not record.step_rewards:
        raise EmptyTrajectory("record has no step rewards")
    return record.return_value - record.step_rewards[0] + new_first_reward


def suffix_log_weight(
    belief: ParticleBelief,
    action: Array,
    record: TrajectoryRecord,
    model: GenerativeModel,
) -> float:
    """log of P(suffix | b, a) / P(suffix | origin), reduced to first factors.

    All shared chain factors cancel, leaving the log-ratio of the first
    propagated-belief likelihoods.
    """
    if belief.m != record.origin_belief.m:
        raise MismatchedCardinality(
            f"query belief has {belief.m} particles, record origin has {record.origin_belief.m}"
        )
    first = record.suffix[0].propagated
    return propagated_log_likelihood(belief, action, first, model) - propagated_log_likelihood(
        record.origin_belief, record.origin_action, first, model
    )


def q_simple_reuse(records: Sequence[TrajectoryRecord]) -> float:
    """Mean return over trajectories that already start at the queried pair."""
    if not records:
        raise EmptyDataset("no trajectories share the queried origin")
    return float(np.mean([r.return_value for r in records]))


@dataclass(eq=False)
class ReuseCandidate:
    """A high-visitation propagated node retained from the previous session."""

    propagated: PropagatedBelief
    node: PropagatedNode
    visit_count: int
    origin_belief: ParticleBelief
    origin_action: Array
    origin_key: Hashable
    horizon_depth: int


class Dataset:
    """Experience grouped by origin identity plus the reuse-candidate index.

    Grouping keys are object identities of the origin (belief, action) pair;
    value-equal beliefs are still distinct origins.
    """

    def __init__(self):
        self._groups: Dict[Hashable, List[TrajectoryRecord]] = {}
        self.candidates: List[ReuseCandidate] = []

    def add_record(self, record: TrajectoryRecord, origin_key: Optional[Hashable] = None) -> None:
        key = origin_key if origin_key is not None else (
            id(record.origin_belief),
            id(record.origin_action),
        )
        self._groups.setdefault(key, []).append(record)

    @property
    def records(self) -> List[TrajectoryRecord]:
        return [r for group in self._groups.values() for r in group]

    @property
    def groups(self) -> Dict[Hashable, List[TrajectoryRecord]]:
        return self._groups

    def __len__(self) -> int:
        return sum(len(g) for g in self._groups.values())


def q_mis_experience(
    belief: ParticleBelief,
    action: Array,
    data: Dataset,
    model: GenerativeModel,
) -> float:
    """Balance-heuristic MIS estimate of Q(b, a) from stored trajectories.

    Each record is re-weighted by the likelihood of its first propagated set
    under (b, a) against the mixture of its possible origins, and its return
    has the first reward replaced by r(b, a, first posterior).
    """
    if len(data) == 0:
        raise EmptyDataset("dataset holds no trajectories")

    acc = MisAccumulator()
    any_reachable = False
    for key, group in data.groups.items():
        origin_b = group[0].origin_belief
        origin_a = group[0].origin_action

        def evaluator(points, _b=origin_b, _a=origin_a):
            return np.array(
                [propagated_log_likelihood(_b, _a, p, model) for p in points]
            )

        batch = []
        for rec in group:
            first = rec.suffix[0]
            log_p = propagated_log_likelihood(belief, action, first.propagated, model)
            if np.isfinite(log_p):
                any_reachable = True
            new_first = model.reward(
                belief, action, first.posterior, first.observation, first.propagated
            )
            batch.append((first.propagated, adjusted_return(rec, new_first), log_p))
        acc.add_batch(key, batch, proposal_logdensity=evaluator)

    if not any_reachable:
        raise AllWeightsZero("every stored suffix is unreachable from (b, a)")
    return acc.mis_estimate()


def update_reuse_candidates(
    prev_tree: BeliefNode,
    executed_action,
    data: Dataset,
    n_min: int,
) -> None:
    """Admit grandchild propagated nodes of the executed action as candidates.

    A node qualifies when its visitation count exceeds ``n_min`` strictly and
    it is not itself a reused attachment from an earlier session.
    """
    if isinstance(executed_action, ActionNode):
        action_node = executed_action if executed_action in prev_tree.actions else None
    else:
        action_node = next(
            (a for a in prev_tree.actions if np.array_equal(a.action, executed_action)),
            None,
        )
    if action_node is None:
        return
    for pnode in action_node.children:
        for posterior, _ in pnode.children:
            for anode in posterior.actions:
                origin_key = (id(posterior), id(anode))
                for grandchild in anode.children:
                    if grandchild.reused:
                        continue
                    if grandchild.n_through > n_min:
                        data.candidates.append(
                            ReuseCandidate(
                                propagated=grandchild.belief,
                                node=grandchild,
                                visit_count=grandchild.n_through,
                                origin_belief=posterior.belief,
                                origin_action=anode.action,
                                origin_key=origin_key,
                                horizon_depth=grandchild.horizon_depth,
                            )
                        )


def get_reuse_candidate(
    belief: ParticleBelief,
    action: Array,
    data: Dataset,
    model: GenerativeModel,
    distance_fn: Optional[Callable[[ReuseCandidate, ParticleBelief, Array], float]] = None,
) -> ReuseCandidate:
    """Pop the candidate whose propagated mean is closest to the query's mode.

    The default distance propagates the query belief through the noise-free
    transition mode (O(m)) and compares means; pass ``distance_fn`` to replace
    the heuristic.
    """
    if not data.candidates:
        raise NoCandidates("candidate index is empty")
    if distance_fn is None:
        mode_mean = model.transition_mode(belief.particles, action).mean(axis=0)

        def distance_fn(cand, _b, _a):
            delta = cand.propagated.mean() - mode_mean
            return float(delta @ delta)

    best_idx = 0
    best = distance_fn(data.candidates[0], belief, action)
    for i in range(1, len(data.candidates)):
        d = distance_fn(data.candidates[i], belief, action)
        if d < best:
            best, best_idx = d, i
    return data.candidates.pop(best_idx)


# -- export / import ----------------------------------------------------------

_EXPORT_SCHEMA = "irpft-trajectories/1"


def export_records(records: Sequence[TrajectoryRecord], path) -> None:
    """Write one trajectory per line: origin summary plus full particle detail.

    Summary fields (origin mean, action, per-step rewards, return, horizon)
    support offline analysis; the ``detail`` payload makes the round trip
    exact so imported records remain usable for MIS reweighting.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": _EXPORT_SCHEMA}) + "\n")
        for rec in records:
            row = {
                "origin_mean": rec.origin_belief.mean().tolist(),
                "action": np.asarray(rec.origin_action).tolist(),
                "step_rewards": [float(r) for r in rec.step_rewards],
                "return": rec.return_value,
                "horizon": rec.horizon,
                "detail": {
                    "origin_particles": rec.origin_belief.particles.tolist(),
                    "suffix": [
                        {
                            "propagated": s.propagated.particles.tolist(),
                            "observation": np.asarray(s.observation).tolist(),
                            "posterior": s.posterior.particles.tolist(),
                            "action": None if s.action is None else np.asarray(s.action).tolist(),
                        }
                        for s in rec.suffix
                    ],
                },
            }
            fh.write(json.dumps(row) + "\n")


def import_records(path) -> List[TrajectoryRecord]:
    """Read trajectories written by :func:`export_records`."""
    records: List[TrajectoryRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("schema") != _EXPORT_SCHEMA:
            raise ValueError(f"unsupported trajectory schema: {header.get('schema')!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            detail = row["detail"]
            suffix = [
                SuffixStep(
                    propagated=PropagatedBelief(np.array(s["propagated"])),
                    observation=np.array(s["observation"]),
                    posterior=ParticleBelief(np.array(s["posterior"])),
                    action=None if s["action"] is None else np.array(s["action"]),
                )
                for s in detail["suffix"]
            ]
            records.append(
                TrajectoryRecord(
                    origin_belief=ParticleBelief(np.array(detail["origin_particles"])),
                    origin_action=np.array(row["action"]),
                    suffix=suffix,
                    step_rewards=[float(r) for r in row["step_rewards"]],
                    return_value=float(row["return"]),
                    horizon=int(row["horizon"]),
                )
            )
    return records

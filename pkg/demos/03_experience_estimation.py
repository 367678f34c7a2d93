"""Estimating Q(b, a) from stored trajectories without planning.

Trajectories recorded from other (belief, action) origins are re-attached to a
new query pair: their suffixes keep their likelihood under the new origin
(everything past the first propagated set cancels in the ratio), their first
reward is re-evaluated, and the balance heuristic mixes the origins. Records
round-trip through the line-delimited export format on the way.
"""
import tempfile
from pathlib import Path

import numpy as np

from irpft import (
    Dataset,
    ParticleBelief,
    export_records,
    import_records,
    pf_step,
    q_mis_experience,
    q_simple_reuse,
    suffix_log_weight,
)
from irpft.experience import SuffixStep, TrajectoryRecord
from irpft.toymodels import LinearGaussianModel

rng = np.random.default_rng(3)
model = LinearGaussianModel(
    dim=1,
    sigma_t=0.5,
    sigma_o=0.6,
    actions=[np.array([-0.5]), np.array([0.5])],
    reward_fn=lambda b, a, bn, o, p: float(bn.mean()[0]),
)


def record_trajectory(origin_belief, origin_action, horizon):
    steps, rewards = [], []
    b, a = origin_belief, origin_action
    for t in range(horizon):
        posterior, propagated, obs, r = pf_step(b, a, model, rng)
        next_a = model.action_space.actions[int(rng.integers(2))] if t < horizon - 1 else None
        steps.append(SuffixStep(propagated, obs, posterior, next_a))
        rewards.append(r)
        b, a = posterior, next_a
    return TrajectoryRecord(origin_belief, origin_action, steps, rewards, sum(rewards), horizon)


# three origin distributions, a few trajectories each
records = []
for g in range(3):
    origin = ParticleBelief(rng.normal(0.4 * g, 1.0, size=(6, 1)))
    action = model.action_space.actions[g % 2]
    records += [record_trajectory(origin, action, 3) for _ in range(3)]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "trajectories.jsonl"
    export_records(records, path)
    loaded = import_records(path)
print(f"exported and re-imported {len(loaded)} trajectories")

query_b = ParticleBelief(rng.normal(0.2, 1.0, size=(6, 1)))
query_a = model.action_space.actions[1]

data = Dataset()
for rec in loaded:
    data.add_record(rec)

print("\nper-record suffix log weights under the query pair:")
for i, rec in enumerate(loaded):
    print(f"  record {i}: {suffix_log_weight(query_b, query_a, rec, model):8.3f}")

q = q_mis_experience(query_b, query_a, data, model)
print(f"\nexperience-based Q(b, a) = {q:.4f}")
print(f"naive mean of stored returns (ignores origins) = {q_simple_reuse(loaded):.4f}")

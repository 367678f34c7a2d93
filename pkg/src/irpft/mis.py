"""Importance sampling and balance-heuristic multiple importance sampling.

The accumulator maintains, for every stored sample point, the balance-heuristic
denominator ``sum_j n_j q_j(x)`` incrementally. Absorbing a batch of L samples
then costs ``O(M * n + M * L)`` proposal-density evaluations (n existing
samples, M distributions) instead of the ``O(M^2 * n)`` from-scratch
recomputation. Density evaluations are counted so that complexity claims stay
testable.

Proposal evaluators are *batched*: they receive a sequence of sample points and
return an array of log densities. Sample points themselves are opaque to this
module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import EmptyAccumulator, UnknownDistribution, ZeroProposalDensity

LogDensityFn = Callable[[Sequence[object]], np.ndarray]


def is_estimate(f_values, target_logdensities, proposal_logdensities) -> float:
    """Plain importance sampling ``(1/N) * sum (p/q) * f`` in log space."""
    f = np.asarray(f_values, dtype=float)
    lp = np.asarray(target_logdensities, dtype=float)
    lq = np.asarray(proposal_logdensities, dtype=float)
    if f.size == 0:
        raise ValueError("importance-sampling estimate needs at least one sample")
    if np.any(np.isneginf(lq)):
        raise ZeroProposalDensity("proposal density is zero at a drawn sample")
    return float(np.mean(np.exp(lp - lq) * f))


@dataclass
class _Distribution:
    logdensity: LogDensityFn
    count: int = 0
    is_target: bool = False


@dataclass
class SampleEntry:
    """Read-only view of one stored sample point."""

    point: object
    origin: Hashable
    log_target: float
    log_denom: float
    f_sum: float
    count: int


class MisAccumulator:
    """Incrementally-updated balance-heuristic MIS estimator.

    Entries may carry several collapsed samples sharing one point (``count``
    and ``f_sum``); the estimate is

        sum_entries exp(log_target - log_denom) * f_sum

    which equals the balance-heuristic estimator because the denominator does
    not depend on which sample at the point is considered. Memory stays one
    scalar denominator per entry; no per-distribution matrix is retained.
    """

    def __init__(self):
        self._dists: Dict[Hashable, _Distribution] = {}
        self._points: List[object] = []
        self._origins: List[Hashable] = []
        self._log_target = np.empty(0)
        self._log_denom = np.empty(0)
        self._f_sum = np.empty(0)
        self._counts = np.empty(0, dtype=np.int64)
        self._cached = 0.0
        self.density_evals = 0
        self.call_evals: List[int] = []  # telemetry, one entry per mutating call

    # -- introspection ------------------------------------------------------
    def __len__(self) -> int:
        return len(self._points)

    @property
    def total_samples(self) -> int:
        return int(self._counts.sum()) if len(self._counts) else 0

    @property
    def distribution_counts(self) -> Dict[Hashable, int]:
        return {k: d.count for k, d in self._dists.items()}

    def entries(self) -> List[SampleEntry]:
        return [
            SampleEntry(
                self._points[i],
                self._origins[i],
                float(self._log_target[i]),
                float(self._log_denom[i]),
                float(self._f_sum[i]),
                int(self._counts[i]),
            )
            for i in range(len(self._points))
        ]

    # -- registration and updates -------------------------------------------
    def register(self, origin: Hashable, logdensity: LogDensityFn, is_target: bool = False) -> None:
        """Attach a proposal evaluator to a distribution id (idempotent)."""
        if origin not in self._dists:
            self._dists[origin] = _Distribution(logdensity, 0, is_target)

    def _resolve(self, origin, proposal_logdensity, is_target) -> _Distribution:
        dist = self._dists.get(origin)
        if dist is None:
            if proposal_logdensity is None:
                raise UnknownDistribution(
                    f"distribution {origin!r} has no registered evaluator"
                )
            dist = _Distribution(proposal_logdensity, 0, is_target)
            self._dists[origin] = dist
        return dist

    def _bump_counts(self, dist: _Distribution, extra: int) -> int:
        """Add ``extra`` samples to a distribution; update every denominator."""
        evals = 0
        if len(self._points) and extra > 0:
            if dist.is_target:
                lq = self._log_target  # q == p at every stored point, already known
            else:
                lq = np.asarray(dist.logdensity(self._points), dtype=float)
                evals = len(self._points)
            np.logaddexp(self._log_denom, math.log(extra) + lq, out=self._log_denom)
        dist.count += extra
        return evals

    def _denoms_for_new(self, points: Sequence[object], log_targets: np.ndarray) -> Tuple[np.ndarray, int]:
        """Full denominators for new points under the current counts."""
        evals = 0
        terms = np.full((len(self._dists), len(points)), -np.inf)
        for row, dist in enumerate(self._dists.values()):
            if dist.count == 0:
                continue
            if dist.is_target:
                lq = log_targets
            else:
                lq = np.asarray(dist.logdensity(points), dtype=float)
                evals += len(points)
            terms[row] = math.log(dist.count) + lq
        shift = terms.max(axis=0)
        with np.errstate(invalid="ignore"):
            denom = shift + np.log(np.exp(terms - shift).sum(axis=0))
        denom = np.where(np.isneginf(shift), -np.inf, denom)
        return denom, evals

    def add_batch(
        self,
        origin: Hashable,
        batch: Iterable[Tuple[object, float, float]],
        proposal_logdensity: LogDensityFn | None = None,
        is_target: bool = False,
    ) -> float:
        """Absorb a batch of i.i.d. samples ``(x, f, log p(x))`` from one proposal.

        ``origin`` may be a new distribution (then ``proposal_logdensity`` is
        required) or an existing one. Returns the updated estimate.
        """
        items = list(batch)
        if not items:
            raise ValueError("batch must contain at least one sample")
        dist = self._resolve(origin, proposal_logdensity, is_target)

        evals = self._bump_counts(dist, len(items))
        points = [x for x, _, _ in items]
        fs = np.array([f for _, f, _ in items], dtype=float)
        lps = np.array([lp for _, _, lp in items], dtype=float)
        denoms, new_evals = self._denoms_for_new(points, lps)
        evals += new_evals

        self._points.extend(points)
        self._origins.extend([origin] * len(items))
        self._log_target = np.concatenate([self._log_target, lps])
        self._log_denom = np.concatenate([self._log_denom, denoms])
        self._f_sum = np.concatenate([self._f_sum, fs])
        self._counts = np.concatenate([self._counts, np.ones(len(items), dtype=np.int64)])

        self.density_evals += evals
        self.call_evals.append(evals)
        return self._refresh()

    def add_group(
        self,
        origin: Hashable,
        point: object,
        f_sum: float,
        count: int,
        log_target: float,
        proposal_logdensity: LogDensityFn | None = None,
        is_target: bool = False,
    ) -> int:
        """Absorb ``count`` collapsed samples sharing one point; returns a handle."""
        if count <= 0:
            raise ValueError("group must carry at least one sample")
        dist = self._resolve(origin, proposal_logdensity, is_target)
        evals = self._bump_counts(dist, count)
        denom, new_evals = self._denoms_for_new([point], np.array([log_target]))
        evals += new_evals

        self._points.append(point)
        self._origins.append(origin)
        self._log_target = np.append(self._log_target, log_target)
        self._log_denom = np.append(self._log_denom, denom[0])
        self._f_sum = np.append(self._f_sum, f_sum)
        self._counts = np.append(self._counts, count)

        self.density_evals += evals
        self.call_evals.append(evals)
        self._refresh()
        return len(self._points) - 1

    def extend_group(self, handle: int, f_delta: float, count_delta: int = 0) -> float:
        """Add further samples (same point, same origin) to an existing entry."""
        origin = self._origins[handle]
        evals = 0
        if count_delta:
            evals = self._bump_counts(self._dists[origin], count_delta)
            self._counts[handle] += count_delta
        self._f_sum[handle] += f_delta
        self.density_evals += evals
        self.call_evals.append(evals)
        return self._refresh()

    def replace_f_value(self, handle: int, f_sum: float) -> float:
        """Overwrite an entry's integrand sum (returns change after the fact)."""
        self._f_sum[handle] = f_sum
        return self._refresh()

    # -- estimates ------------------------------------------------------------
    def _refresh(self) -> float:
        lt, ld = self._log_target, self._log_denom
        bad = np.isneginf(ld) & ~np.isneginf(lt)
        if np.any(bad):
            raise ZeroProposalDensity("a stored sample is covered by no distribution")
        with np.errstate(invalid="ignore"):
            w = np.exp(lt - ld)
        w = np.where(np.isneginf(lt), 0.0, w)
        self._cached = float(np.dot(w, self._f_sum))
        return self._cached

    def mis_estimate(self) -> float:
        """Balance-heuristic estimate over everything absorbed so far."""
        if not self._points:
            raise EmptyAccumulator("no samples absorbed")
        return self._cached

    def balance_weights(self, handle: int) -> Dict[Hashable, float]:
        """Per-distribution balance-heuristic weights at one entry's point.

        Uses the entry's incrementally-maintained denominator, so the weights
        sum to one exactly when that denominator is correct.
        """
        point = self._points[handle]
        ld = self._log_denom[handle]
        out: Dict[Hashable, float] = {}
        for key, dist in self._dists.items():
            if dist.count == 0:
                out[key] = 0.0
                continue
            if dist.is_target:
                lq = self._log_target[handle]
            else:
                lq = float(np.asarray(dist.logdensity([point]), dtype=float)[0])
            out[key] = float(np.exp(math.log(dist.count) + lq - ld))
        return out

"""Failure injection, fault-index bookkeeping, failure rate and fault tendency."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .model import FaultParams, GridResource


class UndefinedRateError(ValueError):
    """No dispatches yet, so a failure rate cannot be formed."""


def failure_rate(failed: int, submitted: int) -> float:
    """Failures per job submitted to a resource."""
    if submitted <= 0:
        raise UndefinedRateError("failure rate undefined before any submission")
    if not 0 <= failed <= submitted:
        raise ValueError(f"failed={failed} must lie in [0, submitted={submitted}]")
    return failed / submitted


def fault_tendency(rates: Sequence[float]) -> float:
    """Mean failure rate over grid resources, as a percentage."""
    if len(rates) == 0:
        raise ValueError("fault tendency needs at least one resource")
    for p in rates:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"failure rate {p} outside [0, 1]")
    return math.fsum(rates) / len(rates) * 100.0


def record_success(resource: GridResource) -> None:
    resource.fault_index.success_count += 1


def record_failure(resource: GridResource) -> None:
    resource.fault_index.failure_count += 1


def record_dispatch(resource: GridResource) -> None:
    resource.fault_index.dispatched += 1


def resource_failure_rate(resource: GridResource) -> float | None:
    """Failure rate of one resource, or None while it is unrated."""
    fi = resource.fault_index
    if fi.dispatched == 0:
        return None
    return failure_rate(fi.failure_count, fi.dispatched)


def resource_tendency(resource: GridResource) -> float:
    """Share of a resource's resolved jobs that ended in failure (0 with no outcomes)."""
    fi = resource.fault_index
    return fi.failure_count / fi.resolved if fi.resolved else 0.0


def mean_failure_rate(resources: Iterable[GridResource]) -> float:
    rates = [r for r in map(resource_failure_rate, resources) if r is not None]
    if not rates:
        raise UndefinedRateError("no rated resources")
    return math.fsum(rates) / len(rates)


def draw_mttfs(params: FaultParams, count: int, rng: np.random.Generator) -> list[float]:
    """Per-resource mean time to failure; permanent resources get inf."""
    if params.mttf_range is not None:
        lo, hi = params.mttf_range
        values = np.exp(rng.uniform(math.log(lo), math.log(hi), size=count)).tolist()
    else:
        values = [float(params.mean_time_to_failure)] * count
    for i in range(min(params.permanent_resources, count)):
        values[i] = math.inf
    return values


def sample_next_failure(resource: GridResource, rng: np.random.Generator) -> float | None:
    """Exponential time until the resource's next crash; None when it never fails."""
    if not resource.alive:
        raise ValueError(f"resource {resource.id} is down")
    if math.isinf(resource.mttf):
        return None
    return float(rng.exponential(resource.mttf))


class FaultBook:
    """Vectorised view of every resource's fault index.

    Counter updates go through the record_* functions so the GridResource
    objects stay authoritative; the arrays make grid-wide means O(1) numpy.
    """

    def __init__(self, resources: Sequence[GridResource]):
        self.resources = resources
        n = len(resources)
        self.failed = np.zeros(n)
        self.dispatched = np.zeros(n)
        self.succeeded = np.zeros(n)
        self.rate = np.zeros(n)
        self.rated = np.zeros(n, dtype=bool)
        self.any_rated = False

    def dispatch(self, rid: int) -> None:
        record_dispatch(self.resources[rid])
        self.dispatched[rid] += 1
        self.rated[rid] = True
        self.any_rated = True
        self.rate[rid] = self.failed[rid] / self.dispatched[rid]

    def success(self, rid: int) -> None:
        record_success(self.resources[rid])
        self.succeeded[rid] += 1

    def failure(self, rid: int) -> None:
        record_failure(self.resources[rid])
        self.failed[rid] += 1
        self.rate[rid] = self.failed[rid] / self.dispatched[rid]

    def rate_of(self, rid: int) -> float:
        """Failure rate with unrated resources reading as 0."""
        return float(self.rate[rid])

    def tendency_of(self, rid: int) -> float:
        resolved = self.failed[rid] + self.succeeded[rid]
        return float(self.failed[rid] / resolved) if resolved else 0.0

    def mean_rate(self) -> float:
        if not self.any_rated:
            raise UndefinedRateError("no rated resources")
        return float(self.rate[self.rated].mean())

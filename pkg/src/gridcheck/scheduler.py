"""Fault- and workload-aware ant-colony resource selection."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .faults import resource_failure_rate
from .model import GridResource, SchedulerSettings


class PheromoneTable:
    def __init__(self, n: int, settings: SchedulerSettings | None = None):
        s = settings or SchedulerSettings()
        self.alpha = s.alpha
        self.beta = s.beta
        self.rho = s.rho
        self.deposit = s.deposit
        self.epsilon = s.epsilon
        self.values = np.full(n, float(s.initial_pheromone))

    def __getitem__(self, rid: int) -> float:
        return float(self.values[rid])


def update_pheromone(pher: PheromoneTable, resource: int, success: bool) -> None:
    """Evaporate every trail; reinforce ``resource`` only on success."""
    v = pher.values
    v *= 1.0 - pher.rho
    if success:
        v[resource] += pher.deposit
    np.maximum(v, pher.epsilon, out=v)


def heuristic(capacity, workload, rate):
    """Desirability: fast, lightly loaded, rarely failing resources score high."""
    return capacity / ((1.0 + workload) * (1.0 + rate))


def selection_weights(pher: PheromoneTable, candidates, capacity, workload, rate) -> np.ndarray:
    eta = heuristic(capacity[candidates], workload[candidates], rate[candidates])
    return pher.values[candidates] ** pher.alpha * eta ** pher.beta


def selection_probabilities(pher: PheromoneTable, candidates, capacity, workload, rate) -> np.ndarray:
    w = selection_weights(pher, candidates, capacity, workload, rate)
    return w / w.sum()


def select_resource(pher: PheromoneTable, candidates: np.ndarray, capacity, workload, rate, rng: np.random.Generator) -> int:
    """Roulette-wheel pick among ``candidates`` (ids), using exactly one uniform draw.

    ``capacity``, ``workload`` and ``rate`` are per-resource arrays indexed by id.
    """
    candidates = np.asarray(candidates)
    if candidates.size == 0:
        raise ValueError("no admissible resource")
    if candidates.size == 1:
        rng.random()  # keep the draw count independent of the candidate count
        return int(candidates[0])
    cum = np.cumsum(selection_weights(pher, candidates, capacity, workload, rate))
    u = rng.random() * cum[-1]
    idx = int(np.searchsorted(cum, u, side="right"))
    return int(candidates[min(idx, candidates.size - 1)])


def admissible_mask(alive: np.ndarray, rated: np.ndarray, rate: np.ndarray, workload: np.ndarray, fr_mean: float | None) -> np.ndarray:
    """Admission for every resource at once.

    A resource at or below the mean failure rate (or unrated) is admitted. One
    above it is admitted only when every other rate-admissible live resource
    carries at least twice its workload.
    """
    if fr_mean is None:
        return alive.copy()
    rate_ok = ~rated | (rate <= fr_mean)
    ok = alive & rate_ok
    flagged = alive & ~rate_ok
    if not flagged.any():
        return ok
    min_w = workload[ok].min() if ok.any() else np.inf
    return ok | (flagged & (min_w >= 2 * workload))


def admit(r: GridResource, fr_mean: float | None, workloads: Mapping[int, int], resources: Sequence[GridResource]) -> bool:
    """Single-resource form of :func:`admissible_mask`.

    ``workloads`` maps resource id to its current queue length.
    """
    if not r.alive:
        return False
    rate = resource_failure_rate(r)
    if fr_mean is None or rate is None or rate <= fr_mean:
        return True
    mine = workloads[r.id]
    for other in resources:
        if other.id == r.id or not other.alive:
            continue
        other_rate = resource_failure_rate(other)
        if other_rate is not None and other_rate > fr_mean:
            continue
        if workloads[other.id] < 2 * mine:
            return False
    return True

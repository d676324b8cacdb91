"""Makespan, throughput, turnaround and the improvement-percentage convention."""

from __future__ import annotations

import math
from typing import Sequence


def makespan(finish_times: Sequence[float]) -> float:
    """Latest finish time; the batch starts at t = 0."""
    if len(finish_times) == 0:
        raise ValueError("makespan of an empty batch")
    return max(finish_times)


def throughput(n_jobs: int, total_time: float) -> float:
    """Jobs finished per sim-second over ``total_time`` (the batch makespan)."""
    if n_jobs == 0:
        return 0.0
    if not total_time > 0:
        raise ValueError("throughput needs a positive total time")
    return n_jobs / total_time


def avg_turnaround(jobs: Sequence[tuple[float, float]]) -> float:
    if len(jobs) == 0:
        raise ValueError("turnaround of an empty batch")
    spans = []
    for submit, finish in jobs:
        if finish < submit:
            raise ValueError(f"finish {finish} precedes submit {submit}")
        spans.append(finish - submit)
    return math.fsum(spans) / len(spans)


def improvement_pct(existing: float, improved: float, digits: int | None = 2) -> float:
    """Unsigned relative gap between the two values, taken over the improved value.

    Rounded to ``digits`` places; pass ``digits=None`` for the raw value.
    """
    if not improved > 0:
        raise ValueError("improved value must be > 0")
    pct = abs(existing - improved) / improved * 100.0
    return pct if digits is None else round(pct, digits)


def signed_improvement_pct(existing: float, improved: float, higher_is_better: bool = False) -> float:
    """Like :func:`improvement_pct` but negative when the new policy is worse."""
    pct = improvement_pct(existing, improved, digits=None)
    better = improved > existing if higher_is_better else improved < existing
    return pct if better or pct == 0 else -pct

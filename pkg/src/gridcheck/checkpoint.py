"""Checkpoint planning, the replicated checkpoint repository, and recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .model import CheckpointPlan, CheckpointRecord, Gridlet, GridResource

# relative slack so that e.g. 50 * 0.2 never ceils to 11 through float noise
_ROUND_SLACK = 1e-12


def estimate_response_time(g: Gridlet, r: GridResource, length: float | None = None) -> float:
    """Compute time on one PE plus staging time for input and output.

    ``length`` overrides the gridlet's length, e.g. with the remaining work
    after a recovery.
    """
    work = g.length if length is None else length
    return work / r.mips_per_pe + (g.input_size + g.output_size) / r.bandwidth


def effective_rate(fr: float, fd_resource: float, fr_mean: float) -> float:
    """Risk used for planning: a resource above the grid mean is judged by its worse signal."""
    if fr >= fr_mean or fd_resource > fr_mean:
        return max(fr, fd_resource)
    return fr


def plan_adaptive(rt: float, fr: float, fd_resource: float, fr_mean: float) -> CheckpointPlan:
    """Checkpoint count proportional to response time times failure risk."""
    if rt < 0:
        raise ValueError("response time must be >= 0")
    for name, v in (("fr", fr), ("fd_resource", fd_resource), ("fr_mean", fr_mean)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    x = rt * effective_rate(fr, fd_resource, fr_mean)
    if x <= 0:
        return CheckpointPlan(0)
    count = max(1, math.ceil(x * (1 - _ROUND_SLACK)))
    return CheckpointPlan(count, rt / count)


def plan_baseline(rt: float, fixed_interval: float) -> CheckpointPlan:
    """Unconditional periodic checkpointing every ``fixed_interval``."""
    if not fixed_interval > 0:
        raise ValueError("fixed_interval must be > 0")
    count = math.floor(rt / fixed_interval * (1 + _ROUND_SLACK)) if rt > 0 else 0
    return CheckpointPlan(count, fixed_interval)


def checkpoint_offsets(plan: CheckpointPlan, compute_start: float, compute_time: float) -> list[float]:
    """Work-time offsets of the plan's checkpoints that fall strictly inside the compute phase.

    A milestone landing on (or after) the end of computation protects
    nothing and is dropped, as is one during input staging.
    """
    if plan.count == 0 or compute_time <= 0:
        return []
    end = compute_start + compute_time
    out = []
    for i in range(1, plan.count + 1):
        tau = i * plan.interval
        if tau >= end:
            break
        if tau > compute_start:
            out.append(tau)
    return out


@dataclass(slots=True)
class Copy:
    record: CheckpointRecord
    holder: int
    source: int  # node that is sending the bytes (origin, or a surviving holder)
    ready: bool


@dataclass
class CheckpointStats:
    checkpoints_taken: int = 0
    bytes_replicated: float = 0.0
    replica_writes: int = 0
    degraded_replications: int = 0
    purges: int = 0
    recoveries_origin: int = 0
    recoveries_replica: int = 0
    restarts: int = 0
    rereplications: int = 0
    suspension_time: float = 0.0

    def as_dict(self) -> dict:
        return dict(vars(self))


class CheckpointRepository:
    """Every node's local checkpoint store.

    Each node holds at most one record per job (its latest copy). ``latest``
    is the job's authoritative committed seq.
    """

    def __init__(self):
        self._by_job: dict[int, dict[int, Copy]] = {}
        self._by_node: dict[int, set[int]] = {}
        self.latest: dict[int, int] = {}
        self.stats = CheckpointStats()

    def commit(self, record: CheckpointRecord, ready_at: dict[int, float], now: float) -> list[int]:
        """Install ``record`` on its origin and replica holders; purge older seqs.

        ``ready_at`` maps holders to the time their copy finishes arriving.
        Returns holders whose write is still in flight at ``now``.
        """
        job = record.job_id
        latest = self.latest.get(job, 0)
        if record.seq <= latest:
            raise ValueError(f"job {job}: seq {record.seq} is not newer than {latest}")
        copies = self._by_job.get(job)
        if copies is None:
            copies = self._by_job[job] = {}
        origin = record.origin
        # every older copy goes: dropped here, or overwritten below
        self.stats.purges += len(copies)
        for holder in [h for h in copies if h != origin and h not in ready_at]:
            self._remove(job, holder)
        self.latest[job] = record.seq
        self._put_into(copies, Copy(record, origin, origin, True))
        pending = []
        for holder, t in ready_at.items():
            ready = t <= now
            self._put_into(copies, Copy(record, holder, origin, ready))
            if not ready:
                pending.append(holder)
        self.stats.checkpoints_taken += 1
        self.stats.replica_writes += len(ready_at)
        return pending

    def add_copy(self, record: CheckpointRecord, holder: int, source: int, ready: bool) -> None:
        """Extra copy of the job's current record (re-replication after a failure)."""
        if self.latest.get(record.job_id) != record.seq:
            raise ValueError("only the committed seq can be re-replicated")
        self._put(Copy(record, holder, source, ready))
        self.stats.rereplications += 1
        self.stats.replica_writes += 1

    def mark_ready(self, job: int, seq: int, holder: int) -> bool:
        c = self._by_job.get(job, {}).get(holder)
        if c is None or c.record.seq != seq:
            return False  # purged or lost meanwhile
        c.ready = True
        return True

    def drop_node(self, node: int) -> None:
        """A crash wipes the node's store and aborts transfers it was sending."""
        for job in list(self._by_node.get(node, ())):
            self._remove(job, node)
        for job, copies in list(self._by_job.items()):
            for holder in [h for h, c in copies.items() if c.source == node and not c.ready]:
                self._remove(job, holder)

    def clear(self, job: int) -> None:
        """Drop every copy of a finished job."""
        for holder in list(self._by_job.get(job, ())):
            self._remove(job, holder)
            self.stats.purges += 1
        self._by_job.pop(job, None)
        self.latest.pop(job, None)

    def best_copy(self, job: int, alive: Callable[[int], bool]) -> Copy | None:
        best = None
        for holder in sorted(self._by_job.get(job, ())):
            c = self._by_job[job][holder]
            if c.ready and alive(holder) and (best is None or c.record.seq > best.record.seq):
                best = c
        return best

    def holders(self, job: int) -> dict[int, Copy]:
        return dict(self._by_job.get(job, {}))

    def node_store(self, node: int) -> dict[int, CheckpointRecord]:
        return {job: self._by_job[job][node].record for job in sorted(self._by_node.get(node, ()))}

    def copies(self) -> Iterator[Copy]:
        for job in sorted(self._by_job):
            for holder in sorted(self._by_job[job]):
                yield self._by_job[job][holder]

    def audit(self, completed: set[int] | None = None) -> list[str]:
        """Invariant violations: stale seqs, inconsistent replicas, leftovers of finished jobs."""
        problems = []
        completed = completed or set()
        for job, copies in sorted(self._by_job.items()):
            if not copies:
                continue
            if job in completed:
                problems.append(f"job {job}: {len(copies)} records left after completion")
            seqs = {c.record.seq for c in copies.values()}
            if len(seqs) > 1:
                problems.append(f"job {job}: live seqs {sorted(seqs)}")
            by_seq: dict[int, set[tuple[float, float]]] = {}
            for c in copies.values():
                by_seq.setdefault(c.record.seq, set()).add((c.record.progress, c.record.taken_at))
            for seq, variants in by_seq.items():
                if len(variants) > 1:
                    problems.append(f"job {job} seq {seq}: replicas disagree {sorted(variants)}")
            if max(seqs) != self.latest.get(job):
                problems.append(f"job {job}: live seq {max(seqs)} != committed {self.latest.get(job)}")
        for node, jobs in self._by_node.items():
            for job in jobs:
                if node not in self._by_job.get(job, {}):
                    problems.append(f"node {node}: index lists job {job} without a record")
        return problems

    def _put(self, c: Copy) -> None:
        self._put_into(self._by_job.setdefault(c.record.job_id, {}), c)

    def _put_into(self, copies: dict[int, Copy], c: Copy) -> None:
        if c.holder not in copies:
            node = self._by_node.get(c.holder)
            if node is None:
                node = self._by_node[c.holder] = set()
            node.add(c.record.job_id)
        copies[c.holder] = c

    def _remove(self, job: int, holder: int) -> None:
        copies = self._by_job.get(job)
        if copies is not None and holder in copies:
            del copies[holder]
            self._by_node[holder].discard(job)


@dataclass
class ResumePoint:
    progress: float
    source: int | None  # None means restart from scratch
    kind: str  # "origin", "replica" or "restart"
    record: CheckpointRecord | None = field(default=None, repr=False)


def recover(repo: CheckpointRepository, job_id: int, failed_resource: int, alive: Callable[[int], bool]) -> ResumePoint:
    """Latest surviving committed state of a job whose resource just failed."""
    c = repo.best_copy(job_id, lambda h: h != failed_resource and alive(h))
    if c is None:
        repo.stats.restarts += 1
        return ResumePoint(0.0, None, "restart")
    if c.holder == c.record.origin:
        repo.stats.recoveries_origin += 1
        kind = "origin"
    else:
        repo.stats.recoveries_replica += 1
        kind = "replica"
    return ResumePoint(c.record.progress, c.holder, kind, c.record)

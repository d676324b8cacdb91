"""One grid run: gridlets, resources, faults, checkpoints and the ACO scheduler."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .checkpoint import (
    CheckpointRepository,
    checkpoint_offsets,
    estimate_response_time,
    plan_adaptive,
    plan_baseline,
    recover,
)
from .faults import FaultBook, draw_mttfs, sample_next_failure
from .kernel import Event, EventKind, Kernel, substream
from .model import (
    CheckpointPlan,
    CheckpointRecord,
    Gridlet,
    GridletStatus,
    GridResource,
    Policy,
    SimConfig,
    validate_config,
)
from .scheduler import PheromoneTable, admissible_mask, select_resource, update_pheromone

log = logging.getLogger(__name__)


class InvariantViolation(RuntimeError):
    pass


@dataclass
class Execution:
    """One dispatch of a gridlet onto a PE.

    Work time ``tau`` runs over input staging, computation and output
    staging; wall time additionally contains checkpoint suspensions.
    """

    job: Gridlet
    rid: int
    start: float
    p0: float
    t_in: float
    t_c: float
    rt: float
    plan: CheckpointPlan
    offsets: list[float]
    done: int = 0
    next_ckpt: Event | None = None
    completion: Event | None = None

    def progress_at(self, tau: float) -> float:
        if self.t_c <= 0:
            return self.p0
        frac = min(max((tau - self.t_in) / self.t_c, 0.0), 1.0)
        return self.p0 + (1.0 - self.p0) * frac

    def commit_time(self, k: int, write_time: float) -> float:
        """Wall time at which checkpoint ``k`` (1-based) finishes its local write."""
        return self.start + self.offsets[k - 1] + k * write_time

    def tau_at(self, t: float, write_time: float) -> float:
        elapsed = t - self.start - self.done * write_time
        if self.done < len(self.offsets) and elapsed > self.offsets[self.done]:
            return self.offsets[self.done]  # suspended inside the next checkpoint
        return max(elapsed, 0.0)


@dataclass
class Recovery:
    time: float
    job: int
    resource: int
    kind: str
    progress_at_failure: float
    resumed_progress: float
    lost_work: float  # compute seconds on the failed resource
    bound: float  # plan interval + commit time; inf when the dispatch had no plan
    checkpointed_before: bool


@dataclass
class RunReport:
    policy: str
    seed: int
    n_jobs: int
    n_resources: int
    makespan: float
    throughput: float
    atat: float
    failures_injected: int
    checkpoint_stats: dict
    events: int
    finish_times: list[float] = field(repr=False, default_factory=list)
    submit_times: list[float] = field(repr=False, default_factory=list)
    job_resource: list[int] = field(repr=False, default_factory=list)
    job_suspension: list[float] = field(repr=False, default_factory=list)
    recoveries: list[Recovery] = field(repr=False, default_factory=list)
    audit: list[str] = field(repr=False, default_factory=list)
    trace: list[str] | None = field(repr=False, default=None)

    @property
    def restarts_after_checkpoint(self) -> int:
        return sum(1 for r in self.recoveries if r.kind == "restart" and r.checkpointed_before)

    def summary(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "n_jobs": self.n_jobs,
            "n_resources": self.n_resources,
            "makespan": self.makespan,
            "throughput": self.throughput,
            "atat": self.atat,
            "failures_injected": self.failures_injected,
            "recoveries": len(self.recoveries),
            "restarts_after_checkpoint": self.restarts_after_checkpoint,
            "events": self.events,
            **self.checkpoint_stats,
        }


def generate_gridlets(cfg: SimConfig) -> list[Gridlet]:
    spec = cfg.gridlets
    rng = substream(cfg.seed, "gridlet-gen")
    n = spec.count
    if spec.fixed_length is not None:
        lengths = np.full(n, float(spec.fixed_length))
    else:
        lengths = rng.uniform(spec.length_min, spec.length_max, size=n)
    u = rng.uniform(*spec.input_extra, size=n)
    v = rng.uniform(*spec.output_extra, size=n)
    return [
        Gridlet(
            id=i,
            length=float(lengths[i]),
            input_size=spec.input_base * (1 + float(u[i])),
            output_size=spec.output_base * (1 + float(v[i])),
            submit_time=spec.submit_time,
        )
        for i in range(n)
    ]


def build_resources(cfg: SimConfig) -> list[GridResource]:
    spec = cfg.resources
    mttfs = draw_mttfs(cfg.faults, spec.count, substream(cfg.seed, "fault-model"))
    return [
        GridResource(
            id=i,
            num_machines=spec.num_machines,
            pes_per_machine=spec.pes_per_machine,
            mips_per_pe=spec.mips_per_pe,
            bandwidth=spec.bandwidth,
            mttf=mttfs[i],
        )
        for i in range(spec.count)
    ]


class Simulation:
    def __init__(self, cfg: SimConfig, trace: bool = False, audit_every_event: bool = False):
        self.cfg = validate_config(cfg)
        self.kernel = Kernel(trace=trace)
        self.gridlets = generate_gridlets(cfg)
        self.resources = build_resources(cfg)
        self.book = FaultBook(self.resources)
        self.repo = CheckpointRepository()
        self.pher = PheromoneTable(len(self.resources), cfg.scheduler)
        self.sched_rng = substream(cfg.seed, "scheduler")
        self.fault_rngs = [substream(cfg.seed, "fault-model", r.id + 1) for r in self.resources]
        self.audit_every_event = audit_every_event

        n = len(self.resources)
        self.alive = np.ones(n, dtype=bool)
        self.workload = np.zeros(n)
        self.capacity = np.array([r.capacity for r in self.resources], dtype=float)
        self.max_load = np.array([r.slots + cfg.scheduler.queue_limit for r in self.resources])
        self._reliable_peers: list[int] | None = None
        self.min_bandwidth = min(r.bandwidth for r in self.resources)

        self.pool: deque[int] = deque()
        self.executions: dict[int, Execution] = {}
        self.next_seq = [1] * len(self.gridlets)
        self.checkpointed = [False] * len(self.gridlets)
        self.job_resource = [-1] * len(self.gridlets)
        self.job_suspension = [0.0] * len(self.gridlets)
        self.remaining = len(self.gridlets)
        self.failures = 0
        self.recoveries: list[Recovery] = []
        self.fail_events: dict[int, Event] = {}
        self.audit_problems: list[str] = []
        self._started = False

        k = self.kernel
        k.on(EventKind.DISPATCH, self._on_arrival)
        k.on(EventKind.CHECKPOINT_DUE, self._on_checkpoint)
        k.on(EventKind.JOB_COMPLETE, self._on_complete)
        k.on(EventKind.RESOURCE_FAIL, self._on_fail)
        k.on(EventKind.RESOURCE_REPAIR, self._on_repair)
        k.on(EventKind.REPLICA_WRITE_DONE, self._on_replica_done)

    # ------------------------------------------------------------------ setup

    def start(self) -> None:
        """Queue the arrivals and first failures; ``run`` calls this if needed."""
        if self._started:
            return
        self._started = True
        for g in self.gridlets:
            self.kernel.schedule(g.submit_time, EventKind.DISPATCH, {"job": g.id})
        for r in self.resources:
            self._arm_failure(r)

    def inject_failure(self, rid: int, at: float) -> None:
        """Crash ``rid`` at ``at`` instead of at its next sampled failure."""
        self.kernel.cancel(self.fail_events.pop(rid, None))
        self.fail_events[rid] = self.kernel.schedule(at, EventKind.RESOURCE_FAIL, {"rid": rid})

    def run(self) -> RunReport:
        self.start()
        self.kernel.run(after=self._check_invariants if self.audit_every_event else None)
        return self._finish()

    def _arm_failure(self, r: GridResource) -> None:
        offset = sample_next_failure(r, self.fault_rngs[r.id])
        if offset is not None:
            self.fail_events[r.id] = self.kernel.schedule_in(offset, EventKind.RESOURCE_FAIL, {"rid": r.id})

    # --------------------------------------------------------------- handlers

    def _on_arrival(self, ev: Event) -> None:
        g = self.gridlets[ev.payload["job"]]
        g.transition(GridletStatus.QUEUED)
        self.pool.append(g.id)
        self._schedule_pass()

    def _on_checkpoint(self, ev: Event) -> None:
        job = ev.payload["job"]
        ex = self.executions[job]
        c = self.cfg.checkpoint
        k = ex.done + 1
        taken_at = self.kernel.now - c.base_write_time
        progress = ex.progress_at(ex.offsets[k - 1])
        holders = self._place_replicas(ex.rid, c.replica_factor, taken_at)
        if len(holders) < c.replica_factor:
            self.repo.stats.degraded_replications += 1
        # replica transfers run concurrently with the local write
        ready_at = {h: taken_at + c.size_per_checkpoint / self.resources[h].bandwidth for h in holders}
        seq = self.next_seq[job]
        self.next_seq[job] += 1
        record = CheckpointRecord(job, seq, progress, taken_at, ex.rid, frozenset(holders))
        for h in self.repo.commit(record, ready_at, self.kernel.now):
            self.kernel.schedule(ready_at[h], EventKind.REPLICA_WRITE_DONE, {"job": job, "seq": seq, "holder": h})
        self.repo.stats.bytes_replicated += c.size_per_checkpoint * len(holders)
        self.repo.stats.suspension_time += c.base_write_time
        self.job_suspension[job] += c.base_write_time
        self.checkpointed[job] = True
        ex.done = k
        if k < len(ex.offsets):
            ex.next_ckpt = self.kernel.schedule(
                ex.commit_time(k + 1, c.base_write_time), EventKind.CHECKPOINT_DUE, {"job": job, "k": k + 1, "rid": ex.rid}
            )
        else:
            ex.next_ckpt = None

    def _on_complete(self, ev: Event) -> None:
        job = ev.payload["job"]
        ex = self.executions.pop(job)
        r = self.resources[ex.rid]
        g = ex.job
        g.transition(GridletStatus.SUCCESS)
        g.finish_time = self.kernel.now
        self.job_resource[job] = r.id
        self.book.success(r.id)
        update_pheromone(self.pher, r.id, True)
        self.repo.clear(job)
        r.running.remove(job)
        self.workload[r.id] -= 1
        self.remaining -= 1
        if self.remaining == 0:
            self.kernel.stop()
            return
        self._start_waiting(r)
        self._schedule_pass()

    def _on_fail(self, ev: Event) -> None:
        rid = ev.payload["rid"]
        r = self.resources[rid]
        self.fail_events.pop(rid, None)
        if not r.alive:
            return
        now = self.kernel.now
        if not r.running and not self.cfg.faults.fail_while_idle:
            self._arm_failure(r)
            return
        self.failures += 1
        c = self.cfg.checkpoint
        r.alive = False
        r.last_failure_at = now
        self.alive[rid] = False
        self._reliable_peers = None

        failed_jobs = []
        for job in list(r.running):
            ex = self.executions.pop(job)
            self.kernel.cancel(ex.next_ckpt)
            self.kernel.cancel(ex.completion)
            p_fail = ex.progress_at(ex.tau_at(now, c.base_write_time))
            self.book.failure(rid)
            ex.job.transition(GridletStatus.FAILED)
            failed_jobs.append((ex, p_fail))
        self.repo.drop_node(rid)
        # checkpoints of jobs on this node become unreachable; peers still serve them
        requeue = []
        for ex, p_fail in failed_jobs:
            g = ex.job
            resume = recover(self.repo, g.id, rid, self._is_alive)
            bound = math.inf
            if ex.plan.count > 0:
                bound = ex.plan.interval + c.base_write_time + c.size_per_checkpoint / self.min_bandwidth
            self.recoveries.append(
                Recovery(
                    time=now,
                    job=g.id,
                    resource=rid,
                    kind=resume.kind,
                    progress_at_failure=p_fail,
                    resumed_progress=resume.progress,
                    lost_work=max(p_fail - resume.progress, 0.0) * g.length / r.mips_per_pe,
                    bound=bound,
                    checkpointed_before=self.checkpointed[g.id],
                )
            )
            g.set_progress(resume.progress)
            g.transition(GridletStatus.QUEUED)
            if resume.record is not None:
                self._rereplicate(resume.record, resume.source)
            requeue.append(g.id)
        for job in r.queue:
            self.gridlets[job].transition(GridletStatus.QUEUED)
            requeue.append(job)
        r.running.clear()
        r.queue.clear()
        self.workload[rid] = 0
        self.pool.extendleft(reversed(requeue))
        update_pheromone(self.pher, rid, False)
        if math.isfinite(self.cfg.faults.repair_delay):
            self.kernel.schedule_in(self.cfg.faults.repair_delay, EventKind.RESOURCE_REPAIR, {"rid": rid})
        self._schedule_pass()

    def _on_repair(self, ev: Event) -> None:
        r = self.resources[ev.payload["rid"]]
        r.alive = True
        self.alive[r.id] = True
        self._reliable_peers = None
        self._arm_failure(r)
        self._schedule_pass()

    def _on_replica_done(self, ev: Event) -> None:
        p = ev.payload
        self.repo.mark_ready(p["job"], p["seq"], p["holder"])

    # ------------------------------------------------------------- mechanics

    def _is_alive(self, rid: int) -> bool:
        return self.resources[rid].alive

    def _place_replicas(self, origin: int, k: int, since: float, exclude: frozenset[int] = frozenset()) -> list[int]:
        """``k`` live peers with the lowest failure rate (ties by id), up since ``since``."""
        if k == 0:
            return []
        skip = exclude | {origin}
        if self._reliable_peers is None:
            zero = self.alive & (self.book.rate == 0)
            self._reliable_peers = np.flatnonzero(zero).tolist()
        out = []
        for h in self._reliable_peers:
            if h not in skip and self.resources[h].last_failure_at < since:
                out.append(h)
                if len(out) == k:
                    return out
        # not enough spotless peers: rank everything
        ids = np.flatnonzero(self.alive)
        order = np.argsort(self.book.rate[ids], kind="stable")
        out = []
        for h in ids[order].tolist():
            if h not in skip and self.resources[h].last_failure_at < since:
                out.append(h)
                if len(out) == k:
                    break
        return out

    def _rereplicate(self, record: CheckpointRecord, source: int) -> None:
        """Top the surviving state back up to ``replica_factor`` copies."""
        c = self.cfg.checkpoint
        held = frozenset(self.repo.holders(record.job_id))
        missing = c.replica_factor + 1 - len(held)
        if missing <= 0:
            return
        now = self.kernel.now
        for h in self._place_replicas(source, missing, now, exclude=held):
            self.repo.add_copy(record, h, source, ready=False)
            t = now + c.size_per_checkpoint / self.resources[h].bandwidth
            self.kernel.schedule(t, EventKind.REPLICA_WRITE_DONE, {"job": record.job_id, "seq": record.seq, "holder": h})
            self.repo.stats.bytes_replicated += c.size_per_checkpoint

    def _schedule_pass(self) -> None:
        while self.pool:
            fr_mean = self.book.mean_rate() if self.book.any_rated else None
            mask = admissible_mask(self.alive, self.book.rated, self.book.rate, self.workload, fr_mean)
            mask &= self.workload < self.max_load
            candidates = np.flatnonzero(mask)
            if candidates.size == 0:
                return
            rid = select_resource(self.pher, candidates, self.capacity, self.workload, self.book.rate, self.sched_rng)
            self.dispatch(self.gridlets[self.pool.popleft()], rid)

    def dispatch(self, g: Gridlet, rid: int) -> None:
        """Bind a queued gridlet to a resource; it starts as soon as a PE is free."""
        r = self.resources[rid]
        if g.status is not GridletStatus.QUEUED:
            raise InvariantViolation(f"gridlet {g.id} dispatched while {g.status.value}")
        if not r.alive:
            self.pool.appendleft(g.id)
            return
        self.book.dispatch(rid)
        self.workload[rid] += 1
        r.queue.append(g.id)
        self._start_waiting(r)

    def _start_waiting(self, r: GridResource) -> None:
        while r.queue and len(r.running) < r.slots:
            self._start(self.gridlets[r.queue.pop(0)], r)

    def make_plan(self, g: Gridlet, r: GridResource, rt: float) -> CheckpointPlan:
        policy = self.cfg.policy
        if policy is Policy.NONE:
            return CheckpointPlan(0)
        if policy is Policy.BASELINE:
            return plan_baseline(rt, self.cfg.baseline_interval)
        fi = r.fault_index
        if fi.resolved < self.cfg.checkpoint.min_history:
            # too few outcomes to judge the resource by: use the grid's record
            mean = self.book.mean_rate() if self.book.any_rated else 0.0
            if mean > 0:
                return plan_adaptive(rt, mean, mean, mean)
            return plan_baseline(rt, self.cfg.baseline_interval)
        fr = self.book.rate_of(r.id)
        fd = self.book.tendency_of(r.id)
        return plan_adaptive(rt, fr, fd, self.book.mean_rate())

    def _start(self, g: Gridlet, r: GridResource) -> None:
        now = self.kernel.now
        c = self.cfg.checkpoint
        g.transition(GridletStatus.RUNNING)
        remaining = g.remaining_length
        t_in = g.input_size / r.bandwidth
        t_c = remaining / r.mips_per_pe
        rt = estimate_response_time(g, r, remaining)
        plan = self.make_plan(g, r, rt)
        offsets = checkpoint_offsets(plan, t_in, t_c)
        ex = Execution(g, r.id, now, g.progress, t_in, t_c, rt, plan, offsets)
        ex.completion = self.kernel.schedule(
            now + rt + len(offsets) * c.base_write_time, EventKind.JOB_COMPLETE, {"job": g.id, "rid": r.id}
        )
        if offsets:
            ex.next_ckpt = self.kernel.schedule(
                ex.commit_time(1, c.base_write_time), EventKind.CHECKPOINT_DUE, {"job": g.id, "k": 1, "rid": r.id}
            )
        self.executions[g.id] = ex
        r.running.append(g.id)

    # ---------------------------------------------------------------- checks

    def _check_invariants(self, ev: Event | None = None) -> None:
        for ex in self.executions.values():
            if not self.resources[ex.rid].alive:
                raise InvariantViolation(f"gridlet {ex.job.id} running on dead resource {ex.rid}")
        problems = self.repo.audit({g.id for g in self.gridlets if g.status is GridletStatus.SUCCESS})
        if problems:
            raise InvariantViolation("; ".join(problems[:5]))

    def _finish(self) -> RunReport:
        unfinished = [g.id for g in self.gridlets if g.status is not GridletStatus.SUCCESS]
        if unfinished:
            raise InvariantViolation(f"{len(unfinished)} gridlets never completed (first: {unfinished[:5]})")
        if len(self.kernel):
            raise InvariantViolation(f"{len(self.kernel)} events left in the queue")
        completed = {g.id for g in self.gridlets}
        self.audit_problems = self.repo.audit(completed)
        if self.audit_problems:
            raise InvariantViolation("; ".join(self.audit_problems[:5]))
        finish = [g.finish_time for g in self.gridlets]
        submit = [g.submit_time for g in self.gridlets]
        span = metrics.makespan(finish)
        return RunReport(
            policy=self.cfg.policy.value,
            seed=self.cfg.seed,
            n_jobs=len(self.gridlets),
            n_resources=len(self.resources),
            makespan=span,
            throughput=metrics.throughput(len(self.gridlets), span),
            atat=metrics.avg_turnaround(list(zip(submit, finish))),
            failures_injected=self.failures,
            checkpoint_stats=self.repo.stats.as_dict(),
            events=self.kernel.processed,
            finish_times=finish,
            submit_times=submit,
            job_resource=list(self.job_resource),
            job_suspension=list(self.job_suspension),
            recoveries=self.recoveries,
            audit=self.audit_problems,
            trace=self.kernel.trace,
        )


def run_simulation(cfg: SimConfig, trace: bool = False, audit_every_event: bool = False) -> RunReport:
    return Simulation(cfg, trace=trace, audit_every_event=audit_every_event).run()

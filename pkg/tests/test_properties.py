"""Property checks over randomly generated inputs."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_config
from gridcheck.checkpoint import CheckpointRepository, checkpoint_offsets, plan_adaptive, plan_baseline
from gridcheck.faults import failure_rate, fault_tendency, mean_failure_rate, record_dispatch, record_failure
from gridcheck.kernel import EventKind, Kernel
from gridcheck.metrics import avg_turnaround, improvement_pct, makespan, throughput
from gridcheck.model import CheckpointPlan, CheckpointRecord, GridResource, Policy, SchedulerSettings
from gridcheck.scheduler import PheromoneTable, admissible_mask, update_pheromone
from gridcheck.simulation import Simulation

ratio = st.floats(0.0, 1.0, allow_nan=False)
positive = st.floats(1e-6, 1e9, allow_nan=False, allow_infinity=False)
counts = st.integers(1, 1000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n)))


@given(counts)
def test_failure_rate_in_unit_interval(pair):
    assert 0.0 <= failure_rate(*pair) <= 1.0


@given(st.lists(counts, min_size=1, max_size=20))
def test_tendency_is_hundred_times_mean_rate(pairs):
    resources = []
    for i, (failed, submitted) in enumerate(pairs):
        r = GridResource(i)
        for _ in range(submitted):
            record_dispatch(r)
        for _ in range(failed):
            record_failure(r)
        resources.append(r)
    rates = [failure_rate(f, s) for f, s in pairs]
    assert 0.0 <= fault_tendency(rates) <= 100.0
    assert math.isclose(fault_tendency(rates), 100 * mean_failure_rate(resources), rel_tol=1e-12, abs_tol=1e-12)


@given(st.floats(0.0, 1e5), ratio, ratio, ratio)
def test_adaptive_plan_covers_response_time(rt, fr, fd, mean):
    plan = plan_adaptive(rt, fr, fd, mean)
    if plan.count > 0:
        assert abs(plan.interval * plan.count - rt) < plan.interval


@given(st.floats(0.0, 1e5), st.floats(1e-3, 1e3))
def test_baseline_plan_fits_response_time(rt, interval):
    plan = plan_baseline(rt, interval)
    assert plan.count * interval <= rt * (1 + 1e-9)
    assert (plan.count + 1) * interval > rt * (1 - 1e-9)


@given(st.integers(0, 30), st.floats(0.1, 50.0), st.floats(0.0, 20.0), st.floats(0.0, 500.0))
def test_offsets_lie_inside_compute(count, interval, start, compute):
    plan = CheckpointPlan(count, interval if count else None)
    for tau in checkpoint_offsets(plan, start, compute):
        assert start < tau < start + compute


@given(st.lists(st.booleans(), max_size=60), st.floats(0.01, 0.99))
def test_pheromone_stays_above_floor(outcomes, rho):
    p = PheromoneTable(3, SchedulerSettings(rho=rho, epsilon=1e-4))
    for i, ok in enumerate(outcomes):
        update_pheromone(p, i % 3, ok)
    assert (p.values >= 1e-4).all()


@given(st.lists(st.tuples(st.floats(0, 1000), st.floats(0, 1000)), min_size=1, max_size=40))
def test_metric_relations(spans):
    jobs = [(0.0, a + b) for a, b in spans]
    finish = [f for _, f in jobs]
    span = makespan(finish)
    assert avg_turnaround(jobs) <= span * (1 + 1e-12)
    if span > 0:
        assert math.isclose(throughput(len(jobs), span) * span, len(jobs), rel_tol=1e-12)


@given(positive, positive, st.floats(1e-3, 1e3))
def test_improvement_scale_invariant(a, b, k):
    assert math.isclose(improvement_pct(a, b, None), improvement_pct(a * k, b * k, None), rel_tol=1e-9, abs_tol=1e-9)


@given(st.lists(st.floats(0, 100, allow_nan=False), max_size=50))
def test_kernel_fires_in_time_order(times):
    k = Kernel()
    fired = []
    k.on(EventKind.DISPATCH, lambda ev: fired.append((ev.fire_time, ev.seq)))
    for t in times:
        k.schedule(t, EventKind.DISPATCH)
    k.run()
    assert fired == sorted(fired)
    assert len(fired) == len(times)


@given(
    st.lists(
        st.tuples(st.integers(0, 4), st.sampled_from(["commit", "crash", "clear"]), st.integers(0, 5)),
        max_size=40,
    )
)
def test_repository_keeps_one_live_seq(ops):
    repo = CheckpointRepository()
    seq = {}
    progress = {}
    for job, op, node in ops:
        if op == "commit":
            seq[job] = seq.get(job, 0) + 1
            progress[job] = min(progress.get(job, 0.0) + 0.1, 0.9)
            replicas = sorted({(node + 1) % 6, (node + 2) % 6})
            record = CheckpointRecord(job, seq[job], progress[job], float(seq[job]), node, frozenset(replicas))
            repo.commit(record, {h: record.taken_at for h in replicas}, now=record.taken_at)
        elif op == "crash":
            repo.drop_node(node)
        else:
            repo.clear(job)
            seq.pop(job, None)  # a finished job never checkpoints again
    assert repo.audit() == []


@given(st.lists(st.tuples(st.booleans(), st.floats(0, 1), st.integers(0, 5)), min_size=2, max_size=12))
def test_admission_never_admits_dead(rows):
    alive = np.array([a for a, _, _ in rows])
    rate = np.array([r for _, r, _ in rows])
    workload = np.array([w for _, _, w in rows], dtype=float)
    rated = np.ones(len(rows), dtype=bool)
    mask = admissible_mask(alive, rated, rate, workload, float(rate.mean()))
    assert not (mask & ~alive).any()
    below = alive & (rate <= rate.mean())
    assert (mask[below]).all()


@settings(max_examples=15, deadline=None)
@given(
    st.integers(0, 2**31 - 1),
    st.sampled_from(list(Policy)),
    st.floats(300.0, 5000.0),
    st.integers(0, 3),
)
def test_random_runs_finish_cleanly(seed, policy, mttf, replicas):
    cfg = small_config(
        seed=seed,
        policy=policy,
        **{
            "faults.mean_time_to_failure": mttf,
            "faults.repair_delay": 40.0,
            "faults.permanent_resources": 1,
            "checkpoint.replica_factor": replicas,
        },
    )
    sim = Simulation(cfg, audit_every_event=True)
    report = sim.run()
    assert len(report.finish_times) == cfg.gridlets.count
    for r in sim.resources:
        assert r.fault_index.success_count == report.job_resource.count(r.id)
    for rec in report.recoveries:
        if rec.kind != "restart":
            assert rec.lost_work <= rec.bound + 1e-9

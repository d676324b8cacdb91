"""Paired-seed policy sweeps and their CSV/JSON reports."""

from __future__ import annotations

import csv
import enum
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import signed_improvement_pct
from .model import Policy, SimConfig, config_to_dict, default_config
from .simulation import run_simulation

COLUMNS = [
    "sweep_var",
    "fixed_var",
    "existing_makespan",
    "improved_makespan",
    "makespan_impr_pct",
    "existing_throughput",
    "improved_throughput",
    "throughput_impr_pct",
    "existing_atat",
    "improved_atat",
    "atat_impr_pct",
    "seeds",
]

DEFAULT_SEEDS = tuple(range(1, 11))


class SweepKind(enum.Enum):
    VARY_GRIDLETS = "gridlets"
    VARY_RESOURCES = "resources"


class SweepError(RuntimeError):
    def __init__(self, point: int, seed: int, policy: str, cause: BaseException):
        super().__init__(f"sweep point {point}, seed {seed} ({policy}): {cause}")
        self.point = point
        self.seed = seed
        self.policy = policy


@dataclass
class SweepSpec:
    kind: SweepKind
    fixed_count: int
    start: int
    end: int
    step: int
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    base: SimConfig = field(default_factory=default_config)

    def __post_init__(self):
        self.kind = SweepKind(self.kind)
        self.seeds = tuple(self.seeds)
        if not self.start <= self.end:
            raise ValueError(f"sweep start {self.start} > end {self.end}")
        if not self.step > 0:
            raise ValueError("sweep step must be > 0")
        if not self.seeds:
            raise ValueError("a sweep needs at least one seed")
        if self.start < 1 or self.fixed_count < 1:
            raise ValueError("counts must be >= 1")

    @classmethod
    def canonical(cls, kind, base: SimConfig | None = None, seeds=DEFAULT_SEEDS, end: int | None = None) -> SweepSpec:
        """The two reference grids: 100..3700 gridlets on 100 resources, 50..3050 resources for 3000 gridlets."""
        kind = SweepKind(kind)
        base = base or default_config()
        if kind is SweepKind.VARY_GRIDLETS:
            return cls(kind, 100, 100, 3700 if end is None else end, 400, seeds, base)
        return cls(kind, 3000, 50, 3050 if end is None else end, 200, seeds, base)

    def points(self) -> list[int]:
        return list(range(self.start, self.end + 1, self.step))

    def config_for(self, point: int, seed: int, policy: Policy) -> SimConfig:
        if self.kind is SweepKind.VARY_GRIDLETS:
            counts = {"gridlets.count": point, "resources.count": self.fixed_count}
        else:
            counts = {"gridlets.count": self.fixed_count, "resources.count": point}
        return self.base.replace(policy=policy, seed=seed, **counts)


@dataclass
class SweepRow:
    sweep_var: int
    fixed_var: int
    existing_makespan: float
    improved_makespan: float
    makespan_impr_pct: float
    existing_throughput: float
    improved_throughput: float
    throughput_impr_pct: float
    existing_atat: float
    improved_atat: float
    atat_impr_pct: float
    seeds: tuple[int, ...]


@dataclass
class SweepReport:
    kind: SweepKind
    rows: list[SweepRow]
    runs: list[dict]  # one summary per (point, seed, policy)
    config: dict
    per_seed: list[SweepRow] = field(default_factory=list)

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.rows]


def _run_one(task):
    point, seed, policy, cfg = task
    try:
        summary = run_simulation(cfg).summary()
    except Exception as exc:  # re-raised with the sweep coordinates
        return point, seed, policy, exc
    return point, seed, policy, summary


def worker_count() -> int:
    env = os.environ.get("GRIDCHECK_WORKERS")
    if env is not None and env.strip() != "":
        n = int(env)
        if n < 0:
            raise ValueError("GRIDCHECK_WORKERS must be >= 0")
        return n
    return os.cpu_count() or 1


def _row(point: int, fixed: int, seeds, base: list[dict], adapt: list[dict]) -> SweepRow:
    def mean(runs, key):
        return math.fsum(r[key] for r in runs) / len(runs)

    mk = mean(base, "makespan"), mean(adapt, "makespan")
    tp = mean(base, "throughput"), mean(adapt, "throughput")
    at = mean(base, "atat"), mean(adapt, "atat")
    return SweepRow(
        point,
        fixed,
        mk[0],
        mk[1],
        signed_improvement_pct(*mk),
        tp[0],
        tp[1],
        signed_improvement_pct(*tp, higher_is_better=True),
        at[0],
        at[1],
        signed_improvement_pct(*at),
        tuple(seeds),
    )


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepReport:
    """Run Baseline and Adaptive on every (point, seed) with identical seeds and aggregate per point."""
    tasks = [
        (p, s, pol.value, spec.config_for(p, s, pol))
        for p in spec.points()
        for s in spec.seeds
        for pol in (Policy.BASELINE, Policy.ADAPTIVE)
    ]
    workers = worker_count() if workers is None else workers
    pool = None
    if workers <= 1 or len(tasks) == 1:
        results = map(_run_one, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_run_one, tasks, chunksize=1)

    by_key: dict[tuple[int, int, str], dict] = {}
    try:
        for point, seed, policy, out in results:  # map keeps task order
            if isinstance(out, BaseException):
                raise SweepError(point, seed, policy, out) from out
            by_key[(point, seed, policy)] = out
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)

    rows, per_seed, runs = [], [], []
    for p in spec.points():
        base = [by_key[(p, s, "baseline")] for s in spec.seeds]
        adapt = [by_key[(p, s, "adaptive")] for s in spec.seeds]
        rows.append(_row(p, spec.fixed_count, spec.seeds, base, adapt))
        for s, b, a in zip(spec.seeds, base, adapt):
            per_seed.append(_row(p, spec.fixed_count, (s,), [b], [a]))
            runs.append({"point": p, **b})
            runs.append({"point": p, **a})
    config = config_to_dict(spec.base)
    config.pop("seed")
    config.pop("policy")
    return SweepReport(spec.kind, rows, runs, config, per_seed)


# ---------------------------------------------------------------- output


def _fmt(name: str, value) -> str:
    if name == "seeds":
        return ";".join(str(s) for s in value)
    if name in ("sweep_var", "fixed_var"):
        return str(value)
    if name.endswith("_pct"):
        return f"{value:.2f}"
    if "throughput" in name:
        return f"{value:.8f}"
    return f"{value:.6f}"


def report_rows(report: SweepReport, per_seed: bool = False) -> list[dict[str, str]]:
    rows = report.per_seed if per_seed else report.rows
    return [{c: _fmt(c, getattr(r, c)) for c in COLUMNS} for r in rows]


def stats_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".stats.json")


def emit(report: SweepReport, fmt: str, path: str | Path, per_seed: bool = False) -> None:
    """Write the comparison table as CSV or JSON, plus a run-stats JSON sidecar."""
    path = Path(path)
    rows = report_rows(report, per_seed)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump({"kind": report.kind.value, "columns": COLUMNS, "rows": rows}, fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    sidecar = {"kind": report.kind.value, "config": report.config, "runs": report.runs}
    with open(stats_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")

"""Domain types shared by the simulator and the configuration document."""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a configuration value is invalid; ``field`` names the culprit."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ConfigWarning(UserWarning):
    pass


class GridletStatus(enum.Enum):
    CREATED = "Created"
    QUEUED = "Queued"
    RUNNING = "Running"
    FAILED = "Failed"
    SUCCESS = "Success"


_TRANSITIONS = {
    GridletStatus.CREATED: {GridletStatus.QUEUED},
    # re-queue without a failure happens when a waiting gridlet is released
    # by a resource that went down before starting it
    GridletStatus.QUEUED: {GridletStatus.RUNNING, GridletStatus.QUEUED},
    GridletStatus.RUNNING: {GridletStatus.FAILED, GridletStatus.SUCCESS},
    GridletStatus.FAILED: {GridletStatus.QUEUED},
    GridletStatus.SUCCESS: set(),
}


class Policy(enum.Enum):
    BASELINE = "baseline"
    ADAPTIVE = "adaptive"
    NONE = "none"  # checkpointing disabled; the overhead-accounting reference


@dataclass
class Gridlet:
    """A job. ``length`` is in MI, sizes in bytes, ``progress`` a fraction of length."""

    id: int
    length: float
    input_size: float = 0.0
    output_size: float = 0.0
    submit_time: float = 0.0
    status: GridletStatus = GridletStatus.CREATED
    progress: float = 0.0
    finish_time: float | None = None

    def __post_init__(self):
        for name in ("length", "input_size", "output_size", "submit_time"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"gridlet {self.id}: {name} must be finite and >= 0, got {value}")
        if self.status is not GridletStatus.CREATED or self.progress != 0.0:
            raise ValueError("gridlets are created fresh; use transition() afterwards")

    def transition(self, new: GridletStatus) -> None:
        if new not in _TRANSITIONS[self.status]:
            raise ValueError(f"gridlet {self.id}: illegal transition {self.status.value} -> {new.value}")
        self.status = new
        if new is GridletStatus.SUCCESS:
            self.progress = 1.0

    def set_progress(self, progress: float) -> None:
        if not 0.0 <= progress < 1.0:
            raise ValueError(f"gridlet {self.id}: progress {progress} outside [0, 1)")
        self.progress = progress

    @property
    def remaining_length(self) -> float:
        return self.length * (1.0 - self.progress)


@dataclass
class FaultIndex:
    """Per-resource outcome counters. ``dispatched`` counts jobs bound to the resource."""

    success_count: int = 0
    failure_count: int = 0
    dispatched: int = 0

    @property
    def resolved(self) -> int:
        return self.success_count + self.failure_count


@dataclass
class GridResource:
    id: int
    num_machines: int = 1
    pes_per_machine: int = 2
    mips_per_pe: float = 50.0
    bandwidth: float = 5000.0
    alive: bool = True
    queue: list[int] = field(default_factory=list)  # waiting gridlet ids, FIFO
    running: list[int] = field(default_factory=list)
    fault_index: FaultIndex = field(default_factory=FaultIndex)
    mttf: float = math.inf
    last_failure_at: float = -math.inf

    def __post_init__(self):
        if self.num_machines < 1 or self.pes_per_machine < 1:
            raise ValueError(f"resource {self.id}: needs at least one machine and one PE")
        if not (self.mips_per_pe > 0 and math.isfinite(self.mips_per_pe)):
            raise ValueError(f"resource {self.id}: mips_per_pe must be > 0")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError(f"resource {self.id}: bandwidth must be > 0")
        if not self.mttf > 0:
            raise ValueError(f"resource {self.id}: mttf must be > 0")

    @property
    def slots(self) -> int:
        return self.num_machines * self.pes_per_machine

    @property
    def capacity(self) -> float:
        """Aggregate speed in MI per sim-second."""
        return self.slots * self.mips_per_pe

    @property
    def workload(self) -> int:
        return len(self.running) + len(self.queue)


@dataclass(frozen=True, slots=True)
class CheckpointRecord:
    job_id: int
    seq: int
    progress: float
    taken_at: float
    origin: int
    replicas: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.seq < 1:
            raise ValueError("checkpoint seq starts at 1")
        if not 0.0 <= self.progress <= 1.0:
            raise ValueError(f"checkpoint progress {self.progress} outside [0, 1]")
        if self.origin in self.replicas:
            raise ValueError("the origin cannot also be a replica holder")


@dataclass(frozen=True)
class CheckpointPlan:
    count: int
    interval: float | None = None

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("checkpoint count must be >= 0")
        if self.count > 0 and not (self.interval is not None and self.interval > 0):
            raise ValueError("a plan with checkpoints needs a positive interval")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass
class ResourceSpec:
    count: int = 100
    num_machines: int = 1
    pes_per_machine: int = 2
    mips_per_pe: float = 50.0
    bandwidth: float = 5000.0


@dataclass
class GridletSpec:
    count: int = 100
    length_min: float = 0.0
    length_max: float = 50000.0
    fixed_length: float | None = None
    input_base: float = 100.0
    input_extra: tuple[float, float] = (0.10, 0.40)
    output_base: float = 250.0
    output_extra: tuple[float, float] = (0.10, 0.50)
    submit_time: float = 0.0


@dataclass
class FaultParams:
    """Failure injection knobs.

    ``mean_time_to_failure`` applies to every resource unless ``mttf_range`` is
    set, in which case each resource draws its own mttf log-uniformly from the
    range. The first ``permanent_resources`` resources never fail.
    """

    mean_time_to_failure: float = math.inf
    mttf_range: tuple[float, float] | None = None
    repair_delay: float = math.inf
    fail_while_idle: bool = True
    permanent_resources: int = 0


@dataclass
class CheckpointCostModel:
    base_write_time: float = 1.0
    size_per_checkpoint: float = 1000.0
    replica_factor: int = 2
    # outcomes a resource needs before the adaptive policy trusts its rates
    min_history: int = 1


@dataclass
class SchedulerSettings:
    alpha: float = 1.0
    beta: float = 1.0
    rho: float = 0.1
    deposit: float = 0.5
    epsilon: float = 1e-6
    initial_pheromone: float = 1.0
    queue_limit: int = 2  # waiting gridlets a resource may hold beyond its PEs


@dataclass
class SimConfig:
    resources: ResourceSpec = field(default_factory=ResourceSpec)
    gridlets: GridletSpec = field(default_factory=GridletSpec)
    faults: FaultParams = field(default_factory=FaultParams)
    checkpoint: CheckpointCostModel = field(default_factory=CheckpointCostModel)
    scheduler: SchedulerSettings = field(default_factory=SchedulerSettings)
    policy: Policy = Policy.ADAPTIVE
    baseline_interval: float = 10.0
    seed: int = 1

    def replace(self, **changes) -> SimConfig:
        """Copy with top-level or dotted (``"faults.repair_delay"``) overrides."""
        cfg = config_from_dict(config_to_dict(self))
        for key, value in changes.items():
            key = key.replace("__", ".")
            if "." in key:
                block, name = key.split(".", 1)
                setattr(getattr(cfg, block), name, value)
            else:
                setattr(cfg, key, value)
        return cfg


def _check(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ConfigError(field_name, message)


def _nonneg(value, field_name: str, allow_inf: bool = False) -> None:
    ok = isinstance(value, (int, float)) and not isinstance(value, bool) and value >= 0
    if ok and not allow_inf:
        ok = math.isfinite(value)
    _check(ok, field_name, f"must be a non-negative {'number' if allow_inf else 'finite number'}, got {value!r}")


def validate_config(cfg: SimConfig) -> SimConfig:
    """Check every field; return ``cfg`` (with replica_factor clamped if needed)."""
    r = cfg.resources
    _check(isinstance(r.count, int) and r.count >= 1, "resources.count", "need at least one resource")
    _check(r.num_machines >= 1, "resources.num_machines", "must be >= 1")
    _check(r.pes_per_machine >= 1, "resources.pes_per_machine", "must be >= 1")
    _check(math.isfinite(r.mips_per_pe) and r.mips_per_pe > 0, "resources.mips_per_pe", "must be > 0")
    _check(math.isfinite(r.bandwidth) and r.bandwidth > 0, "resources.bandwidth", "must be > 0")

    g = cfg.gridlets
    _check(isinstance(g.count, int) and g.count >= 1, "gridlets.count", "need at least one gridlet")
    _nonneg(g.length_min, "gridlets.length_min")
    _nonneg(g.length_max, "gridlets.length_max")
    _check(g.length_min <= g.length_max, "gridlets.length_max", "must be >= length_min")
    if g.fixed_length is not None:
        _nonneg(g.fixed_length, "gridlets.fixed_length")
    _nonneg(g.input_base, "gridlets.input_base")
    _nonneg(g.output_base, "gridlets.output_base")
    for name in ("input_extra", "output_extra"):
        lo, hi = getattr(g, name)
        _nonneg(lo, f"gridlets.{name}")
        _check(lo <= hi and math.isfinite(hi), f"gridlets.{name}", "needs lo <= hi")
    _nonneg(g.submit_time, "gridlets.submit_time")

    f = cfg.faults
    _check(f.mean_time_to_failure > 0, "faults.mean_time_to_failure", "must be > 0 (inf disables failures)")
    if f.mttf_range is not None:
        lo, hi = f.mttf_range
        _check(0 < lo <= hi and math.isfinite(hi), "faults.mttf_range", "needs 0 < lo <= hi < inf")
    _nonneg(f.repair_delay, "faults.repair_delay", allow_inf=True)
    _check(0 <= f.permanent_resources <= r.count, "faults.permanent_resources", "must be within [0, resources.count]")

    c = cfg.checkpoint
    _nonneg(c.base_write_time, "checkpoint.base_write_time")
    _nonneg(c.size_per_checkpoint, "checkpoint.size_per_checkpoint")
    _check(isinstance(c.replica_factor, int) and c.replica_factor >= 0, "checkpoint.replica_factor", "must be an integer >= 0")
    _check(isinstance(c.min_history, int) and c.min_history >= 0, "checkpoint.min_history", "must be an integer >= 0")
    if c.replica_factor >= r.count:
        clamped = r.count - 1
        warnings.warn(
            f"checkpoint.replica_factor {c.replica_factor} >= resources.count {r.count}; clamped to {clamped}",
            ConfigWarning,
            stacklevel=2,
        )
        c.replica_factor = clamped

    s = cfg.scheduler
    _nonneg(s.alpha, "scheduler.alpha")
    _nonneg(s.beta, "scheduler.beta")
    _check(0 < s.rho < 1, "scheduler.rho", "evaporation rate must be in (0, 1)")
    _nonneg(s.deposit, "scheduler.deposit")
    _check(s.epsilon > 0, "scheduler.epsilon", "must be > 0")
    _check(s.initial_pheromone > 0, "scheduler.initial_pheromone", "must be > 0")
    _check(isinstance(s.queue_limit, int) and s.queue_limit >= 0, "scheduler.queue_limit", "must be an integer >= 0")

    _check(isinstance(cfg.policy, Policy), "policy", "must be baseline, adaptive or none")
    _check(math.isfinite(cfg.baseline_interval) and cfg.baseline_interval > 0, "baseline_interval", "must be > 0")
    _check(isinstance(cfg.seed, int) and cfg.seed >= 0, "seed", "must be a non-negative integer")
    return cfg


# --------------------------------------------------------------------------
# JSON round trip
# --------------------------------------------------------------------------

_BLOCKS = {
    "resources": ResourceSpec,
    "gridlets": GridletSpec,
    "faults": FaultParams,
    "checkpoint": CheckpointCostModel,
    "scheduler": SchedulerSettings,
}
_TUPLE_FIELDS = {"input_extra", "output_extra", "mttf_range"}


def _decode_number(value):
    if value is None:
        return math.inf
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return math.inf
    return value


def _encode(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, tuple):
        return [_encode(v) for v in value]
    if isinstance(value, enum.Enum):
        return value.value
    return value


def config_from_dict(doc: dict[str, Any], base: SimConfig | None = None) -> SimConfig:
    """Build a SimConfig from a (possibly partial) document layered over ``base``."""
    base = base if base is not None else SimConfig()
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _BLOCKS:
            if not isinstance(value, dict):
                raise ConfigError(key, "must be an object")
            cls = _BLOCKS[key]
            known = {f.name for f in dataclasses.fields(cls)}
            current = dataclasses.asdict(getattr(base, key))
            for name, v in value.items():
                if name not in known:
                    raise ConfigError(f"{key}.{name}", "unknown field")
                if name in _TUPLE_FIELDS and v is not None:
                    v = tuple(_decode_number(x) for x in v)
                elif name in ("mean_time_to_failure", "repair_delay"):
                    v = _decode_number(v)
                current[name] = v
            kwargs[key] = cls(**current)
        elif key == "policy":
            try:
                kwargs["policy"] = Policy(str(value).lower())
            except ValueError:
                raise ConfigError("policy", f"unknown policy {value!r}") from None
        elif key in ("baseline_interval", "seed"):
            kwargs[key] = value
        else:
            raise ConfigError(key, "unknown field")
    out = dataclasses.replace(base, **kwargs)
    # deep-copy untouched blocks so callers never share mutable state
    for key, cls in _BLOCKS.items():
        if key not in kwargs:
            setattr(out, key, cls(**dataclasses.asdict(getattr(base, key))))
    return out


def config_to_dict(cfg: SimConfig) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    for key in _BLOCKS:
        doc[key] = {k: _encode(v) for k, v in dataclasses.asdict(getattr(cfg, key)).items()}
    doc["policy"] = cfg.policy.value
    doc["baseline_interval"] = cfg.baseline_interval
    doc["seed"] = cfg.seed
    return doc


DEFAULTS_PATH = Path(__file__).with_name("defaults.json")


def default_config() -> SimConfig:
    """The embedded default document with the standard grid hardware and workload."""
    with open(DEFAULTS_PATH) as fh:
        return config_from_dict(json.load(fh))


def load_config(source: str | Path) -> SimConfig:
    """Load a JSON document; the literal name ``defaults`` selects the embedded one.

    Keys missing from the document fall back to the embedded defaults.
    """
    if str(source) == "defaults":
        return validate_config(default_config())
    try:
        with open(source) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be an object")
    return validate_config(config_from_dict(doc, base=default_config()))

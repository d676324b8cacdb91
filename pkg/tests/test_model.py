import json
import math
import warnings

import pytest

from gridcheck.model import (
    CheckpointPlan,
    CheckpointRecord,
    ConfigError,
    ConfigWarning,
    Gridlet,
    GridletStatus,
    GridResource,
    Policy,
    SimConfig,
    config_from_dict,
    config_to_dict,
    default_config,
    load_config,
    validate_config,
)

S = GridletStatus


def test_default_hardware_is_accepted():
    cfg = validate_config(default_config())
    r = cfg.resources
    assert (r.num_machines, r.pes_per_machine, r.mips_per_pe, r.bandwidth) == (1, 2, 50.0, 5000.0)
    assert (cfg.gridlets.length_min, cfg.gridlets.length_max) == (0.0, 50000.0)


def test_zero_mips_rejected():
    cfg = SimConfig().replace(**{"resources.mips_per_pe": 0})
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    assert err.value.field == "resources.mips_per_pe"


def test_replica_factor_clamped_with_warning():
    cfg = SimConfig().replace(**{"resources.count": 4, "checkpoint.replica_factor": 10})
    with pytest.warns(ConfigWarning):
        out = validate_config(cfg)
    assert out.checkpoint.replica_factor == 3


@pytest.mark.parametrize(
    "key,value",
    [
        ("gridlets.count", -1),
        ("gridlets.length_min", 10.0),  # above length_max below
        ("faults.mean_time_to_failure", 0.0),
        ("faults.repair_delay", -1.0),
        ("checkpoint.base_write_time", -0.5),
        ("scheduler.rho", 1.0),
        ("scheduler.epsilon", 0.0),
        ("baseline_interval", 0.0),
        ("checkpoint.min_history", -1),
    ],
)
def test_invalid_fields_name_the_field(key, value):
    changes = {key: value}
    if key == "gridlets.length_min":
        changes["gridlets.length_max"] = 5.0
    with pytest.raises(ConfigError) as err:
        validate_config(SimConfig().replace(**changes))
    assert err.value.field.startswith(key.split(".")[0])


def test_lifecycle_transitions():
    g = Gridlet(0, 100.0)
    for s in (S.QUEUED, S.RUNNING, S.FAILED, S.QUEUED, S.RUNNING, S.SUCCESS):
        g.transition(s)
    assert g.progress == 1.0
    with pytest.raises(ValueError):
        g.transition(S.QUEUED)


def test_created_cannot_jump_to_running():
    with pytest.raises(ValueError):
        Gridlet(0, 1.0).transition(S.RUNNING)


def test_gridlet_rejects_negative_fields():
    with pytest.raises(ValueError):
        Gridlet(0, -1.0)
    with pytest.raises(ValueError):
        Gridlet(0, 1.0, input_size=-3)


def test_progress_bounds():
    g = Gridlet(0, 200.0)
    g.set_progress(0.25)
    assert g.remaining_length == 150.0
    with pytest.raises(ValueError):
        g.set_progress(1.0)


def test_resource_capacity_and_slots():
    r = GridResource(3, num_machines=2, pes_per_machine=2, mips_per_pe=50.0)
    assert r.slots == 4
    assert r.capacity == 200.0
    with pytest.raises(ValueError):
        GridResource(0, mips_per_pe=0)


def test_checkpoint_record_invariants():
    CheckpointRecord(1, 1, 0.5, 10.0, 0, frozenset({1, 2}))
    with pytest.raises(ValueError):
        CheckpointRecord(1, 0, 0.5, 10.0, 0)
    with pytest.raises(ValueError):
        CheckpointRecord(1, 1, 1.5, 10.0, 0)
    with pytest.raises(ValueError):
        CheckpointRecord(1, 1, 0.5, 10.0, 0, frozenset({0}))


def test_plan_invariants():
    assert CheckpointPlan(0).interval is None
    with pytest.raises(ValueError):
        CheckpointPlan(3)
    with pytest.raises(ValueError):
        CheckpointPlan(2, 0.0)


def test_json_round_trip_keeps_infinity():
    cfg = default_config()
    doc = json.loads(json.dumps(config_to_dict(cfg)))
    assert config_from_dict(doc) == cfg
    assert math.isinf(config_from_dict(doc).faults.mean_time_to_failure)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"resources": {"cores": 4}})
    with pytest.raises(ConfigError):
        config_from_dict({"colour": "blue"})


def test_partial_document_layers_over_defaults(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"gridlets": {"count": 7}, "policy": "baseline"}))
    cfg = load_config(path)
    assert cfg.gridlets.count == 7
    assert cfg.policy is Policy.BASELINE
    assert cfg.resources == default_config().resources


def test_load_defaults_by_name():
    assert load_config("defaults") == default_config()


def test_bad_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(path)


def test_replace_does_not_alias():
    a = SimConfig()
    b = a.replace(**{"faults.repair_delay": 5.0})
    assert math.isinf(a.faults.repair_delay)
    assert b.faults.repair_delay == 5.0


def test_validation_passes_silently_for_defaults():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        validate_config(default_config())

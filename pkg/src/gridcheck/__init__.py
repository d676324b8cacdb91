"""Grid checkpointing simulator: periodic versus failure-rate-driven checkpoint policies."""

from .model import Policy, SimConfig, default_config, load_config, validate_config
from .simulation import RunReport, Simulation, run_simulation

__all__ = [
    "Policy",
    "RunReport",
    "SimConfig",
    "Simulation",
    "default_config",
    "load_config",
    "run_simulation",
    "validate_config",
]

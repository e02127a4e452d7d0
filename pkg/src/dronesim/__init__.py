"""Deterministic discrete-event simulation of a Simplex-protected
quadcopter: a container-hosted position controller under CPU, memory
bandwidth and channel DoS attacks, a host-side safety controller, and
the security monitor that switches between them."""

from .runner import RunLog, export, run, run_sim
from .scenario import Scenario, list_presets, load_scenario

__all__ = [
    "RunLog",
    "Scenario",
    "export",
    "list_presets",
    "load_scenario",
    "run",
    "run_sim",
]

__version__ = "0.1.0"

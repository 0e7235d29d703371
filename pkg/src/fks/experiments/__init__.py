"""Scenario documents, verification campaigns and parameter sweeps."""
from .campaigns import (CAMPAIGNS, CampaignRefused, CampaignResult, resume, run_scenario,
                        verify_corollary, verify_theorem1, verify_theorem3,
                        verify_theorem_rlarge)
from .checks import DEFAULT_TOL, REGISTRY, Verdict
from .scenario import (SCHEMA_PATH, ScenarioSpec, SchemaError, build_initial, load_scenario,
                       validate_scenario)
from .sweeps import explore_subcritical, sweep_resolution, sweep_viscosity

__all__ = [
    "CAMPAIGNS", "CampaignRefused", "CampaignResult", "DEFAULT_TOL", "REGISTRY",
    "SCHEMA_PATH", "ScenarioSpec", "SchemaError", "Verdict", "build_initial",
    "explore_subcritical", "load_scenario", "resume", "run_scenario", "sweep_resolution",
    "sweep_viscosity", "validate_scenario", "verify_corollary", "verify_theorem1",
    "verify_theorem3", "verify_theorem_rlarge",
]

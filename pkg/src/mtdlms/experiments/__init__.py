"""Scenario builders: model validation, network flow and Poisson field reconstruction."""

from .flow import (FlowScenario, build_flow_scenario, flow_oracle, load_arcs,
                   oracle_agent_vector, regenerate_sources, tracking_flow, write_arcs)
from .metrics import (Violation, burn_in, constraint_violation, fit_slope,
                      steady_state_estimate)
from .poisson import PoissonScenario, build_poisson_scenario, stencil_residual
from .validation import build_validation_scenario, fig2_constraints, random_constraints

__all__ = [
    "FlowScenario", "build_flow_scenario", "flow_oracle", "load_arcs", "oracle_agent_vector",
    "regenerate_sources", "tracking_flow", "write_arcs", "Violation", "burn_in",
    "constraint_violation", "fit_slope", "steady_state_estimate", "PoissonScenario",
    "build_poisson_scenario", "stencil_residual", "build_validation_scenario",
    "random_constraints", "fig2_constraints",
]

"""Multitask diffusion LMS over networks with local linear equality constraints.

The package has five layers:

``network``      constraints, virtual sub-node expansion, projectors, closed-form optima
``datagen``      reproducible streaming data and ground-truth schedules
``algorithms``   non-cooperative LMS, centralized CLMS and the diffusion variants
``theory``       mean / mean-square models, the fourth-moment matrix ``F``, steady state
``experiments``  validation, network-flow and Poisson scenarios

plus the Monte Carlo driver (``ensemble``), experiment orchestration
(``runner``), output writers (``outputs``) and the ``simctl`` CLI.
"""

from .algorithms import AlgorithmState, Estimator
from .curves import LearningCurve
from .datagen import RngPolicy, SampleStream, StreamSample, sample_step
from .ensemble import SimulationResult, simulate
from .errors import (DivergenceError, RankDeficientError, ScenarioError, UnstableModelError,
                     UnsupportedConfiguration)
from .network import (Constraint, ConstraintSet, ExpandedNetwork, GroundTruth, NetworkTopology,
                      Scenario, build_projector, expand_network)

__version__ = "0.1.0"

__all__ = [
    "AlgorithmState", "Estimator", "LearningCurve", "RngPolicy", "SampleStream",
    "StreamSample", "sample_step", "SimulationResult", "simulate", "DivergenceError",
    "RankDeficientError", "ScenarioError", "UnstableModelError", "UnsupportedConfiguration",
    "Constraint", "ConstraintSet", "ExpandedNetwork", "GroundTruth", "NetworkTopology",
    "Scenario", "build_projector", "expand_network",
]

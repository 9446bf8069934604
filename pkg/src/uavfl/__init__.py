"""Latency optimization for federated learning over a sensing UAV fleet.

Submodules: model (analytic latency/energy and feasibility), convexify
(slack reformulations and convex surrogates), solver (inner convex solves
and the alternating outer loop), oracle (brute-force grid validation),
scenario (config file I/O), cli (command surface).
"""

from uavfl.model import (
    DecisionVector,
    EnergyBreakdown,
    LatencyBreakdown,
    ScenarioConfig,
    Violation,
    check_feasibility,
    evaluate,
)

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig", "DecisionVector", "LatencyBreakdown",
    "EnergyBreakdown", "Violation", "evaluate", "check_feasibility",
    "__version__",
]

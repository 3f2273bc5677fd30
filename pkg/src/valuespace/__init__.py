"""Value spaces, interpretation maps and belief dynamics on influence graphs."""

__version__ = "0.1.0"

from .agents import AbstractBeing, Agent, ValuationFunction, ValuationKind, ValueSpace  # noqa: E402
from .geometry import DEFAULT_TOL, TolerancePolicy  # noqa: E402
from .interpretation import InterpretationMap  # noqa: E402
from .network import Edge, InfluenceGraph, SimulationConfig  # noqa: E402

__all__ = [
    "__version__",
    "AbstractBeing",
    "Agent",
    "DEFAULT_TOL",
    "Edge",
    "InfluenceGraph",
    "InterpretationMap",
    "SimulationConfig",
    "TolerancePolicy",
    "ValuationFunction",
    "ValuationKind",
    "ValueSpace",
]

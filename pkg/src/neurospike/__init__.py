"""Simulation and certification of a spiking (LIF neuron pair) controller for LTI plants."""
from ._backend import DEFAULT_BACKEND, available_backends
from .errors import (ConfigurationError, ContractError, DesignError, NoSpikeError, NumericalFailure,
                     PreconditionError)
from .hybrid import (HybridState, HybridSystemDef, HybridTime, HybridTrace, JumpRecord, SolverOptions,
                     integrate_flow, locate_guard_crossing, simulate)
from .lif import (ClosedLoopScenario, NeuronParams, PlantParams, build_hybrid_system, builtin_scenario,
                  flow_map, guard_residuals, jump_map, load_scenario, simulate_scenario)
from .signals import PiecewiseLinearSignal

__version__ = "0.1.0"

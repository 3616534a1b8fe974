"""Event-based three-factor local plasticity (ETLP) for spiking neural networks.

Discrete-time LIF/ALIF simulation, the ETLP rule with BPTT and eProp
references, event-data loaders, a fixed-point gradient-unit model and an
experiment harness.
"""

from .config import RunConfig
from .errors import ConfigError, EtlpError, FormatError, FsmError, NumericError, ParameterError, ShapeError
from .experiment import run_experiment, theta_sweep
from .network import Network, Topology, evaluate, rate_decode, run_sample
from .neuron import LayerState, NeuronParams, step_layer

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EtlpError",
    "FormatError",
    "FsmError",
    "LayerState",
    "Network",
    "NeuronParams",
    "NumericError",
    "ParameterError",
    "RunConfig",
    "ShapeError",
    "Topology",
    "evaluate",
    "rate_decode",
    "run_experiment",
    "run_sample",
    "step_layer",
    "theta_sweep",
]

"""Momentum back-propagation network and an obstacle-avoiding rover simulator."""

from .errors import FormatError, NonFiniteError, ShapeError
from .kernels import BACKEND
from .network import (
    ActivationKind,
    DeltaState,
    ForwardTrace,
    Network,
    Topology,
    UpdateMode,
    backprop_step,
    forward,
    loss,
    neuron_net_input,
    output_errors,
    paper_network,
    sigmoid,
    update_hidden_weights,
    update_output_weights,
)

__version__ = "0.1.0"

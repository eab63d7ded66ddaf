"""Feed-forward network with bias columns and momentum back-propagation.

Weights are stored one matrix per layer transition, shaped
``(destination neurons, source neurons + 1)``; the last column holds the
weight applied to the constant bias input. Hidden layers share one activation
and the output layer has its own (sigmoid hidden / linear output for the
rover controller).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _pykernels, kernels
from .errors import NonFiniteError, ShapeError


class ActivationKind(enum.Enum):
    SIGMOID = "sigmoid"
    LINEAR = "linear"

    @property
    def code(self) -> int:
        return kernels.SIGMOID if self is ActivationKind.SIGMOID else kernels.LINEAR


class UpdateMode(enum.Enum):
    """Ordering of the output-layer and hidden-layer updates within one step.

    ``SEQUENTIAL_PAPER`` mutates the output weights first, and the hidden
    layer error sums then read those new values. ``SIMULTANEOUS`` computes all
    changes from the pre-step weights, i.e. plain gradient descent on the
    squared error.
    """

    SEQUENTIAL_PAPER = "sequential"
    SIMULTANEOUS = "simultaneous"


@dataclass(frozen=True)
class Topology:
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2:
            raise ShapeError(f"need at least an input and an output layer, got {sizes}")
        if any(n < 1 for n in sizes):
            raise ShapeError(f"layer sizes must be positive, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def weight_shapes(self) -> list[tuple[int, int]]:
        s = self.layer_sizes
        return [(s[i + 1], s[i] + 1) for i in range(len(s) - 1)]


@dataclass
class Network:
    topology: Topology
    weights: list[np.ndarray]
    hidden_activation: ActivationKind = ActivationKind.SIGMOID
    output_activation: ActivationKind = ActivationKind.LINEAR
    bias_input: float = 1.0

    def __post_init__(self):
        if not isinstance(self.topology, Topology):
            self.topology = Topology(tuple(self.topology))
        self.weights = [np.array(W, dtype=np.float64, order="C") for W in self.weights]
        expected = self.topology.weight_shapes()
        if len(self.weights) != len(expected):
            raise ShapeError(
                f"topology {self.topology.layer_sizes} needs {len(expected)} weight matrices, "
                f"got {len(self.weights)}"
            )
        for l, (W, shape) in enumerate(zip(self.weights, expected)):
            if W.shape != shape:
                raise ShapeError(f"weight matrix {l} has shape {W.shape}, expected {shape}")
            if not np.isfinite(W).all():
                raise NonFiniteError(f"weight matrix {l} contains non-finite values")
        self.hidden_activation = ActivationKind(self.hidden_activation)
        self.output_activation = ActivationKind(self.output_activation)
        self.bias_input = float(self.bias_input)

    @classmethod
    def zeros(cls, layer_sizes, **kw) -> Network:
        topo = Topology(tuple(layer_sizes))
        return cls(topo, [np.zeros(s) for s in topo.weight_shapes()], **kw)

    @classmethod
    def random(cls, layer_sizes, seed: int = 0, low: float = 0.0, high: float = 1.0, **kw) -> Network:
        """Weights drawn uniformly from ``[low, high)`` with a seeded generator."""
        topo = Topology(tuple(layer_sizes))
        rng = np.random.default_rng(seed)
        return cls(topo, [rng.uniform(low, high, size=s) for s in topo.weight_shapes()], **kw)

    @property
    def kinds(self) -> tuple[int, ...]:
        n = len(self.weights)
        return tuple([self.hidden_activation.code] * (n - 1) + [self.output_activation.code])

    def activation_for(self, layer: int) -> ActivationKind:
        return self.output_activation if layer == len(self.weights) - 1 else self.hidden_activation

    def copy(self) -> Network:
        return Network(
            self.topology,
            [W.copy() for W in self.weights],
            self.hidden_activation,
            self.output_activation,
            self.bias_input,
        )

    def __call__(self, x) -> np.ndarray:
        return forward(self, x).output_out


def paper_network() -> Network:
    """The 2-3-2 controller with its published initial weights."""
    hidden = [[0.17, 0.33, 0.1], [0.3, 0.71, 0.21], [0.15, 0.43, 0.69]]
    output = [[0.11, 0.03, 0.52, 0.41], [0.93, 0.14, 0.79, 0.66]]
    return Network(Topology((2, 3, 2)), [hidden, output])


@dataclass
class DeltaState:
    """Previous weight changes, one matrix per weight matrix, for the momentum term."""

    deltas: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Network) -> DeltaState:
        return cls([np.zeros_like(W) for W in net.weights])

    def copy(self) -> DeltaState:
        return DeltaState([D.copy() for D in self.deltas])

    def check(self, net: Network):
        shapes = [D.shape for D in self.deltas]
        if shapes != [W.shape for W in net.weights]:
            raise ShapeError(f"delta shapes {shapes} do not match network")


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    nets: list[np.ndarray] = field(repr=False)
    outs: list[np.ndarray] = field(repr=False)

    @property
    def hidden_net(self) -> np.ndarray:
        return self.nets[-2] if len(self.nets) > 1 else self.inputs

    @property
    def hidden_out(self) -> np.ndarray:
        return self.outs[-2] if len(self.outs) > 1 else self.inputs

    @property
    def output_net(self) -> np.ndarray:
        return self.nets[-1]

    @property
    def output_out(self) -> np.ndarray:
        return self.outs[-1]


def sigmoid(t):
    """Logistic function ``1 / (1 + exp(-t))``, overflow-safe for large ``|t|``."""
    if isinstance(t, np.ndarray):
        return _pykernels.activate(t.astype(np.float64), kernels.SIGMOID)
    t = float(t)
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def neuron_net_input(inputs, weight_row, bias_input: float = 1.0) -> float:
    """Weighted input sum of one neuron; ``weight_row[-1]`` multiplies ``bias_input``."""
    inputs = np.asarray(inputs, dtype=np.float64)
    weight_row = np.asarray(weight_row, dtype=np.float64)
    if weight_row.shape != (inputs.shape[0] + 1,):
        raise ShapeError(
            f"weight row of length {weight_row.shape} needs {inputs.shape[0] + 1} entries"
        )
    s = 0.0
    for x, w in zip(inputs, weight_row[:-1]):
        s += x * w
    return float(s + bias_input * weight_row[-1])


def _vector(v, n: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ShapeError(f"{what} has shape {v.shape}, expected ({n},)")
    return v


def forward(net: Network, x) -> ForwardTrace:
    x = _vector(x, net.topology.n_inputs, "input")
    nets, outs = kernels.forward(net.weights, x, net.bias_input, net.kinds)
    return ForwardTrace(x, [np.asarray(v) for v in nets], [np.asarray(v) for v in outs])


def output_errors(desired, actual) -> np.ndarray:
    """``desired - actual`` componentwise."""
    desired = np.asarray(desired, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if desired.shape != actual.shape or desired.ndim != 1:
        raise ShapeError(f"desired {desired.shape} and actual {actual.shape} differ")
    return desired - actual


def loss(desired, actual) -> float:
    """Half the sum of squared errors."""
    e = output_errors(desired, actual)
    return 0.5 * float(e @ e)


def update_output_weights(net: Network, trace: ForwardTrace, err, eta: float, alpha: float,
                          delta: DeltaState) -> tuple[Network, DeltaState]:
    """Output layer step: ``dW = alpha * dW_prev + eta * hidden_out[j] * err[i]``.

    The bias column uses ``net.bias_input`` in place of ``hidden_out[j]``.
    For a non-linear output activation the error is scaled by its slope.
    Returns new copies; the arguments are left untouched.
    """
    delta.check(net)
    err = _vector(err, net.topology.n_outputs, "error vector")
    new_net, new_delta = net.copy(), delta.copy()
    signal = err * _pykernels.activation_slope(trace.output_out, net.output_activation.code)
    _pykernels.apply_layer_update(
        new_net.weights[-1], new_delta.deltas[-1], trace.hidden_out, signal, eta, alpha,
        net.bias_input,
    )
    return new_net, new_delta


def update_hidden_weights(net: Network, x, trace: ForwardTrace, err, eta: float, alpha: float,
                          delta: DeltaState,
                          mode: UpdateMode = UpdateMode.SEQUENTIAL_PAPER
                          ) -> tuple[Network, DeltaState]:
    """Hidden layer step(s).

    ``dW = alpha * dW_prev + eta * src[s] * h[j] * (1 - h[j]) * sum_k err[k] * W_out[k, j]``

    ``W_out`` is read from ``net`` as given: pass the network whose output
    layer has already been updated for ``SEQUENTIAL_PAPER``, the untouched one
    for ``SIMULTANEOUS``. With more than one hidden layer the signal is carried
    down layer by layer; ``mode`` decides whether each layer sees the updated
    or the original weights above it.
    """
    delta.check(net)
    x = _vector(x, net.topology.n_inputs, "input")
    err = _vector(err, net.topology.n_outputs, "error vector")
    new_net, new_delta = net.copy(), delta.copy()
    W, D = new_net.weights, new_delta.deltas
    L = len(W)
    outs = trace.outs
    srcs = [x] + outs[:-1]
    signal = err * _pykernels.activation_slope(outs[-1], net.output_activation.code)
    if mode is UpdateMode.SIMULTANEOUS:
        signals = [None] * L
        signals[-1] = signal
        for l in range(L - 1, 0, -1):
            signals[l - 1] = _pykernels.backward_signal(
                W[l], signals[l], outs[l - 1], net.hidden_activation.code)
        for l in range(L - 1):
            _pykernels.apply_layer_update(W[l], D[l], srcs[l], signals[l], eta, alpha,
                                          net.bias_input)
    else:
        for l in range(L - 1, 0, -1):
            signal = _pykernels.backward_signal(W[l], signal, outs[l - 1],
                                                net.hidden_activation.code)
            _pykernels.apply_layer_update(W[l - 1], D[l - 1], srcs[l - 1], signal, eta, alpha,
                                          net.bias_input)
    return new_net, new_delta


def backprop_step(net: Network, pattern, eta: float = 0.25, alpha: float = 0.0,
                  mode: UpdateMode = UpdateMode.SEQUENTIAL_PAPER,
                  delta: DeltaState | None = None):
    """Forward pass, error, then the output and hidden updates for one pattern.

    Returns ``(new_net, new_delta, err, trace)``; the trace is the pre-update
    forward pass.
    """
    x, desired = pattern
    x = _vector(x, net.topology.n_inputs, "input")
    desired = _vector(desired, net.topology.n_outputs, "desired output")
    if delta is None:
        delta = DeltaState.zeros_like(net)
    delta.check(net)
    trace = forward(net, x)
    new_net, new_delta = net.copy(), delta.copy()
    err = kernels.backprop(
        new_net.weights, new_delta.deltas, x, desired, float(eta), float(alpha),
        net.bias_input, net.kinds, mode is UpdateMode.SEQUENTIAL_PAPER,
        (trace.nets, trace.outs),
    )
    return new_net, new_delta, np.asarray(err), trace

"""Epoch-driven training, gradient checking and network/dataset files."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import FormatError, NonFiniteError, ShapeError
from .network import (
    ActivationKind,
    DeltaState,
    Network,
    Topology,
    UpdateMode,
    backprop_step,
    forward,
    loss,
)

log = logging.getLogger(__name__)


class Pattern(NamedTuple):
    input: np.ndarray
    desired: np.ndarray


@dataclass
class Dataset:
    patterns: list[Pattern]

    def __post_init__(self):
        if not self.patterns:
            raise ShapeError("dataset is empty")
        self.patterns = [
            Pattern(np.asarray(p[0], dtype=np.float64), np.asarray(p[1], dtype=np.float64))
            for p in self.patterns
        ]
        n_in, n_out = self.patterns[0].input.shape, self.patterns[0].desired.shape
        for k, p in enumerate(self.patterns):
            if p.input.ndim != 1 or p.input.shape != n_in or p.desired.shape != n_out:
                raise ShapeError(f"pattern {k} has dimensions {p.input.shape}->{p.desired.shape}, "
                                 f"expected {n_in}->{n_out}")

    @classmethod
    def from_arrays(cls, X, T) -> Dataset:
        return cls([Pattern(x, t) for x, t in zip(np.atleast_2d(X), np.atleast_2d(T))])

    def __len__(self):
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.ascontiguousarray([p.input for p in self.patterns], dtype=np.float64)
        T = np.ascontiguousarray([p.desired for p in self.patterns], dtype=np.float64)
        return X, T

    def check(self, net: Network):
        p = self.patterns[0]
        if p.input.shape[0] != net.topology.n_inputs or p.desired.shape[0] != net.topology.n_outputs:
            raise ShapeError(
                f"dataset is {p.input.shape[0]}->{p.desired.shape[0]} but network is "
                f"{net.topology.n_inputs}->{net.topology.n_outputs}"
            )


# Obstacle-avoidance training set: (left sensor, right sensor) -> (left wheel, right wheel).
AVOIDANCE_PATTERNS = [
    ((0.0, 0.0), (1.0, 1.0)),
    ((1.0, 0.0), (1.0, 0.2)),
    ((0.0, 1.0), (0.2, 1.0)),
    ((1.0, 1.0), (0.2, 0.2)),
]


def avoidance_dataset() -> Dataset:
    return Dataset([Pattern(x, t) for x, t in AVOIDANCE_PATTERNS])


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.25
    momentum: float = 0.0
    bias_input: float = 1.0
    error_threshold: float = 0.01
    max_epochs: int = 10000
    mode: UpdateMode = UpdateMode.SEQUENTIAL_PAPER
    trace: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be > 0, got {self.learning_rate}")
        if not self.momentum >= 0:
            raise ValueError(f"momentum must be >= 0, got {self.momentum}")
        if not self.error_threshold > 0:
            raise ValueError(f"error threshold must be > 0, got {self.error_threshold}")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be >= 0, got {self.max_epochs}")
        object.__setattr__(self, "mode", UpdateMode(self.mode))


@dataclass
class EpochReport:
    epoch_index: int
    per_pattern_max_abs_error: np.ndarray
    epoch_max_abs_error: float
    updates: int = 0
    weights_snapshot: list[np.ndarray] | None = field(default=None, repr=False)


@dataclass
class TrainingResult:
    final_network: Network
    reports: list[EpochReport]
    converged: bool
    epochs_run: int
    final_delta: DeltaState | None = field(default=None, repr=False)


def initial_network(layer_sizes=(2, 3, 2), cfg: TrainingConfig | None = None) -> Network:
    """Seeded uniform [0, 1) weights."""
    cfg = cfg or TrainingConfig()
    return Network.random(layer_sizes, seed=cfg.seed, bias_input=cfg.bias_input)


def _with_bias(net: Network, cfg: TrainingConfig) -> Network:
    net = net.copy()
    net.bias_input = float(cfg.bias_input)
    return net


def _epoch_inplace(net: Network, X, T, cfg: TrainingConfig, delta: DeltaState,
                   index: int) -> EpochReport:
    seen, n_updates = kernels.train_epoch(
        net.weights, delta.deltas, X, T, cfg.learning_rate, cfg.momentum, net.bias_input,
        net.kinds, cfg.mode is UpdateMode.SEQUENTIAL_PAPER, cfg.error_threshold,
    )
    if not np.isfinite(seen).all():
        raise NonFiniteError(f"non-finite output error in epoch {index}")
    # convergence is re-tested on every pattern once the sweep is over
    after = np.asarray(kernels.max_abs_errors(net.weights, X, T, net.bias_input, net.kinds))
    return EpochReport(
        epoch_index=index,
        per_pattern_max_abs_error=after,
        epoch_max_abs_error=float(after.max()),
        updates=int(n_updates),
        weights_snapshot=[W.copy() for W in net.weights] if cfg.trace else None,
    )


def train_epoch(net: Network, data: Dataset, cfg: TrainingConfig,
                delta: DeltaState | None = None, epoch_index: int = 0):
    """One ordered sweep over ``data``.

    A pattern whose max-abs error is already within ``cfg.error_threshold``
    is skipped: no weight change and the momentum state is left as is.
    Returns ``(network, delta, report)`` as new objects.
    """
    data.check(net)
    net = _with_bias(net, cfg)
    delta = DeltaState.zeros_like(net) if delta is None else delta.copy()
    delta.check(net)
    X, T = data.arrays()
    report = _epoch_inplace(net, X, T, cfg, delta, epoch_index)
    return net, delta, report


def train(net: Network, data: Dataset, cfg: TrainingConfig | None = None,
          delta: DeltaState | None = None,
          on_epoch: Callable[[EpochReport], None] | None = None) -> TrainingResult:
    """Repeat epochs until every pattern is within threshold or ``max_epochs`` is hit.

    Non-convergence is reported through ``TrainingResult.converged``.
    """
    cfg = cfg or TrainingConfig()
    data.check(net)
    net = _with_bias(net, cfg)
    delta = DeltaState.zeros_like(net) if delta is None else delta.copy()
    delta.check(net)
    X, T = data.arrays()

    errs = np.asarray(kernels.max_abs_errors(net.weights, X, T, net.bias_input, net.kinds))
    converged = bool(errs.max() <= cfg.error_threshold)
    reports = []
    epoch = 0
    while not converged and epoch < cfg.max_epochs:
        epoch += 1
        report = _epoch_inplace(net, X, T, cfg, delta, epoch)
        reports.append(report)
        if on_epoch is not None:
            on_epoch(report)
        converged = report.epoch_max_abs_error <= cfg.error_threshold
    log.debug("training stopped after %d epochs, converged=%s", epoch, converged)
    return TrainingResult(net, reports, converged, epoch, delta)


_GRAD_GUARD = 1e-12


def gradient_deviations(net: Network, pattern, h: float = 1e-5) -> list[np.ndarray]:
    """Relative deviation of every weight's analytic update from central differences.

    The analytic side is one simultaneous back-propagation step with unit
    learning rate and no momentum, so the weight change equals ``-dL/dW`` for
    ``L = 0.5 * sum(err**2)``. Each deviation is
    ``|a - n| / max(|a|, |n|)``, and 0 when both sides are below ``1e-12``.
    """
    if not h > 0:
        raise ValueError(f"step h must be > 0, got {h}")
    x, desired = (np.asarray(v, dtype=np.float64) for v in pattern)
    _, delta, _, _ = backprop_step(net, (x, desired), eta=1.0, alpha=0.0,
                                   mode=UpdateMode.SIMULTANEOUS)
    probe = net.copy()
    out = []
    for l, W in enumerate(probe.weights):
        dev = np.empty_like(W)
        for idx in np.ndindex(W.shape):
            w0 = W[idx]
            W[idx] = w0 + h
            lp = loss(desired, forward(probe, x).output_out)
            W[idx] = w0 - h
            lm = loss(desired, forward(probe, x).output_out)
            W[idx] = w0
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NonFiniteError(f"non-finite loss while perturbing weight {l}{idx}")
            numeric = -(lp - lm) / (2.0 * h)
            analytic = delta.deltas[l][idx]
            scale = max(abs(analytic), abs(numeric))
            # below the guard both sides are truncation noise around zero
            dev[idx] = abs(analytic - numeric) / scale if scale >= _GRAD_GUARD else 0.0
        out.append(dev)
    return out


def gradient_check(net: Network, pattern, h: float = 1e-5) -> float:
    """Largest relative deviation between analytic and finite-difference gradients."""
    return float(max(d.max() for d in gradient_deviations(net, pattern, h)))


def worst_weight(deviations: Sequence[np.ndarray]) -> tuple[int, tuple[int, ...], float]:
    """``(layer, (row, col), deviation)`` of the largest entry."""
    best = (0, (0, 0), -1.0)
    for l, d in enumerate(deviations):
        idx = np.unravel_index(int(np.argmax(d)), d.shape)
        if d[idx] > best[2]:
            best = (l, tuple(int(i) for i in idx), float(d[idx]))
    return best


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def network_to_json(net: Network) -> str:
    """JSON text with every weight written to 17 significant digits."""
    mats = []
    for W in net.weights:
        rows = ",\n    ".join("[" + ", ".join(_fmt(v) for v in row) + "]" for row in W)
        mats.append("[\n    " + rows + "\n  ]")
    return (
        "{\n"
        f'"topology": {json.dumps(list(net.topology.layer_sizes))},\n'
        f'"activations": {json.dumps([net.hidden_activation.value, net.output_activation.value])},\n'
        f'"bias_input": {_fmt(net.bias_input)},\n'
        '"weights": [\n  ' + ",\n  ".join(mats) + "\n]\n}\n"
    )


def network_from_dict(doc) -> Network:
    if not isinstance(doc, dict):
        raise FormatError("network document must be a JSON object")
    missing = {"topology", "weights"} - doc.keys()
    if missing:
        raise FormatError(f"network document lacks {sorted(missing)}")
    acts = doc.get("activations", ["sigmoid", "linear"])
    if not isinstance(acts, list) or len(acts) != 2:
        raise FormatError("'activations' must list the hidden and output activation")
    try:
        hidden, output = (ActivationKind(a) for a in acts)
    except ValueError as e:
        raise FormatError(f"unknown activation: {e}") from None
    try:
        topo = Topology(tuple(doc["topology"]))
        weights = [np.array(W, dtype=np.float64) for W in doc["weights"]]
    except (TypeError, ValueError) as e:
        if isinstance(e, ShapeError):
            raise
        raise FormatError(f"malformed topology or weights: {e}") from None
    return Network(topo, weights, hidden, output, float(doc.get("bias_input", 1.0)))


def save_network(net: Network, path):
    Path(path).write_text(network_to_json(net))


def load_network(path) -> Network:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from None
    return network_from_dict(doc)


def load_dataset(path, n_inputs: int | None = None) -> Dataset:
    """CSV with a header naming ``in0, in1, ...`` then ``out0, out1, ...`` columns."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty dataset file") from None
        ins = [i for i, h in enumerate(header) if h.startswith("in")]
        outs = [i for i, h in enumerate(header) if h.startswith("out")]
        if not ins or not outs or len(ins) + len(outs) != len(header):
            raise FormatError(f"{path}: header must be in0..inN,out0..outM, got {header}")
        if n_inputs is not None and len(ins) != n_inputs:
            raise FormatError(f"{path}: {len(ins)} input columns, network takes {n_inputs}")
        patterns = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric field in {row}") from None
            patterns.append(Pattern([vals[i] for i in ins], [vals[i] for i in outs]))
    if not patterns:
        raise FormatError(f"{path}: no patterns")
    return Dataset(patterns)


def save_dataset(data: Dataset, path):
    n_in, n_out = data.patterns[0].input.shape[0], data.patterns[0].desired.shape[0]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"in{i}" for i in range(n_in)] + [f"out{i}" for i in range(n_out)])
        for p in data:
            w.writerow([repr(float(v)) for v in (*p.input, *p.desired)])



AVOIDANCE_CONFIG = TrainingConfig(momentum=0.9)


def avoidance_controller(seed: int = 0) -> TrainingResult:
    """Train a seeded 2-3-2 network on the avoidance set with momentum 0.9.

    This is how the bundled ``data/avoidance_network.json`` was produced.
    """
    cfg = TrainingConfig(momentum=AVOIDANCE_CONFIG.momentum, seed=seed)
    return train(initial_network((2, 3, 2), cfg), avoidance_dataset(), cfg)

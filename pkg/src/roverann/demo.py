"""Worked example: one training step of the 2-3-2 controller from its published weights."""

from __future__ import annotations

from typing import NamedTuple

from .network import UpdateMode, backprop_step, paper_network

PATTERN = ((0.0, 0.0), (1.0, 1.0))
LEARNING_RATE = 0.25
TOLERANCE = 5e-3

# published values, rounded to 3 digits at each intermediate step
PUBLISHED = {
    "Input of h0": 0.1,
    "Output of h0": 0.524,
    "Input of h1": 0.21,
    "Output of h1": 0.552,
    "Input of h2": 0.69,
    "Output of h2": 0.665,
    "Output of O0": 0.83,
    "Output of O1": 1.74995,
    "Error of O0": 0.17,
    "Error of O1": -0.74994,
    "W00(out)": 0.13227,
    "W10(out)": 0.83176,
    "W01(out)": 0.05346,
    "W00(hid)": 0.17,
}


class Line(NamedTuple):
    label: str
    value: float
    published: float | None

    @property
    def ok(self) -> bool:
        return self.published is None or abs(self.value - self.published) <= TOLERANCE


def worked_example(mode: UpdateMode = UpdateMode.SEQUENTIAL_PAPER) -> list[Line]:
    """Every intermediate quantity of the step, paired with its published value if any.

    Only the input columns of the hidden matrix are listed: the hidden bias
    weights depend on ``mode``, everything listed here does not.
    """
    net = paper_network()
    new, _, err, trace = backprop_step(net, PATTERN, LEARNING_RATE, 0.0, mode)
    values = {}
    for j in range(3):
        values[f"Input of h{j}"] = trace.hidden_net[j]
        values[f"Output of h{j}"] = trace.hidden_out[j]
    for k in range(2):
        values[f"Input of O{k}"] = trace.output_net[k]
        values[f"Output of O{k}"] = trace.output_out[k]
    for k in range(2):
        values[f"Error of O{k}"] = err[k]
    W_out, W_hid = new.weights[1], new.weights[0]
    for i in range(2):
        for j in range(4):
            values[f"W{i}{j}(out)"] = W_out[i, j]
    for i in range(3):
        for j in range(2):
            values[f"W{i}{j}(hid)"] = W_hid[i, j]
    return [Line(k, float(v), PUBLISHED.get(k)) for k, v in values.items()]

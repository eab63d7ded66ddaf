"""Command-line front end: ``demo-paper``, ``train``, ``gradcheck`` and ``simulate``.

Exit codes: 0 success, 1 bad input or failed check, 2 training did not
converge / simulation timed out, 3 simulation ended in a collision.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .demo import worked_example
from .errors import FormatError, NonFiniteError, ShapeError
from .network import Network, UpdateMode
from .rover import (
    Outcome,
    SimConfig,
    export_trajectory_csv,
    export_trajectory_svg,
    load_scenario,
    simulate,
)
from .trainer import (
    TrainingConfig,
    gradient_deviations,
    initial_network,
    load_dataset,
    load_network,
    save_network,
    train,
    worst_weight,
)

EXIT_OK, EXIT_BAD, EXIT_NOT_CONVERGED, EXIT_COLLISION = 0, 1, 2, 3
SIM_EXIT = {Outcome.REACHED_GOAL: EXIT_OK, Outcome.TIMEOUT: 2, Outcome.COLLISION: 3}
GRADCHECK_LIMIT = 1e-6


def data_file(name: str) -> Path:
    return Path(str(resources.files("roverann") / "data" / name))


class _Parser(argparse.ArgumentParser):
    # argparse's own exit status 2 would read as "not converged"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD, f"{self.prog}: error: {message}\n")


def _number(kind, lo, strict):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not (v > lo if strict else v >= lo):
            raise argparse.ArgumentTypeError(f"must be {'>' if strict else '>='} {lo}, got {text}")
        return v
    return parse


positive = _number(float, 0, strict=True)
non_negative = _number(float, 0, strict=False)
count = _number(int, 0, strict=False)


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_BAD


def cmd_demo_paper(args) -> int:
    lines = worked_example(UpdateMode(args.mode))
    for line in lines:
        print(f"{line.label} = {line.value:.6f}")
    bad = [l for l in lines if not l.ok]
    for l in bad:
        print(f"MISMATCH {l.label}: expected {l.published} got {l.value:.6f}", file=sys.stderr)
    print("all published values reproduced" if not bad else f"{len(bad)} mismatches")
    return EXIT_OK if not bad else EXIT_BAD


def cmd_train(args) -> int:
    dataset_path = args.dataset or data_file("avoidance.csv")
    try:
        cfg = TrainingConfig(
            learning_rate=args.lr, momentum=args.momentum, bias_input=args.bias,
            error_threshold=args.threshold, max_epochs=args.epochs, mode=UpdateMode(args.mode),
            trace=args.trace, seed=args.seed,
        )
    except ValueError as e:
        return _fail(str(e))
    try:
        data = load_dataset(dataset_path)
    except (OSError, FormatError, ShapeError) as e:
        return _fail(f"dataset {dataset_path}: {e}")
    if args.weights:
        try:
            net = load_network(args.weights)
        except (OSError, FormatError, ShapeError, NonFiniteError) as e:
            return _fail(f"weights {args.weights}: {e}")
    else:
        n_in = data.patterns[0].input.shape[0]
        n_out = data.patterns[0].desired.shape[0]
        net = initial_network((n_in, args.hidden, n_out), cfg)

    on_epoch = None
    if args.trace:
        def on_epoch(report):
            print(f"epoch,{report.epoch_index},max_abs_error,{report.epoch_max_abs_error!r}",
                  flush=True)
    try:
        result = train(net, data, cfg, on_epoch=on_epoch)
    except ShapeError as e:
        return _fail(f"dataset {dataset_path} does not fit the network: {e}")
    except NonFiniteError as e:
        return _fail(f"training diverged: {e}")

    if args.out:
        save_network(result.final_network, args.out)
    status = "converged" if result.converged else "not converged"
    final = result.reports[-1].epoch_max_abs_error if result.reports else None
    print(f"{status} after {result.epochs_run} epochs"
          + (f", max_abs_error {final:.6g}" if final is not None else ""))
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_gradcheck(args) -> int:
    if args.trials == 0:
        print("warning: no trials requested, nothing checked", file=sys.stderr)
        print("max relative deviation: 0")
        return EXIT_OK
    rng = np.random.default_rng(args.seed)
    worst_overall = 0.0
    failed = False
    for trial in range(args.trials):
        net = Network.random((2, 3, 2), seed=int(rng.integers(2**32)), low=-1.0, high=1.0)
        pattern = (rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2))
        layer, idx, dev = worst_weight(gradient_deviations(net, pattern, args.h))
        worst_overall = max(worst_overall, dev)
        print(f"trial {trial}: max relative deviation {dev:.3e}")
        if not dev < GRADCHECK_LIMIT:
            failed = True
            print(f"trial {trial}: weight matrix {layer} entry {list(idx)} deviates by {dev:.3e}",
                  file=sys.stderr)
    print(f"max relative deviation: {worst_overall:.3e}")
    return EXIT_BAD if failed else EXIT_OK


def cmd_simulate(args) -> int:
    network_path = args.network or data_file("avoidance_network.json")
    scenario_path = args.scenario or data_file("paper_scenario.json")
    try:
        net = load_network(network_path)
    except (OSError, FormatError, ShapeError, NonFiniteError) as e:
        return _fail(f"network {network_path}: {e}")
    try:
        world = load_scenario(scenario_path)
    except (OSError, FormatError) as e:
        return _fail(f"scenario {scenario_path}: {e}")
    try:
        cfg = SimConfig.from_dict(json.loads(Path(args.config).read_text())) if args.config \
            else SimConfig()
    except (OSError, json.JSONDecodeError, FormatError, TypeError, ValueError) as e:
        return _fail(f"config {args.config}: {e}")
    try:
        traj = simulate(net, world, cfg)
    except ShapeError as e:
        return _fail(f"network {network_path}: {e}")
    except ValueError as e:
        return _fail(f"scenario {scenario_path}: {e}")
    try:
        if args.csv:
            export_trajectory_csv(traj, args.csv)
        if args.svg:
            export_trajectory_svg(traj, world, args.svg)
    except OSError as e:
        return _fail(f"export: {e}")
    p = traj.final_pose
    print(traj.outcome.value)
    print(f"steps {len(traj)}")
    print(f"final pose x={p.x:.6f} y={p.y:.6f} heading={p.heading:.6f}")
    return SIM_EXIT[traj.outcome]


def build_parser() -> argparse.ArgumentParser:
    d, s = TrainingConfig(), SimConfig()
    modes = [m.value for m in UpdateMode]
    p = _Parser(prog="roverann", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s ({kernels.BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    demo = sub.add_parser("demo-paper", help="reproduce the published training step")
    demo.add_argument("--mode", choices=modes, default=d.mode.value)
    demo.set_defaults(func=cmd_demo_paper)

    tr = sub.add_parser("train", help="train a network on a CSV dataset")
    tr.add_argument("--dataset", help="CSV with in0,in1,...,out0,out1,... columns "
                                      "(default: bundled obstacle-avoidance set)")
    init = tr.add_mutually_exclusive_group()
    init.add_argument("--weights", help="initial network JSON")
    init.add_argument("--seed", type=int, default=d.seed, help="seed for uniform [0,1) weights")
    tr.add_argument("--hidden", type=_number(int, 1, strict=False), default=3,
                    help="hidden neurons for seeded networks")
    tr.add_argument("--lr", type=positive, default=d.learning_rate)
    tr.add_argument("--momentum", type=non_negative, default=d.momentum)
    tr.add_argument("--bias", type=float, default=d.bias_input)
    tr.add_argument("--threshold", type=positive, default=d.error_threshold)
    tr.add_argument("--epochs", type=count, default=d.max_epochs)
    tr.add_argument("--mode", choices=modes, default=d.mode.value)
    tr.add_argument("--trace", action="store_true", help="print epoch,<n>,max_abs_error,<e>")
    tr.add_argument("--out", help="write the trained network JSON here")
    tr.set_defaults(func=cmd_train)

    gc = sub.add_parser("gradcheck", help="compare analytic updates with finite differences")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--trials", type=count, default=20)
    gc.add_argument("--h", type=positive, default=1e-5)
    gc.set_defaults(func=cmd_gradcheck)

    sim = sub.add_parser("simulate", help="drive the rover with a trained network")
    sim.add_argument("--network", help="network JSON (default: bundled avoidance controller)")
    sim.add_argument("--scenario", help="scenario JSON (default: bundled A->B scenario)")
    sim.add_argument("--config", help=f"JSON overriding simulation settings (dt={s.dt}, ...)")
    sim.add_argument("--csv", help="trajectory CSV output")
    sim.add_argument("--svg", help="trajectory SVG output")
    sim.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""2D rover world: ray sensors, differential-drive kinematics and the control loop.

The network only sees two obstacle readings and only commands two wheel
speeds; goal seeking comes from a proportional turn toward the goal bearing
that is added to the wheel-differential turn rate.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import NamedTuple
from xml.sax.saxutils import escape

import numpy as np

from . import kernels
from .errors import FormatError, ShapeError
from .network import Network


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    return math.pi if a <= -math.pi else a


class Pose(NamedTuple):
    x: float
    y: float
    heading: float

    @classmethod
    def make(cls, x, y, heading) -> Pose:
        return cls(float(x), float(y), wrap_angle(float(heading)))


@dataclass(frozen=True)
class Obstacle:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"obstacle radius must be > 0, got {self.radius}")


class SensorReading(NamedTuple):
    left: float
    right: float


class MotorCommand(NamedTuple):
    v_left: float
    v_right: float


class Outcome(enum.Enum):
    REACHED_GOAL = "ReachedGoal"
    COLLISION = "Collision"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    # a narrow base makes the wheel differential dominate near obstacles;
    # the stronger goal gain keeps open-ground drift small
    wheelbase: float = 0.1
    v_max: float = 1.0
    k_goal: float = 2.0
    sense_range: float = 3.0
    sensor_angles: tuple[float, float] = (math.pi / 4, -math.pi / 4)
    rover_radius: float = 0.1
    goal_tolerance: float = 0.25
    max_steps: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "sensor_angles", tuple(float(a) for a in self.sensor_angles))
        for name in ("dt", "wheelbase", "v_max", "sense_range", "rover_radius", "goal_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.k_goal < 0:
            raise ValueError(f"k_goal must be >= 0, got {self.k_goal}")
        if self.max_steps < 0:
            raise ValueError(f"max_steps must be >= 0, got {self.max_steps}")
        if len(self.sensor_angles) != 2:
            raise ValueError("sensor_angles needs a left and a right offset")
        # one step may not carry the rover further than its own radius
        if self.dt * self.v_max > self.rover_radius:
            raise ValueError(
                f"dt*v_max = {self.dt * self.v_max} exceeds rover_radius {self.rover_radius}"
            )

    @classmethod
    def from_dict(cls, doc: dict) -> SimConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise FormatError(f"unknown simulation settings {sorted(unknown)}")
        return cls(**doc)


@dataclass
class World:
    obstacles: list[Obstacle]
    start: Pose
    goal: tuple[float, float]

    def validate(self, cfg: SimConfig):
        for p, what in ((self.start[:2], "start"), (self.goal, "goal")):
            for o in self.obstacles:
                if math.hypot(p[0] - o.cx, p[1] - o.cy) < o.radius + cfg.rover_radius:
                    raise ValueError(f"{what} {tuple(p)} lies inside obstacle {o}")


def bearing(frm, to) -> float:
    return math.atan2(to[1] - frm[1], to[0] - frm[0])


def make_world(start, goal, obstacles=(), heading: float | None = None) -> World:
    """World whose start heading defaults to the bearing of the goal."""
    goal = (float(goal[0]), float(goal[1]))
    if heading is None:
        heading = bearing(start, goal)
    return World([o if isinstance(o, Obstacle) else Obstacle(*o) for o in obstacles],
                 Pose.make(start[0], start[1], heading), goal)


def paper_world() -> World:
    """A at the origin, B at (11.73, 0), one obstacle blocking the straight line."""
    return make_world((0.0, 0.0), (11.73, 0.0), [Obstacle(5.87, 0.0, 2.0)])


def load_scenario(path) -> World:
    try:
        doc = json.loads(Path(path).read_text())
        start, goal = doc["start"], doc["goal"]
        obstacles = [Obstacle(float(o["c"][0]), float(o["c"][1]), float(o["r"]))
                     for o in doc.get("obstacles", [])]
        return make_world((float(start[0]), float(start[1])), goal, obstacles,
                          doc.get("heading"))
    except (json.JSONDecodeError, KeyError, TypeError, IndexError, ValueError) as e:
        raise FormatError(f"{path}: malformed scenario ({type(e).__name__}: {e})") from None


def save_scenario(world: World, path):
    doc = {
        "start": [world.start.x, world.start.y],
        "goal": list(world.goal),
        "obstacles": [{"c": [o.cx, o.cy], "r": o.radius} for o in world.obstacles],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def ray_circle_distance(ox, oy, angle, cx, cy, r) -> float | None:
    """Distance along the ray to the first crossing of the circle, ``None`` if missed.

    An origin inside the circle gives 0.
    """
    ux, uy = math.cos(angle), math.sin(angle)
    fx, fy = ox - cx, oy - cy
    c = fx * fx + fy * fy - r * r
    if c <= 0.0:
        return 0.0
    b = fx * ux + fy * uy
    disc = b * b - c
    if disc < 0.0 or b >= 0.0:
        return None
    return -b - math.sqrt(disc)


def _reading(pose: Pose, angle: float, world: World, cfg: SimConfig) -> float:
    nearest = math.inf
    for o in world.obstacles:
        d = ray_circle_distance(pose.x, pose.y, pose.heading + angle, o.cx, o.cy,
                                o.radius + cfg.rover_radius)
        if d is not None and d < nearest:
            nearest = d
    if nearest >= cfg.sense_range:
        return 0.0
    return min(1.0, max(0.0, 1.0 - nearest / cfg.sense_range))


def sense(pose: Pose, world: World, cfg: SimConfig) -> SensorReading:
    """Left and right proximity in [0, 1]; 1 means touching, 0 means nothing in range."""
    return SensorReading(_reading(pose, cfg.sensor_angles[0], world, cfg),
                         _reading(pose, cfg.sensor_angles[1], world, cfg))


def _clamp(v, hi):
    return min(hi, max(0.0, v))


def motor_from_network(net: Network, s: SensorReading, cfg: SimConfig) -> MotorCommand:
    if net.topology.n_inputs != 2 or net.topology.n_outputs != 2:
        raise ShapeError(f"controller needs a 2-input 2-output network, got "
                         f"{net.topology.layer_sizes}")
    _, outs = kernels.forward(net.weights, np.array(s, dtype=np.float64), net.bias_input,
                              net.kinds)
    out = outs[-1]
    return MotorCommand(_clamp(float(out[0]) * cfg.v_max, cfg.v_max),
                        _clamp(float(out[1]) * cfg.v_max, cfg.v_max))


def step_kinematics(pose: Pose, cmd: MotorCommand, goal, cfg: SimConfig) -> Pose:
    v = 0.5 * (cmd.v_left + cmd.v_right)
    omega = (cfg.k_goal * wrap_angle(bearing(pose, goal) - pose.heading)
             + (cmd.v_right - cmd.v_left) / cfg.wheelbase)
    heading = wrap_angle(pose.heading + omega * cfg.dt)
    return Pose(pose.x + v * cfg.dt * math.cos(heading),
                pose.y + v * cfg.dt * math.sin(heading),
                heading)


def check_collision(pose: Pose, world: World, cfg: SimConfig) -> bool:
    return any(math.hypot(pose.x - o.cx, pose.y - o.cy) < o.radius + cfg.rover_radius
               for o in world.obstacles)


class Step(NamedTuple):
    pose: Pose
    reading: SensorReading
    command: MotorCommand


@dataclass
class Trajectory:
    steps: list[Step] = field(default_factory=list)
    outcome: Outcome = Outcome.TIMEOUT

    def __len__(self):
        return len(self.steps)

    @property
    def final_pose(self) -> Pose:
        return self.steps[-1].pose

    def xy(self) -> np.ndarray:
        return np.array([(s.pose.x, s.pose.y) for s in self.steps])


def _goal_distance(pose, goal) -> float:
    return math.hypot(goal[0] - pose.x, goal[1] - pose.y)


def simulate(net: Network, world: World, cfg: SimConfig | None = None) -> Trajectory:
    """Run sense -> network -> kinematics until the goal, a collision or ``max_steps``.

    Every recorded step holds the pose, what was sensed there and the command
    issued there; the terminal pose is recorded the same way, so a run that
    moves ``n`` times has ``n + 1`` steps.
    """
    cfg = cfg or SimConfig()
    world.validate(cfg)
    traj = Trajectory()
    pose = world.start
    for k in range(cfg.max_steps + 1):
        reading = sense(pose, world, cfg)
        cmd = motor_from_network(net, reading, cfg)
        traj.steps.append(Step(pose, reading, cmd))
        if check_collision(pose, world, cfg):
            traj.outcome = Outcome.COLLISION
            break
        if _goal_distance(pose, world.goal) <= cfg.goal_tolerance:
            traj.outcome = Outcome.REACHED_GOAL
            break
        if k == cfg.max_steps:
            traj.outcome = Outcome.TIMEOUT
            break
        pose = step_kinematics(pose, cmd, world.goal, cfg)
    return traj


CSV_HEADER = ["step", "x", "y", "heading", "sense_left", "sense_right", "v_left", "v_right"]


def export_trajectory_csv(t: Trajectory, path):
    if not t.steps:
        raise ValueError("empty trajectory")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for k, (pose, s, c) in enumerate(t.steps):
            w.writerow([k, *(repr(float(v)) for v in (*pose, *s, *c))])


def export_trajectory_svg(t: Trajectory, world: World, path, scale: float = 40.0):
    """Obstacles as circles, the goal as a cross, the path as one polyline.

    The y axis is flipped so that +y points up on screen.
    """
    if not t.steps:
        raise ValueError("empty trajectory")
    xy = t.xy()
    xs = [*xy[:, 0], world.goal[0]]
    ys = [*xy[:, 1], world.goal[1]]
    for o in world.obstacles:
        xs += [o.cx - o.radius, o.cx + o.radius]
        ys += [o.cy - o.radius, o.cy + o.radius]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    w, h = max(x1 - x0, 1e-9), max(y1 - y0, 1e-9)
    pad = 0.1 * max(w, h)
    vb = (x0 - pad, -(y1 + pad), w + 2 * pad, h + 2 * pad)
    stroke = 0.005 * max(w, h) + 0.01
    arm = 0.02 * max(w, h) + 0.05
    gx, gy = world.goal[0], -world.goal[1]

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{" ".join(f"{v:.6g}" for v in vb)}" '
        f'width="{vb[2] * scale:.0f}" height="{vb[3] * scale:.0f}">',
        f"<title>{escape(t.outcome.value)}</title>",
    ]
    for o in world.obstacles:
        lines.append(f'<circle cx="{o.cx:.6g}" cy="{-o.cy:.6g}" r="{o.radius:.6g}" '
                     f'fill="#b0b0b0" stroke="#555" stroke-width="{stroke:.4g}"/>')
    lines.append(
        f'<path d="M {gx - arm:.6g} {gy - arm:.6g} L {gx + arm:.6g} {gy + arm:.6g} '
        f'M {gx - arm:.6g} {gy + arm:.6g} L {gx + arm:.6g} {gy - arm:.6g}" '
        f'stroke="#c00" stroke-width="{stroke:.4g}" fill="none"/>'
    )
    pts = " ".join(f"{x:.6f},{-y:.6f}" for x, y in xy)
    lines.append(f'<polyline points="{pts}" fill="none" stroke="#1f4e9c" '
                 f'stroke-width="{stroke:.4g}"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")

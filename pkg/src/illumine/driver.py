"""Built-in lane-keeping driver: kinematic bicycle + degraded pure pursuit.

The controller tracks the right-lane center at fixed speed. Two degradations
make sharp roads fail the way a learned steering model does: a first-order
steering lag and zero-mean steering noise whose deviation grows with local
path curvature. Straight roads are driven essentially perfectly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import IllumineError
from .roads import RoadGeometry


@dataclass(frozen=True)
class DriverParams:
    speed: float = 6.7          # m/s, matches the low-speed training regime
    dt: float = 0.1             # s
    lookahead: float = 10.0     # m
    wheelbase: float = 2.4      # m; center of mass sits half of this ahead of the rear axle
    steer_tau: float = 0.4      # s, first-order steering lag
    noise_gain: float = 1.0     # steering noise sigma = noise_gain * |local curvature|
    max_steer: float = 0.21     # rad; saturates below the demand of sub-11 m turns
    step_limit_factor: float = 3.0

    def to_json_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimulationTrace:
    steering_angles: np.ndarray   # rad, one per step
    lateral_distances: np.ndarray # m, signed offset of the car center from the lane center
    completed: bool
    dt: float
    aux: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.steering_angles)


def _path_curvature(path: np.ndarray, arc: np.ndarray, window: int = 5) -> np.ndarray:
    """|dheading/ds| per sample, smoothed with a small moving maximum."""
    d = np.diff(path, axis=0)
    h = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    dh = np.diff(h)
    ds = np.maximum(np.diff(arc[:-1]), 1e-9)
    k = np.abs(np.concatenate([[0.0], dh / ds, [0.0]]))
    if window > 0:
        out = k.copy()
        for off in range(1, window + 1):
            out[:-off] = np.maximum(out[:-off], k[off:])
            out[off:] = np.maximum(out[off:], k[:-off])
        k = out
    return k


def drive(geom: RoadGeometry, params: DriverParams = DriverParams(), rng_seed: int = 0) -> SimulationTrace:
    """Simulate one lane-keeping episode; deterministic for a fixed seed.

    Terminates on road completion, on leaving the lane (|d| > w/2), or at
    the step limit.
    """
    path = geom.right_lane_center()
    d_path = np.diff(path, axis=0)
    step_len = np.hypot(d_path[:, 0], d_path[:, 1])
    arc = np.concatenate([[0.0], np.cumsum(step_len)])
    total = arc[-1]
    curvature = _path_curvature(path, arc)
    headings = np.arctan2(d_path[:, 1], d_path[:, 0])
    headings = np.concatenate([headings, headings[-1:]])

    rng = np.random.default_rng(rng_seed)
    w = geom.lane_width
    v, dt, wb = params.speed, params.dt, params.wheelbase
    half_wb = wb / 2.0

    theta = float(headings[0])
    center = path[0].copy()
    rear = center - half_wb * np.array([np.cos(theta), np.sin(theta)])
    delta = 0.0
    steer_log: list[float] = []
    lat_log: list[float] = []
    completed = False
    max_steps = int(total / v / dt * params.step_limit_factor) + 100
    near = 0

    for _ in range(max_steps):
        lo = max(near - 5, 0)
        hi = min(near + 60, len(path))
        seg = path[lo:hi] - center
        near = lo + int(np.argmin(np.hypot(seg[:, 0], seg[:, 1])))

        to_car = center - path[near]
        hx, hy = np.cos(headings[near]), np.sin(headings[near])
        d = float(to_car[0] * hy - to_car[1] * hx)  # signed: positive to the right
        s_here = arc[near]

        # lookahead target for the pure-pursuit law (rear-axle reference)
        s_target = min(s_here + params.lookahead, total)
        ti = int(np.searchsorted(arc, s_target))
        ti = min(ti, len(path) - 1)
        target = path[ti]
        dxy = target - rear
        alpha = np.arctan2(dxy[1], dxy[0]) - theta
        alpha = (alpha + np.pi) % (2 * np.pi) - np.pi
        ld = max(float(np.hypot(dxy[0], dxy[1])), 1e-6)
        cmd = float(np.arctan2(2.0 * wb * np.sin(alpha), ld))
        cmd = float(np.clip(cmd, -params.max_steer, params.max_steer))

        delta += (dt / params.steer_tau) * (cmd - delta)
        sigma = params.noise_gain * float(curvature[near])
        applied = delta + (float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0)
        applied = float(np.clip(applied, -params.max_steer, params.max_steer))

        steer_log.append(applied)
        lat_log.append(d)

        if abs(d) > w / 2.0:
            break
        if s_here >= total - max(v * dt, 1.0):
            completed = True
            break

        rear = rear + v * dt * np.array([np.cos(theta), np.sin(theta)])
        theta += v / wb * np.tan(applied) * dt
        center = rear + half_wb * np.array([np.cos(theta), np.sin(theta)])

    return SimulationTrace(
        steering_angles=np.asarray(steer_log),
        lateral_distances=np.asarray(lat_log),
        completed=completed,
        dt=dt,
        aux={"rng_seed": rng_seed},
    )


def fitness_driving(trace: SimulationTrace, lane_width: float) -> float:
    """min over steps of (w/2 - |d|); negative means the car left the lane."""
    if trace.steps == 0:
        raise IllumineError("empty trace")
    return float(np.min(lane_width / 2.0 - np.abs(trace.lateral_distances)))


def feat_std_steering(trace: SimulationTrace) -> float:
    """Population standard deviation of the steering angle sequence."""
    if trace.steps == 0:
        raise IllumineError("empty trace")
    return float(np.std(trace.steering_angles))


def feat_mean_lateral_position(trace: SimulationTrace) -> float:
    """Mean absolute offset of the car center from the lane center."""
    if trace.steps == 0:
        raise IllumineError("empty trace")
    return float(np.mean(np.abs(trace.lateral_distances)))

"""Robot kinematics and collision handling.

Unicycle model on a 0.17 m-radius disc footprint. Acceleration commands
change linear velocity (clamped to the platform's ±0.5 m/s); steering
commands angular velocity directly (±4.5 rad/s). On penetration the motion
is bisected back to the contact point and the step reports a collision.
"""

import math
from dataclasses import dataclass

import numpy as np

V_MAX = 0.5
OMEGA_MAX = 4.5
A_MAX = 1.0
DT = 0.1
ROBOT_RADIUS = 0.17


@dataclass
class RobotState:
    x: float
    y: float
    theta: float
    v: float = 0.0
    omega: float = 0.0

    def pose(self):
        return (self.x, self.y, self.theta)


def wrap_angle(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def _segment_distances(px, py, segs):
    ax, ay = segs[:, 0], segs[:, 1]
    bx, by = segs[:, 2], segs[:, 3]
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = ((px - ax) * dx + (py - ay) * dy) / L2
    t = np.clip(np.where(L2 > 0, t, 0.0), 0.0, 1.0)
    cx, cy = ax + t * dx, ay + t * dy
    return np.hypot(px - cx, py - cy)


def clearance(plan, x, y):
    """Distance from a point to the nearest wall or obstacle surface."""
    best = np.inf
    if plan.segments.shape[0]:
        best = min(best, float(_segment_distances(x, y, plan.segments).min()))
    if plan.discs.shape[0]:
        d = np.hypot(x - plan.discs[:, 0], y - plan.discs[:, 1]) - plan.discs[:, 2]
        best = min(best, float(d.min()))
    if plan.boxes.shape[0]:
        bx = np.maximum(plan.boxes[:, 0] - x, np.maximum(0.0, x - plan.boxes[:, 2]))
        by = np.maximum(plan.boxes[:, 1] - y, np.maximum(0.0, y - plan.boxes[:, 3]))
        inside = (x >= plan.boxes[:, 0]) & (x <= plan.boxes[:, 2]) & (y >= plan.boxes[:, 1]) & (y <= plan.boxes[:, 3])
        d = np.where(inside, 0.0, np.hypot(bx, by))
        best = min(best, float(d.min()))
    return best


def step(plan, state, action, dt=DT):
    """One control tick; returns (new_state, collided)."""
    acc = min(1.0, max(-1.0, float(action[0])))
    steer = min(1.0, max(-1.0, float(action[1])))
    v = min(V_MAX, max(-V_MAX, state.v + acc * A_MAX * dt))
    omega = steer * OMEGA_MAX
    theta = wrap_angle(state.theta + omega * dt)
    nx = state.x + v * math.cos(state.theta) * dt
    ny = state.y + v * math.sin(state.theta) * dt

    collided = False
    if clearance(plan, nx, ny) < ROBOT_RADIUS:
        collided = True
        lo, hi = 0.0, 1.0
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            mx = state.x + (nx - state.x) * mid
            my = state.y + (ny - state.y) * mid
            if clearance(plan, mx, my) < ROBOT_RADIUS:
                hi = mid
            else:
                lo = mid
        nx = state.x + (nx - state.x) * lo
        ny = state.y + (ny - state.y) * lo
    return RobotState(nx, ny, theta, v, omega), collided


def nearest_free_pose(plan, x, y, theta, min_clear=0.3, region_id=None):
    """Deterministic outward ring scan for a reroute pose; heading preserved."""
    if clearance(plan, x, y) >= min_clear and (region_id is None or _in_region(plan, x, y, region_id)):
        return RobotState(x, y, theta)
    for radius in np.arange(0.1, 3.01, 0.1):
        for k in range(24):
            ang = 2 * math.pi * k / 24
            cx = x + radius * math.cos(ang)
            cy = y + radius * math.sin(ang)
            if clearance(plan, cx, cy) < min_clear:
                continue
            if region_id is not None and not _in_region(plan, cx, cy, region_id):
                continue
            return RobotState(cx, cy, theta)
    raise RuntimeError(f"no free pose near ({x:.2f},{y:.2f})")


def _in_region(plan, x, y, region_id):
    r = plan.region_at(x, y)
    return r is not None and r.id == region_id

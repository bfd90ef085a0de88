"""Closed-loop episode execution against a controller callback."""

import numpy as np

from .judge import EpisodeTrace, TaskMonitor, TraceRow, build_task_context
from .render import CameraParams, render
from .sim import DT, RobotState, nearest_free_pose, step


def _row(t, state, action, collided, plan):
    region = plan.region_at(state.x, state.y)
    return TraceRow(
        t,
        state,
        (float(action[0]), float(action[1])),
        collided,
        region.label if region else None,
        region.id if region else -1,
    )


def rollout(plan, task, act_fn, *, cam=None, dt=DT, record_observations=False, spawn=None):
    """Run one episode; act_fn(state, obs, tick) -> action in [-1,1]^2.

    obs is None unless record_observations (or cam) requests rendering.
    Teleport directives from the monitor are applied with velocity reset and
    confined to the task's allowed region. Returns the judged EpisodeTrace
    (and the observation list when recording).
    """
    ctx = build_task_context(plan, task)
    monitor = TaskMonitor(task, ctx)
    state = RobotState(*plan.spawns[task])
    rows = [_row(0.0, state, np.zeros(2), False, plan)]
    observations = [] if record_observations else None
    want_obs = record_observations or cam is not None
    cam = cam or CameraParams()

    k = 0
    while True:
        directive, outcome = monitor.update(rows[-1])
        if directive == "stop":
            break
        if directive == "teleport":
            pose = nearest_free_pose(plan, state.x, state.y, state.theta, 0.3, ctx.get("confine_region"))
            state = RobotState(pose.x, pose.y, pose.theta, 0.0, 0.0)
        obs = render(plan, state, cam) if want_obs else None
        action = act_fn(state, obs, k)
        if record_observations:
            observations.append(obs)
        state, collided = step(plan, state, action, dt)
        k += 1
        rows.append(_row(k * dt, state, action, collided, plan))

    trace = EpisodeTrace(task, rows, ctx, outcome, plan.seed)
    if record_observations:
        return trace, observations
    return trace

"""Per-task episode judging.

Each task has a time limit and failure conditions; classroom-based tasks
get one reroute to free space after a first collision. The monitor is the
single source of truth: the live runner consumes its directives, and
``judge`` replays the same monitor over a recorded trace, making the
outcome a pure function of the trace (plus its task context).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from smilnav.policy import TASKS, InputError
from .sim import RobotState

TIME_LIMITS = {
    "traverse_hallway": 60.0,
    "traverse_classroom": 30.0,
    "to_classroom": 120.0,
    "to_hallway": 60.0,
}

OUTCOME_REASONS = ("collision", "second-collision", "left-allowed-region", "timeout", "passed-two-classrooms")

SECOND_CHANCE_TASKS = ("traverse_classroom", "to_hallway")


@dataclass
class Outcome:
    status: str  # success | failure
    elapsed: float
    reason: str = None

    @property
    def success(self):
        return self.status == "success"

    def to_dict(self):
        return {"status": self.status, "elapsed": self.elapsed, "reason": self.reason}

    @classmethod
    def from_dict(cls, d):
        return cls(d["status"], d["elapsed"], d.get("reason"))


@dataclass
class TraceRow:
    t: float
    state: RobotState
    action: tuple
    collided: bool
    region: str  # hallway | classroom | None
    region_id: int

    def to_dict(self):
        return {
            "t": self.t,
            "pose": [self.state.x, self.state.y, self.state.theta],
            "v": self.state.v,
            "omega": self.state.omega,
            "action": list(self.action),
            "collided": self.collided,
            "region": self.region,
            "region_id": self.region_id,
        }

    @classmethod
    def from_dict(cls, d):
        x, y, theta = d["pose"]
        return cls(
            d["t"],
            RobotState(x, y, theta, d["v"], d["omega"]),
            tuple(d["action"]),
            d["collided"],
            d["region"],
            d["region_id"],
        )


@dataclass
class EpisodeTrace:
    task: str
    rows: list
    ctx: dict
    outcome: Outcome = None
    plan_seed: int = None
    meta: dict = field(default_factory=dict)

    def to_jsonl(self):
        header = {
            "task": self.task,
            "ctx": self.ctx,
            "plan_seed": self.plan_seed,
            "meta": self.meta,
            "outcome": self.outcome.to_dict() if self.outcome else None,
        }
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(json.dumps(r.to_dict(), sort_keys=True) for r in self.rows)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = json.loads(lines[0])
        rows = [TraceRow.from_dict(json.loads(ln)) for ln in lines[1:]]
        outcome = Outcome.from_dict(header["outcome"]) if header.get("outcome") else None
        return cls(header["task"], rows, header.get("ctx", {}), outcome, header.get("plan_seed"), header.get("meta", {}))


class TaskMonitor:
    """Streaming episode supervisor; emits continue / teleport / stop."""

    def __init__(self, task, ctx=None):
        if task not in TASKS:
            raise InputError(f"unknown task {task!r}")
        self.task = task
        self.ctx = ctx or {}
        self.limit = TIME_LIMITS[task]
        self.collisions = 0

    def update(self, row):
        t = row.t
        if row.collided:
            self.collisions += 1
            if self.task in SECOND_CHANCE_TASKS:
                if self.collisions >= 2:
                    return "stop", Outcome("failure", t, "second-collision")
                return "teleport", None
            return "stop", Outcome("failure", t, "collision")

        if self.task == "traverse_hallway":
            if row.region == "classroom":
                return "stop", Outcome("failure", t, "left-allowed-region")
        elif self.task == "traverse_classroom":
            if row.region != "classroom":
                return "stop", Outcome("failure", t, "left-allowed-region")
        elif self.task == "to_classroom":
            if row.region == "classroom":
                return "stop", Outcome("success", t)
            marks = self.ctx.get("pass_marks", [])
            direction = self.ctx.get("direction", 1.0)
            if len(marks) >= 2 and all((row.state.x - m) * direction > 1.0 for m in marks):
                return "stop", Outcome("failure", t, "passed-two-classrooms")
        elif self.task == "to_hallway":
            if row.region == "hallway":
                return "stop", Outcome("success", t)

        if t >= self.limit - 1e-9:
            if self.task in ("traverse_hallway", "traverse_classroom"):
                return "stop", Outcome("success", self.limit)
            return "stop", Outcome("failure", self.limit, "timeout")
        return "continue", None


def build_task_context(plan, task):
    """Per-episode judging context derived from the plan at spawn time."""
    if task == "to_classroom":
        sx = plan.spawns[task][0]
        doors = sorted(plan.doors, key=lambda d: abs(d.center[0] - sx))[:2]
        direction = 1.0 if (doors[0].center[0] - sx) >= 0 else -1.0
        marks = [d.seg[2] if direction > 0 else d.seg[0] for d in doors]
        return {"pass_marks": marks, "direction": direction}
    if task in ("traverse_classroom", "to_hallway"):
        return {"confine_region": plan.primary_room}
    return {}


def judge(task, trace):
    """Replay the monitor over a full trace; pure in (task, trace)."""
    if task not in TASKS:
        raise InputError(f"unknown task {task!r}")
    if not trace.rows:
        raise InputError("trace is empty")
    monitor = TaskMonitor(task, trace.ctx)
    for row in trace.rows:
        directive, outcome = monitor.update(row)
        if directive == "stop":
            return outcome
    raise InputError("trace ended before any terminal condition was reached")

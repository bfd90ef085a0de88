from .floorplan import (
    Door,
    FloorPlan,
    GenParams,
    GenerationError,
    Region,
    generate_floorplan,
    validate_plan,
)
from .sim import (
    A_MAX,
    DT,
    OMEGA_MAX,
    ROBOT_RADIUS,
    V_MAX,
    RobotState,
    clearance,
    nearest_free_pose,
    step,
)
from .render import CameraParams, render, to_ppm
from .judge import OUTCOME_REASONS, TIME_LIMITS, EpisodeTrace, Outcome, TaskMonitor, TraceRow, judge
from .episode import rollout

__all__ = [
    "A_MAX",
    "CameraParams",
    "DT",
    "Door",
    "EpisodeTrace",
    "FloorPlan",
    "GenParams",
    "GenerationError",
    "OMEGA_MAX",
    "OUTCOME_REASONS",
    "Outcome",
    "Region",
    "ROBOT_RADIUS",
    "RobotState",
    "TIME_LIMITS",
    "TaskMonitor",
    "TraceRow",
    "V_MAX",
    "clearance",
    "generate_floorplan",
    "judge",
    "nearest_free_pose",
    "render",
    "rollout",
    "step",
    "to_ppm",
    "validate_plan",
]

"""Procedural indoor floor plans: one hallway with classrooms off it.

Layout, obstacles, colors, and spawn poses are all drawn from a seeded
generator, so a (seed, params) pair maps to one byte-identical plan. Train
and test worlds differ by seed set and by style parameters.
"""

import colorsys
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from smilnav.policy import TASKS

ROBOT_RADIUS = 0.17


class GenerationError(Exception):
    pass


@dataclass
class Region:
    id: int
    label: str  # hallway | classroom
    rect: tuple  # (x0, y0, x1, y1)

    def contains(self, x, y):
        x0, y0, x1, y1 = self.rect
        return x0 <= x < x1 and y0 <= y < y1


@dataclass
class Door:
    room_id: int
    seg: tuple  # (x0, y, x1, y) gap on the shared wall

    @property
    def center(self):
        x0, y0, x1, y1 = self.seg
        return ((x0 + x1) / 2, (y0 + y1) / 2)


@dataclass
class GenParams:
    n_classrooms: int = 3
    hall_len_range: tuple = (28.0, 34.0)
    hall_width_range: tuple = (2.4, 3.0)
    room_width_range: tuple = (5.5, 7.0)
    room_depth_range: tuple = (5.0, 6.5)
    door_width_range: tuple = (1.1, 1.5)
    room_obstacles: tuple = (2, 4)  # inclusive count range per classroom
    hall_obstacles: tuple = (1, 2)
    style: str = "train"  # palette family

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        kw = {}
        for k, v in d.items():
            kw[k] = tuple(v) if isinstance(v, list) else v
        return cls(**kw)


@dataclass
class FloorPlan:
    seed: int
    params: GenParams
    segments: np.ndarray  # (S,4) wall endpoints
    seg_colors: np.ndarray  # (S,) palette indices
    palette: np.ndarray  # (P,3) rgb in [0,1]
    regions: list
    doors: list
    discs: np.ndarray  # (D,3) cx, cy, r
    disc_colors: np.ndarray
    boxes: np.ndarray  # (B,4) aabb
    box_colors: np.ndarray
    spawns: dict  # task -> (x, y, theta)
    floor_color: tuple
    ceiling_color: tuple
    primary_room: int
    bounds: tuple = field(default=None)

    def __post_init__(self):
        if self.bounds is None:
            xs = np.concatenate([self.segments[:, 0], self.segments[:, 2]])
            ys = np.concatenate([self.segments[:, 1], self.segments[:, 3]])
            self.bounds = (float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))

    def region_at(self, x, y):
        for r in self.regions:
            if r.contains(x, y):
                return r
        return None

    def hallway(self):
        return next(r for r in self.regions if r.label == "hallway")

    def room(self, room_id):
        return next(r for r in self.regions if r.id == room_id)

    def door_for_room(self, room_id):
        return next(d for d in self.doors if d.room_id == room_id)

    # ---- serialization ----

    def to_dict(self):
        return {
            "seed": self.seed,
            "params": self.params.to_dict(),
            "segments": self.segments.tolist(),
            "seg_colors": self.seg_colors.tolist(),
            "palette": self.palette.tolist(),
            "regions": [{"id": r.id, "label": r.label, "rect": list(r.rect)} for r in self.regions],
            "doors": [{"room_id": d.room_id, "seg": list(d.seg)} for d in self.doors],
            "discs": self.discs.tolist(),
            "disc_colors": self.disc_colors.tolist(),
            "boxes": self.boxes.tolist(),
            "box_colors": self.box_colors.tolist(),
            "spawns": {k: list(v) for k, v in self.spawns.items()},
            "floor_color": list(self.floor_color),
            "ceiling_color": list(self.ceiling_color),
            "primary_room": self.primary_room,
            "bounds": list(self.bounds),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d):
        return cls(
            seed=d["seed"],
            params=GenParams.from_dict(d["params"]),
            segments=np.array(d["segments"], dtype=np.float64).reshape(-1, 4),
            seg_colors=np.array(d["seg_colors"], dtype=np.int64),
            palette=np.array(d["palette"], dtype=np.float64).reshape(-1, 3),
            regions=[Region(r["id"], r["label"], tuple(r["rect"])) for r in d["regions"]],
            doors=[Door(x["room_id"], tuple(x["seg"])) for x in d["doors"]],
            discs=np.array(d["discs"], dtype=np.float64).reshape(-1, 3),
            disc_colors=np.array(d["disc_colors"], dtype=np.int64),
            boxes=np.array(d["boxes"], dtype=np.float64).reshape(-1, 4),
            box_colors=np.array(d["box_colors"], dtype=np.int64),
            spawns={k: tuple(v) for k, v in d["spawns"].items()},
            floor_color=tuple(d["floor_color"]),
            ceiling_color=tuple(d["ceiling_color"]),
            primary_room=d["primary_room"],
            bounds=tuple(d["bounds"]),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def content_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _hls(rng, hue_range, light_range, sat_range):
    h = rng.uniform(*hue_range) % 1.0
    l = rng.uniform(*light_range)
    s = rng.uniform(*sat_range)
    return colorsys.hls_to_rgb(h, l, s)


def _style_colors(rng, style, n_rooms):
    """Wall/floor/obstacle palette. Train and test families occupy different
    lightness/saturation bands so held-out worlds look genuinely different."""
    if style == "train":
        wall_l, wall_s = (0.55, 0.75), (0.15, 0.45)
        floor_l = (0.35, 0.5)
        obs_s = (0.6, 0.9)
    else:
        wall_l, wall_s = (0.3, 0.5), (0.45, 0.75)
        floor_l = (0.5, 0.65)
        obs_s = (0.35, 0.6)
    hall_wall = _hls(rng, (0.0, 1.0), wall_l, wall_s)
    room_walls = [_hls(rng, (0.0, 1.0), wall_l, wall_s) for _ in range(n_rooms)]
    floor = _hls(rng, (0.05, 0.12), floor_l, (0.1, 0.3))
    ceiling = _hls(rng, (0.0, 1.0), (0.75, 0.9), (0.0, 0.1))
    obstacles = [_hls(rng, (0.0, 1.0), (0.35, 0.6), obs_s) for _ in range(6)]
    return hall_wall, room_walls, floor, ceiling, obstacles


def _try_generate(seed, params, attempt):
    rng = np.random.default_rng((seed << 8) + attempt)
    L = rng.uniform(*params.hall_len_range)
    Wh = rng.uniform(*params.hall_width_range)

    # rooms cluster at the east end so a 15 m doorless approach run exists
    room_zone_x0 = 16.5
    if room_zone_x0 > L - params.room_width_range[0] - 1.0:
        raise GenerationError("hallway too short for the approach run")

    rooms = []  # (x0, x1, side) side: +1 north, -1 south
    cursors = {1: room_zone_x0 + rng.uniform(0.0, 1.5), -1: room_zone_x0 + rng.uniform(0.0, 1.5)}
    for i in range(params.n_classrooms):
        side = 1 if i % 2 == 0 else -1
        w = rng.uniform(*params.room_width_range)
        x0 = cursors[side]
        if x0 + w > L - 0.5:
            raise GenerationError("rooms do not fit along the hallway")
        rooms.append((x0, x0 + w, side))
        cursors[side] = x0 + w + rng.uniform(0.6, 2.0)

    depths = [rng.uniform(*params.room_depth_range) for _ in rooms]
    door_ws = [rng.uniform(*params.door_width_range) for _ in rooms]
    door_xs = []
    for (x0, x1, _), dw in zip(rooms, door_ws):
        door_xs.append(rng.uniform(x0 + 0.8, x1 - 0.8 - dw))

    hall_wall, room_walls, floor, ceiling, obs_colors = _style_colors(rng, params.style, len(rooms))
    palette = [hall_wall] + room_walls + obs_colors
    HALL_C = 0
    ROOM_C = lambda i: 1 + i
    OBS_C = lambda k: 1 + len(rooms) + (k % len(obs_colors))

    segments = []
    seg_colors = []

    def add_seg(x0, y0, x1, y1, color):
        if abs(x1 - x0) < 1e-9 and abs(y1 - y0) < 1e-9:
            return
        segments.append((x0, y0, x1, y1))
        seg_colors.append(color)

    # hallway end walls
    add_seg(0, 0, 0, Wh, HALL_C)
    add_seg(L, 0, L, Wh, HALL_C)

    regions = [Region(0, "hallway", (0.0, 0.0, L, Wh))]
    doors = []
    for i, ((x0, x1, side), depth, dw, dx) in enumerate(zip(rooms, depths, door_ws, door_xs)):
        rid = i + 1
        if side == 1:
            ry0, ry1 = Wh, Wh + depth
            wall_y = Wh
            far_y = ry1
        else:
            ry0, ry1 = -depth, 0.0
            wall_y = 0.0
            far_y = ry0
        regions.append(Region(rid, "classroom", (x0, ry0, x1, ry1)))
        doors.append(Door(rid, (dx, wall_y, dx + dw, wall_y)))
        # shared wall with the door gap
        add_seg(x0, wall_y, dx, wall_y, ROOM_C(i))
        add_seg(dx + dw, wall_y, x1, wall_y, ROOM_C(i))
        # room outline
        add_seg(x0, ry0 if side == 1 else far_y, x0, ry1 if side == 1 else wall_y, ROOM_C(i))
        add_seg(x1, ry0 if side == 1 else far_y, x1, ry1 if side == 1 else wall_y, ROOM_C(i))
        add_seg(x0, far_y, x1, far_y, ROOM_C(i))

    # hallway long walls, skipping room-shared spans
    for side, wall_y in ((1, Wh), (-1, 0.0)):
        spans = sorted((x0, x1) for (x0, x1, s) in rooms if s == side)
        cur = 0.0
        for x0, x1 in spans:
            add_seg(cur, wall_y, x0, wall_y, HALL_C)
            cur = x1
        add_seg(cur, wall_y, L, wall_y, HALL_C)

    segments = np.array(segments, dtype=np.float64)
    seg_colors = np.array(seg_colors, dtype=np.int64)

    # primary classroom hosts the classroom-based tasks
    primary = int(rng.integers(1, len(rooms) + 1))

    # spawns before obstacles so keep-out zones are known
    spawns = {}
    spawns["traverse_hallway"] = (1.0, Wh / 2, 0.0)

    # to_classroom: west of the westmost door by 15 m of hallway run
    west_door = min(doors, key=lambda d: d.center[0])
    sx = west_door.center[0] - 15.0
    if sx < 0.6:
        raise GenerationError("no 15 m approach run to the nearest classroom door")
    spawns["to_classroom"] = (sx, Wh / 2, 0.0)

    proom = regions[primary]
    pdoor = doors[primary - 1]
    px0, py0, px1, py1 = proom.rect
    side = 1 if py0 >= Wh - 1e-9 else -1
    door_in_y = py0 + 0.85 if side == 1 else py1 - 0.85
    spawns["traverse_classroom"] = (pdoor.center[0], door_in_y, math.pi / 2 * side)

    corners = [(px0 + 0.6, py0 + 0.6), (px1 - 0.6, py0 + 0.6), (px0 + 0.6, py1 - 0.6), (px1 - 0.6, py1 - 0.6)]
    dc = pdoor.center
    far = max(corners, key=lambda c: (c[0] - dc[0]) ** 2 + (c[1] - dc[1]) ** 2)
    heading = math.atan2((py0 + py1) / 2 - far[1], (px0 + px1) / 2 - far[0])
    spawns["to_hallway"] = (far[0], far[1], heading)

    keepout = [(x, y, 1.0) for x, y, _ in spawns.values()]
    for d in doors:
        cx, cy = d.center
        keepout.append((cx, cy, 1.4))

    discs, boxes = [], []
    disc_colors, box_colors = [], []

    def blocked_by_keepout(x, y, r):
        return any((x - kx) ** 2 + (y - ky) ** 2 < (kr + r) ** 2 for kx, ky, kr in keepout)

    def too_close_to_others(x, y, r):
        for cx, cy, cr in discs:
            if (x - cx) ** 2 + (y - cy) ** 2 < (r + cr + 0.9) ** 2:
                return True
        for bx0, by0, bx1, by1 in boxes:
            cx, cy = (bx0 + bx1) / 2, (by0 + by1) / 2
            if (x - cx) ** 2 + (y - cy) ** 2 < (r + 0.6 + 0.9) ** 2:
                return True
        return False

    def place_obstacles(rect, count, inset):
        x0, y0, x1, y1 = rect
        placed = 0
        for _ in range(count * 30):
            if placed >= count:
                break
            x = rng.uniform(x0 + inset, x1 - inset)
            y = rng.uniform(y0 + inset, y1 - inset)
            if rng.random() < 0.6:
                r = rng.uniform(0.18, 0.32)
                if blocked_by_keepout(x, y, r) or too_close_to_others(x, y, r):
                    continue
                discs.append((x, y, r))
                disc_colors.append(OBS_C(len(discs) + len(boxes)))
            else:
                hw = rng.uniform(0.18, 0.32)
                if blocked_by_keepout(x, y, hw * 1.5) or too_close_to_others(x, y, hw * 1.5):
                    continue
                boxes.append((x - hw, y - hw, x + hw, y + hw))
                box_colors.append(OBS_C(len(discs) + len(boxes)))
            placed += 1

    for i, r in enumerate(regions[1:]):
        count = int(rng.integers(params.room_obstacles[0], params.room_obstacles[1] + 1))
        place_obstacles(r.rect, count, inset=0.75)
    hall_count = int(rng.integers(params.hall_obstacles[0], params.hall_obstacles[1] + 1))
    # hallway obstacles hug one wall so a clear lane always remains
    for _ in range(hall_count * 30):
        if hall_count <= 0:
            break
        x = rng.uniform(4.0, L - 4.0)
        side_off = rng.choice([-1.0, 1.0])
        r = rng.uniform(0.16, 0.24)
        y = Wh / 2 + side_off * (Wh / 2 - r - 0.42)
        if blocked_by_keepout(x, y, r) or too_close_to_others(x, y, r):
            continue
        discs.append((x, y, r))
        disc_colors.append(OBS_C(len(discs) + len(boxes)))
        hall_count -= 1

    plan = FloorPlan(
        seed=seed,
        params=params,
        segments=segments,
        seg_colors=seg_colors,
        palette=np.array(palette, dtype=np.float64),
        regions=regions,
        doors=doors,
        discs=np.array(discs, dtype=np.float64).reshape(-1, 3),
        disc_colors=np.array(disc_colors, dtype=np.int64),
        boxes=np.array(boxes, dtype=np.float64).reshape(-1, 4),
        box_colors=np.array(box_colors, dtype=np.int64),
        spawns=spawns,
        floor_color=floor,
        ceiling_color=ceiling,
        primary_room=primary,
    )
    validate_plan(plan)
    return plan


def generate_floorplan(seed, params=None):
    """Deterministic plan for (seed, params); bounded retries on bad draws."""
    params = params or GenParams()
    if params.n_classrooms < 1:
        raise GenerationError("need at least one classroom")
    last = None
    for attempt in range(40):
        try:
            return _try_generate(seed, params, attempt)
        except GenerationError as e:
            last = e
    raise GenerationError(f"could not generate a valid plan for seed {seed}: {last}")


def validate_plan(plan):
    """Structural invariants; raises GenerationError on violation."""
    from .sim import clearance  # local to avoid a cycle at import time

    hallways = [r for r in plan.regions if r.label == "hallway"]
    classrooms = [r for r in plan.regions if r.label == "classroom"]
    if not hallways or not classrooms:
        raise GenerationError("plan must contain a hallway and at least one classroom")

    for a in plan.regions:
        for b in plan.regions:
            if a.id >= b.id:
                continue
            ax0, ay0, ax1, ay1 = a.rect
            bx0, by0, bx1, by1 = b.rect
            if ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1:
                raise GenerationError(f"regions {a.id} and {b.id} overlap")

    for room in classrooms:
        if not any(d.room_id == room.id for d in plan.doors):
            raise GenerationError(f"classroom {room.id} has no door")

    for task, (x, y, theta) in plan.spawns.items():
        if clearance(plan, x, y) < ROBOT_RADIUS + 0.05:
            raise GenerationError(f"spawn for {task} is not collision-free")
        if plan.region_at(x, y) is None:
            raise GenerationError(f"spawn for {task} lies outside all regions")

    # door passages stay open: a robot-width lane through each door midpoint
    for d in plan.doors:
        cx, cy = d.center
        for off in (-0.45, -0.25, 0.0, 0.25, 0.45):
            if clearance(plan, cx, cy + off) < ROBOT_RADIUS + 0.03:
                raise GenerationError(f"door of room {d.room_id} is blocked near ({cx:.2f},{cy + off:.2f})")

    if set(plan.spawns) != set(TASKS):
        raise GenerationError("plan is missing spawn poses for some tasks")

"""Forward-view raycast renderer.

One ray per image column over the horizontal FOV; walls are full-height
bands, obstacles shorter bands standing on the floor, both shaded by
1/(1+perpendicular distance). Floor and ceiling fill with a perspective
distance gradient. Deterministic for a fixed (state, plan, camera).
"""

import math
from dataclasses import dataclass

import numpy as np

from smilnav import _kernels


@dataclass(frozen=True)
class CameraParams:
    width: int = 64
    height: int = 48
    hfov: float = math.radians(80.0)
    wall_height: float = 2.2
    cam_height: float = 1.1
    obstacle_height: float = 0.9


def _plan_arrays(plan):
    cached = getattr(plan, "_render_cache", None)
    if cached is None:
        cached = (
            np.ascontiguousarray(plan.segments, dtype=np.float64),
            np.ascontiguousarray(plan.discs, dtype=np.float64),
            np.ascontiguousarray(plan.boxes, dtype=np.float64),
            np.ascontiguousarray(plan.palette, dtype=np.float64),
        )
        plan._render_cache = cached
    return cached


def render(plan, state, cam=CameraParams()):
    """Render the robot's forward view as a (3, H, W) float32 image in [0,1]."""
    W, H = cam.width, cam.height
    segs, discs, boxes, palette = _plan_arrays(plan)

    tan_h = math.tan(cam.hfov / 2)
    screen_x = ((np.arange(W) + 0.5) / W - 0.5) * 2 * tan_h
    deltas = np.arctan(screen_x)
    angles = state.theta + deltas

    t_wall, wall_idx, t_obs, obs_idx, obs_kind = _kernels.raycast(
        state.x, state.y, angles, segs, discs, boxes
    )

    cos_d = np.cos(deltas)
    d_wall = np.where(np.isfinite(t_wall), t_wall * cos_d, np.inf)
    d_obs = np.where(np.isfinite(t_obs), t_obs * cos_d, np.inf)

    tan_v = tan_h * H / W
    half = H / 2.0
    rows = (np.arange(H) + 0.5)[:, None]  # pixel centers, top row first

    # wall band: symmetric around the horizon (camera at half wall height)
    with np.errstate(divide="ignore"):
        wall_half_px = half * (cam.wall_height / 2) / (np.maximum(d_wall, 1e-9) * tan_v)
    wall_top = half - wall_half_px
    wall_bot = half + wall_half_px

    shade_wall = 1.0 / (1.0 + d_wall)
    wall_rgb = palette[plan.seg_colors[np.clip(wall_idx, 0, None)]] * shade_wall[:, None]
    wall_rgb[wall_idx < 0] = 0.0

    # floor / ceiling distance per row (column independent after correction)
    drow = rows - half  # >0 below horizon
    with np.errstate(divide="ignore"):
        d_floor = np.where(drow > 0, cam.cam_height * half / (np.maximum(drow, 1e-9) * tan_v), np.inf)
        d_ceil = np.where(drow < 0, (cam.wall_height - cam.cam_height) * half / (np.maximum(-drow, 1e-9) * tan_v), np.inf)
    floor_rgb = np.asarray(plan.floor_color)[None, :] / (1.0 + d_floor)
    ceil_rgb = np.asarray(plan.ceiling_color)[None, :] / (1.0 + d_ceil)

    img = np.where(drow[..., None] > 0, floor_rgb[:, None, :], ceil_rgb[:, None, :])
    img = np.broadcast_to(img, (H, W, 3)).copy()

    in_wall = (rows >= wall_top[None, :]) & (rows < wall_bot[None, :]) & np.isfinite(d_wall)[None, :]
    img[in_wall] = np.broadcast_to(wall_rgb[None, :, :], (H, W, 3))[in_wall]

    # obstacle bands: from the floor line up to the obstacle height
    front = d_obs < d_wall
    if front.any():
        with np.errstate(divide="ignore"):
            obs_bot = half + half * cam.cam_height / (np.maximum(d_obs, 1e-9) * tan_v)
            obs_top = half + half * (cam.cam_height - cam.obstacle_height) / (np.maximum(d_obs, 1e-9) * tan_v)
        shade_obs = 1.0 / (1.0 + d_obs)
        safe = np.clip(obs_idx, 0, None)
        disc_c = plan.disc_colors[np.minimum(safe, max(plan.disc_colors.size - 1, 0))] if plan.disc_colors.size else safe * 0
        box_c = plan.box_colors[np.minimum(safe, max(plan.box_colors.size - 1, 0))] if plan.box_colors.size else safe * 0
        obs_color_idx = np.where(obs_kind == 0, disc_c, box_c)
        obs_rgb = palette[obs_color_idx] * shade_obs[:, None]
        in_obs = (rows >= obs_top[None, :]) & (rows < obs_bot[None, :]) & front[None, :]
        img[in_obs] = np.broadcast_to(obs_rgb[None, :, :], (H, W, 3))[in_obs]

    return np.ascontiguousarray(np.clip(img, 0.0, 1.0).transpose(2, 0, 1).astype(np.float32))


def to_ppm(obs, path):
    """Dump a (3,H,W) observation as binary PPM for eyeballing."""
    img = (np.clip(obs, 0, 1).transpose(1, 2, 0) * 255).astype(np.uint8)
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())

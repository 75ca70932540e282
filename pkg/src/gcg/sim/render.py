"""Raycasting against walls and circular obstacles, and the pseudo-3D camera."""

from __future__ import annotations

import numpy as np

from gcg.sim.world import World


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def raycast(world: World, x: float, y: float, angles: np.ndarray) -> np.ndarray:
    """Distance along each ray to the nearest wall or obstacle (inf if none)."""
    dx = np.cos(angles)[:, None]
    dy = np.sin(angles)[:, None]
    best = np.full(angles.shape, np.inf)

    w = world.walls
    if len(w):
        px, py = w[:, 0] - x, w[:, 1] - y
        ex, ey = w[:, 2] - w[:, 0], w[:, 3] - w[:, 1]
        denom = _cross(dx, dy, ex, ey)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = _cross(px, py, ex, ey) / denom
            u = _cross(px, py, dx, dy) / denom
        hit = (denom != 0) & (t > 0) & (u >= 0) & (u <= 1)
        best = np.minimum(best, np.where(hit, t, np.inf).min(axis=1))

    o = world.obstacles
    if len(o):
        ox, oy = x - o[:, 0], y - o[:, 1]
        b = dx * ox + dy * oy
        c = ox * ox + oy * oy - o[:, 2] ** 2
        disc = b * b - c
        root = np.sqrt(np.maximum(disc, 0.0))
        t_near = -b - root
        t = np.where(t_near > 0, t_near, -b + root)
        hit = (disc >= 0) & (t > 0)
        best = np.minimum(best, np.where(hit, t, np.inf).min(axis=1))
    return best


def column_angles(theta: float, fov: float, n: int) -> np.ndarray:
    """Ray headings for ``n`` columns, leftmost first."""
    step = fov / n
    return theta + fov / 2.0 - (np.arange(n) + 0.5) * step


def depth_intensity(dist: np.ndarray, d_max: float) -> np.ndarray:
    return np.clip(1.0 - dist / d_max, 0.0, 1.0)


def render_frame(world: World, x, y, theta, fov, d_max, width, height, dtype=np.float32) -> np.ndarray:
    """(height, width) grayscale frame: depth intensity below the horizon row, black above."""
    col = depth_intensity(raycast(world, x, y, column_angles(theta, fov, width)), d_max)
    frame = np.zeros((height, width), dtype=dtype)
    frame[height // 2:, :] = col
    return frame


def render_rays(world: World, x, y, theta, fov, d_max, n_rays, dtype=np.float32) -> np.ndarray:
    return depth_intensity(raycast(world, x, y, column_angles(theta, fov, n_rays)), d_max).astype(dtype)

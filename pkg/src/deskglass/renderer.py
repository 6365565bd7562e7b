"""Camouflage rendering: draw exactly the surface region the device hides.

Every screen pixel center is pushed through the device pose into world
mm, then into fractional map pixels, and sampled (nearest or bilinear).
Pixels that land outside the map get the configured fill color.  All
functions are pure; identical inputs give bit-identical rasters.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import DeviceGeometry, Pose2D, SurfaceMap

NEAREST = "nearest"
BILINEAR = "bilinear"


@dataclass(frozen=True)
class RenderConfig:
    fill_color: tuple = (24, 24, 24)
    sampling: str = BILINEAR

    def __post_init__(self):
        if self.sampling not in (NEAREST, BILINEAR):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")


def _screen_world_coords(pose: Pose2D, geometry: DeviceGeometry):
    """World mm coordinates of every screen pixel center (vectorized)."""
    u = (np.arange(geometry.screen_px_w) + 0.5) * geometry.mm_per_px_x
    v = (np.arange(geometry.screen_px_h) + 0.5) * geometry.mm_per_px_y
    x_tl = -geometry.body_w / 2.0 + geometry.screen_offset_x
    y_tl = geometry.body_h / 2.0 - geometry.screen_offset_y
    xd = x_tl + u[np.newaxis, :]
    yd = y_tl - v[:, np.newaxis]
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    xw = pose.x + c * xd - s * yd
    yw = pose.y + s * xd + c * yd
    return xw, yw


def render_screen(
    pose: Pose2D,
    geometry: DeviceGeometry,
    surface: SurfaceMap,
    cfg: RenderConfig = RenderConfig(),
) -> np.ndarray:
    """Render the occluded surface region as a screen-sized RGB8 raster."""
    xw, yw = _screen_world_coords(pose, geometry)
    w, h = surface.width_px, surface.height_px
    col = w / 2.0 + xw / surface.mm_per_px - 0.5
    row = h / 2.0 - yw / surface.mm_per_px - 0.5
    in_bounds = (col >= -0.5) & (col < w - 0.5) & (row >= -0.5) & (row < h - 0.5)

    out = np.empty((geometry.screen_px_h, geometry.screen_px_w, 3), dtype=np.uint8)
    out[:] = np.asarray(cfg.fill_color, dtype=np.uint8)
    img = surface.image

    if cfg.sampling == NEAREST:
        ci = np.clip(np.floor(col + 0.5).astype(np.int64), 0, w - 1)
        ri = np.clip(np.floor(row + 0.5).astype(np.int64), 0, h - 1)
        out[in_bounds] = img[ri[in_bounds], ci[in_bounds]]
        return out

    c0 = np.floor(col).astype(np.int64)
    r0 = np.floor(row).astype(np.int64)
    fc = col - c0
    fr = row - r0
    c0c = np.clip(c0, 0, w - 1)
    c1c = np.clip(c0 + 1, 0, w - 1)
    r0c = np.clip(r0, 0, h - 1)
    r1c = np.clip(r0 + 1, 0, h - 1)
    top = img[r0c, c0c].astype(np.float64) * (1.0 - fc)[..., None] \
        + img[r0c, c1c].astype(np.float64) * fc[..., None]
    bot = img[r1c, c0c].astype(np.float64) * (1.0 - fc)[..., None] \
        + img[r1c, c1c].astype(np.float64) * fc[..., None]
    blended = top * (1.0 - fr)[..., None] + bot * fr[..., None]
    sampled = np.floor(blended + 0.5).clip(0, 255).astype(np.uint8)
    out[in_bounds] = sampled[in_bounds]
    return out


def overlay_widget(frame: np.ndarray, widget: np.ndarray, at) -> np.ndarray:
    """Source-over composite of an RGBA8 widget onto an RGB8 frame.

    `at` is the (x, y) pixel offset of the widget's top-left corner; the
    widget must fit entirely inside the frame.
    """
    if widget.ndim != 3 or widget.shape[2] != 4:
        raise ValueError("widget must be HxWx4 RGBA8")
    x, y = int(at[0]), int(at[1])
    wh, ww = widget.shape[:2]
    fh, fw = frame.shape[:2]
    if x < 0 or y < 0 or x + ww > fw or y + wh > fh:
        raise ValueError("widget placement outside frame bounds")
    out = frame.copy()
    region = out[y:y + wh, x:x + ww].astype(np.float64)
    src = widget[..., :3].astype(np.float64)
    alpha = widget[..., 3:4].astype(np.float64) / 255.0
    blended = src * alpha + region * (1.0 - alpha)
    out[y:y + wh, x:x + ww] = np.floor(blended + 0.5).clip(0, 255).astype(np.uint8)
    return out

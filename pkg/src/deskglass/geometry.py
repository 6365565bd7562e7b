"""Planar frames, pose algebra, and metric device/surface mappings.

Conventions used throughout the package:

* World frame: fixed to the surface map, origin at the image center,
  +x to the right (increasing column), +y up (decreasing row).
  Positions in millimeters, headings in radians (counter-clockwise
  positive), always normalized to (-pi, pi].
* Device frame: origin at the body center, +x toward the right edge,
  +y toward the top edge.
* Pixel-center addressing: pixel index i covers the half-open span
  [i, i+1) in continuous raster coordinates, so its center sits at
  i + 0.5.  Fractional pixel coordinates returned here are shifted so
  that an integer value lands exactly on a pixel center.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle (radians) to (-pi, pi]."""
    t = math.remainder(theta, TWO_PI)
    if t <= -math.pi:
        t += TWO_PI
    return t


@dataclass(frozen=True)
class Pose2D:
    """Planar pose of the device on the surface: x, y in mm, theta in rad."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @staticmethod
    def identity() -> "Pose2D":
        return Pose2D(0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)


def compose(a: Pose2D, b: Pose2D) -> Pose2D:
    """Pose of frame b expressed through frame a (group composition)."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2D(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )


def inverse(p: Pose2D) -> Pose2D:
    """Inverse pose: compose(p, inverse(p)) is the identity."""
    c, s = math.cos(p.theta), math.sin(p.theta)
    return Pose2D(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.theta)


@dataclass(frozen=True)
class DeviceGeometry:
    """Physical device dimensions in mm plus the active screen raster.

    The screen offset is measured from the body's top-left corner to the
    active area's top-left corner (raster sense: +x right, +y down); this
    offset is exactly the bezel.
    """

    body_w: float
    body_h: float
    screen_offset_x: float
    screen_offset_y: float
    screen_w: float
    screen_h: float
    screen_px_w: int
    screen_px_h: int

    def __post_init__(self):
        dims = (
            self.body_w, self.body_h, self.screen_w, self.screen_h,
            self.screen_px_w, self.screen_px_h,
        )
        if any(d <= 0 for d in dims):
            raise ValueError("device dimensions must be strictly positive")
        if self.screen_offset_x < 0 or self.screen_offset_y < 0:
            raise ValueError("screen offset must be non-negative")
        if self.screen_offset_x + self.screen_w > self.body_w + 1e-9:
            raise ValueError("screen exceeds body width")
        if self.screen_offset_y + self.screen_h > self.body_h + 1e-9:
            raise ValueError("screen exceeds body height")

    @property
    def mm_per_px_x(self) -> float:
        return self.screen_w / self.screen_px_w

    @property
    def mm_per_px_y(self) -> float:
        return self.screen_h / self.screen_px_h


#: A generic handset: 75 x 160 mm body, 70 x 150 mm screen at 0.2 mm/px.
DEFAULT_GEOMETRY = DeviceGeometry(
    body_w=75.0, body_h=160.0,
    screen_offset_x=2.5, screen_offset_y=5.0,
    screen_w=70.0, screen_h=150.0,
    screen_px_w=350, screen_px_h=750,
)


def device_frame_point(geometry: DeviceGeometry, u: float, v: float):
    """Screen pixel center (u, v) to device-frame mm (no pose applied)."""
    x_tl = -geometry.body_w / 2.0 + geometry.screen_offset_x
    y_tl = geometry.body_h / 2.0 - geometry.screen_offset_y
    x = x_tl + (u + 0.5) * geometry.mm_per_px_x
    y = y_tl - (v + 0.5) * geometry.mm_per_px_y
    return x, y


def device_point_to_world(pose: Pose2D, geometry: DeviceGeometry, u: int, v: int):
    """Map a screen pixel center through the device pose into world mm.

    Raises ValueError for pixels outside the screen raster.
    """
    if not (0 <= u < geometry.screen_px_w and 0 <= v < geometry.screen_px_h):
        raise ValueError(f"pixel ({u}, {v}) outside screen raster")
    xd, yd = device_frame_point(geometry, u, v)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return pose.x + c * xd - s * yd, pose.y + s * xd + c * yd


@dataclass(frozen=True, eq=False)
class SurfaceMap:
    """Metric orthophoto of the tabletop: RGB8 raster plus mm-per-pixel.

    World origin sits at the image center; +x is rightward (increasing
    column) and +y is upward (decreasing row).
    """

    image: np.ndarray
    mm_per_px: float

    def __post_init__(self):
        img = np.asarray(self.image)
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValueError("surface map image must be HxWx3")
        if img.shape[0] < 1 or img.shape[1] < 1:
            raise ValueError("surface map must be at least 1x1")
        if img.dtype != np.uint8:
            raise ValueError("surface map image must be uint8")
        if self.mm_per_px <= 0:
            raise ValueError("mm_per_px must be strictly positive")
        object.__setattr__(self, "image", img)

    @property
    def width_px(self) -> int:
        return self.image.shape[1]

    @property
    def height_px(self) -> int:
        return self.image.shape[0]

    @property
    def extent_mm(self):
        """(width, height) of the mapped surface in mm."""
        return self.width_px * self.mm_per_px, self.height_px * self.mm_per_px


def world_to_map_pixel(surface: SurfaceMap, x: float, y: float):
    """World mm to fractional map pixel (col, row, in_bounds).

    Integer return values land on pixel centers.  Out-of-bounds points are
    allowed and flagged rather than raised.
    """
    col = surface.width_px / 2.0 + x / surface.mm_per_px - 0.5
    row = surface.height_px / 2.0 - y / surface.mm_per_px - 0.5
    in_bounds = (
        -0.5 <= col < surface.width_px - 0.5
        and -0.5 <= row < surface.height_px - 0.5
    )
    return col, row, in_bounds


def map_pixel_to_world(surface: SurfaceMap, col: float, row: float):
    """Inverse of world_to_map_pixel (exact round trip)."""
    x = (col + 0.5 - surface.width_px / 2.0) * surface.mm_per_px
    y = (surface.height_px / 2.0 - row - 0.5) * surface.mm_per_px
    return x, y


def rectification_scale(capture_height_mm: float, focal_length_px: float) -> float:
    """Ground sampling distance (mm/px) of a fronto-parallel pinhole capture."""
    if capture_height_mm <= 0 or focal_length_px <= 0:
        raise ValueError("capture height and focal length must be positive")
    return capture_height_mm / focal_length_px


def save_surface_map(surface: SurfaceMap, png_path) -> None:
    """Write the map PNG plus its JSON sidecar ({stem}.json)."""
    png_path = Path(png_path)
    Image.fromarray(surface.image).save(png_path, format="PNG")
    sidecar = {
        "mm_per_px": surface.mm_per_px,
        "width_px": surface.width_px,
        "height_px": surface.height_px,
    }
    png_path.with_suffix(".json").write_text(json.dumps(sidecar))


def load_surface_map(png_path, sidecar_path=None) -> SurfaceMap:
    """Load a map PNG and its metadata sidecar."""
    png_path = Path(png_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else png_path.with_suffix(".json")
    meta = json.loads(sidecar_path.read_text())
    img = np.asarray(Image.open(png_path).convert("RGB"), dtype=np.uint8)
    if img.shape[1] != meta["width_px"] or img.shape[0] != meta["height_px"]:
        raise ValueError("sidecar dimensions do not match PNG")
    return SurfaceMap(image=img, mm_per_px=float(meta["mm_per_px"]))

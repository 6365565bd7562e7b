"""Built-in scenarios used by the CLI, the demos, and the acceptance suite.

Motion segments are designed so that translation and rotation never
overlap and no cruise phase lasts as long as the stationary-detector
window; both properties keep the noise-free closed loop exact and the
stationarity detector honest at default thresholds.
"""

import numpy as np

from . import rng
from .geometry import Pose2D
from .simulator import MagnetSetup, Scenario, Segment
from .tracker import MagnetModel

_PREFIX = (
    Segment("hold_aloft", 1.2),
    Segment("lower_and_place", 0.3),
)


def _move(x, y, theta=0.0, duration=0.6):
    return Segment("move_to", duration, Pose2D(x, y, theta))


def straight_line() -> Scenario:
    return Scenario(segments=_PREFIX + (
        Segment("pause", 0.5),
        _move(150.0, 0.0),
        Segment("pause", 0.7),
    ))


def u_turn() -> Scenario:
    """Out, rotate 180 degrees in place, and back: the classic drift probe."""
    return Scenario(segments=_PREFIX + (
        Segment("pause", 0.5),
        _move(120.0, 0.0, 0.0),
        Segment("pause", 0.8),
        _move(120.0, 0.0, np.pi),
        Segment("pause", 0.8),
        _move(0.0, 0.0, np.pi),
        Segment("pause", 0.7),
    ))


def square_loop() -> Scenario:
    """Four straight legs with corner pauses; heading fixed throughout."""
    corners = [(150.0, 0.0), (150.0, 150.0), (0.0, 150.0), (0.0, 0.0)]
    legs = []
    for cx, cy in corners:
        legs.append(_move(cx, cy))
        legs.append(Segment("pause", 1.0))
    return Scenario(segments=_PREFIX + (Segment("pause", 0.6),) + tuple(legs))


def rotation_in_place() -> Scenario:
    return Scenario(segments=_PREFIX + (
        Segment("pause", 0.5),
        _move(0.0, 0.0, np.pi / 2),
        Segment("pause", 0.8),
        _move(0.0, 0.0, -np.pi / 2),
        Segment("pause", 0.8),
        _move(0.0, 0.0, 0.0),
        Segment("pause", 0.7),
    ))


def _wander_waypoints(count: int, radius_mm: float = 100.0):
    """Deterministic pseudo-random waypoint chain inside a disk.

    Steps are kept brisk (40-70 mm per 0.5 s leg) so every leg carries
    enough acceleration for the stationary detector to see motion; a limp
    leg would invite false zero-velocity updates mid-flight.
    """
    pts = []
    x, y = 0.0, 0.0
    for i in range(count):
        u = rng.uniform(1234, np.arange(3, dtype=np.uint64) + np.uint64(3 * i))
        angle = 2.0 * np.pi * float(u[0])
        step = 40.0 + 30.0 * float(u[1])
        nx, ny = x + step * np.cos(angle), y + step * np.sin(angle)
        # reflect back toward the center when the step leaves the disk
        if np.hypot(nx, ny) > radius_mm:
            nx, ny = x - step * np.cos(angle), y - step * np.sin(angle)
        x, y = nx, ny
        pts.append((round(x, 3), round(y, 3)))
    return pts


def drift_wander() -> Scenario:
    """30 s of continuous short moves with no stationary opportunities.

    Used for the magnetic-correction comparison: dead reckoning alone
    drifts freely here because ZUPTs never legitimately fire.
    """
    legs = tuple(_move(x, y, 0.0, 0.5) for x, y in _wander_waypoints(60))
    return Scenario(
        segments=_PREFIX + legs,
        magnet=desk_magnet(),
    )


def desk_magnet() -> MagnetSetup:
    """A small household magnet at the desk edge: 1 A*m^2 gives an on-axis
    field of 200 uT at 100 mm."""
    return MagnetSetup(
        model=MagnetModel(position_mm=(160.0, 110.0, 0.0), moment=(0.0, 0.0, 1.0)),
        ambient_uT=(22.0, 5.0, -41.0),
        sensor_height_mm=5.0,
    )


BUILTIN_SCENARIOS = {
    "straight_line": straight_line,
    "u_turn": u_turn,
    "square_loop": square_loop,
    "rotation_in_place": rotation_in_place,
    "drift_wander": drift_wander,
}


def get_builtin(name: str) -> Scenario:
    try:
        return BUILTIN_SCENARIOS[name]()
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}; built-ins: {sorted(BUILTIN_SCENARIOS)}"
        ) from None

"""Motion-condition detectors and the device-mode state machine.

The detectors answer three questions about the IMU stream: is the device
held parallel to the surface, is it stationary, and is it in contact with
the surface (via a downward-camera mean-luminance proxy).  The mode
tracker chains them into the capture/placement lifecycle:

    ALOFT -> PARALLEL_HOLD -> CAPTURE_READY -> PLACED_TRACKING -> ALOFT

emitting CAPTURE_TRIGGERED, PLACED, LIFTED and STATIONARY_ENTER/EXIT
events along the way.  Capture is armed once per aloft episode; a LIFTED
event re-arms it.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class StreamError(ValueError):
    """Raised when samples arrive out of time order."""


@dataclass(slots=True)
class ImuSample:
    """One timestamped IMU reading in the device frame.

    acc includes gravity (m/s^2); gyro is rad/s; mag is optional (uT);
    lum is the downward-camera mean luminance in [0, 1].
    """

    t: float
    acc: np.ndarray
    gyro: np.ndarray
    mag: Optional[np.ndarray] = None
    lum: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lum <= 1.0:
            raise ValueError("lum must lie in [0, 1]")


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds for the parallel/stationary/contact detectors.

    Defaults are tuned to the simulator's default noise levels and can be
    overridden per session.
    """

    parallel_tilt_max_deg: float = 5.0
    parallel_hold_duration: float = 1.0
    stationary_window: float = 0.3
    stationary_acc_std_max: float = 0.08
    stationary_gyro_std_max: float = 0.01
    contact_lum_max: float = 0.1
    contact_confirm_samples: int = 5
    gravity: float = 9.81

    def __post_init__(self):
        positives = (
            self.parallel_tilt_max_deg, self.parallel_hold_duration,
            self.stationary_window, self.stationary_acc_std_max,
            self.stationary_gyro_std_max, self.contact_lum_max,
            self.contact_confirm_samples, self.gravity,
        )
        if any(v <= 0 for v in positives):
            raise ValueError("all detector thresholds must be strictly positive")
        if self.parallel_tilt_max_deg >= 90.0:
            raise ValueError("parallel_tilt_max_deg must be < 90")


# Mode names
ALOFT = "ALOFT"
PARALLEL_HOLD = "PARALLEL_HOLD"
CAPTURE_READY = "CAPTURE_READY"
PLACED_TRACKING = "PLACED_TRACKING"

# Event names
CAPTURE_TRIGGERED = "CAPTURE_TRIGGERED"
PLACED = "PLACED"
LIFTED = "LIFTED"
STATIONARY_ENTER = "STATIONARY_ENTER"
STATIONARY_EXIT = "STATIONARY_EXIT"


@dataclass(frozen=True)
class Event:
    name: str
    t: float


@dataclass
class DeviceMode:
    """Current mode, hold progress, and the stationary sub-flag."""

    kind: str = ALOFT
    hold_elapsed: float = 0.0
    stationary: bool = False


def is_parallel(sample: ImuSample, cfg: DetectorConfig) -> bool:
    """True when gravity sits along device +z within the tilt budget and
    the device is not rotating fast (coarse gate at 10x the stationary
    gyro threshold)."""
    acc = np.asarray(sample.acc, dtype=float)
    norm = math.sqrt(float(acc @ acc))
    if norm < 1e-9:
        return False
    cos_tilt = float(acc[2]) / norm
    tilt = math.degrees(math.acos(max(-1.0, min(1.0, cos_tilt))))
    if tilt > cfg.parallel_tilt_max_deg:
        return False
    gyro = np.asarray(sample.gyro, dtype=float)
    return math.sqrt(float(gyro @ gyro)) <= 10.0 * cfg.stationary_gyro_std_max


def is_stationary(window, cfg: DetectorConfig):
    """Windowed stillness test on per-axis standard deviations.

    Returns (stationary, insufficient_data).  A window spanning less than
    cfg.stationary_window seconds is indeterminate: (False, True).
    """
    samples = list(window)
    if len(samples) < 2:
        return False, True
    span = samples[-1].t - samples[0].t
    if span < cfg.stationary_window - 1e-9:
        return False, True
    acc = np.array([s.acc for s in samples], dtype=float)
    gyro = np.array([s.gyro for s in samples], dtype=float)
    acc_ok = bool(np.all(acc.std(axis=0) <= cfg.stationary_acc_std_max))
    gyro_ok = bool(np.all(gyro.std(axis=0) <= cfg.stationary_gyro_std_max))
    return acc_ok and gyro_ok, False


def contact_state(samples, cfg: DetectorConfig) -> bool:
    """True when the last contact_confirm_samples readings are all dark."""
    recent = list(samples)[-cfg.contact_confirm_samples:]
    if len(recent) < cfg.contact_confirm_samples:
        return False
    return all(s.lum <= cfg.contact_lum_max for s in recent)


class _MotionWindow:
    """Rolling per-axis variance of acc and gyro over a time window.

    Plain-float incremental sums (this runs once per sample); periodic
    rebuilds bound the float drift of repeated add/subtract.  Matches the
    population variance used by is_stationary.
    """

    _REBUILD_EVERY = 8192

    def __init__(self, window_s: float):
        self.window_s = window_s
        self.buf = deque()
        self.sums = [0.0] * 6
        self.sumsqs = [0.0] * 6
        self._ops = 0

    def push(self, t: float, acc, gyro):
        row = (t, float(acc[0]), float(acc[1]), float(acc[2]),
               float(gyro[0]), float(gyro[1]), float(gyro[2]))
        self.buf.append(row)
        sums, sumsqs = self.sums, self.sumsqs
        for i in range(6):
            v = row[i + 1]
            sums[i] += v
            sumsqs[i] += v * v
        cutoff = t - self.window_s - 1e-12
        while self.buf[0][0] < cutoff:
            old = self.buf.popleft()
            for i in range(6):
                v = old[i + 1]
                sums[i] -= v
                sumsqs[i] -= v * v
        self._ops += 1
        if self._ops >= self._REBUILD_EVERY:
            self._rebuild()

    def _rebuild(self):
        self.sums = [0.0] * 6
        self.sumsqs = [0.0] * 6
        for row in self.buf:
            for i in range(6):
                v = row[i + 1]
                self.sums[i] += v
                self.sumsqs[i] += v * v
        self._ops = 0

    def span(self) -> float:
        if len(self.buf) < 2:
            return 0.0
        return self.buf[-1][0] - self.buf[0][0]

    def quiet(self, acc_std_max: float, gyro_std_max: float) -> bool:
        n = len(self.buf)
        acc_lim = acc_std_max * acc_std_max
        gyro_lim = gyro_std_max * gyro_std_max
        for i in range(6):
            mean = self.sums[i] / n
            var = self.sumsqs[i] / n - mean * mean
            if var > (acc_lim if i < 3 else gyro_lim):
                return False
        return True


class ModeTracker:
    """Sequential device-mode state machine; one instance per session."""

    def __init__(self, cfg: DetectorConfig):
        self.cfg = cfg
        self.mode = DeviceMode()
        self.last_t: Optional[float] = None
        self._window = _MotionWindow(cfg.stationary_window)
        self._low_run = 0
        self._high_run = 0
        self._capture_armed = True

    def _contact_on(self) -> bool:
        return self._low_run >= self.cfg.contact_confirm_samples

    def _contact_off(self) -> bool:
        return self._high_run >= self.cfg.contact_confirm_samples

    def _stationary_now(self) -> bool:
        cfg = self.cfg
        if self._window.span() < cfg.stationary_window - 1e-9:
            return False
        return self._window.quiet(cfg.stationary_acc_std_max, cfg.stationary_gyro_std_max)

    def step(self, sample: ImuSample):
        """Advance the machine by one sample; returns emitted events."""
        cfg = self.cfg
        if self.last_t is not None and sample.t <= self.last_t:
            raise StreamError(
                f"non-increasing timestamp {sample.t} after {self.last_t}"
            )
        dt = 0.0 if self.last_t is None else sample.t - self.last_t
        self.last_t = sample.t

        self._window.push(sample.t, sample.acc, sample.gyro)
        if sample.lum <= cfg.contact_lum_max:
            self._low_run += 1
            self._high_run = 0
        else:
            self._high_run += 1
            self._low_run = 0

        events = []
        mode = self.mode

        if mode.kind == PLACED_TRACKING:
            if self._contact_off():
                if mode.stationary:
                    events.append(Event(STATIONARY_EXIT, sample.t))
                events.append(Event(LIFTED, sample.t))
                self.mode = DeviceMode(kind=ALOFT)
                self._capture_armed = True
                return events
            stationary = self._stationary_now()
            if stationary != mode.stationary:
                name = STATIONARY_ENTER if stationary else STATIONARY_EXIT
                events.append(Event(name, sample.t))
                mode.stationary = stationary
            return events

        # aloft-side modes: placement wins over everything else
        if self._contact_on():
            events.append(Event(PLACED, sample.t))
            self.mode = DeviceMode(kind=PLACED_TRACKING, stationary=False)
            return events

        if mode.kind == ALOFT:
            if is_parallel(sample, cfg):
                self.mode = DeviceMode(kind=PARALLEL_HOLD, hold_elapsed=0.0)
        elif mode.kind == PARALLEL_HOLD:
            if not is_parallel(sample, cfg):
                self.mode = DeviceMode(kind=ALOFT)
            else:
                mode.hold_elapsed += dt
                if self._capture_armed and mode.hold_elapsed >= cfg.parallel_hold_duration - 1e-12:
                    events.append(Event(CAPTURE_TRIGGERED, sample.t))
                    self._capture_armed = False
                    self.mode = DeviceMode(kind=CAPTURE_READY)
        # CAPTURE_READY simply waits for contact
        return events

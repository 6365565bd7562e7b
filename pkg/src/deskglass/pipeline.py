"""End-to-end sample pipeline: mode machine in front of the tracker.

One pipeline instance per stream.  Each IMU sample first drives the mode
state machine; while the device is placed, samples feed the EKF
(prediction every sample, ZUPT/ZARU whenever the stationary flag holds,
magnetometer updates whenever a mag reading is present).  On PLACED the
filter is anchored at the configured placement pose; on LIFTED it is
discarded.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .geometry import Pose2D
from .motion import (
    LIFTED,
    PLACED,
    DetectorConfig,
    Event,
    ImuSample,
    ModeTracker,
)
from .simulator import MagnetSetup
from . import tracker
from .tracker import AnchorStds, FilterState, NoiseParams


@dataclass
class PipelineConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    noise: NoiseParams = field(default_factory=NoiseParams)
    anchor_stds: AnchorStds = field(default_factory=AnchorStds)
    placement_pose: Pose2D = field(default_factory=Pose2D.identity)
    zupt_enabled: bool = True
    zaru_enabled: bool = True
    magnet: Optional[MagnetSetup] = None


@dataclass
class StepResult:
    """What one sample produced: events, and a state row while tracking."""

    t: float
    events: List[Event]
    state: Optional[FilterState]
    mode: str
    stationary: bool
    zupt_applied: bool = False
    mag_status: Optional[str] = None


class TrackingPipeline:
    """Sequential per-session pipeline; feed samples in time order."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.modes = ModeTracker(config.detector)
        self.state: Optional[FilterState] = None

    def reset(self):
        self.modes = ModeTracker(self.config.detector)
        self.state = None

    def process(self, sample: ImuSample) -> StepResult:
        cfg = self.config
        events = self.modes.step(sample)
        zupt_applied = False
        mag_status = None

        for ev in events:
            if ev.name == PLACED:
                self.state = tracker.anchor(cfg.placement_pose, sample.t, cfg.anchor_stds)
            elif ev.name == LIFTED:
                self.state = None

        mode = self.modes.mode
        if self.state is not None and sample.t > self.state.t:
            # While stationary, displacement updates are halted: position is
            # frozen through the prediction.  The velocity guard keeps a
            # false stationary flag (e.g. constant-velocity cruise, which is
            # indistinguishable from rest for an IMU) from freezing a moving
            # estimate.
            v = self.state.mean[tracker.IDX_VX:tracker.IDX_VY + 1]
            freeze = (
                mode.stationary
                and cfg.zupt_enabled
                and float(v @ v) < (3.0 * cfg.noise.zupt_sigma_v) ** 2
            )
            self.state = tracker.predict(self.state, sample, cfg.noise, freeze_position=freeze)
            if mode.stationary and cfg.zupt_enabled:
                gyro_z = float(sample.gyro[2]) if cfg.zaru_enabled else None
                self.state = tracker.zupt_update(self.state, cfg.noise, gyro_z=gyro_z)
                zupt_applied = True
            if sample.mag is not None and cfg.magnet is not None:
                self.state, mag_status = tracker.mag_update(
                    self.state, sample, cfg.magnet.model, cfg.magnet.ambient_uT,
                    cfg.noise, cfg.magnet.sensor_height_mm,
                )

        return StepResult(
            t=sample.t,
            events=events,
            state=self.state,
            mode=mode.kind,
            stationary=mode.stationary,
            zupt_applied=zupt_applied,
            mag_status=mag_status,
        )


@dataclass
class ReplayResult:
    times: np.ndarray
    means: np.ndarray           # (n, 8) state vectors while tracking
    cov_traces: np.ndarray
    events: List[Event]
    zupt_flags: np.ndarray
    pose_estimates: list        # [(t, Pose2D)] aligned with times

    def estimates(self):
        return self.pose_estimates


def run_replay(samples, config: PipelineConfig) -> ReplayResult:
    """Run a full recorded stream through the pipeline and collect rows."""
    pipe = TrackingPipeline(config)
    times, means, traces, zupts = [], [], [], []
    events: List[Event] = []
    for sample in samples:
        step = pipe.process(sample)
        events.extend(step.events)
        if step.state is not None:
            times.append(step.t)
            means.append(step.state.mean.copy())
            traces.append(float(np.trace(step.state.cov)))
            zupts.append(step.zupt_applied)
    means_arr = np.asarray(means) if means else np.zeros((0, tracker.STATE_DIM))
    poses = [
        (t, Pose2D(m[0] * 1e3, m[1] * 1e3, m[2]))
        for t, m in zip(times, means)
    ]
    return ReplayResult(
        times=np.asarray(times),
        means=means_arr,
        cov_traces=np.asarray(traces),
        events=events,
        zupt_flags=np.asarray(zupts, dtype=bool),
        pose_estimates=poses,
    )

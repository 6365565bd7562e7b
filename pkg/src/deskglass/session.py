"""Tracking sessions: config parsing, the per-session pipeline wrapper,
pointer-driven live synthesis, and the session registry.

This module is transport-independent; the websocket layer in server.py
only shuttles JSON dicts in and out of Session.ingest / Session.reset.
Message schemas:

  client -> server:
    {"type": "init", "config": {...}}
    {"type": "imu", "samples": [{"t","acc","gyro","mag"?,"lum"}, ...]}
    {"type": "pointer", "poses": [{"t","x_mm","y_mm","theta_rad",
                                   "contact","lifting"}, ...]}
    {"type": "reset"}
    {"type": "frame_request"}

  server -> client:
    {"type": "ack", "session_id", "map": {...}, "map_png_base64", "rate"}
    {"type": "state", "seq", "t", "pose": [x_mm, y_mm, theta],
     "cov_diag": [..8], "mode", "stationary"}
    {"type": "event", "name", "t"}
    {"type": "frame", "seq", "png_base64"}
    {"type": "error", "code", "detail"}
"""

import base64
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from PIL import Image

from . import rng, tracker
from .geometry import (
    DEFAULT_GEOMETRY,
    DeviceGeometry,
    Pose2D,
    SurfaceMap,
    normalize_angle,
)
from .motion import DetectorConfig, ImuSample, StreamError
from .pipeline import PipelineConfig, TrackingPipeline
from .renderer import RenderConfig, render_screen
from .simulator import (
    CH_ACC,
    CH_GYRO,
    CH_LUM,
    LUM_ALOFT,
    LUM_CONTACT,
    LUM_NOISE,
    MagnetSetup,
    generate_map,
)
from .tracker import AnchorStds, MagnetModel, NoiseParams

DEFAULT_MAX_SESSIONS = 32
DEFAULT_DECIMATION = 5
DEFAULT_LIVE_RATE = 200.0

MODES = ("replay", "live_imu", "live_pointer")
FRAME_DELIVERY = ("poses_only", "server_rendered")


class SessionError(ValueError):
    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


@dataclass
class SessionConfig:
    session_id: str
    mode: str = "live_pointer"
    geometry: DeviceGeometry = DEFAULT_GEOMETRY
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    noise: NoiseParams = field(default_factory=NoiseParams)
    anchor_stds: AnchorStds = field(default_factory=AnchorStds)
    placement_pose: Pose2D = field(default_factory=Pose2D.identity)
    magnet: Optional[MagnetSetup] = None
    map_spec: dict = field(default_factory=dict)
    mm_per_px: float = 0.2
    rate: float = DEFAULT_LIVE_RATE
    decimation: int = DEFAULT_DECIMATION
    frame_delivery: str = "poses_only"
    zupt_enabled: bool = True
    zaru_enabled: bool = True
    seed: int = 0
    noise_scale: float = 1.0

    @staticmethod
    def from_json(data: dict) -> "SessionConfig":
        if not isinstance(data, dict) or "session_id" not in data:
            raise SessionError("bad_config", "config requires a session_id")
        cfg = SessionConfig(session_id=str(data["session_id"]))
        if "mode" in data:
            if data["mode"] not in MODES:
                raise SessionError("bad_config", f"mode must be one of {MODES}")
            cfg.mode = data["mode"]
        if "frame_delivery" in data:
            if data["frame_delivery"] not in FRAME_DELIVERY:
                raise SessionError(
                    "bad_config", f"frame_delivery must be one of {FRAME_DELIVERY}"
                )
            cfg.frame_delivery = data["frame_delivery"]
        try:
            if "geometry" in data:
                cfg.geometry = DeviceGeometry(**data["geometry"])
            if "detector" in data:
                cfg.detector = DetectorConfig(**data["detector"])
            if "noise" in data:
                cfg.noise = NoiseParams(**data["noise"])
            if "anchor" in data:
                cfg.anchor_stds = AnchorStds(**data["anchor"])
            if "placement_pose" in data:
                cfg.placement_pose = Pose2D(*data["placement_pose"])
            if data.get("magnet") is not None:
                m = data["magnet"]
                cfg.magnet = MagnetSetup(
                    model=MagnetModel(position_mm=m["position_mm"], moment=m["moment"]),
                    ambient_uT=m.get("ambient_uT", (0.0, 0.0, 0.0)),
                    sensor_height_mm=float(m.get("sensor_height_mm", 5.0)),
                )
            if "map" in data:
                cfg.map_spec = dict(data["map"])
            for key in ("rate", "mm_per_px", "noise_scale"):
                if key in data:
                    setattr(cfg, key, float(data[key]))
            for key in ("decimation", "seed"):
                if key in data:
                    setattr(cfg, key, int(data[key]))
            for key in ("zupt_enabled", "zaru_enabled"):
                if key in data:
                    setattr(cfg, key, bool(data[key]))
        except SessionError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SessionError("bad_config", str(exc)) from exc
        if not 50.0 <= cfg.rate <= 2000.0:
            raise SessionError("bad_config", "rate must lie in [50, 2000] Hz")
        if cfg.decimation < 1:
            raise SessionError("bad_config", "decimation must be >= 1")
        return cfg


def _load_session_map(cfg: SessionConfig) -> SurfaceMap:
    spec = dict(cfg.map_spec) if cfg.map_spec else {"kind": "checkerboard"}
    if spec.get("kind") == "inline":
        raw = base64.b64decode(spec["png_base64"])
        img = np.asarray(Image.open(io.BytesIO(raw)).convert("RGB"), dtype=np.uint8)
        return SurfaceMap(image=img, mm_per_px=float(spec.get("mm_per_px", cfg.mm_per_px)))
    return generate_map(spec, cfg.mm_per_px)


class PointerSynth:
    """Turns ground-truth pointer poses into a grid-aligned IMU stream.

    Between consecutive pointer poses the synthesized motion uses one
    acceleration impulse followed by constant velocity, which keeps the
    acceleration piecewise-constant on the sample grid (exactly what the
    tracker integrates).  Aloft gaps synthesize a flat, still device.
    """

    def __init__(self, rate: float, noise: NoiseParams, noise_scale: float, seed: int):
        self.rate = rate
        self.dt = 1.0 / rate
        self.noise = noise
        self.noise_scale = noise_scale
        self.seed = seed
        self.k: Optional[int] = None
        self.pos = np.zeros(2)
        self.theta = 0.0
        self.vel = np.zeros(2)
        self.contact = False
        self.last_pose = Pose2D(0.0, 0.0, 0.0)

    def _noise(self, k: int, channel: int, sigma: float) -> float:
        if sigma * self.noise_scale == 0.0:
            return 0.0
        counter = rng.channel_counter(np.uint64(k), channel)
        return float(rng.normal(self.seed, counter)[0]) * sigma * self.noise_scale

    def feed(self, t: float, pose: Pose2D, contact: bool) -> List[ImuSample]:
        k_new = round(t * self.rate)
        if self.k is None:
            self.k = k_new
            self.pos = np.array([pose.x, pose.y])
            self.theta = pose.theta
            self.contact = contact
            self.last_pose = pose
            return []
        if k_new <= self.k:
            # pointer faster than the sample grid; keep the latest target
            self.last_pose = pose
            return []
        n = k_new - self.k
        samples = []
        target = np.array([pose.x, pose.y])
        dth = normalize_angle(pose.theta - self.theta)
        if contact and self.contact:
            v_gap = (target - self.pos) / (n * self.dt)
            omega = dth / (n * self.dt)
        else:
            # aloft (or transitioning): hold attitude, teleport the pose
            v_gap = np.zeros(2)
            omega = 0.0
            self.pos = target
            self.theta = pose.theta
        g = 9.81
        for j in range(n):
            k = self.k + 1 + j
            tk = k * self.dt
            accel_world = np.zeros(2)
            if contact and self.contact and j == 0:
                accel_world = (v_gap - self.vel) / self.dt
            # advance synthesized truth
            if contact and self.contact:
                self.pos = self.pos + self.vel * self.dt + 0.5 * accel_world * self.dt ** 2
                self.vel = self.vel + accel_world * self.dt
                th_mid = self.theta + omega * self.dt / 2.0
                self.theta = normalize_angle(self.theta + omega * self.dt)
            else:
                self.vel = np.zeros(2)
                th_mid = self.theta
            c, s = math.cos(th_mid), math.sin(th_mid)
            ax = (c * accel_world[0] + s * accel_world[1]) * 1e-3
            ay = (-s * accel_world[0] + c * accel_world[1]) * 1e-3
            acc = np.array([
                ax + self._noise(k, CH_ACC[0], self.noise.sigma_acc),
                ay + self._noise(k, CH_ACC[1], self.noise.sigma_acc),
                g + self._noise(k, CH_ACC[2], self.noise.sigma_acc),
            ])
            gyro = np.array([
                self._noise(k, CH_GYRO[0], self.noise.sigma_gyro),
                self._noise(k, CH_GYRO[1], self.noise.sigma_gyro),
                omega + self._noise(k, CH_GYRO[2], self.noise.sigma_gyro),
            ])
            lum_base = LUM_CONTACT if contact else LUM_ALOFT
            lum = min(1.0, max(0.0, lum_base + self._noise(k, CH_LUM, LUM_NOISE)))
            samples.append(ImuSample(t=tk, acc=acc, gyro=gyro, mag=None, lum=lum))
        self.k = k_new
        self.contact = contact
        self.last_pose = pose
        return samples


class Session:
    """One tracking session: mode machine + tracker + frame rendering."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.surface = _load_session_map(config)
        self.pipeline = TrackingPipeline(PipelineConfig(
            detector=config.detector,
            noise=config.noise,
            anchor_stds=config.anchor_stds,
            placement_pose=config.placement_pose,
            zupt_enabled=config.zupt_enabled,
            zaru_enabled=config.zaru_enabled,
            magnet=config.magnet,
        ))
        self.synth = PointerSynth(config.rate, config.noise, config.noise_scale, config.seed)
        self.seq = 0
        self.frame_seq = 0
        self.tracked_count = 0
        self.broken = False
        self._last_result = None

    def ack(self) -> dict:
        png = io.BytesIO()
        Image.fromarray(self.surface.image).save(png, format="PNG")
        return {
            "type": "ack",
            "session_id": self.config.session_id,
            "rate": self.config.rate,
            "map": {
                "mm_per_px": self.surface.mm_per_px,
                "width_px": self.surface.width_px,
                "height_px": self.surface.height_px,
            },
            "map_png_base64": base64.b64encode(png.getvalue()).decode(),
        }

    def reset(self) -> dict:
        self.pipeline.reset()
        self.synth = PointerSynth(
            self.config.rate, self.config.noise, self.config.noise_scale, self.config.seed
        )
        self.broken = False
        self._last_result = None
        return {"type": "ack", "session_id": self.config.session_id, "reset": True}

    def _state_message(self, result) -> dict:
        self.seq += 1
        pose = tracker.estimate_pose(result.state)
        return {
            "type": "state",
            "seq": self.seq,
            "t": result.t,
            "pose": [pose.x, pose.y, pose.theta],
            "cov_diag": [float(v) for v in np.diag(result.state.cov)],
            "mode": result.mode,
            "stationary": result.stationary,
        }

    def _frame_message(self) -> dict:
        self.frame_seq += 1
        return {
            "type": "frame",
            "seq": self.frame_seq,
            "png_base64": base64.b64encode(self.render_frame_png()).decode(),
        }

    def render_frame_png(self) -> bytes:
        if self._last_result is not None and self._last_result.state is not None:
            pose = tracker.estimate_pose(self._last_result.state)
        else:
            pose = self.config.placement_pose
        frame = render_screen(pose, self.config.geometry, self.surface, RenderConfig())
        buf = io.BytesIO()
        Image.fromarray(frame).save(buf, format="PNG")
        return buf.getvalue()

    def _run_samples(self, samples: List[ImuSample]) -> List[dict]:
        messages = []
        emitted_state = False
        for sample in samples:
            result = self.pipeline.process(sample)
            self._last_result = result
            for ev in result.events:
                messages.append({"type": "event", "name": ev.name, "t": ev.t})
            if result.state is not None:
                self.tracked_count += 1
                if (self.tracked_count - 1) % self.config.decimation == 0:
                    messages.append(self._state_message(result))
                    emitted_state = True
                    if self.config.frame_delivery == "server_rendered":
                        messages.append(self._frame_message())
                else:
                    emitted_state = False
        # flush the newest state at batch end so clients stay current
        if (
            self._last_result is not None
            and self._last_result.state is not None
            and not emitted_state
        ):
            messages.append(self._state_message(self._last_result))
            if self.config.frame_delivery == "server_rendered":
                messages.append(self._frame_message())
        return messages

    def ingest(self, payload: dict) -> List[dict]:
        if self.broken:
            return [{
                "type": "error", "code": "needs_reset",
                "detail": "session in error state; send reset",
            }]
        kind = payload.get("type")
        try:
            if kind == "imu":
                samples = []
                for rec in payload.get("samples", []):
                    samples.append(ImuSample(
                        t=float(rec["t"]),
                        acc=np.asarray(rec["acc"], dtype=float),
                        gyro=np.asarray(rec["gyro"], dtype=float),
                        mag=np.asarray(rec["mag"], dtype=float) if rec.get("mag") is not None else None,
                        lum=float(rec.get("lum", 1.0)),
                    ))
                return self._run_samples(samples)
            if kind == "pointer":
                if self.config.mode != "live_pointer":
                    raise SessionError("bad_message", "pointer payload requires live_pointer mode")
                samples = []
                for rec in payload.get("poses", []):
                    pose = Pose2D(
                        float(rec["x_mm"]), float(rec["y_mm"]), float(rec.get("theta_rad", 0.0))
                    )
                    contact = bool(rec.get("contact", False)) and not bool(rec.get("lifting", False))
                    if contact and not self.synth.contact:
                        # anchor wherever the pointer places the device
                        self.pipeline.config.placement_pose = pose
                    samples.extend(self.synth.feed(float(rec["t"]), pose, contact))
                return self._run_samples(samples)
            raise SessionError("bad_message", f"unknown payload type {kind!r}")
        except StreamError as exc:
            self.broken = True
            return [{"type": "error", "code": "stream_error", "detail": str(exc)}]
        except SessionError as exc:
            return [{"type": "error", "code": exc.code, "detail": exc.detail}]
        except (KeyError, TypeError, ValueError) as exc:
            return [{"type": "error", "code": "bad_message", "detail": str(exc)}]


class SessionManager:
    """Registry with a capacity cap; sessions are fully independent."""

    def __init__(
        self,
        max_sessions: int = DEFAULT_MAX_SESSIONS,
        default_decimation: int = DEFAULT_DECIMATION,
    ):
        self.max_sessions = max_sessions
        self.default_decimation = default_decimation
        self.sessions: Dict[str, Session] = {}

    def open(self, config_json: dict) -> Session:
        cfg = SessionConfig.from_json(config_json)
        if "decimation" not in config_json:
            cfg.decimation = self.default_decimation
        if cfg.session_id in self.sessions:
            raise SessionError("duplicate_session", f"session {cfg.session_id!r} already open")
        if len(self.sessions) >= self.max_sessions:
            raise SessionError(
                "capacity",
                f"server at capacity ({self.max_sessions}); retry after a session closes",
            )
        session = Session(cfg)
        self.sessions[cfg.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionError("unknown_session", f"no session {session_id!r}") from None

    def close(self, session_id: str) -> None:
        self.sessions.pop(session_id, None)

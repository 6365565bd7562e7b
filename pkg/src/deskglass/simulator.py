"""Deterministic scenario engine: scripted motion -> ground truth ->
synthetic IMU stream, plus the evaluation metrics.

Motion segments use trapezoidal (piecewise-constant-acceleration)
profiles whose phase boundaries are snapped to the sample grid, and each
emitted IMU sample carries the interval-constant acceleration/turn-rate
for the interval it closes, evaluated at the interval midpoint.  Together
with the tracker's midpoint integrator this makes noise-free closed-loop
tracking exact to floating-point at desk scale.

All injected noise comes from the counter-based generator keyed by
(seed, sample index, channel), so traces are bit-reproducible regardless
of evaluation order.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import rng
from .geometry import (
    DEFAULT_GEOMETRY,
    DeviceGeometry,
    Pose2D,
    SurfaceMap,
    normalize_angle,
    rectification_scale,
)
from .motion import ImuSample
from .tracker import MagnetModel, NoiseParams, dipole_field

SEGMENT_KINDS = ("hold_aloft", "lower_and_place", "move_to", "pause", "lift")

# noise channel lanes for the counter RNG
CH_ACC = (0, 1, 2)
CH_GYRO = (3, 4, 5)
CH_MAG = (6, 7, 8)
CH_LUM = 9

LUM_CONTACT = 0.02
LUM_ALOFT = 0.9
LUM_NOISE = 0.01


class ScenarioError(ValueError):
    """Invalid scenario definition; carries the offending field name."""

    def __init__(self, message: str, field_name: Optional[str] = None):
        super().__init__(message)
        self.field_name = field_name


class EvaluationError(ValueError):
    pass


class TraceFormatError(ValueError):
    """Malformed trace/truth file; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Segment:
    kind: str
    duration: float
    target: Optional[Pose2D] = None

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ScenarioError(f"unknown segment kind {self.kind!r}", "segments.kind")
        if self.duration <= 0:
            raise ScenarioError("segment duration must be > 0", "segments.duration")
        if self.kind == "move_to" and self.target is None:
            raise ScenarioError("move_to segment requires a target", "segments.target")


@dataclass(frozen=True)
class MagnetSetup:
    """A dipole beacon plus the uniform ambient field, both world frame."""

    model: MagnetModel
    ambient_uT: np.ndarray
    sensor_height_mm: float = 5.0

    def __post_init__(self):
        object.__setattr__(
            self, "ambient_uT", np.asarray(self.ambient_uT, dtype=float).reshape(3)
        )


@dataclass(frozen=True)
class Scenario:
    segments: tuple
    seed: int = 0
    rate: float = 1000.0
    geometry: DeviceGeometry = DEFAULT_GEOMETRY
    map_spec: dict = field(default_factory=lambda: dict(DEFAULT_MAP_SPEC))
    capture_height_mm: float = 300.0
    focal_length_px: float = 1500.0
    noise: NoiseParams = NoiseParams()
    noise_scale: float = 1.0
    bias_true: tuple = (0.0, 0.0, 0.0)
    magnet: Optional[MagnetSetup] = None
    mag_decimation: int = 20
    start_pose: Pose2D = Pose2D(0.0, 0.0, 0.0)
    contact_lead_samples: int = 4

    def __post_init__(self):
        if not 50.0 <= self.rate <= 2000.0:
            raise ScenarioError("rate must lie in [50, 2000] Hz", "rate")
        if not self.segments:
            raise ScenarioError("segments must be non-empty", "segments")
        if self.segments[0].kind not in ("hold_aloft", "lower_and_place"):
            raise ScenarioError(
                "first segment must be hold_aloft or lower_and_place", "segments"
            )
        if self.noise_scale < 0:
            raise ScenarioError("noise_scale must be >= 0", "noise_scale")
        if self.mag_decimation < 1:
            raise ScenarioError("mag_decimation must be >= 1", "mag_decimation")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def mm_per_px(self) -> float:
        return rectification_scale(self.capture_height_mm, self.focal_length_px)


DEFAULT_MAP_SPEC = {
    "kind": "checkerboard",
    "width_px": 2200,
    "height_px": 1700,
    "square_mm": 20.0,
    "colors": [[202, 198, 188], [58, 62, 70]],
}


@dataclass
class GroundTruth:
    """Exact trajectory aligned 1:1 with the emitted IMU samples.

    poses holds (x_mm, y_mm, theta_rad) per sample; world_acc (m/s^2) and
    turn_rate (rad/s) hold the interval-constant inverse dynamics for the
    interval each sample closes.
    """

    t: np.ndarray
    poses: np.ndarray
    contact: np.ndarray
    world_acc: np.ndarray
    turn_rate: np.ndarray
    lum_low: np.ndarray
    spans: list
    capture_pose: Optional[Pose2D] = None
    capture_index: Optional[int] = None

    def __len__(self) -> int:
        return len(self.t)

    def pose_at(self, k: int) -> Pose2D:
        return Pose2D(*self.poses[k])

    def first_contact_index(self) -> Optional[int]:
        idx = np.flatnonzero(self.contact)
        return int(idx[0]) if idx.size else None


def _trapezoid(delta: float, n: int, dt: float):
    """Grid-aligned 1/3-1/3-1/3 trapezoid covering n intervals.

    Returns (accel_per_interval, offset_per_sample[n+1]); the offset ends
    exactly at delta and velocity returns to zero.
    """
    if n < 2:
        raise ScenarioError("move_to needs at least 2 samples", "segments.duration")
    n1 = max(1, round(n / 3))
    if 2 * n1 > n:
        n1 = n // 2
    n2 = n - 2 * n1
    v_pk = delta / (dt * (n1 + n2))
    a = v_pk / (n1 * dt)
    acc = np.zeros(n)
    acc[:n1] = a
    acc[n1 + n2:] = -a
    vel = np.concatenate([[0.0], np.cumsum(acc) * dt])
    steps = vel[:-1] * dt + 0.5 * acc * dt * dt
    offset = np.concatenate([[0.0], np.cumsum(steps)])
    return acc, offset


def plan_trajectory(scenario: Scenario) -> GroundTruth:
    """Expand segments into a sampled trajectory with inverse dynamics."""
    dt = 1.0 / scenario.rate
    pose = scenario.start_pose
    in_contact = False

    t_list = [0.0]
    poses = [[pose.x, pose.y, pose.theta]]
    contact = [False]
    world_acc = []
    turn_rate = []
    spans = []
    capture_pose = None
    place_indices = []

    k = 0  # index of the last emitted sample
    for seg in scenario.segments:
        n = max(1, round(seg.duration * scenario.rate))
        start = k
        if seg.kind in ("hold_aloft", "lower_and_place") and in_contact:
            raise ScenarioError(f"{seg.kind} while already placed", "segments")
        if seg.kind in ("move_to", "lift") and not in_contact:
            raise ScenarioError(f"{seg.kind} before placement", "segments")

        if seg.kind == "move_to":
            dx = seg.target.x - pose.x
            dy = seg.target.y - pose.y
            dist = math.hypot(dx, dy)
            dth = normalize_angle(seg.target.theta - pose.theta)
            if dist > 0:
                acc_s, off_s = _trapezoid(dist, n, dt)
                ux, uy = dx / dist, dy / dist
            else:
                acc_s = off_s = None
                ux = uy = 0.0
            # heading ramps at a constant turn rate across the segment
            omega = dth / (n * dt) if dth != 0.0 else 0.0
            for i in range(n):
                k += 1
                sx = off_s[i + 1] if off_s is not None else 0.0
                poses.append([
                    pose.x + ux * sx,
                    pose.y + uy * sx,
                    normalize_angle(pose.theta + dth * (i + 1) / n),
                ])
                t_list.append(k * dt)
                contact.append(True)
                a = acc_s[i] if acc_s is not None else 0.0
                world_acc.append([ux * a * 1e-3, uy * a * 1e-3])
                turn_rate.append(omega)
            # snap the segment end to the exact target
            poses[-1] = [seg.target.x, seg.target.y, normalize_angle(seg.target.theta)]
            pose = Pose2D(*poses[-1])
        else:
            seg_contact = in_contact and seg.kind != "lift"
            if seg.kind == "lift":
                in_contact = False
            for _ in range(n):
                k += 1
                t_list.append(k * dt)
                poses.append([pose.x, pose.y, pose.theta])
                contact.append(seg_contact)
                world_acc.append([0.0, 0.0])
                turn_rate.append(0.0)
            if seg.kind == "lower_and_place":
                contact[-1] = True
                in_contact = True
                place_indices.append(k)
            if seg.kind == "hold_aloft" and capture_pose is None:
                capture_pose = pose
        spans.append((seg.kind, start, k))

    truth = GroundTruth(
        t=np.asarray(t_list),
        poses=np.asarray(poses),
        contact=np.asarray(contact, dtype=bool),
        world_acc=np.asarray(world_acc),
        turn_rate=np.asarray(turn_rate),
        lum_low=np.zeros(len(t_list), dtype=bool),
        spans=spans,
        capture_pose=capture_pose,
        capture_index=None,
    )
    lum_low = truth.contact.copy()
    lead = scenario.contact_lead_samples
    for place_k in place_indices:
        lum_low[max(0, place_k - lead):place_k] = True
    truth.lum_low = lum_low
    return truth


@dataclass
class SimTrace:
    """Synthesized IMU stream as columnar arrays (1:1 with truth samples)."""

    t: np.ndarray
    acc: np.ndarray
    gyro: np.ndarray
    mag: Optional[np.ndarray]
    mag_mask: np.ndarray
    lum: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def sample(self, k: int) -> ImuSample:
        mag = self.mag[k] if self.mag is not None and self.mag_mask[k] else None
        return ImuSample(
            t=float(self.t[k]), acc=self.acc[k], gyro=self.gyro[k],
            mag=mag, lum=float(self.lum[k]),
        )

    def samples(self):
        for k in range(len(self.t)):
            yield self.sample(k)


def synthesize_imu(truth: GroundTruth, scenario: Scenario) -> SimTrace:
    """Inverse dynamics + biases + seeded noise -> device-frame IMU stream."""
    n_samples = len(truth)
    dt = 1.0 / scenario.rate
    g = 9.81
    idx = np.arange(n_samples, dtype=np.uint64)
    scale = scenario.noise_scale
    noise = scenario.noise

    def channel_noise(ch: int, sigma: float) -> np.ndarray:
        if sigma * scale == 0.0:
            return np.zeros(n_samples)
        return rng.normal(scenario.seed, rng.channel_counter(idx, ch)) * sigma * scale

    # interval values for the interval each sample closes (sample 0 reuses
    # interval 0; it never drives a prediction)
    j = np.maximum(np.arange(n_samples) - 1, 0)
    a_w = truth.world_acc[np.minimum(j, len(truth.world_acc) - 1)]
    omega = truth.turn_rate[np.minimum(j, len(truth.turn_rate) - 1)]
    th_prev = truth.poses[np.maximum(np.arange(n_samples) - 1, 0), 2]
    th_mid = th_prev + omega * dt / 2.0

    c, s = np.cos(th_mid), np.sin(th_mid)
    acc = np.empty((n_samples, 3))
    acc[:, 0] = c * a_w[:, 0] + s * a_w[:, 1] + scenario.bias_true[0]
    acc[:, 1] = -s * a_w[:, 0] + c * a_w[:, 1] + scenario.bias_true[1]
    acc[:, 2] = g
    acc[:, 0] += channel_noise(CH_ACC[0], noise.sigma_acc)
    acc[:, 1] += channel_noise(CH_ACC[1], noise.sigma_acc)
    acc[:, 2] += channel_noise(CH_ACC[2], noise.sigma_acc)

    gyro = np.empty((n_samples, 3))
    gyro[:, 0] = channel_noise(CH_GYRO[0], noise.sigma_gyro)
    gyro[:, 1] = channel_noise(CH_GYRO[1], noise.sigma_gyro)
    gyro[:, 2] = omega + scenario.bias_true[2] + channel_noise(CH_GYRO[2], noise.sigma_gyro)

    mag = None
    mag_mask = np.zeros(n_samples, dtype=bool)
    if scenario.magnet is not None:
        setup = scenario.magnet
        mag_mask = truth.contact & (np.arange(n_samples) % scenario.mag_decimation == 0)
        mag = np.zeros((n_samples, 3))
        th_now = truth.poses[:, 2]
        cn, sn = np.cos(th_now), np.sin(th_now)
        for k in np.flatnonzero(mag_mask):
            at = np.array([truth.poses[k, 0], truth.poses[k, 1], setup.sensor_height_mm])
            world = setup.ambient_uT + dipole_field(setup.model, at)
            mag[k, 0] = cn[k] * world[0] + sn[k] * world[1]
            mag[k, 1] = -sn[k] * world[0] + cn[k] * world[1]
            mag[k, 2] = world[2]
        mag[:, 0] += channel_noise(CH_MAG[0], noise.mag_sigma)
        mag[:, 1] += channel_noise(CH_MAG[1], noise.mag_sigma)
        mag[:, 2] += channel_noise(CH_MAG[2], noise.mag_sigma)

    lum = np.where(truth.lum_low, LUM_CONTACT, LUM_ALOFT)
    lum = np.clip(lum + channel_noise(CH_LUM, LUM_NOISE), 0.0, 1.0)

    return SimTrace(t=truth.t.copy(), acc=acc, gyro=gyro, mag=mag, mag_mask=mag_mask, lum=lum)


def generate_map(map_spec: dict, mm_per_px: float) -> SurfaceMap:
    """Build the scenario's surface map (checkerboard, value noise, or file)."""
    kind = map_spec.get("kind")
    if kind == "file":
        from .geometry import load_surface_map

        return load_surface_map(map_spec["path"], map_spec.get("sidecar"))
    w = int(map_spec.get("width_px", 2200))
    h = int(map_spec.get("height_px", 1700))
    if kind == "checkerboard":
        square_px = float(map_spec.get("square_mm", 20.0)) / mm_per_px
        colors = np.asarray(
            map_spec.get("colors", DEFAULT_MAP_SPEC["colors"]), dtype=np.uint8
        )
        cols = np.floor(np.arange(w) / square_px).astype(np.int64)
        rows = np.floor(np.arange(h) / square_px).astype(np.int64)
        parity = (rows[:, None] + cols[None, :]) % 2
        return SurfaceMap(image=colors[parity], mm_per_px=mm_per_px)
    if kind == "noise":
        base = np.asarray(map_spec.get("base_rgb", (150, 140, 125)), dtype=float)
        amplitude = float(map_spec.get("amplitude", 40.0))
        cell = int(map_spec.get("cell_px", 32))
        seed = int(map_spec.get("map_seed", 0))
        img = _value_noise_image(w, h, cell, seed, base, amplitude)
        return SurfaceMap(image=img, mm_per_px=mm_per_px)
    raise ScenarioError(f"unknown map kind {kind!r}", "map.kind")


def _value_noise_image(w, h, cell, seed, base, amplitude):
    gw = w // cell + 2
    gh = h // cell + 2
    counters = np.arange(gw * gh * 3, dtype=np.uint64)
    lattice = (rng.uniform(seed, counters).reshape(gh, gw, 3) * 2.0 - 1.0) * amplitude
    ys = np.arange(h) / cell
    xs = np.arange(w) / cell
    y0 = ys.astype(np.int64)
    x0 = xs.astype(np.int64)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    tl = lattice[y0][:, x0]
    tr = lattice[y0][:, x0 + 1]
    bl = lattice[y0 + 1][:, x0]
    br = lattice[y0 + 1][:, x0 + 1]
    val = (tl * (1 - fx) + tr * fx) * (1 - fy) + (bl * (1 - fx) + br * fx) * fy
    return np.clip(np.floor(base + val + 0.5), 0, 255).astype(np.uint8)


def capture_surface(scenario: Scenario, truth: GroundTruth) -> SurfaceMap:
    """The background image 'captured' at the hold-parallel trigger."""
    if truth.capture_pose is None:
        raise ScenarioError("scenario has no hold_aloft capture moment", "segments")
    return generate_map(scenario.map_spec, scenario.mm_per_px)


def evaluate(truth: GroundTruth, estimates) -> dict:
    """Error metrics between truth and (t, Pose2D) estimates.

    Timestamps must match truth samples exactly (1e-9 s); estimates may
    cover any subset of the trajectory (typically the placed span).
    """
    if not estimates:
        raise EvaluationError("no estimates to evaluate")
    order = np.argsort(truth.t, kind="stable")
    t_sorted = truth.t[order]
    pos_err = np.empty(len(estimates))
    head_err = np.empty(len(estimates))
    for i, (t, pose) in enumerate(estimates):
        j = np.searchsorted(t_sorted, t)
        j_near = None
        for cand in (j - 1, j, j + 1):
            if 0 <= cand < len(t_sorted) and abs(t_sorted[cand] - t) <= 1e-9:
                j_near = order[cand]
                break
        if j_near is None:
            raise EvaluationError(f"estimate timestamp {t} not in ground truth")
        tx, ty, tth = truth.poses[j_near]
        pos_err[i] = math.hypot(pose.x - tx, pose.y - ty)
        head_err[i] = normalize_angle(pose.theta - tth)
    return {
        "rmse_pos": float(np.sqrt(np.mean(pos_err ** 2))),
        "final_err": float(pos_err[-1]),
        "max_err": float(np.max(pos_err)),
        "rmse_heading": float(np.sqrt(np.mean(head_err ** 2))),
    }


# ---------------------------------------------------------------------------
# file formats


def write_trace(path, trace: SimTrace) -> None:
    with open(path, "w") as f:
        for k in range(len(trace)):
            rec = {
                "t": float(trace.t[k]),
                "acc": [float(v) for v in trace.acc[k]],
                "gyro": [float(v) for v in trace.gyro[k]],
            }
            if trace.mag is not None and trace.mag_mask[k]:
                rec["mag"] = [float(v) for v in trace.mag[k]]
            rec["lum"] = float(trace.lum[k])
            f.write(json.dumps(rec) + "\n")


def read_trace(path) -> List[ImuSample]:
    samples = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                samples.append(ImuSample(
                    t=float(rec["t"]),
                    acc=np.asarray(rec["acc"], dtype=float),
                    gyro=np.asarray(rec["gyro"], dtype=float),
                    mag=np.asarray(rec["mag"], dtype=float) if "mag" in rec else None,
                    lum=float(rec["lum"]),
                ))
            except (KeyError, ValueError, TypeError) as exc:
                raise TraceFormatError(str(exc), lineno) from exc
    return samples


def write_truth(path, truth: GroundTruth) -> None:
    with open(path, "w") as f:
        for k in range(len(truth)):
            rec = {
                "t": float(truth.t[k]),
                "pose": [float(v) for v in truth.poses[k]],
                "contact": bool(truth.contact[k]),
            }
            f.write(json.dumps(rec) + "\n")


def read_truth(path) -> GroundTruth:
    t, poses, contact = [], [], []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                t.append(float(rec["t"]))
                poses.append([float(v) for v in rec["pose"]])
                contact.append(bool(rec["contact"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise TraceFormatError(str(exc), lineno) from exc
    if not t:
        raise TraceFormatError("empty truth file", 1)
    n = len(t)
    return GroundTruth(
        t=np.asarray(t),
        poses=np.asarray(poses),
        contact=np.asarray(contact, dtype=bool),
        world_acc=np.zeros((n - 1 if n > 1 else 1, 2)),
        turn_rate=np.zeros(n - 1 if n > 1 else 1),
        lum_low=np.asarray(contact, dtype=bool),
        spans=[],
    )


# ---------------------------------------------------------------------------
# scenario (de)serialization


def scenario_from_dict(data: dict) -> Scenario:
    """Parse and validate a scenario JSON document."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object", "scenario")
    if "segments" not in data:
        raise ScenarioError("missing required field 'segments'", "segments")
    raw_segments = data["segments"]
    if not isinstance(raw_segments, list) or not raw_segments:
        raise ScenarioError("'segments' must be a non-empty list", "segments")
    segments = []
    for i, rec in enumerate(raw_segments):
        try:
            target = rec.get("target")
            segments.append(Segment(
                kind=rec["kind"],
                duration=float(rec["duration"]),
                target=Pose2D(*target) if target is not None else None,
            ))
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"segment {i}: {exc}", "segments") from exc

    kwargs = {"segments": tuple(segments)}
    simple = {
        "seed": int, "rate": float, "capture_height_mm": float,
        "focal_length_px": float, "noise_scale": float,
        "mag_decimation": int, "contact_lead_samples": int,
    }
    for key, cast in simple.items():
        if key in data:
            try:
                kwargs[key] = cast(data[key])
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"bad value for {key!r}", key) from exc
    if "geometry" in data:
        try:
            kwargs["geometry"] = DeviceGeometry(**data["geometry"])
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad geometry: {exc}", "geometry") from exc
    if "map" in data:
        kwargs["map_spec"] = dict(data["map"])
    if "noise" in data:
        try:
            kwargs["noise"] = NoiseParams(**data["noise"])
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad noise params: {exc}", "noise") from exc
    if "bias_true" in data:
        bias = data["bias_true"]
        if not isinstance(bias, (list, tuple)) or len(bias) != 3:
            raise ScenarioError("bias_true must have 3 entries", "bias_true")
        kwargs["bias_true"] = tuple(float(v) for v in bias)
    if "start_pose" in data:
        kwargs["start_pose"] = Pose2D(*data["start_pose"])
    if data.get("magnet") is not None:
        m = data["magnet"]
        try:
            kwargs["magnet"] = MagnetSetup(
                model=MagnetModel(
                    position_mm=m["position_mm"], moment=m["moment"]
                ),
                ambient_uT=m.get("ambient_uT", (0.0, 0.0, 0.0)),
                sensor_height_mm=float(m.get("sensor_height_mm", 5.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad magnet spec: {exc}", "magnet") from exc
    return Scenario(**kwargs)


def scenario_to_dict(scenario: Scenario) -> dict:
    out = {
        "seed": scenario.seed,
        "rate": scenario.rate,
        "geometry": {
            "body_w": scenario.geometry.body_w,
            "body_h": scenario.geometry.body_h,
            "screen_offset_x": scenario.geometry.screen_offset_x,
            "screen_offset_y": scenario.geometry.screen_offset_y,
            "screen_w": scenario.geometry.screen_w,
            "screen_h": scenario.geometry.screen_h,
            "screen_px_w": scenario.geometry.screen_px_w,
            "screen_px_h": scenario.geometry.screen_px_h,
        },
        "map": dict(scenario.map_spec),
        "capture_height_mm": scenario.capture_height_mm,
        "focal_length_px": scenario.focal_length_px,
        "noise": {
            "sigma_acc": scenario.noise.sigma_acc,
            "sigma_gyro": scenario.noise.sigma_gyro,
            "sigma_bias_acc_rw": scenario.noise.sigma_bias_acc_rw,
            "sigma_bias_gyro_rw": scenario.noise.sigma_bias_gyro_rw,
            "zupt_sigma_v": scenario.noise.zupt_sigma_v,
            "zaru_sigma_w": scenario.noise.zaru_sigma_w,
            "mag_sigma": scenario.noise.mag_sigma,
        },
        "noise_scale": scenario.noise_scale,
        "bias_true": list(scenario.bias_true),
        "mag_decimation": scenario.mag_decimation,
        "start_pose": [scenario.start_pose.x, scenario.start_pose.y, scenario.start_pose.theta],
        "contact_lead_samples": scenario.contact_lead_samples,
        "segments": [
            {
                "kind": s.kind,
                "duration": s.duration,
                **({"target": [s.target.x, s.target.y, s.target.theta]} if s.target else {}),
            }
            for s in scenario.segments
        ],
    }
    if scenario.magnet is not None:
        out["magnet"] = {
            "position_mm": list(scenario.magnet.model.position_mm),
            "moment": list(scenario.magnet.model.moment),
            "ambient_uT": list(scenario.magnet.ambient_uT),
            "sensor_height_mm": scenario.magnet.sensor_height_mm,
        }
    return out


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}", "scenario") from exc
    return scenario_from_dict(data)

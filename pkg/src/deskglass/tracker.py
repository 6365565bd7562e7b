"""Planar dead-reckoning EKF with bias states, ZUPT/ZARU, and an optional
magnetic-dipole measurement channel.

State vector (8): [p_x, p_y, theta, v_x, v_y, b_ax, b_ay, b_gz] in SI
units (m, rad, m/s, m/s^2, rad/s).  Position and velocity live in the
world frame; accelerometer biases live in the device frame.  While the
device is in planar contact the vertical axis is ignored entirely:
gravity sits along device z by construction and motion reduces to 2D.

Prediction integrates specific force with the midpoint rule
(p' = p + v dt + 1/2 a dt^2), which is exact for piecewise-constant
acceleration and is what makes the desk-scale closed-form oracles sharp.

Zero-velocity (and zero-angular-rate) updates deliberately leave the
position estimate untouched: displacement is halted while stationary, so
the Kalman gain rows for p_x/p_y are zeroed and the covariance is
propagated in Joseph form, which stays consistent for any gain.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2D, normalize_angle
from .motion import ImuSample, StreamError

STATE_DIM = 8
IDX_PX, IDX_PY, IDX_TH, IDX_VX, IDX_VY, IDX_BAX, IDX_BAY, IDX_BGZ = range(8)

MAX_PREDICT_GAP = 0.5  # seconds; larger gaps require a re-anchor

MU0_OVER_4PI = 1e-7  # T*m/A

# Mahalanobis gate: 5-sigma per measurement dimension
GATE_SIGMA = 5.0


class GapError(StreamError):
    """Prediction interval too long; caller must re-anchor or split."""


@dataclass(frozen=True)
class NoiseParams:
    """Filter noise magnitudes (per-sample white noise, random-walk biases,
    pseudo-measurement stds)."""

    sigma_acc: float = 0.05          # m/s^2 per sample
    sigma_gyro: float = 0.005        # rad/s per sample
    sigma_bias_acc_rw: float = 0.001  # m/s^2 / sqrt(s)
    sigma_bias_gyro_rw: float = 0.001  # rad/s / sqrt(s)
    zupt_sigma_v: float = 0.01       # m/s
    zaru_sigma_w: float = 0.001      # rad/s
    mag_sigma: float = 2.0           # uT

    def __post_init__(self):
        if any(
            v <= 0
            for v in (
                self.sigma_acc, self.sigma_gyro, self.sigma_bias_acc_rw,
                self.sigma_bias_gyro_rw, self.zupt_sigma_v,
                self.zaru_sigma_w, self.mag_sigma,
            )
        ):
            raise ValueError("all noise parameters must be strictly positive")


@dataclass(frozen=True)
class AnchorStds:
    """Per-state standard deviations used to seed the covariance at anchor.

    Bias priors default to calibrated-device residuals; runs that stress
    large sensor biases should widen them to match the device under test.
    """

    pos_m: float = 0.0005
    theta_rad: float = 0.002
    vel_ms: float = 0.01
    bias_acc: float = 0.002
    bias_gyro: float = 0.002

    def diagonal(self) -> np.ndarray:
        s = np.array([
            self.pos_m, self.pos_m, self.theta_rad,
            self.vel_ms, self.vel_ms,
            self.bias_acc, self.bias_acc, self.bias_gyro,
        ])
        return s * s


@dataclass(frozen=True)
class MagnetModel:
    """Dipole magnet: position in world mm (z up from the surface),
    moment in A*m^2."""

    position_mm: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position_mm, dtype=float).reshape(3)
        mom = np.asarray(self.moment, dtype=float).reshape(3)
        if np.linalg.norm(mom) <= 0:
            raise ValueError("magnet moment must be non-zero")
        object.__setattr__(self, "position_mm", pos)
        object.__setattr__(self, "moment", mom)


@dataclass(eq=False)
class FilterState:
    """EKF mean, covariance, and timestamp."""

    mean: np.ndarray
    cov: np.ndarray
    t: float

    def copy(self) -> "FilterState":
        return FilterState(self.mean.copy(), self.cov.copy(), self.t)


def anchor(placement: Pose2D, t: float, stds: AnchorStds = AnchorStds()) -> FilterState:
    """Fresh filter state at a known placement pose (mm in, meters stored)."""
    if any(
        v <= 0
        for v in (stds.pos_m, stds.theta_rad, stds.vel_ms, stds.bias_acc, stds.bias_gyro)
    ):
        raise ValueError("anchor standard deviations must be strictly positive")
    mean = np.zeros(STATE_DIM)
    mean[IDX_PX] = placement.x * 1e-3
    mean[IDX_PY] = placement.y * 1e-3
    mean[IDX_TH] = placement.theta
    cov = np.diag(stds.diagonal())
    return FilterState(mean=mean, cov=cov, t=float(t))


def predict_mean(
    mean: np.ndarray, acc_xy, gyro_z: float, dt: float, freeze_position: bool = False
) -> np.ndarray:
    """Mean propagation only (shared by predict and the Jacobian tests)."""
    out = mean.copy()
    th = mean[IDX_TH]
    c, s = math.cos(th), math.sin(th)
    adx = acc_xy[0] - mean[IDX_BAX]
    ady = acc_xy[1] - mean[IDX_BAY]
    w = gyro_z - mean[IDX_BGZ]
    awx = c * adx - s * ady
    awy = s * adx + c * ady
    if not freeze_position:
        out[IDX_PX] = mean[IDX_PX] + mean[IDX_VX] * dt + 0.5 * awx * dt * dt
        out[IDX_PY] = mean[IDX_PY] + mean[IDX_VY] * dt + 0.5 * awy * dt * dt
    out[IDX_TH] = normalize_angle(th + w * dt)
    out[IDX_VX] = mean[IDX_VX] + awx * dt
    out[IDX_VY] = mean[IDX_VY] + awy * dt
    return out


_EYE = np.eye(STATE_DIM)


def prediction_jacobian(
    mean: np.ndarray, acc_xy, dt: float, freeze_position: bool = False
) -> np.ndarray:
    """Analytic state-transition Jacobian of predict_mean."""
    th = mean[IDX_TH]
    c, s = math.cos(th), math.sin(th)
    adx = acc_xy[0] - mean[IDX_BAX]
    ady = acc_xy[1] - mean[IDX_BAY]
    # d a_world / d theta = R'(theta) a_dev
    dax = -s * adx - c * ady
    day = c * adx - s * ady
    h = 0.5 * dt * dt
    F = _EYE.copy()
    if not freeze_position:
        F[IDX_PX, IDX_VX] = dt
        F[IDX_PY, IDX_VY] = dt
        F[IDX_PX, IDX_TH] = h * dax
        F[IDX_PY, IDX_TH] = h * day
        # d a_world / d b_a = -R(theta)
        F[IDX_PX, IDX_BAX] = -h * c
        F[IDX_PX, IDX_BAY] = h * s
        F[IDX_PY, IDX_BAX] = -h * s
        F[IDX_PY, IDX_BAY] = -h * c
    F[IDX_VX, IDX_TH] = dt * dax
    F[IDX_VY, IDX_TH] = dt * day
    F[IDX_VX, IDX_BAX] = -dt * c
    F[IDX_VX, IDX_BAY] = dt * s
    F[IDX_VY, IDX_BAX] = -dt * s
    F[IDX_VY, IDX_BAY] = -dt * c
    F[IDX_TH, IDX_BGZ] = -dt
    return F


def process_noise(noise: NoiseParams, dt: float, freeze_position: bool = False) -> np.ndarray:
    """Discrete process noise for one prediction step.

    Accelerometer/gyro white noise (per sample) maps through the midpoint
    integrator; the rotation cancels because R R^T = I.  Bias states get
    random-walk increments sized by dt.
    """
    Q = np.zeros((STATE_DIM, STATE_DIM))
    sa2 = noise.sigma_acc * noise.sigma_acc
    sg2 = noise.sigma_gyro * noise.sigma_gyro
    hp = 0.5 * dt * dt
    if not freeze_position:
        Q[IDX_PX, IDX_PX] = Q[IDX_PY, IDX_PY] = hp * hp * sa2
        Q[IDX_PX, IDX_VX] = Q[IDX_VX, IDX_PX] = hp * dt * sa2
        Q[IDX_PY, IDX_VY] = Q[IDX_VY, IDX_PY] = hp * dt * sa2
    Q[IDX_VX, IDX_VX] = Q[IDX_VY, IDX_VY] = dt * dt * sa2
    Q[IDX_TH, IDX_TH] = dt * dt * sg2
    Q[IDX_BAX, IDX_BAX] = Q[IDX_BAY, IDX_BAY] = noise.sigma_bias_acc_rw ** 2 * dt
    Q[IDX_BGZ, IDX_BGZ] = noise.sigma_bias_gyro_rw ** 2 * dt
    return Q


def predict(
    state: FilterState,
    sample: ImuSample,
    noise: NoiseParams,
    freeze_position: bool = False,
) -> FilterState:
    """Dead-reckoning prediction to sample.t using planar specific force.

    The sample's acc/gyro are treated as constant over (state.t, sample.t].
    acc_z is ignored: in contact mode gravity is perpendicular to the
    surface by construction.  With freeze_position the displacement states
    are held fixed (mean and covariance): the halted-displacement behavior
    used while the device is detected stationary.
    """
    dt = sample.t - state.t
    if dt <= 0:
        raise StreamError(f"non-increasing timestamp {sample.t} after {state.t}")
    if dt > MAX_PREDICT_GAP:
        raise GapError(f"prediction gap {dt:.3f} s exceeds {MAX_PREDICT_GAP} s")
    mean = predict_mean(state.mean, sample.acc, float(sample.gyro[2]), dt, freeze_position)
    F = prediction_jacobian(state.mean, sample.acc, dt, freeze_position)
    cov = F @ state.cov @ F.T + process_noise(noise, dt, freeze_position)
    cov = 0.5 * (cov + cov.T)
    return FilterState(mean=mean, cov=cov, t=sample.t)


def _joseph_update(state, H, innovation, R, mask_position):
    """Kalman update in Joseph form; optionally zeroes position gain rows.

    Returns the updated state, or None when the innovation fails the
    5-sigma-per-dimension Mahalanobis gate.
    """
    P = state.cov
    S = H @ P @ H.T + R
    nu = np.atleast_1d(innovation)
    m = nu.shape[0]
    maha = float(nu @ np.linalg.solve(S, nu))
    if maha > GATE_SIGMA * GATE_SIGMA * m:
        return None
    K = np.linalg.solve(S.T, (P @ H.T).T).T
    if mask_position:
        K[IDX_PX, :] = 0.0
        K[IDX_PY, :] = 0.0
    mean = state.mean + K @ nu
    mean[IDX_TH] = normalize_angle(mean[IDX_TH])
    IKH = np.eye(STATE_DIM) - K @ H
    cov = IKH @ P @ IKH.T + K @ R @ K.T
    cov = 0.5 * (cov + cov.T)
    return FilterState(mean=mean, cov=cov, t=state.t)


def zupt_update(state: FilterState, noise: NoiseParams, gyro_z=None) -> FilterState:
    """Zero-velocity pseudo-measurement, plus a zero-angular-rate update on
    the gyro bias when the triggering sample's gyro_z is supplied.

    Position rows of the gain are zeroed (displacement halted while
    stationary), so the position mean is bit-identical across the update.
    Gated innovations leave the state unchanged.  The 2x2 / scalar algebra
    is written out explicitly: this runs once per sample while stationary.
    """
    P = state.cov
    r = noise.zupt_sigma_v ** 2
    a = P[IDX_VX, IDX_VX] + r
    b = P[IDX_VX, IDX_VY]
    d = P[IDX_VY, IDX_VY] + r
    det = a * d - b * b
    nu0 = -state.mean[IDX_VX]
    nu1 = -state.mean[IDX_VY]
    maha = (d * nu0 * nu0 - 2.0 * b * nu0 * nu1 + a * nu1 * nu1) / det
    out = state
    if maha <= GATE_SIGMA * GATE_SIGMA * 2:
        pv0 = P[:, IDX_VX]
        pv1 = P[:, IDX_VY]
        k0 = (pv0 * d - pv1 * b) / det
        k1 = (pv1 * a - pv0 * b) / det
        k0[IDX_PX] = k0[IDX_PY] = 0.0  # displacement halted
        k1[IDX_PX] = k1[IDX_PY] = 0.0
        mean = state.mean + k0 * nu0 + k1 * nu1
        mean[IDX_TH] = normalize_angle(mean[IDX_TH])
        # Joseph form expanded: (I - KH) differs from I only in the vx/vy
        # columns, so A P A^T reduces to four rank-1 corrections
        AP = P - np.outer(k0, P[IDX_VX]) - np.outer(k1, P[IDX_VY])
        cov = (
            AP
            - np.outer(AP[:, IDX_VX], k0)
            - np.outer(AP[:, IDX_VY], k1)
            + r * (np.outer(k0, k0) + np.outer(k1, k1))
        )
        out = FilterState(mean, 0.5 * (cov + cov.T), state.t)
    if gyro_z is not None:
        P = out.cov
        rw = noise.zaru_sigma_w ** 2
        s = P[IDX_BGZ, IDX_BGZ] + rw
        nu = out.mean[IDX_BGZ] - float(gyro_z)
        if nu * nu / s <= GATE_SIGMA * GATE_SIGMA:
            k = -P[:, IDX_BGZ] / s
            k[IDX_PX] = k[IDX_PY] = 0.0
            mean = out.mean + k * nu
            mean[IDX_TH] = normalize_angle(mean[IDX_TH])
            # A = I - KH = I + outer(k, e_bgz)
            AP = P + np.outer(k, P[IDX_BGZ])
            cov = AP + np.outer(AP[:, IDX_BGZ], k) + rw * np.outer(k, k)
            out = FilterState(mean, 0.5 * (cov + cov.T), out.t)
    return out


def dipole_field(magnet: MagnetModel, at_mm) -> np.ndarray:
    """Dipole field in uT at a world-frame point given in mm.

    B = (mu0 / 4 pi) * (3 r_hat (m . r_hat) - m) / |r|^3
    """
    r = (np.asarray(at_mm, dtype=float) - magnet.position_mm) * 1e-3  # meters
    dist = float(np.linalg.norm(r))
    if dist < 5e-3:
        raise ValueError(f"sensor within 5 mm of magnet ({dist * 1e3:.2f} mm)")
    r_hat = r / dist
    m = magnet.moment
    b_tesla = MU0_OVER_4PI * (3.0 * r_hat * float(m @ r_hat) - m) / dist ** 3
    return b_tesla * 1e6


def predicted_mag(mean: np.ndarray, magnet: MagnetModel, ambient_uT, sensor_height_mm: float) -> np.ndarray:
    """Expected magnetometer reading (device frame) for a filter mean."""
    at = np.array([mean[IDX_PX] * 1e3, mean[IDX_PY] * 1e3, sensor_height_mm])
    world = np.asarray(ambient_uT, dtype=float) + dipole_field(magnet, at)
    th = mean[IDX_TH]
    c, s = math.cos(th), math.sin(th)
    # R(theta)^T acts on the horizontal components
    return np.array([
        c * world[0] + s * world[1],
        -s * world[0] + c * world[1],
        world[2],
    ])


# central-difference steps: 1 mm on position, 1 mrad on heading
_MAG_STEPS = {IDX_PX: 1e-3, IDX_PY: 1e-3, IDX_TH: 1e-3}


def mag_update(
    state: FilterState,
    sample: ImuSample,
    magnet: MagnetModel,
    ambient_uT,
    noise: NoiseParams,
    sensor_height_mm: float = 5.0,
):
    """Magnetometer update against ambient + dipole field.

    Returns (state, status) with status in {"applied", "gated", "skipped"}.
    The measurement Jacobian is numeric (central differences on p_x, p_y,
    theta); innovations beyond the 5-sigma gate are skipped.
    """
    if sample.mag is None:
        return state, "skipped"
    h0 = predicted_mag(state.mean, magnet, ambient_uT, sensor_height_mm)
    nu = np.asarray(sample.mag, dtype=float) - h0
    H = np.zeros((3, STATE_DIM))
    for idx, step in _MAG_STEPS.items():
        plus = state.mean.copy()
        minus = state.mean.copy()
        plus[idx] += step
        minus[idx] -= step
        hp = predicted_mag(plus, magnet, ambient_uT, sensor_height_mm)
        hm = predicted_mag(minus, magnet, ambient_uT, sensor_height_mm)
        H[:, idx] = (hp - hm) / (2.0 * step)
    R = np.eye(3) * noise.mag_sigma ** 2
    updated = _joseph_update(state, H, nu, R, mask_position=False)
    if updated is None:
        return state, "gated"
    return updated, "applied"


def estimate_pose(state: FilterState) -> Pose2D:
    """Current pose estimate in world mm / rad."""
    return Pose2D(
        state.mean[IDX_PX] * 1e3,
        state.mean[IDX_PY] * 1e3,
        state.mean[IDX_TH],
    )

"""Constant-velocity Kalman filtering for 2D and 3D box tracking.

2D tracks use an 8-dim state (center x, center y, aspect ratio w/h, height,
plus their per-frame velocities) with noise scales proportional to the box
height. 3D tracks use a 10-dim state (x, y, z, yaw, l, w, h plus world-frame
center velocities) with fixed metric noise scales. Measurement uncertainty can
be scaled by detection confidence: R_hat = alpha * (1 - score)^2 * R, floored
elementwise to keep the innovation covariance invertible at score 1.

The filter math lives in batched kernels (one association step updates every
matched track at once); the single-state operations are thin wrappers over
batches of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Box2D, Box3D, _unchecked_box2d

STATE_DIM_2D = 8
OBS_DIM_2D = 4
STATE_DIM_3D = 10
OBS_DIM_3D = 7

# Aspect-ratio channel scales for the 2D filter (not height-proportional).
_ASPECT_INIT_STD = 1e-2
_ASPECT_Q_STD = 1e-2
_ASPECT_R_STD = 1e-1
_ASPECT_VEL_INIT_STD = 1e-5
_ASPECT_VEL_Q_STD = 1e-5

_THETA_INDEX = 3  # yaw position in the 3D state and measurement vectors


class MissingVelocityError(ValueError):
    """Backward prediction was requested for a detection without a velocity."""


def _transition_2d() -> np.ndarray:
    f = np.eye(STATE_DIM_2D)
    for k in range(4):
        f[k, 4 + k] = 1.0
    return f


def _transition_3d() -> np.ndarray:
    # Only the center moves; yaw and size carry no velocity in the state.
    f = np.eye(STATE_DIM_3D)
    f[0, 7] = f[1, 8] = f[2, 9] = 1.0
    return f


_F_2D = _transition_2d()
_F_3D = _transition_3d()


@dataclass(frozen=True)
class NoiseConfig:
    """Process/measurement noise scales and the confidence-adaptive knobs.

    pos_weight / vel_weight scale the height-proportional 2D noise; the *_std
    fields are fixed 3D scales in meters (radians for yaw, meters-per-frame
    for velocity). alpha controls the magnitude of the confidence-scaled
    measurement uncertainty; min_noise_floor keeps it positive at score 1.
    """

    pos_weight: float = 1.0 / 20.0
    vel_weight: float = 1.0 / 160.0
    pos_std: float = 0.5
    yaw_std: float = 0.1
    size_std: float = 0.3
    vel_std: float = 0.5
    alpha: float = 10.0
    adaptive: bool = True
    min_noise_floor: float = 1e-4

    def __post_init__(self):
        for name in ("pos_weight", "vel_weight", "pos_std", "yaw_std", "size_std",
                     "vel_std", "min_noise_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"NoiseConfig.{name} must be positive")
        if self.alpha < 0:
            raise ValueError("NoiseConfig.alpha must be non-negative")


@dataclass(frozen=True, eq=False)
class KalmanState:
    """Gaussian track state: mean vector plus symmetric PSD covariance.

    Treated as a value object; predict/update return new states.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.shape not in ((STATE_DIM_2D,), (STATE_DIM_3D,)):
            raise ValueError(f"unsupported state dimension {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match state")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def is_3d(self) -> bool:
        return self.mean.size == STATE_DIM_3D


def _measurement_2d(box: Box2D) -> np.ndarray:
    if box.width <= 0 or box.height <= 0:
        raise ValueError("2D Kalman measurements require a positive-area box")
    cx, cy = box.center
    return np.array([cx, cy, box.width / box.height, box.height])


def _measurement_3d(box: Box3D) -> np.ndarray:
    return np.array([box.x, box.y, box.z, box.theta, box.l, box.w, box.h])


def _measurement_stack(measurements, is_3d: bool) -> np.ndarray:
    """Measurement vectors as one (K, obs_dim) array."""
    if is_3d:
        try:
            return np.array(
                [(b.x, b.y, b.z, b.theta, b.l, b.w, b.h) for b in measurements]
            )
        except AttributeError:
            raise ValueError("measurement dimensionality does not match the states") from None
    try:
        corners = np.array([(b.x1, b.y1, b.x2, b.y2) for b in measurements])
    except AttributeError:
        raise ValueError("measurement dimensionality does not match the states") from None
    w = corners[:, 2] - corners[:, 0]
    h = corners[:, 3] - corners[:, 1]
    if np.any(w <= 0) or np.any(h <= 0):
        raise ValueError("2D Kalman measurements require a positive-area box")
    return np.column_stack(
        [(corners[:, 0] + corners[:, 2]) / 2.0, (corners[:, 1] + corners[:, 3]) / 2.0,
         w / h, h]
    )


def state_to_box(state: KalmanState) -> Box2D | Box3D:
    """Current box estimate of a state; degenerate sizes are clamped tiny."""
    if state.is_3d:
        x, y, z, theta, l, w, h = state.mean[:7].tolist()
        return Box3D(x, y, z, theta,
                     l if l > 1e-6 else 1e-6,
                     w if w > 1e-6 else 1e-6,
                     h if h > 1e-6 else 1e-6)
    cx, cy, aspect, height = state.mean[:4].tolist()
    if height < 1e-6:
        height = 1e-6
    width = aspect * height
    if width < 1e-6:
        width = 1e-6
    return _unchecked_box2d(cx - width / 2.0, cy - height / 2.0,
                            cx + width / 2.0, cy + height / 2.0)


def _q_diags(means: np.ndarray, noise: NoiseConfig, is_3d: bool) -> np.ndarray:
    """Per-track process-noise variances, shape (K, state_dim)."""
    k = means.shape[0]
    if is_3d:
        stds = np.array([noise.pos_std] * 3 + [noise.yaw_std] + [noise.size_std] * 3
                        + [noise.vel_std] * 3)
        return np.broadcast_to(stds**2, (k, STATE_DIM_3D)).copy()
    heights = means[:, 3]
    stds = np.empty((k, STATE_DIM_2D))
    stds[:, 0] = stds[:, 1] = stds[:, 3] = noise.pos_weight * heights
    stds[:, 2] = _ASPECT_Q_STD
    stds[:, 4] = stds[:, 5] = stds[:, 7] = noise.vel_weight * heights
    stds[:, 6] = _ASPECT_VEL_Q_STD
    return stds**2


def _r_diags(zs: np.ndarray, noise: NoiseConfig, is_3d: bool) -> np.ndarray:
    """Per-measurement base noise variances, shape (K, obs_dim)."""
    k = zs.shape[0]
    if is_3d:
        stds = np.array([noise.pos_std] * 3 + [noise.yaw_std] + [noise.size_std] * 3)
        return np.broadcast_to(stds**2, (k, OBS_DIM_3D)).copy()
    heights = zs[:, 3]
    stds = np.empty((k, OBS_DIM_2D))
    stds[:, 0] = stds[:, 1] = stds[:, 3] = noise.pos_weight * heights
    stds[:, 2] = _ASPECT_R_STD
    return stds**2


def _predict_batch(means, covs, noise: NoiseConfig, is_3d: bool):
    f = _F_3D if is_3d else _F_2D
    new_means = means @ f.T
    new_covs = np.matmul(f, np.matmul(covs, f.T))
    dim = means.shape[1]
    idx = np.arange(dim)
    new_covs[:, idx, idx] += _q_diags(means, noise, is_3d)
    new_covs = (new_covs + new_covs.transpose(0, 2, 1)) / 2.0
    return new_means, new_covs


def _update_batch(means, covs, zs, scores, noise: NoiseConfig, is_3d: bool):
    obs = OBS_DIM_3D if is_3d else OBS_DIM_2D
    dim = means.shape[1]
    k = means.shape[0]

    r = _r_diags(zs, noise, is_3d)
    if noise.adaptive:
        r = noise.alpha * (1.0 - scores[:, None]) ** 2 * r
    r = np.maximum(r, noise.min_noise_floor)

    # The observation matrix selects the leading block, so projections are slices.
    innovation = zs - means[:, :obs]
    if is_3d:
        theta = innovation[:, _THETA_INDEX]
        theta = np.arctan2(np.sin(theta), np.cos(theta))
        theta[theta <= -math.pi] += math.tau
        innovation[:, _THETA_INDEX] = theta
    s = covs[:, :obs, :obs].copy()
    oidx = np.arange(obs)
    s[:, oidx, oidx] += r
    pht = covs[:, :, :obs]
    gain = np.linalg.solve(s, pht.transpose(0, 2, 1)).transpose(0, 2, 1)

    new_means = means + np.matmul(gain, innovation[:, :, None])[:, :, 0]
    if is_3d:
        theta = new_means[:, _THETA_INDEX]
        theta = np.arctan2(np.sin(theta), np.cos(theta))
        theta[theta <= -math.pi] += math.tau
        new_means[:, _THETA_INDEX] = theta
    ikh = np.broadcast_to(np.eye(dim), (k, dim, dim)).copy()
    ikh[:, :, :obs] -= gain
    new_covs = np.matmul(ikh, np.matmul(covs, ikh.transpose(0, 2, 1)))
    new_covs += np.matmul(gain * r[:, None, :], gain.transpose(0, 2, 1))
    new_covs = (new_covs + new_covs.transpose(0, 2, 1)) / 2.0
    return new_means, new_covs


def _stack(states: Sequence[KalmanState]):
    means = np.stack([s.mean for s in states])
    covs = np.stack([s.covariance for s in states])
    return means, covs


def _new_state(mean: np.ndarray, cov: np.ndarray) -> KalmanState:
    # Constructor bypass for batch outputs whose shapes are known-good.
    state = object.__new__(KalmanState)
    object.__setattr__(state, "mean", mean)
    object.__setattr__(state, "covariance", cov)
    return state


def states_from_arrays(means: np.ndarray, covs: np.ndarray) -> list[KalmanState]:
    """View batch-layout means/covariances as per-track states."""
    return [_new_state(m, c) for m, c in zip(means, covs)]


def kf_init(measurement: Box2D | Box3D, noise: NoiseConfig) -> KalmanState:
    """Start a track from a detection: observed block set, velocities zero."""
    if isinstance(measurement, Box3D):
        z = _measurement_3d(measurement)
        mean = np.concatenate([z, np.zeros(3)])
        obs_stds = np.array([noise.pos_std] * 3 + [noise.yaw_std] + [noise.size_std] * 3)
        stds = np.concatenate([2.0 * obs_stds, [10.0 * noise.vel_std] * 3])
    else:
        z = _measurement_2d(measurement)
        mean = np.concatenate([z, np.zeros(4)])
        p = 2.0 * noise.pos_weight * z[3]
        v = 10.0 * noise.vel_weight * z[3]
        stds = np.array([p, p, _ASPECT_INIT_STD, p, v, v, _ASPECT_VEL_INIT_STD, v])
    return KalmanState(mean, np.diag(stds**2))


def predict_arrays(
    means: np.ndarray, covs: np.ndarray, noise: NoiseConfig, is_3d: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Array-level constant-velocity predict; shapes (K, D) and (K, D, D)."""
    return _predict_batch(means, covs, noise, is_3d)


def inflate_arrays(
    means: np.ndarray, covs: np.ndarray, noise: NoiseConfig, is_3d: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Array-level random-walk step: means copied through, covariances grown."""
    covs = covs.copy()
    dim = means.shape[1]
    idx = np.arange(dim)
    covs[:, idx, idx] += _q_diags(means, noise, is_3d)
    return means.copy(), covs


def update_arrays(
    means: np.ndarray,
    covs: np.ndarray,
    measurements: Sequence[Box2D | Box3D],
    scores: Sequence[float],
    noise: NoiseConfig,
    is_3d: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Array-level measurement update; see kf_update for the contract."""
    zs = _measurement_stack(measurements, is_3d)
    score_arr = np.asarray(scores, dtype=float)
    if np.any(score_arr < 0.0) or np.any(score_arr > 1.0):
        raise ValueError("scores must be in [0, 1]")
    return _update_batch(means, covs, zs, score_arr, noise, is_3d)


def predict_states(states: Sequence[KalmanState], noise: NoiseConfig) -> list[KalmanState]:
    """Constant-velocity predict for a batch of same-dimension states."""
    if not states:
        return []
    means, covs = _stack(states)
    new_means, new_covs = _predict_batch(means, covs, noise, states[0].is_3d)
    return states_from_arrays(new_means, new_covs)


def inflate_states(states: Sequence[KalmanState], noise: NoiseConfig) -> list[KalmanState]:
    """Random-walk step for motionless prediction: means held, covariances grow."""
    if not states:
        return []
    means, covs = _stack(states)
    new_means, new_covs = inflate_arrays(means, covs, noise, states[0].is_3d)
    return states_from_arrays(new_means, new_covs)


def update_states(
    states: Sequence[KalmanState],
    measurements: Sequence[Box2D | Box3D],
    scores: Sequence[float],
    noise: NoiseConfig,
) -> list[KalmanState]:
    """Batched measurement update; see kf_update for the single-state contract."""
    if not states:
        return []
    means, covs = _stack(states)
    new_means, new_covs = update_arrays(
        means, covs, measurements, scores, noise, states[0].is_3d
    )
    return states_from_arrays(new_means, new_covs)


def kf_predict(state: KalmanState, noise: NoiseConfig) -> KalmanState:
    """One constant-velocity step: positions advance by velocities, covariance grows."""
    return predict_states([state], noise)[0]


def kf_inflate(state: KalmanState, noise: NoiseConfig) -> KalmanState:
    """Random-walk step used when no motion model applies."""
    return inflate_states([state], noise)[0]


def kf_update(
    state: KalmanState, measurement: Box2D | Box3D, score: float, noise: NoiseConfig
) -> KalmanState:
    """Kalman measurement update with confidence-scaled measurement noise.

    When adaptive scaling is enabled the base measurement covariance R becomes
    alpha * (1 - score)^2 * R, floored elementwise at min_noise_floor. The yaw
    innovation (3D) is wrapped to (-pi, pi] before applying the gain; the
    posterior covariance uses the Joseph form to stay PSD.
    """
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score must be in [0, 1], got {score}")
    if state.is_3d != isinstance(measurement, Box3D):
        raise ValueError("measurement dimensionality does not match the state")
    return update_states([state], [measurement], [score], noise)[0]


def backward_predict(box: Box3D, velocity: tuple[float, float] | None) -> Box3D:
    """Shift a detection back one frame using its detected planar velocity.

    Only the x/y center moves; z, yaw, and dimensions are kept. Raises
    MissingVelocityError when no velocity is available so callers can fall
    back to the raw box.
    """
    if velocity is None:
        raise MissingVelocityError("detection carries no planar velocity")
    vx, vy = velocity
    if not (math.isfinite(vx) and math.isfinite(vy)):
        raise MissingVelocityError(f"detection velocity is not finite: {velocity!r}")
    return Box3D(box.x - vx, box.y - vy, box.z, box.theta, box.l, box.w, box.h)

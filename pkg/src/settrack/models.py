"""Domain types, model parameters, single-object motion and detection densities.

Object states are rows ``(x, y, vx, vy)`` and detections are rows
``(x, y, c)``.  Hot paths work on ``(k, 4)`` / ``(m, 3)`` float arrays; the
named tuples below exist for readable single-item calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple, Sequence

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class ObjectState(NamedTuple):
    x: float
    y: float
    vx: float
    vy: float


class Detection(NamedTuple):
    x: float
    y: float
    c: float


@dataclass
class ModelParams:
    """Tracker and world-model parameters.

    Defaults are the PETS2009 column of the evaluation setup: no motion
    births, 0.02/s deaths, 6 false and 2 missed detections per second at
    7 Hz, isotropic 0.5 m^2 observation noise, 128 particles.
    """

    birth_rate: float = 0.0
    death_rate: float = 0.02
    dash_power_sigma: float = 1.0
    false_rate: float = 6.0
    miss_rate: float = 2.0
    dt: float = 0.14
    obs_cov: np.ndarray = field(default_factory=lambda: 0.5 * np.eye(2))
    assign_threshold: float = 0.1
    fm_threshold: float = 0.001
    gamma_alpha0: float = 2.0
    gamma_beta0: float = 1.0
    n_particles: int = 128
    max_em_steps: int = 10
    report_conf: float = 0.4
    bbox_area_min: float = 0.5
    bbox_area_max: float = 2.5
    arena: tuple[float, float, float, float] = (0.0, 0.0, 19.0, 15.8)
    # not part of the published parameter table
    default_confidence: float = 0.5
    kde_prior_weight: float = 1.0
    assign_cap: int = 10_000
    # measure clutter density in the false/missing priority per arena area, so the
    # probability threshold does not depend on the length unit
    fm_prior_per_arena: bool = True

    def __post_init__(self) -> None:
        cov = np.array(self.obs_cov, dtype=float)
        # a scalar means an isotropic covariance
        self.obs_cov = cov * np.eye(2) if cov.size == 1 else cov.reshape(2, 2)
        self.arena = tuple(float(a) for a in self.arena)
        self.n_particles = int(self.n_particles)
        self.max_em_steps = int(self.max_em_steps)
        self.validate()
        self._cov_inv = np.linalg.inv(self.obs_cov)
        self._cov_chol = np.linalg.cholesky(self.obs_cov)
        self._log_gauss_norm = -LOG_2PI - 0.5 * math.log(np.linalg.det(self.obs_cov))

    def validate(self) -> None:
        for name in ("birth_rate", "death_rate", "dash_power_sigma", "false_rate", "miss_rate"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        cov = self.obs_cov
        if not np.allclose(cov, cov.T) or np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ValueError("obs_cov must be symmetric positive-definite")
        if not 0 <= self.assign_threshold <= 1:
            raise ValueError("assign_threshold must lie in [0, 1]")
        if not self.fm_threshold >= 0:
            raise ValueError("fm_threshold must be >= 0")
        if not (self.gamma_alpha0 > 0 and self.gamma_beta0 > 0):
            raise ValueError("Gamma prior parameters must be > 0")
        if self.n_particles < 1 or self.max_em_steps < 1:
            raise ValueError("n_particles and max_em_steps must be >= 1")
        if not 0 <= self.report_conf <= 1:
            raise ValueError("report_conf must lie in [0, 1]")
        if not self.bbox_area_min < self.bbox_area_max:
            raise ValueError("bbox_area_min must be < bbox_area_max")
        x0, y0, x1, y1 = self.arena
        if not (x1 > x0 and y1 > y0):
            raise ValueError("arena must have positive area")
        if not 0 <= self.default_confidence <= 1:
            raise ValueError("default_confidence must lie in [0, 1]")
        if self.kde_prior_weight < 0:
            raise ValueError("kde_prior_weight must be >= 0")

    @property
    def arena_area(self) -> float:
        x0, y0, x1, y1 = self.arena
        return (x1 - x0) * (y1 - y0)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def as_states(states) -> np.ndarray:
    a = np.asarray(states, dtype=float)
    if a.size == 0:
        return np.zeros((0, 4))
    return a.reshape(-1, 4)


def as_detections(dets) -> np.ndarray:
    a = np.asarray(dets, dtype=float)
    if a.size == 0:
        return np.zeros((0, 3))
    return a.reshape(-1, 3)


def in_arena(xy: np.ndarray, arena: Sequence[float]) -> np.ndarray:
    x0, y0, x1, y1 = arena
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    return (xy[:, 0] >= x0) & (xy[:, 0] <= x1) & (xy[:, 1] >= y0) & (xy[:, 1] <= y1)


def sample_accel(n: int, sigma_p: float, rng: np.random.Generator) -> np.ndarray:
    """Random dash accelerations ``(p cos th, p sin th)``, shape ``(n, 2)``."""
    p = rng.normal(0.0, sigma_p, size=n) if sigma_p > 0 else np.zeros(n)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return np.column_stack((p * np.cos(theta), p * np.sin(theta)))


def advance(states: np.ndarray, accel: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty_like(states)
    out[:, 0:2] = states[:, 0:2] + states[:, 2:4] * dt + 0.5 * accel * dt * dt
    out[:, 2:4] = states[:, 2:4] + accel * dt
    return out


def step_states(states: np.ndarray, params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """Move every row of ``states`` one step under the random-acceleration model."""
    states = as_states(states)
    accel = sample_accel(len(states), params.dash_power_sigma, rng)
    return advance(states, accel, params.dt)


def step_object(s, params: ModelParams, rng: np.random.Generator) -> ObjectState:
    return ObjectState(*step_states(np.asarray(s, dtype=float), params, rng)[0])


def log_gauss_xy(det_xy: np.ndarray, obj_xy: np.ndarray, params: ModelParams) -> np.ndarray:
    """Pairwise log N(det | obj, cov); result has shape ``(len(obj), len(det))``."""
    d = det_xy[None, :, :] - obj_xy[:, None, :]
    ci = params._cov_inv
    maha = ci[0, 0] * d[..., 0] ** 2 + 2 * ci[0, 1] * d[..., 0] * d[..., 1] + ci[1, 1] * d[..., 1] ** 2
    return params._log_gauss_norm - 0.5 * maha


def _log2c(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(2.0 * c)


def loglik_matrix(states, dets, params: ModelParams) -> np.ndarray:
    """``L[i, j] = log Pr(det_j | state_i)``; ``-inf`` where the density is zero."""
    states = as_states(states)
    dets = as_detections(dets)
    if len(states) == 0 or len(dets) == 0:
        return np.zeros((len(states), len(dets)))
    return log_gauss_xy(dets[:, :2], states[:, :2], params) + _log2c(dets[:, 2])[None, :]


def log_clutter(dets, params: ModelParams) -> np.ndarray:
    """Per-detection ``log Pr(o | empty)`` with a uniform background over the arena."""
    dets = as_detections(dets)
    with np.errstate(divide="ignore"):
        out = np.log(2.0 * (1.0 - dets[:, 2])) - math.log(params.arena_area)
    out[~in_arena(dets[:, :2], params.arena)] = -np.inf
    return out


def detect_likelihood(o, s, params: ModelParams) -> float:
    return float(np.exp(loglik_matrix(np.asarray(s, float)[None, :4], np.asarray(o, float)[None, :3], params)[0, 0]))


def clutter_likelihood(o, params: ModelParams) -> float:
    return float(np.exp(log_clutter(np.asarray(o, float)[None, :3], params)[0]))


def not_false_probability(c: float) -> float:
    # Beta(2,1) vs Beta(1,2) with equal priors: 2c / (2c + 2(1-c)) = c
    if not 0.0 <= c <= 1.0:
        raise ValueError("confidence must lie in [0, 1]")
    return float(c)

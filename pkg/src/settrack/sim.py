"""Synthetic scenes: birth-death ground truth and noisy detection sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import GroundTruthFrame
from .models import ModelParams, advance, sample_accel


@dataclass
class Scenario:
    params: ModelParams
    frames: list[GroundTruthFrame]
    seed: int | None = None
    detections: list[np.ndarray] = field(default_factory=list)


def _uniform_in_arena(n: int, arena, rng: np.random.Generator) -> np.ndarray:
    x0, y0, x1, y1 = arena
    return np.column_stack((rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)))


def _reflect(states: np.ndarray, arena) -> np.ndarray:
    x0, y0, x1, y1 = arena
    out = states.copy()
    for k, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
        low = out[:, k] < lo
        out[low, k] = 2 * lo - out[low, k]
        out[low, k + 2] = np.abs(out[low, k + 2])
        high = out[:, k] > hi
        out[high, k] = 2 * hi - out[high, k]
        out[high, k + 2] = -np.abs(out[high, k + 2])
    out[:, 0] = np.clip(out[:, 0], x0, x1)
    out[:, 1] = np.clip(out[:, 1], y0, y1)
    return out


def generate_truth(params: ModelParams, n_frames: int, rng: np.random.Generator, *,
                   initial="stationary", birth_speed_std: float = 0.5,
                   reflect: bool = False, seed: int | None = None) -> Scenario:
    """Ground-truth trajectories under the birth-death random-acceleration model.

    ``initial`` is ``"stationary"`` (Poisson(lambda/mu) objects, the
    process's stationary law), ``"empty"``, an integer count, or a ``(k, 4)``
    array of starting states.  Random starts are uniform in the arena with
    ``Normal(0, birth_speed_std^2)`` velocities, as are later births.
    ``reflect`` bounces objects off the arena walls.
    """
    arena = params.arena
    tau = params.dt

    def newborn(n):
        xy = _uniform_in_arena(n, arena, rng)
        return np.column_stack((xy, rng.normal(0.0, birth_speed_std, (n, 2))))

    if isinstance(initial, str):
        if initial == "stationary":
            mean = params.birth_rate / params.death_rate if params.death_rate > 0 else 0.0
            states = newborn(rng.poisson(mean))
        elif initial == "empty":
            states = np.zeros((0, 4))
        else:
            raise ValueError(f"unknown initial population {initial!r}")
    elif np.isscalar(initial):
        states = newborn(int(initial))
    else:
        states = np.asarray(initial, dtype=float).reshape(-1, 4)
    ids = np.arange(len(states))
    next_id = len(states)
    frames = [GroundTruthFrame(0, ids.copy(), states.copy())]
    p_survive = math.exp(-params.death_rate * tau)
    for t in range(1, n_frames):
        keep = rng.random(len(states)) < p_survive
        states, ids = states[keep], ids[keep]
        states = advance(states, sample_accel(len(states), params.dash_power_sigma, rng), tau)
        if reflect:
            states = _reflect(states, arena)
        nb = rng.poisson(params.birth_rate * tau)
        if nb:
            states = np.vstack((states, newborn(nb)))
            ids = np.concatenate((ids, np.arange(next_id, next_id + nb)))
            next_id += nb
        frames.append(GroundTruthFrame(t, ids.copy(), states.copy()))
    return Scenario(params, frames, seed)


def generate_detections(frame: GroundTruthFrame, params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """One detection set ``(m, 3)`` for a ground-truth frame.

    Each object is missed independently with probability ``min(1, xi tau)``,
    so the expected miss count is ``|S| xi tau``.  Detected objects report a
    Gaussian-perturbed position with ``Beta(2, 1)`` confidence; a
    ``Poisson(nu tau)`` number of clutter detections land uniformly in the
    arena with ``Beta(1, 2)`` confidence.
    """
    states = frame.states
    p_miss = min(1.0, params.miss_rate * params.dt)
    hit = rng.random(len(states)) >= p_miss
    xy = states[hit, :2]
    noise = rng.standard_normal((len(xy), 2)) @ params._cov_chol.T
    true_dets = np.column_stack((xy + noise, rng.beta(2.0, 1.0, len(xy))))
    nf = rng.poisson(params.false_rate * params.dt)
    clutter = np.column_stack((_uniform_in_arena(nf, params.arena, rng), rng.beta(1.0, 2.0, nf)))
    dets = np.vstack((true_dets.reshape(-1, 3), clutter.reshape(-1, 3)))
    return dets[rng.permutation(len(dets))]


def simulate(params: ModelParams, n_frames: int, seed: int, **truth_kw) -> Scenario:
    """Truth plus one detection set per frame from a single seeded stream."""
    rng = np.random.default_rng(seed)
    sc = generate_truth(params, n_frames, rng, seed=seed, **truth_kw)
    sc.detections = [generate_detections(f, params, rng) for f in sc.frames]
    return sc
